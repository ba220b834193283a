#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qngc {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;
using Vector4c = Eigen::Vector4cd;

/// Two-qubit polarization state in the |HH>, |HV>, |VH>, |VV> basis. The first
/// qubit is the X photon, the second the XX photon.
class DensityMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  /// Validates hermiticity, unit trace and positivity.
  explicit DensityMatrix(const Matrix4c& rho);

  static DensityMatrix pure(const Vector4c& psi);
  static DensityMatrix maximally_mixed();
  /// p |Phi+><Phi+| + (1 - p) I/4.
  static DensityMatrix werner(double p);

  const Matrix4c& matrix() const { return rho_; }
  Complex operator()(int r, int c) const { return rho_(r, c); }
  Eigen::Vector4d eigenvalues() const;

 private:
  Matrix4c rho_;
};

/// (|HH> + e^{i phase} |VV>)/sqrt(2).
Vector4c phi_plus(double phase = 0.0);

/// Analyzer direction on the Bloch sphere; the observable is n . sigma.
class BlochAxis {
 public:
  BlochAxis(double x, double y, double z);
  static BlochAxis sigma_x() { return {1, 0, 0}; }
  static BlochAxis sigma_y() { return {0, 1, 0}; }
  static BlochAxis sigma_z() { return {0, 0, 1}; }

  const Eigen::Vector3d& direction() const { return n_; }
  Matrix2c observable() const;
  /// Projector onto the +1 (or -1) eigenspace.
  Matrix2c projector(int outcome) const;

 private:
  Eigen::Vector3d n_;
};

struct MeasurementSetting {
  BlochAxis x;
  BlochAxis xx;
};

/// CHSH analyzer settings: X0 = sigma_z, X1 = sigma_y,
/// XX0 = (sigma_z - sigma_y)/sqrt(2), XX1 = (sigma_z + sigma_y)/sqrt(2).
/// Index i*2 + j selects (X_i, XX_j).
std::array<MeasurementSetting, 4> chsh_settings();

struct Correlator {
  double value = 0.0;
  double sigma = 0.0;
};

struct ChshResult {
  double s_value = 0.0;
  double sigma_s = 0.0;
  // E00, E01, E10, E11.
  std::array<Correlator, 4> correlators{};
};

double correlator(const DensityMatrix& rho, const MeasurementSetting& setting);

/// S = E00 + E01 + E10 - E11 evaluated exactly on rho.
ChshResult chsh_expectation(const DensityMatrix& rho);

/// Coincidences for one setting: N++, N+-, N-+, N-- (X outcome first).
using OutcomeCounts = std::array<std::uint64_t, 4>;

ChshResult chsh_from_counts(const std::array<OutcomeCounts, 4>& counts);

/// Tomography projector labels in the order H, V, D, R.
enum class PolarizationState { H, V, D, R };

Eigen::Vector2cd polarization_ket(PolarizationState s);
char polarization_label(PolarizationState s);
PolarizationState parse_polarization(char label);

struct TomographyRecord {
  PolarizationState x;
  PolarizationState xx;
  double count = 0.0;
  // Relative integration (time x rate) of this setting.
  double weight = 1.0;
};

struct TomographyCounts {
  std::vector<TomographyRecord> records;
};

/// The 16 settings {H,V,D,R} x {H,V,D,R} with zero counts.
TomographyCounts tomography_settings();

/// Expected counts total * weight * <psi|rho|psi> for each record's setting.
TomographyCounts expected_tomography_counts(const DensityMatrix& rho, double total);

struct TomographyOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

struct TomographyResult {
  DensityMatrix rho;
  double log_likelihood;
  double log_likelihood_projected;  // at the projected linear estimate
  int iterations;
};

/// Linear inversion, projection onto the physical set, then likelihood ascent.
TomographyResult tomography_reconstruct(const TomographyCounts& counts,
                                        const TomographyOptions& options = {});

/// Poisson log-likelihood of the counts with the overall rate profiled out.
double tomography_log_likelihood(const TomographyCounts& counts, const Matrix4c& rho);

/// Closest unit-trace positive semidefinite matrix (eigenvalue simplex projection).
Matrix4c project_to_physical(const Matrix4c& hermitian);

/// <psi|rho|psi>. Throws InvalidArgument unless |psi| = 1 within 1e-9.
double fidelity(const DensityMatrix& rho, const Vector4c& target);

/// max over phi of fidelity to (|HH> + e^{i phi}|VV>)/sqrt(2).
double fidelity_phase_optimized(const DensityMatrix& rho);

struct PolarizationOutcome {
  int x;
  int xx;
};

/// Born probabilities of (+,+), (+,-), (-,+), (-,-).
std::array<double, 4> outcome_probabilities(const DensityMatrix& rho, const MeasurementSetting& setting);

PolarizationOutcome sample_polarization_pair(const DensityMatrix& rho, const MeasurementSetting& setting,
                                             std::mt19937_64& rng);

/// Applies the fine-structure precession e^{-i phase} to the HH-VV coherence.
Matrix4c precess_coherence(const Matrix4c& rho, double phase);

}  // namespace qngc
