#include <iostream>

#include "qngc/cli.hpp"

int main(int argc, char** argv) {
  return qngc::cli::run(argc, argv, std::cout, std::cerr);
}
