#include <iostream>

#include "kwise/cli.hpp"

int main(int argc, char** argv) {
  int code = 0;
  const auto config = kwise::cli::parse_args(argc, argv, std::cout, std::cerr, code);
  if (!config) return code;
  return kwise::cli::run(*config, std::cout, std::cerr);
}
