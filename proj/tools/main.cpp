#include <vector>

#include "souplab/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return souplab::run_cli(args);
}
