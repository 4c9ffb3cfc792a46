#include <vector>

#include "ratrial/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ratrial::run_cli(args);
}
