#include <string>
#include <vector>

#include "datanexus/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return datanexus::cli::run_command(args);
}
