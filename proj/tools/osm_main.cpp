#include <string>
#include <vector>

#include "osm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return osm::run_cli(std::move(args));
}
