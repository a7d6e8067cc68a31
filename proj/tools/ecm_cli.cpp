#include "ecm/cli.hpp"

#include <string>
#include <vector>

int main(int argc, char** argv) {
  return ecm::cli::run(std::vector<std::string>(argv, argv + argc));
}
