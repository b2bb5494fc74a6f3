#include <string>
#include <vector>

#include "carnot_gibbs/cli_app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return carnot_gibbs::run_cli(std::move(args));
}
