#include "cal/cli.hpp"

int main(int argc, char** argv) {
  return cal::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
