#include <iostream>

#include "rank_reward_cli/cli.hpp"

int main(int argc, char** argv) {
  return rank_reward::cli::run_cli(argc, argv, std::cout, std::cerr);
}
