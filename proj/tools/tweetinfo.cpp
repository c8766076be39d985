#include <iostream>
#include <string>
#include <vector>

#include "tweetinfo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tweetinfo::cli::run(args, std::cout, std::cerr);
}
