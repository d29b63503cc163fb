#include <iostream>

#include "lottery/cli/app.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return lottery::run_ltlab({argv + 1, argv + argc}, std::cout, std::cerr);
}
