// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "sdcd/cli.hpp"

int main(int argc, char** argv) { return sdcd::run_cli(argc, argv, std::cout, std::cerr); }
