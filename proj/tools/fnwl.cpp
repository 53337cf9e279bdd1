// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "fnwl/cli.hpp"

int main(int argc, char** argv) { return fnwl::cli::run(std::vector<std::string>(argv, argv + argc)); }
