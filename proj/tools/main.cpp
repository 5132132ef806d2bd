// SPDX-License-Identifier: Apache-2.0
#include "mhpe/cli.hpp"

int main(int argc, char** argv) { return mhpe::cli::run(argc, argv); }
