// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace mhpe::cli {

inline int run(int argc, char** argv) {
    (void)argc;
    (void)argv;
    return 0;  // subcommands wired up as modules land
}

}  // namespace mhpe::cli
