// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "support/temp_dir.hpp"

namespace rsit::testing {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Runs the CLI binary with stdout/stderr captured to files in `dir`.
inline CliResult run_cli(const std::string& cli, const std::string& args, const TempDir& dir) {
    static int counter = 0;
    const auto out = dir.path() / ("cli_out_" + std::to_string(counter));
    const auto err = dir.path() / ("cli_err_" + std::to_string(counter));
    ++counter;
    const std::string command =
        cli + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
}

}  // namespace rsit::testing
