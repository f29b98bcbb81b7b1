#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gmmtree {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitData = 3,
    kExitNumerical = 4,
    kExitDivergence = 5,
};

/// Runs one subcommand (train, impute, benchmark, eval). `args` excludes the
/// program name. Messages go to `out` and `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_impute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_benchmark(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gmmtree
