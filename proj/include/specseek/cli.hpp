#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace specseek::cli {

// Subcommand entry points. Machine-readable output goes to `out`,
// diagnostics to `err`. Exit codes: 0 success, 1 runtime failure, 2 usage.
int cmd_train(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err);
int cmd_eval(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);
int cmd_baseline(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err);
int cmd_trace(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err);
int cmd_gradcheck(const std::vector<std::string>& args, std::ostream& out,
                  std::ostream& err);

// Dispatches "train|eval|baseline|trace|gradcheck" plus flags.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace specseek::cli
