#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "magmap_cli/config.hpp"

namespace magmap::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

int cmd_synth(const RunConfig& config, std::ostream& out);
int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_predict(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_bench(const RunConfig& config, std::ostream& out);
int cmd_render(const RunConfig& config, std::ostream& out);

/// Full command line (without the program name); returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace magmap::cli
