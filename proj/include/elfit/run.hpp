#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "elfit/config.hpp"
#include "elfit/records.hpp"

namespace elfit {

/// Runs the experiment and returns its records (no I/O).
RecordTable execute(const RunConfig& cfg);

/// Executes and writes the output (atomically to cfg.out_path, or to `out`).
/// Returns 0 on success, 2 on configuration or output errors, 3 on numeric failure.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Full command-line entry point: parse, run, map errors to exit codes.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elfit
