#pragma once

// Command-line front end: analyze, classify, operator, sweep, selfcheck.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace specid::cli {

enum ExitCode { kOk = 0, kFailure = 1, kInvalid = 2, kNumeric = 3 };

struct RunConfig {
    std::string kernel = "gauss";
    std::optional<std::vector<double>> grid;  // a0, ratio, count
    std::vector<double> alphas = {0.5};
    double p = 0.5;
    std::optional<std::pair<double, double>> interval;
    std::string out;
    std::string format = "csv";
    int jobs = 1;
};

struct SweepRecord {
    std::string criterion;
    double x_or_b = 0.0;
    double a_or_eps = 0.0;
    double value = 0.0;
    double est_abs_error = 0.0;
};

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

/// Header plus one row per record.
std::string to_csv(const std::vector<SweepRecord>& records);

/// Writes through a temporary file in the same directory and renames it
/// into place, so a failed run never leaves a partial file.
void write_atomic(const std::string& path, const std::string& content);

/// Runs the program on argv-style arguments (args[0] is the program name).
/// Everything is printed to out/err; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace specid::cli
