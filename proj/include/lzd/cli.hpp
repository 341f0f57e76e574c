#pragma once

// Command implementations behind the `lzd` executable. Every command returns
// a process exit code and writes only to the given streams and its declared
// output files, so the commands can be driven directly from tests.

#include "lzd/analysis.hpp"
#include "lzd/errors.hpp"
#include "lzd/integrator.hpp"
#include "lzd/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lzd::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kNonConvergence = 2,
  kPartialSweep = 3,
  kUnidentifiable = 4,
  kCheckFailed = 5,
};

/// Malformed configuration; the message names the offending line and key.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Contents of a flat `key = value` run configuration.
struct RunConfig {
  ModelParams params;
  BiasProfile bias = LinearSweep{1.0};
  SimConfig sim;
  std::optional<double> t_start;
  std::optional<unsigned long long> seed;
};

/// Parses a configuration document. `base_dir` resolves relative bias.file
/// paths.
[[nodiscard]] RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// `lo:hi:n:lin|log`, a comma-separated list, or a single value.
[[nodiscard]] std::vector<double> parse_grid(const std::string& spec);

/// Six significant digits; integral values keep a trailing ".0".
[[nodiscard]] std::string format_short(double value);
/// Round-trip precision (17 significant digits).
[[nodiscard]] std::string format_full(double value);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Reads `v,x_inf[,weight]` rows; a leading header row is skipped.
[[nodiscard]] std::vector<FitSample> read_fit_data(const std::filesystem::path& path);

[[nodiscard]] std::string sweep_csv(const SweepTable& table);

struct SimulateOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> trajectory;
  bool full = false;
};

struct SweepOptions {
  std::filesystem::path config;
  std::optional<std::string> v_grid;
  std::optional<std::string> gamma_grid;
  std::optional<std::filesystem::path> out;
  unsigned threads = 0;
};

struct LimitsOptions {
  double delta1 = 1.0;
  double v = 1.0;
  double gamma_d = 0.0;
  std::optional<double> t;
};

struct FitOptions {
  std::filesystem::path data;
  std::filesystem::path config;
  std::optional<double> alpha;
  std::optional<std::string> bounds;
  std::optional<std::filesystem::path> report;
  /// Standard deviation of Gaussian noise added to the data (uses `seed`).
  double noise = 0.0;
};

struct CheckOptions {
  std::filesystem::path config;
};

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err);
int cmd_limits(const LimitsOptions& opts, std::ostream& out, std::ostream& err);
int cmd_fit(const FitOptions& opts, std::ostream& out, std::ostream& err);
int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lzd::cli
