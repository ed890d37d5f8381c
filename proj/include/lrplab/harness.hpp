#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrplab/model_params.hpp"

namespace lrplab {

/// Invalid or incomplete experiment configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LrpBlock {
  double x0 = 0.5;
  std::uint64_t n_steps = 1000000;
  double checkpoint_ratio = 1.7782794100389228;
  /// "normalized" records (1 - x)/rho_n; "pi_zero" records 1 - 2x (Coupled, p_A = p_B).
  std::string mode = "normalized";
  bool write_trajectories = false;
  /// Optional histogram of the terminal y values: {lo, hi, count}.
  std::optional<std::vector<double>> terminal_bins;
};

struct BinSpec {
  double lo = 0.0;
  double hi = 0.0;
  double width = 0.05;
};

struct PdmpBlock {
  double g = 1.0;
  /// Defaults to r_A.
  std::optional<double> y0;
  double horizon = 1e6;
  double burn_in_fraction = 0.1;
  int batches = 32;
  /// Defaults to width 0.05 on [r_A, r_A + 10 max(1, g)].
  std::optional<BinSpec> bins;
  bool write_path = false;
};

struct DensityBlock {
  double g = 1.0;
  int n_max = 20;
  int points_per_interval = 256;
  /// Spacing of the exported y grid.
  double grid_step = 0.01;
};

struct LaplaceBlock {
  double g = 1.0;
  std::vector<double> p = {0.0, 0.5, 1.0};
  double tol = 1e-10;
};

struct SeedBlock {
  std::uint64_t master = 1;
  std::uint64_t count = 1;
};

struct CompareBlock {
  std::string empirical;
  std::string analytic;
  double l1_tolerance = 0.05;
  double mean_tolerance = 0.01;      // relative
  double variance_tolerance = 0.05;  // relative
  /// Bin width used when both inputs are density tables.
  double bin_width = 0.05;
};

struct ExperimentConfig {
  std::optional<BanditParams> params;
  std::optional<ScheduleSpec> schedule;
  std::optional<LrpBlock> lrp;
  std::optional<PdmpBlock> pdmp;
  std::optional<DensityBlock> density;
  std::optional<LaplaceBlock> laplace;
  SeedBlock seeds;
  unsigned jobs = 1;
  std::string output_dir = "out";
  std::optional<CompareBlock> compare;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Throws ConfigError on missing or ill-typed fields and on invalid values.
ExperimentConfig config_from_json(const nlohmann::json& j);

nlohmann::json schedule_to_json(const ScheduleSpec& spec);
ScheduleSpec schedule_from_json(const nlohmann::json& j);

/// Sets the value at a dotted path ("pdmp.horizon"), creating objects as
/// needed. The value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a JSON document, throwing ConfigError on I/O or parse failure.
nlohmann::json load_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// All randomness flows from (master, index); trajectory i of a batch uses index i.
struct RunContext {
  ExperimentConfig config;
  std::filesystem::path out_dir;
  /// Messages for the user (e.g. no theorem applies to the schedule).
  std::vector<std::string> warnings;
};

struct CheckpointSummary {
  std::uint64_t n;
  double median_y;
  double q25_y;
  double q75_y;
  double median_x;
  /// Median of |y - (1 - p_A)/pi| / ((1 - p_A)/pi); NaN when pi = 0.
  double median_relative_error;
};

struct LrpRunSummary {
  std::vector<double> terminal_x;
  std::vector<double> terminal_y;
  std::vector<CheckpointSummary> checkpoints;
  std::uint64_t clamp_count = 0;
  std::vector<std::filesystem::path> files;
};

struct PdmpRunSummary {
  double mean;
  double mean_error;
  double variance;
  double variance_error;
  double analytic_mean;
  double analytic_variance;
  std::uint64_t jumps;
  std::vector<std::filesystem::path> files;
};

struct MetricRow {
  std::string name;
  double empirical;
  double analytic;
  double tolerance;
  bool pass;
};

struct ComparisonReport {
  std::vector<MetricRow> rows;
  bool pass = true;
  double runtime_seconds = 0.0;
  std::uint64_t master_seed = 0;
  std::string empirical_file;
  std::string analytic_file;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

LrpRunSummary cmd_simulate_lrp(RunContext& ctx);
PdmpRunSummary cmd_simulate_pdmp(RunContext& ctx);
std::filesystem::path cmd_density(RunContext& ctx);
std::filesystem::path cmd_laplace(RunContext& ctx);
/// Writes schedule_report.json and returns the human-readable report.
std::string cmd_validate_schedule(RunContext& ctx);
ComparisonReport cmd_compare(RunContext& ctx);

/// Probability masses of a table file over uniform bins, plus what falls
/// below and above them. Histogram tables keep their own bins.
struct BinnedMass {
  std::vector<double> edges;
  std::vector<double> mass;
  double below = 0.0;
  double above = 0.0;
};

/// Reads a histogram table (bin_lo,bin_hi,weight,normalized_density).
BinnedMass read_histogram_table(const std::filesystem::path& path);
/// Integrates a density table (y,phi,interval,cdf) over the given edges.
/// Throws std::invalid_argument if the edges reach outside the table.
BinnedMass read_density_table(const std::filesystem::path& path, const std::vector<double>& edges);

/// Sum of |mass differences| over bins, below and above. Throws
/// std::invalid_argument if the bins differ.
double l1_distance(const BinnedMass& a, const BinnedMass& b);

}  // namespace lrplab
