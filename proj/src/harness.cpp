#include "lrplab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lrplab/analytics.hpp"
#include "lrplab/density.hpp"
#include "lrplab/lrp_sim.hpp"
#include "lrplab/parallel.hpp"
#include "lrplab/pdmp_sim.hpp"

namespace lrplab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class T>
T field(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) {
    throw ConfigError(std::string(where) + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
void maybe(const json& j, const char* key, T& out, const char* where) {
  if (j.contains(key)) {
    out = field<T>(j, key, where);
  }
}

const json& block(const json& j, const char* key) {
  const json& b = j.at(key);
  if (!b.is_object()) {
    throw ConfigError(std::string("'") + key + "' must be an object");
  }
  return b;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// CSV file with '#' provenance lines ahead of the header.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& command, const json& config)
      : out_(path), path_(path) {
    if (!out_) {
      throw std::runtime_error("cannot write " + path.string());
    }
    out_ << "# lrplab " << command << '\n';
    out_ << "# config_hash=" << config_hash(config) << '\n';
    out_ << "# config=" << config.dump() << '\n';
  }

  void comment(const std::string& key, const std::string& value) {
    out_ << "# " << key << '=' << value << '\n';
  }
  void header(std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
      out_ << (first ? "" : ",") << c;
      first = false;
    }
    out_ << '\n';
  }
  template <class... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(vals), first = false), ...);
    out_ << '\n';
  }
  const fs::path& path() const { return path_; }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(std::uint64_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

  std::ofstream out_;
  fs::path path_;
};

double quantile(std::vector<double> v, double q) {
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

const BanditParams& need_params(const ExperimentConfig& cfg) {
  if (!cfg.params) {
    throw ConfigError("p_A and p_B are required");
  }
  return *cfg.params;
}

fs::path prepare_dir(RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  return ctx.out_dir;
}

}  // namespace

json schedule_to_json(const ScheduleSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PowerLaw>) {
          return {{"variant", "PowerLaw"}, {"C", s.C}, {"a", s.a}, {"C_prime", s.C_prime}, {"r", s.r}};
        } else if constexpr (std::is_same_v<T, ConstantPenalty>) {
          return {{"variant", "ConstantPenalty"}, {"C", s.C}, {"a", s.a}, {"rho", s.rho}};
        } else {
          return {{"variant", "Coupled"}, {"g", s.g}, {"a_coef", s.a_coef}};
        }
      },
      spec.variant());
}

ScheduleSpec schedule_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("schedule must be an object");
  }
  const auto variant = field<std::string>(j, "variant", "schedule");
  try {
    if (variant == "PowerLaw") {
      return ScheduleSpec{PowerLaw{field<double>(j, "C", "schedule"), field<double>(j, "a", "schedule"),
                                   field<double>(j, "C_prime", "schedule"),
                                   field<double>(j, "r", "schedule")}};
    }
    if (variant == "ConstantPenalty") {
      return ScheduleSpec{ConstantPenalty{field<double>(j, "C", "schedule"),
                                          field<double>(j, "a", "schedule"),
                                          field<double>(j, "rho", "schedule")}};
    }
    if (variant == "Coupled") {
      return ScheduleSpec{
          Coupled{field<double>(j, "g", "schedule"), field<double>(j, "a_coef", "schedule")}};
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("schedule.variant must be PowerLaw, ConstantPenalty or Coupled, got '" +
                    variant + "'");
}

json to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  if (cfg.params) {
    j["p_A"] = cfg.params->p_A;
    j["p_B"] = cfg.params->p_B;
  }
  if (cfg.schedule) {
    j["schedule"] = schedule_to_json(*cfg.schedule);
  }
  if (cfg.lrp) {
    const LrpBlock& b = *cfg.lrp;
    j["lrp"] = {{"x0", b.x0},
                {"n_steps", b.n_steps},
                {"checkpoint_ratio", b.checkpoint_ratio},
                {"mode", b.mode},
                {"write_trajectories", b.write_trajectories}};
    if (b.terminal_bins) {
      j["lrp"]["terminal_bins"] = *b.terminal_bins;
    }
  }
  if (cfg.pdmp) {
    const PdmpBlock& b = *cfg.pdmp;
    j["pdmp"] = {{"g", b.g},
                 {"horizon", b.horizon},
                 {"burn_in_fraction", b.burn_in_fraction},
                 {"batches", b.batches},
                 {"write_path", b.write_path}};
    if (b.y0) {
      j["pdmp"]["y0"] = *b.y0;
    }
    if (b.bins) {
      j["pdmp"]["bins"] = {{"lo", b.bins->lo}, {"hi", b.bins->hi}, {"width", b.bins->width}};
    }
  }
  if (cfg.density) {
    const DensityBlock& b = *cfg.density;
    j["density"] = {{"g", b.g},
                    {"n_max", b.n_max},
                    {"points_per_interval", b.points_per_interval},
                    {"grid_step", b.grid_step}};
  }
  if (cfg.laplace) {
    j["laplace"] = {{"g", cfg.laplace->g}, {"p", cfg.laplace->p}, {"tol", cfg.laplace->tol}};
  }
  j["seeds"] = {{"master", cfg.seeds.master}, {"count", cfg.seeds.count}};
  j["jobs"] = cfg.jobs;
  j["output"] = {{"dir", cfg.output_dir}};
  if (cfg.compare) {
    const CompareBlock& b = *cfg.compare;
    j["compare"] = {{"empirical", b.empirical},
                    {"analytic", b.analytic},
                    {"l1_tolerance", b.l1_tolerance},
                    {"mean_tolerance", b.mean_tolerance},
                    {"variance_tolerance", b.variance_tolerance},
                    {"bin_width", b.bin_width}};
  }
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  ExperimentConfig cfg;
  if (j.contains("p_A") || j.contains("p_B")) {
    try {
      cfg.params = BanditParams(field<double>(j, "p_A", "config"), field<double>(j, "p_B", "config"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("schedule")) {
    cfg.schedule = schedule_from_json(j.at("schedule"));
  }
  if (j.contains("lrp")) {
    const json& b = block(j, "lrp");
    LrpBlock l;
    maybe(b, "x0", l.x0, "lrp");
    maybe(b, "n_steps", l.n_steps, "lrp");
    maybe(b, "checkpoint_ratio", l.checkpoint_ratio, "lrp");
    maybe(b, "mode", l.mode, "lrp");
    maybe(b, "write_trajectories", l.write_trajectories, "lrp");
    if (b.contains("terminal_bins")) {
      l.terminal_bins = field<std::vector<double>>(b, "terminal_bins", "lrp");
      const auto& tb = *l.terminal_bins;
      if (tb.size() != 3 || !(tb[1] > tb[0]) || !(tb[2] >= 1) || tb[2] != std::floor(tb[2])) {
        throw ConfigError("lrp.terminal_bins must be [lo, hi, count] with lo < hi, count >= 1");
      }
    }
    if (l.mode != "normalized" && l.mode != "pi_zero") {
      throw ConfigError("lrp.mode must be 'normalized' or 'pi_zero'");
    }
    if (!(l.x0 >= 0.0 && l.x0 <= 1.0)) {
      throw ConfigError("lrp.x0 must lie in [0, 1]");
    }
    if (!(l.checkpoint_ratio > 1.0)) {
      throw ConfigError("lrp.checkpoint_ratio must exceed 1");
    }
    cfg.lrp = l;
  }
  if (j.contains("pdmp")) {
    const json& b = block(j, "pdmp");
    PdmpBlock p;
    maybe(b, "g", p.g, "pdmp");
    if (b.contains("y0") && !b.at("y0").is_null()) {
      p.y0 = field<double>(b, "y0", "pdmp");
    }
    maybe(b, "horizon", p.horizon, "pdmp");
    maybe(b, "burn_in_fraction", p.burn_in_fraction, "pdmp");
    maybe(b, "batches", p.batches, "pdmp");
    maybe(b, "write_path", p.write_path, "pdmp");
    if (b.contains("bins")) {
      const json& bb = b.at("bins");
      BinSpec s;
      s.lo = field<double>(bb, "lo", "pdmp.bins");
      s.hi = field<double>(bb, "hi", "pdmp.bins");
      maybe(bb, "width", s.width, "pdmp.bins");
      if (!(s.hi > s.lo && s.width > 0.0)) {
        throw ConfigError("pdmp.bins needs lo < hi and width > 0");
      }
      p.bins = s;
    }
    if (!(p.horizon > 0.0)) {
      throw ConfigError("pdmp.horizon must be positive");
    }
    if (!(p.g > 0.0)) {
      throw ConfigError("pdmp.g must be positive");
    }
    if (p.y0 && !(*p.y0 >= 0.0)) {
      throw ConfigError("pdmp.y0 must be non-negative");
    }
    if (!(p.burn_in_fraction >= 0.0 && p.burn_in_fraction < 1.0)) {
      throw ConfigError("pdmp.burn_in_fraction must lie in [0, 1)");
    }
    if (p.batches < 2) {
      throw ConfigError("pdmp.batches must be at least 2");
    }
    cfg.pdmp = p;
  }
  if (j.contains("density")) {
    const json& b = block(j, "density");
    DensityBlock d;
    maybe(b, "g", d.g, "density");
    maybe(b, "n_max", d.n_max, "density");
    maybe(b, "points_per_interval", d.points_per_interval, "density");
    maybe(b, "grid_step", d.grid_step, "density");
    if (!(d.g > 0.0) || d.n_max < 2 || d.points_per_interval < 16 || !(d.grid_step > 0.0)) {
      throw ConfigError(
          "density needs g > 0, n_max >= 2, points_per_interval >= 16, grid_step > 0");
    }
    cfg.density = d;
  }
  if (j.contains("laplace")) {
    const json& b = block(j, "laplace");
    LaplaceBlock l;
    maybe(b, "g", l.g, "laplace");
    maybe(b, "p", l.p, "laplace");
    maybe(b, "tol", l.tol, "laplace");
    if (!(l.g > 0.0) || !(l.tol > 0.0) ||
        std::any_of(l.p.begin(), l.p.end(), [](double v) { return !(v >= 0.0); })) {
      throw ConfigError("laplace needs g > 0, tol > 0 and p >= 0");
    }
    cfg.laplace = l;
  }
  if (j.contains("seeds")) {
    const json& b = block(j, "seeds");
    maybe(b, "master", cfg.seeds.master, "seeds");
    maybe(b, "count", cfg.seeds.count, "seeds");
  }
  maybe(j, "jobs", cfg.jobs, "config");
  if (j.contains("output")) {
    maybe(block(j, "output"), "dir", cfg.output_dir, "output");
  }
  if (j.contains("compare")) {
    const json& b = block(j, "compare");
    CompareBlock c;
    maybe(b, "empirical", c.empirical, "compare");
    maybe(b, "analytic", c.analytic, "compare");
    maybe(b, "l1_tolerance", c.l1_tolerance, "compare");
    maybe(b, "mean_tolerance", c.mean_tolerance, "compare");
    maybe(b, "variance_tolerance", c.variance_tolerance, "compare");
    maybe(b, "bin_width", c.bin_width, "compare");
    cfg.compare = c;
  }
  return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) {
      throw ConfigError("--set: empty path component in '" + key + "'");
    }
    if (!node->is_object()) {
      if (!node->is_null()) {
        throw ConfigError("--set: '" + key + "' descends into a non-object");
      }
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LrpRunSummary cmd_simulate_lrp(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  const BanditParams& params = need_params(cfg);
  if (!cfg.schedule) {
    throw ConfigError("simulate-lrp needs a schedule");
  }
  if (!cfg.lrp) {
    throw ConfigError("simulate-lrp needs an lrp block");
  }
  const LrpBlock& lb = *cfg.lrp;
  const ScheduleSpec& spec = *cfg.schedule;
  const ConditionReport report = validate_schedule(spec, params);
  if (report.enabled.empty()) {
    ctx.warnings.push_back("no convergence theorem applies to this schedule; running anyway");
  }

  const CheckpointGrid grid{1.0, lb.checkpoint_ratio};
  std::vector<Trajectory> runs;
  if (lb.mode == "pi_zero") {
    const auto* coupled = std::get_if<Coupled>(&spec.variant());
    if (coupled == nullptr || params.gap() != 0.0) {
      throw ConfigError("lrp.mode pi_zero needs a Coupled schedule and p_A == p_B");
    }
    runs = run_pi_zero_batch(*coupled, params, lb.x0, lb.n_steps, cfg.seeds.master,
                             cfg.seeds.count, cfg.jobs, grid);
  } else {
    runs = run_batch(spec, params, lb.x0, lb.n_steps, cfg.seeds.master, cfg.seeds.count, cfg.jobs,
                     grid);
  }

  const json cj = to_json(cfg);
  const fs::path dir = prepare_dir(ctx);
  LrpRunSummary out;
  for (const Trajectory& t : runs) {
    out.terminal_x.push_back(t.x.back());
    out.terminal_y.push_back(t.y.back());
    out.clamp_count += t.clamp_count;
  }

  CsvWriter summary(dir / "summary.csv", "simulate-lrp", cj);
  summary.comment("master_seed", std::to_string(cfg.seeds.master));
  summary.comment("clamp_count", std::to_string(out.clamp_count));
  summary.header({"seed", "terminal_x", "terminal_y"});
  for (std::size_t i = 0; i < runs.size(); ++i) {
    summary.row(static_cast<std::uint64_t>(i), out.terminal_x[i], out.terminal_y[i]);
  }
  out.files.push_back(summary.path());

  const double target = params.gap() > 0.0 && lb.mode == "normalized"
                            ? (1.0 - params.p_A) / params.gap()
                            : std::numeric_limits<double>::quiet_NaN();
  CsvWriter cps(dir / "checkpoints.csv", "simulate-lrp", cj);
  cps.header({"n", "median_y", "q25_y", "q75_y", "median_x", "median_relative_error"});
  if (!runs.empty()) {
    for (std::size_t c = 0; c < runs.front().n.size(); ++c) {
      std::vector<double> ys, xs, errs;
      for (const Trajectory& t : runs) {
        ys.push_back(t.y[c]);
        xs.push_back(t.x[c]);
        errs.push_back(std::abs(t.y[c] - target) / target);
      }
      CheckpointSummary s{runs.front().n[c], quantile(ys, 0.5), quantile(ys, 0.25),
                          quantile(ys, 0.75), quantile(xs, 0.5), quantile(errs, 0.5)};
      cps.row(s.n, s.median_y, s.q25_y, s.q75_y, s.median_x, s.median_relative_error);
      out.checkpoints.push_back(s);
    }
  }
  out.files.push_back(cps.path());

  if (lb.write_trajectories) {
    fs::create_directories(dir / "trajectories");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      CsvWriter tw(dir / "trajectories" / ("traj_" + std::to_string(i) + ".csv"), "simulate-lrp", cj);
      tw.comment("stream", std::to_string(cfg.seeds.master) + ":" + std::to_string(i));
      tw.header({"n", "x", "y"});
      for (std::size_t c = 0; c < runs[i].n.size(); ++c) {
        tw.row(runs[i].n[c], runs[i].x[c], runs[i].y[c]);
      }
      out.files.push_back(tw.path());
    }
  }

  if (lb.terminal_bins) {
    const auto& tb = *lb.terminal_bins;
    const auto count = static_cast<std::size_t>(tb[2]);
    const double w = (tb[1] - tb[0]) / static_cast<double>(count);
    std::vector<double> weights(count, 0.0);
    double below = 0.0, above = 0.0;
    for (double y : out.terminal_y) {
      if (y < tb[0]) {
        below += 1.0;
      } else if (y >= tb[1]) {
        above += 1.0;
      } else {
        weights[std::min(count - 1, static_cast<std::size_t>((y - tb[0]) / w))] += 1.0;
      }
    }
    const double total = static_cast<double>(out.terminal_y.size());
    CsvWriter hw(dir / "terminal_histogram.csv", "simulate-lrp", cj);
    hw.comment("underflow", num(below));
    hw.comment("overflow", num(above));
    hw.comment("total", num(total));
    hw.header({"bin_lo", "bin_hi", "weight", "normalized_density"});
    for (std::size_t i = 0; i < count; ++i) {
      const double lo = tb[0] + w * static_cast<double>(i);
      hw.row(lo, lo + w, weights[i], total > 0.0 ? weights[i] / total / w : 0.0);
    }
    out.files.push_back(hw.path());
  }
  return out;
}

PdmpRunSummary cmd_simulate_pdmp(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  const BanditParams& params = need_params(cfg);
  if (!cfg.pdmp) {
    throw ConfigError("simulate-pdmp needs a pdmp block");
  }
  const PdmpBlock& pb = *cfg.pdmp;
  if (!(pb.horizon > 0.0)) {
    throw ConfigError("pdmp.horizon must be positive");
  }
  if (cfg.seeds.count == 0) {
    throw ConfigError("simulate-pdmp needs seeds.count >= 1");
  }
  const double y0 = pb.y0.value_or(params.r_A());
  HistogramBins bins = HistogramBins::defaults(params, pb.g);
  if (pb.bins) {
    bins.lo = pb.bins->lo;
    bins.hi = pb.bins->hi;
    bins.count = static_cast<std::size_t>(
        std::max(1.0, std::round((bins.hi - bins.lo) / pb.bins->width)));
  }

  const std::size_t n = cfg.seeds.count;
  std::vector<OccupationHistogram> hists(n, OccupationHistogram(bins));
  std::vector<ErgodicMoments> moments(n);
  std::vector<std::uint64_t> jumps(n);
  std::vector<PdmpPath> kept(pb.write_path ? n : 0);
  parallel_for_index(n, cfg.jobs, [&](std::uint64_t i) {
    Rng rng(cfg.seeds.master, i);
    PdmpPath path = simulate_path(y0, pb.horizon, params, pb.g, rng);
    hists[i] = occupation_histogram(path, bins, pb.burn_in_fraction * pb.horizon);
    moments[i] = ergodic_moments(path, pb.burn_in_fraction, pb.batches);
    jumps[i] = path.jumps.size();
    if (pb.write_path) {
      kept[i] = std::move(path);
    }
  });

  OccupationHistogram merged(bins);
  PdmpRunSummary out{};
  double se_m = 0.0, se_v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    merged.merge(hists[i]);
    out.mean += moments[i].mean.value / static_cast<double>(n);
    out.variance += moments[i].variance.value / static_cast<double>(n);
    se_m += moments[i].mean.std_error * moments[i].mean.std_error;
    se_v += moments[i].variance.std_error * moments[i].variance.std_error;
    out.jumps += jumps[i];
  }
  out.mean_error = std::sqrt(se_m) / static_cast<double>(n);
  out.variance_error = std::sqrt(se_v) / static_cast<double>(n);
  const ConstantsBundle c = derived_constants(params, pb.g);
  out.analytic_mean = c.nu_mean.value_or(std::numeric_limits<double>::quiet_NaN());
  out.analytic_variance = c.nu_var.value_or(std::numeric_limits<double>::quiet_NaN());

  const json cj = to_json(cfg);
  const fs::path dir = prepare_dir(ctx);
  CsvWriter hw(dir / "histogram.csv", "simulate-pdmp", cj);
  hw.comment("underflow", num(merged.underflow));
  hw.comment("overflow", num(merged.overflow));
  hw.comment("total_time", num(merged.total_time));
  hw.header({"bin_lo", "bin_hi", "weight", "normalized_density"});
  const std::vector<double> dens = merged.density();
  for (std::size_t i = 0; i < bins.count; ++i) {
    hw.row(bins.edge(i), bins.edge(i + 1), merged.weights[i], dens[i]);
  }
  out.files.push_back(hw.path());

  CsvWriter mw(dir / "moments.csv", "simulate-pdmp", cj);
  mw.comment("jumps", std::to_string(out.jumps));
  mw.comment("error_method", "batch means, " + std::to_string(pb.batches) + " batches per path");
  mw.header({"quantity", "estimate", "std_error", "analytic"});
  mw.row(std::string("mean"), out.mean, out.mean_error, out.analytic_mean);
  mw.row(std::string("variance"), out.variance, out.variance_error, out.analytic_variance);
  out.files.push_back(mw.path());

  for (std::size_t i = 0; i < kept.size(); ++i) {
    CsvWriter pw(dir / ("path_" + std::to_string(i) + ".csv"), "simulate-pdmp", cj);
    pw.comment("y0", num(kept[i].y0));
    pw.comment("horizon", num(kept[i].horizon));
    pw.header({"jump_time", "pre_value", "post_value"});
    for (const PdmpJump& jmp : kept[i].jumps) {
      pw.row(jmp.time, jmp.pre, jmp.post);
    }
    out.files.push_back(pw.path());
  }
  return out;
}

fs::path cmd_density(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  const BanditParams& params = need_params(cfg);
  if (!cfg.density) {
    throw ConfigError("density needs a density block");
  }
  if (!(params.gap() > 0.0)) {
    throw ConfigError("density requires p_A > p_B");
  }
  const DensityBlock& db = *cfg.density;
  const PiecewiseDensity d(params, db.g, db.n_max, db.points_per_interval);

  const fs::path dir = prepare_dir(ctx);
  CsvWriter w(dir / "density.csv", "density", to_json(cfg));
  w.comment("boundary", to_string(d.boundary()));
  w.comment("lambda0", num(d.lambda0()));
  w.comment("intervals", std::to_string(d.intervals()));
  w.comment("tail_mass", num(d.tail_mass()));
  w.comment("mean", num(d.mean()));
  w.comment("variance", num(d.variance()));
  w.header({"y", "phi", "interval", "cdf"});
  // First row: the limit of phi at r_A.
  double at_edge = 0.0;
  if (d.boundary() == BoundaryClass::FinitePositive) {
    at_edge = d.lambda0();
  } else if (d.boundary() == BoundaryClass::Diverges) {
    at_edge = std::numeric_limits<double>::infinity();
  }
  w.row(d.r_A(), at_edge, 0, 0.0);
  // Past range_end() the values come from the fitted tail.
  const double end = d.r_A() + db.g * db.n_max;
  const auto steps =
      static_cast<std::uint64_t>(std::floor((end - d.r_A()) / db.grid_step * (1.0 + 1e-12)));
  for (std::uint64_t i = 1; i <= steps; ++i) {
    const double y = std::min(d.r_A() + db.grid_step * static_cast<double>(i), end);
    const int k = std::min(static_cast<int>((y - d.r_A()) / db.g), db.n_max - 1);
    w.row(y, d.phi(y), k, d.cdf(y));
  }
  return w.path();
}

fs::path cmd_laplace(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  const BanditParams& params = need_params(cfg);
  if (!cfg.laplace) {
    throw ConfigError("laplace needs a laplace block");
  }
  if (!(params.gap() > 0.0)) {
    throw ConfigError("laplace requires p_A > p_B");
  }
  const LaplaceBlock& lb = *cfg.laplace;
  const fs::path dir = prepare_dir(ctx);
  CsvWriter w(dir / "laplace.csv", "laplace", to_json(cfg));
  w.header({"p", "laplace", "uncertainty"});
  for (double p : lb.p) {
    const LaplaceValue v = laplace_nu(p, params, lb.g, lb.tol);
    w.row(p, v.value, 0.5 * (v.hi - v.lo));
  }
  return w.path();
}

std::string cmd_validate_schedule(RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  const BanditParams& params = need_params(cfg);
  if (!cfg.schedule) {
    throw ConfigError("validate-schedule needs a schedule");
  }
  const ConditionReport r = validate_schedule(*cfg.schedule, params);
  const std::vector<std::pair<const char*, bool>> flags = {
      {"gamma_sum_infinite", r.gamma_sum_infinite},
      {"hoeffding", r.hoeffding},
      {"rho_to_zero", r.rho_to_zero},
      {"gamma_over_rho_to_zero", r.gamma_over_rho_to_zero},
      {"gamma_over_rho_bounded", r.gamma_over_rho_bounded},
      {"sum_rho_gamma_infinite", r.sum_rho_gamma_infinite},
      {"rho_increment_small", r.rho_increment_small},
      {"beta_condition", r.beta_condition},
      {"eta_condition", r.eta_condition},
      {"gamma_square_increment_small", r.gamma_square_increment_small},
      {"coupled_condition", r.coupled_condition},
  };
  json j;
  j["config_hash"] = config_hash(to_json(cfg));
  j["schedule"] = schedule_to_json(*cfg.schedule);
  std::ostringstream text;
  text << "schedule " << cfg.schedule->name() << "\n";
  for (const auto& [name, value] : flags) {
    j["flags"][name] = value;
    text << "  " << name << ": " << (value ? "yes" : "no") << "\n";
  }
  if (r.coupled_g) {
    j["coupled_g"] = *r.coupled_g;
    text << "  coupled g: " << num(*r.coupled_g) << "\n";
  }
  j["enabled"] = json::array();
  text << "theorems enabled:";
  for (Theorem t : r.enabled) {
    j["enabled"].push_back(to_string(t));
    text << " " << to_string(t);
  }
  if (r.enabled.empty()) {
    text << " none";
  }
  text << "\n";
  const fs::path dir = prepare_dir(ctx);
  std::ofstream(dir / "schedule_report.json") << j.dump(2) << '\n';
  return text.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  return out;
}

double parse_num(const std::string& s, const fs::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) {
    throw std::invalid_argument(path.string() + ": bad number '" + s + "'");
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> comments;

  std::optional<double> comment_value(const std::string& key) const {
    for (const auto& [k, v] : comments) {
      if (k == key) {
        return std::strtod(v.c_str(), nullptr);
      }
    }
    return std::nullopt;
  }
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot read " + path.string());
  }
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos && line.size() > 2) {
        t.comments.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      }
      continue;
    }
    if (t.header.empty()) {
      t.header = split_csv(line);
      continue;
    }
    std::vector<double> row;
    for (const std::string& cell : split_csv(line)) {
      row.push_back(parse_num(cell, path));
    }
    if (row.size() != t.header.size()) {
      throw std::invalid_argument(path.string() + ": row width differs from header");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

bool is_histogram(const Table& t) {
  return t.header.size() >= 3 && t.header[0] == "bin_lo" && t.header[1] == "bin_hi" &&
         t.header[2] == "weight";
}

bool is_density(const Table& t) {
  return t.header.size() >= 4 && t.header[0] == "y" && t.header[1] == "phi" &&
         t.header[3] == "cdf";
}

BinnedMass histogram_mass(const Table& t, const fs::path& path) {
  if (t.rows.empty()) {
    throw std::invalid_argument(path.string() + ": empty histogram");
  }
  BinnedMass b;
  double sum = 0.0;
  for (const auto& row : t.rows) {
    if (b.edges.empty()) {
      b.edges.push_back(row[0]);
    } else if (std::abs(b.edges.back() - row[0]) > 1e-9 * std::max(1.0, std::abs(row[0]))) {
      throw std::invalid_argument(path.string() + ": bins are not contiguous");
    }
    b.edges.push_back(row[1]);
    b.mass.push_back(row[2]);
    sum += row[2];
  }
  b.below = t.comment_value("underflow").value_or(0.0);
  b.above = t.comment_value("overflow").value_or(0.0);
  const double total = t.comment_value("total_time")
                           .value_or(t.comment_value("total").value_or(sum + b.below + b.above));
  if (total > 0.0) {
    for (double& m : b.mass) m /= total;
    b.below /= total;
    b.above /= total;
  }
  return b;
}

BinnedMass density_mass(const Table& t, const std::vector<double>& edges, const fs::path& path) {
  if (t.rows.size() < 2) {
    throw std::invalid_argument(path.string() + ": density table needs at least two rows");
  }
  const double y_first = t.rows.front()[0];
  const double y_last = t.rows.back()[0];
  const double slack = 1e-9 * std::max(1.0, std::abs(y_last));
  const auto cdf = [&](double y) {
    if (y < y_first) {
      if (t.rows.front()[3] != 0.0) {
        throw std::invalid_argument(path.string() + ": bin edge " + num(y) +
                                    " lies below the table start " + num(y_first));
      }
      return 0.0;
    }
    if (y > y_last + slack) {
      throw std::invalid_argument(path.string() + ": bin edge " + num(y) +
                                  " lies beyond the table end " + num(y_last));
    }
    const auto it = std::lower_bound(t.rows.begin(), t.rows.end(), y,
                                     [](const std::vector<double>& r, double v) { return r[0] < v; });
    if (it == t.rows.end()) {
      return t.rows.back()[3];
    }
    if (it == t.rows.begin() || (*it)[0] == y) {
      return (*it)[3];
    }
    const auto& a = *(it - 1);
    const auto& b = *it;
    return a[3] + (b[3] - a[3]) * (y - a[0]) / (b[0] - a[0]);
  };
  BinnedMass out;
  out.edges = edges;
  std::vector<double> c(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    c[i] = cdf(edges[i]);
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    out.mass.push_back(c[i + 1] - c[i]);
  }
  out.below = c.front();
  out.above = 1.0 - c.back();
  return out;
}

struct BinnedMoments {
  double mean;
  double variance;
};

BinnedMoments binned_moments(const BinnedMass& b) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < b.mass.size(); ++i) {
    const double mid = 0.5 * (b.edges[i] + b.edges[i + 1]);
    m0 += b.mass[i];
    m1 += b.mass[i] * mid;
    m2 += b.mass[i] * mid * mid;
  }
  const double mean = m1 / m0;
  return {mean, m2 / m0 - mean * mean};
}

}  // namespace

BinnedMass read_histogram_table(const fs::path& path) {
  const Table t = read_table(path);
  if (!is_histogram(t)) {
    throw std::invalid_argument(path.string() + ": not a histogram table");
  }
  return histogram_mass(t, path);
}

BinnedMass read_density_table(const fs::path& path, const std::vector<double>& edges) {
  const Table t = read_table(path);
  if (!is_density(t)) {
    throw std::invalid_argument(path.string() + ": not a density table");
  }
  return density_mass(t, edges, path);
}

double l1_distance(const BinnedMass& a, const BinnedMass& b) {
  if (a.edges.size() != b.edges.size()) {
    throw std::invalid_argument("l1_distance: bin counts differ (" +
                                std::to_string(a.mass.size()) + " vs " +
                                std::to_string(b.mass.size()) + ")");
  }
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    if (std::abs(a.edges[i] - b.edges[i]) > 1e-9 * std::max(1.0, std::abs(a.edges[i]))) {
      throw std::invalid_argument("l1_distance: bin edge " + std::to_string(i) + " differs (" +
                                  num(a.edges[i]) + " vs " + num(b.edges[i]) + ")");
    }
  }
  double s = std::abs(a.below - b.below) + std::abs(a.above - b.above);
  for (std::size_t i = 0; i < a.mass.size(); ++i) {
    s += std::abs(a.mass[i] - b.mass[i]);
  }
  return s;
}

nlohmann::json ComparisonReport::to_json() const {
  json j;
  j["pass"] = pass;
  j["runtime_seconds"] = runtime_seconds;
  j["master_seed"] = master_seed;
  j["empirical"] = empirical_file;
  j["analytic"] = analytic_file;
  j["rows"] = json::array();
  for (const MetricRow& r : rows) {
    j["rows"].push_back({{"name", r.name},
                         {"empirical", r.empirical},
                         {"analytic", r.analytic},
                         {"tolerance", r.tolerance},
                         {"pass", r.pass}});
  }
  return j;
}

std::string ComparisonReport::to_text() const {
  std::ostringstream s;
  s << "empirical: " << empirical_file << "\nanalytic:  " << analytic_file << "\n";
  for (const MetricRow& r : rows) {
    s << (r.pass ? "PASS " : "FAIL ") << r.name << ": empirical " << num(r.empirical)
      << ", analytic " << num(r.analytic) << ", tolerance " << num(r.tolerance) << "\n";
  }
  s << (pass ? "overall PASS" : "overall FAIL") << "\n";
  return s.str();
}

ComparisonReport cmd_compare(RunContext& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig& cfg = ctx.config;
  if (!cfg.compare || cfg.compare->empirical.empty() || cfg.compare->analytic.empty()) {
    throw ConfigError("compare needs compare.empirical and compare.analytic");
  }
  const CompareBlock& cb = *cfg.compare;
  const Table te = read_table(cb.empirical);
  const Table ta = read_table(cb.analytic);
  for (const auto* t : {&te, &ta}) {
    if (!is_histogram(*t) && !is_density(*t)) {
      throw ConfigError(std::string("compare: ") + (t == &te ? cb.empirical : cb.analytic) +
                        " is neither a histogram nor a density table");
    }
  }

  BinnedMass e, a;
  try {
    if (is_histogram(te)) {
      e = histogram_mass(te, cb.empirical);
      a = is_histogram(ta) ? histogram_mass(ta, cb.analytic) : density_mass(ta, e.edges, cb.analytic);
    } else if (is_histogram(ta)) {
      a = histogram_mass(ta, cb.analytic);
      e = density_mass(te, a.edges, cb.empirical);
    } else {
      const double lo = std::max(te.rows.front()[0], ta.rows.front()[0]);
      const double hi = std::min(te.rows.back()[0], ta.rows.back()[0]);
      if (!(hi > lo)) {
        throw std::invalid_argument("the two density tables do not overlap");
      }
      const auto n = static_cast<std::size_t>(std::max(1.0, std::floor((hi - lo) / cb.bin_width)));
      std::vector<double> edges(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        edges[i] = lo + cb.bin_width * static_cast<double>(i);
      }
      e = density_mass(te, edges, cb.empirical);
      a = density_mass(ta, edges, cb.analytic);
    }
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("compare: incompatible inputs: ") + ex.what());
  }

  ComparisonReport rep;
  rep.empirical_file = cb.empirical;
  rep.analytic_file = cb.analytic;
  rep.master_seed = cfg.seeds.master;
  double l1;
  try {
    l1 = l1_distance(e, a);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("compare: incompatible bins: ") + ex.what());
  }
  rep.rows.push_back({"l1", l1, 0.0, cb.l1_tolerance, l1 <= cb.l1_tolerance});
  const BinnedMoments me = binned_moments(e);
  const BinnedMoments ma = binned_moments(a);
  rep.rows.push_back({"binned_mean", me.mean, ma.mean, cb.mean_tolerance,
                      std::abs(me.mean - ma.mean) <= cb.mean_tolerance * std::abs(ma.mean)});
  rep.rows.push_back({"binned_variance", me.variance, ma.variance, cb.variance_tolerance,
                      std::abs(me.variance - ma.variance) <=
                          cb.variance_tolerance * std::abs(ma.variance)});
  rep.pass = std::all_of(rep.rows.begin(), rep.rows.end(), [](const MetricRow& r) { return r.pass; });
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = prepare_dir(ctx);
  std::ofstream(dir / "compare_report.json") << rep.to_json().dump(2) << '\n';
  std::ofstream(dir / "compare_report.txt") << rep.to_text();
  return rep;
}

}  // namespace lrplab
