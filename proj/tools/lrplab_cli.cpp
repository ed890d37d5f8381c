#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lrplab/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment JSON file");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--jobs", f.jobs, "Worker threads");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--set", f.sets, "Override a config field, e.g. pdmp.horizon=1e5");
}

lrplab::RunContext build_context(const CommonFlags& f, nlohmann::json extra = {}) {
  nlohmann::json doc = f.config.empty() ? nlohmann::json::object() : lrplab::load_json_file(f.config);
  for (const auto& [key, value] : extra.items()) {
    lrplab::apply_override(doc, key + "=" + value.dump());
  }
  for (const std::string& s : f.sets) {
    lrplab::apply_override(doc, s);
  }
  if (f.seed) doc["seeds"]["master"] = *f.seed;
  if (f.jobs) doc["jobs"] = *f.jobs;
  if (f.out) doc["output"]["dir"] = *f.out;
  lrplab::RunContext ctx;
  ctx.config = lrplab::config_from_json(doc);
  ctx.out_dir = ctx.config.output_dir;
  return ctx;
}

void print_files(const std::vector<std::filesystem::path>& files) {
  for (const auto& p : files) {
    std::cout << "wrote " << p.string() << "\n";
  }
}

void print_warnings(const lrplab::RunContext& ctx) {
  for (const std::string& w : ctx.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and analytics for the penalized two-armed bandit"};
  app.require_subcommand(1);

  CommonFlags lrp_f, pdmp_f, dens_f, lap_f, val_f, cmp_f;
  auto* lrp = app.add_subcommand("simulate-lrp", "Run seeded trajectories of the recursion");
  add_common(lrp, lrp_f);
  auto* pdmp = app.add_subcommand("simulate-pdmp", "Simulate the limiting jump process");
  add_common(pdmp, pdmp_f);
  auto* dens = app.add_subcommand("density", "Reconstruct the stationary density");
  add_common(dens, dens_f);
  auto* lap = app.add_subcommand("laplace", "Laplace transform of the stationary law");
  add_common(lap, lap_f);
  auto* val = app.add_subcommand("validate-schedule", "Check schedule hypotheses");
  add_common(val, val_f);
  auto* cmp = app.add_subcommand("compare", "Compare an empirical histogram with a density");
  add_common(cmp, cmp_f);
  std::string empirical, analytic;
  std::optional<double> l1_tol;
  cmp->add_option("--empirical", empirical, "Histogram or density table");
  cmp->add_option("--analytic", analytic, "Density or histogram table");
  cmp->add_option("--l1-tolerance", l1_tol, "Maximum L1 distance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (lrp->parsed()) {
      auto ctx = build_context(lrp_f);
      const auto s = lrplab::cmd_simulate_lrp(ctx);
      print_warnings(ctx);
      print_files(s.files);
      if (!s.checkpoints.empty()) {
        const auto& last = s.checkpoints.back();
        std::cout << "n=" << last.n << " median y=" << last.median_y
                  << " median relative error=" << last.median_relative_error << "\n";
      }
    } else if (pdmp->parsed()) {
      auto ctx = build_context(pdmp_f);
      const auto s = lrplab::cmd_simulate_pdmp(ctx);
      print_files(s.files);
      std::cout << "mean " << s.mean << " +- " << s.mean_error << " (analytic " << s.analytic_mean
                << ")\nvariance " << s.variance << " +- " << s.variance_error << " (analytic "
                << s.analytic_variance << ")\n";
    } else if (dens->parsed()) {
      auto ctx = build_context(dens_f);
      print_files({lrplab::cmd_density(ctx)});
    } else if (lap->parsed()) {
      auto ctx = build_context(lap_f);
      print_files({lrplab::cmd_laplace(ctx)});
    } else if (val->parsed()) {
      auto ctx = build_context(val_f);
      std::cout << lrplab::cmd_validate_schedule(ctx);
    } else if (cmp->parsed()) {
      nlohmann::json extra = nlohmann::json::object();
      if (!empirical.empty()) extra["compare.empirical"] = empirical;
      if (!analytic.empty()) extra["compare.analytic"] = analytic;
      if (l1_tol) extra["compare.l1_tolerance"] = *l1_tol;
      auto ctx = build_context(cmp_f, extra);
      const auto rep = lrplab::cmd_compare(ctx);
      std::cout << rep.to_text();
      return rep.pass ? 0 : 2;
    }
  } catch (const lrplab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
