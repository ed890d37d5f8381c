#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "lrplab/harness.hpp"

using namespace lrplab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Data rows of a CSV written by the harness, comments and header dropped.
std::vector<std::vector<double>> rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<double>> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
    out.push_back(r);
  }
  return out;
}

RunContext context(const json& j, const std::string& dir) {
  return {config_from_json(j), fs::path("harness_out") / dir, {}};
}

json left_density() {
  return {{"p_A", 0.4},
          {"p_B", 1.0 / 3.0},
          {"density", {{"g", 1.0}, {"n_max", 30}, {"points_per_interval", 64}, {"grid_step", 0.02}}}};
}

json pdmp_config(double p_B, double horizon) {
  return {{"p_A", 0.4},
          {"p_B", p_B},
          {"pdmp", {{"g", 1.0}, {"horizon", horizon}, {"bins", {{"lo", 1.5}, {"hi", 11.5}, {"width", 0.05}}}}},
          {"seeds", {{"master", 11}, {"count", 2}}}};
}

}  // namespace

TEST_CASE("config round trip") {
  json j = {{"p_A", 0.6},
            {"p_B", 0.2},
            {"schedule", {{"variant", "PowerLaw"}, {"C", 1.0}, {"a", 0.8}, {"C_prime", 1.0}, {"r", 0.3}}},
            {"lrp", {{"x0", 0.25}, {"n_steps", 1000}, {"terminal_bins", {0.0, 10.0, 20}}}},
            {"pdmp", {{"g", 2.0}, {"y0", 1.0}, {"horizon", 50.0}}},
            {"density", {{"n_max", 8}}},
            {"laplace", {{"p", {0.0, 2.0}}}},
            {"seeds", {{"master", 9}, {"count", 3}}},
            {"jobs", 2},
            {"compare", {{"empirical", "a.csv"}, {"analytic", "b.csv"}}}};
  const ExperimentConfig cfg = config_from_json(j);
  const json once = to_json(cfg);
  CHECK(to_json(config_from_json(once)) == once);
  CHECK(config_hash(once) == config_hash(to_json(config_from_json(once))));
  CHECK(cfg.params->p_A == 0.6);
  CHECK(cfg.lrp->x0 == 0.25);
  CHECK(*cfg.pdmp->y0 == 1.0);
  CHECK(cfg.seeds.count == 3);
  CHECK(cfg.jobs == 2);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"p_A", 0.4}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"p_A", "x"}, {"p_B", 0.2}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"p_A", 0.2}, {"p_B", 0.4}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"pdmp", {{"horizon", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"pdmp", {{"horizon", -3.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"pdmp", {{"g", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"pdmp", 3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"lrp", {{"mode", "other"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"lrp", {{"terminal_bins", {1.0, 0.0, 3}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"density", {{"n_max", 1}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"laplace", {{"p", {-1.0}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"schedule", {{"variant", "Nope"}}}}), ConfigError);
  CHECK_THROWS_AS(load_json_file("harness_out/no_such_file.json"), ConfigError);

  RunContext no_params{config_from_json({{"density", json::object()}}), "harness_out/x", {}};
  CHECK_THROWS_AS(cmd_density(no_params), ConfigError);
}

TEST_CASE("overrides") {
  json doc = pdmp_config(0.2, 10.0);
  apply_override(doc, "pdmp.horizon=250");
  CHECK(doc["pdmp"]["horizon"] == 250);
  apply_override(doc, "output.dir=somewhere");
  CHECK(doc["output"]["dir"] == "somewhere");
  apply_override(doc, "new.deep.key=[1,2]");
  CHECK(doc["new"]["deep"]["key"] == json::array({1, 2}));
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "pdmp..g=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "p_A.x=3"), ConfigError);
}

TEST_CASE("hash is stable and sensitive") {
  const json a = {{"p_A", 0.4}, {"p_B", 0.2}};
  CHECK(config_hash(a) == config_hash(json::parse(a.dump())));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash({{"p_A", 0.4}, {"p_B", 0.21}}));
  // FNV-1a of "{}".
  CHECK(config_hash(json::object()) == "08f44b07b5901a25");
}

TEST_CASE("outputs are byte identical for the same seed") {
  auto a = context(pdmp_config(0.2, 2000.0), "det_a");
  auto b = context(pdmp_config(0.2, 2000.0), "det_b");
  cmd_simulate_pdmp(a);
  cmd_simulate_pdmp(b);
  for (const char* f : {"histogram.csv", "moments.csv"}) {
    const std::string sa = slurp(a.out_dir / f);
    CHECK(!sa.empty());
    CHECK(sa == slurp(b.out_dir / f));
    CHECK(sa.find("# config_hash=" + config_hash(to_json(a.config))) != std::string::npos);
  }
  json other = pdmp_config(0.2, 2000.0);
  other["seeds"]["master"] = 12;
  auto c = context(other, "det_c");
  cmd_simulate_pdmp(c);
  CHECK(slurp(c.out_dir / "histogram.csv") != slurp(a.out_dir / "histogram.csv"));
}

TEST_CASE("lrp outputs") {
  json j = {{"p_A", 0.6},
            {"p_B", 0.2},
            {"schedule", {{"variant", "PowerLaw"}, {"C", 1.0}, {"a", 0.8}, {"C_prime", 1.0}, {"r", 0.3}}},
            {"lrp", {{"n_steps", 2000}, {"terminal_bins", {0.0, 5.0, 10}}}},
            {"seeds", {{"master", 4}, {"count", 5}}}};
  auto ctx = context(j, "lrp");
  const LrpRunSummary s = cmd_simulate_lrp(ctx);
  CHECK(s.terminal_y.size() == 5);
  CHECK(rows(ctx.out_dir / "summary.csv").size() == 5);
  CHECK(fs::exists(ctx.out_dir / "checkpoints.csv"));
  CHECK(fs::exists(ctx.out_dir / "terminal_histogram.csv"));

  j["seeds"]["count"] = 0;
  auto empty = context(j, "lrp_empty");
  CHECK(cmd_simulate_lrp(empty).terminal_y.empty());
  CHECK(rows(empty.out_dir / "summary.csv").empty());
}

TEST_CASE("density and laplace tables") {
  auto ctx = context(left_density(), "density_left");
  const auto r = rows(cmd_density(ctx));
  REQUIRE(r.size() > 100);
  CHECK(r[0][0] == doctest::Approx(1.5));
  CHECK(r[0][1] == 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i][3] >= r[i - 1][3]);
  CHECK(r.back()[3] > 0.99);
  CHECK(r.back()[3] <= 1.0);

  json center = left_density();
  center["p_B"] = 4.0 / 15.0;
  auto cctx = context(center, "density_center");
  const auto rc = rows(cmd_density(cctx));
  CHECK(std::isfinite(rc[0][1]));
  CHECK(rc[0][1] > 0.0);

  json lap = {{"p_A", 0.4}, {"p_B", 1.0 / 3.0}, {"laplace", {{"p", {0.0, 1.0, 2.0}}}}};
  auto lctx = context(lap, "laplace");
  const auto rl = rows(cmd_laplace(lctx));
  REQUIRE(rl.size() == 3);
  CHECK(rl[0][1] == 1.0);
  CHECK(rl[1][1] < rl[0][1]);
  CHECK(rl[2][1] < rl[1][1]);

  json equal = left_density();
  equal["p_B"] = 0.4;
  auto ectx = context(equal, "density_equal");
  CHECK_THROWS_AS(cmd_density(ectx), ConfigError);
}

TEST_CASE("vanishing jump rate keeps the path at r_A") {
  auto ctx = context(pdmp_config(1e-9, 1000.0), "tiny_rate");
  const PdmpRunSummary s = cmd_simulate_pdmp(ctx);
  CHECK(s.jumps == 0);
  CHECK(s.mean == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("compare") {
  auto dl = context(left_density(), "cmp_left");
  const fs::path left = cmd_density(dl);
  json right = left_density();
  right["p_B"] = 1.0 / 6.0;
  auto dr = context(right, "cmp_right");
  const fs::path rightp = cmd_density(dr);
  auto pd = context(pdmp_config(1.0 / 3.0, 2e5), "cmp_pdmp");
  cmd_simulate_pdmp(pd);
  const fs::path hist = pd.out_dir / "histogram.csv";

  const auto run = [](const fs::path& e, const fs::path& a, const std::string& dir) {
    json j = {{"compare", {{"empirical", e.string()}, {"analytic", a.string()}}}};
    auto c = context(j, dir);
    return cmd_compare(c);
  };

  const ComparisonReport self = run(left, left, "cmp_self");
  CHECK(self.rows[0].empirical == 0.0);
  CHECK(self.pass);

  const ComparisonReport ok = run(hist, left, "cmp_ok");
  CHECK(ok.rows[0].name == "l1");
  CHECK(ok.rows[0].empirical < 0.05);
  CHECK(ok.pass);
  CHECK(fs::exists("harness_out/cmp_ok/compare_report.json"));
  CHECK(fs::exists("harness_out/cmp_ok/compare_report.txt"));

  const ComparisonReport bad = run(hist, rightp, "cmp_bad");
  CHECK(bad.rows[0].empirical > 0.2);
  CHECK(!bad.pass);

  const double lr = run(left, rightp, "cmp_lr").rows[0].empirical;
  const double rl = run(rightp, left, "cmp_rl").rows[0].empirical;
  CHECK(lr == doctest::Approx(rl).epsilon(1e-12));
  CHECK(lr > 0.2);

  // Histogram against a histogram with different bins.
  json other = pdmp_config(1.0 / 3.0, 1000.0);
  other["pdmp"]["bins"]["width"] = 0.1;
  auto po = context(other, "cmp_pdmp_other");
  cmd_simulate_pdmp(po);
  CHECK_THROWS_AS(run(hist, po.out_dir / "histogram.csv", "cmp_bins"), ConfigError);
  // Bins reaching past the density table.
  json wide = pdmp_config(1.0 / 3.0, 1000.0);
  wide["pdmp"]["bins"] = {{"lo", 0.0}, {"hi", 100.0}, {"width", 0.5}};
  auto pw = context(wide, "cmp_pdmp_wide");
  cmd_simulate_pdmp(pw);
  CHECK_THROWS_AS(run(pw.out_dir / "histogram.csv", left, "cmp_wide"), ConfigError);
  CHECK_THROWS_AS(run("harness_out/missing.csv", left, "cmp_missing"), std::exception);
}

TEST_CASE("validate-schedule report") {
  json j = {{"p_A", 0.6},
            {"p_B", 0.2},
            {"schedule", {{"variant", "ConstantPenalty"}, {"C", 1.0}, {"a", 0.6}, {"rho", 0.5}}}};
  auto ctx = context(j, "schedule");
  const std::string text = cmd_validate_schedule(ctx);
  CHECK(!text.empty());
  const json rep = json::parse(slurp(ctx.out_dir / "schedule_report.json"));
  CHECK(rep.contains("config_hash"));
}
