#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lrplab/analytics.hpp"
#include "lrplab/density.hpp"
#include "lrplab/lrp_sim.hpp"
#include "lrplab/model_params.hpp"
#include "lrplab/pdmp_sim.hpp"

namespace py = pybind11;
using namespace lrplab;

namespace {

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["n"] = t.n;
  d["x"] = t.x;
  d["y"] = t.y;
  d["terminal_x"] = t.terminal.x;
  d["clamp_count"] = t.clamp_count;
  return d;
}

py::dict report_dict(const ConditionReport& r) {
  py::dict d;
  d["gamma_sum_infinite"] = r.gamma_sum_infinite;
  d["hoeffding"] = r.hoeffding;
  d["rho_to_zero"] = r.rho_to_zero;
  d["gamma_over_rho_to_zero"] = r.gamma_over_rho_to_zero;
  d["gamma_over_rho_bounded"] = r.gamma_over_rho_bounded;
  d["sum_rho_gamma_infinite"] = r.sum_rho_gamma_infinite;
  d["rho_increment_small"] = r.rho_increment_small;
  d["beta_condition"] = r.beta_condition;
  d["eta_condition"] = r.eta_condition;
  d["gamma_square_increment_small"] = r.gamma_square_increment_small;
  d["coupled_condition"] = r.coupled_condition;
  d["coupled_g"] = r.coupled_g ? py::cast(*r.coupled_g) : py::none();
  py::list enabled;
  for (Theorem t : r.enabled) {
    enabled.append(to_string(t));
  }
  d["enabled"] = enabled;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalized two-armed bandit: recursion, limit process and stationary law";
  m.attr("__version__") = "0.1.0";

  py::class_<BanditParams>(m, "BanditParams")
      .def(py::init<double, double>(), py::arg("p_A"), py::arg("p_B"))
      .def_readonly("p_A", &BanditParams::p_A)
      .def_readonly("p_B", &BanditParams::p_B)
      .def_property_readonly("gap", &BanditParams::gap)
      .def_property_readonly("r_A", &BanditParams::r_A)
      .def("__repr__", [](const BanditParams& p) {
        return "BanditParams(p_A=" + std::to_string(p.p_A) + ", p_B=" + std::to_string(p.p_B) + ")";
      });

  py::class_<PowerLaw>(m, "PowerLaw")
      .def(py::init([](double C, double a, double C_prime, double r) {
             return PowerLaw{C, a, C_prime, r};
           }),
           py::arg("C") = 1.0, py::arg("a") = 0.6, py::arg("C_prime") = 1.0, py::arg("r") = 0.3);
  py::class_<ConstantPenalty>(m, "ConstantPenalty")
      .def(py::init([](double C, double a, double rho) { return ConstantPenalty{C, a, rho}; }),
           py::arg("C") = 1.0, py::arg("a") = 0.6, py::arg("rho") = 0.5);
  py::class_<Coupled>(m, "Coupled")
      .def(py::init([](double g, double a_coef) { return Coupled{g, a_coef}; }), py::arg("g") = 1.0,
           py::arg("a_coef") = 0.5)
      .def_readonly("g", &Coupled::g)
      .def_readonly("a_coef", &Coupled::a_coef);

  py::class_<ScheduleSpec>(m, "ScheduleSpec")
      .def(py::init<PowerLaw>())
      .def(py::init<ConstantPenalty>())
      .def(py::init<Coupled>())
      .def_property_readonly("name", &ScheduleSpec::name);
  py::implicitly_convertible<PowerLaw, ScheduleSpec>();
  py::implicitly_convertible<ConstantPenalty, ScheduleSpec>();
  py::implicitly_convertible<Coupled, ScheduleSpec>();

  m.def("schedule_value", [](const ScheduleSpec& s, std::uint64_t n) {
    const StepPair v = schedule_value(s, n);
    return py::make_tuple(v.gamma, v.rho);
  });
  m.def("validate_schedule", [](const ScheduleSpec& s, const BanditParams& p) {
    return report_dict(validate_schedule(s, p));
  });
  m.def("derived_constants", [](const BanditParams& p, double g) {
    const ConstantsBundle c = derived_constants(p, g);
    py::dict d;
    d["pi"] = c.pi;
    d["r"] = c.r;
    d["r_A"] = c.r_A;
    d["g"] = c.g;
    d["g_star"] = c.g_star;
    d["d"] = c.d;
    d["nu_mean"] = c.nu_mean ? py::cast(*c.nu_mean) : py::none();
    d["nu_var"] = c.nu_var ? py::cast(*c.nu_var) : py::none();
    return d;
  });
  m.def("mean_field", &mean_field, py::arg("x"), py::arg("params"), py::arg("rho"));
  m.def("fixed_point_constant_rho", &fixed_point_constant_rho, py::arg("params"), py::arg("rho"));

  m.def("step_distribution", [](double x, double gamma, double rho, const BanditParams& p) {
    py::list out;
    for (const StepAtom& a : step_distribution(x, gamma, rho, p)) {
      out.append(py::make_tuple(a.probability, a.next_x));
    }
    return out;
  });
  m.def("martingale_increment_moments", [](double x, double rho, const BanditParams& p) {
    const IncrementMoments im = martingale_increment_moments(x, rho, p);
    py::dict d;
    d["mean"] = im.mean;
    d["second_moment"] = im.second_moment;
    d["second_moment_bound"] = im.second_moment_bound;
    return d;
  });
  m.def(
      "run_trajectory",
      [](const ScheduleSpec& s, const BanditParams& p, double x0, std::uint64_t n_steps,
         std::uint64_t seed, std::uint64_t index) {
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = run_trajectory(s, p, x0, n_steps, StreamId{seed, index});
        }
        return trajectory_dict(t);
      },
      py::arg("schedule"), py::arg("params"), py::arg("x0"), py::arg("n_steps"), py::arg("seed"),
      py::arg("index") = 0);
  m.def(
      "run_pi_zero_coupled",
      [](const Coupled& c, const BanditParams& p, double x0, std::uint64_t n_steps,
         std::uint64_t seed, std::uint64_t index) {
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = run_pi_zero_coupled(c, p, x0, n_steps, StreamId{seed, index});
        }
        return trajectory_dict(t);
      },
      py::arg("schedule"), py::arg("params"), py::arg("x0"), py::arg("n_steps"), py::arg("seed"),
      py::arg("index") = 0);
  m.def(
      "terminal_values",
      [](const ScheduleSpec& s, const BanditParams& p, double x0, std::uint64_t n_steps,
         std::uint64_t seed, std::uint64_t count, unsigned jobs) {
        std::vector<Trajectory> runs;
        {
          py::gil_scoped_release release;
          runs = run_batch(s, p, x0, n_steps, seed, count, jobs);
        }
        std::vector<double> x, y;
        for (const Trajectory& t : runs) {
          x.push_back(t.x.back());
          y.push_back(t.y.back());
        }
        return py::make_tuple(x, y);
      },
      py::arg("schedule"), py::arg("params"), py::arg("x0"), py::arg("n_steps"), py::arg("seed"),
      py::arg("count"), py::arg("jobs") = 1);

  m.def("flow", &flow, py::arg("y0"), py::arg("t"), py::arg("params"));
  m.def("cumulative_intensity", &cumulative_intensity, py::arg("y0"), py::arg("t"),
        py::arg("params"), py::arg("g"));
  m.def("invert_intensity", &invert_intensity, py::arg("y0"), py::arg("e"), py::arg("params"),
        py::arg("g"));
  m.def(
      "sample_jump_times",
      [](double y0, const BanditParams& p, double g, std::uint64_t count, std::uint64_t seed) {
        Rng rng(seed, 0);
        std::vector<double> out(count);
        for (double& v : out) {
          v = sample_jump_time(y0, p, g, rng);
        }
        return out;
      },
      py::arg("y0"), py::arg("params"), py::arg("g"), py::arg("count"), py::arg("seed"));

  py::class_<PdmpPath>(m, "PdmpPath")
      .def_readonly("y0", &PdmpPath::y0)
      .def_readonly("horizon", &PdmpPath::horizon)
      .def_readonly("g", &PdmpPath::g)
      .def_property_readonly("jump_count", [](const PdmpPath& p) { return p.jumps.size(); })
      .def_property_readonly("jump_times",
                             [](const PdmpPath& p) {
                               std::vector<double> v;
                               for (const auto& j : p.jumps) v.push_back(j.time);
                               return v;
                             })
      .def_property_readonly("pre_values",
                             [](const PdmpPath& p) {
                               std::vector<double> v;
                               for (const auto& j : p.jumps) v.push_back(j.pre);
                               return v;
                             })
      .def("value_at", &PdmpPath::value_at);
  m.def(
      "simulate_path",
      [](double y0, double horizon, const BanditParams& p, double g, std::uint64_t seed,
         std::uint64_t index) {
        Rng rng(seed, index);
        py::gil_scoped_release release;
        return simulate_path(y0, horizon, p, g, rng);
      },
      py::arg("y0"), py::arg("horizon"), py::arg("params"), py::arg("g"), py::arg("seed"),
      py::arg("index") = 0);
  m.def(
      "occupation_histogram",
      [](const PdmpPath& path, double lo, double hi, std::size_t count, double burn_in) {
        const OccupationHistogram h = occupation_histogram(path, {lo, hi, count}, burn_in);
        py::dict d;
        d["weights"] = h.weights;
        d["density"] = h.density();
        d["underflow"] = h.underflow;
        d["overflow"] = h.overflow;
        d["total_time"] = h.total_time;
        return d;
      },
      py::arg("path"), py::arg("lo"), py::arg("hi"), py::arg("count"), py::arg("burn_in") = 0.0);
  m.def(
      "ergodic_moments",
      [](const PdmpPath& path, double burn_in_fraction, int batches) {
        const ErgodicMoments em = ergodic_moments(path, burn_in_fraction, batches);
        py::dict d;
        d["mean"] = em.mean.value;
        d["mean_error"] = em.mean.std_error;
        d["variance"] = em.variance.value;
        d["variance_error"] = em.variance.std_error;
        return d;
      },
      py::arg("path"), py::arg("burn_in_fraction") = 0.1, py::arg("batches") = 32);

  m.def(
      "solve_psi",
      [](double p, const std::string& branch, const BanditParams& params, double g, double tol,
         double t_max) -> py::object {
        if (branch != "laplace" && branch != "expmoment") {
          throw py::value_error("branch must be 'laplace' or 'expmoment'");
        }
        PsiOptions opt;
        opt.tol = tol;
        opt.t_max = t_max;
        const PsiResult r = solve_psi(
            p, branch == "laplace" ? PsiBranch::Laplace : PsiBranch::ExpMoment, params, g, opt);
        py::dict d;
        if (const auto* b = std::get_if<BlowUp>(&r)) {
          d["blow_up"] = true;
          d["time"] = b->time;
          d["psi"] = b->psi;
          return std::move(d);
        }
        const auto& s = std::get<PsiSolution>(r);
        d["blow_up"] = false;
        d["t"] = s.t;
        d["psi"] = s.psi;
        d["integral"] = s.integral;
        d["horizon"] = s.horizon;
        d["tail"] = py::make_tuple(s.tail_lo, s.tail_hi);
        return std::move(d);
      },
      py::arg("p"), py::arg("branch"), py::arg("params"), py::arg("g"), py::arg("tol") = 1e-10,
      py::arg("t_max") = 1e4);
  m.def(
      "laplace_nu",
      [](double p, const BanditParams& params, double g, double tol) {
        const LaplaceValue v = laplace_nu(p, params, g, tol);
        return py::make_tuple(v.value, v.lo, v.hi);
      },
      py::arg("p"), py::arg("params"), py::arg("g"), py::arg("tol") = 1e-10);
  m.def("theta_root", [](double y) { return theta_root(y).theta; }, py::arg("y"));
  m.def("critical_exponent", &critical_exponent, py::arg("params"), py::arg("g"));
  m.def(
      "boundary_classification",
      [](const BanditParams& p, double g) { return std::string(to_string(boundary_classification(p, g))); },
      py::arg("params"), py::arg("g"));
  m.def("pi_zero_density", &pi_zero_density, py::arg("p_A"), py::arg("g"), py::arg("grid"));

  py::class_<PiecewiseDensity>(m, "PiecewiseDensity")
      .def(py::init<const BanditParams&, double, int, int>(), py::arg("params"), py::arg("g"),
           py::arg("n_max") = 20, py::arg("points_per_interval") = 256)
      .def("phi", &PiecewiseDensity::phi)
      .def("cdf", &PiecewiseDensity::cdf)
      .def("mass", &PiecewiseDensity::mass)
      .def("mean", &PiecewiseDensity::mean)
      .def("variance", &PiecewiseDensity::variance)
      .def_property_readonly("r_A", &PiecewiseDensity::r_A)
      .def_property_readonly("range_end", &PiecewiseDensity::range_end)
      .def_property_readonly("intervals", &PiecewiseDensity::intervals)
      .def_property_readonly("lambda0", &PiecewiseDensity::lambda0)
      .def_property_readonly("tail_mass", &PiecewiseDensity::tail_mass)
      .def_property_readonly("boundary", [](const PiecewiseDensity& d) {
        return std::string(to_string(d.boundary()));
      });
  m.def(
      "density_reconstruct",
      [](const BanditParams& p, double g, int n_max, int ppi) {
        return PiecewiseDensity(p, g, n_max, ppi);
      },
      py::arg("params"), py::arg("g"), py::arg("n_max") = 20, py::arg("points_per_interval") = 256);
  m.def(
      "stationary_generator_residual",
      [](const std::function<double(double)>& f, const std::function<double(double)>& df,
         double lo, double hi, const PiecewiseDensity& d) {
        const GeneratorResidual r = stationary_generator_residual(f, df, lo, hi, d);
        return py::make_tuple(r.residual, r.scale);
      },
      py::arg("f"), py::arg("df"), py::arg("support_lo"), py::arg("support_hi"),
      py::arg("density"));
}
