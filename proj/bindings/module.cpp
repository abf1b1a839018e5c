// Python bindings for the decoh core. Exposes the Gaussian-entropy
// primitives, both oscillator evolutions, the thermal self-mass and
// stationary-state solvers, the Kadanoff-Baym integrator, the rate fit, and
// the run/read orchestration layer. decoh::Error maps to ValueError for
// validation kinds and RuntimeError for numerical ones.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "decoh/gaussian.hpp"
#include "decoh/kadanoff_baym.hpp"
#include "decoh/oscillators.hpp"
#include "decoh/rate_fit.hpp"
#include "decoh/run.hpp"
#include "decoh/selfmass.hpp"

namespace py = pybind11;
using namespace decoh;

namespace {

nlohmann::json to_json(const py::handle& h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<long long>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    auto obj = nlohmann::json::object();
    for (auto kv : h.cast<py::dict>())
      obj[py::str(kv.first).cast<std::string>()] = to_json(kv.second);
    return obj;
  }
  if (py::isinstance<py::sequence>(h)) {
    auto arr = nlohmann::json::array();
    for (auto item : h.cast<py::sequence>()) arr.push_back(to_json(item));
    return arr;
  }
  throw Error(ErrorKind::Validation, "unsupported parameter value type");
}

py::object from_json(const nlohmann::json& j) {
  using value_t = nlohmann::json::value_t;
  switch (j.type()) {
    case value_t::boolean:
      return py::bool_(j.get<bool>());
    case value_t::number_integer:
    case value_t::number_unsigned:
      return py::int_(j.get<long long>());
    case value_t::number_float:
      return py::float_(j.get<double>());
    case value_t::string:
      return py::str(j.get<std::string>());
    case value_t::array: {
      py::list l;
      for (const auto& e : j) l.append(from_json(e));
      return l;
    }
    case value_t::object: {
      py::dict d;
      for (const auto& kv : j.items()) d[py::str(kv.key())] = from_json(kv.value());
      return d;
    }
    default:
      return py::none();
  }
}

py::tuple triple_tuple(const CorrelatorTriple& c) {
  return py::make_tuple(c.phi2, c.pi2, c.cross);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Gaussian entropy generation: exact and master-equation oscillator "
      "evolutions, thermal self-masses, stationary spectra, Kadanoff-Baym "
      "integration, and rate fitting.";
  m.attr("__version__") = kVersion;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      if (e.is_validation())
        PyErr_SetString(PyExc_ValueError, e.what());
      else
        PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  // --- Gaussian primitives ---------------------------------------------
  m.def("entropy_of_delta", &entropy_of_delta, py::arg("delta"),
        "Gaussian von Neumann entropy (nats) of a state with phase-space area delta.");
  m.def(
      "phase_space_area",
      [](double phi2, double pi2, double cross, double tol) {
        return phase_space_area(CorrelatorTriple{phi2, pi2, cross}, tol).delta;
      },
      py::arg("phi2"), py::arg("pi2"), py::arg("cross") = 0.0, py::arg("tol") = kAreaTol,
      "Invariant area 2*sqrt(phi2*pi2 - cross^2); raises on a Heisenberg violation.");
  m.def(
      "free_thermal_area", [](double beta, double omega) { return free_thermal_area(beta, omega).delta; },
      py::arg("beta"), py::arg("omega"), "coth(beta*omega/2).");

  // --- Coupled oscillators ---------------------------------------------
  py::class_<OscillatorModel>(m, "OscillatorModel")
      .def_readonly("omega0", &OscillatorModel::omega0)
      .def_readonly("beta", &OscillatorModel::beta)
      .def_readonly("omegas", &OscillatorModel::omegas)
      .def_readonly("lambdas", &OscillatorModel::lambdas);
  m.def("build_model", &build_model, py::arg("omega0"), py::arg("omegas"),
        py::arg("lambdas"), py::arg("beta"),
        "Central oscillator bilinearly coupled to a bath; raises ValueError "
        "when the stiffness matrix is not positive definite.");

  m.def(
      "qm_exact_series",
      [](const OscillatorModel& model, const std::vector<double>& times) {
        auto covs = evolve_exact(model, initial_covariance(model), times);
        std::vector<double> ds, ss, se, sc, st;
        for (const auto& c : covs) {
          auto dec = entropy_decomposition(c);
          ds.push_back(phase_space_area(system_triple(c)).delta);
          ss.push_back(dec.s_system);
          se.push_back(dec.s_environment);
          sc.push_back(dec.s_correlation);
          st.push_back(dec.s_total);
        }
        py::dict out;
        out["t"] = times;
        out["delta_s"] = ds;
        out["s_system"] = ss;
        out["s_environment"] = se;
        out["s_correlation"] = sc;
        out["s_total"] = st;
        return out;
      },
      py::arg("model"), py::arg("times"),
      "Exact evolution from the product state: system area and the entropy "
      "decomposition at each requested time.");

  m.def(
      "qm_master_series",
      [](const OscillatorModel& model, const std::vector<double>& times) {
        auto ev = evolve_master(model, times);
        std::vector<double> phi2, pi2, cross;
        for (const auto& c : ev.triples) {
          phi2.push_back(c.phi2);
          pi2.push_back(c.pi2);
          cross.push_back(c.cross);
        }
        py::dict out;
        out["t"] = times;
        out["delta"] = ev.delta;
        out["entropy"] = ev.entropy;
        out["phi2"] = phi2;
        out["pi2"] = pi2;
        out["cross"] = cross;
        return out;
      },
      py::arg("model"), py::arg("times"),
      "Second-order time-convolutionless master equation for the reduced "
      "moments; delta/entropy come from the co-integrated determinant.");

  py::class_<MasterCoefficients>(m, "MasterCoefficients")
      .def_readonly("a", &MasterCoefficients::a)
      .def_readonly("g", &MasterCoefficients::g)
      .def_readonly("D", &MasterCoefficients::D)
      .def_readonly("f", &MasterCoefficients::f);
  m.def("master_coefficients", &master_coefficients, py::arg("model"), py::arg("t"),
        "Time-dependent coefficients a(t), g(t), D(t), f(t).");

  // --- Thermal self-mass and stationary state --------------------------
  py::class_<QftParams>(m, "QftParams")
      .def(py::init([](double m_phi, double h, double beta, double k) {
             QftParams p;
             p.m_phi = m_phi;
             p.h = h;
             p.beta = beta;
             p.k = k;
             validate(p);
             return p;
           }),
           py::arg("m_phi") = 1.0, py::arg("h") = 0.0, py::arg("beta") = 1.0,
           py::arg("k") = 1.0)
      .def_readonly("m_phi", &QftParams::m_phi)
      .def_readonly("h", &QftParams::h)
      .def_readonly("beta", &QftParams::beta)
      .def_readonly("k", &QftParams::k)
      .def("omega", &QftParams::omega)
      .def("__repr__", [](const QftParams& p) {
        std::ostringstream os;
        os << "QftParams(m_phi=" << p.m_phi << ", h=" << p.h << ", beta=" << p.beta
           << ", k=" << p.k << ")";
        return os.str();
      });
  m.def("perturbativity_warning", &perturbativity_warning, py::arg("params"),
        "Advisory string, empty when the coupling is comfortably perturbative.");

  m.def("im_retarded_selfmass", &im_retarded_selfmass, py::arg("params"), py::arg("k0"),
        "One-loop Im M^r by adaptive quadrature (decay and Landau cuts).");
  m.def("im_selfmass_closed", &im_selfmass_closed, py::arg("params"), py::arg("k0"),
        "Closed-form Im M^r used internally; cross-check for the quadrature.");
  m.def("re_retarded_selfmass", &re_retarded_selfmass, py::arg("params"), py::arg("k0"),
        "Re M^r: once-subtracted vacuum part plus thermal dispersion integral.");
  m.def("decay_rate_formula", &decay_rate_formula, py::arg("params"),
        "Single-particle decay rate Gamma at k0 = omega, closed form.");

  py::class_<SelfMassSpectrum>(m, "SelfMassSpectrum")
      .def_readonly("k0", &SelfMassSpectrum::k0)
      .def_readonly("re_M", &SelfMassSpectrum::re_M)
      .def_readonly("im_M", &SelfMassSpectrum::im_M)
      .def_readonly("omega_pole", &SelfMassSpectrum::omega_pole)
      .def_readonly("gamma_amp", &SelfMassSpectrum::gamma_amp)
      .def_readonly("lambda_max", &SelfMassSpectrum::lambda_max)
      .def("re_at", &SelfMassSpectrum::re_at, py::arg("k0"))
      .def("im_at", &SelfMassSpectrum::im_at, py::arg("k0"))
      .def("re_thermal_at", &SelfMassSpectrum::re_thermal_at, py::arg("k0"));
  m.def("tabulate_selfmass", &tabulate_selfmass, py::arg("params"),
        py::arg("n_grid") = 4096, py::arg("lambda_factor") = 40.0,
        "Retarded self-mass on a nonuniform grid densified at the Landau edge "
        "and the quasiparticle peak.");

  py::class_<StationarySolution>(m, "StationarySolution")
      .def_readonly("k0", &StationarySolution::k0)
      .def_readonly("rho", &StationarySolution::rho)
      .def_readonly("F", &StationarySolution::F)
      .def_readonly("delta_ms", &StationarySolution::delta_ms)
      .def_readonly("s_ms", &StationarySolution::s_ms)
      .def_readonly("sum_rule", &StationarySolution::sum_rule)
      .def_readonly("omega_pole", &StationarySolution::omega_pole)
      .def_readonly("gamma_amp", &StationarySolution::gamma_amp)
      .def_readonly("free_limit", &StationarySolution::free_limit)
      .def_property_readonly(
          "triple", [](const StationarySolution& s) { return triple_tuple(s.triple); });
  m.def("solve_stationary", &solve_stationary, py::arg("params"),
        py::arg("n_grid") = 4096, py::arg("lambda_factor") = 40.0,
        "Spectral function, KMS statistical function, and the stationary "
        "mixed-state area/entropy.");

  // --- Kadanoff-Baym evolution ------------------------------------------
  py::class_<MemoryKernels>(m, "MemoryKernels")
      .def_readonly("dt", &MemoryKernels::dt)
      .def_readonly("t_mem", &MemoryKernels::t_mem)
      .def_readonly("n_mem", &MemoryKernels::n_mem)
      .def_readonly("omega_eff2", &MemoryKernels::omega_eff2)
      .def_readonly("dm2", &MemoryKernels::dm2)
      .def_readonly("omega_pole", &MemoryKernels::omega_pole)
      .def_readonly("mr", &MemoryKernels::mr)
      .def_readonly("mf", &MemoryKernels::mf);

  py::class_<KbResult>(m, "KbResult")
      .def_readonly("t", &KbResult::t)
      .def_readonly("delta", &KbResult::delta)
      .def_readonly("entropy", &KbResult::entropy)
      .def_readonly("commutator", &KbResult::commutator)
      .def_readonly("max_commutator_drift", &KbResult::max_commutator_drift)
      .def_readonly("kernels", &KbResult::kernels)
      .def_readonly("f_grid", &KbResult::f_grid)
      .def_readonly("rho_slice", &KbResult::rho_slice)
      .def_property_readonly(
          "final_triple", [](const KbResult& r) { return triple_tuple(r.final_triple); });

  m.def(
      "evolve_kb",
      [](const QftParams& p, std::optional<SelfMassSpectrum> spectrum, double dt,
         int n_t, double t_mem, double taper_frac, bool preinitial,
         double commutator_tol, double area_tol, bool keep_grid, int n_grid,
         double lambda_factor) {
        KbOptions opt;
        opt.dt = dt;
        opt.n_t = n_t;
        opt.t_mem = t_mem;
        opt.taper_frac = taper_frac;
        opt.preinitial = preinitial;
        opt.commutator_tol = commutator_tol;
        opt.area_tol = area_tol;
        opt.keep_grid = keep_grid;
        if (!spectrum) spectrum = tabulate_selfmass(p, n_grid, lambda_factor);
        return evolve_kb(p, *spectrum, opt);
      },
      py::arg("params"), py::arg("spectrum") = std::nullopt, py::arg("dt") = 0.05,
      py::arg("n_t") = 2000, py::arg("t_mem") = -1.0, py::arg("taper_frac") = 0.1,
      py::arg("preinitial") = true, py::arg("commutator_tol") = 1e-3,
      py::arg("area_tol") = 1e-5, py::arg("keep_grid") = false,
      py::arg("n_grid") = 4096, py::arg("lambda_factor") = 40.0,
      "Two-time memory integration of F and rho from the pure initial state; "
      "tabulates the self-mass first unless a spectrum is supplied.");

  // --- Rate fit ---------------------------------------------------------
  py::class_<RateFit>(m, "RateFit")
      .def_readonly("gamma_dec", &RateFit::gamma_dec)
      .def_readonly("delta_ms_used", &RateFit::delta_ms_used)
      .def_readonly("t_lo", &RateFit::t_lo)
      .def_readonly("t_hi", &RateFit::t_hi)
      .def_readonly("residual", &RateFit::residual)
      .def_readonly("n_points", &RateFit::n_points)
      .def_readonly("envelope", &RateFit::envelope);
  m.def("extract_rate", &extract_rate, py::arg("t"), py::arg("delta"),
        py::arg("delta_ms"), py::arg("t_drop"), py::arg("residual_max") = 0.5,
        "Log-linear fit of |delta_ms - delta(t)| after the transient.");

  // --- Orchestration ----------------------------------------------------
  m.def(
      "run",
      [](const std::string& mode, const py::dict& params, const std::string& out_dir) {
        auto cfg = parse_config(mode, to_json(params));
        std::ostringstream log;
        auto summary = run(cfg, out_dir, log);
        py::dict out;
        out["outputs"] = summary.outputs;
        out["stats"] = from_json(summary.stats);
        out["params"] = from_json(cfg.params);
        out["log"] = log.str();
        return out;
      },
      py::arg("mode"), py::arg("params") = py::dict(), py::arg("out_dir") = std::string("."),
      "Run one pipeline (qm-run, qft-stationary, qft-evolve, rate-fit, sweep) "
      "and write its CSV artefacts; returns outputs, stats, and the log.");

  m.def(
      "reproduce",
      [](const std::string& figure_id, const std::string& out_dir) {
        std::ostringstream log;
        int fails = reproduce(figure_id, out_dir, log);
        return py::make_tuple(fails, log.str());
      },
      py::arg("figure_id"), py::arg("out_dir") = std::string("."),
      "Run a canned figure recipe; returns (failed_check_count, log).");

  m.def(
      "read_series",
      [](const std::string& path) {
        auto s = read_series(path);
        py::dict data;
        for (size_t c = 0; c < s.columns.size(); ++c) {
          std::vector<double> col(s.rows.size());
          for (size_t r = 0; r < s.rows.size(); ++r) col[r] = s.rows[r][c];
          data[py::str(s.columns[c])] = col;
        }
        py::dict out;
        out["mode"] = s.mode;
        out["params"] = from_json(s.params);
        out["meta"] = s.meta;
        out["columns"] = s.columns;
        out["data"] = data;
        return out;
      },
      py::arg("path"), "Parse an emitted CSV back into its header and columns.");
}
