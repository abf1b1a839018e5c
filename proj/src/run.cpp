#include "decoh/run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include "decoh/gaussian.hpp"
#include "decoh/kadanoff_baym.hpp"
#include "decoh/oscillators.hpp"
#include "decoh/rate_fit.hpp"
#include "decoh/selfmass.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace decoh {

namespace {

// ---------------------------------------------------------------------------
// Formatting and file plumbing
// ---------------------------------------------------------------------------

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Run a stage and prefix its name onto any propagating error so a failing
// pipeline names where it broke.
template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(name) + ": " + e.what());
  }
}

void atomic_write_file(const fs::path& path, const std::string& data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    os.flush();
    if (!os) throw Error(ErrorKind::Validation, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorKind::Validation,
                "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string stats_line(const json& v) {
  if (v.is_number_float()) return format_value(v.get<double>());
  return v.dump();
}

// Emit one self-describing CSV: version, mode, config echo, summary lines,
// walltime (the only non-deterministic line), column header, rows.
void write_csv(const fs::path& path, const std::string& mode, const json& params,
               const json& stats, double wall_s, const Table& tab) {
  std::string out;
  out.reserve(64 * tab.rows.size() + 1024);
  out += "# decoh ";
  out += kVersion;
  out += "\n# mode: " + mode + "\n";
  out += "# config: " + params.dump() + "\n";
  for (auto it = stats.begin(); it != stats.end(); ++it)
    out += "# " + it.key() + ": " + stats_line(it.value()) + "\n";
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", wall_s);
    out += std::string("# walltime_s: ") + buf + "\n";
  }
  for (size_t c = 0; c < tab.columns.size(); ++c) {
    if (c) out += ',';
    out += tab.columns[c];
  }
  out += '\n';
  for (const auto& row : tab.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_value(row[c]);
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

double parse_number(const std::string& s, const std::string& where) {
  const char* b = s.c_str();
  char* e = nullptr;
  double v = std::strtod(b, &e);
  if (e == b || (e && *e != '\0'))
    throw Error(ErrorKind::Validation, "malformed number '" + s + "' in " + where);
  return v;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

const std::map<std::string, json>& mode_defaults() {
  static const std::map<std::string, json> defaults = {
      {"qm-run",
       {{"omega0", 1.0},
        {"beta", 2.0},
        {"n_bath", 50},
        {"bath_spacing", 0.01},
        {"coupling", 0.075},
        {"t_max", 500.0},
        {"n_out", 2001},
        {"output", "qm_run.csv"}}},
      {"qft-stationary",
       {{"m_phi", 1.0},
        {"h", 3.0},
        {"beta", 0.5},
        {"k", 1.0},
        {"n_grid", 4096},
        {"lambda_factor", 40.0},
        {"output", "stationary.csv"}}},
      {"qft-evolve",
       {{"m_phi", 1.0},
        {"h", 3.0},
        {"beta", 0.5},
        {"k", 1.0},
        {"dt", 0.05},
        {"n_t", 2000},
        {"t_mem", -1.0},
        {"taper_frac", 0.1},
        {"preinitial", true},
        {"commutator_tol", 1e-3},
        {"area_tol", 1e-5},
        {"n_grid", 4096},
        {"lambda_factor", 40.0},
        {"spectrum", ""},
        {"output", "evolve.csv"}}},
      {"rate-fit",
       {{"input", ""},
        {"t_drop", -1.0},
        {"residual_max", 0.5},
        {"output", "rate_fit.csv"}}},
      {"sweep",
       {{"m_phi", 1.0},
        {"beta", 0.5},
        {"k", 1.0},
        {"h_values", json::array({0.01, 0.5, 1.0, 2.0, 3.0, 4.0})},
        {"n_grid", 4096},
        {"lambda_factor", 40.0},
        {"dump_points", true},
        {"output", "sweep.csv"}}},
  };
  return defaults;
}

bool integral_number(const json& v) {
  if (v.is_number_integer()) return true;
  if (!v.is_number_float()) return false;
  double d = v.get<double>();
  return std::floor(d) == d && std::abs(d) < 9.0e15;
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces
// ---------------------------------------------------------------------------

struct StationaryPoint {
  SelfMassSpectrum spectrum;
  StationarySolution sol;
};

// Same retry policy as the convenience solver: a failed sum rule on the
// default grid half-width retries once on a doubled window.
StationaryPoint stationary_point(const QftParams& p, int n_grid, double lambda_factor) {
  auto go = [&](double lf) {
    StationaryPoint pt;
    pt.spectrum = stage("tabulate-selfmass",
                    [&] { return tabulate_selfmass(p, n_grid, lf); });
    pt.sol = stage("stationary", [&] {
      return stationary_statistical(p, spectral_function(p, pt.spectrum), pt.spectrum);
    });
    return pt;
  };
  try {
    return go(lambda_factor);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Numerical) return go(2.0 * lambda_factor);
    throw;
  }
}

json stationary_stats(const QftParams& p, const StationaryPoint& pt) {
  json stats;
  stats["decay_rate"] = decay_rate_formula(p);
  stats["delta_ms"] = pt.sol.delta_ms;
  stats["free_limit"] = pt.sol.free_limit;
  stats["gamma_amp"] = pt.sol.gamma_amp;
  stats["omega_pole"] = pt.sol.omega_pole;
  stats["s_ms"] = pt.sol.s_ms;
  stats["sum_rule"] = pt.sol.sum_rule;
  return stats;
}

Table stationary_table(const StationaryPoint& pt) {
  Table tab;
  tab.columns = {"k0", "ReM", "ImM", "ρ", "F"};
  tab.rows.reserve(pt.sol.k0.size());
  for (size_t i = 0; i < pt.sol.k0.size(); ++i) {
    double k0 = pt.sol.k0[i];
    double rho = i < pt.sol.rho.size() ? pt.sol.rho[i] : 0.0;
    double F = i < pt.sol.F.size() ? pt.sol.F[i] : 0.0;
    tab.rows.push_back({k0, pt.spectrum.re_at(k0), pt.spectrum.im_at(k0), rho, F});
  }
  return tab;
}

QftParams qft_params_from(const json& P) {
  QftParams p;
  p.m_phi = P.at("m_phi").get<double>();
  p.h = P.at("h").get<double>();
  p.beta = P.at("beta").get<double>();
  p.k = P.at("k").get<double>();
  validate(p);
  return p;
}

void log_summary(std::ostream& log, const std::string& path, const Table& tab,
                 const json& stats) {
  log << "wrote " << path << " (" << tab.rows.size() << " rows)\n";
  for (auto it = stats.begin(); it != stats.end(); ++it)
    log << "  " << it.key() << " = " << stats_line(it.value()) << "\n";
}

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

RunSummary run_qm(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  const json& P = cfg.params;
  double omega0 = P.at("omega0").get<double>();
  double beta = P.at("beta").get<double>();
  double spacing = P.at("bath_spacing").get<double>();
  double coupling = P.at("coupling").get<double>();
  double t_max = P.at("t_max").get<double>();
  int n_bath = P.at("n_bath").get<int>();
  int n_out = P.at("n_out").get<int>();
  if (omega0 <= 0.0) throw Error(ErrorKind::Validation, "omega0 must be positive");
  if (n_bath < 1) throw Error(ErrorKind::Validation, "n_bath must be at least 1");
  if (n_out < 2) throw Error(ErrorKind::Validation, "n_out must be at least 2");
  if (t_max <= 0.0) throw Error(ErrorKind::Validation, "t_max must be positive");

  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> omegas(n_bath), lambdas(n_bath);
  for (int n = 1; n <= n_bath; ++n) {
    omegas[n - 1] = omega0 * (1.0 + n * spacing);
    lambdas[n - 1] = coupling * omega0 * omega0;
  }
  OscillatorModel m =
      stage("build-model", [&] { return build_model(omega0, omegas, lambdas, beta); });
  FullCovariance s0 = initial_covariance(m);
  std::vector<double> times(n_out);
  for (int i = 0; i < n_out; ++i)
    times[i] = t_max * static_cast<double>(i) / (n_out - 1);

  auto exact = stage("qm-exact", [&] { return evolve_exact(m, s0, times); });
  auto master = stage("qm-master", [&] { return evolve_master(m, times); });

  Table tab;
  tab.columns = {"t", "Δ_S", "S_S", "S_E", "S_SE", "S_total", "S_master"};
  tab.rows.reserve(times.size());
  double s_total0 = 0.0, drift = 0.0, max_ss = 0.0, final_sm = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    EntropyDecomposition ed =
        stage("entropy-decomposition", [&] { return entropy_decomposition(exact[i]); });
    CorrelatorTriple tri = system_triple(exact[i]);
    double delta_s = phase_space_area(tri).delta;
    double s_m = master.entropy[i];
    if (i == 0) s_total0 = ed.s_total;
    drift = std::max(drift, std::abs(ed.s_total - s_total0));
    max_ss = std::max(max_ss, ed.s_system);
    final_sm = s_m;
    tab.rows.push_back({times[i], delta_s, ed.s_system, ed.s_environment,
                        ed.s_correlation, ed.s_total, s_m});
  }

  RunSummary rs;
  rs.stats["final_s_master"] = final_sm;
  rs.stats["max_s_system"] = max_ss;
  rs.stats["s_total_drift_rel"] = drift / std::max(1e-300, std::abs(s_total0));
  rs.stats["thermal_delta"] = free_thermal_area(beta, omega0).delta;
  rs.stats["thermal_entropy"] = entropy_of_delta(rs.stats["thermal_delta"].get<double>());

  fs::path out = dir / P.at("output").get<std::string>();
  write_csv(out, cfg.mode, P, rs.stats, elapsed_s(t0), tab);
  rs.outputs.push_back(out.string());
  log_summary(log, out.string(), tab, rs.stats);
  return rs;
}

RunSummary run_stationary(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  const json& P = cfg.params;
  QftParams p = qft_params_from(P);
  std::string warn = perturbativity_warning(p);
  if (!warn.empty()) log << "note: " << warn << "\n";

  auto t0 = std::chrono::steady_clock::now();
  StationaryPoint pt = stationary_point(p, P.at("n_grid").get<int>(),
                                        P.at("lambda_factor").get<double>());
  Table tab = stationary_table(pt);
  RunSummary rs;
  rs.stats = stationary_stats(p, pt);

  fs::path out = dir / P.at("output").get<std::string>();
  write_csv(out, cfg.mode, P, rs.stats, elapsed_s(t0), tab);
  rs.outputs.push_back(out.string());
  log_summary(log, out.string(), tab, rs.stats);
  return rs;
}

RunSummary run_evolve(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  const json& P = cfg.params;
  QftParams p = qft_params_from(P);
  std::string warn = perturbativity_warning(p);
  if (!warn.empty()) log << "note: " << warn << "\n";

  int n_grid = P.at("n_grid").get<int>();
  double lambda_factor = P.at("lambda_factor").get<double>();

  // A cached stationary dump can stand in for the tabulation parameters; the
  // spectrum itself is regenerated deterministically from the echoed config,
  // after checking it was produced for the same physical point.
  std::string spectrum_path = P.at("spectrum").get<std::string>();
  if (!spectrum_path.empty()) {
    SeriesFile sf = stage("read-spectrum", [&] { return read_series(spectrum_path); });
    if (sf.mode != "qft-stationary")
      throw Error(ErrorKind::Validation,
                  "spectrum file " + spectrum_path + " is a '" + sf.mode +
                      "' output, expected qft-stationary");
    for (const char* key : {"m_phi", "h", "beta", "k"}) {
      double a = sf.params.at(key).get<double>();
      double b = P.at(key).get<double>();
      if (a != b)
        throw Error(ErrorKind::Validation,
                    std::string("spectrum file parameter mismatch: ") + key + " = " +
                        format_value(a) + " in dump, " + format_value(b) + " requested");
    }
    n_grid = sf.params.at("n_grid").get<int>();
    lambda_factor = sf.params.at("lambda_factor").get<double>();
  }

  KbOptions opt;
  opt.dt = P.at("dt").get<double>();
  opt.n_t = P.at("n_t").get<int>();
  opt.t_mem = P.at("t_mem").get<double>();
  opt.taper_frac = P.at("taper_frac").get<double>();
  opt.preinitial = P.at("preinitial").get<bool>();
  opt.commutator_tol = P.at("commutator_tol").get<double>();
  opt.area_tol = P.at("area_tol").get<double>();
  // Cheap precondition subset, so bad stepping parameters are rejected
  // before the self-mass tabulation runs.
  if (!(opt.dt > 0.0)) throw Error(ErrorKind::Validation, "dt must be positive");
  if (opt.n_t < 8) throw Error(ErrorKind::Validation, "n_t must be at least 8");
  if (!(opt.taper_frac >= 0.0 && opt.taper_frac <= 0.45))
    throw Error(ErrorKind::Validation, "taper_frac must lie in [0, 0.45]");

  auto t0 = std::chrono::steady_clock::now();
  SelfMassSpectrum spec = stage(
      "tabulate-selfmass", [&] { return tabulate_selfmass(p, n_grid, lambda_factor); });
  KbResult res = stage("evolve", [&] { return evolve_kb(p, spec, opt); });

  Table tab;
  tab.columns = {"t", "Δ", "S"};
  tab.rows.reserve(res.t.size());
  for (size_t i = 0; i < res.t.size(); ++i)
    tab.rows.push_back({res.t[i], res.delta[i], res.entropy[i]});

  RunSummary rs;
  rs.stats["commutator_drift"] = res.max_commutator_drift;
  rs.stats["dm2"] = res.kernels.dm2;
  rs.stats["final_delta"] = res.delta.back();
  rs.stats["final_entropy"] = res.entropy.back();
  rs.stats["omega_eff2"] = res.kernels.omega_eff2;
  rs.stats["omega_pole"] = res.kernels.omega_pole;
  rs.stats["t_mem"] = res.kernels.t_mem;

  fs::path out = dir / P.at("output").get<std::string>();
  write_csv(out, cfg.mode, P, rs.stats, elapsed_s(t0), tab);
  rs.outputs.push_back(out.string());
  log_summary(log, out.string(), tab, rs.stats);
  return rs;
}

RunSummary run_ratefit(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  const json& P = cfg.params;
  std::string input = P.at("input").get<std::string>();
  if (input.empty())
    throw Error(ErrorKind::Validation, "rate-fit requires 'input': a qft-evolve CSV");
  double residual_max = P.at("residual_max").get<double>();

  SeriesFile sf = stage("read-input", [&] { return read_series(input); });
  if (sf.mode != "qft-evolve")
    throw Error(ErrorKind::Validation, "rate-fit input " + input + " is a '" + sf.mode +
                                           "' output, expected qft-evolve");
  QftParams p = qft_params_from(sf.params);
  double t_drop = P.at("t_drop").get<double>();
  if (t_drop < 0.0) t_drop = 5.0 / p.m_phi;

  auto t0 = std::chrono::steady_clock::now();
  StationarySolution sol = stage("stationary", [&] {
    return solve_stationary(p, sf.params.at("n_grid").get<int>(),
                            sf.params.at("lambda_factor").get<double>());
  });
  std::vector<double> t = sf.col("t");
  std::vector<double> delta = sf.col("Δ");
  RateFit fit = stage("rate-fit", [&] {
    return extract_rate(t, delta, sol.delta_ms, t_drop, residual_max);
  });

  Table tab;
  tab.columns = {"t", "ln|δΔ|"};
  tab.rows.reserve(t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    double dev = std::abs(delta[i] - fit.delta_ms_used);
    if (dev > 0.0) tab.rows.push_back({t[i], std::log(dev)});
  }

  RunSummary rs;
  rs.stats["decay_rate"] = decay_rate_formula(p);
  rs.stats["delta_ms"] = sol.delta_ms;
  rs.stats["delta_ms_used"] = fit.delta_ms_used;
  rs.stats["envelope"] = fit.envelope;
  rs.stats["gamma_dec"] = fit.gamma_dec;
  rs.stats["n_points"] = fit.n_points;
  rs.stats["rate_ratio"] = fit.gamma_dec / std::max(1e-300, rs.stats["decay_rate"].get<double>());
  rs.stats["residual"] = fit.residual;
  rs.stats["t_hi"] = fit.t_hi;
  rs.stats["t_lo"] = fit.t_lo;

  fs::path out = dir / P.at("output").get<std::string>();
  write_csv(out, cfg.mode, P, rs.stats, elapsed_s(t0), tab);
  rs.outputs.push_back(out.string());
  log_summary(log, out.string(), tab, rs.stats);
  return rs;
}

RunSummary run_sweep(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  const json& P = cfg.params;
  std::vector<double> hv = P.at("h_values").get<std::vector<double>>();
  if (hv.empty()) throw Error(ErrorKind::Validation, "h_values must be non-empty");
  {
    std::vector<std::string> names;
    for (double h : hv) names.push_back(format_value(h));
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorKind::Validation, "h_values contains duplicates");
  }
  int n_grid = P.at("n_grid").get<int>();
  double lambda_factor = P.at("lambda_factor").get<double>();
  bool dump_points = P.at("dump_points").get<bool>();

  // Validate every point before any computation starts.
  std::vector<QftParams> pts;
  for (double h : hv) {
    json q = P;
    q["h"] = h;
    pts.push_back(qft_params_from(q));
  }

  auto t0 = std::chrono::steady_clock::now();
  const size_t n = hv.size();
  std::vector<StationaryPoint> results(n);
  std::vector<std::string> files(n);
  std::vector<std::exception_ptr> errors(n);

  // Each parameter point is an isolated pipeline; its dump is written
  // atomically by the worker that computed it. Results are keyed by index,
  // so the fan-out leaves the emitted table and any failure deterministic.
  auto point = [&](size_t i) {
    auto tp = std::chrono::steady_clock::now();
    results[i] = stationary_point(pts[i], n_grid, lambda_factor);
    if (dump_points) {
      std::string name = "stationary_h" + format_value(hv[i]) + ".csv";
      json q;
      for (auto it = P.begin(); it != P.end(); ++it)
        if (it.key() != "h_values" && it.key() != "dump_points") q[it.key()] = it.value();
      q["h"] = hv[i];
      q["output"] = name;
      RunConfig sub = parse_config("qft-stationary", q);
      fs::path out = dir / name;
      write_csv(out, sub.mode, sub.params, stationary_stats(pts[i], results[i]),
                elapsed_s(tp), stationary_table(results[i]));
      files[i] = out.string();
    }
  };
  auto worker = [&](std::atomic<size_t>* next) {
    for (;;) {
      size_t i = next->fetch_add(1);
      if (i >= n) return;
      try {
        point(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned n_workers = static_cast<unsigned>(std::min<size_t>(hw, n));
  std::atomic<size_t> next{0};
  if (n_workers <= 1) {
    worker(&next);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker, &next);
    for (auto& th : pool) th.join();
  }
  for (size_t i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  Table tab;
  tab.columns = {"h", "Δ_ms", "S_ms"};
  for (size_t i = 0; i < n; ++i)
    tab.rows.push_back({hv[i], results[i].sol.delta_ms, results[i].sol.s_ms});

  RunSummary rs;
  rs.stats["n_points"] = static_cast<int>(n);
  rs.stats["workers"] = static_cast<int>(n_workers);

  fs::path out = dir / P.at("output").get<std::string>();
  write_csv(out, cfg.mode, P, rs.stats, elapsed_s(t0), tab);
  for (size_t i = 0; i < n; ++i)
    if (!files[i].empty()) rs.outputs.push_back(files[i]);
  rs.outputs.push_back(out.string());
  log_summary(log, out.string(), tab, rs.stats);
  return rs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunConfig parse_config(const std::string& mode, const json& overrides) {
  const auto& defs = mode_defaults();
  auto it = defs.find(mode);
  if (it == defs.end()) {
    std::string known;
    for (const auto& kv : defs) known += (known.empty() ? "" : ", ") + kv.first;
    throw Error(ErrorKind::Validation, "unknown mode '" + mode + "' (known: " + known + ")");
  }
  if (!overrides.is_null() && !overrides.is_object())
    throw Error(ErrorKind::Validation, "config must be a JSON object");

  RunConfig cfg;
  cfg.mode = mode;
  cfg.params = it->second;
  if (overrides.is_object()) {
    for (auto ov = overrides.begin(); ov != overrides.end(); ++ov) {
      auto slot = cfg.params.find(ov.key());
      if (slot == cfg.params.end())
        throw Error(ErrorKind::Validation,
                    "unknown config key '" + ov.key() + "' for mode " + mode);
      const json& def = *slot;
      const json& v = ov.value();
      if (def.is_number_integer()) {
        if (!integral_number(v))
          throw Error(ErrorKind::Validation, "config key '" + ov.key() + "' must be an integer");
        *slot = v.is_number_integer() ? v.get<std::int64_t>()
                                      : static_cast<std::int64_t>(v.get<double>());
      } else if (def.is_number_float()) {
        if (!v.is_number())
          throw Error(ErrorKind::Validation, "config key '" + ov.key() + "' must be a number");
        *slot = v.get<double>();
      } else if (def.is_boolean()) {
        if (!v.is_boolean())
          throw Error(ErrorKind::Validation, "config key '" + ov.key() + "' must be a boolean");
        *slot = v.get<bool>();
      } else if (def.is_string()) {
        if (!v.is_string())
          throw Error(ErrorKind::Validation, "config key '" + ov.key() + "' must be a string");
        *slot = v.get<std::string>();
      } else if (def.is_array()) {
        if (!v.is_array())
          throw Error(ErrorKind::Validation, "config key '" + ov.key() + "' must be an array");
        json arr = json::array();
        for (const auto& e : v) {
          if (!e.is_number())
            throw Error(ErrorKind::Validation,
                        "config key '" + ov.key() + "' must contain only numbers");
          arr.push_back(e.get<double>());
        }
        *slot = arr;
      }
    }
  }
  return cfg;
}

RunSummary run(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorKind::Validation,
                "cannot create output directory " + dir.string() + ": " + ec.message());

  if (cfg.mode == "qm-run") return run_qm(cfg, dir, log);
  if (cfg.mode == "qft-stationary") return run_stationary(cfg, dir, log);
  if (cfg.mode == "qft-evolve") return run_evolve(cfg, dir, log);
  if (cfg.mode == "rate-fit") return run_ratefit(cfg, dir, log);
  if (cfg.mode == "sweep") return run_sweep(cfg, dir, log);
  throw Error(ErrorKind::Validation, "unknown mode '" + cfg.mode + "'");
}

int SeriesFile::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw Error(ErrorKind::Validation, "series has no column named '" + name + "'");
}

std::vector<double> SeriesFile::col(const std::string& name) const {
  int c = column(name);
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r[static_cast<size_t>(c)]);
  return v;
}

SeriesFile read_series(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Validation, "cannot open " + path);
  SeriesFile f;
  std::string line;
  bool have_columns = false;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      size_t sep = body.find(": ");
      if (sep == std::string::npos) continue;  // version banner
      std::string key = body.substr(0, sep);
      std::string value = body.substr(sep + 2);
      if (key == "mode") {
        f.mode = value;
      } else if (key == "config") {
        json parsed = json::parse(value, nullptr, false);
        if (parsed.is_discarded())
          throw Error(ErrorKind::Validation, "malformed config echo in " + path);
        f.params = parsed;
      } else {
        f.meta[key] = value;
      }
      continue;
    }
    if (!have_columns) {
      f.columns = split_csv_line(line);
      have_columns = true;
      continue;
    }
    std::vector<std::string> parts = split_csv_line(line);
    if (parts.size() != f.columns.size())
      throw Error(ErrorKind::Validation,
                  path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(f.columns.size()) + " fields, got " +
                      std::to_string(parts.size()));
    std::vector<double> row;
    row.reserve(parts.size());
    for (const auto& s : parts)
      row.push_back(parse_number(s, path + ":" + std::to_string(line_no)));
    f.rows.push_back(std::move(row));
  }
  if (!have_columns)
    throw Error(ErrorKind::Validation, path + " has no column header");
  if (f.mode.empty())
    throw Error(ErrorKind::Validation, path + " has no '# mode:' metadata line");
  return f;
}

// ---------------------------------------------------------------------------
// Figure recipes
// ---------------------------------------------------------------------------

namespace {

struct Checker {
  std::ostream& log;
  int fails = 0;
  void operator()(bool ok, const std::string& name, const std::string& detail) {
    log << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) log << "  [" << detail << "]";
    log << "\n";
    if (!ok) ++fails;
  }
};

std::string num2(double a, double b, const char* na, const char* nb) {
  std::ostringstream os;
  os << na << "=" << format_value(a) << " " << nb << "=" << format_value(b);
  return os.str();
}

int reproduce_fig1(const std::string& out_dir, std::ostream& log) {
  RunConfig cfg = parse_config("qm-run", json{{"output", "fig1_qm.csv"}});
  RunSummary rs = run(cfg, out_dir, log);
  SeriesFile f = read_series(rs.outputs.back());

  std::vector<double> t = f.col("t");
  std::vector<double> sS = f.col("S_S");
  std::vector<double> sSE = f.col("S_SE");
  std::vector<double> sTot = f.col("S_total");
  std::vector<double> sM = f.col("S_master");
  double beta = f.params.at("beta").get<double>();
  double omega0 = f.params.at("omega0").get<double>();
  double t_max = f.params.at("t_max").get<double>();
  double s_th = entropy_of_delta(free_thermal_area(beta, omega0).delta);

  Checker chk{log};
  chk(std::abs(sS[0]) <= 1e-12, "system entropy starts at zero",
      "S_S(0)=" + format_value(sS[0]));

  size_t imax = 0;
  for (size_t i = 1; i < sS.size(); ++i)
    if (sS[i] > sS[imax]) imax = i;
  chk(sS[imax] > 0.1 && sS[imax] < s_th,
      "system entropy rises but stays below the thermal value",
      num2(sS[imax], s_th, "max_S_S", "S_thermal"));

  double min_after = sS[imax];
  for (size_t i = imax; i < sS.size(); ++i) min_after = std::min(min_after, sS[i]);
  chk(min_after < 0.9 * sS[imax], "entropy oscillates: dips below 0.9 x its peak",
      num2(min_after, sS[imax], "min_after_peak", "peak"));

  double early_dev = 0.0;
  for (size_t i = 0; i < t.size() && t[i] <= 5.0 / omega0; ++i)
    early_dev = std::max(early_dev, std::abs(sM[i] - sS[i]));
  chk(early_dev <= 0.05, "master agrees with exact within 0.05 up to t = 5",
      "max|S_master - S_S|=" + format_value(early_dev));

  double sm_late = 0.0;
  for (size_t i = 0; i < t.size(); ++i)
    if (t[i] <= 0.9 * t_max) sm_late = sM[i];
  chk(sM.back() > s_th && sM.back() > sm_late,
      "master entropy exceeds thermal and is still growing at the end",
      num2(sM.back(), s_th, "S_master_final", "S_thermal"));

  double drift = rs.stats.at("s_total_drift_rel").get<double>();
  chk(drift <= 1e-8, "total entropy is conserved to 1e-8 relative",
      "drift=" + format_value(drift));

  bool corr_ok = true;
  double worst = 0.0;
  for (size_t i = 0; i < sS.size(); ++i)
    if (sS[i] > 0.02 && sSE[i] >= 0.0) {
      corr_ok = false;
      worst = std::max(worst, sSE[i]);
    }
  (void)sTot;
  chk(corr_ok, "correlation entropy is negative whenever S_S > 0.02",
      corr_ok ? "" : "worst S_SE=" + format_value(worst));
  return chk.fails;
}

int reproduce_fig2(const std::string& out_dir, std::ostream& log) {
  RunConfig cfg = parse_config("qft-evolve", json{{"output", "fig2_evolve.csv"}});
  RunSummary rs = run(cfg, out_dir, log);
  QftParams p = qft_params_from(cfg.params);
  StationarySolution sol = solve_stationary(p, cfg.params.at("n_grid").get<int>(),
                                            cfg.params.at("lambda_factor").get<double>());

  Checker chk{log};
  double s_final = rs.stats.at("final_entropy").get<double>();
  double rel = std::abs(s_final - sol.s_ms) / sol.s_ms;
  chk(rel <= 0.02, "entropy settles to the stationary value within 2%",
      num2(s_final, sol.s_ms, "S_final", "S_ms") + " rel=" + format_value(rel));
  double com = rs.stats.at("commutator_drift").get<double>();
  chk(com <= 1e-4, "equal-time commutator preserved to 1e-4",
      "drift=" + format_value(com));
  return chk.fails;
}

int reproduce_fig3(const std::string& out_dir, std::ostream& log) {
  RunConfig cfg = parse_config("sweep", json{{"output", "fig3_sweep.csv"}});
  RunSummary rs = run(cfg, out_dir, log);
  SeriesFile f = read_series(rs.outputs.back());
  std::vector<double> h = f.col("h");
  std::vector<double> dms = f.col("Δ_ms");
  std::vector<double> sms = f.col("S_ms");

  QftParams p;
  p.m_phi = cfg.params.at("m_phi").get<double>();
  p.h = 0.0;
  p.beta = cfg.params.at("beta").get<double>();
  p.k = cfg.params.at("k").get<double>();

  Checker chk{log};
  double coth_free = free_thermal_area(p.beta, p.omega()).delta;
  size_t i_weak = 0;
  for (size_t i = 1; i < h.size(); ++i)
    if (h[i] < h[i_weak]) i_weak = i;
  chk(std::abs(dms[i_weak] - coth_free) < 1e-3,
      "weak-coupling area matches the free thermal value to 1e-3",
      num2(dms[i_weak], coth_free, "delta_ms", "coth"));

  bool mono = true;
  double prev = -1.0;
  for (size_t i = 0; i < h.size(); ++i) {
    if (h[i] < 0.5) continue;
    if (sms[i] <= prev) mono = false;
    prev = sms[i];
  }
  chk(mono, "stationary entropy increases monotonically with the coupling", "");
  return chk.fails;
}

int reproduce_fig4(const std::string& out_dir, std::ostream& log) {
  RunConfig ce = parse_config("qft-evolve", json{{"output", "fig4_evolve.csv"}});
  RunSummary re = run(ce, out_dir, log);
  RunConfig cr = parse_config(
      "rate-fit", json{{"input", re.outputs.back()}, {"output", "fig4_rate.csv"}});
  RunSummary rr = run(cr, out_dir, log);

  Checker chk{log};
  {
    std::vector<double> t, d;
    for (int i = 0; i <= 2000; ++i) {
      double ti = 0.01 * i;
      t.push_back(ti);
      d.push_back(3.0 + 2.0 * std::exp(-0.45 * ti));
    }
    RateFit syn = extract_rate(t, d, 3.0, 1.0);
    chk(std::abs(syn.gamma_dec - 0.45) <= 1e-6 * 0.45,
        "synthetic exponential rate recovered to 1e-6 relative",
        "gamma=" + format_value(syn.gamma_dec));
  }
  double gamma = rr.stats.at("gamma_dec").get<double>();
  double formula = rr.stats.at("decay_rate").get<double>();
  double ratio = gamma / formula;
  chk(std::abs(ratio - 1.0) <= 0.25,
      "fitted decoherence rate within 25% of the single-particle decay rate",
      num2(gamma, formula, "gamma_dec", "decay_rate") + " ratio=" + format_value(ratio));
  return chk.fails;
}

}  // namespace

int reproduce(const std::string& figure_id, const std::string& out_dir,
              std::ostream& log) {
  int fails;
  if (figure_id == "fig1")
    fails = reproduce_fig1(out_dir, log);
  else if (figure_id == "fig2")
    fails = reproduce_fig2(out_dir, log);
  else if (figure_id == "fig3")
    fails = reproduce_fig3(out_dir, log);
  else if (figure_id == "fig4")
    fails = reproduce_fig4(out_dir, log);
  else
    throw Error(ErrorKind::Validation,
                "unknown figure id '" + figure_id + "' (known: fig1, fig2, fig3, fig4)");
  log << figure_id << ": " << (fails == 0 ? "all checks passed" :
                               std::to_string(fails) + " check(s) failed")
      << "\n";
  return fails;
}

}  // namespace decoh
