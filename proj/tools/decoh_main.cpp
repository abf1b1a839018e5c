// decoh: Gaussian entropy generation in an oscillator-bath model and in a
// thermally coupled scalar field mode. Subcommands run one pipeline each and
// emit self-describing CSV; `reproduce` bundles the canned figure recipes
// with their pass/fail checks.
//
// Exit codes: 0 success, 2 validation error, 3 numerical error,
// 4 reproduction check failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "decoh/errors.hpp"
#include "decoh/run.hpp"

using nlohmann::json;

namespace {

struct Common {
  std::string config_file;
  std::string out_dir = ".";
};

// One overridable config entry: the CLI flag, the config key it writes, and
// how to convert the parsed text.
struct FlagSpec {
  enum Kind { Real, Int, Str };
  std::string flag;
  std::string key;
  Kind kind;
  std::string help;
};

struct SubState {
  Common common;
  std::vector<FlagSpec> specs;
  std::vector<std::string> values;  // parsed text per spec
  std::vector<double> list_value;   // h_values
  bool has_list = false;
  // At most one on/off flag per subcommand (preinitial, dump_points).
  CLI::Option* bool_opt = nullptr;
  bool bool_val = true;
  std::string bool_key;
};

void add_common(CLI::App* sc, Common& c) {
  // Long-form help only: the short -h would shadow the coupling flag --h.
  sc->set_help_flag("--help", "Print help and exit");
  sc->add_option("--config", c.config_file,
                 "JSON config file (flags override its entries)");
  sc->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
}

void add_flags(CLI::App* sc, SubState& st, std::vector<FlagSpec> specs) {
  st.specs = std::move(specs);
  st.values.resize(st.specs.size());
  for (size_t i = 0; i < st.specs.size(); ++i)
    sc->add_option(st.specs[i].flag, st.values[i], st.specs[i].help);
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is)
    throw decoh::Error(decoh::ErrorKind::Validation, "cannot open config file " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded())
    throw decoh::Error(decoh::ErrorKind::Validation,
                       "config file " + path + " is not valid JSON");
  if (!j.is_object())
    throw decoh::Error(decoh::ErrorKind::Validation,
                       "config file " + path + " must hold a JSON object");
  return j;
}

json merge_overrides(const CLI::App* sc, const SubState& st) {
  json merged = load_config_file(st.common.config_file);
  for (size_t i = 0; i < st.specs.size(); ++i) {
    if (sc->count(st.specs[i].flag) == 0) continue;
    const std::string& text = st.values[i];
    switch (st.specs[i].kind) {
      case FlagSpec::Real: {
        try {
          size_t pos = 0;
          double v = std::stod(text, &pos);
          if (pos != text.size()) throw std::invalid_argument(text);
          merged[st.specs[i].key] = v;
        } catch (const std::exception&) {
          throw decoh::Error(decoh::ErrorKind::Validation,
                             st.specs[i].flag + " expects a number, got '" + text + "'");
        }
        break;
      }
      case FlagSpec::Int: {
        try {
          size_t pos = 0;
          long long v = std::stoll(text, &pos);
          if (pos != text.size()) throw std::invalid_argument(text);
          merged[st.specs[i].key] = static_cast<std::int64_t>(v);
        } catch (const std::exception&) {
          throw decoh::Error(decoh::ErrorKind::Validation,
                             st.specs[i].flag + " expects an integer, got '" + text + "'");
        }
        break;
      }
      case FlagSpec::Str:
        merged[st.specs[i].key] = text;
        break;
    }
  }
  if (st.has_list && sc->count("--h-values") > 0) merged["h_values"] = st.list_value;
  if (st.bool_opt != nullptr && st.bool_opt->count() > 0) merged[st.bool_key] = st.bool_val;
  return merged;
}

int run_mode(const std::string& mode, const CLI::App* sc, const SubState& st) {
  json merged = merge_overrides(sc, st);
  decoh::RunConfig cfg = decoh::parse_config(mode, merged);
  decoh::run(cfg, st.common.out_dir, std::cout);
  return 0;
}

std::vector<FlagSpec> qft_flags() {
  return {
      {"--m-phi", "m_phi", FlagSpec::Real, "Field mass"},
      {"--h", "h", FlagSpec::Real, "Coupling to the thermal field"},
      {"--beta", "beta", FlagSpec::Real, "Inverse temperature"},
      {"--k", "k", FlagSpec::Real, "Spatial momentum of the mode"},
      {"--n-grid", "n_grid", FlagSpec::Int, "Frequency grid points"},
      {"--lambda-factor", "lambda_factor", FlagSpec::Real,
       "Grid half-width in units of the pole frequency"},
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Gaussian von Neumann entropy generation: oscillator bath and thermal field mode"};
  app.set_help_flag("--help", "Print help and exit");
  app.set_version_flag("--version", std::string("decoh ") + decoh::kVersion);
  app.require_subcommand(1);

  SubState qm, stat, evol, rate, sweep;
  std::string figure_id;
  Common repro_common;

  CLI::App* sc_qm = app.add_subcommand(
      "qm-run", "Oscillator-bath run: exact entropies and the perturbative master equation");
  add_common(sc_qm, qm.common);
  add_flags(sc_qm, qm,
            {{"--omega0", "omega0", FlagSpec::Real, "System frequency"},
             {"--beta", "beta", FlagSpec::Real, "Inverse temperature (units of 1/omega0)"},
             {"--n-bath", "n_bath", FlagSpec::Int, "Number of bath oscillators"},
             {"--bath-spacing", "bath_spacing", FlagSpec::Real,
              "Bath frequency spacing, omega_n = omega0 (1 + n s)"},
             {"--coupling", "coupling", FlagSpec::Real, "Bilinear coupling in units of omega0^2"},
             {"--t-max", "t_max", FlagSpec::Real, "Final time"},
             {"--n-out", "n_out", FlagSpec::Int, "Output samples"},
             {"--output", "output", FlagSpec::Str, "Output file name"}});

  CLI::App* sc_st = app.add_subcommand(
      "qft-stationary", "Stationary spectral function, area, and entropy of the interacting mode");
  add_common(sc_st, stat.common);
  {
    auto specs = qft_flags();
    specs.push_back({"--output", "output", FlagSpec::Str, "Output file name"});
    add_flags(sc_st, stat, specs);
  }

  CLI::App* sc_ev = app.add_subcommand(
      "qft-evolve", "Two-time memory-kernel evolution of the mode from a pure state");
  add_common(sc_ev, evol.common);
  {
    auto specs = qft_flags();
    specs.push_back({"--dt", "dt", FlagSpec::Real, "Time step"});
    specs.push_back({"--n-t", "n_t", FlagSpec::Int, "Number of steps"});
    specs.push_back({"--t-mem", "t_mem", FlagSpec::Real, "Memory window (negative: 10 beta)"});
    specs.push_back({"--taper-frac", "taper_frac", FlagSpec::Real,
                     "Cosine taper fraction of the kernel tail"});
    specs.push_back({"--commutator-tol", "commutator_tol", FlagSpec::Real,
                     "Abort threshold on commutator drift"});
    specs.push_back({"--area-tol", "area_tol", FlagSpec::Real,
                     "Clamp tolerance for the phase-space area"});
    specs.push_back({"--spectrum", "spectrum", FlagSpec::Str,
                     "Cached qft-stationary dump to take grid parameters from"});
    specs.push_back({"--output", "output", FlagSpec::Str, "Output file name"});
    add_flags(sc_ev, evol, specs);
    evol.bool_key = "preinitial";
    evol.bool_opt = sc_ev->add_flag("--preinitial,!--no-preinitial", evol.bool_val,
                                    "Attach free pure-state history before t = 0 (default: on)");
  }

  CLI::App* sc_rf = app.add_subcommand(
      "rate-fit", "Fit the exponential approach of the area to its stationary value");
  add_common(sc_rf, rate.common);
  add_flags(sc_rf, rate,
            {{"--input", "input", FlagSpec::Str, "qft-evolve CSV to fit"},
             {"--t-drop", "t_drop", FlagSpec::Real, "Discard times below this (negative: 5/m_phi)"},
             {"--residual-max", "residual_max", FlagSpec::Real,
              "Reject fits with rms residual above this"},
             {"--output", "output", FlagSpec::Str, "Output file name"}});

  CLI::App* sc_sw = app.add_subcommand(
      "sweep", "Stationary sweep over the coupling; emits the (h, area, entropy) table");
  add_common(sc_sw, sweep.common);
  {
    std::vector<FlagSpec> specs = {
        {"--m-phi", "m_phi", FlagSpec::Real, "Field mass"},
        {"--beta", "beta", FlagSpec::Real, "Inverse temperature"},
        {"--k", "k", FlagSpec::Real, "Spatial momentum of the mode"},
        {"--n-grid", "n_grid", FlagSpec::Int, "Frequency grid points"},
        {"--lambda-factor", "lambda_factor", FlagSpec::Real,
         "Grid half-width in units of the pole frequency"},
        {"--output", "output", FlagSpec::Str, "Output file name"}};
    add_flags(sc_sw, sweep, specs);
    sweep.has_list = true;
    sc_sw->add_option("--h-values", sweep.list_value, "Couplings to sweep")->delimiter(',');
    sweep.bool_key = "dump_points";
    sweep.bool_opt = sc_sw->add_flag("--dump-points,!--no-dump-points", sweep.bool_val,
                                     "Also write one stationary dump per point (default: on)");
  }

  CLI::App* sc_re =
      app.add_subcommand("reproduce", "Run a canned figure recipe and print its checks");
  sc_re->set_help_flag("--help", "Print help and exit");
  sc_re->add_option("figure", figure_id, "One of fig1, fig2, fig3, fig4")->required();
  sc_re->add_option("--out", repro_common.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sc_qm->parsed()) return run_mode("qm-run", sc_qm, qm);
    if (sc_st->parsed()) return run_mode("qft-stationary", sc_st, stat);
    if (sc_ev->parsed()) return run_mode("qft-evolve", sc_ev, evol);
    if (sc_rf->parsed()) return run_mode("rate-fit", sc_rf, rate);
    if (sc_sw->parsed()) return run_mode("sweep", sc_sw, sweep);
    if (sc_re->parsed()) {
      int fails = decoh::reproduce(figure_id, repro_common.out_dir, std::cout);
      return fails == 0 ? 0 : 4;
    }
  } catch (const decoh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
