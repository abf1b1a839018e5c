#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "decoh/errors.hpp"

namespace decoh {

inline constexpr const char* kVersion = "0.1.0";

// One parsed run request. `mode` picks the pipeline; `params` is a flat JSON
// object with defaults merged and keys validated, so echoing `params` into an
// output header fully reproduces the run.
struct RunConfig {
  std::string mode;
  nlohmann::json params;
};

// Merge `overrides` over the defaults of `mode`. Throws Validation on an
// unknown mode, an unknown key, or a value whose type does not match the
// default (integers stay integers, arrays must be numeric).
RunConfig parse_config(const std::string& mode, const nlohmann::json& overrides);

// Scalar results of a run; keys depend on the mode. The same values are
// echoed as `# key: value` header lines in the emitted CSV.
struct RunSummary {
  std::vector<std::string> outputs;  // files written, in emission order
  nlohmann::json stats;
};

// Dispatch `cfg` to the owning module and write its CSV artefacts under
// `out_dir` (created if missing). Writes are atomic: tmp file + rename.
// Progress and the summary are printed to `log`. Module errors propagate
// with the failing stage prefixed.
RunSummary run(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

// Canned figure recipes (fig1..fig4). Runs the recipe, prints one
// "[PASS]/[FAIL]" line per check to `log`, and returns the number of failed
// checks (0 means all passed).
int reproduce(const std::string& figure_id, const std::string& out_dir,
              std::ostream& log);

// Parsed form of an emitted CSV: the metadata header plus the numeric table.
// Feeding `params` back through run() reproduces the file byte-for-byte
// except the walltime line.
struct SeriesFile {
  std::string mode;
  nlohmann::json params;
  std::map<std::string, std::string> meta;  // summary header lines, raw text
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // index, throws Validation
  std::vector<double> col(const std::string& name) const;
};

SeriesFile read_series(const std::string& path);

// Shortest round-trip decimal formatting used for every emitted value.
std::string format_value(double v);

}  // namespace decoh
