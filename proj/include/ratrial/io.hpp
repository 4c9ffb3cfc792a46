#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ratrial/cmdp.hpp"
#include "ratrial/designs.hpp"
#include "ratrial/oc_eval.hpp"

namespace ratrial {

/// Operating-characteristic sweep request.
struct SweepSpec {
  double theta_c = 0.5;
  std::vector<double> theta_d;  // grid, in output order
  double alpha = 0.1;
};

struct OutputSpec {
  std::string report;  // JSON solve report
  std::string policy;  // binary policy artifact
  std::string csv;     // operating characteristics
};

/// One declarative run: what to build, how to solve it, what to evaluate,
/// where to write.
struct RunConfig {
  std::optional<DesignSpec> design;
  SolverOptions solver;
  int threads = 0;  // 0: leave the OpenMP default alone
  std::optional<SweepSpec> sweep;
  OutputSpec output;
};

/// Strict parser: unknown keys anywhere are errors, as are fields that the
/// configured design does not use. Throws ConfigError with a field path.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// Policy artifact: 64-byte header (magic, version, n, p, design tag,
/// prior pseudo-counts) followed by one little-endian double per
/// non-terminal state in storage-mapping order.
void save_policy(const PolicyTable& policy, const DesignSpec& spec, const std::string& path);
struct LoadedPolicy {
  PolicyTable policy;
  std::string tag;
  IndependentBeta prior;
};
LoadedPolicy load_policy(const std::string& path);

/// Solve/evaluation report as pretty-printed JSON (stable field order).
std::string report_to_json(const DesignOutcome& outcome);
void save_report(const DesignOutcome& outcome, const std::string& path);

/// CSV with header theta_C,theta_D,patient_benefit,rejection_rate,bias,mse.
/// '.' decimal separator, LF endings; byte-stable for identical inputs.
std::string oc_rows_to_csv(const std::vector<OcRow>& rows);
void save_csv(const std::vector<OcRow>& rows, const std::string& path);

}  // namespace ratrial
