#include "ratrial/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ratrial/errors.hpp"

namespace ratrial {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

void require_keys(const ordered_json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) fail(path + "." + item.key(), "unknown key");
}

double get_number(const ordered_json& obj, const std::string& path, const std::string& key,
                  std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(path + "." + key, "missing required number");
  }
  if (!obj[key].is_number()) fail(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

int get_int(const ordered_json& obj, const std::string& path, const std::string& key,
            std::optional<int> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(path + "." + key, "missing required integer");
  }
  if (!obj[key].is_number_integer()) fail(path + "." + key, "expected an integer");
  return obj[key].get<int>();
}

IndependentBeta parse_beta_prior(const ordered_json& obj, const std::string& path) {
  require_keys(obj, path, {"s_c", "f_c", "s_d", "f_d"});
  IndependentBeta prior;
  prior.s_c = get_number(obj, path, "s_c");
  prior.f_c = get_number(obj, path, "f_c");
  prior.s_d = get_number(obj, path, "s_d");
  prior.f_d = get_number(obj, path, "f_d");
  return prior;
}

PooledNull parse_pooled_prior(const ordered_json& obj, const std::string& path) {
  require_keys(obj, path, {"s", "f"});
  return PooledNull{get_number(obj, path, "s"), get_number(obj, path, "f")};
}

DesignSpec parse_design(const ordered_json& obj, const std::string& path) {
  require_keys(obj, path, {"tag", "n", "p", "alpha", "prior", "test", "mse", "robust"});
  if (!obj.contains("tag") || !obj["tag"].is_string()) fail(path + ".tag", "missing design tag");
  DesignSpec spec;
  const auto tag = parse_design_tag(obj["tag"].get<std::string>());
  if (!tag) fail(path + ".tag", "unknown design tag '" + obj["tag"].get<std::string>() + "'");
  spec.tag = *tag;
  spec.n = get_int(obj, path, "n");
  if (spec.n < 1) fail(path + ".n", "horizon must be positive");
  spec.p = get_number(obj, path, "p", 0.95);
  spec.alpha = get_number(obj, path, "alpha", 0.1);
  if (obj.contains("prior")) spec.prior = parse_beta_prior(obj["prior"], path + ".prior");

  const bool uses_test = spec.tag == DesignTag::cmdp_t || spec.tag == DesignTag::cmdp_e1 ||
                         spec.tag == DesignTag::cmdp_e2;
  const bool uses_mse = spec.tag == DesignTag::cmdp_e1 || spec.tag == DesignTag::cmdp_e2;
  const bool uses_robust = spec.tag == DesignTag::cmdp_r;
  if (obj.contains("test")) {
    if (!uses_test) fail(path + ".test", "not used by design '" + to_string(spec.tag) + "'");
    const auto& test = obj["test"];
    const std::string tpath = path + ".test";
    require_keys(test, tpath, {"alpha_star", "beta", "null_prior", "power_prior"});
    spec.alpha_star = get_number(test, tpath, "alpha_star", spec.alpha_star);
    spec.beta = get_number(test, tpath, "beta", spec.beta);
    if (test.contains("null_prior"))
      spec.null_prior = parse_pooled_prior(test["null_prior"], tpath + ".null_prior");
    if (test.contains("power_prior"))
      spec.power_prior = parse_beta_prior(test["power_prior"], tpath + ".power_prior");
  } else if (uses_test) {
    fail(path + ".test", "required by design '" + to_string(spec.tag) + "'");
  }
  if (obj.contains("mse")) {
    if (!uses_mse) fail(path + ".mse", "not used by design '" + to_string(spec.tag) + "'");
    const auto& mse = obj["mse"];
    const std::string mpath = path + ".mse";
    require_keys(mse, mpath, {"xi", "prior"});
    spec.xi = get_number(mse, mpath, "xi");
    if (mse.contains("prior")) spec.estimation_prior = parse_beta_prior(mse["prior"], mpath + ".prior");
  } else if (uses_mse) {
    fail(path + ".mse", "required by design '" + to_string(spec.tag) + "'");
  }
  if (obj.contains("robust")) {
    if (!uses_robust) fail(path + ".robust", "not used by design '" + to_string(spec.tag) + "'");
    const auto& rob = obj["robust"];
    const std::string rpath = path + ".robust";
    require_keys(rob, rpath, {"xi", "li_prior"});
    spec.xi = get_number(rob, rpath, "xi");
    if (rob.contains("li_prior")) spec.li_prior = parse_beta_prior(rob["li_prior"], rpath + ".li_prior");
  } else if (uses_robust) {
    fail(path + ".robust", "required by design '" + to_string(spec.tag) + "'");
  }
  return spec;
}

SweepSpec parse_sweep(const ordered_json& obj, const std::string& path) {
  require_keys(obj, path,
               {"theta_c", "alpha", "theta_d_grid", "theta_d_start", "theta_d_stop", "theta_d_step"});
  SweepSpec sweep;
  sweep.theta_c = get_number(obj, path, "theta_c");
  sweep.alpha = get_number(obj, path, "alpha", 0.1);
  const bool has_list = obj.contains("theta_d_grid");
  const bool has_range =
      obj.contains("theta_d_start") || obj.contains("theta_d_stop") || obj.contains("theta_d_step");
  if (has_list == has_range)
    fail(path, "give either theta_d_grid or the theta_d_start/stop/step triple");
  if (has_list) {
    if (!obj["theta_d_grid"].is_array()) fail(path + ".theta_d_grid", "expected an array");
    for (const auto& v : obj["theta_d_grid"]) {
      if (!v.is_number()) fail(path + ".theta_d_grid", "expected numbers");
      sweep.theta_d.push_back(v.get<double>());
    }
  } else {
    const double start = get_number(obj, path, "theta_d_start");
    const double stop = get_number(obj, path, "theta_d_stop");
    const double step = get_number(obj, path, "theta_d_step");
    if (step <= 0.0 || stop < start) fail(path, "need theta_d_step > 0 and stop >= start");
    const int count = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) sweep.theta_d.push_back(start + i * step);
  }
  for (double v : sweep.theta_d)
    if (v < 0.0 || v > 1.0) fail(path, "theta_d values must lie in [0, 1]");
  if (sweep.theta_c < 0.0 || sweep.theta_c > 1.0) fail(path + ".theta_c", "must lie in [0, 1]");
  return sweep;
}

void parse_solver(const ordered_json& obj, const std::string& path, SolverOptions* solver,
                  int* threads) {
  require_keys(obj, path,
               {"eps_tol", "phi", "lambda_box", "max_cut_iterations", "max_repair_iterations",
                "threads"});
  solver->eps_tol = get_number(obj, path, "eps_tol", solver->eps_tol);
  solver->phi = get_number(obj, path, "phi", solver->phi);
  solver->lambda_box = get_number(obj, path, "lambda_box", solver->lambda_box);
  solver->max_cut_iterations = get_int(obj, path, "max_cut_iterations", solver->max_cut_iterations);
  solver->max_repair_iterations =
      get_int(obj, path, "max_repair_iterations", solver->max_repair_iterations);
  *threads = get_int(obj, path, "threads", *threads);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  require_keys(root, origin, {"design", "solver", "sweep", "output"});
  RunConfig config;
  if (root.contains("design")) config.design = parse_design(root["design"], origin + ".design");
  if (root.contains("solver"))
    parse_solver(root["solver"], origin + ".solver", &config.solver, &config.threads);
  if (root.contains("sweep")) config.sweep = parse_sweep(root["sweep"], origin + ".sweep");
  if (root.contains("output")) {
    const auto& out = root["output"];
    require_keys(out, origin + ".output", {"report", "policy", "csv"});
    const auto get_path = [&](const char* key) -> std::string {
      if (!out.contains(key)) return {};
      if (!out[key].is_string()) fail(origin + ".output." + key, "expected a string");
      return out[key].get<std::string>();
    };
    config.output.report = get_path("report");
    config.output.policy = get_path("policy");
    config.output.csv = get_path("csv");
  }
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

namespace {
constexpr char kPolicyMagic[8] = {'R', 'A', 'T', 'R', 'L', 'P', 'O', 'L'};
constexpr std::uint32_t kPolicyVersion = 1;
}  // namespace

void save_policy(const PolicyTable& policy, const DesignSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out.write(kPolicyMagic, sizeof(kPolicyMagic));
  const std::uint32_t version = kPolicyVersion;
  const auto n = static_cast<std::uint32_t>(policy.horizon());
  const double p = policy.p();
  char tag[8] = {};
  std::snprintf(tag, sizeof(tag), "%s", to_string(spec.tag).c_str());
  const double prior[4] = {spec.prior.s_c, spec.prior.f_c, spec.prior.s_d, spec.prior.f_d};
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&p), sizeof(p));
  out.write(tag, sizeof(tag));
  out.write(reinterpret_cast<const char*>(prior), sizeof(prior));

  const StateIndexer idx(policy.horizon());
  std::vector<double> stage(stage_size(std::max(policy.horizon() - 1, 0)));
  for (int t = 0; t < policy.horizon(); ++t) {
    policy.stage_probs(idx, t, stage.data());
    out.write(reinterpret_cast<const char*>(stage.data()),
              static_cast<std::streamsize>(stage_size(t) * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_policy: write failed for " + path);
}

LoadedPolicy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  char magic[8];
  std::uint32_t version = 0, n = 0;
  double p = 0.0;
  char tag[9] = {};
  double prior[4] = {};
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&p), sizeof(p));
  in.read(tag, 8);
  in.read(reinterpret_cast<char*>(prior), sizeof(prior));
  if (!in || std::memcmp(magic, kPolicyMagic, sizeof(magic)) != 0 || version != kPolicyVersion)
    throw std::runtime_error("load_policy: bad header in " + path);
  const int horizon = static_cast<int>(n);
  std::vector<double> probs(stage_start(horizon));
  in.read(reinterpret_cast<char*>(probs.data()),
          static_cast<std::streamsize>(probs.size() * sizeof(double)));
  if (!in) throw std::runtime_error("load_policy: truncated file " + path);
  LoadedPolicy loaded;
  loaded.policy = PolicyTable::dense(horizon, p, std::move(probs));
  loaded.tag = tag;
  loaded.prior = IndependentBeta{prior[0], prior[1], prior[2], prior[3]};
  return loaded;
}

std::string report_to_json(const DesignOutcome& outcome) {
  ordered_json j;
  j["design"] = to_string(outcome.spec.tag);
  j["n"] = outcome.spec.n;
  j["p"] = outcome.spec.tag == DesignTag::er   ? 0.5
           : outcome.spec.tag == DesignTag::dp ? 1.0
           : outcome.spec.tag == DesignTag::crdp
               ? 0.9
               : outcome.spec.p;
  j["prior"] = {outcome.spec.prior.s_c, outcome.spec.prior.f_c, outcome.spec.prior.s_d,
                outcome.spec.prior.f_d};
  j["value"] = outcome.value;
  j["achieved_objective"] = outcome.achieved_objective;
  if (outcome.report) {
    const SolveReport& r = *outcome.report;
    j["dual_value"] = r.dual_value;
    j["relative_gap"] = r.relative_gap;
    j["lambda"] = r.lambda;
    j["constraint_slacks"] = r.slacks;
    j["cut_iterations"] = r.cut_iterations;
    j["repair_iterations"] = r.repair_iterations;
    j["kkt_residual"] = r.kkt_residual;
    j["deterministic"] = r.deterministic;
    j["box_active"] = r.box_active;
  }
  j["wall_seconds"] = outcome.wall_seconds;
  return j.dump(2) + "\n";
}

void save_report(const DesignOutcome& outcome, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_report: cannot open " + path);
  out << report_to_json(outcome);
  if (!out) throw std::runtime_error("save_report: write failed for " + path);
}

std::string oc_rows_to_csv(const std::vector<OcRow>& rows) {
  std::string csv = "theta_C,theta_D,patient_benefit,rejection_rate,bias,mse\n";
  char line[256];
  for (const OcRow& row : rows) {
    std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", row.theta_c,
                  row.theta_d, row.patient_benefit, row.rejection_rate, row.bias, row.mse);
    csv += line;
  }
  return csv;
}

void save_csv(const std::vector<OcRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out << oc_rows_to_csv(rows);
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

}  // namespace ratrial
