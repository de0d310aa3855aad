#include "runners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "contiguity.hpp"
#include "csvdata.hpp"
#include "errors.hpp"
#include "limitproc.hpp"
#include "metrics.hpp"
#include "workflow.hpp"

namespace csim {

namespace {

constexpr double kPiSquaredOverSix = 1.6449340668482264;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Typed configuration reader that records every resolved value (defaults
// included) and rejects unknown keys at the end.
class ConfigReader {
 public:
  explicit ConfigReader(const RunConfig& cfg) : cfg_(cfg) {}

  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    const auto* v = fetch(key);
    if (!v) return record(key, fallback);
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
      throw ConfigError("config key '" + key + "' must be an integer");
    }
    return record(key, v->get<std::int64_t>());
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const auto* v = fetch(key);
    if (!v) return record(key, fallback);
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
      throw ConfigError("config key '" + key + "' must be an integer");
    }
    return record(key, v->get<std::uint64_t>());
  }

  double get_double(const std::string& key, double fallback) {
    const auto* v = fetch(key);
    if (!v) return record(key, fallback);
    if (!v->is_number()) throw ConfigError("config key '" + key + "' must be numeric");
    return record(key, v->get<double>());
  }

  bool get_bool(const std::string& key, bool fallback) {
    const auto* v = fetch(key);
    if (!v) return record(key, fallback);
    if (!v->is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
    return record(key, v->get<bool>());
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const auto* v = fetch(key);
    if (!v) {
      record_json(key, fallback);
      return fallback;
    }
    if (!v->is_string()) throw ConfigError("config key '" + key + "' must be a string");
    const auto s = v->get<std::string>();
    record_json(key, s);
    return s;
  }

  std::optional<Eigen::VectorXd> get_vector(const std::string& key) {
    const auto* v = fetch(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) throw ConfigError("config key '" + key + "' must be a list");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        throw ConfigError("config key '" + key + "' must be a numeric list");
      }
      out[static_cast<Eigen::Index>(i)] = (*v)[i].get<double>();
    }
    record_json(key, *v);
    return out;
  }

  // Call after all reads: every user-supplied key must have been consumed.
  void finish() const {
    for (const auto& [key, value] : cfg_.values) {
      (void)value;
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + key + "' for command " + cfg_.command);
      }
    }
  }

  nlohmann::json manifest() const {
    nlohmann::json m;
    m["command"] = cfg_.command;
    m["version"] = kVersion;
    m["config"] = resolved_;
    return m;
  }

  void note(const std::string& key, const nlohmann::json& value) {
    resolved_[key] = value;
  }

 private:
  const nlohmann::json* fetch(const std::string& key) {
    seen_.insert(key);
    const auto it = cfg_.values.find(key);
    return it == cfg_.values.end() ? nullptr : &it->second;
  }

  template <typename T>
  T record(const std::string& key, T value) {
    resolved_[key] = value;
    return value;
  }
  void record_json(const std::string& key, const nlohmann::json& value) {
    resolved_[key] = value;
  }

  const RunConfig& cfg_;
  std::set<std::string> seen_;
  nlohmann::json resolved_ = nlohmann::json::object();
};

SchemeKind parse_scheme(const std::string& name) {
  if (name == "discard") return SchemeKind::discard;
  if (name == "augment") return SchemeKind::augment;
  if (name == "subsample") return SchemeKind::subsample;
  throw ConfigError("unknown scheme '" + name + "' (discard|augment|subsample)");
}

struct ModelSetup {
  WorkflowConfig workflow;
  std::string model_name;
  std::string estimator_name;
};

ModelSetup make_model_setup(ConfigReader& reader, SchemeKind scheme) {
  ModelSetup setup;
  setup.model_name = reader.get_string("model", "gaussian");
  const int dim = static_cast<int>(reader.get_int("dim", setup.model_name == "logistic" ? 2 : 1));
  if (dim < 1) throw ConfigError("dim must be >= 1");
  const std::optional<Eigen::VectorXd> theta0 = reader.get_vector("theta0");
  WorkflowConfig& wf = setup.workflow;

  if (setup.model_name == "gaussian") {
    setup.estimator_name = reader.get_string("estimator", "mle");
    wf.model = ExpFamilyModel::gaussian_known_var(1.0);
    wf.fmap = FeatureMap::glm(dim);
    if (dim == 1) {
      // normal location model: intercept-only design
      wf.features = FeatureDistribution::fixed_design({Eigen::VectorXd::Ones(1)});
    } else {
      wf.features = FeatureDistribution::standard_normal(dim);
    }
    wf.theta0 = theta0.value_or(Eigen::VectorXd::Zero(dim));
    if (setup.estimator_name == "median") {
      wf.estimator = EstimatorKind::median;
    } else if (setup.estimator_name == "mle") {
      wf.estimator = EstimatorKind::mle;
    } else {
      throw ConfigError("gaussian model supports estimator mle|median");
    }
  } else if (setup.model_name == "logistic") {
    setup.estimator_name = reader.get_string("estimator", "mle");
    if (setup.estimator_name != "mle") throw ConfigError("logistic model supports estimator mle");
    wf.model = ExpFamilyModel::bernoulli_logit();
    wf.fmap = FeatureMap::glm(dim);
    wf.features = FeatureDistribution::standard_normal(dim);
    if (theta0) {
      wf.theta0 = *theta0;
    } else if (dim == 2) {
      wf.theta0 = Eigen::Vector2d(1.0, -1.0);
    } else {
      wf.theta0 = Eigen::VectorXd::Ones(dim) / std::sqrt(static_cast<double>(dim));
    }
    wf.estimator = EstimatorKind::mle;
  } else if (setup.model_name == "linear") {
    setup.estimator_name = reader.get_string("estimator", "linear");
    wf.model = ExpFamilyModel::linear_unknown_var();
    wf.fmap = FeatureMap::linear_model(dim);
    wf.features = FeatureDistribution::standard_normal(dim);
    if (theta0) {
      wf.theta0 = *theta0;
    } else {
      // beta0 = ones/sqrt(dim), sigma0^2 = 1  =>  theta0 = (beta0, 1)
      wf.theta0 = Eigen::VectorXd::Ones(dim + 1) / std::sqrt(static_cast<double>(dim));
      wf.theta0[dim] = 1.0;
    }
    if (setup.estimator_name == "linear") {
      wf.estimator = EstimatorKind::linear_closed_form;
    } else if (setup.estimator_name == "mle") {
      wf.estimator = EstimatorKind::mle;
    } else {
      throw ConfigError("linear model supports estimator linear|mle");
    }
  } else {
    throw ConfigError("unknown model '" + setup.model_name + "' (gaussian|linear|logistic)");
  }

  wf.n = static_cast<int>(reader.get_int("n", 1000));
  wf.generations = static_cast<int>(reader.get_int("generations", 10));
  wf.seed = reader.get_u64("seed", 1);
  wf.separation_fallback = reader.get_bool("separation-fallback", false);
  wf.scheme = WeightScheme{scheme, nullptr};
  return setup;
}

void append_ratio_rows(std::vector<CurveRow>& rows, const std::string& scheme,
                       const std::string& metric, const RatioCurve& curve) {
  for (Eigen::Index g = 0; g < curve.value.size(); ++g) {
    rows.push_back({scheme, static_cast<int>(g + 1), metric, curve.value[g],
                    curve.stderr_[g]});
  }
}

double closed_form_ratio_target(SchemeKind scheme, int g) {
  if (scheme == SchemeKind::discard) return static_cast<double>(g);
  double s = 0.0;
  for (int k = 1; k <= g; ++k) s += 1.0 / (static_cast<double>(k) * k);
  return s;
}

RunResult run_simulate_workflow(const RunConfig& cfg) {
  ConfigReader reader(cfg);
  const SchemeKind scheme = parse_scheme(reader.get_string("scheme", "augment"));
  ModelSetup setup = make_model_setup(reader, scheme);
  const int replications = static_cast<int>(reader.get_int("replications", 200));
  const int parallel = static_cast<int>(reader.get_int("parallel", 0));
  reader.finish();

  const EnsembleResult ensemble =
      run_ensemble(setup.workflow, replications, parallel);

  rng::Stream score_rs = rng::root_key(setup.workflow.seed).child(0x5cu).stream();
  const Eigen::MatrixXd score_cov =
      compute_score_cov(setup.workflow.model, setup.workflow.fmap,
                        setup.workflow.theta0, setup.workflow.features, 200000,
                        score_rs);
  const ComparisonReport report =
      build_comparison(ensemble, setup.workflow.theta0, score_cov);

  RunResult out;
  const std::string label = scheme_label(scheme);
  append_ratio_rows(out.curves, label, "mse_ratio", ensemble.mse_ratio);
  append_ratio_rows(out.curves, label, "kl_ratio", report.kl_ratio);
  for (int g = 0; g < ensemble.generations; ++g) {
    out.curves.push_back({label, g + 1, "trace_mse", ensemble.trace_mse[g], {}});
    out.curves.push_back(
        {label, g + 1, "are_vs_gen1", report.are_vs_gen1[g], {}});
    out.curves.push_back(
        {label, g + 1, "fraction_degenerate", ensemble.fraction_degenerate[g], {}});
    if (std::isfinite(ensemble.median_sigma2[g])) {
      out.curves.push_back(
          {label, g + 1, "sigma2_median", ensemble.median_sigma2[g], {}});
    }
  }

  out.manifest = reader.manifest();
  out.manifest["notes"]["score_cov_trace"] = score_cov.trace();

  const int gmax = ensemble.generations;
  std::ostringstream os;
  os << "simulate-workflow: model=" << setup.model_name << " scheme=" << label
     << " n=" << setup.workflow.n << " G=" << gmax << " R=" << replications << "\n";
  os << "trace-MSE ratio at G=" << gmax << ": "
     << format_double(ensemble.mse_ratio.value[gmax - 1]) << " (stderr "
     << format_double(ensemble.mse_ratio.stderr_[gmax - 1]) << ")\n";
  if (scheme != SchemeKind::subsample) {
    os << "closed-form target at G=" << gmax << ": "
       << format_double(closed_form_ratio_target(scheme, gmax)) << "\n";
  }
  if (scheme == SchemeKind::augment) {
    os << "augment variance-inflation cap (pi^2/6): "
       << format_double(kPiSquaredOverSix) << "\n";
  }
  os << "fraction degenerate at G=" << gmax << ": "
     << format_double(ensemble.fraction_degenerate[gmax - 1]) << "\n";
  if (std::isfinite(ensemble.median_sigma2[gmax - 1])) {
    os << "median sigma2_hat at G=" << gmax << ": "
       << format_double(ensemble.median_sigma2[gmax - 1]) << "\n";
  }
  out.summary = os.str();
  return out;
}

LimitProcessSpec limit_spec_from(ConfigReader& reader, SchemeKind scheme) {
  const double vt = reader.get_double("vt", 1.0);
  const double vtheta = reader.get_double("vtheta", M_PI / 2.0);
  return LimitProcessSpec::scalar(vt, vtheta, scheme);
}

RunResult run_simulate_limit(const RunConfig& cfg) {
  ConfigReader reader(cfg);
  const SchemeKind scheme = parse_scheme(reader.get_string("scheme", "augment"));
  const LimitProcessSpec spec = limit_spec_from(reader, scheme);
  const int generations = static_cast<int>(reader.get_int("generations", 100));
  const std::int64_t trajectories =
      reader.get_int("trajectories", reader.get_int("replications", 200000));
  const std::uint64_t seed = reader.get_u64("seed", 1);
  const int parallel = static_cast<int>(reader.get_int("parallel", 0));
  reader.finish();

  const LimitEnsembleSummary summary =
      simulate_limit_ensemble(spec, generations, trajectories, seed, parallel);

  RunResult out;
  const std::string label = scheme_label(scheme);
  append_ratio_rows(out.curves, label, "variance_ratio", summary.variance_ratio);
  for (int g = 0; g < generations; ++g) {
    out.curves.push_back({label, g + 1, "trace_variance", summary.trace_variance[g], {}});
  }
  out.manifest = reader.manifest();

  std::ostringstream os;
  const double final_ratio = summary.variance_ratio.value[generations - 1];
  os << "simulate-limit: scheme=" << label << " G=" << generations
     << " trajectories=" << trajectories << "\n";
  os << "variance ratio at G=" << generations << ": " << format_double(final_ratio)
     << " (stderr " << format_double(summary.variance_ratio.stderr_[generations - 1])
     << ")\n";
  os << "pi^2/6 = " << format_double(kPiSquaredOverSix) << "\n";
  if (scheme != SchemeKind::subsample) {
    os << "closed-form target at G=" << generations << ": "
       << format_double(closed_form_ratio_target(scheme, generations)) << "\n";
  }
  out.summary = os.str();
  return out;
}

RunResult run_compare_workflows(const RunConfig& cfg) {
  ConfigReader reader(cfg);
  const std::string schemes_text =
      reader.get_string("schemes", "discard,augment,subsample");
  const int generations = static_cast<int>(reader.get_int("generations", 100));
  const std::int64_t trajectories =
      reader.get_int("trajectories", reader.get_int("replications", 200000));
  const std::uint64_t seed = reader.get_u64("seed", 1);
  const int parallel = static_cast<int>(reader.get_int("parallel", 0));
  const double vt = reader.get_double("vt", 1.0);
  const double vtheta = reader.get_double("vtheta", M_PI / 2.0);
  reader.finish();

  std::vector<SchemeKind> schemes;
  std::stringstream ss(schemes_text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (!token.empty()) schemes.push_back(parse_scheme(token));
  }
  if (schemes.empty()) throw ConfigError("compare-workflows: no schemes given");

  RunResult out;
  std::ostringstream os;
  os << "compare-workflows: G=" << generations << " trajectories=" << trajectories
     << " vt=" << format_double(vt) << " vtheta=" << format_double(vtheta) << "\n";
  std::vector<std::pair<std::string, RatioCurve>> curves;
  for (const SchemeKind scheme : schemes) {
    const LimitProcessSpec spec = LimitProcessSpec::scalar(vt, vtheta, scheme);
    const LimitEnsembleSummary summary =
        simulate_limit_ensemble(spec, generations, trajectories, seed, parallel);
    const std::string label = scheme_label(scheme);
    append_ratio_rows(out.curves, label, "variance_ratio", summary.variance_ratio);
    curves.emplace_back(label, summary.variance_ratio);
    const double final_ratio = summary.variance_ratio.value[generations - 1];
    os << label << ": variance ratio at G=" << generations << " = "
       << format_double(final_ratio) << " (stderr "
       << format_double(summary.variance_ratio.stderr_[generations - 1])
       << "), ARE vs generation 1 = " << format_double(1.0 / final_ratio) << "\n";
  }
  os << "pi^2/6 = " << format_double(kPiSquaredOverSix) << "\n";
  out.manifest = reader.manifest();
  out.summary = os.str();
  return out;
}

RunResult run_classify_csv(const RunConfig& cfg) {
  ConfigReader reader(cfg);
  const std::string csv_path = reader.get_string("csv", "");
  if (csv_path.empty()) throw ConfigError("classify-csv: 'csv' path is required");
  const std::string label_column = reader.get_string("label", "label");
  const double test_fraction = reader.get_double("test-fraction", 0.25);
  ClassifyOptions opts;
  opts.generations = static_cast<int>(reader.get_int("generations", 50));
  opts.seed = reader.get_u64("seed", 1);
  opts.separation_fallback = reader.get_bool("separation-fallback", true);
  reader.finish();

  const CsvSplit split = load_csv(csv_path, label_column, opts.seed, test_fraction);
  const ClassifyResult result = classify_csv(split, opts);

  RunResult out;
  for (const auto& [label, curve] :
       {std::pair<std::string, const std::vector<ClassifyPoint>*>{"discard", &result.discard},
        {"augment", &result.augment}}) {
    for (std::size_t g = 0; g < curve->size(); ++g) {
      out.curves.push_back({label, static_cast<int>(g + 1), "test_ce_loss",
                            (*curve)[g].ce_loss, {}});
      out.curves.push_back({label, static_cast<int>(g + 1), "test_accuracy",
                            (*curve)[g].accuracy, {}});
    }
  }

  out.manifest = reader.manifest();
  out.manifest["notes"]["train_rows"] = split.train.n_rows();
  out.manifest["notes"]["test_rows"] = split.test.n_rows();
  out.manifest["notes"]["dropped_rows"] = split.dropped_rows;
  out.manifest["notes"]["label_mapping"] = {{"0", split.label_zero}, {"1", split.label_one}};
  out.manifest["notes"]["constant_columns"] = split.constant_columns;
  out.manifest["notes"]["feature_policy"] =
      "synthetic generations resample features from the empirical training rows "
      "(with replacement), keeping the feature law fixed across generations";
  out.manifest["notes"]["fit_policy"] =
      "full-batch damped-Newton logistic regression with intercept";

  const std::size_t last = result.discard.size() - 1;
  const double d1 = result.discard[0].ce_loss, dG = result.discard[last].ce_loss;
  const double a1 = result.augment[0].ce_loss, aG = result.augment[last].ce_loss;
  std::ostringstream os;
  os << "classify-csv: " << csv_path << " G=" << opts.generations << " train="
     << split.train.n_rows() << " test=" << split.test.n_rows() << "\n";
  os << "test CE loss generation 1: discard=" << format_double(d1)
     << " augment=" << format_double(a1) << "\n";
  os << "test CE loss generation " << opts.generations << ": discard="
     << format_double(dG) << " augment=" << format_double(aG) << "\n";
  os << "loss increase: discard=" << format_double(dG - d1)
     << " augment=" << format_double(aG - a1) << "\n";
  os << "test accuracy generation " << opts.generations << ": discard="
     << format_double(result.discard[last].accuracy)
     << " augment=" << format_double(result.augment[last].accuracy) << "\n";
  out.summary = os.str();
  return out;
}

RunResult run_verify_contiguity(const RunConfig& cfg) {
  ConfigReader reader(cfg);
  const SchemeKind scheme = parse_scheme(reader.get_string("scheme", "augment"));
  ModelSetup setup = make_model_setup(reader, scheme);
  const int replications = static_cast<int>(reader.get_int("replications", 10000));
  const int parallel = static_cast<int>(reader.get_int("parallel", 0));
  reader.finish();

  const ContiguityReport report =
      contiguity_check(setup.workflow, replications, parallel);

  RunResult out;
  const std::string label = scheme_label(scheme);
  out.curves.push_back({label, report.generations, "mean_exp_llr",
                        report.mean_ratio, report.stderr_});
  out.curves.push_back({label, report.generations, "max_share", report.max_share, {}});
  out.curves.push_back({label, report.generations, "inconclusive",
                        report.inconclusive ? 1.0 : 0.0, {}});
  out.curves.push_back({label, report.generations, "excluded",
                        static_cast<double>(report.excluded), {}});
  out.manifest = reader.manifest();

  std::ostringstream os;
  os << "verify-contiguity: model=" << setup.model_name << " scheme=" << label
     << " n=" << setup.workflow.n << " G=" << report.generations
     << " R=" << replications << "\n";
  os << "mean exp(llr) = " << format_double(report.mean_ratio) << " (stderr "
     << format_double(report.stderr_) << "), expected 1 under the reference law\n";
  os << "largest replication share = " << format_double(report.max_share)
     << (report.inconclusive ? "  [inconclusive: heavy tail]" : "") << "\n";
  out.summary = os.str();
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, nlohmann::json value) {
  values[key] = std::move(value);
}

void RunConfig::set_text(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  // JSON scalar first, then a bare comma-separated numeric list, else string
  try {
    values[key] = nlohmann::json::parse(t);
    return;
  } catch (const nlohmann::json::exception&) {
  }
  if (t.find(',') != std::string::npos) {
    try {
      values[key] = nlohmann::json::parse("[" + t + "]");
      return;
    } catch (const nlohmann::json::exception&) {
    }
  }
  values[key] = t;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config file " + path + " line " + std::to_string(line_no) +
                       ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      throw ParseError("config file " + path + " line " + std::to_string(line_no) +
                       ": empty key");
    }
    // flags win: do not override values already set
    if (!values.count(key)) set_text(key, t.substr(eq + 1));
  }
}

RunResult run_command(const RunConfig& cfg) {
  if (cfg.command == "simulate-workflow") return run_simulate_workflow(cfg);
  if (cfg.command == "simulate-limit") return run_simulate_limit(cfg);
  if (cfg.command == "compare-workflows") return run_compare_workflows(cfg);
  if (cfg.command == "classify-csv") return run_classify_csv(cfg);
  if (cfg.command == "verify-contiguity") return run_verify_contiguity(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace csim
