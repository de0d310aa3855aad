// collapsesim command-line interface. Links only the C API.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "collapsesim.h"

namespace {

struct ConfigDeleter {
  void operator()(cs_config* p) const { cs_config_free(p); }
};
struct ResultDeleter {
  void operator()(cs_result* p) const { cs_result_free(p); }
};

struct CommonFlags {
  std::string config_file;
  std::string out_dir = "out";
  std::vector<std::pair<std::string, std::string>> pairs;
};

void add_option(CLI::App* cmd, CommonFlags& flags, const std::string& flag,
                const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag,
      [&flags, key](const std::string& v) { flags.pairs.emplace_back(key, v); },
      help);
}

int run(const std::string& command, const CommonFlags& flags) {
  std::unique_ptr<cs_config, ConfigDeleter> cfg(cs_config_new(command.c_str()));
  if (!cfg) {
    std::fprintf(stderr, "error: out of memory\n");
    return CS_ERROR;
  }
  for (const auto& [key, value] : flags.pairs) {
    const cs_status st = cs_config_set(cfg.get(), key.c_str(), value.c_str());
    if (st != CS_OK) {
      std::fprintf(stderr, "error: %s\n", cs_last_error());
      return st;
    }
  }
  if (!flags.config_file.empty()) {
    const cs_status st = cs_config_load_file(cfg.get(), flags.config_file.c_str());
    if (st != CS_OK) {
      std::fprintf(stderr, "error: %s\n", cs_last_error());
      return st;
    }
  }

  cs_result* raw = nullptr;
  const cs_status st = cs_run(cfg.get(), &raw);
  if (st != CS_OK) {
    std::fprintf(stderr, "error: %s\n", cs_last_error());
    return st;
  }
  std::unique_ptr<cs_result, ResultDeleter> result(raw);

  const cs_status wst = cs_result_write(result.get(), flags.out_dir.c_str());
  if (wst != CS_OK) {
    std::fprintf(stderr, "error: %s\n", cs_last_error());
    return wst;
  }
  std::fputs(cs_result_summary_text(result.get()), stdout);
  std::printf("outputs written to %s\n", flags.out_dir.c_str());
  return CS_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("collapsesim ") + cs_version() +
               " - iterative model-training simulator"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    CommonFlags flags;
    std::string name;
  };
  std::vector<std::unique_ptr<Sub>> subs;

  auto make = [&](const std::string& name, const std::string& desc) -> Sub& {
    auto sub = std::make_unique<Sub>();
    sub->name = name;
    sub->cmd = app.add_subcommand(name, desc);
    sub->cmd->add_option("--config", sub->flags.config_file,
                         "flat key = value config file (flags win)");
    sub->cmd->add_option("--out", sub->flags.out_dir, "output directory");
    subs.push_back(std::move(sub));
    return *subs.back();
  };

  auto add_common = [](Sub& s) {
    add_option(s.cmd, s.flags, "--seed", "seed", "root RNG seed");
    add_option(s.cmd, s.flags, "--generations", "generations", "number of generations G");
    add_option(s.cmd, s.flags, "--parallel", "parallel", "worker threads (0 = auto)");
  };

  {
    Sub& s = make("simulate-workflow",
                  "finite-sample training loop ensemble for one scheme");
    add_common(s);
    add_option(s.cmd, s.flags, "--scheme", "scheme", "discard|augment|subsample");
    add_option(s.cmd, s.flags, "--model", "model", "gaussian|linear|logistic");
    add_option(s.cmd, s.flags, "--estimator", "estimator", "mle|linear|median");
    add_option(s.cmd, s.flags, "--n", "n", "per-generation sample size");
    add_option(s.cmd, s.flags, "--dim", "dim", "raw feature dimension");
    add_option(s.cmd, s.flags, "--theta0", "theta0", "true parameter, comma-separated");
    add_option(s.cmd, s.flags, "--replications", "replications", "ensemble replications");
    add_option(s.cmd, s.flags, "--separation-fallback", "separation-fallback",
               "retry separated logistic fits with tiny ridge (true|false)");
  }
  {
    Sub& s = make("simulate-limit", "limiting Gaussian process ensemble for one scheme");
    add_common(s);
    add_option(s.cmd, s.flags, "--scheme", "scheme", "discard|augment|subsample");
    add_option(s.cmd, s.flags, "--trajectories", "trajectories", "Monte Carlo trajectories");
    add_option(s.cmd, s.flags, "--replications", "replications", "alias for --trajectories");
    add_option(s.cmd, s.flags, "--vt", "vt", "score covariance V_T (scalar spec)");
    add_option(s.cmd, s.flags, "--vtheta", "vtheta", "estimator covariance V_Theta (scalar spec)");
  }
  {
    Sub& s = make("compare-workflows", "matched limit ensembles across schemes");
    add_common(s);
    add_option(s.cmd, s.flags, "--schemes", "schemes", "comma list, default discard,augment,subsample");
    add_option(s.cmd, s.flags, "--trajectories", "trajectories", "Monte Carlo trajectories");
    add_option(s.cmd, s.flags, "--replications", "replications", "alias for --trajectories");
    add_option(s.cmd, s.flags, "--vt", "vt", "score covariance V_T (scalar spec)");
    add_option(s.cmd, s.flags, "--vtheta", "vtheta", "estimator covariance V_Theta (scalar spec)");
  }
  {
    Sub& s = make("classify-csv",
                  "iterative logistic classification on a local CSV dataset");
    add_common(s);
    add_option(s.cmd, s.flags, "--csv", "csv", "input CSV path (header row, comma-separated)");
    add_option(s.cmd, s.flags, "--label", "label", "binary label column name");
    add_option(s.cmd, s.flags, "--test-fraction", "test-fraction", "held-out fraction in (0, 0.5]");
    add_option(s.cmd, s.flags, "--separation-fallback", "separation-fallback",
               "retry separated fits with tiny ridge (true|false)");
  }
  {
    Sub& s = make("verify-contiguity",
                  "unit-mean likelihood-ratio diagnostic under the reference law");
    add_common(s);
    add_option(s.cmd, s.flags, "--scheme", "scheme", "discard|augment|subsample");
    add_option(s.cmd, s.flags, "--model", "model", "gaussian|linear|logistic");
    add_option(s.cmd, s.flags, "--n", "n", "per-generation sample size");
    add_option(s.cmd, s.flags, "--dim", "dim", "raw feature dimension");
    add_option(s.cmd, s.flags, "--replications", "replications", "Monte Carlo replications");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return CS_ERROR_CONFIG;
  }

  for (const auto& sub : subs) {
    if (sub->cmd->parsed()) return run(sub->name, sub->flags);
  }
  std::fprintf(stderr, "error: no subcommand given\n");
  return CS_ERROR_CONFIG;
}
