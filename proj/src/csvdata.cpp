#include "csvdata.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace csim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

CsvSplit load_csv(const std::string& path, const std::string& label_column,
                  std::uint64_t split_seed, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction <= 0.5)) {
    throw ConfigError("load_csv: test_fraction must be in (0, 0.5]");
  }
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("load_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  int label_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = static_cast<int>(i);
  }
  if (label_idx < 0) throw LabelError("load_csv: label column '" + label_column + "' not found");
  const int n_cols = static_cast<int>(header.size()) - 1;
  if (n_cols < 1) throw ParseError("load_csv: no feature columns");

  std::vector<Eigen::VectorXd> rows;
  std::vector<std::string> raw_labels;
  int dropped = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("load_csv: line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    bool missing = false;
    for (const auto& c : cells) {
      if (c.empty()) {
        missing = true;
        break;
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    Eigen::VectorXd x(n_cols);
    int k = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (static_cast<int>(i) == label_idx) continue;
      double v = 0.0;
      if (!parse_double(cells[i], v)) {
        throw ParseError("load_csv: line " + std::to_string(line_no) +
                         ": cell '" + cells[i] + "' is not numeric");
      }
      x[k++] = v;
    }
    rows.push_back(std::move(x));
    raw_labels.push_back(cells[static_cast<std::size_t>(label_idx)]);
  }
  const int n = static_cast<int>(rows.size());
  if (n < 4) throw ParseError("load_csv: fewer than 4 usable rows");

  // binary label mapping: numeric {0,1} kept as is, otherwise the two
  // distinct values in lexicographic order map to 0 and 1
  std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
  if (distinct.size() != 2) {
    throw LabelError("load_csv: label column has " +
                     std::to_string(distinct.size()) + " distinct values, need 2");
  }
  std::string zero = *distinct.begin();
  std::string one = *std::next(distinct.begin());
  double z = 0.0, o = 0.0;
  if (parse_double(zero, z) && parse_double(one, o) && z > o) std::swap(zero, one);
  Eigen::VectorXd labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = raw_labels[static_cast<std::size_t>(i)] == one ? 1.0 : 0.0;
  }

  // deterministic split: Fisher-Yates shuffle of row indices
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng::Stream rs = rng::root_key(split_seed).child(0xc5u).stream();
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rs.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const int n_test = std::max(1, static_cast<int>(std::floor(test_fraction * n)));
  const int n_train = n - n_test;
  if (n_train < 2) throw ParseError("load_csv: training split too small");

  CsvSplit split;
  split.dropped_rows = dropped;
  split.label_zero = zero;
  split.label_one = one;
  auto& train = split.train;
  auto& test = split.test;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (static_cast<int>(i) == label_idx) continue;
    train.feature_names.push_back(header[i]);
  }
  test.feature_names = train.feature_names;
  train.label_name = test.label_name = label_column;
  train.features.resize(n_train, n_cols);
  train.labels.resize(n_train);
  test.features.resize(n_test, n_cols);
  test.labels.resize(n_test);
  for (int i = 0; i < n_train; ++i) {
    train.features.row(i) = rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].transpose();
    train.labels[i] = labels[order[static_cast<std::size_t>(i)]];
  }
  for (int i = 0; i < n_test; ++i) {
    const int src = order[static_cast<std::size_t>(n_train + i)];
    test.features.row(i) = rows[static_cast<std::size_t>(src)].transpose();
    test.labels[i] = labels[src];
  }

  // standardize with training statistics only
  split.col_mean.resize(static_cast<std::size_t>(n_cols));
  split.col_std.resize(static_cast<std::size_t>(n_cols));
  for (int c = 0; c < n_cols; ++c) {
    const double mean = train.features.col(c).mean();
    const double var =
        (train.features.col(c).array() - mean).square().sum() / n_train;
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      sd = 1.0;
      split.constant_columns.push_back(train.feature_names[static_cast<std::size_t>(c)]);
    }
    split.col_mean[static_cast<std::size_t>(c)] = mean;
    split.col_std[static_cast<std::size_t>(c)] = sd;
    train.features.col(c) = (train.features.col(c).array() - mean) / sd;
    test.features.col(c) = (test.features.col(c).array() - mean) / sd;
  }
  return split;
}

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

ClassifyPoint evaluate(const ExpFamilyModel& model, const FeatureMap& fmap,
                       const Eigen::VectorXd& theta,
                       const GenerationData& test) {
  ClassifyPoint pt;
  const Eigen::Index m = test.responses.size();
  int correct = 0;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const EtaVec eta = fmap.eta(test.features.row(i), theta);
    loss -= model.log_density(test.responses[i], eta);
    const double pred = eta[0] > 0.0 ? 1.0 : 0.0;
    if (pred == test.responses[i]) ++correct;
  }
  pt.ce_loss = loss / static_cast<double>(m);
  pt.accuracy = static_cast<double>(correct) / static_cast<double>(m);
  return pt;
}

}  // namespace

ClassifyResult classify_csv(const CsvSplit& split, const ClassifyOptions& opts) {
  if (opts.generations < 1 || opts.generations > 200) {
    throw ConfigError("classify_csv: generations must be in [1, 200]");
  }
  const int n = split.train.n_rows();
  const int d = split.train.n_cols();
  const ExpFamilyModel model = ExpFamilyModel::bernoulli_logit();
  const FeatureMap fmap = FeatureMap::glm(d + 1);
  const Eigen::VectorXd init = Eigen::VectorXd::Zero(d + 1);

  GenerationData real_block;
  real_block.features = with_intercept(split.train.features);
  real_block.responses = split.train.labels;
  GenerationData test_block;
  test_block.features = with_intercept(split.test.features);
  test_block.responses = split.test.labels;

  ClassifyResult result;
  const rng::StreamKey root = rng::root_key(opts.seed);

  for (const SchemeKind kind : {SchemeKind::discard, SchemeKind::augment}) {
    const WeightScheme scheme{kind, nullptr};
    const rng::StreamKey scheme_key =
        root.child(kind == SchemeKind::discard ? 0xd1u : 0xa1u);
    Corpus corpus;
    corpus.push_back(real_block);  // generation 1 shared across schemes
    auto& curve = kind == SchemeKind::discard ? result.discard : result.augment;
    curve.reserve(static_cast<std::size_t>(opts.generations));

    for (int g = 1; g <= opts.generations; ++g) {
      rng::Stream ws = scheme_key.child(static_cast<std::uint64_t>(g))
                           .child(rng::Purpose::weights)
                           .stream();
      const std::vector<double> weights = weights_for_generation(scheme, g, n, ws);
      NewtonOptions nopts;
      FitResult fit;
      try {
        fit = fit_weighted_mle(model, fmap, corpus, weights, init, nopts);
      } catch (const SeparationError&) {
        if (!opts.separation_fallback) throw;
        nopts.ridge = 1e-8;
        fit = fit_weighted_mle(model, fmap, corpus, weights, init, nopts);
      }
      curve.push_back(evaluate(model, fmap, fit.theta_hat, test_block));

      if (g == opts.generations) break;
      // next generation: features resampled from the empirical training rows,
      // labels from the freshly fitted model
      const rng::StreamKey gen_key = scheme_key.child(static_cast<std::uint64_t>(g + 1));
      rng::Stream fs = gen_key.child(rng::Purpose::features).stream();
      rng::Stream ys = gen_key.child(rng::Purpose::responses).stream();
      GenerationData block;
      block.features.resize(n, d + 1);
      block.responses.resize(n);
      for (int i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(
            fs.uniform_below(static_cast<std::uint64_t>(n)));
        block.features.row(i) = real_block.features.row(src);
        const EtaVec eta = fmap.eta(block.features.row(i), fit.theta_hat);
        block.responses[i] = model.sample_response(eta, ys);
      }
      corpus.push_back(std::move(block));
    }
  }
  return result;
}

}  // namespace csim
