#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "workflow.hpp"

namespace csim {

struct CsvDataset {
  std::vector<std::string> feature_names;
  std::string label_name;
  Eigen::MatrixXd features;  // standardized with training statistics
  Eigen::VectorXd labels;    // 0 / 1
  int n_rows() const { return static_cast<int>(features.rows()); }
  int n_cols() const { return static_cast<int>(features.cols()); }
};

struct CsvSplit {
  CsvDataset train;
  CsvDataset test;
  int dropped_rows = 0;  // rows with missing cells
  std::vector<double> col_mean;
  std::vector<double> col_std;            // training statistics
  std::vector<std::string> constant_columns;  // zero-variance, mapped to 0
  std::string label_zero, label_one;      // raw label values after mapping
};

// Loads a comma-separated file with a header row, drops rows with missing
// cells (counted), maps the binary label column to {0,1}, splits
// deterministically by split_seed and standardizes features to mean 0 /
// variance 1 using training-split statistics only. Zero-variance columns are
// flagged and mapped to all zeros.
CsvSplit load_csv(const std::string& path, const std::string& label_column,
                  std::uint64_t split_seed, double test_fraction);

struct ClassifyOptions {
  int generations = 50;
  std::uint64_t seed = 1;
  bool separation_fallback = true;
};

struct ClassifyPoint {
  double ce_loss = 0.0;
  double accuracy = 0.0;
};

struct ClassifyResult {
  std::vector<ClassifyPoint> discard;  // per generation
  std::vector<ClassifyPoint> augment;
};

// Iterative logistic-regression experiment on a tabular dataset: generation
// 1 fits on the real training rows; each later generation draws features by
// resampling the empirical training rows (with replacement, the closest
// generation-free feature law) and labels from the previously fitted model,
// then refits under the discard and augment weighting on shared
// generation-1 data. Fits are full-batch damped Newton with an intercept
// column. Reports held-out cross-entropy and accuracy per generation.
ClassifyResult classify_csv(const CsvSplit& split, const ClassifyOptions& opts);

}  // namespace csim
