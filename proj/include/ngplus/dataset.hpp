#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "ngplus/gradients.hpp"
#include "ngplus/linalg.hpp"

namespace ngplus {

/// Samples are columns. Classification sets carry labels, regression sets
/// carry targets.
struct Dataset {
  Mat features;             // dim x size
  std::vector<int> labels;  // classification
  Mat targets;              // outputs x size, regression
  Index classes = 0;

  Index size() const { return features.cols(); }
  Index dim() const { return features.rows(); }
  bool is_classification() const { return classes > 0; }
};

/// Class c has mean drawn from N(0, separation^2 / dim I); samples are the
/// mean plus unit Gaussian noise, labels cycle 0..classes-1 by index.
struct GaussianMixtureSpec {
  Index classes = 3;
  Index dim = 10;
  Index samples = 3000;
  double separation = 2.0;
};

/// y = W* x + noise * xi, W* ~ N(0, 1/dim), x ~ N(0, I).
struct LinearRegressionSpec {
  Index dim = 10;
  Index outputs = 1;
  Index samples = 1000;
  double noise = 0.0;
};

using SyntheticSpec = std::variant<GaussianMixtureSpec, LinearRegressionSpec>;

struct SyntheticData {
  Dataset data;
  Mat planted;  // W* for regression, class means (dim x classes) for mixtures
};

SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// First 80% of the samples by index train, the rest test.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data);

Dataset subset(const Dataset& data, std::span<const Index> indices);
Batch make_batch(const Dataset& data, std::span<const Index> indices);
Batch full_batch(const Dataset& data);

/// Header `label,f1,...,fd`, one sample per row.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace ngplus
