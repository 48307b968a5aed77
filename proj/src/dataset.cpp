#include "ngplus/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "ngplus/rng.hpp"

namespace ngplus {

namespace {

struct Generate {
  std::uint64_t seed;

  SyntheticData operator()(const GaussianMixtureSpec& s) const {
    if (s.samples < 1) throw Error(Errc::InvalidSpec, "empty dataset (samples = 0)");
    if (s.classes < 2 || s.dim < 1) throw Error(Errc::InvalidSpec, "mixture needs >= 2 classes and dim >= 1");
    Rng rng(seed, Stream::Data);
    SyntheticData out;
    out.planted = rng.gaussian(s.dim, s.classes) * (s.separation / std::sqrt(static_cast<double>(s.dim)));
    Dataset& d = out.data;
    d.classes = s.classes;
    d.features.resize(s.dim, s.samples);
    d.labels.resize(static_cast<std::size_t>(s.samples));
    for (Index i = 0; i < s.samples; ++i) {
      const int label = static_cast<int>(i % s.classes);
      d.labels[static_cast<std::size_t>(i)] = label;
      d.features.col(i) = out.planted.col(label) + rng.gaussian(s.dim);
    }
    return out;
  }

  SyntheticData operator()(const LinearRegressionSpec& s) const {
    if (s.samples < 1) throw Error(Errc::InvalidSpec, "empty dataset (samples = 0)");
    if (s.dim < 1 || s.outputs < 1 || s.noise < 0) throw Error(Errc::InvalidSpec, "bad regression spec");
    Rng rng(seed, Stream::Data);
    SyntheticData out;
    out.planted = rng.gaussian(s.outputs, s.dim) / std::sqrt(static_cast<double>(s.dim));
    Dataset& d = out.data;
    d.features = rng.gaussian(s.dim, s.samples);
    d.targets = out.planted * d.features;
    if (s.noise > 0) d.targets += s.noise * rng.gaussian(s.outputs, s.samples);
    return out;
  }
};

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) { return std::visit(Generate{seed}, spec); }

Dataset subset(const Dataset& data, std::span<const Index> indices) {
  Dataset out;
  out.classes = data.classes;
  const Index n = static_cast<Index>(indices.size());
  out.features.resize(data.dim(), n);
  if (data.targets.size() > 0) out.targets.resize(data.targets.rows(), n);
  for (Index j = 0; j < n; ++j) {
    const Index i = indices[static_cast<std::size_t>(j)];
    out.features.col(j) = data.features.col(i);
    if (data.targets.size() > 0) out.targets.col(j) = data.targets.col(i);
    if (!data.labels.empty()) out.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data) {
  const Index n = data.size();
  const Index cut = (n * 4) / 5;
  std::vector<Index> train(static_cast<std::size_t>(cut));
  std::vector<Index> test(static_cast<std::size_t>(n - cut));
  std::iota(train.begin(), train.end(), Index{0});
  std::iota(test.begin(), test.end(), cut);
  return {subset(data, train), subset(data, test)};
}

Batch make_batch(const Dataset& data, std::span<const Index> indices) {
  Dataset s = subset(data, indices);
  return Batch{std::move(s.features), std::move(s.targets), std::move(s.labels)};
}

Batch full_batch(const Dataset& data) { return Batch{data.features, data.targets, data.labels}; }

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t row) {
  const std::string t = trim(text);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw Error(Errc::ParseError, "row " + std::to_string(row) + ": '" + t + "' is not a number");
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::InvalidSpec, path.string() + ": empty dataset (no header)");
  const auto header = split_fields(line);
  if (header.size() < 2 || trim(header.front()) != "label")
    throw Error(Errc::ParseError, "row 1: header must be label,f1,...,fd");
  const std::size_t width = header.size();

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != width)
      throw Error(Errc::RaggedRow, "row " + std::to_string(row) + ": " + std::to_string(fields.size()) +
                                       " fields, expected " + std::to_string(width));
    const double label = parse_number(fields[0], row);
    if (label != std::floor(label) || label < 0)
      throw Error(Errc::ParseError, "row " + std::to_string(row) + ": label must be a nonnegative integer");
    labels.push_back(static_cast<int>(label));
    std::vector<double> values;
    for (std::size_t j = 1; j < width; ++j) values.push_back(parse_number(fields[j], row));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(Errc::InvalidSpec, path.string() + ": empty dataset (header only)");

  Dataset d;
  d.features.resize(static_cast<Index>(width - 1), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j + 1 < width; ++j) d.features(static_cast<Index>(j), static_cast<Index>(i)) = rows[i][j];
  d.labels = std::move(labels);
  d.classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  if (!data.is_classification()) throw Error(Errc::InvalidArgument, "save_csv writes labelled datasets only");
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "label";
  for (Index j = 0; j < data.dim(); ++j) out << ",f" << (j + 1);
  out << '\n';
  char buf[32];
  for (Index i = 0; i < data.size(); ++i) {
    out << data.labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(j, i));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

}  // namespace ngplus
