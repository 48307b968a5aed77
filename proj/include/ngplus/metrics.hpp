#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ngplus/linalg.hpp"

namespace ngplus {

struct MetricsRow {
  std::int64_t iter = 0;
  double epoch = 0;
  double loss = 0;
  double grad_norm = 0;
  double lr = 0;
  double damping = 0;
  std::optional<double> accuracy;
  std::int64_t wall_ms = 0;
};

/// Shortest round-trip decimal form, identical across runs.
std::string format_double(double v);

/// metrics.csv writer; rows must have strictly increasing iter.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
  std::optional<std::int64_t> last_iter_;
};

/// summary.txt: `key: value` lines followed by one PASS/FAIL line per check.
class Summary {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value) { add(key, format_double(value)); }
  bool check(const std::string& name, bool passed, const std::string& detail = "");

  bool all_passed() const;
  std::string first_failure() const;
  void write(const std::filesystem::path& path) const;

 private:
  struct Check {
    std::string name;
    bool passed;
    std::string detail;
  };
  std::vector<std::pair<std::string, std::string>> values_;
  std::vector<Check> checks_;
};

void write_matrix_csv(const Mat& m, const std::filesystem::path& path);

}  // namespace ngplus
