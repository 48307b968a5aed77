#include "ngplus/metrics.hpp"

#include <charconv>

#include "ngplus/error.hpp"

namespace ngplus {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw Error(Errc::IoError, "cannot write " + path.string());
  out_ << "iter,epoch,loss,grad_norm,lr,damping,accuracy,wall_ms\n";
}

void MetricsWriter::write(const MetricsRow& row) {
  if (last_iter_ && row.iter <= *last_iter_)
    throw Error(Errc::InvalidArgument, "metrics rows must have strictly increasing iter");
  last_iter_ = row.iter;
  out_ << row.iter << ',' << format_double(row.epoch) << ',' << format_double(row.loss) << ','
       << format_double(row.grad_norm) << ',' << format_double(row.lr) << ',' << format_double(row.damping) << ','
       << (row.accuracy ? format_double(*row.accuracy) : std::string()) << ',' << row.wall_ms << '\n';
}

void Summary::add(const std::string& key, const std::string& value) { values_.emplace_back(key, value); }

bool Summary::check(const std::string& name, bool passed, const std::string& detail) {
  checks_.push_back({name, passed, detail});
  return passed;
}

bool Summary::all_passed() const {
  for (const auto& c : checks_)
    if (!c.passed) return false;
  return true;
}

std::string Summary::first_failure() const {
  for (const auto& c : checks_)
    if (!c.passed) return c.name;
  return "";
}

void Summary::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "status: " << (all_passed() ? "PASS" : "FAIL (first failure: " + first_failure() + ")") << '\n';
  for (const auto& [k, v] : values_) out << k << ": " << v << '\n';
  for (const auto& c : checks_) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << " (" << c.detail << ')';
    out << '\n';
  }
}

void write_matrix_csv(const Mat& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

}  // namespace ngplus
