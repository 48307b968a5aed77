#include "ngplus/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ngplus/error.hpp"

namespace ngplus {

namespace {

void check_horizon(double epoch, double max_epoch) {
  if (!(max_epoch > 0)) throw Error(Errc::InvalidArgument, "schedule max_epoch must be positive");
  if (epoch > max_epoch * (1 + 1e-12))
    throw Error(Errc::HorizonExceeded,
                "epoch " + std::to_string(epoch) + " past max_epoch " + std::to_string(max_epoch));
}

struct BaseValue {
  double epoch;
  std::int64_t iter;

  double operator()(const ConstantSchedule& s) const { return s.value; }
  double operator()(const CosineSchedule& s) const {
    check_horizon(epoch, s.max_epoch);
    return s.floor + 0.5 * (s.initial - s.floor) * (1.0 + std::cos(epoch / s.max_epoch * std::numbers::pi));
  }
  double operator()(const ExponentialSchedule& s) const {
    check_horizon(epoch, s.max_epoch);
    return s.initial * std::pow(std::max(0.0, 1.0 - epoch / s.max_epoch), s.decay_rate);
  }
  double operator()(const GeometricSchedule& s) const {
    if (!(s.period > 0)) throw Error(Errc::InvalidArgument, "geometric schedule period must be positive");
    return s.initial * std::pow(s.ratio, epoch / s.period);
  }
  double operator()(const PolyDecaySchedule& s) const {
    const double k = static_cast<double>(std::max<std::int64_t>(iter, 1));
    return s.c * std::pow(k, -s.beta);
  }
};

}  // namespace

double schedule_value(const Schedule& s, double epoch, std::int64_t iter) {
  if (!(epoch >= 0)) throw Error(Errc::InvalidArgument, "epoch must be nonnegative");
  if (s.warmup_epochs > 0 && epoch < s.warmup_epochs) {
    const double target = std::visit(BaseValue{s.warmup_epochs, iter}, s.kind);
    return s.warmup_start + (target - s.warmup_start) * (epoch / s.warmup_epochs);
  }
  return std::visit(BaseValue{epoch, iter}, s.kind);
}

}  // namespace ngplus
