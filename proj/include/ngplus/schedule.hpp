#pragma once

#include <cstdint>
#include <variant>

namespace ngplus {

struct ConstantSchedule {
  double value = 0.1;
};

/// floor + 0.5 (initial - floor)(1 + cos(pi epoch / max_epoch))
struct CosineSchedule {
  double initial = 0.1;
  double floor = 0.001;
  double max_epoch = 1;
};

/// initial (1 - epoch / max_epoch)^decay_rate
struct ExponentialSchedule {
  double initial = 0.18;
  double decay_rate = 5;
  double max_epoch = 52;
};

/// initial ratio^(epoch / period); the damping form lambda0 * 0.8^(epoch/10).
struct GeometricSchedule {
  double initial = 0.16;
  double ratio = 0.8;
  double period = 10;
};

/// c k^(-beta) with k = max(iter, 1).
struct PolyDecaySchedule {
  double c = 0.1;
  double beta = 0.7;
};

using ScheduleKind =
    std::variant<ConstantSchedule, CosineSchedule, ExponentialSchedule, GeometricSchedule, PolyDecaySchedule>;

/// A schedule with optional linear warmup from warmup_start to the
/// schedule's own value at warmup_epochs.
struct Schedule {
  ScheduleKind kind = ConstantSchedule{};
  double warmup_epochs = 0;
  double warmup_start = 0;
};

inline Schedule constant(double v) { return Schedule{ConstantSchedule{v}}; }

double schedule_value(const Schedule& s, double epoch, std::int64_t iter);

}  // namespace ngplus
