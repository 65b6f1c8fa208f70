#pragma once

#include <cstddef>

#include "htds/config.hpp"

namespace htds {

// Three-phase cosine 1cycle schedule over total_steps optimizer steps.
struct LRSchedule {
  std::size_t total_steps = 0;
  double phase1_end = 0.0;  // in steps
  double phase2_end = 0.0;

  static LRSchedule make(std::size_t total_steps, const TrainConfig& cfg);
};

// Cosine interpolation from start (u = 0) to end (u = 1).
double cosine_interp(double start, double end, double u);

// lr at `step` in [0, total_steps]; throws std::out_of_range outside.
double onecycle_lr(double step, const LRSchedule& schedule, const TrainConfig& cfg);

}  // namespace htds
