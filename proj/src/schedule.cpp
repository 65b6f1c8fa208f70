#include "htds/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace htds {

LRSchedule LRSchedule::make(std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) throw std::invalid_argument("schedule needs at least one step");
  LRSchedule s;
  s.total_steps = total_steps;
  const auto total = static_cast<double>(total_steps);
  s.phase1_end = cfg.phase_fracs[0] * total;
  s.phase2_end = (cfg.phase_fracs[0] + cfg.phase_fracs[1]) * total;
  return s;
}

double cosine_interp(double start, double end, double u) {
  if (u <= 0.0) return start;
  if (u >= 1.0) return end;
  return end + (start - end) * (1.0 + std::cos(std::numbers::pi * u)) / 2.0;
}

double onecycle_lr(double step, const LRSchedule& s, const TrainConfig& cfg) {
  const auto total = static_cast<double>(s.total_steps);
  if (!(step >= 0.0 && step <= total)) throw std::out_of_range("schedule step out of range");
  const double peak = cfg.peak_lr;
  const double low = peak / cfg.lr_div_start;
  const double floor = peak / cfg.lr_div_final;
  if (step <= s.phase1_end && s.phase1_end > 0.0) {
    return cosine_interp(low, peak, step / s.phase1_end);
  }
  if (step <= s.phase2_end && s.phase2_end > s.phase1_end) {
    return cosine_interp(peak, low, (step - s.phase1_end) / (s.phase2_end - s.phase1_end));
  }
  if (total > s.phase2_end) return cosine_interp(low, floor, (step - s.phase2_end) / (total - s.phase2_end));
  return floor;
}

}  // namespace htds
