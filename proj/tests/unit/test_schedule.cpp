#include <gtest/gtest.h>

#include <cmath>

#include "htds/schedule.hpp"

namespace htds {
namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

class OneCycleTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OneCycleTest, Anchors) {
  TrainConfig cfg;
  const std::size_t total = GetParam();
  const auto s = LRSchedule::make(total, cfg);
  const double t = static_cast<double>(total);
  EXPECT_LT(rel(onecycle_lr(0, s, cfg), 5e-5 / 25), 1e-12);
  EXPECT_LT(rel(onecycle_lr(0.30 * t, s, cfg), 5e-5), 1e-12);
  EXPECT_LT(rel(onecycle_lr(0.60 * t, s, cfg), 5e-5 / 25), 1e-12);
  EXPECT_LT(rel(onecycle_lr(t, s, cfg), 5e-5 / 1000), 1e-12);
  EXPECT_LT(rel(onecycle_lr(0.15 * t, s, cfg), 2.6e-5), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Totals, OneCycleTest, ::testing::Values(1, 10, 100, 1000, 12345));

TEST(OneCycle, ExactEndpoints) {
  TrainConfig cfg;
  const auto s = LRSchedule::make(100, cfg);
  EXPECT_EQ(onecycle_lr(0, s, cfg), cfg.peak_lr / 25);
  EXPECT_EQ(onecycle_lr(30, s, cfg), cfg.peak_lr);
  EXPECT_EQ(onecycle_lr(100, s, cfg), cfg.peak_lr / 1000);
}

TEST(OneCycle, ContinuousAtBoundaries) {
  TrainConfig cfg;
  const auto s = LRSchedule::make(1000, cfg);
  for (double b : {s.phase1_end, s.phase2_end}) {
    const double left = onecycle_lr(std::nextafter(b, 0.0), s, cfg);
    const double right = onecycle_lr(std::nextafter(b, 1e9), s, cfg);
    const double at = onecycle_lr(b, s, cfg);
    EXPECT_LT(std::abs(left - at) / at, 1e-12);
    EXPECT_LT(std::abs(right - at) / at, 1e-12);
  }
}

TEST(OneCycle, PhaseMonotonicity) {
  TrainConfig cfg;
  const auto s = LRSchedule::make(200, cfg);
  for (int i = 0; i < 200; ++i) {
    const double a = onecycle_lr(i, s, cfg), b = onecycle_lr(i + 1, s, cfg);
    if (i < 60) EXPECT_GT(b, a) << i;
    else EXPECT_LT(b, a) << i;
  }
}

TEST(OneCycle, OutOfRangeThrows) {
  TrainConfig cfg;
  const auto s = LRSchedule::make(10, cfg);
  EXPECT_THROW(onecycle_lr(-1, s, cfg), std::out_of_range);
  EXPECT_THROW(onecycle_lr(10.5, s, cfg), std::out_of_range);
  EXPECT_THROW(LRSchedule::make(0, cfg), std::invalid_argument);
}

TEST(OneCycle, CustomFractions) {
  TrainConfig cfg;
  cfg.phase_fracs = {0.5, 0.0, 0.5};
  const auto s = LRSchedule::make(10, cfg);
  EXPECT_EQ(onecycle_lr(5, s, cfg), cfg.peak_lr);
  EXPECT_LT(onecycle_lr(6, s, cfg), cfg.peak_lr / 25);
}

}  // namespace
}  // namespace htds
