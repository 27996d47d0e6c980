#pragma once

#include <cstdint>
#include <vector>

#include "footcal/model.hpp"

namespace footcal {

struct AxisRange {
  double lo = 0.0;
  double hi = 0.0;
  int resolution = 2;

  /// Value of grid node i in [0, resolution).
  double node(int i) const;
};

struct SamplerConfig {
  AxisRange dx{-0.04, 0.08, 9};
  AxisRange dy{0.10, 0.17, 8};
  AxisRange dtheta{-0.35, 0.35, 8};
  double w_d = 1.0;
  double w_o = 0.1;
  double threshold = 0.04;
  int count = 5;
  std::uint64_t seed = 1;
  int max_consecutive_rejections = 10000;

  /// Throws kInvalidArgument on a malformed config.
  void validate() const;
};

/// Weighted distance between two stances: w_d * planar offset + w_o * |yaw|.
double config_distance(const DoubleSupportConfig& c1, const DoubleSupportConfig& c2, double w_d, double w_o);

/// True iff the two foot outlines overlap or touch.
bool feet_collide(const DoubleSupportConfig& ds, const RobotModel& model);

/// Rejection sampling over grid nodes. Every accepted stance is collision
/// free and farther than the threshold from all previously accepted ones.
/// Throws kSamplerStall after too many consecutive rejections.
std::vector<DoubleSupportConfig> sample_double_supports(const SamplerConfig& cfg, const RobotModel& model);

}  // namespace footcal
