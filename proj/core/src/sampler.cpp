#include "footcal/sampler.hpp"

#include <cmath>
#include <random>

#include "footcal/error.hpp"

namespace footcal {

double AxisRange::node(int i) const {
  if (resolution == 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

void SamplerConfig::validate() const {
  for (const AxisRange* r : {&dx, &dy, &dtheta}) {
    if (r->resolution < 2) throw Error(ErrorCode::kInvalidArgument, "grid resolution must be at least 2 per axis");
    if (!(r->lo <= r->hi)) throw Error(ErrorCode::kInvalidArgument, "range lower bound exceeds upper bound");
  }
  if (!(threshold > 0.0)) throw Error(ErrorCode::kInvalidArgument, "distance threshold must be positive");
  if (w_d < 0.0 || w_o < 0.0 || (w_d == 0.0 && w_o == 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "distance weights must be non-negative and not both zero");
  }
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be at least 1");
  if (max_consecutive_rejections < 1) throw Error(ErrorCode::kInvalidArgument, "rejection cap must be positive");
}

double config_distance(const DoubleSupportConfig& c1, const DoubleSupportConfig& c2, double w_d, double w_o) {
  return w_d * std::hypot(c1.dx - c2.dx, c1.dy - c2.dy) + w_o * std::abs(c1.dtheta - c2.dtheta);
}

bool feet_collide(const DoubleSupportConfig& ds, const RobotModel& model) {
  const auto polys = support_polygons(model, ds);
  return convex_polygons_intersect(polys[0], polys[1]);
}

std::vector<DoubleSupportConfig> sample_double_supports(const SamplerConfig& cfg, const RobotModel& model) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5a3bu};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> ix(0, cfg.dx.resolution - 1);
  std::uniform_int_distribution<int> iy(0, cfg.dy.resolution - 1);
  std::uniform_int_distribution<int> it(0, cfg.dtheta.resolution - 1);

  std::vector<DoubleSupportConfig> accepted;
  int rejections = 0;
  while (static_cast<int>(accepted.size()) < cfg.count) {
    const DoubleSupportConfig c =
        make_double_support(model, cfg.dx.node(ix(rng)), cfg.dy.node(iy(rng)), cfg.dtheta.node(it(rng)));
    bool ok = !feet_collide(c, model);
    for (std::size_t k = 0; ok && k < accepted.size(); ++k) {
      ok = config_distance(c, accepted[k], cfg.w_d, cfg.w_o) > cfg.threshold;
    }
    if (ok) {
      accepted.push_back(c);
      rejections = 0;
    } else if (++rejections >= cfg.max_consecutive_rejections) {
      throw Error(ErrorCode::kSamplerStall, std::to_string(rejections) + " consecutive rejections after " +
                                                std::to_string(accepted.size()) +
                                                " samples; try a smaller distance threshold");
    }
  }
  return accepted;
}

}  // namespace footcal
