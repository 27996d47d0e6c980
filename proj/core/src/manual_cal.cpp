#include "footcal/manual_cal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "footcal/error.hpp"

namespace footcal {

Eigen::Matrix<double, CorrectionParams::kSize, 1> CorrectionParams::to_vector() const {
  Eigen::Matrix<double, kSize, 1> v;
  for (int i = 0; i < 4; ++i) {
    v[i] = a[i];
    v[4 + i] = m[i];
    v[8 + i] = b[i];
    v[12 + i] = n[i];
  }
  return v;
}

CorrectionParams CorrectionParams::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kSize) throw Error(ErrorCode::kDimensionMismatch, "correction vector must have 16 entries");
  CorrectionParams p;
  for (int i = 0; i < 4; ++i) {
    p.a[i] = v[i];
    p.m[i] = v[4 + i];
    p.b[i] = v[8 + i];
    p.n[i] = v[12 + i];
  }
  return p;
}

GridProtocol GridProtocol::standard(const RobotModel& model, Foot foot) {
  const Polygon& poly = model.foot(foot).sensing_polygon;
  double xmin = poly[0].x(), xmax = xmin, ymin = poly[0].y(), ymax = ymin;
  for (const Vec2& v : poly) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  constexpr double kInset = 0.01;
  GridProtocol g;
  for (int i = 0; i < 6; ++i) {
    const double x = (xmin + kInset) + (xmax - xmin - 2 * kInset) * i / 5.0;
    for (int j = 0; j < 3; ++j) {
      const double y = (ymin + kInset) + (ymax - ymin - 2 * kInset) * j / 2.0;
      g.holes.emplace_back(x, y);
    }
  }
  return g;
}

LoadCellParams calibrate_cell(double no_load_voltage, double loaded_voltage, double known_force) {
  if (!(known_force > 0.0)) throw Error(ErrorCode::kInvalidArgument, "known force must be positive");
  if (loaded_voltage == no_load_voltage) {
    throw Error(ErrorCode::kDeadCell, "loaded and no-load voltages are identical");
  }
  const double sigma = (loaded_voltage - no_load_voltage) / known_force;
  return {1.0 / sigma, -no_load_voltage / sigma};
}

Eigen::Matrix<double, 2, CorrectionParams::kSize> correction_design(const Vec2& p0, std::span<const double> forces) {
  if (forces.size() != kCellsPerFoot) throw Error(ErrorCode::kDimensionMismatch, "correction needs 4 cell forces");
  Eigen::Matrix<double, 2, CorrectionParams::kSize> D = Eigen::Matrix<double, 2, CorrectionParams::kSize>::Zero();
  D(0, 0) = p0.x() * p0.x();
  D(0, 1) = p0.x();
  D(0, 2) = p0.y();
  D(0, 3) = 1.0;
  D(1, 8) = p0.y() * p0.y();
  D(1, 9) = p0.y();
  D(1, 10) = p0.x();
  D(1, 11) = 1.0;
  for (int i = 0; i < kCellsPerFoot; ++i) {
    D(0, 4 + i) = forces[i];
    D(1, 12 + i) = forces[i];
  }
  return D;
}

Vec2 correction_offset(const Vec2& p0, std::span<const double> forces, const CorrectionParams& params) {
  const auto& [a, m, b, n] = params;
  double dx = a[0] * p0.x() * p0.x() + a[1] * p0.x() + a[2] * p0.y() + a[3];
  double dy = b[0] * p0.y() * p0.y() + b[1] * p0.y() + b[2] * p0.x() + b[3];
  for (int i = 0; i < kCellsPerFoot; ++i) {
    dx += m[i] * forces[i];
    dy += n[i] * forces[i];
  }
  return {dx, dy};
}

Vec2 corrected_cop(const Vec2& p0, std::span<const double> forces, const CorrectionParams& params) {
  if (forces.size() != kCellsPerFoot) throw Error(ErrorCode::kDimensionMismatch, "correction needs 4 cell forces");
  return p0 + correction_offset(p0, forces, params);
}

numopt::NlsProblem correction_problem(std::span<const GridSample> samples, std::span<const Vec2> truths,
                                      const numopt::NlsOptions& options) {
  if (samples.size() != truths.size()) throw Error(ErrorCode::kDimensionMismatch, "samples and truths differ in length");
  const auto rows = static_cast<Eigen::Index>(2 * samples.size());
  Eigen::MatrixXd D(rows, CorrectionParams::kSize);
  Eigen::VectorXd offset(rows);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(2 * k);
    D.middleRows<2>(r) = correction_design(samples[k].cop, samples[k].forces);
    offset.segment<2>(r) = samples[k].cop - truths[k];
  }
  numopt::NlsProblem p;
  p.residual = [D, offset](const Eigen::VectorXd& z) -> Eigen::VectorXd { return offset + D * z; };
  p.jacobian = [D](const Eigen::VectorXd&) -> Eigen::MatrixXd { return D; };
  p.initial = Eigen::VectorXd::Zero(CorrectionParams::kSize);
  p.options = options;
  return p;
}

CorrectionFit fit_correction(std::span<const GridSample> samples, std::span<const Vec2> truths,
                             const numopt::NlsOptions& options) {
  if (samples.size() < static_cast<std::size_t>(CorrectionParams::kSize)) {
    throw Error(ErrorCode::kUnderdetermined, "need at least 16 samples, got " + std::to_string(samples.size()));
  }
  std::set<std::pair<double, double>> distinct;
  for (const Vec2& t : truths) distinct.emplace(t.x(), t.y());
  if (distinct.size() < 4) {
    throw Error(ErrorCode::kUnderdetermined,
                "need at least 4 distinct positions, got " + std::to_string(distinct.size()));
  }
  CorrectionFit fit;
  fit.report = numopt::nls_solve(correction_problem(samples, truths, options));
  fit.params = CorrectionParams::from_vector(fit.report.solution);
  return fit;
}

ShoeParams physical_shoe(const RobotModel& model, const CellParams8& truth, Foot foot) {
  ShoeParams s;
  const int off = static_cast<int>(foot) * kCellsPerFoot;
  for (int i = 0; i < kCellsPerFoot; ++i) s.cells[i] = truth[off + i];
  s.positions = model.foot(foot).sensors;
  return s;
}

GridRun run_grid_protocol(const RobotModel& model, Foot foot, const ShoeParams& physical, const ShoeParams& assumed,
                          const GridProtocol& protocol, const NoiseModel& noise) {
  for (std::size_t i = 1; i < protocol.weights_kg.size(); ++i) {
    if (!(protocol.weights_kg[i] > protocol.weights_kg[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "protocol weights must be strictly increasing");
    }
  }
  const Polygon& sensing = model.foot(foot).sensing_polygon;
  const Polygon hull = convex_hull(std::vector<Vec2>(physical.positions.begin(), physical.positions.end()));
  GridRun run;
  int sample_index = 0;
  for (const Vec2& hole : protocol.holes) {
    if (!contains(hull, hole) || !contains(sensing, hole)) {
      run.warnings.push_back("hole (" + std::to_string(hole.x()) + ", " + std::to_string(hole.y()) +
                             ") lies outside the sensor hull; skipped");
      continue;
    }
    for (double mass : protocol.weights_kg) {
      const double load = mass * model.gravity;
      const Eigen::VectorXd f = distribute_load(physical.positions, load, hole);
      std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(sample_index++), 0x9d1du};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> gauss(0.0, 1.0);
      GridSample s;
      s.hole = hole;
      s.weight_kg = mass;
      for (int i = 0; i < kCellsPerFoot; ++i) {
        double v = cell_voltage(physical.cells[i], f[i]);
        if (noise.voltage_std > 0.0) v += noise.voltage_std * gauss(rng);
        s.forces[i] = cell_force(assumed.cells[i], v);
      }
      s.grf = measured_grf(s.forces);
      s.cop = measured_cop(s.forces, assumed.positions);
      run.samples.push_back(s);
      run.truths.push_back(hole);
    }
  }
  return run;
}

MaeReport mae_grf(std::span<const double> measured, std::span<const double> truth) {
  if (measured.size() != truth.size()) throw Error(ErrorCode::kDimensionMismatch, "series lengths differ");
  if (measured.empty()) throw Error(ErrorCode::kInvalidArgument, "MAE needs at least one sample");
  std::vector<double> err(measured.size());
  for (std::size_t k = 0; k < measured.size(); ++k) err[k] = std::abs(measured[k] - truth[k]);
  const Eigen::Map<const Eigen::VectorXd> e(err.data(), static_cast<Eigen::Index>(err.size()));
  MaeReport r;
  r.mean = e.mean();
  r.std = std::sqrt((e.array() - r.mean).square().mean());
  r.count = static_cast<int>(err.size());
  r.units = "N";
  return r;
}

MaeReport mae_cop(std::span<const Vec2> measured, std::span<const Vec2> truth) {
  if (measured.size() != truth.size()) throw Error(ErrorCode::kDimensionMismatch, "series lengths differ");
  if (measured.empty()) throw Error(ErrorCode::kInvalidArgument, "MAE needs at least one sample");
  Eigen::VectorXd e(static_cast<Eigen::Index>(measured.size()));
  for (std::size_t k = 0; k < measured.size(); ++k) e[static_cast<Eigen::Index>(k)] = 1e3 * (measured[k] - truth[k]).norm();
  MaeReport r;
  r.mean = e.mean();
  r.std = std::sqrt((e.array() - r.mean).square().mean());
  r.count = static_cast<int>(measured.size());
  r.units = "mm";
  return r;
}

ManualCalibration run_manual_calibration(const RobotModel& model, const CellParams8& truth, const ManualBias& bias,
                                         const NoiseModel& noise, const numopt::NlsOptions& options) {
  std::seed_seq seq{static_cast<std::uint32_t>(bias.seed), static_cast<std::uint32_t>(bias.seed >> 32), 0xb1a5u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double known_force = bias.calibration_mass_kg * model.gravity;

  ManualCalibration out;
  for (int f = 0; f < 2; ++f) {
    const Foot foot = static_cast<Foot>(f);
    const ShoeParams physical = physical_shoe(model, truth, foot);
    ShoeCalibration& shoe = out.shoes[f];
    for (int i = 0; i < kCellsPerFoot; ++i) {
      double s0 = 0.0, sg = 0.0;
      for (int r = 0; r < bias.readings_per_level; ++r) {
        s0 += cell_voltage(physical.cells[i], 0.0) + noise.voltage_std * gauss(rng);
        sg += cell_voltage(physical.cells[i], known_force) + noise.voltage_std * gauss(rng);
      }
      s0 /= bias.readings_per_level;
      sg /= bias.readings_per_level;
      LoadCellParams cal = calibrate_cell(s0, sg, known_force);
      const double gain = 1.0 + bias.gain_error * unit(rng);
      cal.a *= gain;
      cal.b *= gain;
      shoe.assumed.cells[i] = cal;
      shoe.assumed.positions[i] =
          physical.positions[i] + bias.position_perturbation * Vec2(unit(rng), unit(rng));
    }
    NoiseModel grid_noise = noise;
    grid_noise.seed = noise.seed + 101 * static_cast<std::uint64_t>(f + 1);
    shoe.grid = run_grid_protocol(model, foot, physical, shoe.assumed, GridProtocol::standard(model, foot), grid_noise);
    const CorrectionFit fit = fit_correction(shoe.grid.samples, shoe.grid.truths, options);
    shoe.correction = fit.params;

    std::vector<double> grf, load;
    std::vector<Vec2> raw, corrected;
    for (const GridSample& s : shoe.grid.samples) {
      grf.push_back(s.grf);
      load.push_back(s.weight_kg * model.gravity);
      raw.push_back(s.cop);
      corrected.push_back(corrected_cop(s.cop, s.forces, shoe.correction));
    }
    shoe.grf = mae_grf(grf, load);
    shoe.cop_measured = mae_cop(raw, shoe.grid.truths);
    shoe.cop_corrected = mae_cop(corrected, shoe.grid.truths);
  }
  return out;
}

}  // namespace footcal
