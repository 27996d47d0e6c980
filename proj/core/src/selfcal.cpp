#include "footcal/selfcal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <unordered_set>

#include "footcal/error.hpp"

namespace footcal {

const char* to_string(Role r) { return r == Role::kTrain ? "train" : "test"; }

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kInit: return "init";
    case Variant::kSelfCal: return "selfcal";
    case Variant::kCorrected: return "corrected";
  }
  return "unknown";
}

void CalibrationDataset::validate(int min_frames) const {
  if (static_cast<int>(frames.size()) < min_frames) {
    throw Error(ErrorCode::kInvalidArgument, "dataset " + std::to_string(id) + " has " +
                                                 std::to_string(frames.size()) + " frames, need " +
                                                 std::to_string(min_frames));
  }
  if (cop_ref.size() != frames.size()) throw Error(ErrorCode::kDimensionMismatch, "one CoP reference per frame");
  if (!std::isfinite(grf_ref) || grf_ref <= 0.0) throw Error(ErrorCode::kInvalidArgument, "GRF reference must be positive");
  for (const Vec2& c : cop_ref) {
    if (!c.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite CoP reference");
  }
  for (const SensorFrame& f : frames) {
    for (double s : f.voltages) {
      if (!std::isfinite(s)) throw Error(ErrorCode::kNonFinite, "non-finite voltage in frame " + std::to_string(f.index));
    }
  }
}

SensorOffsets random_sensor_offsets(double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "offset amplitude must be non-negative");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x0ff5u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  SensorOffsets out;
  for (Vec2& o : out) {
    const double x = u(rng);
    o = Vec2(x, u(rng));
  }
  return out;
}

DoubleSupportConfig offset_sensors(const DoubleSupportConfig& ds, const SensorOffsets& offsets) {
  DoubleSupportConfig out = ds;
  const Eigen::Matrix2d R = ds.right_sole.rotation.topLeftCorner<2, 2>();
  for (int i = 0; i < kCellsPerFoot; ++i) {
    out.sensors_world[i] += offsets[i];
    out.sensors_world[kCellsPerFoot + i] += R * offsets[kCellsPerFoot + i];
  }
  return out;
}

CalibrationDataset simulate_dataset(const RobotModel& model, const DoubleSupportConfig& ds,
                                    const std::vector<JointVector>& states, const CellParams8& truth,
                                    const NoiseModel& noise, int id, int samples_per_state,
                                    const SensorOffsets* offsets) {
  if (samples_per_state < 1) throw Error(ErrorCode::kInvalidArgument, "samples per state must be positive");
  CalibrationDataset out;
  out.id = id;
  out.ds = ds;
  out.grf_ref = model.weight();
  NoiseModel n = noise;
  n.seed = noise.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(id) + 1;
  const DoubleSupportConfig physical = offsets ? offset_sensors(ds, *offsets) : ds;
  int index = 0;
  for (const JointVector& q : states) {
    for (int j = 0; j < samples_per_state; ++j) {
      const SimulatedFrame sf = simulate_frame(model, q, physical, truth, n, index++);
      out.frames.push_back(sf.frame);
      out.cop_ref.push_back(sf.modeled_cop);
    }
  }
  return out;
}

void SelfCalWeights::validate() const {
  if (w_n < 0.0 || w_zeta < 0.0) throw Error(ErrorCode::kInvalidArgument, "self-calibration weights must be >= 0");
  if (!(w_c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "CoP weight must be positive");
}

SharedGuess initial_guess(const std::vector<CalibrationDataset>& datasets, bool include_grf_row) {
  std::size_t frames = 0;
  for (const auto& d : datasets) frames += d.frames.size();
  if (frames < 2) throw Error(ErrorCode::kDegenerateData, "initial guess needs at least 2 frames");
  const std::size_t per_frame = include_grf_row ? 3 : 2;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(per_frame * frames), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(per_frame * frames));
  Eigen::Index r = 0;
  for (const auto& d : datasets) {
    for (std::size_t k = 0; k < d.frames.size(); ++k) {
      const auto& S = d.frames[k].voltages;
      Vec2 st = Vec2::Zero(), t = Vec2::Zero();
      double s = 0.0;
      for (int i = 0; i < kCellCount; ++i) {
        st += S[i] * d.ds.sensors_world[i];
        t += d.ds.sensors_world[i];
        s += S[i];
      }
      const Vec2 moment = d.cop_ref[k] * d.grf_ref;
      A.row(r) << st.x(), t.x();
      b[r++] = moment.x();
      A.row(r) << st.y(), t.y();
      b[r++] = moment.y();
      if (include_grf_row) {
        A.row(r) << s, static_cast<double>(kCellCount);
        b[r++] = d.grf_ref;
      }
    }
  }
  const Eigen::VectorXd x = numopt::linear_least_squares(A, b);
  return {x[0], x[1]};
}

CellParams8 shared_params(const SharedGuess& g) {
  CellParams8 p;
  p.fill({g.c0, g.d0});
  return p;
}

namespace {

constexpr int kParams = 2 * kCellCount;

CellParams8 unpack(const Eigen::VectorXd& z) {
  CellParams8 p;
  for (int i = 0; i < kCellCount; ++i) p[i] = {z[2 * i], z[2 * i + 1]};
  return p;
}

std::size_t frame_count(const std::vector<CalibrationDataset>& datasets) {
  std::size_t n = 0;
  for (const auto& d : datasets) n += d.frames.size();
  return n;
}

Eigen::Matrix2d planar_rotation(const DoubleSupportConfig& ds) { return ds.right_sole.rotation.topLeftCorner<2, 2>(); }

}  // namespace

numopt::NlsProblem identification_problem(const std::vector<CalibrationDataset>& datasets, const SharedGuess& init,
                                           const SelfCalWeights& weights, const numopt::NlsOptions& options) {
  weights.validate();
  if (datasets.empty()) throw Error(ErrorCode::kInvalidArgument, "identification needs training data");
  const auto frames = static_cast<Eigen::Index>(frame_count(datasets));
  const Eigen::Index rows = 3 * frames + kParams;
  Eigen::VectorXd zeta0(kParams);
  for (int i = 0; i < kCellCount; ++i) {
    zeta0[2 * i] = init.c0;
    zeta0[2 * i + 1] = init.d0;
  }
  const double sn = std::sqrt(weights.w_n), sc = std::sqrt(weights.w_c), sz = std::sqrt(weights.w_zeta);

  numopt::NlsProblem p;
  p.residual = [&datasets, rows, zeta0, sn, sc, sz](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd r(rows);
    Eigen::Index row = 0;
    for (const auto& d : datasets) {
      for (std::size_t k = 0; k < d.frames.size(); ++k) {
        const auto& S = d.frames[k].voltages;
        double n = 0.0;
        Vec2 m = Vec2::Zero();
        for (int i = 0; i < kCellCount; ++i) {
          const double f = z[2 * i] * S[i] + z[2 * i + 1];
          n += f;
          m += f * d.ds.sensors_world[i];
        }
        r[row++] = sn * (n - d.grf_ref);
        r.segment<2>(row) = sc * (m / n - d.cop_ref[k]);
        row += 2;
      }
    }
    r.tail(kParams) = sz * (z - zeta0);
    return r;
  };
  p.jacobian = [&datasets, rows, sn, sc, sz](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, kParams);
    Eigen::Index row = 0;
    for (const auto& d : datasets) {
      for (const SensorFrame& fr : d.frames) {
        const auto& S = fr.voltages;
        double n = 0.0;
        Vec2 m = Vec2::Zero();
        for (int i = 0; i < kCellCount; ++i) {
          const double f = z[2 * i] * S[i] + z[2 * i + 1];
          n += f;
          m += f * d.ds.sensors_world[i];
        }
        const Vec2 c = m / n;
        for (int i = 0; i < kCellCount; ++i) {
          J(row, 2 * i) = sn * S[i];
          J(row, 2 * i + 1) = sn;
          const Vec2 dc = (d.ds.sensors_world[i] - c) / n;
          J.block<2, 1>(row + 1, 2 * i) = sc * S[i] * dc;
          J.block<2, 1>(row + 1, 2 * i + 1) = sc * dc;
        }
        row += 3;
      }
    }
    J.bottomRows(kParams).diagonal().setConstant(sz);
    return J;
  };
  p.initial = zeta0;
  p.options = options;
  return p;
}

IdentifyResult identify_params(const std::vector<CalibrationDataset>& datasets, const SharedGuess& init,
                               const SelfCalWeights& weights, const numopt::NlsOptions& options) {
  const numopt::NlsProblem p = identification_problem(datasets, init, weights, options);
  IdentifyResult out;
  out.report = numopt::nls_solve(p);
  if (out.report.reason == numopt::Termination::kStalled && out.report.cost_history.size() <= 1) {
    throw SolveError("identification made no progress from the initial guess", out.report);
  }
  out.params = unpack(out.report.solution);
  return out;
}

FrameMeasurement measure_frame(const RobotModel& model, const DoubleSupportConfig& ds, const SensorFrame& frame,
                               const CellParams8& params, const CorrectionParams* left,
                               const CorrectionParams* right) {
  std::array<double, kCellsPerFoot> fl{}, fr{};
  double nl = 0.0, nr = 0.0;
  Vec2 ml = Vec2::Zero(), mr = Vec2::Zero();
  for (int i = 0; i < kCellsPerFoot; ++i) {
    fl[i] = cell_force(params[i], frame.voltages[i]);
    fr[i] = cell_force(params[kCellsPerFoot + i], frame.voltages[kCellsPerFoot + i]);
    nl += fl[i];
    nr += fr[i];
    ml += fl[i] * ds.sensors_world[i];
    mr += fr[i] * ds.sensors_world[kCellsPerFoot + i];
  }
  FrameMeasurement out;
  out.grf = nl + nr;
  if (!(out.grf > kForceFloor)) return out;
  if (left != nullptr && nl > kForceFloor) {
    const Vec2 p0 = measured_cop(fl, model.feet[0].sensors, kForceFloor);
    ml += nl * correction_offset(p0, fl, *left);
  }
  if (right != nullptr && nr > kForceFloor) {
    const Vec2 p0 = measured_cop(fr, model.feet[1].sensors, kForceFloor);
    mr += nr * (planar_rotation(ds) * correction_offset(p0, fr, *right));
  }
  out.cop = (ml + mr) / out.grf;
  out.valid = true;
  return out;
}

std::vector<FrameMeasurement> corrected_double_cop(const RobotModel& model, const CalibrationDataset& dataset,
                                                   const CellParams8& params, const CorrectionParams& left,
                                                   const CorrectionParams& right) {
  std::vector<FrameMeasurement> out;
  out.reserve(dataset.frames.size());
  for (const SensorFrame& f : dataset.frames) out.push_back(measure_frame(model, dataset.ds, f, params, &left, &right));
  return out;
}

numopt::NlsProblem double_correction_problem(const RobotModel& model, const std::vector<CalibrationDataset>& datasets,
                                             const CellParams8& params, const numopt::NlsOptions& options) {
  constexpr int kN = CorrectionParams::kSize;
  // The corrected CoP is affine in the coefficients: c = c_plain + D z.
  std::vector<Eigen::Matrix<double, 2, 2 * kN>> design;
  std::vector<Vec2> offset;
  for (const auto& d : datasets) {
    const Eigen::Matrix2d R = planar_rotation(d.ds);
    for (std::size_t k = 0; k < d.frames.size(); ++k) {
      const FrameMeasurement plain = measure_frame(model, d.ds, d.frames[k], params);
      if (!plain.valid) continue;
      std::array<double, kCellsPerFoot> fl{}, fr{};
      double nl = 0.0, nr = 0.0;
      for (int i = 0; i < kCellsPerFoot; ++i) {
        fl[i] = cell_force(params[i], d.frames[k].voltages[i]);
        fr[i] = cell_force(params[kCellsPerFoot + i], d.frames[k].voltages[kCellsPerFoot + i]);
        nl += fl[i];
        nr += fr[i];
      }
      Eigen::Matrix<double, 2, 2 * kN> D = Eigen::Matrix<double, 2, 2 * kN>::Zero();
      if (nl > kForceFloor) {
        D.leftCols<kN>() = (nl / plain.grf) * correction_design(measured_cop(fl, model.feet[0].sensors), fl);
      }
      if (nr > kForceFloor) {
        D.rightCols<kN>() = (nr / plain.grf) * (R * correction_design(measured_cop(fr, model.feet[1].sensors), fr));
      }
      design.push_back(D);
      offset.push_back(plain.cop - d.cop_ref[k]);
    }
  }
  const auto rows = static_cast<Eigen::Index>(2 * design.size());
  Eigen::MatrixXd J(rows, 2 * kN);
  Eigen::VectorXd r0(rows);
  for (std::size_t k = 0; k < design.size(); ++k) {
    J.middleRows<2>(static_cast<Eigen::Index>(2 * k)) = design[k];
    r0.segment<2>(static_cast<Eigen::Index>(2 * k)) = offset[k];
  }
  numopt::NlsProblem p;
  p.residual = [J, r0](const Eigen::VectorXd& z) -> Eigen::VectorXd { return r0 + J * z; };
  p.jacobian = [J](const Eigen::VectorXd&) -> Eigen::MatrixXd { return J; };
  p.initial = Eigen::VectorXd::Zero(2 * kN);
  p.options = options;
  return p;
}

DoubleCorrection fit_double_correction(const RobotModel& model, const std::vector<CalibrationDataset>& datasets,
                                       const CellParams8& params, const numopt::NlsOptions& options) {
  const numopt::NlsProblem p = double_correction_problem(model, datasets, params, options);
  const Eigen::Index valid = p.residual(p.initial).size() / 2;
  if (valid < CorrectionParams::kSize) {
    throw Error(ErrorCode::kUnderdetermined,
                "double-support correction needs at least 16 valid frames, got " + std::to_string(valid));
  }
  DoubleCorrection out;
  out.report = numopt::nls_solve(p);
  out.left = CorrectionParams::from_vector(out.report.solution.head<CorrectionParams::kSize>());
  out.right = CorrectionParams::from_vector(out.report.solution.tail<CorrectionParams::kSize>());
  return out;
}

SelfCalResult run_selfcal(const RobotModel& model, const std::vector<CalibrationDataset>& train,
                          const SelfCalWeights& weights, const numopt::NlsOptions& options, bool include_grf_row) {
  SelfCalResult r;
  r.init = initial_guess(train, include_grf_row);
  const IdentifyResult id = identify_params(train, r.init, weights, options);
  r.params = id.params;
  r.identify_report = id.report;
  const DoubleCorrection corr = fit_double_correction(model, train, r.params, options);
  r.left = corr.left;
  r.right = corr.right;
  r.correction_report = corr.report;
  return r;
}

MaePair evaluate_variant(const RobotModel& model, const std::vector<CalibrationDataset>& datasets,
                         const SelfCalResult& result, Variant variant) {
  const CellParams8 params = variant == Variant::kInit ? shared_params(result.init) : result.params;
  const bool corrected = variant == Variant::kCorrected;
  std::vector<double> grf, grf_ref;
  std::vector<Vec2> cop, cop_ref;
  for (const auto& d : datasets) {
    for (std::size_t k = 0; k < d.frames.size(); ++k) {
      const FrameMeasurement m = measure_frame(model, d.ds, d.frames[k], params, corrected ? &result.left : nullptr,
                                               corrected ? &result.right : nullptr);
      if (!m.valid) continue;
      grf.push_back(m.grf);
      grf_ref.push_back(d.grf_ref);
      cop.push_back(m.cop);
      cop_ref.push_back(d.cop_ref[k]);
    }
  }
  return {mae_grf(grf, grf_ref), mae_cop(cop, cop_ref)};
}

std::uint64_t frame_hash(const SensorFrame& frame) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  mix(frame.voltages.data(), sizeof(double) * frame.voltages.size());
  if (frame.q.size() > 0) mix(frame.q.data(), sizeof(double) * static_cast<std::size_t>(frame.q.size()));
  return h;
}

void evaluate(const RobotModel& model, SelfCalResult& result, const std::vector<CalibrationDataset>& train,
              const std::vector<CalibrationDataset>& test) {
  std::unordered_set<std::uint64_t> seen;
  for (const auto& d : train) {
    for (const SensorFrame& f : d.frames) seen.insert(frame_hash(f));
  }
  for (const auto& d : test) {
    for (const SensorFrame& f : d.frames) {
      if (seen.count(frame_hash(f))) {
        throw Error(ErrorCode::kTrainTestOverlap,
                    "frame " + std::to_string(f.index) + " of dataset " + std::to_string(d.id) + " is also in training");
      }
    }
  }
  for (int v = 0; v < 3; ++v) {
    const auto variant = static_cast<Variant>(v);
    result.mae[v][0].reset();
    result.mae[v][1].reset();
    if (!train.empty()) result.mae[v][0] = evaluate_variant(model, train, result, variant);
    if (!test.empty()) result.mae[v][1] = evaluate_variant(model, test, result, variant);
  }
}

std::vector<Role> split_roles(int count, int n_train, std::uint64_t seed) {
  if (count < 0 || n_train < 0 || n_train > count) {
    throw Error(ErrorCode::kInvalidArgument, "training count must lie in [0, dataset count]");
  }
  std::vector<int> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5717u};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with an explicit draw so the split does not depend on the
  // standard library's shuffle implementation.
  for (int i = count - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<Role> roles(static_cast<std::size_t>(count), Role::kTest);
  for (int k = 0; k < n_train; ++k) roles[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = Role::kTrain;
  return roles;
}

}  // namespace footcal
