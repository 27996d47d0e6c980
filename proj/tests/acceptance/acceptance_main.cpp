// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

#include "footcal/artifacts.hpp"
#include "footcal/error.hpp"
#include "scenario.hpp"

using namespace footcal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool monotone(const std::vector<double>& h) {
  for (std::size_t k = 1; k < h.size(); ++k)
    if (h[k] > h[k - 1]) return false;
  return true;
}

double worst_jacobian_error(const numopt::NlsProblem& p, const std::function<Eigen::VectorXd(std::mt19937&)>& point) {
  std::mt19937 rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd x = point(rng);
    worst = std::max(worst, numopt::jacobian_relative_error(p.jacobian(x), numopt::finite_diff_jacobian(p.residual, x)));
  }
  return worst;
}

Outcome conservation(const testing::Scenario& s) {
  const auto t0 = Clock::now();
  std::mt19937 rng(77);
  double force_err = 0.0, moment_err = 0.0, min_force = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t d = rng() % s.plans.size();
    const auto& states = s.plans[d].trajectory.q;
    const JointVector& q = states[rng() % states.size()];
    const SimulatedFrame f = simulate_frame(s.model, q, s.stances[d], s.truth, NoiseModel::noiseless(), k);
    force_err = std::max(force_err, std::abs(f.forces.sum() - s.model.weight()));
    Vec2 moment = Vec2::Zero();
    for (int i = 0; i < kCellCount; ++i) moment += f.forces[i] * (s.stances[d].sensors_world[i] - f.true_cop);
    moment_err = std::max(moment_err, moment.norm());
    min_force = std::min(min_force, f.forces.minCoeff());
  }
  const double t = seconds_since(t0);
  return {force_err <= 1e-9 && moment_err <= 1e-9 && min_force >= 0.0 && t < 10.0,
          fmt::format("force err {:.2e} N, moment err {:.2e} N*m, min force {:.3g} N, {:.2f} s", force_err,
                      moment_err, min_force, t)};
}

Outcome closure(const testing::Scenario& s, const std::vector<CalibrationDataset>& all) {
  SelfCalResult truth;
  truth.params = s.truth;
  bool pass = all.size() == 5;
  std::string detail;
  for (const auto& d : all) {
    const MaePair m = evaluate_variant(s.model, {d}, truth, Variant::kSelfCal);
    pass = pass && m.grf.mean >= 0.1 && m.grf.mean <= 0.6 && m.cop.mean <= 3.5;
    detail += fmt::format("{}ds{}: GRF {:.3f} N, CoP {:.2f} mm", detail.empty() ? "" : "; ", d.id, m.grf.mean,
                          m.cop.mean);
  }
  return {pass, detail};
}

Outcome manual(const testing::Scenario& s) {
  const auto t0 = Clock::now();
  ManualBias bias = s.cfg.manual;
  bias.seed = s.cfg.manual_seed();
  NoiseModel noise = s.cfg.noise;
  noise.seed = s.cfg.manual_seed();
  const ManualCalibration cal = run_manual_calibration(s.model, s.truth, bias, noise, s.cfg.identify);
  const double t = seconds_since(t0);
  bool pass = t < 30.0;
  std::string detail;
  for (int f = 0; f < 2; ++f) {
    const auto& shoe = cal.shoes[f];
    pass = pass && shoe.cop_measured.mean >= 3.0 * shoe.cop_corrected.mean && shoe.cop_corrected.mean <= 2.0 &&
           shoe.grf.mean <= 0.1;
    detail += fmt::format("{}: CoP {:.2f} -> {:.2f} mm ({:.1f}x), GRF {:.3f} N; ", f == 0 ? "left" : "right",
                          shoe.cop_measured.mean, shoe.cop_corrected.mean,
                          shoe.cop_measured.mean / shoe.cop_corrected.mean, shoe.grf.mean);
  }
  return {pass, detail + fmt::format("{:.2f} s", t)};
}

// Constraint checks written against the model API, independent of the planner.
Outcome certification(const testing::Scenario& s, double plan_seconds) {
  const PlannerConfig& cfg = s.cfg.planner;
  const double tol = cfg.feasibility_tolerance;
  int states = 0, bad_states = 0, visits = 0, bad_visits = 0, incomplete = 0;
  for (std::size_t d = 0; d < s.plans.size(); ++d) {
    const PlanResult& plan = s.plans[d];
    const DoubleSupportConfig& ds = s.stances[d];
    const Polygon hull = sensing_polygon(s.model, ds);
    for (const JointVector& q : plan.trajectory.q) {
      ++states;
      const auto poses = forward_kinematics(s.model, q);
      const Vec2 cop = modeled_com(s.model, poses).head<2>();
      const auto margins = edge_margins(hull, cop);
      bool ok = *std::min_element(margins.begin(), margins.end()) >= cfg.cop_margin - tol;
      ok = ok && within_limits(s.model, q, tol);
      for (double dist : collision_distances(s.model, poses)) ok = ok && dist >= cfg.d_min - tol;
      ok = ok && pose_error(foot_transform(s.model, poses), ds.right_sole).cwiseAbs().maxCoeff() < 1e-6;
      if (!ok) ++bad_states;
    }
    for (std::size_t i = 0; i + 1 < plan.trajectory.q.size(); ++i)
      if (plan.trajectory.q[i + 1] != JointVector(plan.trajectory.q[i] + plan.trajectory.u[i]) ||
          plan.trajectory.u[i].cwiseAbs().maxCoeff() > cfg.max_transition)
        ++bad_states;
    for (const LandmarkVisit& v : plan.log) {
      if (!v.switched) continue;
      ++visits;
      if (!(v.d < cfg.arrival_radius || v.d_prev - v.d < 0.0)) ++bad_visits;
    }
    if (!plan.complete) ++incomplete;
    if (!certify_plan(s.model, ds, plan, cfg).ok()) ++bad_states;
  }
  return {s.plans.size() == 5 && bad_states == 0 && bad_visits == 0 && incomplete == 0 && plan_seconds < 300.0,
          fmt::format("{} plans, {} states ({} failing), {} landmark switches ({} violating), {} incomplete, {:.1f} s",
                      s.plans.size(), states, bad_states, visits, bad_visits, incomplete, plan_seconds)};
}

Outcome recovery(const testing::Scenario& s, const std::vector<CalibrationDataset>& all, double plan_seconds) {
  const auto t0 = Clock::now();
  std::vector<CalibrationDataset> train, test;
  testing::split(all, train, test);
  SelfCalResult r = run_selfcal(s.model, train, s.cfg.weights, s.cfg.identify, s.cfg.init_grf_row);
  evaluate(s.model, r, train, test);
  const double t = plan_seconds + seconds_since(t0);
  const MaePair& init = *r.mae[0][1];
  const MaePair& test_fit = *r.mae[1][1];
  const MaePair& train_fit = *r.mae[1][0];
  const double grf_ratio = init.grf.mean / test_fit.grf.mean;
  const double cop_ratio = init.cop.mean / test_fit.cop.mean;
  const auto within = [](double a, double b) { return std::max(a, b) <= 1.5 * std::min(a, b); };
  const bool pass = train.size() == 3 && test.size() == 2 && test_fit.grf.mean <= 0.5 && test_fit.cop.mean <= 3.5 &&
                    grf_ratio >= 10.0 && cop_ratio >= 5.0 && within(train_fit.grf.mean, test_fit.grf.mean) &&
                    within(train_fit.cop.mean, test_fit.cop.mean) && t < 600.0;
  return {pass, fmt::format("test GRF {:.3f} N ({:.1f}x), test CoP {:.2f} mm ({:.1f}x), train GRF {:.3f} N, train CoP "
                            "{:.2f} mm, corrected test CoP {:.2f} mm, {:.1f} s",
                            test_fit.grf.mean, grf_ratio, test_fit.cop.mean, cop_ratio, train_fit.grf.mean,
                            train_fit.cop.mean, r.mae[2][1]->cop.mean, t)};
}

Outcome exactness(const testing::Scenario& s) {
  NoiseModel none = NoiseModel::noiseless();
  std::vector<CalibrationDataset> train, test;
  testing::split(testing::simulate_all(s, s.truth, none, nullptr), train, test);
  SelfCalResult r = run_selfcal(s.model, train, s.cfg.weights, s.cfg.identify, s.cfg.init_grf_row);
  evaluate(s.model, r, train, test);
  const MaePair& held_out = *r.mae[1][1];

  const LoadCellParams nominal = s.cfg.truth.nominal;
  const SharedGuess g = initial_guess(testing::simulate_all(s, homogeneous_truth(nominal), none, nullptr));
  const double rel = std::max(std::abs(g.c0 / nominal.a - 1.0), std::abs(g.d0 / nominal.b - 1.0));
  return {held_out.grf.mean < 0.05 && held_out.cop.mean < 1.0 && rel <= 1e-6,
          fmt::format("held-out GRF {:.2e} N, CoP {:.2e} mm, initial guess rel err {:.2e}", held_out.grf.mean,
                      held_out.cop.mean, rel)};
}

std::string snapshot(const fs::path& dir) {
  std::string out;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out += fs::relative(f, dir).string() + " " + sha256_hex(read_text(f)) + "\n";
  return out;
}

Outcome solver_properties(const testing::Scenario& s, const std::vector<CalibrationDataset>& all,
                          const fs::path& workdir) {
  std::vector<CalibrationDataset> train, test;
  testing::split(all, train, test);

  // Manual-calibration correction fit on a grid run.
  ManualBias bias = s.cfg.manual;
  bias.seed = s.cfg.manual_seed();
  const ManualCalibration cal = run_manual_calibration(s.model, s.truth, bias, NoiseModel::standard(3));
  const GridRun& grid = cal.shoes[0].grid;
  const numopt::NlsProblem pm = correction_problem(grid.samples, grid.truths);
  const double jm = worst_jacobian_error(pm, [](std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    Eigen::VectorXd x(CorrectionParams::kSize);
    for (int i = 0; i < x.size(); ++i) x[i] = u(rng);
    return x;
  });
  const CorrectionFit mfit = fit_correction(grid.samples, grid.truths);

  const SharedGuess g = initial_guess(train);
  const numopt::NlsProblem pi = identification_problem(train, g, s.cfg.weights, s.cfg.identify);
  const double ji = worst_jacobian_error(pi, [&](std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    Eigen::VectorXd x = pi.initial;
    for (int i = 0; i < x.size(); ++i) x[i] *= 1.0 + u(rng);
    return x;
  });
  const IdentifyResult id = identify_params(train, g, s.cfg.weights, s.cfg.identify);

  const numopt::NlsProblem pc = double_correction_problem(s.model, train, id.params);
  const double jc = worst_jacobian_error(pc, [](std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    Eigen::VectorXd x(2 * CorrectionParams::kSize);
    for (int i = 0; i < x.size(); ++i) x[i] = u(rng);
    return x;
  });
  const DoubleCorrection dc = fit_double_correction(s.model, train, id.params);
  const bool mono = monotone(mfit.report.cost_history) && monotone(id.report.cost_history) &&
                    monotone(dc.report.cost_history);

  PipelineConfig cfg = s.cfg;
  std::ostringstream sink;
  std::array<std::string, 2> snaps;
  std::array<int, 2> codes{};
  for (int k = 0; k < 2; ++k) {
    cfg.output_dir = workdir / fmt::format("determinism_{}", k);
    fs::remove_all(cfg.output_dir);
    codes[k] = run_stage(cfg, Stage::kAll, sink);
    snaps[k] = snapshot(cfg.output_dir);
  }
  const bool same = codes[0] == kExitOk && codes[1] == kExitOk && snaps[0] == snaps[1] && !snaps[0].empty();
  const double worst = std::max({jm, ji, jc});
  return {worst < 1e-4 && mono && same,
          fmt::format("jacobian rel err manual {:.1e}, identify {:.1e}, correction {:.1e}; cost monotone {}; two full "
                      "runs {}",
                      jm, ji, jc, mono ? "yes" : "no", same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"footcal acceptance suite"};
  std::string workdir = "acceptance_runs";
  app.add_option("--workdir", workdir, "Scratch directory for pipeline runs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  std::vector<Outcome> results(7);
  try {
    PipelineConfig cfg;
    cfg.output_dir = workdir;
    const auto t0 = Clock::now();
    const testing::Scenario s = testing::plan_scenario(cfg);
    const double plan_seconds = seconds_since(t0);
    const auto all = testing::default_datasets(s);

    const std::array<std::function<Outcome()>, 7> criteria{
        [&] { return conservation(s); },
        [&] { return closure(s, all); },
        [&] { return manual(s); },
        [&] { return certification(s, plan_seconds); },
        [&] { return recovery(s, all, plan_seconds); },
        [&] { return exactness(s); },
        [&] { return solver_properties(s, all, workdir); },
    };
    for (std::size_t k = 0; k < criteria.size(); ++k) {
      try {
        results[k] = criteria[k]();
      } catch (const std::exception& e) {
        results[k] = {false, fmt::format("threw: {}", e.what())};
      }
    }
  } catch (const std::exception& e) {
    for (auto& r : results) r = {false, fmt::format("scenario setup threw: {}", e.what())};
  }

  static const char* kNames[7] = {"simulator conservation", "quasi-static closure",   "manual calibration",
                                  "planner certification",  "self-calibration",       "noiseless exactness",
                                  "solver properties"};
  bool all_pass = true;
  for (std::size_t k = 0; k < results.size(); ++k) {
    fmt::print("[{}] criterion {} {}: {}\n", results[k].pass ? "PASS" : "FAIL", k + 1, kNames[k], results[k].detail);
    all_pass = all_pass && results[k].pass;
  }
  return all_pass ? 0 : 1;
}
