/// Acceptance suite: one self-contained check per shipped guarantee, each
/// printing a single [PASS]/[FAIL] line with its measured margin.  All
/// tolerances and tuning constants are pinned here, not configurable.
/// Exit status is the number of failed checks.

#include "irpe/estimators.hpp"
#include "irpe/gasleak.hpp"
#include "irpe/gradients.hpp"
#include "irpe/harness.hpp"
#include "irpe/kalman.hpp"
#include "irpe/lifted.hpp"
#include "irpe/statespace.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace irpe;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s -- %s\n", pass ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

Eigen::VectorXd box_center(const Box& box) { return 0.5 * (box.lo + box.hi); }

/// Scalar family D(x) = x with H = 1; the workhorse for the scalar checks.
ModelFamily scalar_family(double Q, double R, double lo, double hi) {
    ModelFamily f;
    f.sensor_count = 1;
    f.state_dim = 1;
    f.obs_dim = 1;
    f.param_dim = 1;
    f.D = [](int, const Eigen::VectorXd& x) { return Eigen::MatrixXd::Constant(1, 1, x(0)); };
    f.Q = [Q](int, const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, Q); };
    f.H = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
    f.R = {Eigen::MatrixXd::Constant(1, 1, R)};
    f.feasible_box.lo = Eigen::VectorXd::Constant(1, lo);
    f.feasible_box.hi = Eigen::VectorXd::Constant(1, hi);
    return f;
}

/// The 27-sensor warehouse setup shared by the localization and generator
/// checks: 5x5 modes (29 combined states), 9 grid heads + 2 jittered extras
/// each.
ExperimentConfig warehouse_config(const std::string& mode) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    cfg.model_type = "gasleak";
    cfg.scenario.n1_modes = 5;
    cfg.scenario.n2_modes = 5;
    cfg.grid_count = 9;
    cfg.extras_per_grid = 2;
    cfg.jitter_radius = 8.0;
    cfg.cycles = 300;
    cfg.seed = 11;
    cfg.schedule = {50.0, 0.0};
    cfg.out_dir = "acceptance_out";
    return cfg;
}

// ---------------------------------------------------------------------------
// 1. Per-slot estimation on the lifted plant reproduces the incremental
//    estimator's sub-iterate sequence on randomized instances.
void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr double kTol = 1e-9;  // relative, |a-b| / max(|a|,|b|)
    constexpr double kBudgetSeconds = 60.0;

    double worst = 0.0;
    int instances = 0;
    std::uint64_t seed = 500;
    for (int rep = 0; rep < 2 && instances < 20; ++rep) {
        for (int m : {2, 3, 4}) {
            for (int q : {1, 2}) {
                for (int d : {1, 2}) {
                    if (instances >= 20) break;
                    ++seed;
                    RandomModelSpec spec;
                    spec.m = m;
                    spec.q = q;
                    spec.p = 1;
                    spec.d = d;
                    spec.seed = seed;
                    const RandomModel rm = make_random_model(spec);
                    const int cycles = 50;
                    const Trajectory traj =
                        simulate_trajectory(rm.family, rm.x_true, cycles, seed + 1000);

                    std::vector<int> ring(m);
                    for (int i = 0; i < m; ++i) ring[i] = i;
                    std::mt19937_64 eng(seed);
                    std::shuffle(ring.begin(), ring.end(), eng);

                    std::vector<BundleFactory> factories;
                    for (int i = 0; i < m; ++i)
                        factories.push_back(make_bundle_factory(rm.family, i));
                    const Eigen::VectorXd x0 = box_center(rm.family.feasible_box);
                    IrpeState state = make_irpe_state(rm.family, x0, ring);
                    const StepSchedule sched{0.3, 0.0};
                    std::vector<SubstepRecord> trace;
                    for (int k = 1; k <= cycles; ++k) {
                        std::vector<Eigen::VectorXd> r(m);
                        for (int i = 0; i < m; ++i) r[i] = traj.measurements[i].col(k - 1);
                        state = irpe_cycle(state, factories, r, step_size(sched, k),
                                           rm.family.feasible_box, &trace);
                    }
                    std::vector<Eigen::VectorXd> subs;
                    for (const auto& rec : trace) subs.push_back(rec.z);

                    const LiftedRunResult lifted =
                        lifted_rpe_run(rm.family, traj, sched, x0, cycles, ring);
                    worst = std::max(worst,
                                     equivalence_report(subs, lifted.x_trace).max_rel_dev);
                    ++instances;
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    report(1, "lifted run matches incremental sub-iterates",
           worst <= kTol && instances == 20 && elapsed <= kBudgetSeconds,
           "20 instances, max rel dev " + fmt(worst) + " (tol " + fmt(kTol) + "), " +
               fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// 2. The Riccati solver lands on the fixed point: independently recomputed
//    defect below 1e-10 on 100 random instances, and the scalar closed form
//    reproduced to 1e-12.
void criterion2() {
    constexpr double kDefectTol = 1e-10;
    constexpr double kScalarTol = 1e-12;

    double worst_defect = 0.0;
    int instances = 0;
    std::uint64_t seed = 900;
    while (instances < 100) {
        ++seed;
        RandomModelSpec spec;
        spec.m = 1;
        spec.q = 1 + static_cast<int>(seed % 6);  // 1..6
        spec.p = 1 + static_cast<int>(seed % 2);
        spec.d = 1;
        spec.seed = seed;
        const RandomModel rm = make_random_model(spec);
        const Eigen::MatrixXd D = rm.family.D(0, rm.x_true);
        const Eigen::MatrixXd Q = rm.family.Q(0, rm.x_true);
        const Eigen::MatrixXd& H = rm.family.H[0];
        const Eigen::MatrixXd& R = rm.family.R[0];
        const DareSolution sol = solve_dare(D, H, Q, R);
        const Eigen::MatrixXd S = H * sol.P * H.transpose() + R;
        const Eigen::MatrixXd rhs =
            D * sol.P * D.transpose() -
            D * sol.P * H.transpose() * S.inverse() * H * sol.P * D.transpose() + Q;
        worst_defect = std::max(worst_defect, (sol.P - rhs).cwiseAbs().maxCoeff());
        ++instances;
    }

    // Scalar cases against P^2 + (R - d^2 R - Q) P - Q R = 0.
    double worst_scalar = 0.0;
    const double cases[3][3] = {{0.9, 1.0, 1.0}, {0.5, 2.0, 0.3}, {0.99, 0.01, 0.01}};
    for (const auto& c : cases) {
        const double d = c[0], Q = c[1], R = c[2];
        const double b = R - d * d * R - Q;
        const double root = (-b + std::sqrt(b * b + 4.0 * Q * R)) / 2.0;
        const DareSolution sol =
            solve_dare(Eigen::MatrixXd::Constant(1, 1, d), Eigen::MatrixXd::Constant(1, 1, 1.0),
                       Eigen::MatrixXd::Constant(1, 1, Q), Eigen::MatrixXd::Constant(1, 1, R));
        worst_scalar =
            std::max(worst_scalar, std::abs(sol.P(0, 0) - root) / std::max(1.0, root));
    }

    report(2, "steady-state covariance solves its fixed-point equation",
           worst_defect < kDefectTol && worst_scalar < kScalarTol,
           "100 instances, max defect " + fmt(worst_defect) + " (tol " + fmt(kDefectTol) +
               "); scalar closed form dev " + fmt(worst_scalar) + " (tol " + fmt(kScalarTol) +
               ")");
}

// ---------------------------------------------------------------------------
// 3. At a frozen parameter the sensitivity recursion accumulates the exact
//    gradient of the mean squared prediction error: its average matches a
//    central finite difference of the re-run predictor cost.
void criterion3() {
    constexpr int kSteps = 200;
    constexpr double kAbsTol = 1e-4;
    constexpr double kRelTol = 1e-3;

    double worst_margin = -1e300;  // max over instances of (dev - allowed)
    double worst_dev = 0.0;
    std::uint64_t seed = 300;
    for (int inst = 0; inst < 20; ++inst) {
        ++seed;
        RandomModelSpec spec;
        spec.m = 1;
        spec.q = 1 + static_cast<int>(seed % 3);
        spec.p = 1;
        spec.d = 1 + static_cast<int>(seed % 2);
        spec.seed = seed;
        const RandomModel rm = make_random_model(spec);
        const Trajectory traj = simulate_trajectory(rm.family, rm.x_true, kSteps, seed + 50);

        // Evaluation point away from the optimum so the gradient is nonzero.
        Eigen::VectorXd x = rm.x_true;
        for (int l = 0; l < x.size(); ++l) x(l) = std::clamp(x(l) + 0.2, -1.0, 1.0);

        // Recursion-accumulated gradient at frozen x.
        const PredictorBundle b = make_bundle_factory(rm.family, 0)(x);
        PredictorGradientState pg = make_gradient_state(b.H, rm.family.param_dim);
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(rm.family.param_dim);
        for (int k = 1; k <= kSteps; ++k) {
            const Eigen::VectorXd r = traj.measurements[0].col(k - 1);
            grad += empirical_gradient(pg.xi, r - pg.h);
            pg = extended_step(pg, b.F, b.G, b.H, b.derivs, r);
        }
        grad /= kSteps;

        // Central finite difference of the full re-run cost.
        Eigen::VectorXd fd(rm.family.param_dim);
        for (int l = 0; l < rm.family.param_dim; ++l) {
            const double h = 1e-5 * std::max(1.0, std::abs(x(l)));
            Eigen::VectorXd xp = x, xm = x;
            xp(l) += h;
            xm(l) -= h;
            fd(l) = (empirical_cost(rm.family, xp, traj, kSteps) -
                     empirical_cost(rm.family, xm, traj, kSteps)) /
                    (2.0 * h);
        }

        const double dev = (grad - fd).cwiseAbs().maxCoeff();
        const double allowed = std::max(kAbsTol, kRelTol * fd.cwiseAbs().maxCoeff());
        if (dev - allowed > worst_margin) {
            worst_margin = dev - allowed;
            worst_dev = dev;
        }
    }
    report(3, "sensitivity recursion equals the finite-difference cost gradient",
           worst_margin <= 0.0,
           "20 instances, worst dev " + fmt(worst_dev) + " (dev-allowed " + fmt(worst_margin) +
               ")");
}

// ---------------------------------------------------------------------------
// 4. On the scalar deadbeat family the update IS textbook LMS, step for
//    step, and after 1e4 cycles it sits next to the batch least-squares
//    estimate of the pole.
void criterion4() {
    constexpr int kCycles = 10000;
    constexpr double kStepTol = 1e-12;
    constexpr double kLsTol = 1e-2;
    constexpr double kMu = 150.0;  // ~2 / E[r^2] for q0 = 0.01 at x* = 0.6

    ModelFamily f = scalar_family(0.01, 0.0, 0.0, 0.95);
    f.analytic_gain_derivs = [](int, const Eigen::VectorXd&, std::vector<Eigen::MatrixXd>& dF,
                                std::vector<Eigen::MatrixXd>& dG) {
        dF = {Eigen::MatrixXd::Zero(1, 1)};
        dG = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
    };
    const Trajectory traj = simulate_trajectory(f, Eigen::VectorXd::Constant(1, 0.6), kCycles, 6);
    const Eigen::MatrixXd& r = traj.measurements[0];

    const BundleFactory factory = make_bundle_factory(f, 0);
    RpeState s;
    s.x = Eigen::VectorXd::Constant(1, 0.475);
    s.pg = make_gradient_state(f.H[0], 1);

    double xhat = 0.475, regressor = 0.0, max_step_dev = 0.0;
    double num = 0.0, den = 0.0;  // batch least squares accumulators
    for (int k = 1; k <= kCycles; ++k) {
        const double alpha = kMu / k;
        s = rpe_step(s, factory, r.col(k - 1), alpha, f.feasible_box);
        const double eps = r(0, k - 1) - xhat * regressor;
        xhat = std::clamp(xhat + alpha * (regressor * eps), 0.0, 0.95);
        max_step_dev = std::max(max_step_dev, std::abs(s.x(0) - xhat));
        num += r(0, k - 1) * regressor;
        den += regressor * regressor;
        regressor = r(0, k - 1);
    }
    const double ls = num / den;
    const double ls_dev = std::abs(s.x(0) - ls);
    report(4, "deadbeat family reduces to LMS and tracks batch least squares",
           max_step_dev <= kStepTol && ls_dev <= kLsTol,
           "per-step dev " + fmt(max_step_dev) + " (tol " + fmt(kStepTol) + "); |x - LS| " +
               fmt(ls_dev) + " (tol " + fmt(kLsTol) + ")");
}

// ---------------------------------------------------------------------------
// 5. Full scalar RPE (Riccati + finite differences every step) recovers the
//    pole: median error over 20 seeds under 0.05 after 2e4 cycles.
void criterion5(std::vector<Eigen::VectorXd>* all_iterates) {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int kCycles = 20000;
    constexpr double kMedianTol = 0.05;
    constexpr double kBudgetSeconds = 120.0;
    // mu tuned on seeds 100..109 (disjoint from the 20 evaluation seeds):
    // any value in [10, 200] passes; 50 maximizes the margin.
    constexpr double kMu = 50.0;

    const ModelFamily f = scalar_family(0.01, 0.01, 0.0, 0.95);
    const Eigen::VectorXd x_true = Eigen::VectorXd::Constant(1, 0.6);

    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Trajectory traj = simulate_trajectory(f, x_true, kCycles, seed);
        BundleFactoryOptions opts;
        opts.warm_start = true;
        const BundleFactory factory = make_bundle_factory(f, 0, opts);
        RpeState s;
        s.x = Eigen::VectorXd::Constant(1, 0.475);
        s.pg = make_gradient_state(f.H[0], 1);
        for (int k = 1; k <= kCycles; ++k) {
            s = rpe_step(s, factory, traj.measurements[0].col(k - 1), kMu / k, f.feasible_box);
            if (k % 100 == 0 && all_iterates) all_iterates->push_back(s.x);
        }
        errs.push_back(std::abs(s.x(0) - 0.6));
    }
    std::sort(errs.begin(), errs.end());
    const double median = 0.5 * (errs[9] + errs[10]);
    const double elapsed = seconds_since(t0);
    report(5, "scalar recursive estimator recovers the pole",
           median < kMedianTol && elapsed <= kBudgetSeconds,
           "20 seeds, median |x - 0.6| " + fmt(median) + " (tol " + fmt(kMedianTol) + "), " +
               fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// 6. Warehouse localization at full scale: the centralized estimator lands
//    within 10 m of the leak, the cluster-hybrid run is at least as close
//    as the flat incremental one, and all three fit the time budget.
void criterion6(std::vector<std::string>* trace_paths) {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr double kCentralTol = 10.0;
    constexpr double kBudgetSeconds = 600.0;

    double dist_central = 0.0, dist_hybrid = 0.0, dist_irpe = 0.0;
    for (const std::string mode : {"centralized", "hybrid", "irpe"}) {
        const ExperimentResult res = run_experiment(warehouse_config(mode));
        const double dist = (res.x_final - res.x_true).norm();
        if (mode == "centralized") dist_central = dist;
        if (mode == "hybrid") dist_hybrid = dist;
        if (mode == "irpe") dist_irpe = dist;
        if (trace_paths) trace_paths->push_back(res.trace_path);
    }
    const double elapsed = seconds_since(t0);
    report(6, "warehouse leak localization",
           dist_central < kCentralTol && dist_hybrid <= dist_irpe &&
               elapsed <= kBudgetSeconds,
           "centralized " + fmt(dist_central) + " m (tol " + fmt(kCentralTol) + "), hybrid " +
               fmt(dist_hybrid) + " m <= incremental " + fmt(dist_irpe) + " m, " + fmt(elapsed) +
               " s");
}

// ---------------------------------------------------------------------------
// 7. The state-space measurement generator and the independent series
//    evaluation agree on every noise-free sample.
void criterion7() {
    constexpr int kSlots = 100;
    constexpr double kRelTol = 1e-6;
    constexpr double kFloorFrac = 1e-3;  // guard the ratio near zero readings

    WarehouseScenario sc;
    sc.n1_modes = 5;
    sc.n2_modes = 5;
    sc.sigma_s2 = 0.0;
    sc.sigma_n2 = 0.0;
    const Deployment dep = deploy_grid_jittered(9, 2, 8.0, sc.l1, sc.l2, 12);
    sc.positions = dep.positions;
    const GasLeakModel model = build_gasleak_model(sc);
    const LeakSimulation sim = simulate_leak(model, kSlots, 1);

    double max_val = 0.0;
    for (const auto& mrows : sim.traj.measurements)
        max_val = std::max(max_val, mrows.cwiseAbs().maxCoeff());
    double worst = 0.0;
    for (size_t i = 0; i < dep.positions.size(); ++i) {
        for (int k = 1; k <= kSlots; ++k) {
            const double got = sim.traj.measurements[i](0, k - 1);
            const double want = greens_concentration(dep.positions[i], k * sc.delta, sc.x_true,
                                                     sc, sim.intensity);
            const double denom = std::max(std::abs(want), kFloorFrac * max_val);
            worst = std::max(worst, std::abs(got - want) / denom);
        }
    }
    report(7, "state-space generator matches the series evaluation",
           worst <= kRelTol,
           "27 sensors x 100 slots, max rel dev " + fmt(worst) + " (tol " + fmt(kRelTol) + ")");
}

// ---------------------------------------------------------------------------
// 8. Ring communication gains on the star as the network densifies: the
//    incremental/centralized cost ratio falls strictly from 25 to 100 to
//    400 sensors for every deployment seed.
void criterion8() {
    bool all_decreasing = true;
    double worst_gap = 1e300;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        double prev = 1e300;
        for (int m : {25, 100, 400}) {
            Deployment dep;
            if (m == 25) dep = deploy_grid_jittered(25, 0, 0.0, 100.0, 100.0, seed);
            if (m == 100) dep = deploy_grid_jittered(25, 3, 100.0 / 15.0, 100.0, 100.0, seed);
            if (m == 400) dep = deploy_grid_jittered(100, 3, 100.0 / 30.0, 100.0, 100.0, seed);
            const double ratio = comm_cost(dep, CommMode::incremental, 1) /
                                 comm_cost(dep, CommMode::centralized, 1);
            if (ratio >= prev) all_decreasing = false;
            if (prev < 1e299) worst_gap = std::min(worst_gap, prev - ratio);
            prev = ratio;
        }
    }
    report(8, "relative ring cost falls as the network densifies", all_decreasing,
           "20 seeds, m = 25/100/400, smallest drop " + fmt(worst_gap));
}

// ---------------------------------------------------------------------------
// 9. Every iterate any estimator ever records is feasible: the scalar runs'
//    in-memory iterates and every row of the warehouse traces sit inside
//    their boxes exactly.
void criterion9(const std::vector<Eigen::VectorXd>& scalar_iterates,
                const std::vector<std::string>& trace_paths) {
    long checked = 0;
    bool ok = true;

    for (const auto& z : scalar_iterates) {
        ok = ok && z(0) >= 0.0 && z(0) <= 0.95;
        ++checked;
    }

    for (const auto& path : trace_paths) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream cells(line);
            std::string cell;
            for (int c = 0; c < 3; ++c) std::getline(cells, cell, ',');  // ids
            for (int c = 0; c < 2; ++c) {
                std::getline(cells, cell, ',');
                const double v = std::stod(cell);
                ok = ok && v >= 0.0 && v <= 100.0;
            }
            ++checked;
        }
    }
    report(9, "all recorded iterates stay inside the feasible set", ok && checked > 0,
           fmt(static_cast<double>(checked)) + " iterates checked");
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Eigen::VectorXd> scalar_iterates;
    std::vector<std::string> trace_paths;

    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5(&scalar_iterates);
    criterion7();
    criterion8();
    criterion6(&trace_paths);
    criterion9(scalar_iterates, trace_paths);

    std::printf("%d/9 criteria passed in %.1f s\n", 9 - g_failures, seconds_since(t0));
    return g_failures;
}
