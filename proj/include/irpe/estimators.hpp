#pragma once

#include "irpe/gradients.hpp"
#include "irpe/kalman.hpp"
#include "irpe/statespace.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace irpe {

/// Diminishing step sizes alpha_k = mu / (k + k0), so k * alpha_k -> mu.
struct StepSchedule {
    double mu = 1.0;
    double k0 = 0.0;
};

/// alpha_k for cycle index k >= 1.  Throws if k + k0 <= 0.
double step_size(const StepSchedule& sched, long k);

/// Euclidean projection onto the feasible box (componentwise clamp).
Eigen::VectorXd project(const Eigen::VectorXd& x, const Box& box);

/// One incremental pass over a list of component-gradient callables:
///     z <- project(z - alpha * grad_i(z)),  i = 1..m in order.
Eigen::VectorXd incremental_gradient_step(
    const Eigen::VectorXd& x,
    const std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>& grads,
    double alpha, const Box& box);

/// Everything the estimator needs about one sensor's predictor at a fixed
/// parameter point: closed-loop matrices and their parameter derivatives.
struct PredictorBundle {
    Eigen::MatrixXd F;
    Eigen::MatrixXd G;
    Eigen::MatrixXd H;
    MatrixDerivatives derivs;
};

/// Evaluates the bundle at an arbitrary feasible x.  The estimator calls it
/// once per sub-update, at the freshly projected iterate.
using BundleFactory = std::function<PredictorBundle(const Eigen::VectorXd&)>;

struct BundleFactoryOptions {
    FdOptions fd;
    /// Re-solve the Riccati equation starting from the previous solution
    /// instead of from Q.  Same fixed point within tolerance, far cheaper
    /// along an estimator path; leave off where bit-reproducible bundle
    /// values matter (equivalence checks).
    bool warm_start = false;
};

/// Canonical factory for one sensor of a model family: DARE + gain +
/// matrix_derivatives at each requested x.  Results are memoized per exact
/// x, so repeated evaluation at an unchanged iterate is free.
BundleFactory make_bundle_factory(const ModelFamily& model, int sensor,
                                  const BundleFactoryOptions& opts = {});

/// Centralized recursive prediction error estimator state.
struct RpeState {
    Eigen::VectorXd x;          ///< current parameter iterate
    PredictorGradientState pg;  ///< psi/chi with outputs h/xi
    long step = 0;              ///< completed measurement updates
};

/// Per-sub-update trace record (one measurement consumed).
struct SubstepRecord {
    long cycle = 0;     ///< 1-based cycle index
    int substep = 0;    ///< 1-based position within the cycle
    int sensor = 0;     ///< sensor (or cluster) id that produced the update
    Eigen::VectorXd z;  ///< iterate after the update
    double innovation_sq = 0.0;  ///< |eps|^2 of this sub-update
    double alpha = 0.0;
};

/// One RPE update consuming measurement r:
///   1. read the stored prediction h and gradient xi (formed by the previous
///      state recursion, i.e. with matrices at the previous iterate),
///   2. eps = r - h,
///   3. x <- project(x + alpha * xi^T eps)  (per-coordinate xi[l]^T eps),
///   4. rebuild the bundle at the new x and advance (psi, chi) driven by r.
/// The update direction is the descent direction of |eps|^2 with the
/// constant 2 absorbed into the step-size constant mu.
RpeState rpe_step(const RpeState& s, const BundleFactory& bundle, const Eigen::VectorXd& r,
                  double alpha, const Box& box);

/// Incremental estimator state: the iterate as held by the end of the last
/// cycle plus one predictor/sensitivity recursion per sensor.
struct IrpeState {
    Eigen::VectorXd x;  ///< z_{m,k}: iterate after the last sub-update
    std::vector<PredictorGradientState> sensors;
    long cycle = 0;          ///< completed cycles
    std::vector<int> ring;   ///< sub-update order (sensor indices)
};

/// Fresh estimator state at iterate x0 with zero-initialized recursions.
IrpeState make_irpe_state(const ModelFamily& model, const Eigen::VectorXd& x0,
                          const std::vector<int>& ring = {});

/// One full cycle: each sensor in ring order applies its sub-update to the
/// iterate it receives (same sequencing as rpe_step, with alpha held fixed
/// across the cycle) and advances its own recursion at its updated iterate.
/// r[i] is sensor i's measurement for this cycle.  Appends one record per
/// sub-update to trace when given.
IrpeState irpe_cycle(const IrpeState& s, const std::vector<BundleFactory>& factories,
                     const std::vector<Eigen::VectorXd>& r, double alpha, const Box& box,
                     std::vector<SubstepRecord>* trace = nullptr);

/// Mean squared one-step prediction error of the model's predictor at fixed
/// x over the first N steps of a recorded trajectory:
///     (1/N) sum_k sum_i |r_i(k) - g_{i,k}|^2,
/// with each sensor's predictor re-run from scratch (phi_1 = initial_phi[i],
/// zero by default).
double empirical_cost(const ModelFamily& model, const Eigen::VectorXd& x,
                      const Trajectory& traj, int steps, const DareOptions& dare = {},
                      const std::vector<Eigen::VectorXd>& initial_phi = {});

}  // namespace irpe
