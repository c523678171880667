#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace irpe {

/// Axis-aligned feasible box for the parameter vector.  Entries of lo/hi may
/// be -inf/+inf for unconstrained coordinates.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Eigen::VectorXd& x) const;
    /// Componentwise clamp onto [lo, hi].
    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
};

/// Parametrized linear state-space family shared by a network of m sensors.
///
/// Sensor i observes its state process through
///     theta_i(k+1) = D(i, x) theta_i(k) + w_i(k),      w_i ~ N(0, Q(i, x))
///     r_i(k)       = H[i] theta_i(k)    + v_i(k),      v_i ~ N(0, R[i])
/// where x is the unknown parameter, constrained to feasible_box.
///
/// D and Q are callbacks so the same type covers families whose transition
/// and noise structure depend on x (the estimation target) as well as
/// constant plants.  H and R do not depend on x.
struct ModelFamily {
    int sensor_count = 0;  ///< m
    int state_dim = 0;     ///< q
    int obs_dim = 0;       ///< p (same for every sensor)
    int param_dim = 0;     ///< d

    std::function<Eigen::MatrixXd(int sensor, const Eigen::VectorXd& x)> D;
    std::vector<Eigen::MatrixXd> H;  ///< p x q, one per sensor
    std::function<Eigen::MatrixXd(int sensor, const Eigen::VectorXd& x)> Q;
    std::vector<Eigen::MatrixXd> R;  ///< p x p, one per sensor

    Box feasible_box;

    /// Optional analytic derivatives of the closed-loop predictor matrices
    /// (F, G) with respect to each parameter coordinate.  When set, gradient
    /// code uses it instead of finite differences through the Riccati solve.
    std::function<void(int sensor, const Eigen::VectorXd& x,
                       std::vector<Eigen::MatrixXd>& dF,
                       std::vector<Eigen::MatrixXd>& dG)>
        analytic_gain_derivs;

    /// Throws std::invalid_argument if any dimension is inconsistent when
    /// the callbacks are evaluated at x.
    void validate(const Eigen::VectorXd& x) const;
};

/// Simulated sensor data for k = 1..N (plus the state path if kept).
struct Trajectory {
    /// measurements[i].col(k-1) = r_i(k), k = 1..N.
    std::vector<Eigen::MatrixXd> measurements;
    /// states[i].col(k) = theta_i(k), k = 0..N.  Empty if not stored.
    std::vector<Eigen::MatrixXd> states;
    std::uint64_t rng_seed = 0;

    int steps() const {
        return measurements.empty() ? 0 : static_cast<int>(measurements[0].cols());
    }
};

/// Deterministic Gaussian stream: mt19937_64 + Box-Muller, so a seed yields
/// the same draws on every standard library.
class GaussianSampler {
  public:
    explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

    double standard_normal();
    /// Vector draw z ~ N(0, I_n).
    Eigen::VectorXd standard_normal(int n);

  private:
    std::mt19937_64 engine_;
};

/// Square root factor L with L L^T = cov, for sampling N(0, cov).
/// Uses Cholesky when cov is positive definite and falls back to an
/// eigendecomposition with negative eigenvalues clipped to zero when it is
/// merely semidefinite.  Throws std::invalid_argument if cov is asymmetric
/// or indefinite beyond tolerance (min eigenvalue < -1e-10 * scale).
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov);

struct SimulateOptions {
    bool store_states = true;
    /// theta_i(0) for each sensor; empty means zero initial states.
    std::vector<Eigen::VectorXd> initial_states;
};

/// Draw a joint trajectory of all m sensor processes at parameter x_true.
/// Per step the noise stream is consumed sensor by sensor (w_i then v_i), so
/// the result is reproducible bit for bit from (model, x_true, seed).
Trajectory simulate_trajectory(const ModelFamily& model, const Eigen::VectorXd& x_true,
                               int steps, std::uint64_t seed,
                               const SimulateOptions& opts = {});

/// Largest absolute eigenvalue of a square matrix.
double spectral_radius(const Eigen::MatrixXd& A);

/// Per-sensor admissibility flags at a given parameter point.
struct AdmissibilityReport {
    std::vector<bool> stable;        ///< spectral_radius(D_i(x)) < 1 - 1e-9
    std::vector<bool> observable;    ///< rank [H; HD; ...; HD^{q-1}] == q
    std::vector<bool> controllable;  ///< rank [B, DB, ..., D^{q-1}B] == q, B = Q^{1/2}

    bool all_ok() const;
};

/// Reports stability/observability/controllability per sensor.  This is a
/// diagnostic: callers decide whether to proceed (the gas-leak plant is
/// deliberately marginally stable and still runs).
AdmissibilityReport check_model_admissible(const ModelFamily& model,
                                           const Eigen::VectorXd& x);

}  // namespace irpe
