#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace irpe {

/// Riccati fixed-point iteration failed to settle within the iteration cap.
struct NoConvergence : std::runtime_error {
    NoConvergence(const std::string& what, long iterations_, double residual_)
        : std::runtime_error(what), iterations(iterations_), residual(residual_) {}
    long iterations;
    double residual;
};

/// H P H^T + R is numerically singular, so no predictor gain exists.
struct SingularInnovation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DareOptions {
    double tol = 1e-12;      ///< max-abs difference between successive iterates
    long max_iterations = 100000;
    /// Optional warm start for the iteration.  Empty means P0 = Q, the
    /// reference initialization; a warm start reaches the same fixed point
    /// (within tol) in far fewer sweeps when solving at a nearby parameter.
    Eigen::MatrixXd initial_P;
};

struct DareSolution {
    Eigen::MatrixXd P;    ///< steady-state one-step prediction error covariance
    double residual = 0.0;  ///< max-abs defect of the final fixed-point sweep
    long iterations = 0;
};

/// Solves P = D P D^T - D P H^T (H P H^T + R)^-1 H P D^T + Q by fixed-point
/// iteration from P0 = Q (or opts.initial_P).  Throws NoConvergence or
/// SingularInnovation.  Marginally stable D is allowed; convergence then
/// relies on detectability of (D, H).
DareSolution solve_dare(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                        const DareOptions& opts = {});

/// Steady-state one-step output predictor r_hat(k+1) = H phi(k+1),
/// phi(k+1) = F phi(k) + G r(k), with F = D - G H.
struct SteadyStatePredictor {
    Eigen::MatrixXd F;
    Eigen::MatrixXd G;
    Eigen::MatrixXd H;
    Eigen::MatrixXd P;
    double dare_residual = 0.0;
};

/// Gain G = D P H^T (H P H^T + R)^-1 and closed-loop F = D - G H.
SteadyStatePredictor steady_state_gain(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H,
                                       const Eigen::MatrixXd& P, const Eigen::MatrixXd& R);

/// Convenience: DARE + gain in one call.
SteadyStatePredictor build_predictor(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H,
                                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                     const DareOptions& opts = {});

struct PredictorState {
    Eigen::VectorXd phi;    ///< predictor state phi(k+1)
    Eigen::VectorXd g;      ///< predicted output H phi(k+1)
};

/// One predictor recursion step driven by the measurement r(k).
PredictorState predictor_step(const SteadyStatePredictor& pred, const Eigen::VectorXd& phi,
                              const Eigen::VectorXd& r);

}  // namespace irpe
