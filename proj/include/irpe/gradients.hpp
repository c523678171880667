#pragma once

#include "irpe/kalman.hpp"
#include "irpe/statespace.hpp"

#include <Eigen/Dense>

#include <vector>

namespace irpe {

/// Derivatives of the closed-loop predictor matrices with respect to each
/// parameter coordinate: dF[l] = dF/dx_l (q x q), dG[l] = dG/dx_l (q x p).
struct MatrixDerivatives {
    std::vector<Eigen::MatrixXd> dF;
    std::vector<Eigen::MatrixXd> dG;
};

/// Predictor state plus its parameter sensitivities.
///
/// psi approximates the predictor state phi(k+1) and chi[l] its derivative
/// with respect to x_l along the estimator path.  h = H psi and xi[l] =
/// H chi[l] are refreshed by every output step so consumers can read the
/// predicted output and its gradient directly.
struct PredictorGradientState {
    Eigen::VectorXd psi;                ///< q
    std::vector<Eigen::VectorXd> chi;   ///< d entries, each q
    Eigen::VectorXd h;                  ///< p, equals H psi
    std::vector<Eigen::VectorXd> xi;    ///< d entries, each p, equals H chi[l]
};

/// Initial state (psi1, chi1) with outputs already formed against H.
/// Empty psi1/chi1 mean zeros.
PredictorGradientState make_gradient_state(const Eigen::MatrixXd& H, int param_dim,
                                           const Eigen::VectorXd& psi1 = {},
                                           const std::vector<Eigen::VectorXd>& chi1 = {});

struct FdOptions {
    /// Step h_l = h_scale * max(1, |x_l|) per coordinate; a nonpositive
    /// explicit_step keeps this rule, a positive one overrides it.
    double h_scale = 1e-6;
    double explicit_step = 0.0;
    DareOptions dare;
};

/// dF/dx and dG/dx at x for sensor i, by central finite differences of the
/// full pipeline x -> DARE -> gain (one-sided at feasible-box boundaries).
/// If the model declares analytic_gain_derivs, those are used instead.
/// A Riccati failure at a perturbed point propagates NoConvergence with the
/// offending parameter vector in the message.
MatrixDerivatives matrix_derivatives(const ModelFamily& model, int sensor,
                                     const Eigen::VectorXd& x, const FdOptions& opts = {});

/// One step of the coupled state/sensitivity recursion driven by r:
///     psi'    = F psi + G r
///     chi'[l] = dF[l] psi + F chi[l] + dG[l] r
/// followed by the output refresh h' = H psi', xi'[l] = H chi'[l].
PredictorGradientState extended_step(const PredictorGradientState& s, const Eigen::MatrixXd& F,
                                     const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                                     const MatrixDerivatives& derivs, const Eigen::VectorXd& r);

/// Single-sample cost gradient estimate grad_l = -2 xi[l]^T eps, the
/// derivative of |eps|^2 = |r - h|^2 with respect to x_l.
Eigen::VectorXd empirical_gradient(const std::vector<Eigen::VectorXd>& xi,
                                   const Eigen::VectorXd& eps);

}  // namespace irpe
