#include "irpe/kalman.hpp"

#include <string>

namespace irpe {

namespace {

void check_shapes(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H, const Eigen::MatrixXd& Q,
                  const Eigen::MatrixXd& R) {
    const auto q = D.rows();
    const auto p = H.rows();
    if (D.cols() != q) throw std::invalid_argument("dare: D must be square");
    if (H.cols() != q) throw std::invalid_argument("dare: H must be p x q");
    if (Q.rows() != q || Q.cols() != q) throw std::invalid_argument("dare: Q must be q x q");
    if (R.rows() != p || R.cols() != p) throw std::invalid_argument("dare: R must be p x p");
}

/// Inverse of the innovation covariance S = H P H^T + R, rejecting
/// numerically singular S (relative condition below 1e-12).
Eigen::MatrixXd innovation_inverse(const Eigen::MatrixXd& S) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smax > 0.0) || smin < 1e-12 * smax)
        throw SingularInnovation("innovation covariance H P H^T + R is singular");
    return svd.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
}

}  // namespace

DareSolution solve_dare(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                        const DareOptions& opts) {
    check_shapes(D, H, Q, R);
    if (!(opts.tol > 0.0)) throw std::invalid_argument("dare: tol must be positive");

    Eigen::MatrixXd P = opts.initial_P.size() ? opts.initial_P : Q;
    if (P.rows() != D.rows() || P.cols() != D.rows())
        throw std::invalid_argument("dare: initial P has wrong shape");

    double diff = 0.0;
    for (long it = 1; it <= opts.max_iterations; ++it) {
        const Eigen::MatrixXd PHt = P * H.transpose();
        const Eigen::MatrixXd S = H * PHt + R;
        const Eigen::MatrixXd K = PHt * innovation_inverse(S);  // P H^T S^-1
        Eigen::MatrixXd next = D * (P - K * PHt.transpose()) * D.transpose() + Q;
        next = 0.5 * (next + next.transpose());  // keep symmetric against drift
        diff = (next - P).cwiseAbs().maxCoeff();
        P = next;
        if (diff < opts.tol) return {P, diff, it};
    }
    throw NoConvergence("dare: no convergence after " + std::to_string(opts.max_iterations) +
                            " iterations (last defect " + std::to_string(diff) + ")",
                        opts.max_iterations, diff);
}

SteadyStatePredictor steady_state_gain(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H,
                                       const Eigen::MatrixXd& P, const Eigen::MatrixXd& R) {
    check_shapes(D, H, P, R);
    const Eigen::MatrixXd S = H * P * H.transpose() + R;
    SteadyStatePredictor pred;
    pred.G = D * P * H.transpose() * innovation_inverse(S);
    pred.F = D - pred.G * H;
    pred.H = H;
    pred.P = P;
    return pred;
}

SteadyStatePredictor build_predictor(const Eigen::MatrixXd& D, const Eigen::MatrixXd& H,
                                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                     const DareOptions& opts) {
    const DareSolution sol = solve_dare(D, H, Q, R, opts);
    SteadyStatePredictor pred = steady_state_gain(D, H, sol.P, R);
    pred.dare_residual = sol.residual;
    return pred;
}

PredictorState predictor_step(const SteadyStatePredictor& pred, const Eigen::VectorXd& phi,
                              const Eigen::VectorXd& r) {
    if (phi.size() != pred.F.rows()) throw std::invalid_argument("predictor_step: phi dimension");
    if (r.size() != pred.G.cols()) throw std::invalid_argument("predictor_step: r dimension");
    PredictorState next;
    next.phi = pred.F * phi + pred.G * r;
    next.g = pred.H * next.phi;
    return next;
}

}  // namespace irpe
