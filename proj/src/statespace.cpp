#include "irpe/statespace.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace irpe {

bool Box::contains(const Eigen::VectorXd& x) const {
    if (x.size() != lo.size()) throw std::invalid_argument("Box::contains: dimension mismatch");
    for (int i = 0; i < x.size(); ++i) {
        if (x(i) < lo(i) || x(i) > hi(i)) return false;
    }
    return true;
}

Eigen::VectorXd Box::clamp(const Eigen::VectorXd& x) const {
    if (x.size() != lo.size()) throw std::invalid_argument("Box::clamp: dimension mismatch");
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < x.size(); ++i) {
        out(i) = std::min(std::max(x(i), lo(i)), hi(i));
    }
    return out;
}

void ModelFamily::validate(const Eigen::VectorXd& x) const {
    if (sensor_count <= 0 || state_dim <= 0 || obs_dim <= 0 || param_dim <= 0)
        throw std::invalid_argument("ModelFamily: dimensions must be positive");
    if (x.size() != param_dim)
        throw std::invalid_argument("ModelFamily: parameter dimension mismatch");
    if (static_cast<int>(H.size()) != sensor_count || static_cast<int>(R.size()) != sensor_count)
        throw std::invalid_argument("ModelFamily: need one H and one R per sensor");
    if (feasible_box.dim() != param_dim)
        throw std::invalid_argument("ModelFamily: feasible box dimension mismatch");
    for (int i = 0; i < sensor_count; ++i) {
        const Eigen::MatrixXd Di = D(i, x);
        const Eigen::MatrixXd Qi = Q(i, x);
        if (Di.rows() != state_dim || Di.cols() != state_dim)
            throw std::invalid_argument("ModelFamily: D(" + std::to_string(i) + ") is not q x q");
        if (Qi.rows() != state_dim || Qi.cols() != state_dim)
            throw std::invalid_argument("ModelFamily: Q(" + std::to_string(i) + ") is not q x q");
        if (H[i].rows() != obs_dim || H[i].cols() != state_dim)
            throw std::invalid_argument("ModelFamily: H[" + std::to_string(i) + "] is not p x q");
        if (R[i].rows() != obs_dim || R[i].cols() != obs_dim)
            throw std::invalid_argument("ModelFamily: R[" + std::to_string(i) + "] is not p x p");
    }
}

double GaussianSampler::standard_normal() {
    // Box-Muller on open-interval uniforms; one value per pair keeps the
    // draw order independent of call granularity.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u1 = 0.0;
    do {
        u1 = unif(engine_);
    } while (u1 <= 0.0);
    const double u2 = unif(engine_);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd GaussianSampler::standard_normal(int n) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = standard_normal();
    return z;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw std::invalid_argument("covariance_factor: not square");
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("covariance_factor: matrix is not symmetric");

    const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    // Semidefinite (or numerically so): clip tiny negative eigenvalues.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
        throw std::invalid_argument("covariance_factor: matrix is indefinite");
    Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

Trajectory simulate_trajectory(const ModelFamily& model, const Eigen::VectorXd& x_true,
                               int steps, std::uint64_t seed, const SimulateOptions& opts) {
    model.validate(x_true);
    if (steps < 0) throw std::invalid_argument("simulate_trajectory: steps must be >= 0");
    if (!opts.initial_states.empty() &&
        static_cast<int>(opts.initial_states.size()) != model.sensor_count)
        throw std::invalid_argument("simulate_trajectory: need one initial state per sensor");

    const int m = model.sensor_count;
    const int q = model.state_dim;
    const int p = model.obs_dim;

    std::vector<Eigen::MatrixXd> D(m), Lq(m), Lr(m);
    for (int i = 0; i < m; ++i) {
        D[i] = model.D(i, x_true);
        Lq[i] = covariance_factor(model.Q(i, x_true));
        Lr[i] = covariance_factor(model.R[i]);
    }

    Trajectory traj;
    traj.rng_seed = seed;
    traj.measurements.assign(m, Eigen::MatrixXd::Zero(p, steps));
    if (opts.store_states) traj.states.assign(m, Eigen::MatrixXd::Zero(q, steps + 1));

    std::vector<Eigen::VectorXd> theta(m);
    for (int i = 0; i < m; ++i) {
        theta[i] = opts.initial_states.empty() ? Eigen::VectorXd::Zero(q).eval()
                                               : opts.initial_states[i];
        if (theta[i].size() != q)
            throw std::invalid_argument("simulate_trajectory: initial state dimension mismatch");
        if (opts.store_states) traj.states[i].col(0) = theta[i];
    }

    GaussianSampler rng(seed);
    for (int k = 0; k < steps; ++k) {
        for (int i = 0; i < m; ++i) {
            theta[i] = D[i] * theta[i] + Lq[i] * rng.standard_normal(q);
            const Eigen::VectorXd r = model.H[i] * theta[i] + Lr[i] * rng.standard_normal(p);
            traj.measurements[i].col(k) = r;
            if (opts.store_states) traj.states[i].col(k + 1) = theta[i];
        }
    }
    return traj;
}

double spectral_radius(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("spectral_radius: not square");
    if (A.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> eig(A, /*computeEigenvectors=*/false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

int numerical_rank(const Eigen::MatrixXd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    if (svd.singularValues().size() == 0) return 0;
    const double smax = svd.singularValues()(0);
    if (smax == 0.0) return 0;
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) > 1e-8 * smax) ++rank;
    }
    return rank;
}

}  // namespace

bool AdmissibilityReport::all_ok() const {
    for (size_t i = 0; i < stable.size(); ++i) {
        if (!stable[i] || !observable[i] || !controllable[i]) return false;
    }
    return !stable.empty();
}

AdmissibilityReport check_model_admissible(const ModelFamily& model, const Eigen::VectorXd& x) {
    model.validate(x);
    const int q = model.state_dim;
    const int p = model.obs_dim;
    AdmissibilityReport rep;

    for (int i = 0; i < model.sensor_count; ++i) {
        const Eigen::MatrixXd Di = model.D(i, x);
        rep.stable.push_back(spectral_radius(Di) < 1.0 - 1e-9);

        Eigen::MatrixXd obs(p * q, q);
        Eigen::MatrixXd block = model.H[i];
        for (int j = 0; j < q; ++j) {
            obs.middleRows(j * p, p) = block;
            block = block * Di;
        }
        rep.observable.push_back(numerical_rank(obs) == q);

        // Controllability with respect to the process noise input Q^{1/2}.
        const Eigen::MatrixXd B = covariance_factor(model.Q(i, x));
        Eigen::MatrixXd ctrb(q, q * B.cols());
        Eigen::MatrixXd col = B;
        for (int j = 0; j < q; ++j) {
            ctrb.middleCols(j * B.cols(), B.cols()) = col;
            col = Di * col;
        }
        rep.controllable.push_back(numerical_rank(ctrb) == q);
    }
    return rep;
}

}  // namespace irpe
