#include "irpe/gradients.hpp"

#include <sstream>
#include <stdexcept>

namespace irpe {

PredictorGradientState make_gradient_state(const Eigen::MatrixXd& H, int param_dim,
                                           const Eigen::VectorXd& psi1,
                                           const std::vector<Eigen::VectorXd>& chi1) {
    const int q = static_cast<int>(H.cols());
    PredictorGradientState s;
    s.psi = psi1.size() ? psi1 : Eigen::VectorXd::Zero(q).eval();
    if (s.psi.size() != q) throw std::invalid_argument("make_gradient_state: psi1 dimension");
    if (!chi1.empty() && static_cast<int>(chi1.size()) != param_dim)
        throw std::invalid_argument("make_gradient_state: chi1 needs one entry per coordinate");
    s.chi.resize(param_dim);
    for (int l = 0; l < param_dim; ++l) {
        s.chi[l] = chi1.empty() ? Eigen::VectorXd::Zero(q).eval() : chi1[l];
        if (s.chi[l].size() != q) throw std::invalid_argument("make_gradient_state: chi1 dimension");
    }
    s.h = H * s.psi;
    s.xi.resize(param_dim);
    for (int l = 0; l < param_dim; ++l) s.xi[l] = H * s.chi[l];
    return s;
}

namespace {

SteadyStatePredictor predictor_at(const ModelFamily& model, int sensor, const Eigen::VectorXd& x,
                                  const DareOptions& dare) {
    try {
        return build_predictor(model.D(sensor, x), model.H[sensor], model.Q(sensor, x),
                               model.R[sensor], dare);
    } catch (const NoConvergence& e) {
        std::ostringstream oss;
        oss << e.what() << " at x = [" << x.transpose() << "]";
        throw NoConvergence(oss.str(), e.iterations, e.residual);
    }
}

}  // namespace

MatrixDerivatives matrix_derivatives(const ModelFamily& model, int sensor,
                                     const Eigen::VectorXd& x, const FdOptions& opts) {
    if (sensor < 0 || sensor >= model.sensor_count)
        throw std::invalid_argument("matrix_derivatives: sensor index out of range");
    if (x.size() != model.param_dim)
        throw std::invalid_argument("matrix_derivatives: parameter dimension mismatch");

    const int d = model.param_dim;
    MatrixDerivatives out;
    out.dF.resize(d);
    out.dG.resize(d);

    if (model.analytic_gain_derivs) {
        model.analytic_gain_derivs(sensor, x, out.dF, out.dG);
        if (static_cast<int>(out.dF.size()) != d || static_cast<int>(out.dG.size()) != d)
            throw std::invalid_argument("matrix_derivatives: analytic hook returned wrong count");
        return out;
    }

    const Box& box = model.feasible_box;
    for (int l = 0; l < d; ++l) {
        const double h = opts.explicit_step > 0.0
                             ? opts.explicit_step
                             : opts.h_scale * std::max(1.0, std::abs(x(l)));
        Eigen::VectorXd xp = x, xm = x;
        xp(l) += h;
        xm(l) -= h;

        // Fall back to a one-sided difference when a perturbation would
        // leave the feasible box (iterates live on its boundary after
        // projection, so this is a common case, not an error).
        const bool up_ok = xp(l) <= box.hi(l);
        const bool down_ok = xm(l) >= box.lo(l);
        if (!up_ok && !down_ok)
            throw std::invalid_argument("matrix_derivatives: box thinner than fd step");

        const Eigen::VectorXd& xa = up_ok ? xp : x;
        const Eigen::VectorXd& xb = down_ok ? xm : x;
        const double span = up_ok && down_ok ? 2.0 * h : h;
        const SteadyStatePredictor pa = predictor_at(model, sensor, xa, opts.dare);
        const SteadyStatePredictor pb = predictor_at(model, sensor, xb, opts.dare);
        out.dF[l] = (pa.F - pb.F) / span;
        out.dG[l] = (pa.G - pb.G) / span;
    }
    return out;
}

PredictorGradientState extended_step(const PredictorGradientState& s, const Eigen::MatrixXd& F,
                                     const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                                     const MatrixDerivatives& derivs, const Eigen::VectorXd& r) {
    const int d = static_cast<int>(s.chi.size());
    if (static_cast<int>(derivs.dF.size()) != d || static_cast<int>(derivs.dG.size()) != d)
        throw std::invalid_argument("extended_step: derivative count mismatch");
    if (s.psi.size() != F.cols()) throw std::invalid_argument("extended_step: psi dimension");
    if (r.size() != G.cols()) throw std::invalid_argument("extended_step: r dimension");

    PredictorGradientState next;
    next.psi = F * s.psi + G * r;
    next.chi.resize(d);
    // chi' uses the previous psi: the pair evolves under the block
    // lower-triangular map [F 0; dF F].
    for (int l = 0; l < d; ++l) next.chi[l] = derivs.dF[l] * s.psi + F * s.chi[l] + derivs.dG[l] * r;
    next.h = H * next.psi;
    next.xi.resize(d);
    for (int l = 0; l < d; ++l) next.xi[l] = H * next.chi[l];
    return next;
}

Eigen::VectorXd empirical_gradient(const std::vector<Eigen::VectorXd>& xi,
                                   const Eigen::VectorXd& eps) {
    Eigen::VectorXd grad(static_cast<int>(xi.size()));
    for (size_t l = 0; l < xi.size(); ++l) {
        if (xi[l].size() != eps.size())
            throw std::invalid_argument("empirical_gradient: xi/eps dimension mismatch");
        grad(static_cast<int>(l)) = -2.0 * xi[l].dot(eps);
    }
    return grad;
}

}  // namespace irpe
