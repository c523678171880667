#include "irpe/lifted.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace irpe {

Eigen::MatrixXd unit_block_vector(int a, int m, int b) {
    if (a <= 0 || m <= 0) throw std::invalid_argument("unit_block_vector: a, m must be positive");
    if (b < 1 || b > m) throw std::invalid_argument("unit_block_vector: block index out of range");
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(a * m, a);
    U.middleRows((b - 1) * a, a).setIdentity();
    return U;
}

Eigen::MatrixXd block_cycle_matrix(const Eigen::MatrixXd& payload, int m) {
    if (payload.rows() != payload.cols())
        throw std::invalid_argument("block_cycle_matrix: payload must be square");
    if (m <= 0) throw std::invalid_argument("block_cycle_matrix: m must be positive");
    const int s = static_cast<int>(payload.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m * s, m * s);
    for (int r = 0; r + 1 < m; ++r) M.block(r * s, (r + 1) * s, s, s).setIdentity();
    M.block((m - 1) * s, 0, s, s) = payload;
    return M;
}

Eigen::MatrixXd block_corner_matrix(const Eigen::MatrixXd& payload, int m) {
    if (payload.rows() != payload.cols())
        throw std::invalid_argument("block_corner_matrix: payload must be square");
    if (m <= 0) throw std::invalid_argument("block_corner_matrix: m must be positive");
    const int s = static_cast<int>(payload.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m * s, m * s);
    M.block((m - 1) * s, 0, s, s) = payload;
    return M;
}

LiftedSensor lift_sensor(const Eigen::MatrixXd& base, const Eigen::MatrixXd& G,
                         const Eigen::MatrixXd& H, int m) {
    const int q = static_cast<int>(base.rows());
    if (base.cols() != q) throw std::invalid_argument("lift_sensor: base must be square");
    if (G.rows() != q) throw std::invalid_argument("lift_sensor: G must be q x p");
    if (H.cols() != q) throw std::invalid_argument("lift_sensor: H must be p x q");
    LiftedSensor out;
    out.base = block_cycle_matrix(base, m);
    out.G = unit_block_vector(q, m, m) * G;
    out.H = H * unit_block_vector(q, m, 1).transpose();
    return out;
}

std::vector<Eigen::VectorXd> interleave(const std::vector<std::vector<Eigen::VectorXd>>& per_cycle,
                                        const std::vector<int>& order, int p) {
    const int m = static_cast<int>(order.size());
    if (m <= 0) throw std::invalid_argument("interleave: empty order");
    std::vector<Eigen::VectorXd> stream;
    stream.reserve(per_cycle.size() * order.size());
    for (const auto& cycle : per_cycle) {
        for (int j = 0; j < m; ++j) {
            const int i = order[j];
            if (i < 0 || i >= static_cast<int>(cycle.size()))
                throw std::invalid_argument("interleave: order index out of range");
            if (cycle[i].size() != p) throw std::invalid_argument("interleave: p mismatch");
            Eigen::VectorXd slot = Eigen::VectorXd::Zero(m * p);
            slot.segment(j * p, p) = cycle[i];
            stream.push_back(std::move(slot));
        }
    }
    return stream;
}

LiftedSystem::LiftedSystem(const ModelFamily& model, std::vector<int> order, FdOptions fd)
    : model_(&model), order_(std::move(order)), fd_(fd), m_(model.sensor_count),
      q_(model.state_dim), p_(model.obs_dim) {
    if (order_.empty()) {
        order_.resize(m_);
        for (int i = 0; i < m_; ++i) order_[i] = i;
    }
    if (static_cast<int>(order_.size()) != m_)
        throw std::invalid_argument("LiftedSystem: order must visit every sensor once");
}

PredictorBundle LiftedSystem::assemble(const Eigen::VectorXd& x) const {
    const int mq = m_ * q_;
    const int d = model_->param_dim;

    PredictorBundle big;
    big.F = Eigen::MatrixXd::Zero(m_ * mq, m_ * mq);
    big.G = Eigen::MatrixXd::Zero(m_ * mq, m_ * p_);
    big.H = Eigen::MatrixXd::Zero(m_ * p_, m_ * mq);
    big.derivs.dF.assign(d, Eigen::MatrixXd::Zero(m_ * mq, m_ * mq));
    big.derivs.dG.assign(d, Eigen::MatrixXd::Zero(m_ * mq, m_ * p_));

    for (int j = 0; j < m_; ++j) {
        const int i = order_[j];
        const SteadyStatePredictor pred = build_predictor(
            model_->D(i, x), model_->H[i], model_->Q(i, x), model_->R[i], fd_.dare);
        const MatrixDerivatives derivs = matrix_derivatives(*model_, i, x, fd_);

        const LiftedSensor lifted = lift_sensor(pred.F, pred.G, pred.H, m_);
        big.F.block(j * mq, j * mq, mq, mq) = lifted.base;
        big.G.block(j * mq, j * p_, mq, p_) = lifted.G;
        big.H.block(j * p_, j * mq, p_, mq) = lifted.H;
        for (int l = 0; l < d; ++l) {
            big.derivs.dF[l].block(j * mq, j * mq, mq, mq) =
                block_corner_matrix(derivs.dF[l], m_);
            big.derivs.dG[l].block(j * mq, j * p_, mq, p_) =
                unit_block_vector(q_, m_, m_) * derivs.dG[l];
        }
    }
    return big;
}

BundleFactory LiftedSystem::factory() const {
    struct Cache {
        Eigen::VectorXd last_x;
        PredictorBundle bundle;
    };
    auto cache = std::make_shared<Cache>();
    const LiftedSystem* self = this;
    return [self, cache](const Eigen::VectorXd& x) -> PredictorBundle {
        if (cache->last_x.size() == x.size() && cache->last_x == x) return cache->bundle;
        cache->bundle = self->assemble(x);
        cache->last_x = x;
        return cache->bundle;
    };
}

LiftedRunResult lifted_rpe_run(const ModelFamily& model, const Trajectory& traj,
                               const StepSchedule& sched, const Eigen::VectorXd& x0, int cycles,
                               const std::vector<int>& order, const FdOptions& fd) {
    if (cycles < 0) throw std::invalid_argument("lifted_rpe_run: cycles must be >= 0");
    if (cycles > traj.steps()) throw std::invalid_argument("lifted_rpe_run: trajectory too short");

    LiftedSystem sys(model, order, fd);
    const int m = model.sensor_count;
    const int p = model.obs_dim;

    std::vector<std::vector<Eigen::VectorXd>> per_cycle(cycles);
    for (int k = 0; k < cycles; ++k) {
        per_cycle[k].resize(m);
        for (int i = 0; i < m; ++i) per_cycle[k][i] = traj.measurements[i].col(k);
    }
    const std::vector<Eigen::VectorXd> stream = interleave(per_cycle, sys.order(), p);

    const BundleFactory factory = sys.factory();
    RpeState s;
    s.x = x0;
    // H~ does not depend on x; build it directly for the zero-initialized
    // recursions instead of assembling a full bundle.
    const int mq = m * model.state_dim;
    Eigen::MatrixXd bigH = Eigen::MatrixXd::Zero(m * p, m * mq);
    for (int j = 0; j < m; ++j) {
        bigH.block(j * p, j * mq, p, mq) =
            model.H[sys.order()[j]] * unit_block_vector(model.state_dim, m, 1).transpose();
    }
    s.pg = make_gradient_state(bigH, model.param_dim);

    LiftedRunResult result;
    result.x_trace.reserve(stream.size());
    for (long n = 1; n <= static_cast<long>(stream.size()); ++n) {
        const auto [cycle, pos] = sys.cycle_position(n);
        (void)pos;
        const double alpha = step_size(sched, cycle);
        s = rpe_step(s, factory, stream[n - 1], alpha, model.feasible_box);
        result.x_trace.push_back(s.x);
    }
    return result;
}

EquivalenceReport equivalence_report(const std::vector<Eigen::VectorXd>& a,
                                     const std::vector<Eigen::VectorXd>& b, double tol) {
    if (a.size() != b.size())
        throw std::invalid_argument("equivalence_report: trace lengths differ");
    EquivalenceReport rep;
    rep.compared = static_cast<long>(a.size());
    for (size_t n = 0; n < a.size(); ++n) {
        if (a[n].size() != b[n].size())
            throw std::invalid_argument("equivalence_report: iterate dimensions differ");
        double step_worst = 0.0;
        for (int c = 0; c < a[n].size(); ++c) {
            const double abs_dev = std::abs(a[n](c) - b[n](c));
            const double scale = std::max(std::abs(a[n](c)), std::abs(b[n](c)));
            rep.max_abs_dev = std::max(rep.max_abs_dev, abs_dev);
            if (scale > 0.0) rep.max_rel_dev = std::max(rep.max_rel_dev, abs_dev / scale);
            step_worst = std::max(step_worst, abs_dev);
        }
        if (rep.first_divergence_index < 0 && step_worst > tol)
            rep.first_divergence_index = static_cast<long>(n) + 1;
    }
    return rep;
}

}  // namespace irpe
