#include "irpe/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace irpe {

double step_size(const StepSchedule& sched, long k) {
    const double denom = static_cast<double>(k) + sched.k0;
    if (!(denom > 0.0)) throw std::invalid_argument("step_size: k + k0 must be positive");
    return sched.mu / denom;
}

Eigen::VectorXd project(const Eigen::VectorXd& x, const Box& box) { return box.clamp(x); }

Eigen::VectorXd incremental_gradient_step(
    const Eigen::VectorXd& x,
    const std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>& grads,
    double alpha, const Box& box) {
    Eigen::VectorXd z = x;
    for (const auto& grad : grads) z = project(z - alpha * grad(z), box);
    return z;
}

BundleFactory make_bundle_factory(const ModelFamily& model, int sensor,
                                  const BundleFactoryOptions& opts) {
    if (sensor < 0 || sensor >= model.sensor_count)
        throw std::invalid_argument("make_bundle_factory: sensor index out of range");

    struct Cache {
        Eigen::VectorXd last_x;
        PredictorBundle bundle;
        Eigen::MatrixXd warm_P;
    };
    auto cache = std::make_shared<Cache>();

    return [&model, sensor, opts, cache](const Eigen::VectorXd& x) -> PredictorBundle {
        if (cache->last_x.size() == x.size() && cache->last_x == x) return cache->bundle;

        FdOptions fd = opts.fd;
        DareOptions center = fd.dare;
        if (opts.warm_start && cache->warm_P.size()) center.initial_P = cache->warm_P;

        const SteadyStatePredictor pred = build_predictor(
            model.D(sensor, x), model.H[sensor], model.Q(sensor, x), model.R[sensor], center);
        if (opts.warm_start) {
            cache->warm_P = pred.P;
            fd.dare.initial_P = pred.P;  // perturbed solves start near the answer
        }

        PredictorBundle b;
        b.F = pred.F;
        b.G = pred.G;
        b.H = pred.H;
        b.derivs = matrix_derivatives(model, sensor, x, fd);

        cache->last_x = x;
        cache->bundle = b;
        return b;
    };
}

namespace {

/// Shared sub-update: consumes one measurement, moves the iterate, then
/// advances the recursion at the updated iterate.  rpe_step and irpe_cycle
/// both route through here so the m = 1 case is the same code path.
double prediction_error_update(Eigen::VectorXd& x, PredictorGradientState& pg,
                               const BundleFactory& factory, const Eigen::VectorXd& r,
                               double alpha, const Box& box) {
    if (r.size() != pg.h.size())
        throw std::invalid_argument("prediction error update: measurement dimension");

    const Eigen::VectorXd eps = r - pg.h;
    Eigen::VectorXd moved = x;
    for (size_t l = 0; l < pg.xi.size(); ++l)
        moved(static_cast<int>(l)) += alpha * pg.xi[l].dot(eps);
    x = project(moved, box);

    const PredictorBundle b = factory(x);
    pg = extended_step(pg, b.F, b.G, b.H, b.derivs, r);
    return eps.squaredNorm();
}

}  // namespace

RpeState rpe_step(const RpeState& s, const BundleFactory& bundle, const Eigen::VectorXd& r,
                  double alpha, const Box& box) {
    RpeState next = s;
    prediction_error_update(next.x, next.pg, bundle, r, alpha, box);
    next.step = s.step + 1;
    return next;
}

IrpeState make_irpe_state(const ModelFamily& model, const Eigen::VectorXd& x0,
                          const std::vector<int>& ring) {
    if (x0.size() != model.param_dim)
        throw std::invalid_argument("make_irpe_state: x0 dimension mismatch");
    IrpeState s;
    s.x = x0;
    s.sensors.reserve(model.sensor_count);
    for (int i = 0; i < model.sensor_count; ++i)
        s.sensors.push_back(make_gradient_state(model.H[i], model.param_dim));
    if (ring.empty()) {
        s.ring.resize(model.sensor_count);
        for (int i = 0; i < model.sensor_count; ++i) s.ring[i] = i;
    } else {
        if (static_cast<int>(ring.size()) != model.sensor_count)
            throw std::invalid_argument("make_irpe_state: ring must visit every sensor once");
        s.ring = ring;
    }
    return s;
}

IrpeState irpe_cycle(const IrpeState& s, const std::vector<BundleFactory>& factories,
                     const std::vector<Eigen::VectorXd>& r, double alpha, const Box& box,
                     std::vector<SubstepRecord>* trace) {
    const int m = static_cast<int>(s.sensors.size());
    if (static_cast<int>(factories.size()) != m)
        throw std::invalid_argument("irpe_cycle: need one bundle factory per sensor");
    if (static_cast<int>(r.size()) != m)
        throw std::invalid_argument("irpe_cycle: need one measurement per sensor");

    IrpeState next = s;
    for (int j = 0; j < m; ++j) {
        const int i = next.ring[j];
        const double eps_sq =
            prediction_error_update(next.x, next.sensors[i], factories[i], r[i], alpha, box);
        if (trace) {
            SubstepRecord rec;
            rec.cycle = s.cycle + 1;
            rec.substep = j + 1;
            rec.sensor = i;
            rec.z = next.x;
            rec.innovation_sq = eps_sq;
            rec.alpha = alpha;
            trace->push_back(std::move(rec));
        }
    }
    next.cycle = s.cycle + 1;
    return next;
}

double empirical_cost(const ModelFamily& model, const Eigen::VectorXd& x, const Trajectory& traj,
                      int steps, const DareOptions& dare,
                      const std::vector<Eigen::VectorXd>& initial_phi) {
    if (steps <= 0) throw std::invalid_argument("empirical_cost: steps must be positive");
    if (static_cast<int>(traj.measurements.size()) != model.sensor_count)
        throw std::invalid_argument("empirical_cost: trajectory/model sensor count mismatch");
    if (steps > traj.steps()) throw std::invalid_argument("empirical_cost: trajectory too short");
    if (!initial_phi.empty() && static_cast<int>(initial_phi.size()) != model.sensor_count)
        throw std::invalid_argument("empirical_cost: need one initial phi per sensor");

    double total = 0.0;
    for (int i = 0; i < model.sensor_count; ++i) {
        const SteadyStatePredictor pred = build_predictor(model.D(i, x), model.H[i],
                                                          model.Q(i, x), model.R[i], dare);
        Eigen::VectorXd phi = initial_phi.empty() ? Eigen::VectorXd::Zero(model.state_dim).eval()
                                                  : initial_phi[i];
        Eigen::VectorXd g = pred.H * phi;
        for (int k = 0; k < steps; ++k) {
            const Eigen::VectorXd r = traj.measurements[i].col(k);
            total += (r - g).squaredNorm();
            const PredictorState ps = predictor_step(pred, phi, r);
            phi = ps.phi;
            g = ps.g;
        }
    }
    return total / static_cast<double>(steps);
}

}  // namespace irpe
