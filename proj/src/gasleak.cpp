#include "irpe/gasleak.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace irpe {

namespace {

constexpr double kPi = std::numbers::pi;

void check_scenario(const WarehouseScenario& sc) {
    if (sc.l1 <= 0.0 || sc.l2 <= 0.0) throw std::invalid_argument("scenario: room extents");
    if (sc.nu < 0.0) throw std::invalid_argument("scenario: negative diffusivity");
    if (sc.delta <= 0.0) throw std::invalid_argument("scenario: sampling interval");
    if (sc.n1_modes < 1 || sc.n2_modes < 1) throw std::invalid_argument("scenario: mode counts");
    if (sc.sigma_s2 < 0.0 || sc.sigma_n2 < 0.0) throw std::invalid_argument("scenario: variances");
}

/// Integral of beta^(t - tau) over tau in [a, b], the exact weight a
/// constant unit intensity on [a, b] contributes to a mode at time t.
double decay_integral(double beta_base, double t, double a, double b) {
    const double log_beta = std::log(beta_base);
    if (std::abs(log_beta) < 1e-12) return b - a;  // beta -> 1: plain length
    // substituting u = t - tau: integral of beta^u over [t-b, t-a]
    return (std::pow(beta_base, t - a) - std::pow(beta_base, t - b)) / log_beta;
}

}  // namespace

double beta(const WarehouseScenario& sc, int n1, int n2) {
    if (n1 < 0 || n2 < 0) throw std::invalid_argument("beta: mode numbers must be >= 0");
    const double s = static_cast<double>(n1) * n1 / (sc.l1 * sc.l1) +
                     static_cast<double>(n2) * n2 / (sc.l2 * sc.l2);
    return std::exp(-sc.nu * kPi * kPi * s);
}

double cosine_mode(const WarehouseScenario& sc, const Eigen::Vector2d& y, int n1, int n2) {
    return std::cos(n1 * kPi * y(0) / sc.l1) * std::cos(n2 * kPi * y(1) / sc.l2);
}

double greens_concentration(const Eigen::Vector2d& y, double t, const Eigen::Vector2d& x,
                            const WarehouseScenario& sc, const std::vector<double>& intensity) {
    check_scenario(sc);
    if (t < 0.0) throw std::invalid_argument("greens_concentration: negative time");

    const double area = sc.l1 * sc.l2;
    double total = 0.0;

    // Constant (mass) mode: (1/area) * integral of I over [0, t].
    double mass = 0.0;
    for (size_t k = 0; k < intensity.size(); ++k) {
        const double a = static_cast<double>(k) * sc.delta;
        if (a >= t) break;
        const double b = std::min(t, a + sc.delta);
        mass += intensity[k] * (b - a);
    }
    total += mass / area;

    // Cosine modes, each with its exact per-slot decay integral.
    for (int n1 = 1; n1 <= sc.n1_modes; ++n1) {
        for (int n2 = 1; n2 <= sc.n2_modes; ++n2) {
            const double b = beta(sc, n1, n2);
            double driven = 0.0;
            for (size_t k = 0; k < intensity.size(); ++k) {
                const double t0 = static_cast<double>(k) * sc.delta;
                if (t0 >= t) break;
                const double t1 = std::min(t, t0 + sc.delta);
                driven += intensity[k] * decay_integral(b, t, t0, t1);
            }
            total += (4.0 / area) * cosine_mode(sc, x, n1, n2) * cosine_mode(sc, y, n1, n2) * driven;
        }
    }
    return total;
}

Eigen::VectorXd source_coupling(const WarehouseScenario& sc, const Eigen::Vector2d& x) {
    check_scenario(sc);
    const double area = sc.l1 * sc.l2;
    Eigen::VectorXd B(1 + sc.n1_modes * sc.n2_modes);
    B(0) = sc.delta / area;
    for (int n1 = 1; n1 <= sc.n1_modes; ++n1) {
        for (int n2 = 1; n2 <= sc.n2_modes; ++n2) {
            const double b = beta(sc, n1, n2);
            const int slot = (n1 - 1) * sc.n2_modes + n2;
            B(slot) = (4.0 / area) * cosine_mode(sc, x, n1, n2) *
                      decay_integral(b, sc.delta, 0.0, sc.delta);
        }
    }
    return B;
}

std::array<Eigen::VectorXd, 2> source_coupling_gradient(const WarehouseScenario& sc,
                                                        const Eigen::Vector2d& x) {
    check_scenario(sc);
    const double area = sc.l1 * sc.l2;
    std::array<Eigen::VectorXd, 2> g;
    g[0] = Eigen::VectorXd::Zero(1 + sc.n1_modes * sc.n2_modes);
    g[1] = Eigen::VectorXd::Zero(1 + sc.n1_modes * sc.n2_modes);
    for (int n1 = 1; n1 <= sc.n1_modes; ++n1) {
        for (int n2 = 1; n2 <= sc.n2_modes; ++n2) {
            const double w = (4.0 / area) * decay_integral(beta(sc, n1, n2), sc.delta, 0.0, sc.delta);
            const int slot = (n1 - 1) * sc.n2_modes + n2;
            const double c1 = std::cos(n1 * kPi * x(0) / sc.l1);
            const double s1 = std::sin(n1 * kPi * x(0) / sc.l1);
            const double c2 = std::cos(n2 * kPi * x(1) / sc.l2);
            const double s2 = std::sin(n2 * kPi * x(1) / sc.l2);
            g[0](slot) = -w * (n1 * kPi / sc.l1) * s1 * c2;
            g[1](slot) = -w * (n2 * kPi / sc.l2) * c1 * s2;
        }
    }
    return g;
}

int GasLeakModel::gamma(int n1, int n2) const {
    if (n1 < 1 || n1 > scenario.n1_modes || n2 < 1 || n2 > scenario.n2_modes)
        throw std::invalid_argument("gamma: mode out of range");
    return (n1 - 1) * scenario.n2_modes + n2;
}

GasLeakModel build_gasleak_model(const WarehouseScenario& sc) {
    check_scenario(sc);
    if (sc.positions.empty()) throw std::invalid_argument("build_gasleak_model: no sensors");

    GasLeakModel model;
    model.scenario = sc;

    const int modes = sc.n1_modes * sc.n2_modes;
    const int q = modes + 2;  // constant mode + cosine modes + intensity
    const int m = static_cast<int>(sc.positions.size());

    Eigen::VectorXd decay(modes + 1);
    decay(0) = 1.0;  // the mass mode neither grows nor decays
    for (int n1 = 1; n1 <= sc.n1_modes; ++n1)
        for (int n2 = 1; n2 <= sc.n2_modes; ++n2)
            decay((n1 - 1) * sc.n2_modes + n2) = std::pow(beta(sc, n1, n2), sc.delta);

    WarehouseScenario scenario = sc;  // captured by the family callbacks
    auto transition = [scenario, decay, q](int, const Eigen::VectorXd& x) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(q, q);
        D.topLeftCorner(q - 1, q - 1) = decay.asDiagonal();
        D.topRightCorner(q - 1, 1) = scenario.rho * source_coupling(scenario, x);
        D(q - 1, q - 1) = scenario.rho;
        return D;
    };
    auto noise = [scenario, q](int, const Eigen::VectorXd& x) {
        Eigen::VectorXd b(q);
        b.head(q - 1) = source_coupling(scenario, x);
        b(q - 1) = 1.0;
        return Eigen::MatrixXd(scenario.sigma_s2 * b * b.transpose());
    };

    ModelFamily& fam = model.family;
    fam.sensor_count = m;
    fam.state_dim = q;
    fam.obs_dim = 1;
    fam.param_dim = 2;
    fam.D = transition;
    fam.Q = noise;
    for (int i = 0; i < m; ++i) {
        Eigen::MatrixXd Hi = Eigen::MatrixXd::Zero(1, q);
        Hi(0, 0) = 1.0;
        for (int n1 = 1; n1 <= sc.n1_modes; ++n1)
            for (int n2 = 1; n2 <= sc.n2_modes; ++n2)
                Hi(0, (n1 - 1) * sc.n2_modes + n2) = cosine_mode(sc, sc.positions[i], n1, n2);
        fam.H.push_back(Hi);
        fam.R.push_back(Eigen::MatrixXd::Constant(1, 1, sc.sigma_n2));
    }
    fam.feasible_box.lo = Eigen::Vector2d(0.0, 0.0);
    fam.feasible_box.hi = Eigen::Vector2d(sc.l1, sc.l2);
    return model;
}

LeakSimulation simulate_leak(const GasLeakModel& model, int steps, std::uint64_t seed) {
    if (steps < 0) throw std::invalid_argument("simulate_leak: steps must be >= 0");
    const WarehouseScenario& sc = model.scenario;
    const int q = model.family.state_dim;
    const int m = model.family.sensor_count;

    const Eigen::MatrixXd D = model.family.D(0, sc.x_true);
    Eigen::VectorXd b(q);
    b.head(q - 1) = source_coupling(sc, sc.x_true);
    b(q - 1) = 1.0;
    const double sigma_s = std::sqrt(sc.sigma_s2);
    const double sigma_n = std::sqrt(sc.sigma_n2);

    LeakSimulation sim;
    sim.traj.rng_seed = seed;
    sim.traj.measurements.assign(m, Eigen::MatrixXd::Zero(1, steps));
    sim.state_path = Eigen::MatrixXd::Zero(q, steps + 1);

    Eigen::VectorXd state = Eigen::VectorXd::Zero(q);
    state(q - 1) = sc.initial_intensity;
    sim.state_path.col(0) = state;

    GaussianSampler rng(seed);
    for (int k = 0; k < steps; ++k) {
        state = D * state + b * (sigma_s * rng.standard_normal());
        sim.state_path.col(k + 1) = state;
        sim.intensity.push_back(state(q - 1));
        for (int i = 0; i < m; ++i) {
            sim.traj.measurements[i](0, k) =
                model.family.H[i].row(0).dot(state) + sigma_n * rng.standard_normal();
        }
    }
    return sim;
}

GasLeakModel cluster_stack(const GasLeakModel& model,
                           const std::vector<std::vector<int>>& clusters) {
    if (clusters.empty()) throw std::invalid_argument("cluster_stack: no clusters");
    const size_t width = clusters.front().size();
    for (const auto& c : clusters) {
        if (c.empty()) throw std::invalid_argument("cluster_stack: empty cluster");
        if (c.size() != width)
            throw std::invalid_argument("cluster_stack: clusters must be equal-sized");
        for (int i : c)
            if (i < 0 || i >= model.family.sensor_count)
                throw std::invalid_argument("cluster_stack: member index out of range");
    }

    GasLeakModel out;
    out.scenario = model.scenario;
    out.family = model.family;
    out.family.sensor_count = static_cast<int>(clusters.size());
    out.family.obs_dim = static_cast<int>(width);
    out.family.H.clear();
    out.family.R.clear();
    const double sigma_n2 = model.scenario.sigma_n2;
    for (const auto& c : clusters) {
        Eigen::MatrixXd Hc(width, model.family.state_dim);
        for (size_t j = 0; j < width; ++j) Hc.row(j) = model.family.H[c[j]].row(0);
        out.family.H.push_back(Hc);
        out.family.R.push_back(sigma_n2 *
                               Eigen::MatrixXd::Identity(width, width));
    }
    return out;
}

}  // namespace irpe
