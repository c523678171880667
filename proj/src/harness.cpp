#include "irpe/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>

namespace irpe {

namespace {

double dist(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return (a - b).norm(); }

/// Shortest round-trip decimal form, locale-independent; keeps replayed
/// trace files byte-identical.
std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_vector(const Eigen::VectorXd& v) {
    std::string out = "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_double(v(i));
    }
    return out + "]";
}

double operator_norm(const Eigen::MatrixXd& A) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

}  // namespace

Eigen::Vector2d Deployment::centroid() const {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : positions) c += p;
    return positions.empty() ? c : Eigen::Vector2d(c / static_cast<double>(positions.size()));
}

Deployment deploy_grid_jittered(int grid_count, int extras_per_grid, double jitter_radius,
                                double width, double height, std::uint64_t seed) {
    if (grid_count <= 0) throw std::invalid_argument("deploy: grid_count must be positive");
    if (extras_per_grid < 0) throw std::invalid_argument("deploy: extras_per_grid negative");
    if (width <= 0.0 || height <= 0.0) throw std::invalid_argument("deploy: bad rectangle");
    const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(grid_count))));
    if (g * g != grid_count)
        throw std::invalid_argument("deploy: grid_count must be a perfect square");

    Deployment dep;
    // Heads first (row-major cell centers), then the jittered extras so the
    // head of cluster c is simply index c.
    for (int r = 0; r < g; ++r)
        for (int c = 0; c < g; ++c)
            dep.positions.emplace_back((c + 0.5) * width / g, (r + 0.5) * height / g);

    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    dep.clusters.resize(grid_count);
    for (int head = 0; head < grid_count; ++head) {
        dep.clusters[head].push_back(head);
        for (int e = 0; e < extras_per_grid; ++e) {
            const double radius = jitter_radius * std::sqrt(unif(eng));
            const double angle = 2.0 * std::numbers::pi * unif(eng);
            Eigen::Vector2d pos = dep.positions[head] +
                                  radius * Eigen::Vector2d(std::cos(angle), std::sin(angle));
            pos(0) = std::clamp(pos(0), 0.0, width);
            pos(1) = std::clamp(pos(1), 0.0, height);
            dep.clusters[head].push_back(static_cast<int>(dep.positions.size()));
            dep.positions.push_back(pos);
        }
    }
    return dep;
}

std::vector<int> ring_order(const std::vector<Eigen::Vector2d>& positions) {
    const int m = static_cast<int>(positions.size());
    if (m == 0) throw std::invalid_argument("ring_order: no positions");
    std::vector<int> order;
    std::vector<bool> used(m, false);
    int cur = 0;
    order.push_back(0);
    used[0] = true;
    for (int step = 1; step < m; ++step) {
        int best = -1;
        double best_d = 0.0;
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            const double d = dist(positions[cur], positions[j]);
            if (best < 0 || d < best_d) {  // strict: ties keep the lower index
                best = j;
                best_d = d;
            }
        }
        order.push_back(best);
        used[best] = true;
        cur = best;
    }
    return order;
}

double tour_length(const std::vector<Eigen::Vector2d>& positions, const std::vector<int>& order) {
    if (order.empty()) throw std::invalid_argument("tour_length: empty order");
    double total = 0.0;
    for (size_t i = 0; i < order.size(); ++i)
        total += dist(positions.at(order[i]), positions.at(order[(i + 1) % order.size()]));
    return total;
}

double comm_cost(const Deployment& dep, CommMode mode, long cycles) {
    if (cycles < 0) throw std::invalid_argument("comm_cost: negative cycles");
    double per_cycle = 0.0;
    if (mode == CommMode::incremental) {
        per_cycle = tour_length(dep.positions, ring_order(dep.positions));
    } else {
        const Eigen::Vector2d center = dep.centroid();
        for (const auto& p : dep.positions) per_cycle += dist(p, center);
    }
    return per_cycle * static_cast<double>(cycles);
}

RandomModel make_random_model(const RandomModelSpec& spec) {
    if (spec.m <= 0 || spec.q <= 0 || spec.p <= 0 || spec.d <= 0)
        throw std::invalid_argument("make_random_model: dimensions must be positive");

    std::mt19937_64 eng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto randn = [&](int rows, int cols) {
        Eigen::MatrixXd M(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) M(i, j) = gauss(eng);
        return M;
    };

    Box box;
    box.lo = Eigen::VectorXd::Constant(spec.d, -1.0);
    box.hi = Eigen::VectorXd::Constant(spec.d, 1.0);

    for (int attempt = 0; attempt < 50; ++attempt) {
        // Budget the operator norms so |D(x)|_2 <= 0.9 over the whole box:
        // stability is certified, not sampled.
        std::vector<std::vector<Eigen::MatrixXd>> A(spec.m);
        std::vector<Eigen::MatrixXd> H, R, Q;
        for (int i = 0; i < spec.m; ++i) {
            A[i].resize(spec.d + 1);
            Eigen::MatrixXd A0 = randn(spec.q, spec.q);
            A0 *= (0.35 + 0.2 * unif(eng)) / operator_norm(A0);
            A[i][0] = A0;
            for (int l = 1; l <= spec.d; ++l) {
                Eigen::MatrixXd Al = randn(spec.q, spec.q);
                Al *= (0.2 + 0.15 * unif(eng)) / (operator_norm(Al) * spec.d);
                A[i][l] = Al;
            }
            H.push_back(randn(spec.p, spec.q));
            const Eigen::MatrixXd Lq = 0.3 * randn(spec.q, spec.q);
            Q.push_back(Lq * Lq.transpose() + 0.05 * Eigen::MatrixXd::Identity(spec.q, spec.q));
            const Eigen::MatrixXd Lr = 0.3 * randn(spec.p, spec.p);
            R.push_back(Lr * Lr.transpose() + 0.1 * Eigen::MatrixXd::Identity(spec.p, spec.p));
        }

        RandomModel out;
        out.family.sensor_count = spec.m;
        out.family.state_dim = spec.q;
        out.family.obs_dim = spec.p;
        out.family.param_dim = spec.d;
        out.family.D = [A](int i, const Eigen::VectorXd& x) {
            Eigen::MatrixXd D = A[i][0];
            for (int l = 0; l < x.size(); ++l) D += x(l) * A[i][l + 1];
            return D;
        };
        out.family.Q = [Q](int i, const Eigen::VectorXd&) { return Q[i]; };
        out.family.H = H;
        out.family.R = R;
        out.family.feasible_box = box;

        out.x_true = Eigen::VectorXd(spec.d);
        for (int l = 0; l < spec.d; ++l) out.x_true(l) = -0.8 + 1.6 * unif(eng);

        if (check_model_admissible(out.family, out.x_true).all_ok()) return out;
    }
    throw std::runtime_error("make_random_model: no admissible instance after 50 attempts");
}

namespace {

/// Per-cycle measurement streams regrouped into estimation units (sensors,
/// clusters, or one full stack).
std::vector<std::vector<Eigen::VectorXd>> unit_measurements(
    const std::vector<Eigen::MatrixXd>& per_sensor, const std::vector<std::vector<int>>& units,
    int cycles) {
    std::vector<std::vector<Eigen::VectorXd>> out(cycles);
    const int p = static_cast<int>(per_sensor.front().rows());
    for (int k = 0; k < cycles; ++k) {
        out[k].resize(units.size());
        for (size_t u = 0; u < units.size(); ++u) {
            Eigen::VectorXd stacked(static_cast<int>(units[u].size()) * p);
            for (size_t j = 0; j < units[u].size(); ++j)
                stacked.segment(static_cast<int>(j) * p, p) = per_sensor[units[u][j]].col(k);
            out[k][u] = stacked;
        }
    }
    return out;
}

/// Wraps a factory so the bundle is refreshed only every `stride` cycles
/// (deviates from the per-sub-update rebuild; callers flag it in output).
BundleFactory strided_factory(BundleFactory base, int stride,
                              const std::shared_ptr<long>& current_cycle) {
    struct Cache {
        PredictorBundle bundle;
        long cycle = 0;
        bool filled = false;
    };
    auto cache = std::make_shared<Cache>();
    return [base = std::move(base), stride, current_cycle, cache](const Eigen::VectorXd& x) {
        if (cache->filled && *current_cycle - cache->cycle < stride) return cache->bundle;
        cache->bundle = base(x);
        cache->cycle = *current_cycle;
        cache->filled = true;
        return cache->bundle;
    };
}

struct TraceRow {
    SubstepRecord rec;
    double cum_comm = 0.0;
};

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows, int d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open trace file: " + path);
    out << "cycle,substep,sensor_or_cluster_id";
    for (int l = 1; l <= d; ++l) out << ",x_hat_" << l;
    out << ",innovation_sq,alpha,cum_comm_cost\n";
    for (const auto& row : rows) {
        out << row.rec.cycle << ',' << row.rec.substep << ',' << row.rec.sensor;
        for (int l = 0; l < d; ++l) out << ',' << format_double(row.rec.z(l));
        out << ',' << format_double(row.rec.innovation_sq) << ',' << format_double(row.rec.alpha)
            << ',' << format_double(row.cum_comm) << '\n';
    }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const std::string& mode = config.mode;
    if (mode != "irpe" && mode != "hybrid" && mode != "centralized" && mode != "lifted-check")
        throw std::invalid_argument("run_experiment: unknown mode '" + mode + "'");
    if (config.model_type != "gasleak" && config.model_type != "random-linear")
        throw std::invalid_argument("run_experiment: unknown model_type '" + config.model_type +
                                    "'");
    if (config.cycles <= 0) throw std::invalid_argument("run_experiment: cycles must be positive");
    if (config.refresh_stride < 1)
        throw std::invalid_argument("run_experiment: refresh_stride must be >= 1");
    if ((mode == "hybrid" || mode == "centralized") && config.model_type != "gasleak")
        throw std::invalid_argument("run_experiment: mode '" + mode +
                                    "' requires the shared-state gasleak model");

    // ---- model + raw per-sensor measurement streams ------------------------
    ModelFamily base_family;          // per-sensor model (before clustering)
    Eigen::VectorXd x_true;
    std::vector<Eigen::MatrixXd> sensor_streams;
    Deployment deployment;
    GasLeakModel gas_model;
    Trajectory traj;  // per-sensor trajectory (used by lifted-check)

    if (config.model_type == "gasleak") {
        deployment = deploy_grid_jittered(config.grid_count, config.extras_per_grid,
                                          config.jitter_radius, config.scenario.l1,
                                          config.scenario.l2, config.seed + 1);
        WarehouseScenario sc = config.scenario;
        sc.positions = deployment.positions;
        gas_model = build_gasleak_model(sc);
        base_family = gas_model.family;
        x_true = sc.x_true;
        LeakSimulation sim = simulate_leak(gas_model, config.cycles, config.seed);
        sensor_streams = sim.traj.measurements;
        traj = std::move(sim.traj);
    } else {
        RandomModel rm = make_random_model(config.random_model);
        base_family = rm.family;
        x_true = rm.x_true;
        SimulateOptions sim_opts;
        sim_opts.store_states = false;
        traj = simulate_trajectory(base_family, x_true, config.cycles, config.seed, sim_opts);
        sensor_streams = traj.measurements;
    }

    // ---- estimation units, ring, per-substep communication -----------------
    const ModelFamily* family = &base_family;
    GasLeakModel stacked;  // keeps cluster_stack result alive
    std::vector<std::vector<int>> units;
    std::vector<int> ring;
    std::vector<double> hop_cost;  // indexed by substep position

    const bool geometric = config.model_type == "gasleak";
    if (mode == "hybrid") {
        stacked = cluster_stack(gas_model, deployment.clusters);
        family = &stacked.family;
        units = deployment.clusters;
        std::vector<Eigen::Vector2d> heads;
        for (const auto& c : deployment.clusters) heads.push_back(deployment.positions[c[0]]);
        ring = ring_order(heads);
        hop_cost.resize(ring.size());
        for (size_t j = 0; j < ring.size(); ++j) {
            const int prev = ring[(j + ring.size() - 1) % ring.size()];
            double intra = 0.0;
            const auto& members = deployment.clusters[ring[j]];
            for (size_t v = 1; v < members.size(); ++v)
                intra += dist(deployment.positions[members[v]], deployment.positions[members[0]]);
            hop_cost[j] = dist(heads[prev], heads[ring[j]]) + intra;
        }
    } else if (mode == "centralized") {
        std::vector<int> everyone(base_family.sensor_count);
        for (int i = 0; i < base_family.sensor_count; ++i) everyone[i] = i;
        stacked = cluster_stack(gas_model, {everyone});
        family = &stacked.family;
        units = {everyone};
        ring = {0};
        double upload = 0.0;
        const Eigen::Vector2d center = deployment.centroid();
        for (const auto& p : deployment.positions) upload += dist(p, center);
        hop_cost = {upload};
    } else {  // irpe or lifted-check: one unit per sensor
        units.resize(base_family.sensor_count);
        for (int i = 0; i < base_family.sensor_count; ++i) units[i] = {i};
        if (geometric) {
            ring = ring_order(deployment.positions);
            hop_cost.resize(ring.size());
            for (size_t j = 0; j < ring.size(); ++j) {
                const int prev = ring[(j + ring.size() - 1) % ring.size()];
                hop_cost[j] = dist(deployment.positions[prev], deployment.positions[ring[j]]);
            }
        } else {
            ring.resize(base_family.sensor_count);
            for (int i = 0; i < base_family.sensor_count; ++i) ring[i] = i;
            hop_cost.assign(ring.size(), 0.0);
        }
    }

    if (mode == "lifted-check") {
        const long lifted_dim = static_cast<long>(family->sensor_count) * family->sensor_count *
                                family->state_dim;
        if (lifted_dim > 2000)
            throw std::invalid_argument(
                "run_experiment: lifted-check state dimension m^2 q = " +
                std::to_string(lifted_dim) + " exceeds the 2000 limit; use a smaller instance");
    }

    const auto per_cycle = unit_measurements(sensor_streams, units, config.cycles);

    // ---- estimator run ------------------------------------------------------
    const Box& box = family->feasible_box;
    Eigen::VectorXd x0 = config.x_start;
    if (x0.size() == 0) x0 = 0.5 * (box.lo + box.hi);
    if (x0.size() != family->param_dim)
        throw std::invalid_argument("run_experiment: x_start dimension mismatch");
    if (!box.contains(x0)) throw std::invalid_argument("run_experiment: x_start outside the box");

    // The equivalence oracle requires bit-reproducible bundles, so the
    // lifted check always runs cold and unstrided.
    const bool warm = config.warm_start_dare && mode != "lifted-check";
    const int stride = mode == "lifted-check" ? 1 : config.refresh_stride;

    auto current_cycle = std::make_shared<long>(0);
    std::vector<BundleFactory> factories;
    for (int u = 0; u < family->sensor_count; ++u) {
        BundleFactoryOptions opts;
        opts.warm_start = warm;
        BundleFactory f = make_bundle_factory(*family, u, opts);
        if (stride > 1) f = strided_factory(std::move(f), stride, current_cycle);
        factories.push_back(std::move(f));
    }

    IrpeState state = make_irpe_state(*family, x0, ring);
    std::vector<TraceRow> rows;
    rows.reserve(static_cast<size_t>(config.cycles) * family->sensor_count);
    std::vector<Eigen::VectorXd> iterate_seq;  // for the equivalence check
    double cum_comm = 0.0;

    for (int k = 1; k <= config.cycles; ++k) {
        *current_cycle = k;
        const double alpha = step_size(config.schedule, k);
        std::vector<SubstepRecord> recs;
        state = irpe_cycle(state, factories, per_cycle[k - 1], alpha, box, &recs);
        for (const auto& rec : recs) {
            cum_comm += hop_cost[rec.substep - 1];
            if (mode == "lifted-check") iterate_seq.push_back(rec.z);
            rows.push_back({rec, cum_comm});
        }
    }

    ExperimentResult result;
    result.mode = mode;
    result.x_start = x0;
    result.x_final = state.x;
    result.x_true = x_true;
    result.cycles = config.cycles;
    result.total_comm = cum_comm;

    if (mode == "lifted-check") {
        const LiftedRunResult lifted =
            lifted_rpe_run(*family, traj, config.schedule, x0, config.cycles, ring);
        result.equivalence = equivalence_report(iterate_seq, lifted.x_trace);
    }

    // ---- outputs -------------------------------------------------------------
    std::filesystem::create_directories(config.out_dir);
    result.trace_path = config.out_dir + "/trace_" + mode + ".csv";
    result.summary_path = config.out_dir + "/summary_" + mode + ".json";
    write_trace_csv(result.trace_path, rows, family->param_dim);

    std::ofstream sum(result.summary_path, std::ios::binary);
    if (!sum) throw std::runtime_error("cannot open summary file: " + result.summary_path);
    sum << "{\n";
    sum << "  \"mode\": \"" << mode << "\",\n";
    sum << "  \"model_type\": \"" << config.model_type << "\",\n";
    sum << "  \"seed\": " << config.seed << ",\n";
    sum << "  \"cycles\": " << config.cycles << ",\n";
    sum << "  \"sensor_count\": " << base_family.sensor_count << ",\n";
    sum << "  \"unit_count\": " << family->sensor_count << ",\n";
    sum << "  \"mu\": " << format_double(config.schedule.mu) << ",\n";
    sum << "  \"k0\": " << format_double(config.schedule.k0) << ",\n";
    sum << "  \"refresh_stride\": " << stride << ",\n";
    sum << "  \"warm_start_dare\": " << (warm ? "true" : "false") << ",\n";
    sum << "  \"x_start\": " << format_vector(result.x_start) << ",\n";
    sum << "  \"x_true\": " << format_vector(result.x_true) << ",\n";
    sum << "  \"x_final\": " << format_vector(result.x_final) << ",\n";
    sum << "  \"distance_to_true\": " << format_double((result.x_final - result.x_true).norm())
        << ",\n";
    sum << "  \"total_comm_cost\": " << format_double(result.total_comm);
    if (mode == "lifted-check") {
        sum << ",\n  \"equivalence\": {\n";
        sum << "    \"compared\": " << result.equivalence.compared << ",\n";
        sum << "    \"max_abs_dev\": " << format_double(result.equivalence.max_abs_dev) << ",\n";
        sum << "    \"max_rel_dev\": " << format_double(result.equivalence.max_rel_dev) << ",\n";
        sum << "    \"first_divergence_index\": " << result.equivalence.first_divergence_index
            << "\n  }";
    }
    sum << "\n}\n";
    return result;
}

}  // namespace irpe
