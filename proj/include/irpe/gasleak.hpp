#pragma once

#include "irpe/statespace.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace irpe {

/// Rectangular room with insulated walls, a decaying stochastic point leak,
/// and point concentration sensors sampled every delta time units.
struct WarehouseScenario {
    double l1 = 100.0;  ///< room extent along axis 1
    double l2 = 100.0;  ///< room extent along axis 2
    double nu = 1.0;    ///< diffusivity
    double rho = 0.99;  ///< per-slot intensity decay factor
    double sigma_s2 = 10.0;  ///< intensity innovation variance
    double sigma_n2 = 0.1;   ///< sensor noise variance
    double delta = 10.0;     ///< sampling interval
    int n1_modes = 15;       ///< cosine modes kept along axis 1
    int n2_modes = 15;       ///< cosine modes kept along axis 2
    std::vector<Eigen::Vector2d> positions;  ///< sensor locations
    Eigen::Vector2d x_true = {37.0, 48.0};   ///< leak location
    double initial_intensity = 100.0;        ///< I(0)
};

/// Per-mode decay base beta = exp(-nu pi^2 (n1^2/l1^2 + n2^2/l2^2)).
double beta(const WarehouseScenario& sc, int n1, int n2);

/// Cosine mode shape cos(n1 pi y1 / l1) cos(n2 pi y2 / l2).
double cosine_mode(const WarehouseScenario& sc, const Eigen::Vector2d& y, int n1, int n2);

/// Concentration at position y and time t for a source at x, with the
/// piecewise-constant intensity path intensity[k-1] = I(k) active on
/// ((k-1) delta, k delta].  Direct evaluation of the truncated series with
/// exact per-slot integrals; the independent route against which the
/// state-space generator is cross-checked.
double greens_concentration(const Eigen::Vector2d& y, double t, const Eigen::Vector2d& x,
                            const WarehouseScenario& sc, const std::vector<double>& intensity);

/// Per-slot source coupling B'(x): entry 0 feeds the constant (mass) mode
/// with delta/(l1 l2); entry gamma(n1,n2) feeds mode (n1,n2) with
/// (4/(l1 l2)) cosine_mode(x) (beta^delta - 1)/log(beta).
Eigen::VectorXd source_coupling(const WarehouseScenario& sc, const Eigen::Vector2d& x);

/// Analytic gradient of source_coupling with respect to x1 and x2.
std::array<Eigen::VectorXd, 2> source_coupling_gradient(const WarehouseScenario& sc,
                                                        const Eigen::Vector2d& x);

/// The scenario assembled as a sensor-network model family over the
/// combined state [constant mode, modes (row-major), intensity].  All
/// sensors share one state process; the family's per-sensor callbacks
/// return identical D and Q.
struct GasLeakModel {
    WarehouseScenario scenario;
    ModelFamily family;

    int mode_count() const { return scenario.n1_modes * scenario.n2_modes; }
    /// Row-major mode slot gamma = (n1-1) n2_modes + n2, ranging over
    /// 1..mode_count(); equals the 0-based combined-state index of mode
    /// (n1, n2) since the constant mode occupies combined index 0.
    int gamma(int n1, int n2) const;
    int intensity_index() const { return mode_count() + 1; }  ///< 0-based
};

/// Builds the combined family: transition [[D', rho B'(x)], [0, rho]],
/// rank-one process noise sigma_s^2 [B'(x); 1] [B'(x); 1]^T, output rows
/// [1, cosine modes at the sensor, 0], R = sigma_n^2.  The feasible box is
/// the room.  The transition has a unit eigenvalue (the mass mode), so
/// admissibility checks report it as marginally stable by design.
GasLeakModel build_gasleak_model(const WarehouseScenario& sc);

struct LeakSimulation {
    /// Per-sensor scalar measurement streams, r_i(k) for k = 1..N.
    Trajectory traj;
    /// Combined state path, col k = state at slot k (k = 0..N).
    Eigen::MatrixXd state_path;
    /// Intensity values I(1..N) realized by the run (I(k) = state at slot k).
    std::vector<double> intensity;
};

/// Simulates the leak via the combined state-space recursion at
/// scenario.x_true: one shared state path, one intensity innovation per
/// slot, then per-sensor measurement noise.  Reproducible from the seed.
LeakSimulation simulate_leak(const GasLeakModel& model, int steps, std::uint64_t seed);

/// Fuses sensors into equal-sized super-sensors by stacking their output
/// rows and block-diagonal measurement noise; the shared state dynamics are
/// untouched.  clusters[c] lists member sensor indices.
GasLeakModel cluster_stack(const GasLeakModel& model,
                           const std::vector<std::vector<int>>& clusters);

}  // namespace irpe
