#pragma once

#include "irpe/estimators.hpp"
#include "irpe/gasleak.hpp"
#include "irpe/lifted.hpp"
#include "irpe/statespace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace irpe {

/// Sensor positions plus their grouping into clusters.  The first member of
/// each cluster acts as the cluster head.
struct Deployment {
    std::vector<Eigen::Vector2d> positions;
    std::vector<std::vector<int>> clusters;

    Eigen::Vector2d centroid() const;
};

/// Regular g x g grid of cluster heads at cell centers inside [0,w] x [0,h],
/// each with extras_per_grid additional sensors dropped uniformly in a disc
/// of jitter_radius around it (clipped to the rectangle).  grid_count must
/// be a perfect square.  Heads occupy indices 0..grid_count-1.
Deployment deploy_grid_jittered(int grid_count, int extras_per_grid, double jitter_radius,
                                double width, double height, std::uint64_t seed);

/// Greedy nearest-neighbour visiting order starting from sensor 0, ties
/// broken toward the lower index.  Returns a permutation of 0..m-1.
std::vector<int> ring_order(const std::vector<Eigen::Vector2d>& positions);

/// Closed-tour length over `order` (last hop returns to the start).
double tour_length(const std::vector<Eigen::Vector2d>& positions, const std::vector<int>& order);

enum class CommMode { incremental, centralized };

/// Total communication cost in bit-meters over `cycles` cycles: the closed
/// ring tour per cycle (incremental) or every sensor uploading to the
/// deployment centroid per slot (centralized).  One slot per cycle.
double comm_cost(const Deployment& dep, CommMode mode, long cycles);

/// Randomly generated admissible linear family for oracle runs and tests:
/// D(x) = A0 + sum_l x_l A_l with the operator norms budgeted so the family
/// is stable over the whole box [-1,1]^d, constant SPD Q and R, dense H.
struct RandomModelSpec {
    int m = 3;
    int q = 2;
    int p = 1;
    int d = 2;
    std::uint64_t seed = 7;
};
struct RandomModel {
    ModelFamily family;
    Eigen::VectorXd x_true;
};
RandomModel make_random_model(const RandomModelSpec& spec);

struct ExperimentConfig {
    std::string mode = "irpe";  ///< irpe | hybrid | centralized | lifted-check
    std::uint64_t seed = 1;     ///< trajectory seed (deployment uses seed+1)
    int cycles = 300;
    std::string out_dir = "out";

    std::string model_type = "gasleak";  ///< gasleak | random-linear
    WarehouseScenario scenario;          ///< gasleak geometry/dynamics
    int grid_count = 9;
    int extras_per_grid = 2;
    double jitter_radius = 8.0;
    RandomModelSpec random_model;

    StepSchedule schedule{50.0, 0.0};
    Eigen::VectorXd x_start;  ///< empty: feasible-box centroid
    int refresh_stride = 1;   ///< rebuild bundles every this many cycles
    bool warm_start_dare = true;
};

struct ExperimentResult {
    std::string mode;
    Eigen::VectorXd x_start;
    Eigen::VectorXd x_final;
    Eigen::VectorXd x_true;
    long cycles = 0;
    double total_comm = 0.0;
    EquivalenceReport equivalence;  ///< lifted-check only (compared = 0 otherwise)
    std::string trace_path;
    std::string summary_path;
};

/// Runs one experiment end to end: build the model, simulate measurements,
/// run the requested estimator, and write out_dir/trace_<mode>.csv plus
/// out_dir/summary_<mode>.json.  Output bytes are a pure function of the
/// config, so replays with the same config are byte-identical.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace irpe
