#pragma once

#include "irpe/estimators.hpp"
#include "irpe/statespace.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace irpe {

/// Block unit vector U^a_b: an (a m) x a matrix of m stacked a x a blocks,
/// all zero except an identity at block b (1-based).
Eigen::MatrixXd unit_block_vector(int a, int m, int b);

/// (m s) x (m s) block matrix with identity blocks on the first block
/// superdiagonal and `payload` (s x s) in the bottom-left corner:
///     [0 I 0 ... 0]
///     [0 0 I ... 0]
///     [     ...   ]
///     [P 0 0 ... 0]
/// Applied once per slot this cycles a length-m pipeline of s-vectors and
/// pushes the payload product in at the bottom; applied m times it acts as
/// the payload once on every lane.
Eigen::MatrixXd block_cycle_matrix(const Eigen::MatrixXd& payload, int m);

/// Same shape with only the corner payload (the derivative of
/// block_cycle_matrix with respect to a parameter the payload depends on).
Eigen::MatrixXd block_corner_matrix(const Eigen::MatrixXd& payload, int m);

/// One sensor's slot-level lifting: the per-cycle recursion (base, G, H)
/// becomes a per-slot system of m-fold state dimension,
///     base -> block_cycle_matrix(base, m)
///     G    -> U^q_m G          (input enters the bottom lane)
///     H    -> H (U^q_1)^T      (output reads the top lane)
struct LiftedSensor {
    Eigen::MatrixXd base;  ///< (m q) x (m q)
    Eigen::MatrixXd G;     ///< (m q) x p
    Eigen::MatrixXd H;     ///< p x (m q)
};
LiftedSensor lift_sensor(const Eigen::MatrixXd& base, const Eigen::MatrixXd& G,
                         const Eigen::MatrixXd& H, int m);

/// Interleaves per-cycle, per-sensor measurements into the slot-level
/// stream: slot n = m k + j (1-based) carries sensor order[j-1]'s cycle-k+1
/// measurement in block j of an (m p)-vector, zeros elsewhere.
std::vector<Eigen::VectorXd> interleave(const std::vector<std::vector<Eigen::VectorXd>>& per_cycle,
                                        const std::vector<int>& order, int p);

/// The full lifted plant: every sensor lifted to slot level and stacked
/// block-diagonally, so one centralized RPE run over the interleaved stream
/// reproduces the incremental estimator's sub-iterate sequence exactly.
/// Holds a reference to the model; keep the model alive while in use.
class LiftedSystem {
  public:
    /// order: sub-update order of the incremental run being mirrored
    /// (identity when empty).  fd: derivative options, which must match the
    /// incremental run's for trace-level agreement.
    LiftedSystem(const ModelFamily& model, std::vector<int> order = {}, FdOptions fd = {});

    int sensor_count() const { return m_; }
    int slot_state_dim() const { return m_ * q_; }      ///< per sensor
    int total_state_dim() const { return m_ * m_ * q_; }
    const std::vector<int>& order() const { return order_; }

    /// Assembled closed-loop bundle at x: F~, G~, H~ block-diagonal over
    /// sensors (in ring order), with per-coordinate derivatives lifted the
    /// same way.
    PredictorBundle assemble(const Eigen::VectorXd& x) const;

    /// assemble() wrapped for the estimator, memoized per exact x.
    BundleFactory factory() const;

    /// Slot index n (1-based) of cycle k >= 1, position j in 1..m.
    long slot_of(long cycle, int position) const { return (cycle - 1) * m_ + position; }
    /// Inverse map: slot n -> (cycle, position), both 1-based.
    std::pair<long, int> cycle_position(long n) const {
        return {(n - 1) / m_ + 1, static_cast<int>((n - 1) % m_) + 1};
    }

  private:
    const ModelFamily* model_;
    std::vector<int> order_;
    FdOptions fd_;
    int m_ = 0, q_ = 0, p_ = 0;
};

struct LiftedRunResult {
    std::vector<Eigen::VectorXd> x_trace;  ///< x~ after slots n = 1..m*cycles
};

/// Runs centralized RPE on the lifted system over the interleaved stream of
/// a recorded trajectory.  Step size is held at alpha_{k+1} for all m slots
/// of cycle k+1.  Initial recursions are zero, matching make_irpe_state.
LiftedRunResult lifted_rpe_run(const ModelFamily& model, const Trajectory& traj,
                               const StepSchedule& sched, const Eigen::VectorXd& x0, int cycles,
                               const std::vector<int>& order = {}, const FdOptions& fd = {});

/// Elementwise comparison of two iterate traces (same length and dimension).
struct EquivalenceReport {
    double max_abs_dev = 0.0;
    double max_rel_dev = 0.0;              ///< |a-b| / max(|a|, |b|), 0 for 0/0
    long first_divergence_index = -1;      ///< 1-based; -1 when within tol throughout
    long compared = 0;
};
EquivalenceReport equivalence_report(const std::vector<Eigen::VectorXd>& a,
                                     const std::vector<Eigen::VectorXd>& b, double tol = 0.0);

}  // namespace irpe
