#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "roofkit/dataset.hpp"
#include "roofkit/geometry.hpp"
#include "roofkit/metrics.hpp"
#include "roofkit/roofeval.hpp"

namespace roofkit {

enum class LossKind { Chamfer, Emd };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct OptimizerConfig {
  std::size_t n_points = 3000;
  double alpha = 1.0;               // weight of the refinement term
  std::size_t stage1_iters = 500;
  std::size_t stage2_iters = 300;
  double step_size = 0.05;          // Adam base step, halved every step_decay_every iterations
  std::size_t step_decay_every = 150;
  double step_decay = 0.5;
  std::size_t assignment_refresh = 5;  // iterations between assignment recomputes
  double emd_slack_rel = 1e-4;         // auction slack as a fraction of the max pairwise cost
  double divergence_factor = 10.0;     // abort when loss exceeds this multiple of the start
  std::uint64_t seed = 0;
};

/// One loss record. The breakdown keeps the staged-loss shape: the
/// deformation-stage term lives in cd_inter, the refinement-stage term in
/// emd_final, and total = cd_inter + alpha * emd_final holds bit-exactly.
struct HistoryEntry {
  std::size_t iteration = 0;  // global across stages
  int stage = 1;
  LossBreakdown loss;
};

struct StageResult {
  PointCloud cloud;
  std::vector<HistoryEntry> history;
  bool diverged = false;
};

struct TwoStageResult {
  PointCloud x_inter;
  PointCloud x_final;            // x_inter + residuals, term by term
  std::vector<Vec3> residuals;
  std::vector<HistoryEntry> history;
  std::size_t stage1_entries = 0;
  LossBreakdown final_loss;
  bool diverged = false;
};

/// Uniform cloud in the box; callers pass the target's bounding box inflated
/// by 10%.
PointCloud init_random_cloud(const BoundingBox& box, std::size_t n, std::uint64_t seed);

/// Stage 1: gradient descent on the point coordinates under the Chamfer loss
/// (adaptive per-coordinate moments, decay rates 0.9 / 0.999).
StageResult run_stage1(const PointCloud& init, const PointCloud& target,
                       const OptimizerConfig& cfg);

/// Stage 2: optimizes per-point residuals added to x_inter under
/// alpha-weighted assignment loss; the assignment is refreshed every
/// cfg.assignment_refresh iterations and frozen in between. Requires
/// |x_inter| == |target|.
TwoStageResult run_stage2(const PointCloud& x_inter, const PointCloud& target,
                          const OptimizerConfig& cfg);

/// init_random_cloud + run_stage1 + run_stage2 against one target. The
/// stage-2 target is resampled to n_points when sizes differ.
TwoStageResult run_two_stage(const PointCloud& target, const OptimizerConfig& cfg);

/// Generalized staged run for the loss-order ablation arms.
TwoStageResult run_ordered(const PointCloud& target, const OptimizerConfig& cfg,
                           LossKind stage1_loss, LossKind stage2_loss);

/// One-stage baseline under a single loss (stage1_iters iterations).
/// init_override substitutes the random initial cloud, for tests.
StageResult run_single_loss(const PointCloud& target, const OptimizerConfig& cfg, LossKind loss,
                            const PointCloud* init_override = nullptr);

/// Joint objective: both the cloud and the residuals optimized at once under
/// chamfer(x, y) + alpha * emd(y, x + r).
TwoStageResult run_joint(const PointCloud& target, const OptimizerConfig& cfg);

// ---- Experiment harness ----------------------------------------------------

enum class ArmKind { TwoStage, CdOnly, EmdOnly, Ordered, Joint };

struct ArmSpec {
  std::string name;
  ArmKind kind = ArmKind::TwoStage;
  LossKind stage1 = LossKind::Chamfer;
  LossKind stage2 = LossKind::Emd;
  OptimizerConfig cfg;
};

struct ExperimentConfig {
  PadConfig pad;
  bool pad_enabled = true;
  EvalConfig eval;
};

struct CellOutcome {
  std::string arm;
  std::string sample;
  bool ok = false;
  std::string error;
  RoofReport final_report;
  std::optional<RoofReport> inter_report;  // x_inter evaluation for staged arms
  double seconds = 0.0;                    // wall clock; kept out of deterministic tables
};

/// Pads the sample, runs the arm, evaluates x_final (and x_inter when the arm
/// is staged) against the truth. All randomness flows from cell_seed.
CellOutcome run_experiment_cell(const GroundTruthRoof& truth, const ArmSpec& arm,
                                const ExperimentConfig& experiment, std::uint64_t cell_seed);

/// Stable per-sample seed: arms share it so they start from the same initial
/// cloud and padded target.
std::uint64_t cell_seed_for(std::uint64_t root_seed, const std::string& sample_id);

/// Runs arms x samples, optionally on several worker threads. `cached`
/// short-circuits a cell (resume support); `completed` observes each finished
/// cell. Results are positioned by (arm, sample) index, so the output is
/// independent of the job count.
std::vector<CellOutcome> run_experiment_batch(
    const std::vector<GroundTruthRoof>& samples, const std::vector<ArmSpec>& arms,
    const ExperimentConfig& experiment, std::uint64_t root_seed, unsigned jobs,
    const std::function<std::optional<CellOutcome>(const ArmSpec&, const GroundTruthRoof&)>&
        cached = nullptr,
    const std::function<void(const CellOutcome&)>& completed = nullptr);

/// Ablation grids in the shape of the experiment tables.
std::vector<ArmSpec> alpha_grid(const OptimizerConfig& base, const std::vector<double>& alphas);
std::vector<ArmSpec> loss_order_grid(const OptimizerConfig& base);
std::vector<ArmSpec> n_points_grid(const OptimizerConfig& base,
                                   const std::vector<std::size_t>& sizes);

struct AblationRow {
  std::string arm;
  std::size_t cells_ok = 0;
  std::size_t cells_failed = 0;
  RoofMetrics mean;      // per-metric mean over defined values
  double mean_seconds = 0.0;
};

/// Per-arm means, arm order preserved.
std::vector<AblationRow> aggregate_cells(const std::vector<ArmSpec>& arms,
                                         const std::vector<CellOutcome>& cells);

}  // namespace roofkit
