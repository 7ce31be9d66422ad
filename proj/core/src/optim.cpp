#include "roofkit/optim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "roofkit/cloud_io.hpp"
#include "roofkit/errors.hpp"
#include "roofkit/parallel.hpp"
#include "roofkit/rng.hpp"
#include "roofkit/spatial_index.hpp"

namespace roofkit {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

class Adam {
 public:
  explicit Adam(std::size_t coords) : m_(coords, 0.0), v_(coords, 0.0) {}

  void step(std::vector<Point3>& x, const Gradient& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < x.size(); ++i) {
      update(x[i].x, grad[i].x, 3 * i + 0, c1, c2, lr);
      update(x[i].y, grad[i].y, 3 * i + 1, c1, c2, lr);
      update(x[i].z, grad[i].z, 3 * i + 2, c1, c2, lr);
    }
  }

 private:
  void update(double& x, double g, std::size_t k, double c1, double c2, double lr) {
    m_[k] = kBeta1 * m_[k] + (1.0 - kBeta1) * g;
    v_[k] = kBeta2 * v_[k] + (1.0 - kBeta2) * g * g;
    x -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + kAdamEps);
  }

  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

double step_size_at(const OptimizerConfig& cfg, std::size_t iter) {
  const std::size_t decays = cfg.step_decay_every == 0 ? 0 : iter / cfg.step_decay_every;
  return cfg.step_size * std::pow(cfg.step_decay, static_cast<double>(decays));
}

void check_config(const OptimizerConfig& cfg) {
  if (cfg.n_points == 0 || cfg.stage1_iters == 0 || cfg.stage2_iters == 0) {
    throw InvalidArgument("optimizer: counts must be >= 1");
  }
  if (!(cfg.step_size > 0.0)) throw InvalidArgument("optimizer: step_size must be positive");
  if (cfg.alpha < 0.0) throw InvalidArgument("optimizer: alpha must be >= 0");
  if (cfg.assignment_refresh == 0) {
    throw InvalidArgument("optimizer: assignment_refresh must be >= 1");
  }
}

double frozen_emd_value(const PointCloud& x, const PointCloud& target,
                        const std::vector<std::size_t>& mapping) {
  std::vector<double> dist(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    dist[i] = distance(x.points[i], target.points[mapping[i]]);
  }
  return pairwise_sum(dist) / static_cast<double>(x.size());
}

Gradient frozen_emd_gradient(const PointCloud& x, const PointCloud& target,
                             const std::vector<std::size_t>& mapping) {
  Gradient grad(x.size(), Vec3{});
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vec3 d = x.points[i] - target.points[mapping[i]];
    const double len = norm(d);
    if (len > 0.0) grad[i] = d * (inv_n / len);
  }
  return grad;
}

// Deformation stage: moves the cloud itself under one loss. Records loss at
// iteration start plus one endpoint entry.
StageResult deform_stage(const PointCloud& init, const PointCloud& target,
                         const OptimizerConfig& cfg, LossKind kind, int stage_tag,
                         std::size_t iters, std::size_t iter_offset) {
  StageResult result;
  result.cloud = init;
  PointCloud& x = result.cloud;

  const SpatialIndex target_index(target);
  AssignmentSolver solver;
  std::vector<std::size_t> mapping;
  Adam adam(3 * x.size());
  Gradient grad;
  double initial = 0.0;

  auto record = [&](std::size_t it, double value) {
    LossBreakdown b = stage_tag == 1 ? make_loss_breakdown(value, 0.0, cfg.alpha)
                                     : make_loss_breakdown(0.0, value, cfg.alpha);
    result.history.push_back({iter_offset + it, stage_tag, b});
  };

  for (std::size_t it = 0; it < iters; ++it) {
    double value;
    if (kind == LossKind::Chamfer) {
      value = chamfer_value_and_gradient(x, target, target_index, grad);
    } else {
      if (it % cfg.assignment_refresh == 0) {
        mapping = solver.solve_relative(x, target, cfg.emd_slack_rel).mapping;
      }
      value = frozen_emd_value(x, target, mapping);
      grad = frozen_emd_gradient(x, target, mapping);
    }
    record(it, value);
    if (it == 0) {
      initial = value;
    } else if (value > cfg.divergence_factor * initial && initial > 0.0) {
      result.diverged = true;
      return result;
    }
    adam.step(x.points, grad, step_size_at(cfg, it));
  }

  const double final_value = kind == LossKind::Chamfer
                                 ? chamfer_distance(x, target)
                                 : frozen_emd_value(x, target, mapping);
  record(iters, final_value);
  return result;
}

// Refinement stage: optimizes residuals r with x_final = x_inter + r under
// alpha * loss(x_inter + r, target).
TwoStageResult residual_stage(const PointCloud& x_inter, const PointCloud& target,
                              const OptimizerConfig& cfg, LossKind kind, double cd_inter_term,
                              std::size_t iter_offset) {
  TwoStageResult result;
  result.x_inter = x_inter;
  result.residuals.assign(x_inter.size(), Vec3{});

  PointCloud x_final = x_inter;
  auto apply_residuals = [&]() {
    for (std::size_t i = 0; i < x_final.points.size(); ++i) {
      x_final.points[i] = x_inter.points[i] + result.residuals[i];
    }
  };

  const SpatialIndex target_index(target);
  AssignmentSolver solver;
  std::vector<std::size_t> mapping;
  Adam adam(3 * x_inter.size());
  Gradient grad;
  double initial = 0.0;

  auto record = [&](std::size_t it, double value) {
    result.history.push_back(
        {iter_offset + it, 2, make_loss_breakdown(cd_inter_term, value, cfg.alpha)});
  };

  auto loss_at = [&](std::size_t it, bool allow_refresh) {
    if (kind == LossKind::Chamfer) {
      return chamfer_value_and_gradient(x_final, target, target_index, grad);
    }
    if (allow_refresh && it % cfg.assignment_refresh == 0) {
      mapping = solver.solve_relative(x_final, target, cfg.emd_slack_rel).mapping;
    }
    grad = frozen_emd_gradient(x_final, target, mapping);
    return frozen_emd_value(x_final, target, mapping);
  };

  if (cfg.alpha == 0.0) {
    // Zero-weight refinement is a no-op; record the endpoint only.
    const double value = loss_at(0, true);
    record(0, value);
    result.x_final = x_final;
    result.final_loss = make_loss_breakdown(cd_inter_term, value, cfg.alpha);
    return result;
  }

  // Residuals are the Adam variables; geometry goes through x_final.
  std::vector<Point3> r_as_points(x_inter.size(), Point3{});
  for (std::size_t it = 0; it < cfg.stage2_iters; ++it) {
    const double value = loss_at(it, true);
    record(it, value);
    if (it == 0) {
      initial = value;
    } else if (value > cfg.divergence_factor * initial && initial > 0.0) {
      result.diverged = true;
      break;
    }
    for (Vec3& g : grad) g = g * cfg.alpha;
    adam.step(r_as_points, grad, step_size_at(cfg, it));
    for (std::size_t i = 0; i < r_as_points.size(); ++i) result.residuals[i] = r_as_points[i];
    apply_residuals();
  }

  if (!result.diverged) {
    const double final_value = loss_at(cfg.stage2_iters, false);
    record(cfg.stage2_iters, final_value);
    result.final_loss = make_loss_breakdown(cd_inter_term, final_value, cfg.alpha);
  } else if (!result.history.empty()) {
    result.final_loss = result.history.back().loss;
  }
  result.x_final = std::move(x_final);
  return result;
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "cd" || name == "chamfer") return LossKind::Chamfer;
  if (name == "emd") return LossKind::Emd;
  throw InvalidArgument("unknown loss '" + name + "' (cd|emd)");
}

std::string to_string(LossKind kind) { return kind == LossKind::Chamfer ? "cd" : "emd"; }

PointCloud init_random_cloud(const BoundingBox& box, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("init_random_cloud: n must be >= 1");
  if (!(box.min.x <= box.max.x && box.min.y <= box.max.y && box.min.z <= box.max.z)) {
    throw InvalidArgument("init_random_cloud: degenerate box (min > max)");
  }
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.push_back({rng.uniform(box.min.x, box.max.x), rng.uniform(box.min.y, box.max.y),
                            rng.uniform(box.min.z, box.max.z)});
  }
  return cloud;
}

StageResult run_stage1(const PointCloud& init, const PointCloud& target,
                       const OptimizerConfig& cfg) {
  check_config(cfg);
  validate_cloud(init, "run_stage1");
  validate_cloud(target, "run_stage1");
  return deform_stage(init, target, cfg, LossKind::Chamfer, 1, cfg.stage1_iters, 0);
}

TwoStageResult run_stage2(const PointCloud& x_inter, const PointCloud& target,
                          const OptimizerConfig& cfg) {
  check_config(cfg);
  validate_cloud(x_inter, "run_stage2");
  validate_cloud(target, "run_stage2");
  if (x_inter.size() != target.size()) {
    throw InvalidArgument("run_stage2: |x_inter| != |target| (resample the target first)");
  }
  const double cd_term = chamfer_distance(x_inter, target);
  return residual_stage(x_inter, target, cfg, LossKind::Emd, cd_term, 0);
}

TwoStageResult run_ordered(const PointCloud& target, const OptimizerConfig& cfg,
                           LossKind stage1_loss, LossKind stage2_loss) {
  check_config(cfg);
  validate_cloud(target, "run_ordered");

  const BoundingBox box = bounding_box(target).inflated(0.10, 0.01);
  const PointCloud init = init_random_cloud(box, cfg.n_points, derive_seed(cfg.seed, "init"));

  PointCloud equalized;
  const auto target_for = [&](LossKind kind) -> const PointCloud& {
    if (kind == LossKind::Chamfer || target.size() == cfg.n_points) return target;
    if (equalized.empty()) {
      equalized = resample(target, cfg.n_points, derive_seed(cfg.seed, "resample"));
    }
    return equalized;
  };

  StageResult stage1 =
      deform_stage(init, target_for(stage1_loss), cfg, stage1_loss, 1, cfg.stage1_iters, 0);

  TwoStageResult result;
  if (stage1.diverged) {
    result.x_inter = std::move(stage1.cloud);
    result.x_final = result.x_inter;
    result.residuals.assign(result.x_inter.size(), Vec3{});
    result.history = std::move(stage1.history);
    result.stage1_entries = result.history.size();
    if (!result.history.empty()) result.final_loss = result.history.back().loss;
    result.diverged = true;
    return result;
  }

  const std::size_t offset = stage1.history.empty() ? 0 : stage1.history.back().iteration + 1;
  const double cd_term = chamfer_distance(stage1.cloud, target);
  TwoStageResult staged =
      residual_stage(stage1.cloud, target_for(stage2_loss), cfg, stage2_loss, cd_term, offset);

  result = std::move(staged);
  result.stage1_entries = stage1.history.size();
  stage1.history.insert(stage1.history.end(), result.history.begin(), result.history.end());
  result.history = std::move(stage1.history);
  return result;
}

TwoStageResult run_two_stage(const PointCloud& target, const OptimizerConfig& cfg) {
  return run_ordered(target, cfg, LossKind::Chamfer, LossKind::Emd);
}

StageResult run_single_loss(const PointCloud& target, const OptimizerConfig& cfg, LossKind loss,
                            const PointCloud* init_override) {
  check_config(cfg);
  validate_cloud(target, "run_single_loss");

  PointCloud working_target = target;
  if (loss == LossKind::Emd && target.size() != cfg.n_points) {
    working_target = resample(target, cfg.n_points, derive_seed(cfg.seed, "resample"));
  }
  PointCloud init;
  if (init_override) {
    init = *init_override;
  } else {
    const BoundingBox box = bounding_box(target).inflated(0.10, 0.01);
    init = init_random_cloud(box, cfg.n_points, derive_seed(cfg.seed, "init"));
  }
  if (loss == LossKind::Emd && init.size() != working_target.size()) {
    throw InvalidArgument("run_single_loss: init size must equal the equalized target size");
  }
  return deform_stage(init, working_target, cfg, loss, 1, cfg.stage1_iters, 0);
}

TwoStageResult run_joint(const PointCloud& target, const OptimizerConfig& cfg) {
  check_config(cfg);
  validate_cloud(target, "run_joint");

  const BoundingBox box = bounding_box(target).inflated(0.10, 0.01);
  PointCloud x = init_random_cloud(box, cfg.n_points, derive_seed(cfg.seed, "init"));
  PointCloud equalized = target.size() == cfg.n_points
                             ? target
                             : resample(target, cfg.n_points, derive_seed(cfg.seed, "resample"));

  TwoStageResult result;
  result.residuals.assign(x.size(), Vec3{});
  PointCloud x_final = x;
  auto apply = [&]() {
    for (std::size_t i = 0; i < x.size(); ++i) {
      x_final.points[i] = x.points[i] + result.residuals[i];
    }
  };

  const SpatialIndex target_index(target);
  AssignmentSolver solver;
  std::vector<std::size_t> mapping;
  const std::size_t iters = cfg.stage1_iters + cfg.stage2_iters;
  Adam adam_x(3 * x.size());
  Adam adam_r(3 * x.size());
  std::vector<Point3> r_as_points(x.size(), Point3{});
  Gradient cd_grad;
  Gradient emd_grad;
  double initial = 0.0;

  for (std::size_t it = 0; it <= iters; ++it) {
    apply();
    const double cd = chamfer_value_and_gradient(x, target, target_index, cd_grad);
    if (it % cfg.assignment_refresh == 0) {
      mapping = solver.solve_relative(x_final, equalized, cfg.emd_slack_rel).mapping;
    }
    const double emd = frozen_emd_value(x_final, equalized, mapping);
    emd_grad = frozen_emd_gradient(x_final, equalized, mapping);
    const LossBreakdown loss = make_loss_breakdown(cd, emd, cfg.alpha);
    result.history.push_back({it, 1, loss});
    if (it == iters) break;
    if (it == 0) {
      initial = loss.total;
    } else if (loss.total > cfg.divergence_factor * initial && initial > 0.0) {
      result.diverged = true;
      break;
    }
    Gradient gx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      gx[i] = cd_grad[i] + emd_grad[i] * cfg.alpha;
    }
    Gradient gr(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) gr[i] = emd_grad[i] * cfg.alpha;
    const double lr = step_size_at(cfg, it);
    adam_x.step(x.points, gx, lr);
    adam_r.step(r_as_points, gr, lr);
    for (std::size_t i = 0; i < x.size(); ++i) result.residuals[i] = r_as_points[i];
  }

  apply();
  result.x_inter = std::move(x);
  result.x_final = std::move(x_final);
  result.stage1_entries = result.history.size();
  if (!result.history.empty()) result.final_loss = result.history.back().loss;
  return result;
}

// ---- Experiment harness ----------------------------------------------------

std::uint64_t cell_seed_for(std::uint64_t root_seed, const std::string& sample_id) {
  return derive_seed(root_seed, "sample:" + sample_id);
}

CellOutcome run_experiment_cell(const GroundTruthRoof& truth, const ArmSpec& arm,
                                const ExperimentConfig& experiment, std::uint64_t cell_seed) {
  CellOutcome outcome;
  outcome.arm = arm.name;
  outcome.sample = truth.id;
  const auto started = std::chrono::steady_clock::now();
  try {
    OptimizerConfig cfg = arm.cfg;
    cfg.seed = cell_seed;

    const PointCloud target =
        experiment.pad_enabled
            ? add_padding(truth.cloud, truth.outline, experiment.pad, derive_seed(cell_seed, "pad"))
            : truth.cloud;

    EvalConfig eval = experiment.eval;
    eval.seed = derive_seed(cell_seed, "eval");

    PointCloud x_final;
    std::optional<PointCloud> x_inter;
    switch (arm.kind) {
      case ArmKind::TwoStage: {
        TwoStageResult r = run_two_stage(target, cfg);
        if (r.diverged) throw Divergence("two-stage run diverged");
        x_inter = std::move(r.x_inter);
        x_final = std::move(r.x_final);
        break;
      }
      case ArmKind::Ordered: {
        TwoStageResult r = run_ordered(target, cfg, arm.stage1, arm.stage2);
        if (r.diverged) throw Divergence("staged run diverged");
        x_inter = std::move(r.x_inter);
        x_final = std::move(r.x_final);
        break;
      }
      case ArmKind::Joint: {
        TwoStageResult r = run_joint(target, cfg);
        if (r.diverged) throw Divergence("joint run diverged");
        x_inter = std::move(r.x_inter);
        x_final = std::move(r.x_final);
        break;
      }
      case ArmKind::CdOnly: {
        StageResult r = run_single_loss(target, cfg, LossKind::Chamfer);
        if (r.diverged) throw Divergence("cd-only run diverged");
        x_final = std::move(r.cloud);
        break;
      }
      case ArmKind::EmdOnly: {
        StageResult r = run_single_loss(target, cfg, LossKind::Emd);
        if (r.diverged) throw Divergence("emd-only run diverged");
        x_final = std::move(r.cloud);
        break;
      }
    }

    outcome.final_report = evaluate_roof(truth, target, x_final, eval);
    outcome.final_report.sample = truth.id;
    if (x_inter) {
      outcome.inter_report = evaluate_roof(truth, target, *x_inter, eval);
      outcome.inter_report->sample = truth.id;
    }
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return outcome;
}

std::vector<CellOutcome> run_experiment_batch(
    const std::vector<GroundTruthRoof>& samples, const std::vector<ArmSpec>& arms,
    const ExperimentConfig& experiment, std::uint64_t root_seed, unsigned jobs,
    const std::function<std::optional<CellOutcome>(const ArmSpec&, const GroundTruthRoof&)>&
        cached,
    const std::function<void(const CellOutcome&)>& completed) {
  if (samples.empty() || arms.empty()) {
    throw InvalidArgument("run_experiment_batch: empty samples or arms");
  }
  const std::size_t total = samples.size() * arms.size();
  std::vector<CellOutcome> cells(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) break;
      const ArmSpec& arm = arms[i / samples.size()];
      const GroundTruthRoof& sample = samples[i % samples.size()];
      std::optional<CellOutcome> hit;
      if (cached) hit = cached(arm, sample);
      if (hit) {
        cells[i] = std::move(*hit);
        continue;
      }
      cells[i] =
          run_experiment_cell(sample, arm, experiment, cell_seed_for(root_seed, sample.id));
      if (completed) completed(cells[i]);
    }
  };

  const unsigned n_jobs = std::max(1u, jobs);
  if (n_jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < n_jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return cells;
}

std::vector<ArmSpec> alpha_grid(const OptimizerConfig& base, const std::vector<double>& alphas) {
  if (alphas.empty()) throw InvalidArgument("alpha_grid: empty grid");
  std::vector<ArmSpec> arms;
  for (double a : alphas) {
    ArmSpec arm;
    arm.name = "alpha=" + format_double(a);
    arm.kind = ArmKind::TwoStage;
    arm.cfg = base;
    arm.cfg.alpha = a;
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<ArmSpec> loss_order_grid(const OptimizerConfig& base) {
  std::vector<ArmSpec> arms;
  const std::pair<LossKind, LossKind> orders[] = {
      {LossKind::Chamfer, LossKind::Emd},
      {LossKind::Chamfer, LossKind::Chamfer},
      {LossKind::Emd, LossKind::Emd},
      {LossKind::Emd, LossKind::Chamfer},
  };
  for (const auto& [l1, l2] : orders) {
    ArmSpec arm;
    arm.name = to_string(l1) + "-" + to_string(l2);
    arm.kind = ArmKind::Ordered;
    arm.stage1 = l1;
    arm.stage2 = l2;
    arm.cfg = base;
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<ArmSpec> n_points_grid(const OptimizerConfig& base,
                                   const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) throw InvalidArgument("n_points_grid: empty grid");
  std::vector<ArmSpec> arms;
  for (std::size_t n : sizes) {
    ArmSpec arm;
    arm.name = "n=" + std::to_string(n);
    arm.kind = ArmKind::TwoStage;
    arm.cfg = base;
    arm.cfg.n_points = n;
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<AblationRow> aggregate_cells(const std::vector<ArmSpec>& arms,
                                         const std::vector<CellOutcome>& cells) {
  std::vector<AblationRow> rows;
  for (const ArmSpec& arm : arms) {
    AblationRow row;
    row.arm = arm.name;

    struct Acc {
      double sum = 0.0;
      std::size_t n = 0;
      void add(const std::optional<double>& v) {
        if (v) {
          sum += *v;
          ++n;
        }
      }
      std::optional<double> mean() const {
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
      }
    };
    Acc emd_pad, cd_pad, emd, cd, iou, cm, cr, q;
    double seconds = 0.0;

    for (const CellOutcome& cell : cells) {
      if (cell.arm != arm.name) continue;
      if (!cell.ok) {
        ++row.cells_failed;
        continue;
      }
      ++row.cells_ok;
      seconds += cell.seconds;
      const RoofMetrics& m = cell.final_report.metrics;
      emd_pad.add(m.emd_with_pad);
      cd_pad.add(m.cd_with_pad);
      emd.add(m.emd);
      cd.add(m.cd);
      iou.add(m.outline_iou);
      cm.add(m.completeness);
      cr.add(m.correctness);
      q.add(m.quality);
    }
    row.mean.emd_with_pad = emd_pad.mean();
    row.mean.cd_with_pad = cd_pad.mean();
    row.mean.emd = emd.mean();
    row.mean.cd = cd.mean();
    row.mean.outline_iou = iou.mean();
    row.mean.completeness = cm.mean();
    row.mean.correctness = cr.mean();
    row.mean.quality = q.mean();
    row.mean_seconds = row.cells_ok > 0 ? seconds / static_cast<double>(row.cells_ok) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace roofkit
