#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "config.hpp"
#include "roofkit/cloud_io.hpp"
#include "roofkit/dataset.hpp"
#include "roofkit/errors.hpp"
#include "roofkit/optim.hpp"
#include "roofkit/report.hpp"
#include "roofkit/rng.hpp"
#include "roofkit/roofeval.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace roofkit;
using namespace roofkit::cli;

namespace {

// Exit codes are a stable contract: 0 ok, 1 usage, 2 data, 3 divergence.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

std::string timestamp_header() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return std::string("# generated ") + buf + "\n";
}

void echo_config(const RunConfig& cfg, const fs::path& outdir) {
  write_file_atomic(outdir / "config_resolved.cfg", cfg.resolved());
}

struct ManifestEntry {
  std::string id;
  fs::path ply;
  fs::path sidecar;
  std::string kind;
  std::uint64_t seed = 0;
};

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  std::vector<ManifestEntry> entries;
  const fs::path base = path.parent_path();
  for (const auto& s : j.at("samples")) {
    ManifestEntry e;
    e.id = s.at("id").get<std::string>();
    e.ply = base / s.at("ply").get<std::string>();
    e.sidecar = base / s.at("sidecar").get<std::string>();
    e.kind = s.value("kind", std::string{});
    e.seed = s.value("seed", 0ull);
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw IoError(path.string() + ": empty manifest");
  return entries;
}

std::vector<GroundTruthRoof> load_samples(const std::vector<ManifestEntry>& entries) {
  std::vector<GroundTruthRoof> samples;
  samples.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    GroundTruthRoof truth = load_ground_truth(e.ply, e.sidecar);
    truth.id = e.id;
    samples.push_back(std::move(truth));
  }
  return samples;
}

// ---- gen --------------------------------------------------------------------

int cmd_gen(const RunConfig& cfg, const fs::path& spec_path, const fs::path& outdir) {
  const std::vector<RoofSpec> specs = parse_roof_specs(spec_path);

  std::map<std::uint64_t, std::size_t> seed_seen;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto [it, fresh] = seed_seen.emplace(specs[i].seed, i);
    if (!fresh) {
      std::cerr << "warning: entries " << it->second + 1 << " and " << i + 1
                << " share seed " << specs[i].seed << "\n";
    }
  }

  fs::create_directories(outdir);
  json manifest;
  manifest["samples"] = json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    GroundTruthRoof roof = generate_roof(specs[i]);
    char id[64];
    std::snprintf(id, sizeof id, "r%03zu_%s", i, to_string(specs[i].kind).c_str());
    roof.id = id;
    const std::string ply = std::string(id) + ".ply";
    const std::string sidecar = std::string(id) + ".json";
    save_ground_truth(roof, outdir / ply, outdir / sidecar);
    manifest["samples"].push_back({{"id", roof.id},
                                   {"ply", ply},
                                   {"sidecar", sidecar},
                                   {"kind", to_string(specs[i].kind)},
                                   {"seed", specs[i].seed}});
  }
  write_file_atomic(outdir / "manifest.json", manifest.dump(2) + "\n");
  echo_config(cfg, outdir);
  std::cout << "generated " << specs.size() << " samples in " << outdir.string() << "\n";
  return kExitOk;
}

// ---- pad --------------------------------------------------------------------

int cmd_pad(const RunConfig& cfg, const fs::path& ply, const fs::path& sidecar,
            const fs::path& out) {
  const GroundTruthRoof truth = load_ground_truth(ply, sidecar);
  const PointCloud padded =
      add_padding(truth.cloud, truth.outline, cfg.pad, derive_seed(cfg.seed, "pad"));
  save_point_cloud(padded, out, format_from_extension(out));
  std::cout << "padded " << truth.cloud.size() << " -> " << padded.size() << " points\n";
  return kExitOk;
}

// ---- optimize ---------------------------------------------------------------

int cmd_optimize(const RunConfig& cfg_in, const fs::path& sample, fs::path sidecar,
                 const fs::path& outdir, const std::string& mode) {
  RunConfig cfg = cfg_in;
  fs::create_directories(outdir);

  PointCloud target;
  std::optional<GroundTruthRoof> truth;
  if (sidecar.empty()) {
    const fs::path guess = fs::path(sample).replace_extension(".json");
    if (fs::exists(guess)) sidecar = guess;
  }
  if (!sidecar.empty() && fs::exists(sidecar)) {
    truth = load_ground_truth(sample, sidecar);
  }
  if (truth && cfg.pad_enabled) {
    target = add_padding(truth->cloud, truth->outline, cfg.pad, derive_seed(cfg.seed, "pad"));
  } else {
    target = truth ? truth->cloud : load_point_cloud(sample, format_from_extension(sample));
    if (cfg.pad_enabled && !truth) {
      std::cerr << "warning: no sidecar outline found, optimizing against the raw cloud\n";
    }
  }

  OptimizerConfig ocfg = cfg.optim;
  ocfg.seed = derive_seed(cfg.seed, "optimize");

  std::vector<HistoryEntry> history;
  PointCloud x_final;
  std::optional<PointCloud> x_inter;
  bool diverged = false;

  if (mode == "two-stage" || mode == "cd-emd" || mode == "emd-cd" || mode == "cd-cd" ||
      mode == "emd-emd") {
    LossKind l1 = LossKind::Chamfer, l2 = LossKind::Emd;
    if (mode == "emd-cd") {
      l1 = LossKind::Emd;
      l2 = LossKind::Chamfer;
    } else if (mode == "cd-cd") {
      l2 = LossKind::Chamfer;
    } else if (mode == "emd-emd") {
      l1 = LossKind::Emd;
    }
    TwoStageResult r = run_ordered(target, ocfg, l1, l2);
    history = std::move(r.history);
    x_inter = std::move(r.x_inter);
    x_final = std::move(r.x_final);
    diverged = r.diverged;
  } else if (mode == "joint") {
    TwoStageResult r = run_joint(target, ocfg);
    history = std::move(r.history);
    x_inter = std::move(r.x_inter);
    x_final = std::move(r.x_final);
    diverged = r.diverged;
  } else if (mode == "cd-only" || mode == "emd-only") {
    StageResult r = run_single_loss(
        target, ocfg, mode == "cd-only" ? LossKind::Chamfer : LossKind::Emd);
    history = std::move(r.history);
    x_final = std::move(r.cloud);
    diverged = r.diverged;
  } else {
    throw InvalidArgument("unknown --mode '" + mode + "'");
  }

  write_file_atomic(outdir / "history.csv", timestamp_header() + history_csv(history));
  echo_config(cfg, outdir);
  if (x_inter) save_point_cloud(*x_inter, outdir / "x_inter.ply", CloudFormat::PlyAscii);
  save_point_cloud(x_final, outdir / "x_final.ply", CloudFormat::PlyAscii);

  if (diverged) {
    std::cerr << "divergence guard tripped; partial history kept\n";
    return kExitDivergence;
  }
  std::cout << "wrote " << (outdir / "x_final.ply").string() << "\n";
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

PadPolicy pad_policy_from_flags(bool with_pad, bool no_pad) {
  if (with_pad && no_pad) throw InvalidArgument("--with-pad and --no-pad are exclusive");
  if (with_pad) return PadPolicy::WithPad;
  if (no_pad) return PadPolicy::NoPad;
  return PadPolicy::Auto;
}

int cmd_eval_single(const RunConfig& cfg, const fs::path& gt_path, const fs::path& pred_path,
                    fs::path gt_sidecar, const fs::path& outdir, PadPolicy policy,
                    bool gt_planes_truth) {
  fs::create_directories(outdir);
  EvalConfig ecfg = cfg.eval;
  ecfg.pad = policy;
  ecfg.seed = derive_seed(cfg.seed, "eval");
  const PointCloud pred = load_point_cloud(pred_path, format_from_extension(pred_path));

  RoofReport report;
  if (gt_sidecar.empty()) {
    const fs::path guess = fs::path(gt_path).replace_extension(".json");
    if (fs::exists(guess)) gt_sidecar = guess;
  }
  if (!gt_sidecar.empty() && fs::exists(gt_sidecar)) {
    GroundTruthRoof truth = load_ground_truth(gt_path, gt_sidecar);
    if (gt_planes_truth) ecfg.gt_planes = GtPlanes::TruthLabels;
    report = evaluate_roof(truth, pred, ecfg);
    report.sample = gt_path.stem().string();
  } else {
    if (gt_planes_truth) {
      throw InvalidArgument("--gt-planes truth requires a sidecar with facet labels");
    }
    const PointCloud gt = load_point_cloud(gt_path, format_from_extension(gt_path));
    report = evaluate_roof(gt, pred, ecfg);
    report.sample = gt_path.stem().string();
  }

  write_file_atomic(outdir / "report.json", report_json(report));
  write_file_atomic(outdir / "report.csv", timestamp_header() + batch_report_csv({report}));
  echo_config(cfg, outdir);
  for (const std::string& n : report.notes) std::cerr << "note: " << n << "\n";
  std::cout << batch_report_csv({report});
  return kExitOk;
}

int cmd_eval_batch(const RunConfig& cfg, const fs::path& manifest_path, const fs::path& pred_dir,
                   const fs::path& outdir, PadPolicy policy) {
  fs::create_directories(outdir);
  const auto entries = load_manifest(manifest_path);
  std::vector<RoofReport> reports;
  for (const ManifestEntry& e : entries) {
    GroundTruthRoof truth = load_ground_truth(e.ply, e.sidecar);
    truth.id = e.id;
    fs::path pred_path = pred_dir / (e.id + "_final.ply");
    if (!fs::exists(pred_path)) pred_path = pred_dir / (e.id + ".ply");
    if (!fs::exists(pred_path)) {
      throw IoError("no prediction for sample " + e.id + " under " + pred_dir.string());
    }
    const PointCloud pred = load_point_cloud(pred_path, CloudFormat::PlyAscii);

    EvalConfig ecfg = cfg.eval;
    ecfg.pad = policy;
    ecfg.seed = derive_seed(cfg.seed, "eval", fnv1a64(e.id));
    if (policy != PadPolicy::NoPad && cfg.pad_enabled) {
      // Rebuild the padded target the optimizer saw so the with-pad columns
      // compare against the training input.
      const PointCloud padded =
          add_padding(truth.cloud, truth.outline, cfg.pad, derive_seed(cfg.seed, "pad"));
      ecfg.pad = PadPolicy::WithPad;
      RoofReport r = evaluate_roof(truth, padded, pred, ecfg);
      r.sample = e.id;
      reports.push_back(std::move(r));
    } else {
      RoofReport r = evaluate_roof(truth, pred, ecfg);
      r.sample = e.id;
      reports.push_back(std::move(r));
    }
  }
  write_file_atomic(outdir / "report.json", batch_report_json(reports));
  write_file_atomic(outdir / "report.csv", timestamp_header() + batch_report_csv(reports));
  echo_config(cfg, outdir);
  std::cout << "evaluated " << reports.size() << " samples\n";
  return kExitOk;
}

// ---- ablate -----------------------------------------------------------------

std::vector<ArmSpec> parse_grid(const std::string& grid, const OptimizerConfig& base) {
  const auto eq = grid.find('=');
  const std::string kind = eq == std::string::npos ? grid : grid.substr(0, eq);
  std::vector<std::string> values;
  if (eq != std::string::npos) {
    std::stringstream ss(grid.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(item);
  }
  if (kind == "order") return loss_order_grid(base);
  if (kind == "alpha") {
    std::vector<double> alphas;
    for (const std::string& v : values) alphas.push_back(std::stod(v));
    return alpha_grid(base, alphas);
  }
  if (kind == "npoints") {
    std::vector<std::size_t> sizes;
    for (const std::string& v : values) sizes.push_back(std::stoull(v));
    return n_points_grid(base, sizes);
  }
  throw InvalidArgument("unknown grid '" + grid + "' (alpha=..|order|npoints=..)");
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  }
  return out;
}

int cmd_ablate(const RunConfig& cfg, const fs::path& manifest_path, const std::string& grid,
               const fs::path& outdir, unsigned jobs) {
  fs::create_directories(outdir / "cells");
  const auto samples = load_samples(load_manifest(manifest_path));
  const std::vector<ArmSpec> arms = parse_grid(grid, cfg.optim);

  ExperimentConfig experiment;
  experiment.pad = cfg.pad;
  experiment.pad_enabled = cfg.pad_enabled;
  experiment.eval = cfg.eval;

  auto cell_path = [&](const std::string& arm, const std::string& sample) {
    return outdir / "cells" / (sanitize(arm) + "__" + sanitize(sample) + ".json");
  };
  auto cached = [&](const ArmSpec& arm,
                    const GroundTruthRoof& sample) -> std::optional<CellOutcome> {
    const fs::path path = cell_path(arm.name, sample.id);
    if (!fs::exists(path)) return std::nullopt;
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return cell_from_json(buf.str());
    } catch (const std::exception&) {
      return std::nullopt;  // corrupt cache entry, recompute
    }
  };
  auto completed = [&](const CellOutcome& cell) {
    write_file_atomic(cell_path(cell.arm, cell.sample), cell_json(cell));
  };

  const auto cells =
      run_experiment_batch(samples, arms, experiment, cfg.seed, jobs, cached, completed);
  for (const CellOutcome& c : cells) {
    if (!c.ok) std::cerr << "cell failed: " << c.arm << " / " << c.sample << ": " << c.error << "\n";
  }

  const auto rows = aggregate_cells(arms, cells);
  write_file_atomic(outdir / "table.csv", timestamp_header() + ablation_csv(rows));
  write_file_atomic(outdir / "table.json", ablation_json(rows));
  write_file_atomic(outdir / "timings.csv", ablation_timings_csv(rows));

  json combined;
  combined["rows"] = json::parse(ablation_json(rows));
  combined["cells"] = json::array();
  for (const CellOutcome& c : cells) combined["cells"].push_back(json::parse(cell_json(c)));
  write_file_atomic(outdir / "combined.json", combined.dump(2) + "\n");
  echo_config(cfg, outdir);
  std::cout << ablation_csv(rows);
  return kExitOk;
}

// ---- plot -------------------------------------------------------------------

std::vector<HistoryEntry> parse_history_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<HistoryEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("iteration", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 5) throw IoError(path.string() + ": bad history row '" + line + "'");
    HistoryEntry e;
    e.iteration = std::stoull(fields[0]);
    e.stage = std::stoi(fields[1]);
    const double cd = fields[2].empty() ? 0.0 : std::stod(fields[2]);
    const double emd = fields[3].empty() ? 0.0 : std::stod(fields[3]);
    e.loss = {cd, emd, 0.0, std::stod(fields[4])};
    entries.push_back(e);
  }
  if (entries.empty()) throw IoError(path.string() + ": no history rows");
  return entries;
}

int cmd_plot(const RunConfig& cfg, const std::string& kind, const std::vector<fs::path>& inputs,
             const fs::path& out) {
  std::string svg;
  if (kind == "history") {
    if (inputs.size() != 1) throw InvalidArgument("plot history expects one history.csv");
    svg = svg_loss_curves(parse_history_csv(inputs[0]));
  } else if (kind == "density") {
    if (inputs.size() < 2) {
      throw InvalidArgument("plot density expects gt.ply pred.ply [pred2.ply ...]");
    }
    const PointCloud gt = load_point_cloud(inputs[0], format_from_extension(inputs[0]));
    std::vector<BoxSeries> series;
    for (std::size_t i = 1; i < inputs.size(); ++i) {
      const PointCloud pred = load_point_cloud(inputs[i], format_from_extension(inputs[i]));
      const DensityProfile profile = density_profile(gt, pred, cfg.eval.density_radius);
      if (i == 1) series.push_back({inputs[0].stem().string(), profile.counts_gt});
      series.push_back({inputs[i].stem().string(), profile.counts_pred});
    }
    svg = svg_density_boxplot(series, cfg.eval.density_radius);
  } else if (kind == "cloud-topdown") {
    if (inputs.size() != 1) throw InvalidArgument("plot cloud-topdown expects one cloud file");
    svg = svg_cloud_topdown(load_point_cloud(inputs[0], format_from_extension(inputs[0])));
  } else {
    throw InvalidArgument("unknown plot kind '" + kind + "'");
  }
  write_file_atomic(out, svg);
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-cloud toolkit for roof reconstruction experiments"};
  app.require_subcommand(1);

  std::optional<fs::path> config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--config", config_path, "key = value config file")->expected(1);
  app.add_option("--set", overrides, "override a config key (key=value), repeatable");
  app.add_option("--seed", seed_flag, "root seed (overrides config)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic roof samples from a spec file");
  fs::path gen_spec, gen_out;
  gen->add_option("specfile", gen_spec, "roof spec file")->required();
  gen->add_option("outdir", gen_out, "output directory")->required();

  // pad
  auto* pad = app.add_subcommand("pad", "pad a sample cloud with a ring of low points");
  fs::path pad_ply, pad_sidecar, pad_out;
  pad->add_option("--sample", pad_ply, "sample PLY")->required();
  pad->add_option("--sidecar", pad_sidecar, "sample sidecar JSON")->required();
  pad->add_option("--out", pad_out, "output cloud path")->required();

  // optimize
  auto* opt = app.add_subcommand("optimize", "fit a point cloud to one sample");
  fs::path opt_sample, opt_sidecar, opt_out;
  std::string opt_mode = "two-stage";
  opt->add_option("sample", opt_sample, "sample PLY")->required();
  opt->add_option("--sidecar", opt_sidecar, "sample sidecar JSON (default: sample stem + .json)");
  opt->add_option("--outdir", opt_out, "output directory")->required();
  opt->add_option("--mode", opt_mode,
                  "two-stage|cd-only|emd-only|joint|cd-emd|emd-cd|cd-cd|emd-emd");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a prediction against ground truth");
  fs::path ev_gt, ev_pred, ev_gt_sidecar, ev_out, ev_manifest, ev_pred_dir;
  bool ev_with_pad = false, ev_no_pad = false, ev_truth_planes = false;
  ev->add_option("--gt", ev_gt, "ground-truth cloud");
  ev->add_option("--pred", ev_pred, "predicted cloud");
  ev->add_option("--gt-sidecar", ev_gt_sidecar, "ground-truth sidecar JSON");
  ev->add_option("--manifest", ev_manifest, "manifest for batch evaluation");
  ev->add_option("--pred-dir", ev_pred_dir, "directory of predictions for batch mode");
  ev->add_option("--outdir", ev_out, "output directory")->required();
  ev->add_flag("--with-pad", ev_with_pad, "force the padded protocol");
  ev->add_flag("--no-pad", ev_no_pad, "inputs are unpadded");
  ev->add_flag("--gt-planes-truth", ev_truth_planes,
               "use generator facet labels as the ground-truth plane set");

  // ablate
  auto* ab = app.add_subcommand("ablate", "run an ablation grid over a sample batch");
  fs::path ab_manifest, ab_out;
  std::string ab_grid;
  unsigned ab_jobs = 1;
  ab->add_option("--manifest", ab_manifest, "sample manifest")->required();
  ab->add_option("--grid", ab_grid, "alpha=v1,v2,..|order|npoints=n1,n2,..")->required();
  ab->add_option("--outdir", ab_out, "output directory")->required();
  ab->add_option("--jobs", ab_jobs, "worker threads");

  // plot
  auto* pl = app.add_subcommand("plot", "emit an SVG plot");
  std::string pl_kind;
  std::vector<fs::path> pl_inputs;
  fs::path pl_out;
  pl->add_option("--kind", pl_kind, "history|density|cloud-topdown")->required();
  pl->add_option("--out", pl_out, "output SVG path")->required();
  pl->add_option("inputs", pl_inputs, "input files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load_config(config_path, overrides);
    if (seed_flag) cfg.seed = *seed_flag;

    if (gen->parsed()) return cmd_gen(cfg, gen_spec, gen_out);
    if (pad->parsed()) return cmd_pad(cfg, pad_ply, pad_sidecar, pad_out);
    if (opt->parsed()) return cmd_optimize(cfg, opt_sample, opt_sidecar, opt_out, opt_mode);
    if (ev->parsed()) {
      const PadPolicy policy = pad_policy_from_flags(ev_with_pad, ev_no_pad);
      if (!ev_manifest.empty()) {
        if (ev_pred_dir.empty()) throw InvalidArgument("batch eval needs --pred-dir");
        return cmd_eval_batch(cfg, ev_manifest, ev_pred_dir, ev_out, policy);
      }
      if (ev_gt.empty() || ev_pred.empty()) {
        throw InvalidArgument("eval needs --gt and --pred (or --manifest with --pred-dir)");
      }
      return cmd_eval_single(cfg, ev_gt, ev_pred, ev_gt_sidecar, ev_out, policy, ev_truth_planes);
    }
    if (ab->parsed()) return cmd_ablate(cfg, ab_manifest, ab_grid, ab_out, ab_jobs);
    if (pl->parsed()) return cmd_plot(cfg, pl_kind, pl_inputs, pl_out);
    return kExitUsage;
  } catch (const Divergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
