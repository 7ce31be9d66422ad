#include "roofkit/report.hpp"

#include <sstream>

#include <json.hpp>

#include "roofkit/cloud_io.hpp"
#include "roofkit/errors.hpp"

namespace roofkit {

namespace {

using nlohmann::json;

json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json metrics_json(const RoofMetrics& m) {
  return json{{"emd_with_pad", opt_json(m.emd_with_pad)},
              {"cd_with_pad", opt_json(m.cd_with_pad)},
              {"emd", opt_json(m.emd)},
              {"cd", opt_json(m.cd)},
              {"outline_iou", opt_json(m.outline_iou)},
              {"completeness", opt_json(m.completeness)},
              {"correctness", opt_json(m.correctness)},
              {"quality", opt_json(m.quality)}};
}

RoofMetrics metrics_from(const json& j) {
  RoofMetrics m;
  m.emd_with_pad = opt_from(j, "emd_with_pad");
  m.cd_with_pad = opt_from(j, "cd_with_pad");
  m.emd = opt_from(j, "emd");
  m.cd = opt_from(j, "cd");
  m.outline_iou = opt_from(j, "outline_iou");
  m.completeness = opt_from(j, "completeness");
  m.correctness = opt_from(j, "correctness");
  m.quality = opt_from(j, "quality");
  return m;
}

json report_to_json(const RoofReport& r) {
  json matches = json::array();
  for (const PlanePair& p : r.matches.pairs) {
    matches.push_back({{"gt", p.gt}, {"pred", p.pred}, {"iou", p.iou}});
  }
  return json{{"sample", r.sample},
              {"metrics", metrics_json(r.metrics)},
              {"planes", {{"gt", r.gt_planes}, {"pred", r.pred_planes}}},
              {"matches",
               {{"tp", r.matches.tp}, {"fp", r.matches.fp}, {"fn", r.matches.fn},
                {"pairs", matches}}},
              {"density",
               {{"radius", r.density.radius},
                {"mean_gt", r.density.mean_gt},
                {"var_gt", r.density.var_gt},
                {"mean_pred", r.density.mean_pred},
                {"var_pred", r.density.var_pred}}},
              {"notes", r.notes}};
}

RoofReport report_from_json(const json& j) {
  RoofReport r;
  r.sample = j.value("sample", std::string{});
  r.metrics = metrics_from(j.at("metrics"));
  if (j.contains("planes")) {
    r.gt_planes = j["planes"].value("gt", 0u);
    r.pred_planes = j["planes"].value("pred", 0u);
  }
  if (j.contains("matches")) {
    r.matches.tp = j["matches"].value("tp", 0u);
    r.matches.fp = j["matches"].value("fp", 0u);
    r.matches.fn = j["matches"].value("fn", 0u);
    if (j["matches"].contains("pairs")) {
      for (const auto& p : j["matches"]["pairs"]) {
        r.matches.pairs.push_back({p.value("gt", 0u), p.value("pred", 0u), p.value("iou", 0.0)});
      }
    }
  }
  if (j.contains("density")) {
    const auto& d = j["density"];
    r.density.radius = d.value("radius", 0.0);
    r.density.mean_gt = d.value("mean_gt", 0.0);
    r.density.var_gt = d.value("var_gt", 0.0);
    r.density.mean_pred = d.value("mean_pred", 0.0);
    r.density.var_pred = d.value("var_pred", 0.0);
  }
  if (j.contains("notes")) r.notes = j["notes"].get<std::vector<std::string>>();
  return r;
}

constexpr const char* kMetricColumns =
    "emd_with_pad,cd_with_pad,emd_no_pad,cd_no_pad,outline_iou,completeness,correctness,quality";

void append_metric_fields(std::ostringstream& out, const RoofMetrics& m) {
  auto field = [&out](const std::optional<double>& v) {
    out << ',';
    if (v) out << format_double(*v);
  };
  field(m.emd_with_pad);
  field(m.cd_with_pad);
  field(m.emd);
  field(m.cd);
  field(m.outline_iou);
  field(m.completeness);
  field(m.correctness);
  field(m.quality);
}

RoofMetrics mean_metrics(const std::vector<RoofReport>& reports) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  Acc acc[8];
  for (const RoofReport& r : reports) {
    const std::optional<double>* fields[8] = {
        &r.metrics.emd_with_pad, &r.metrics.cd_with_pad, &r.metrics.emd,        &r.metrics.cd,
        &r.metrics.outline_iou,  &r.metrics.completeness, &r.metrics.correctness,
        &r.metrics.quality};
    for (int i = 0; i < 8; ++i) {
      if (*fields[i]) {
        acc[i].sum += **fields[i];
        ++acc[i].n;
      }
    }
  }
  auto mean = [&acc](int i) -> std::optional<double> {
    if (acc[i].n == 0) return std::nullopt;
    return acc[i].sum / static_cast<double>(acc[i].n);
  };
  RoofMetrics m;
  m.emd_with_pad = mean(0);
  m.cd_with_pad = mean(1);
  m.emd = mean(2);
  m.cd = mean(3);
  m.outline_iou = mean(4);
  m.completeness = mean(5);
  m.correctness = mean(6);
  m.quality = mean(7);
  return m;
}

}  // namespace

std::string report_json(const RoofReport& report) { return report_to_json(report).dump(2) + "\n"; }

std::string batch_report_csv(const std::vector<RoofReport>& reports) {
  std::ostringstream out;
  out << "sample," << kMetricColumns << "\n";
  for (const RoofReport& r : reports) {
    out << r.sample;
    append_metric_fields(out, r.metrics);
    out << "\n";
  }
  out << "mean";
  append_metric_fields(out, mean_metrics(reports));
  out << "\n";
  return out.str();
}

std::string batch_report_json(const std::vector<RoofReport>& reports) {
  json j;
  j["samples"] = json::array();
  for (const RoofReport& r : reports) j["samples"].push_back(report_to_json(r));
  j["mean"] = metrics_json(mean_metrics(reports));
  return j.dump(2) + "\n";
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "arm,cells_ok,cells_failed," << kMetricColumns << "\n";
  for (const AblationRow& row : rows) {
    out << row.arm << ',' << row.cells_ok << ',' << row.cells_failed;
    append_metric_fields(out, row.mean);
    out << "\n";
  }
  return out.str();
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const AblationRow& row : rows) {
    j.push_back({{"arm", row.arm},
                 {"cells_ok", row.cells_ok},
                 {"cells_failed", row.cells_failed},
                 {"mean", metrics_json(row.mean)}});
  }
  return j.dump(2) + "\n";
}

std::string ablation_timings_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "arm,mean_seconds\n";
  for (const AblationRow& row : rows) {
    out << row.arm << ',' << format_double(row.mean_seconds) << "\n";
  }
  return out.str();
}

std::string cell_json(const CellOutcome& cell) {
  json j{{"arm", cell.arm},
         {"sample", cell.sample},
         {"ok", cell.ok},
         {"error", cell.error},
         {"seconds", cell.seconds},
         {"final", report_to_json(cell.final_report)}};
  if (cell.inter_report) j["inter"] = report_to_json(*cell.inter_report);
  return j.dump(2) + "\n";
}

CellOutcome cell_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("cell cache parse failure: ") + e.what());
  }
  CellOutcome cell;
  cell.arm = j.value("arm", std::string{});
  cell.sample = j.value("sample", std::string{});
  cell.ok = j.value("ok", false);
  cell.error = j.value("error", std::string{});
  cell.seconds = j.value("seconds", 0.0);
  if (j.contains("final")) cell.final_report = report_from_json(j["final"]);
  if (j.contains("inter")) cell.inter_report = report_from_json(j["inter"]);
  return cell;
}

std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::ostringstream out;
  out << "iteration,stage,cd,emd,total\n";
  for (const HistoryEntry& e : history) {
    out << e.iteration << ',' << e.stage << ',' << format_double(e.loss.cd_inter) << ',';
    if (e.stage != 1) out << format_double(e.loss.emd_final);
    out << ',' << format_double(e.loss.total) << "\n";
  }
  return out.str();
}

}  // namespace roofkit
