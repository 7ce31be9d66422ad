#pragma once

#include <string>
#include <vector>

#include "roofkit/optim.hpp"
#include "roofkit/roofeval.hpp"

namespace roofkit {

// Report serialization. All output is deterministic: shortest round-trip
// number formatting, fixed column order, no timestamps (the CLI prepends a
// single isolated header line where one is wanted).

/// One evaluation as JSON (metrics, plane matches, density summary, notes).
std::string report_json(const RoofReport& report);

/// Per-sample rows plus a trailing `mean` row. Columns follow the
/// experiment-table order: emd_with_pad, cd_with_pad, emd_no_pad, cd_no_pad,
/// outline_iou, completeness, correctness, quality. Undefined metrics are
/// empty fields, never zeros.
std::string batch_report_csv(const std::vector<RoofReport>& reports);
std::string batch_report_json(const std::vector<RoofReport>& reports);

/// Ablation tables: one row per arm, same metric columns.
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_json(const std::vector<AblationRow>& rows);

/// Wall-clock per arm, kept out of the deterministic tables.
std::string ablation_timings_csv(const std::vector<AblationRow>& rows);

/// Cache cells for resumable ablation runs. Cells keep metric summaries, not
/// the per-point arrays.
std::string cell_json(const CellOutcome& cell);
CellOutcome cell_from_json(const std::string& text);

/// Loss history: iteration,stage,cd,emd,total. The emd column is empty for
/// stage-1 rows.
std::string history_csv(const std::vector<HistoryEntry>& history);

}  // namespace roofkit
