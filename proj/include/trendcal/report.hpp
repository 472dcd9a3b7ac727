#pragma once

// Tabular views of results for CSV export.

#include "trendcal/bank_optimizer.hpp"
#include "trendcal/calibrator.hpp"
#include "trendcal/csv.hpp"
#include "trendcal/model.hpp"

#include <map>
#include <span>

namespace trendcal {

// date,value,lo,hi
CsvTable series_table(const CalibrationResult& result);

// One row per result: exact R bounds as rationals plus decimal approximations.
CsvTable calibration_summary_table(std::span<const CalibrationResult> results);

CsvTable error_table(std::span<const BatchError> errors);

// requests_used,count
CsvTable histogram_table(const std::map<std::size_t, std::size_t>& histogram);

CsvTable bank_table(const AnchorBank& bank);

CsvTable eta_grid_table(std::span<const EtaSample> grid);

CsvTable eta_comparison_table(std::span<const EtaComparisonRow> rows);

// File-name-safe rendering of a query id (unsafe bytes percent-encoded).
std::string file_stem(const QueryId& q);

}  // namespace trendcal
