#include "trendcal/report.hpp"

#include <cstdio>

namespace trendcal {

namespace {

std::string mag(const Magnitude& m) { return m.to_string(); }
std::string dec(const Magnitude& m) { return format_double(m.to_double()); }

}  // namespace

CsvTable series_table(const CalibrationResult& result) {
    CsvTable t{{"date", "value", "lo", "hi"}, {}};
    for (const auto& p : result.series) {
        t.rows.push_back({format_date(p.date), format_double(p.value), format_double(p.lo), format_double(p.hi)});
    }
    return t;
}

CsvTable calibration_summary_table(std::span<const CalibrationResult> results) {
    CsvTable t{{"query", "R", "R_lo", "R_hi", "R_exact", "R_lo_exact", "R_hi_exact", "matched_anchor",
                "requests_used", "status"},
               {}};
    for (const auto& r : results) {
        t.rows.push_back({r.query.str(), dec(r.R), dec(r.R_lo), dec(r.R_hi), mag(r.R), mag(r.R_lo), mag(r.R_hi),
                          r.matched_anchor.str(), std::to_string(r.requests_used), to_string(r.status)});
    }
    return t;
}

CsvTable error_table(std::span<const BatchError> errors) {
    CsvTable t{{"query", "error"}, {}};
    for (const auto& e : errors) t.rows.push_back({e.query.str(), e.message});
    return t;
}

CsvTable histogram_table(const std::map<std::size_t, std::size_t>& histogram) {
    CsvTable t{{"requests_used", "count"}, {}};
    for (const auto& [used, count] : histogram) t.rows.push_back({std::to_string(used), std::to_string(count)});
    return t;
}

CsvTable bank_table(const AnchorBank& bank) {
    CsvTable t{{"query", "R", "R_lo", "R_hi", "eta", "R_exact", "R_lo_exact", "R_hi_exact", "reference"}, {}};
    for (const auto& e : bank.entries()) {
        t.rows.push_back({e.query.str(), format_double(to_double(e.R)), format_double(to_double(e.R_lo)),
                          format_double(to_double(e.R_hi)), format_double(to_double(e.eta)), to_string(e.R),
                          to_string(e.R_lo), to_string(e.R_hi), e.query == bank.reference() ? "1" : "0"});
    }
    return t;
}

CsvTable eta_grid_table(std::span<const EtaSample> grid) {
    CsvTable t{{"r_star", "c", "eta"}, {}};
    for (const auto& s : grid) t.rows.push_back({format_double(s.r_star), format_double(s.c), format_double(s.eta)});
    return t;
}

CsvTable eta_comparison_table(std::span<const EtaComparisonRow> rows) {
    CsvTable t{{"query", "R", "eta_initial", "eta_optimized", "eta_theoretical"}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({r.query.str(), format_double(to_double(r.R)), format_double(r.eta_initial),
                          format_double(r.eta_optimized), format_double(r.eta_theoretical)});
    }
    return t;
}

std::string file_stem(const QueryId& q) {
    std::string out;
    for (unsigned char c : q.str()) {
        const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.';
        if (safe && !(out.empty() && c == '.')) {
            out += static_cast<char>(c);
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

}  // namespace trendcal
