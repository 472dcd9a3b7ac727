#pragma once

// Minimal CSV output: RFC 4180 quoting, "\n" line endings, UTF-8 passthrough.

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace trendcal {

using CsvRow = std::vector<std::string>;

// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

void write_csv_row(std::ostream& out, const CsvRow& row);

struct CsvTable {
    CsvRow header;
    std::vector<CsvRow> rows;
};

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::filesystem::path& path, const CsvTable& table);

// Shortest text that reads back to the same double; "inf" for infinity.
std::string format_double(double v);

}  // namespace trendcal
