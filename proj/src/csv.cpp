#include "trendcal/csv.hpp"

#include "trendcal/storage.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace trendcal {

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_csv_row(std::ostream& out, const CsvRow& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out << ',';
        out << csv_escape(row[i]);
    }
    out << '\n';
}

void write_csv(std::ostream& out, const CsvTable& table) {
    write_csv_row(out, table.header);
    for (const auto& row : table.rows) write_csv_row(out, row);
}

void write_csv_file(const std::filesystem::path& path, const CsvTable& table) {
    std::ostringstream out;
    write_csv(out, table);
    write_file_atomically(path, out.str());
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace trendcal
