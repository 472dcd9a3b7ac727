#pragma once

// Versioned, checksummed persistence for anchor banks.
//
// Bank file layout (UTF-8 JSON, keys sorted, two-space indent):
//
//   {
//     "checksum": "sha256:<hex of content serialized compactly>",
//     "content": {
//       "bank": {
//         "entries": [{"query": "...", "R": ["num", "den"], "R_lo": [...],
//                      "R_hi": [...], "eta": [...]}, ...],     // ascending R
//         "params": {"k": 5, "tau": 10, "search_tolerance": ["1", "10"], "seed": "42"},
//         "reference": "...", "region": "...", "search_start": "...",
//         "timespan": "YYYY-MM-DD YYYY-MM-DD"
//       },
//       "provenance": {"provider": "...", "universe_seed": "..." | null,
//                      "fetch_dates": "...", "parameters": {...}, "tool_version": "..."}
//     },
//     "schema_version": 1
//   }
//
// Rationals are [numerator, denominator] pairs of decimal integer strings so
// no floating-point value ever enters the file.

#include "trendcal/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace trendcal {

inline constexpr const char* kToolVersion = "trendcal 1.0.0";

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomically(const std::filesystem::path& path, std::string_view content);

// Wraps `content` in the checksummed envelope shown above.
std::string seal_document(const nlohmann::json& content, int schema_version);

// Parses and verifies an envelope; returns its content.
// Throws StorageError{checksum} on malformed or tampered text and
// StorageError{version} when schema_version is newer than `max_version`.
nlohmann::json open_document(std::string_view text, int max_version);

nlohmann::json rational_to_json(const Rational& q);
Rational rational_from_json(const nlohmann::json& j);

struct Provenance {
    std::string provider = "simulator";
    std::optional<std::uint64_t> universe_seed;
    std::string fetch_dates;
    nlohmann::json parameters = nlohmann::json::object();
    std::string tool_version = kToolVersion;

    bool operator==(const Provenance&) const = default;
};

struct BankFile {
    int schema_version = kBankSchemaVersion;
    AnchorBank bank;
    Provenance provenance;
};

std::string serialize_bank(const AnchorBank& bank, const Provenance& provenance);
BankFile deserialize_bank(std::string_view text);

void save_bank(const AnchorBank& bank, const Provenance& provenance, const std::filesystem::path& path);
BankFile load_bank_file(const std::filesystem::path& path);
AnchorBank load_bank(const std::filesystem::path& path);

}  // namespace trendcal
