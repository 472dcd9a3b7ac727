#include "trendcal/storage.hpp"

#include "trendcal/errors.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <system_error>

namespace trendcal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError(StorageError::Kind::io, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw StorageError(StorageError::Kind::io, "read failed for '" + path.string() + "'");
    return buf.str();
}

void write_file_atomically(const fs::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    // unique per writer so concurrent writers of the same key do not collide
    thread_local std::mt19937_64 salt{std::random_device{}()};
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(salt());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError(StorageError::Kind::io, "cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw StorageError(StorageError::Kind::io, "write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw StorageError(StorageError::Kind::io, "cannot rename into '" + path.string() + "'");
    }
}

std::string seal_document(const json& content, int schema_version) {
    json doc;
    doc["schema_version"] = schema_version;
    doc["checksum"] = "sha256:" + sha256_hex(content.dump());
    doc["content"] = content;
    return doc.dump(2) + "\n";
}

json open_document(std::string_view text, int max_version) {
    json doc = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw StorageError(StorageError::Kind::checksum, "document is truncated or not valid JSON");
    }
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        throw StorageError(StorageError::Kind::invalid, "document has no schema_version");
    }
    const int version = doc["schema_version"].get<int>();
    if (version > max_version || version < 1) {
        throw StorageError(StorageError::Kind::version,
                           "unsupported schema_version " + std::to_string(version) +
                               " (this build reads up to " + std::to_string(max_version) + ")");
    }
    if (!doc.contains("content") || !doc.contains("checksum") || !doc["checksum"].is_string()) {
        throw StorageError(StorageError::Kind::checksum, "document lacks content or checksum");
    }
    const std::string expected = "sha256:" + sha256_hex(doc["content"].dump());
    if (doc["checksum"].get<std::string>() != expected) {
        throw StorageError(StorageError::Kind::checksum, "checksum mismatch");
    }
    return std::move(doc["content"]);
}

json rational_to_json(const Rational& q) {
    return json::array({boost::multiprecision::numerator(q).str(),
                        boost::multiprecision::denominator(q).str()});
}

Rational rational_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string()) {
        throw StorageError(StorageError::Kind::invalid, "rational must be a [num, den] string pair");
    }
    try {
        return parse_rational(j[0].get<std::string>() + "/" + j[1].get<std::string>());
    } catch (const ContractError& e) {
        throw StorageError(StorageError::Kind::invalid, e.what());
    }
}

namespace {

json bank_to_json(const AnchorBank& bank) {
    json entries = json::array();
    for (const auto& e : bank.entries()) {
        entries.push_back({{"query", e.query.str()},
                           {"R", rational_to_json(e.R)},
                           {"R_lo", rational_to_json(e.R_lo)},
                           {"R_hi", rational_to_json(e.R_hi)},
                           {"eta", rational_to_json(e.eta)}});
    }
    const auto& p = bank.params();
    return {{"entries", std::move(entries)},
            {"params",
             {{"k", p.k},
              {"tau", p.tau},
              {"search_tolerance", rational_to_json(p.search_tolerance)},
              {"seed", std::to_string(p.seed)}}},
            {"reference", bank.reference().str()},
            {"region", bank.region()},
            {"search_start", bank.search_start().str()},
            {"timespan", bank.timespan().to_string()}};
}

AnchorBank bank_from_json(const json& j) {
    std::vector<AnchorBankEntry> entries;
    for (const auto& e : j.at("entries")) {
        entries.push_back({QueryId(e.at("query").get<std::string>()), rational_from_json(e.at("R")),
                           rational_from_json(e.at("R_lo")), rational_from_json(e.at("R_hi")),
                           rational_from_json(e.at("eta"))});
    }
    const auto& p = j.at("params");
    BankParams params{p.at("k").get<int>(), p.at("tau").get<int>(),
                      rational_from_json(p.at("search_tolerance")),
                      std::stoull(p.at("seed").get<std::string>())};
    return AnchorBank(std::move(entries), QueryId(j.at("reference").get<std::string>()),
                      j.at("region").get<std::string>(),
                      Timespan::parse(j.at("timespan").get<std::string>()), std::move(params),
                      QueryId(j.at("search_start").get<std::string>()));
}

json provenance_to_json(const Provenance& p) {
    return {{"provider", p.provider},
            {"universe_seed", p.universe_seed ? json(std::to_string(*p.universe_seed)) : json(nullptr)},
            {"fetch_dates", p.fetch_dates},
            {"parameters", p.parameters},
            {"tool_version", p.tool_version}};
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    p.provider = j.at("provider").get<std::string>();
    if (!j.at("universe_seed").is_null()) {
        p.universe_seed = std::stoull(j.at("universe_seed").get<std::string>());
    }
    p.fetch_dates = j.at("fetch_dates").get<std::string>();
    p.parameters = j.at("parameters");
    p.tool_version = j.at("tool_version").get<std::string>();
    return p;
}

}  // namespace

std::string serialize_bank(const AnchorBank& bank, const Provenance& provenance) {
    json content{{"bank", bank_to_json(bank)}, {"provenance", provenance_to_json(provenance)}};
    return seal_document(content, kBankSchemaVersion);
}

BankFile deserialize_bank(std::string_view text) {
    json content = open_document(text, kBankSchemaVersion);
    try {
        return BankFile{kBankSchemaVersion, bank_from_json(content.at("bank")),
                        provenance_from_json(content.at("provenance"))};
    } catch (const StorageError&) {
        throw;
    } catch (const json::exception& e) {
        throw StorageError(StorageError::Kind::invalid, std::string("malformed bank: ") + e.what());
    } catch (const Error& e) {
        // AnchorBank invariants (sorting, reference present) failed on load
        throw StorageError(StorageError::Kind::invalid, std::string("invalid bank: ") + e.what());
    } catch (const std::logic_error& e) {
        throw StorageError(StorageError::Kind::invalid, std::string("malformed bank: ") + e.what());
    }
}

void save_bank(const AnchorBank& bank, const Provenance& provenance, const fs::path& path) {
    write_file_atomically(path, serialize_bank(bank, provenance));
}

BankFile load_bank_file(const fs::path& path) { return deserialize_bank(read_file(path)); }

AnchorBank load_bank(const fs::path& path) { return load_bank_file(path).bank; }

}  // namespace trendcal
