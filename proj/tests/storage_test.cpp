#include "trendcal/errors.hpp"
#include "trendcal/harness.hpp"
#include "trendcal/storage.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace trendcal;

namespace {

const Timespan kYear = Timespan::parse("2019-01-01 2019-12-31");
const std::string kGolden = std::string(TRENDCAL_TEST_DATA) + "/bank_v1.json";

AnchorBank golden_bank() {
    std::vector<AnchorBankEntry> e{
        {QueryId("low"), Rational(37, 100), Rational(73, 202), Rational(75, 198), Rational(75, 198) / Rational(73, 202)},
        {QueryId("mid"), 1, 1, 1, 1},
        {QueryId("high"), Rational(100, 37), Rational(200, 75), Rational(200, 73), Rational(75, 73)}};
    return AnchorBank(e, QueryId("mid"), "worldwide", kYear, BankParams{5, 10, Rational(1, 10), 42});
}

Provenance golden_provenance() {
    Provenance p;
    p.universe_seed = 7;
    p.fetch_dates = "simulated";
    p.parameters = {{"k", 5}, {"tau", 10}};
    return p;
}

StorageError::Kind kind_of(const std::string& text) {
    try {
        deserialize_bank(text);
    } catch (const StorageError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected StorageError";
    return StorageError::Kind::io;
}

}  // namespace

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(BankFile, MatchesGoldenBytes) {
    EXPECT_EQ(serialize_bank(golden_bank(), golden_provenance()), read_file(kGolden));
}

TEST(BankFile, GoldenLoadsExactly) {
    const auto file = load_bank_file(kGolden);
    EXPECT_EQ(file.schema_version, 1);
    EXPECT_EQ(file.bank, golden_bank());
    EXPECT_EQ(file.provenance, golden_provenance());
}

TEST(BankFile, RoundTripOfBuiltBankIsExact) {
    ScenarioSpec spec;
    spec.seed = 2;
    spec.n_queries = 0;
    const auto scenario = make_scenario(spec);
    SimulatedProvider sim(scenario.universe);
    const auto bank = build_bank(sim, scenario.frequencies, scenario.build).bank;
    test::TempDir dir;
    const auto path = dir.path() / "nested" / "bank.json";
    save_bank(bank, golden_provenance(), path);
    EXPECT_EQ(load_bank(path), bank);
    // saving the loaded bank reproduces the file byte for byte
    const auto path2 = dir.path() / "again.json";
    save_bank(load_bank(path), golden_provenance(), path2);
    EXPECT_EQ(read_file(path), read_file(path2));
}

TEST(BankFile, TruncationIsDetected) {
    const std::string text = read_file(kGolden);
    for (std::size_t cut : {std::size_t{0}, std::size_t{10}, text.size() / 2, text.size() - 3}) {
        EXPECT_EQ(kind_of(text.substr(0, cut)), StorageError::Kind::checksum) << cut;
    }
}

TEST(BankFile, TamperingIsDetected) {
    std::string text = read_file(kGolden);
    const auto pos = text.find("\"37\"");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 4, "\"38\"");
    EXPECT_EQ(kind_of(text), StorageError::Kind::checksum);
}

TEST(BankFile, NewerSchemaVersionIsRejected) {
    auto doc = nlohmann::json::parse(read_file(kGolden));
    doc["schema_version"] = 2;
    try {
        deserialize_bank(doc.dump(2));
        FAIL() << "expected StorageError";
    } catch (const StorageError& e) {
        EXPECT_EQ(e.kind(), StorageError::Kind::version);
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
    }
}

TEST(BankFile, InvariantViolationsAreRejected) {
    auto content = nlohmann::json::parse(read_file(kGolden))["content"];
    std::swap(content["bank"]["entries"][0], content["bank"]["entries"][2]);  // unsorted
    EXPECT_EQ(kind_of(seal_document(content, 1)), StorageError::Kind::invalid);
    content = nlohmann::json::parse(read_file(kGolden))["content"];
    content["bank"]["entries"][0]["R"] = {"1", "0"};
    EXPECT_EQ(kind_of(seal_document(content, 1)), StorageError::Kind::invalid);
    content = nlohmann::json::parse(read_file(kGolden))["content"];
    content["bank"]["entries"][0]["R"] = 0.37;  // floats never appear in bank files
    EXPECT_EQ(kind_of(seal_document(content, 1)), StorageError::Kind::invalid);
    content = nlohmann::json::parse(read_file(kGolden))["content"];
    content["bank"].erase("reference");
    EXPECT_EQ(kind_of(seal_document(content, 1)), StorageError::Kind::invalid);
}

TEST(Files, MissingFileIsIoError) {
    try {
        load_bank("/nonexistent/bank.json");
        FAIL() << "expected StorageError";
    } catch (const StorageError& e) {
        EXPECT_EQ(e.kind(), StorageError::Kind::io);
    }
}

TEST(Files, AtomicWriteReplacesContent) {
    test::TempDir dir;
    const auto path = dir.path() / "f.txt";
    write_file_atomically(path, "one");
    write_file_atomically(path, "two");
    EXPECT_EQ(read_file(path), "two");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    EXPECT_EQ(files, 1u);  // no temp files left behind
}

TEST(Rationals, JsonPairsAreExact) {
    const Rational big = parse_rational("123456789012345678901234567890/7");
    EXPECT_EQ(rational_from_json(rational_to_json(big)), big);
    EXPECT_EQ(rational_to_json(Rational(-3, 6)), nlohmann::json::array({"-1", "2"}));
    EXPECT_THROW(rational_from_json(nlohmann::json::array({1, 2})), StorageError);
}
