#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "item/errors.hpp"
#include "item/metrics_io.hpp"

using namespace item;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

long count_fields(const std::string& line) {
    long n = 1;
    for (char c : line) n += c == ',';
    return n;
}

MetricsLog sample_log() {
    MetricsLog log;
    log.class_count = 2;
    log.head_count = 3;
    EpochMetrics e;
    e.epoch = 3;
    e.train_loss = 1.25;
    e.test_accuracy = 0.8125;
    e.class_test_accuracy = {0.875, 0.75};
    e.selected_count = 17;
    e.class_selected = {10, 7};
    e.precision = {0.5, 0.5};
    e.recall = {0.25, 0.25};
    e.fscore = {0.375, 0.375};
    e.macro_precision = 0.5;
    e.macro_recall = 0.25;
    e.macro_f = 0.375;
    e.imbalance = 2.0;
    e.imbalance_degenerate = false;
    e.selection_fallback = true;
    e.head_draws = {4, 5, 6};
    e.v = {0.75, 0.25};
    e.s = {1.5, 0.5};
    e.vtilde = {0.375, 0.625};
    log.epochs.push_back(e);
    return log;
}

} // namespace

TEST_SUITE("metrics_io") {

TEST_CASE("csv header and row shape") {
    const MetricsLog log = sample_log();
    const auto lines = split_lines(metrics_csv(log));
    REQUIRE(lines.size() == 4); // header + 2 class rows + summary row
    CHECK(lines[0] ==
          "epoch,class,precision,recall,fscore,test_accuracy,selected_count,train_loss,"
          "imbalance_ratio,imbalance_degenerate,selection_fallback,head_draws,v,s,vtilde");
    for (size_t i = 0; i < lines.size(); ++i) CHECK(count_fields(lines[i]) == 15);
}

TEST_CASE("csv golden rows") {
    const auto lines = split_lines(metrics_csv(sample_log()));
    CHECK(lines[1] == "3,0,0.5,0.25,0.375,0.875,10,,,,,,0.75,1.5,0.375");
    CHECK(lines[2] == "3,1,0.5,0.25,0.375,0.75,7,,,,,,0.25,0.5,0.625");
    CHECK(lines[3] == "3,-1,0.5,0.25,0.375,0.8125,17,1.25,2,0,1,4;5;6,,,");
}

TEST_CASE("csv grows one block per epoch") {
    MetricsLog log = sample_log();
    EpochMetrics e2 = log.epochs[0];
    e2.epoch = 4;
    log.epochs.push_back(e2);
    const auto lines = split_lines(metrics_csv(log));
    CHECK(lines.size() == 7);
    CHECK(lines[4].substr(0, 4) == "4,0,");
    CHECK(lines[6].substr(0, 5) == "4,-1,");
}

TEST_CASE("float columns survive a text round-trip") {
    MetricsLog log = sample_log();
    log.epochs[0].train_loss = 1.0 / 3.0;
    log.epochs[0].v = {2.0 / 3.0, 1.0 / 3.0};
    const auto lines = split_lines(metrics_csv(log));
    // summary row column 8 is train_loss
    std::stringstream ss(lines[3]);
    std::string cell;
    for (int i = 0; i < 8; ++i) std::getline(ss, cell, ',');
    CHECK(std::strtod(cell.c_str(), nullptr) == 1.0 / 3.0);
}

TEST_CASE("text file round-trip") {
    const std::string path = (std::filesystem::temp_directory_path() / "item_io_rt.txt").string();
    const std::string text = "line one\nline two\n\x01 binary-ish\n";
    write_text_file(path, text);
    CHECK(read_text_file(path) == text);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_text_file(path), ParseError);
    CHECK_THROWS_AS(write_text_file("/nonexistent_dir_zz/x.txt", "hi"), ParseError);
}

TEST_CASE("write_metrics_csv equals metrics_csv") {
    const std::string path = (std::filesystem::temp_directory_path() / "item_io_m.csv").string();
    const MetricsLog log = sample_log();
    write_metrics_csv(log, path);
    CHECK(read_text_file(path) == metrics_csv(log));
    std::filesystem::remove(path);
}

TEST_CASE("json escaping") {
    CHECK(json_escape("plain") == "plain");
    CHECK(json_escape("say \"hi\"") == "say \\\"hi\\\"");
    CHECK(json_escape("back\\slash") == "back\\\\slash");
    CHECK(json_escape("a\nb\tc\rd") == "a\\nb\\tc\\rd");
    CHECK(json_escape(std::string(1, '\x02')) == "\\u0002");
}

TEST_CASE("json numbers round-trip doubles") {
    for (double v : {0.1, 1.0 / 3.0, 12345.678901234567, -2.5e-17, 0.0}) {
        const std::string s = json_number(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(json_number(0.5) == "0.5");
    CHECK(json_array(std::vector<double>{0.5, 0.25}) == "[0.5,0.25]");
    CHECK(json_array(std::vector<long>{1, -2, 3}) == "[1,-2,3]");
    CHECK(json_array(std::vector<long>{}) == "[]");
}

TEST_CASE("json object preserves insertion order") {
    JsonObject o;
    o.field("zeta", 1.5)
        .field("alpha", std::string("a\"b"))
        .field("count", static_cast<long long>(-3))
        .field("seed", static_cast<uint64_t>(18446744073709551615ull))
        .field("flag", true)
        .field_raw("arr", "[1,2]");
    CHECK(o.str() ==
          "{\"zeta\":1.5,\"alpha\":\"a\\\"b\",\"count\":-3,"
          "\"seed\":18446744073709551615,\"flag\":true,\"arr\":[1,2]}");
    CHECK(JsonObject{}.str() == "{}");
}

}
