#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "item/dataset.hpp"
#include "item/errors.hpp"
#include "item/rng.hpp"

using namespace item;

namespace {

BlobSpec small_spec() {
    BlobSpec s;
    s.class_count = 2;
    s.sizes = {3, 3};
    s.dim = 2;
    s.separation = 10.0;
    s.stddev = 0.1;
    s.seed = 99;
    return s;
}

BlobSpec fixture_spec() {
    BlobSpec s;
    s.class_count = 8;
    s.sizes = {400, 310, 240, 185, 143, 111, 86, 50};
    s.dim = 16;
    s.separation = 6.0;
    s.stddev = 1.5;
    s.seed = 1234;
    return s;
}

double flip_rate(const LabeledDataset& ds) {
    long flips = 0;
    for (int i = 0; i < ds.size(); ++i)
        if (ds.noisy_labels[static_cast<size_t>(i)] != ds.true_labels[static_cast<size_t>(i)])
            ++flips;
    return static_cast<double>(flips) / ds.size();
}

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_SUITE("data") {

TEST_CASE("blob rows come out class-major") {
    const LabeledDataset ds = generate_blobs(small_spec());
    CHECK(ds.size() == 6);
    CHECK(ds.dim() == 2);
    CHECK(ds.true_labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(ds.noisy_labels == ds.true_labels);
    ds.validate();
}

TEST_CASE("blob generation is deterministic") {
    const LabeledDataset a = generate_blobs(small_spec());
    const LabeledDataset b = generate_blobs(small_spec());
    CHECK(a == b);
    BlobSpec other = small_spec();
    other.seed = 100;
    CHECK(!(generate_blobs(other) == a));
}

TEST_CASE("imbalanced fixture has the exact per-class counts") {
    const BlobSpec spec = fixture_spec();
    const LabeledDataset ds = generate_blobs(spec);
    CHECK(ds.size() == 1525);
    std::vector<int> counts(8, 0);
    for (int t : ds.true_labels) ++counts[static_cast<size_t>(t)];
    CHECK(counts == spec.sizes);
}

TEST_CASE("centers respect the separation and ignore sizes") {
    BlobSpec spec = fixture_spec();
    const Matrix centers = place_centers(spec);
    CHECK(centers.rows == 8);
    CHECK(centers.cols == 16);
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 16; ++c) {
                const double diff = centers.at(i, c) - centers.at(j, c);
                d2 += diff * diff;
            }
            CHECK(std::sqrt(d2) >= spec.separation);
        }
    BlobSpec resized = spec;
    resized.sizes.assign(8, 11); // a test split reuses the training centers
    CHECK(place_centers(resized) == centers);
}

TEST_CASE("blob cloud statistics match the spec") {
    BlobSpec spec = fixture_spec();
    spec.sizes.assign(8, 2000);
    const Matrix centers = place_centers(spec);
    const LabeledDataset ds = sample_blobs(spec, centers, 505);
    // class 3's empirical mean ~ center, sd ~ stddev
    double mean0 = 0.0, var = 0.0;
    const int begin = 3 * 2000, end = 4 * 2000;
    for (int r = begin; r < end; ++r) mean0 += ds.features.at(r, 0);
    mean0 /= 2000;
    for (int r = begin; r < end; ++r) {
        const double d = ds.features.at(r, 0) - mean0;
        var += d * d;
    }
    var /= 2000;
    CHECK(std::abs(mean0 - centers.at(3, 0)) < 0.12); // 3.5 sigma of the mean
    CHECK(std::abs(std::sqrt(var) - spec.stddev) < 0.08);
}

TEST_CASE("zero noise is the identity") {
    const LabeledDataset ds = generate_blobs(fixture_spec());
    NoiseSpec noise;
    noise.ratio = 0.0;
    noise.seed = 7;
    for (NoiseKind kind : {NoiseKind::symmetric, NoiseKind::pair, NoiseKind::instance}) {
        noise.kind = kind;
        CHECK(inject_noise(ds, noise) == ds);
    }
}

TEST_CASE("symmetric noise hits the requested rate within 3 binomial sigmas") {
    BlobSpec spec;
    spec.class_count = 10;
    spec.sizes.assign(10, 5000);
    spec.dim = 3;
    spec.separation = 4.0;
    spec.stddev = 1.0;
    spec.seed = 11;
    const LabeledDataset ds = generate_blobs(spec);
    NoiseSpec noise;
    noise.kind = NoiseKind::symmetric;
    noise.ratio = 0.4;
    noise.seed = 21;
    const LabeledDataset noisy = inject_noise(ds, noise);
    const double sigma = std::sqrt(0.4 * 0.6 / ds.size());
    CHECK(std::abs(flip_rate(noisy) - 0.4) <= 3.0 * sigma);
    CHECK(noisy.true_labels == ds.true_labels);
    CHECK(noisy.features == ds.features);
}

TEST_CASE("symmetric noise spreads evenly over the wrong classes") {
    BlobSpec spec;
    spec.class_count = 10;
    spec.sizes.assign(10, 10000);
    spec.dim = 2;
    spec.separation = 3.0;
    spec.stddev = 1.0;
    spec.seed = 13;
    const LabeledDataset ds = generate_blobs(spec);
    NoiseSpec noise;
    noise.kind = NoiseKind::symmetric;
    noise.ratio = 0.4;
    noise.seed = 23;
    const LabeledDataset noisy = inject_noise(ds, noise);
    // empirical transition matrix close to diagonal 0.6, off-diagonal 0.4/9
    std::vector<std::vector<double>> t(10, std::vector<double>(10, 0.0));
    std::vector<long> row(10, 0);
    for (int i = 0; i < ds.size(); ++i) {
        ++t[static_cast<size_t>(ds.true_labels[static_cast<size_t>(i)])]
          [static_cast<size_t>(noisy.noisy_labels[static_cast<size_t>(i)])];
        ++row[static_cast<size_t>(ds.true_labels[static_cast<size_t>(i)])];
    }
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b) {
            const double want = a == b ? 0.6 : 0.4 / 9;
            CHECK(std::abs(t[static_cast<size_t>(a)][static_cast<size_t>(b)] / row[static_cast<size_t>(a)] - want) < 0.02);
        }
}

TEST_CASE("pair noise flips to the cyclic successor only") {
    BlobSpec spec;
    spec.class_count = 10;
    spec.sizes.assign(10, 5000);
    spec.dim = 2;
    spec.separation = 3.0;
    spec.stddev = 1.0;
    spec.seed = 17;
    const LabeledDataset ds = generate_blobs(spec);
    NoiseSpec noise;
    noise.kind = NoiseKind::pair;
    noise.ratio = 0.4;
    noise.seed = 29;
    const LabeledDataset noisy = inject_noise(ds, noise);
    for (int i = 0; i < ds.size(); ++i) {
        const int y = ds.true_labels[static_cast<size_t>(i)];
        const int ny = noisy.noisy_labels[static_cast<size_t>(i)];
        if (ny != y) CHECK(ny == (y + 1) % 10);
    }
    const double sigma = std::sqrt(0.4 * 0.6 / ds.size());
    CHECK(std::abs(flip_rate(noisy) - 0.4) <= 3.0 * sigma);
}

TEST_CASE("noise spec validation") {
    NoiseSpec bad;
    bad.kind = NoiseKind::symmetric;
    bad.ratio = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad.kind = NoiseKind::pair;
    bad.ratio = 0.6; // would make the wrong class the argmax
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad.ratio = 0.5;
    bad.validate();
}

TEST_CASE("instance noise rate lands near the target") {
    BlobSpec spec;
    spec.class_count = 5;
    spec.sizes.assign(5, 2000);
    spec.dim = 6;
    spec.separation = 4.0;
    spec.stddev = 1.0;
    spec.seed = 19;
    const LabeledDataset ds = generate_blobs(spec);
    const LabeledDataset noisy = inject_instance_noise(ds, 0.4, 31);
    const double rate = flip_rate(noisy);
    CHECK(rate > 0.35);
    CHECK(rate < 0.45);
    CHECK(noisy.true_labels == ds.true_labels);
    CHECK(noisy.features == ds.features);
    for (int i = 0; i < noisy.size(); ++i) {
        CHECK(noisy.noisy_labels[static_cast<size_t>(i)] >= 0);
        CHECK(noisy.noisy_labels[static_cast<size_t>(i)] < 5);
    }
}

TEST_CASE("instance noise treats identical rows identically") {
    LabeledDataset ds;
    ds.class_count = 3;
    ds.features = Matrix(4, 2);
    // rows 0 and 2 identical, same label; rows 1 and 3 identical, same label
    ds.features.at(0, 0) = 1.5; ds.features.at(0, 1) = -0.5;
    ds.features.at(2, 0) = 1.5; ds.features.at(2, 1) = -0.5;
    ds.features.at(1, 0) = -2.0; ds.features.at(1, 1) = 0.25;
    ds.features.at(3, 0) = -2.0; ds.features.at(3, 1) = 0.25;
    ds.true_labels = {0, 1, 0, 1};
    ds.noisy_labels = ds.true_labels;
    const LabeledDataset noisy = inject_instance_noise(ds, 0.5, 77);
    CHECK(noisy.noisy_labels[0] == noisy.noisy_labels[2]);
    CHECK(noisy.noisy_labels[1] == noisy.noisy_labels[3]);
}

TEST_CASE("csv round-trips exactly") {
    LabeledDataset ds = generate_blobs(small_spec());
    NoiseSpec noise;
    noise.kind = NoiseKind::symmetric;
    noise.ratio = 0.4;
    noise.seed = 3;
    ds = inject_noise(ds, noise);
    // make the numbers awkward on purpose
    ds.features.at(0, 0) = 1.0 / 3.0;
    ds.features.at(1, 1) = -1.2345678901234567e-12;
    const std::string path = temp_file("item_csv_roundtrip.csv");
    save_csv(ds, path);
    const LabeledDataset back = load_csv(path);
    CHECK(back == ds);
    std::filesystem::remove(path);
}

TEST_CASE("csv header is the fixed contract") {
    const LabeledDataset ds = generate_blobs(small_spec());
    const std::string text = to_csv_string(ds);
    const std::string header = text.substr(0, text.find('\n'));
    CHECK(header == "feature_0,feature_1,noisy_label,true_label");
}

TEST_CASE("csv loader reports malformed input with line numbers") {
    const std::string path = temp_file("item_csv_bad.csv");
    auto write = [&](const std::string& text) {
        std::ofstream out(path);
        out << text;
    };

    write("feature_0,noisy_label,true_label\n0.5,0,0\n0.25,1\n");
    try {
        load_csv(path);
        FAIL("ragged row accepted");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    write("feature_0,noisy_label,true_label\n0.5,0,0\n0.25,2,0\n");
    try {
        load_csv(path, 2); // pinned class count
        FAIL("out-of-range label accepted");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    write("feature_0,noisy_label,true_label\n0.5,zero,0\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);

    write("feature_0,oops,true_label\n0.5,0,0\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);

    write("");
    CHECK_THROWS_AS(load_csv(path), ParseError);

    // crlf and a trailing blank line are tolerated
    write("feature_0,noisy_label,true_label\r\n0.5,1,1\r\n\n");
    const LabeledDataset ok = load_csv(path);
    CHECK(ok.size() == 1);
    CHECK(ok.noisy_labels == std::vector<int>{1});
    CHECK(ok.class_count == 2);
    std::filesystem::remove(path);
}

TEST_CASE("dataset_hash tracks content") {
    const LabeledDataset a = generate_blobs(small_spec());
    LabeledDataset b = a;
    CHECK(dataset_hash(a) == dataset_hash(b));
    b.noisy_labels[4] = 0;
    CHECK(dataset_hash(a) != dataset_hash(b));
}

TEST_CASE("blob spec validation names the offending field") {
    BlobSpec s = small_spec();
    s.sizes = {3};
    try {
        s.validate();
        FAIL("size/class mismatch accepted");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.field()) == "sizes");
    }
    s = small_spec();
    s.separation = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = small_spec();
    s.class_count = 1;
    s.sizes = {3};
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

}
