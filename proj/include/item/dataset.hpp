#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "item/matrix.hpp"

namespace item {

// A label-corrupted training set: every row carries both the observed
// (possibly wrong) label and the ground truth. Training code only ever
// consumes the noisy side; true labels exist for injection and diagnostics.
struct LabeledDataset {
    Matrix features;               // N x d
    std::vector<int> true_labels;  // length N, values in [0, class_count)
    std::vector<int> noisy_labels; // length N
    int class_count = 0;

    int size() const { return features.rows; }
    int dim() const { return features.cols; }

    // throws ValidationError naming the offending field
    void validate() const;

    bool operator==(const LabeledDataset&) const = default;
};

enum class NoiseKind { symmetric, pair, instance };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double ratio = 0.0; // flip probability, in [0,1); pair additionally <= 0.5
    uint64_t seed = 0;

    void validate() const;
};

struct BlobSpec {
    int class_count = 0;
    std::vector<int> sizes; // per-class row counts, length class_count
    int dim = 0;
    double separation = 0.0; // minimum pairwise center distance
    double stddev = 1.0;     // isotropic within-class standard deviation
    uint64_t seed = 0;

    void validate() const;
};

// Class centers (K x d) with pairwise distance >= separation, rejection
// sampled in a box that grows until placement succeeds. Depends only on
// spec.seed (stream "blob.centers"), not on sizes, so train and test sets
// built from specs differing only in sizes share centers.
Matrix place_centers(const BlobSpec& spec);

// Rows grouped by class (all of class 0 first, matching sizes exactly);
// each row = center + stddev * standard normal vector. noisy == true labels.
LabeledDataset sample_blobs(const BlobSpec& spec, const Matrix& centers, uint64_t point_seed);

// place_centers + sample_blobs on the "blob.points" stream of spec.seed.
LabeledDataset generate_blobs(const BlobSpec& spec);

// Symmetric: with probability ratio, relabel uniformly over the K-1 wrong
// classes. Pair: with probability ratio, relabel to (k+1) mod K. Features
// and true labels pass through untouched. kind=instance dispatches to
// inject_instance_noise.
LabeledDataset inject_noise(const LabeledDataset& dataset, const NoiseSpec& spec);

// Feature-dependent corruption: per-sample flip budgets drawn from
// TN(ratio, 0.1, [0,1]) and rescaled so their mean is exactly ratio; a flip
// goes to the wrong class whose random direction has the largest projection
// onto the sample. Per-row decisions hash the row content, so identical rows
// under the same seed flip identically.
LabeledDataset inject_instance_noise(const LabeledDataset& dataset, double ratio, uint64_t seed);

// CSV interchange format. Header is exactly
//   feature_0,...,feature_{d-1},noisy_label,true_label
// and floats are written with 17 significant digits, so load(save(ds)) == ds.
std::string to_csv_string(const LabeledDataset& dataset);
void save_csv(const LabeledDataset& dataset, const std::string& path);

// expected_class_count > 0 pins K and makes any label >= K a parse error
// (with its line number); 0 infers K from the data.
LabeledDataset load_csv(const std::string& path, int expected_class_count = 0);

// FNV-1a over the canonical CSV serialization.
uint64_t dataset_hash(const LabeledDataset& dataset);

} // namespace item
