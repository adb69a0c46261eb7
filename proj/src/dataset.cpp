#include "item/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "item/errors.hpp"
#include "item/format.hpp"
#include "item/rng.hpp"

namespace item {

void LabeledDataset::validate() const {
    if (features.rows < 1) throw ValidationError("features", "dataset must have at least one row");
    if (features.cols < 1) throw ValidationError("features", "feature dimension must be at least 1");
    if (class_count < 2) throw ValidationError("class_count", "need at least 2 classes");
    const size_t n = static_cast<size_t>(features.rows);
    if (true_labels.size() != n)
        throw ValidationError("true_labels", "length does not match feature row count");
    if (noisy_labels.size() != n)
        throw ValidationError("noisy_labels", "length does not match feature row count");
    for (size_t i = 0; i < n; ++i) {
        if (true_labels[i] < 0 || true_labels[i] >= class_count)
            throw ValidationError("true_labels", "label out of range at row " + std::to_string(i));
        if (noisy_labels[i] < 0 || noisy_labels[i] >= class_count)
            throw ValidationError("noisy_labels", "label out of range at row " + std::to_string(i));
    }
    for (double v : features.data) {
        if (!std::isfinite(v)) throw ValidationError("features", "non-finite feature entry");
    }
}

void NoiseSpec::validate() const {
    if (!(ratio >= 0.0) || ratio >= 1.0)
        throw ValidationError("ratio", "noise ratio must lie in [0, 1)");
    if (kind == NoiseKind::pair && ratio > 0.5)
        throw ValidationError("ratio", "pair noise needs ratio <= 0.5 to keep the true class dominant");
}

void BlobSpec::validate() const {
    if (class_count < 2) throw ValidationError("class_count", "need at least 2 classes");
    if (static_cast<int>(sizes.size()) != class_count)
        throw ValidationError("sizes", "need exactly one size per class");
    for (int n : sizes) {
        if (n < 1) throw ValidationError("sizes", "every class size must be positive");
    }
    if (dim < 1) throw ValidationError("dim", "dimension must be at least 1");
    if (!(separation > 0.0)) throw ValidationError("separation", "separation must be positive");
    if (!(stddev > 0.0)) throw ValidationError("stddev", "standard deviation must be positive");
}

Matrix place_centers(const BlobSpec& spec) {
    spec.validate();
    RandomStream rng(split_seed(spec.seed, "blob.centers"));
    const int k = spec.class_count;
    const int d = spec.dim;
    Matrix centers(k, d);
    const double min_d2 = spec.separation * spec.separation;
    // Sample candidates uniformly in [-box, box]^d; if a center keeps
    // colliding, grow the box (placed centers stay valid).
    double box = 2.0 * spec.separation;
    std::vector<double> cand(static_cast<size_t>(d));
    int placed = 0;
    int attempts = 0;
    while (placed < k) {
        for (int j = 0; j < d; ++j) cand[j] = (2.0 * rng.uniform01() - 1.0) * box;
        bool ok = true;
        for (int c = 0; c < placed && ok; ++c) {
            double d2 = 0.0;
            const double* cr = centers.row(c);
            for (int j = 0; j < d; ++j) {
                const double diff = cand[j] - cr[j];
                d2 += diff * diff;
            }
            if (d2 < min_d2) ok = false;
        }
        if (ok) {
            std::copy(cand.begin(), cand.end(), centers.row(placed));
            ++placed;
            attempts = 0;
        } else if (++attempts >= 200) {
            box *= 1.5;
            attempts = 0;
        }
    }
    return centers;
}

LabeledDataset sample_blobs(const BlobSpec& spec, const Matrix& centers, uint64_t point_seed) {
    spec.validate();
    if (centers.rows != spec.class_count || centers.cols != spec.dim)
        throw ValidationError("centers", "center matrix does not match spec shape");
    int total = 0;
    for (int n : spec.sizes) total += n;

    RandomStream rng(point_seed);
    LabeledDataset ds;
    ds.features = Matrix(total, spec.dim);
    ds.true_labels.reserve(static_cast<size_t>(total));
    ds.class_count = spec.class_count;
    int row = 0;
    for (int k = 0; k < spec.class_count; ++k) {
        const double* c = centers.row(k);
        for (int i = 0; i < spec.sizes[static_cast<size_t>(k)]; ++i, ++row) {
            double* x = ds.features.row(row);
            for (int j = 0; j < spec.dim; ++j) x[j] = c[j] + spec.stddev * rng.normal();
            ds.true_labels.push_back(k);
        }
    }
    ds.noisy_labels = ds.true_labels;
    return ds;
}

LabeledDataset generate_blobs(const BlobSpec& spec) {
    return sample_blobs(spec, place_centers(spec), split_seed(spec.seed, "blob.points"));
}

LabeledDataset inject_noise(const LabeledDataset& dataset, const NoiseSpec& spec) {
    dataset.validate();
    spec.validate();
    if (spec.kind == NoiseKind::instance)
        return inject_instance_noise(dataset, spec.ratio, spec.seed);

    LabeledDataset out = dataset;
    RandomStream rng(spec.seed);
    const int k = dataset.class_count;
    const int n = dataset.size();
    for (int i = 0; i < n; ++i) {
        if (rng.uniform01() >= spec.ratio) {
            out.noisy_labels[static_cast<size_t>(i)] = dataset.true_labels[static_cast<size_t>(i)];
            continue;
        }
        const int y = dataset.true_labels[static_cast<size_t>(i)];
        int flipped;
        if (spec.kind == NoiseKind::symmetric) {
            // uniform over the k-1 wrong classes
            const int r = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(k - 1)));
            flipped = r >= y ? r + 1 : r;
        } else {
            flipped = (y + 1) % k;
        }
        out.noisy_labels[static_cast<size_t>(i)] = flipped;
    }
    return out;
}

namespace {

uint64_t hash_row(const double* x, int d, int label) {
    // FNV-1a over the raw feature bytes, then the label
    uint64_t h = 1469598103934665603ull;
    auto eat = [&h](const unsigned char* p, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    eat(reinterpret_cast<const unsigned char*>(x), static_cast<size_t>(d) * sizeof(double));
    eat(reinterpret_cast<const unsigned char*>(&label), sizeof(label));
    return h;
}

} // namespace

LabeledDataset inject_instance_noise(const LabeledDataset& dataset, double ratio, uint64_t seed) {
    dataset.validate();
    if (!(ratio >= 0.0) || ratio >= 1.0)
        throw ValidationError("ratio", "noise ratio must lie in [0, 1)");
    const int n = dataset.size();
    const int d = dataset.dim();
    const int k = dataset.class_count;

    // One random direction per class; the flip target for a sample is the
    // wrong class whose direction aligns best with the sample's features.
    RandomStream dir_rng(split_seed(seed, "instance.directions"));
    Matrix dirs(k, d);
    for (double& v : dirs.data) v = dir_rng.normal();

    const uint64_t row_salt = split_seed(seed, "instance.row");
    std::vector<double> budget(static_cast<size_t>(n));
    std::vector<double> coin(static_cast<size_t>(n));
    double budget_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        RandomStream row_rng(mix64(row_salt ^ hash_row(dataset.features.row(i), d,
                                                       dataset.true_labels[static_cast<size_t>(i)])));
        budget[static_cast<size_t>(i)] = row_rng.truncated_normal(ratio, 0.1, 0.0, 1.0);
        coin[static_cast<size_t>(i)] = row_rng.uniform01();
        budget_sum += budget[static_cast<size_t>(i)];
    }
    // rescale so the mean budget is exactly the requested rate
    const double scale = budget_sum > 0.0 ? ratio * n / budget_sum : 0.0;

    LabeledDataset out = dataset;
    for (int i = 0; i < n; ++i) {
        const double q = std::min(1.0, budget[static_cast<size_t>(i)] * scale);
        const int y = dataset.true_labels[static_cast<size_t>(i)];
        if (coin[static_cast<size_t>(i)] >= q) {
            out.noisy_labels[static_cast<size_t>(i)] = y;
            continue;
        }
        const double* x = dataset.features.row(i);
        int best = -1;
        double best_proj = 0.0;
        for (int c = 0; c < k; ++c) {
            if (c == y) continue;
            double proj = 0.0;
            const double* u = dirs.row(c);
            for (int j = 0; j < d; ++j) proj += x[j] * u[j];
            if (best < 0 || proj > best_proj) {
                best = c;
                best_proj = proj;
            }
        }
        out.noisy_labels[static_cast<size_t>(i)] = best;
    }
    return out;
}

std::string to_csv_string(const LabeledDataset& dataset) {
    std::string s;
    s.reserve(static_cast<size_t>(dataset.size()) * static_cast<size_t>(dataset.dim() + 2) * 20);
    for (int j = 0; j < dataset.dim(); ++j) {
        s += "feature_" + std::to_string(j) + ",";
    }
    s += "noisy_label,true_label\n";
    for (int i = 0; i < dataset.size(); ++i) {
        const double* x = dataset.features.row(i);
        for (int j = 0; j < dataset.dim(); ++j) {
            s += format_g17(x[j]);
            s += ',';
        }
        s += std::to_string(dataset.noisy_labels[static_cast<size_t>(i)]);
        s += ',';
        s += std::to_string(dataset.true_labels[static_cast<size_t>(i)]);
        s += '\n';
    }
    return s;
}

void save_csv(const LabeledDataset& dataset, const std::string& path) {
    dataset.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open for writing");
    const std::string s = to_csv_string(dataset);
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw ParseError(path, 0, "write failed");
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double_field(std::string_view s, const std::string& path, long line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(path, line, "bad numeric field '" + std::string(s) + "'");
    return v;
}

int parse_label_field(std::string_view s, const std::string& path, long line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(path, line, "bad label field '" + std::string(s) + "'");
    if (v < 0) throw ParseError(path, line, "negative label");
    return v;
}

} // namespace

LabeledDataset load_csv(const std::string& path, int expected_class_count) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open file");
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string text = buf.str();

    std::vector<std::string_view> lines;
    {
        std::string_view rest(text);
        while (!rest.empty()) {
            const size_t pos = rest.find('\n');
            std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.push_back(line);
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
        while (!lines.empty() && lines.back().empty()) lines.pop_back();
    }
    if (lines.empty()) throw ParseError(path, 1, "empty file");

    const auto header = split_fields(lines[0]);
    if (header.size() < 3 || header[header.size() - 2] != "noisy_label" ||
        header.back() != "true_label")
        throw ParseError(path, 1, "header must be feature_0..feature_{d-1},noisy_label,true_label");
    const int d = static_cast<int>(header.size()) - 2;
    for (int j = 0; j < d; ++j) {
        if (header[static_cast<size_t>(j)] != "feature_" + std::to_string(j))
            throw ParseError(path, 1, "unexpected header column '" +
                                          std::string(header[static_cast<size_t>(j)]) + "'");
    }

    const int n = static_cast<int>(lines.size()) - 1;
    if (n < 1) throw ParseError(path, 1, "no data rows");

    LabeledDataset ds;
    ds.features = Matrix(n, d);
    ds.true_labels.resize(static_cast<size_t>(n));
    ds.noisy_labels.resize(static_cast<size_t>(n));
    int max_label = 0;
    for (int i = 0; i < n; ++i) {
        const long line_no = i + 2;
        const auto fields = split_fields(lines[static_cast<size_t>(i) + 1]);
        if (static_cast<int>(fields.size()) != d + 2)
            throw ParseError(path, line_no,
                             "expected " + std::to_string(d + 2) + " fields, got " +
                                 std::to_string(fields.size()));
        double* x = ds.features.row(i);
        for (int j = 0; j < d; ++j)
            x[j] = parse_double_field(fields[static_cast<size_t>(j)], path, line_no);
        const int noisy = parse_label_field(fields[static_cast<size_t>(d)], path, line_no);
        const int truth = parse_label_field(fields[static_cast<size_t>(d) + 1], path, line_no);
        if (expected_class_count > 0) {
            if (noisy >= expected_class_count || truth >= expected_class_count)
                throw ParseError(path, line_no,
                                 "label out of range for " +
                                     std::to_string(expected_class_count) + " classes");
        }
        ds.noisy_labels[static_cast<size_t>(i)] = noisy;
        ds.true_labels[static_cast<size_t>(i)] = truth;
        max_label = std::max({max_label, noisy, truth});
    }
    ds.class_count = expected_class_count > 0 ? expected_class_count : std::max(max_label + 1, 2);
    ds.validate();
    return ds;
}

uint64_t dataset_hash(const LabeledDataset& dataset) {
    return fnv1a64(to_csv_string(dataset));
}

} // namespace item
