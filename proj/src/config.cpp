#include "item/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "item/errors.hpp"

namespace item {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::item: return "item";
        case Mode::item_ssl: return "item_ssl";
        case Mode::baseline_ce: return "baseline_ce";
        case Mode::baseline_single_head: return "baseline_single_head";
        case Mode::no_mixed_sampling: return "no_mixed_sampling";
        case Mode::no_mixup: return "no_mixup";
    }
    return "item";
}

std::string criterion_name(Criterion criterion) {
    switch (criterion) {
        case Criterion::small_loss: return "small_loss";
        case Criterion::gmm: return "gmm";
        case Criterion::fluctuation: return "fluctuation";
    }
    return "gmm";
}

std::string noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::symmetric: return "symmetric";
        case NoiseKind::pair: return "pair";
        case NoiseKind::instance: return "instance";
    }
    return "symmetric";
}

Mode parse_mode(const std::string& text, const std::string& key) {
    for (Mode m : {Mode::item, Mode::item_ssl, Mode::baseline_ce, Mode::baseline_single_head,
                   Mode::no_mixed_sampling, Mode::no_mixup})
        if (text == mode_name(m)) return m;
    throw ConfigError(key, "unknown mode '" + text + "'");
}

Criterion parse_criterion(const std::string& text, const std::string& key) {
    for (Criterion c : {Criterion::small_loss, Criterion::gmm, Criterion::fluctuation})
        if (text == criterion_name(c)) return c;
    throw ConfigError(key, "unknown criterion '" + text + "'");
}

NoiseKind parse_noise_kind(const std::string& text, const std::string& key) {
    for (NoiseKind k : {NoiseKind::symmetric, NoiseKind::pair, NoiseKind::instance})
        if (text == noise_kind_name(k)) return k;
    throw ConfigError(key, "unknown noise kind '" + text + "'");
}

KeyValues KeyValues::parse_text(const std::string& text, const std::string& path) {
    KeyValues kv;
    kv.path_ = path;
    long line_no = 0;
    std::string_view rest(text);
    while (!rest.empty() || line_no == 0) {
        ++line_no;
        const size_t nl = rest.find('\n');
        std::string_view line = nl == std::string_view::npos ? rest : rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);

        const size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (nl == std::string_view::npos) break;
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(path, line_no, "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(path, line_no, "empty key");
        if (kv.entries_.count(key))
            throw ParseError(path, line_no, "duplicate key '" + key + "'");
        kv.entries_[key] = Entry{value, line_no};
        if (nl == std::string_view::npos) break;
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open file");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_text(buf.str(), path);
}

bool KeyValues::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValues::take(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(key, "missing required key");
    std::string v = it->second.value;
    entries_.erase(it);
    return v;
}

std::string KeyValues::take_or(const std::string& key, const std::string& fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::string v = it->second.value;
    entries_.erase(it);
    return v;
}

void KeyValues::finish() const {
    if (entries_.empty()) return;
    const auto it = std::min_element(
        entries_.begin(), entries_.end(),
        [](const auto& a, const auto& b) { return a.second.line < b.second.line; });
    throw ConfigError(it->first, "unknown key");
}

uint64_t parse_u64_value(const std::string& text, const std::string& key) {
    uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError(key, "expected an unsigned integer, got '" + text + "'");
    return v;
}

int parse_int_value(const std::string& text, const std::string& key) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    return v;
}

double parse_double_value(const std::string& text, const std::string& key) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError(key, "expected a number, got '" + text + "'");
    return v;
}

bool parse_bool_value(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string_view rest(text);
    while (!rest.empty()) {
        const size_t pos = rest.find(',');
        parts.emplace_back(trim(pos == std::string_view::npos ? rest : rest.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        rest = rest.substr(pos + 1);
    }
    return parts;
}

} // namespace

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    if (trim(text).empty()) return out;
    for (const auto& part : split_list(text)) out.push_back(parse_int_value(part, key));
    return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& text, const std::string& key) {
    std::vector<uint64_t> out;
    if (trim(text).empty()) return out;
    for (const auto& part : split_list(text)) out.push_back(parse_u64_value(part, key));
    return out;
}

namespace {

void require_schema_v1(KeyValues& kv) {
    const std::string v = kv.take("schema_version");
    if (v != "1") throw ConfigError("schema_version", "unsupported schema version '" + v + "'");
}

} // namespace

RunConfig parse_run_config(const std::string& text, const std::string& path) {
    KeyValues kv = KeyValues::parse_text(text, path);
    require_schema_v1(kv);

    RunConfig c;
    c.mode = parse_mode(kv.take_or("run.mode", mode_name(c.mode)), "run.mode");
    c.seed = parse_u64_value(kv.take_or("run.seed", std::to_string(c.seed)), "run.seed");
    c.epochs = parse_int_value(kv.take_or("run.epochs", std::to_string(c.epochs)), "run.epochs");
    c.warmup_epochs = parse_int_value(
        kv.take_or("run.warmup_epochs", std::to_string(c.warmup_epochs)), "run.warmup_epochs");
    c.batch_size = parse_int_value(kv.take_or("run.batch_size", std::to_string(c.batch_size)),
                                   "run.batch_size");

    const std::string source = kv.take_or("data.source", "blob");
    if (source == "blob") {
        c.source = DataSource::blob;
    } else if (source == "csv") {
        c.source = DataSource::csv;
    } else {
        throw ConfigError("data.source", "unknown source '" + source + "'");
    }
    c.csv_path = kv.take_or("data.csv_path", "");
    c.blob_classes =
        parse_int_value(kv.take_or("data.classes", std::to_string(c.blob_classes)), "data.classes");
    if (kv.has("data.sizes")) c.blob_sizes = parse_int_list(kv.take("data.sizes"), "data.sizes");
    c.blob_dim = parse_int_value(kv.take_or("data.dim", std::to_string(c.blob_dim)), "data.dim");
    c.blob_separation = parse_double_value(
        kv.take_or("data.separation", std::to_string(c.blob_separation)), "data.separation");
    c.blob_stddev = parse_double_value(kv.take_or("data.stddev", std::to_string(c.blob_stddev)),
                                       "data.stddev");
    c.test_per_class = parse_int_value(
        kv.take_or("data.test_per_class", std::to_string(c.test_per_class)), "data.test_per_class");

    c.noise_kind = parse_noise_kind(kv.take_or("noise.kind", noise_kind_name(c.noise_kind)),
                                    "noise.kind");
    c.noise_ratio = parse_double_value(kv.take_or("noise.ratio", std::to_string(c.noise_ratio)),
                                       "noise.ratio");

    if (kv.has("net.trunk")) c.trunk_widths = parse_int_list(kv.take("net.trunk"), "net.trunk");
    c.experts = parse_int_value(kv.take_or("net.experts", std::to_string(c.experts)), "net.experts");

    c.lr = parse_double_value(kv.take_or("opt.lr", std::to_string(c.lr)), "opt.lr");
    c.momentum =
        parse_double_value(kv.take_or("opt.momentum", std::to_string(c.momentum)), "opt.momentum");
    c.weight_decay = parse_double_value(
        kv.take_or("opt.weight_decay", std::to_string(c.weight_decay)), "opt.weight_decay");
    if (kv.has("opt.lr_milestones"))
        c.lr_milestones = parse_int_list(kv.take("opt.lr_milestones"), "opt.lr_milestones");
    c.lr_decay =
        parse_double_value(kv.take_or("opt.lr_decay", std::to_string(c.lr_decay)), "opt.lr_decay");

    c.criterion = parse_criterion(kv.take_or("select.criterion", criterion_name(c.criterion)),
                                  "select.criterion");
    if (kv.has("select.assumed_noise_rate"))
        c.assumed_noise_rate =
            parse_double_value(kv.take("select.assumed_noise_rate"), "select.assumed_noise_rate");
    c.ramp_epochs = parse_int_value(kv.take_or("select.ramp_epochs", std::to_string(c.ramp_epochs)),
                                    "select.ramp_epochs");
    c.gmm_threshold = parse_double_value(
        kv.take_or("select.gmm_threshold", std::to_string(c.gmm_threshold)), "select.gmm_threshold");
    c.fluctuation_window = parse_int_value(
        kv.take_or("select.window", std::to_string(c.fluctuation_window)), "select.window");

    c.beta = parse_double_value(kv.take_or("sample.beta", std::to_string(c.beta)), "sample.beta");
    c.alpha = parse_double_value(kv.take_or("mixup.alpha", std::to_string(c.alpha)), "mixup.alpha");
    c.mixup_per_batch = parse_bool_value(
        kv.take_or("mixup.per_batch", c.mixup_per_batch ? "true" : "false"), "mixup.per_batch");

    c.ssl_threshold = parse_double_value(
        kv.take_or("ssl.threshold", std::to_string(c.ssl_threshold)), "ssl.threshold");
    c.ssl_jitter =
        parse_double_value(kv.take_or("ssl.jitter", std::to_string(c.ssl_jitter)), "ssl.jitter");

    if (kv.has("hooks.force_gamma"))
        c.force_gamma = parse_double_value(kv.take("hooks.force_gamma"), "hooks.force_gamma");
    c.force_vtilde_equal_v = parse_bool_value(
        kv.take_or("hooks.force_vtilde_equal_v", c.force_vtilde_equal_v ? "true" : "false"),
        "hooks.force_vtilde_equal_v");

    kv.finish();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open file");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str(), path);
}

void RunConfig::validate() const {
    if (epochs < 1) throw ConfigError("run.epochs", "must be at least 1");
    if (warmup_epochs < 0) throw ConfigError("run.warmup_epochs", "must be nonnegative");
    if (warmup_epochs >= epochs)
        throw ConfigError("run.warmup_epochs", "warmup must be shorter than the epoch budget");
    if (batch_size < 2) throw ConfigError("run.batch_size", "must be at least 2");

    if (source == DataSource::csv) {
        if (csv_path.empty()) throw ConfigError("data.csv_path", "required when data.source = csv");
    } else {
        if (blob_classes < 2) throw ConfigError("data.classes", "need at least 2 classes");
        if (static_cast<int>(blob_sizes.size()) != blob_classes)
            throw ConfigError("data.sizes", "need exactly one size per class");
        for (int n : blob_sizes)
            if (n < 1) throw ConfigError("data.sizes", "class sizes must be positive");
        if (blob_dim < 1) throw ConfigError("data.dim", "must be at least 1");
        if (!(blob_separation > 0.0)) throw ConfigError("data.separation", "must be positive");
        if (!(blob_stddev > 0.0)) throw ConfigError("data.stddev", "must be positive");
        if (test_per_class < 1) throw ConfigError("data.test_per_class", "must be at least 1");
    }

    if (!(noise_ratio >= 0.0) || noise_ratio >= 1.0)
        throw ConfigError("noise.ratio", "must lie in [0, 1)");
    if (noise_kind == NoiseKind::pair && noise_ratio > 0.5)
        throw ConfigError("noise.ratio", "pair noise needs ratio <= 0.5");

    for (int w : trunk_widths)
        if (w < 1) throw ConfigError("net.trunk", "layer widths must be positive");
    if (experts < 1) throw ConfigError("net.experts", "need at least one expert");

    if (!(lr > 0.0)) throw ConfigError("opt.lr", "must be positive");
    if (!(momentum >= 0.0) || momentum >= 1.0) throw ConfigError("opt.momentum", "must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("opt.weight_decay", "must be nonnegative");
    if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ConfigError("opt.lr_decay", "must lie in (0, 1]");
    for (int m : lr_milestones)
        if (m < 0) throw ConfigError("opt.lr_milestones", "milestones must be nonnegative");

    if (assumed_noise_rate >= 0.0 && assumed_noise_rate >= 1.0)
        throw ConfigError("select.assumed_noise_rate", "must lie in [0, 1)");
    if (ramp_epochs < 1) throw ConfigError("select.ramp_epochs", "must be at least 1");
    if (!(gmm_threshold > 0.0) || gmm_threshold >= 1.0)
        throw ConfigError("select.gmm_threshold", "must lie in (0, 1)");
    if (fluctuation_window < 2) throw ConfigError("select.window", "window needs at least 2 epochs");

    if (!(beta >= 1.0)) throw ConfigError("sample.beta", "must be at least 1");
    if (!(alpha > 0.0)) throw ConfigError("mixup.alpha", "must be positive");

    if (!(ssl_threshold >= 0.0) || ssl_threshold > 2.0)
        throw ConfigError("ssl.threshold", "must lie in [0, 2]");
    if (!(ssl_jitter >= 0.0)) throw ConfigError("ssl.jitter", "must be nonnegative");

    if (force_gamma >= 0.0 && force_gamma > 1.0)
        throw ConfigError("hooks.force_gamma", "must lie in [0, 1]");
}

AblateManifest parse_ablate_manifest(const std::string& text, const std::string& path) {
    KeyValues kv = KeyValues::parse_text(text, path);
    require_schema_v1(kv);

    AblateManifest m;
    for (const auto& part : split_list(kv.take("ablate.arms")))
        m.arms.push_back(parse_mode(part, "ablate.arms"));
    m.seeds = parse_u64_list(kv.take("ablate.seeds"), "ablate.seeds");
    m.config_path = kv.take("ablate.config");
    if (!m.config_path.empty() && m.config_path.front() != '/') {
        const auto base = std::filesystem::path(path).parent_path();
        if (!base.empty()) m.config_path = (base / m.config_path).string();
    }
    kv.finish();
    m.validate();
    return m;
}

AblateManifest load_ablate_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open file");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_ablate_manifest(buf.str(), path);
}

void AblateManifest::validate() const {
    if (arms.empty()) throw ConfigError("ablate.arms", "need at least one arm");
    if (seeds.empty()) throw ConfigError("ablate.seeds", "need at least one seed");
    std::set<uint64_t> unique_seeds(seeds.begin(), seeds.end());
    if (unique_seeds.size() != seeds.size())
        throw ConfigError("ablate.seeds", "seeds must be unique");
    std::set<Mode> unique_arms(arms.begin(), arms.end());
    if (unique_arms.size() != arms.size()) throw ConfigError("ablate.arms", "arms must be unique");
    if (config_path.empty()) throw ConfigError("ablate.config", "missing base config path");
}

} // namespace item
