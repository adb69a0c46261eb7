#include "item/metrics_io.hpp"

#include <fstream>
#include <sstream>

#include "item/errors.hpp"
#include "item/format.hpp"

namespace item {

std::string metrics_csv(const MetricsLog& log) {
    std::string s =
        "epoch,class,precision,recall,fscore,test_accuracy,selected_count,train_loss,"
        "imbalance_ratio,imbalance_degenerate,selection_fallback,head_draws,v,s,vtilde\n";
    for (const auto& e : log.epochs) {
        for (int c = 0; c < log.class_count; ++c) {
            const size_t k = static_cast<size_t>(c);
            s += std::to_string(e.epoch) + ',' + std::to_string(c) + ',';
            s += format_g17(e.precision[k]) + ',' + format_g17(e.recall[k]) + ',' +
                 format_g17(e.fscore[k]) + ',';
            s += format_g17(e.class_test_accuracy[k]) + ',';
            s += std::to_string(e.class_selected[k]);
            s += ",,,,,,"; // train_loss .. head_draws are summary-row columns
            s += format_g17(e.v[k]) + ',' + format_g17(e.s[k]) + ',' + format_g17(e.vtilde[k]);
            s += '\n';
        }
        s += std::to_string(e.epoch) + ",-1,";
        s += format_g17(e.macro_precision) + ',' + format_g17(e.macro_recall) + ',' +
             format_g17(e.macro_f) + ',';
        s += format_g17(e.test_accuracy) + ',';
        s += std::to_string(e.selected_count) + ',';
        s += format_g17(e.train_loss) + ',';
        s += format_g17(e.imbalance) + ',';
        s += std::string(e.imbalance_degenerate ? "1" : "0") + ',';
        s += std::string(e.selection_fallback ? "1" : "0") + ',';
        for (size_t h = 0; h < e.head_draws.size(); ++h) {
            if (h) s += ';';
            s += std::to_string(e.head_draws[h]);
        }
        s += ",,,\n"; // v, s, vtilde are class-row columns
    }
    return s;
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
    write_text_file(path, metrics_csv(log));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw ParseError(path, 0, "write failed");
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open file");
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string json_number(double v) { return format_g17(v); }

std::string json_array(const std::vector<double>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += json_number(v[i]);
    }
    s += ']';
    return s;
}

std::string json_array(const std::vector<long>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    s += ']';
    return s;
}

JsonObject& JsonObject::field_raw(const std::string& name, const std::string& json) {
    if (!body_.empty()) body_ += ',';
    body_ += '"' + json_escape(name) + "\":" + json;
    return *this;
}

JsonObject& JsonObject::field(const std::string& name, const std::string& text) {
    return field_raw(name, '"' + json_escape(text) + '"');
}

JsonObject& JsonObject::field(const std::string& name, double v) {
    return field_raw(name, json_number(v));
}

JsonObject& JsonObject::field(const std::string& name, long long v) {
    return field_raw(name, std::to_string(v));
}

JsonObject& JsonObject::field(const std::string& name, uint64_t v) {
    return field_raw(name, std::to_string(v));
}

JsonObject& JsonObject::field(const std::string& name, bool v) {
    return field_raw(name, v ? "true" : "false");
}

std::string JsonObject::str() const { return "{" + body_ + "}"; }

} // namespace item
