#include "rlsim/table.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rlsim/engine.hpp"

namespace rlsim {

void ResultTable::add(std::uint64_t point, std::string label, std::int64_t rep, std::string metric,
                      double value, std::string note) {
    rows.push_back(ResultRow{point, std::move(label), rep, std::move(metric), value, std::move(note)});
}

void ResultTable::sort() {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.point != b.point) return a.point < b.point;
        // Summary rows (rep = -1) order after the point's repetitions.
        const std::int64_t ra = a.rep < 0 ? std::numeric_limits<std::int64_t>::max() : a.rep;
        const std::int64_t rb = b.rep < 0 ? std::numeric_limits<std::int64_t>::max() : b.rep;
        if (ra != rb) return ra < rb;
        return a.metric < b.metric;
    });
}

void ResultTable::add_summaries(const std::string& metric, std::uint64_t baseline_point) {
    struct Acc {
        std::string label;
        std::vector<double> values;
    };
    std::map<std::uint64_t, Acc> by_point;
    for (const auto& r : rows) {
        if (r.metric != metric || r.rep < 0) continue;
        auto& acc = by_point[r.point];
        acc.label = r.label;
        acc.values.push_back(r.value);
    }
    if (by_point.empty()) return;

    std::map<std::uint64_t, double> means;
    for (const auto& [point, acc] : by_point) {
        double mean = 0.0;
        for (double v : acc.values) mean += v;
        mean /= static_cast<double>(acc.values.size());
        double var = 0.0;
        for (double v : acc.values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(acc.values.size());
        means[point] = mean;
        add(point, acc.label, -1, "mean:" + metric, mean);
        add(point, acc.label, -1, "std:" + metric, std::sqrt(var));
    }
    const auto base = means.find(baseline_point);
    if (base == means.end()) return;
    for (const auto& [point, mean] : means) {
        if (mean > 0.0) {
            add(point, by_point[point].label, -1, "speedup_vs_baseline:" + metric, base->second / mean);
        }
    }
}

double ResultTable::get(std::uint64_t point, std::int64_t rep, const std::string& metric) const {
    for (const auto& r : rows) {
        if (r.point == point && r.rep == rep && r.metric == metric) return r.value;
    }
    throw std::out_of_range("ResultTable::get: no row " + std::to_string(point) + "/" +
                            std::to_string(rep) + "/" + metric);
}

bool ResultTable::has(std::uint64_t point, std::int64_t rep, const std::string& metric) const {
    for (const auto& r : rows) {
        if (r.point == point && r.rep == rep && r.metric == metric) return true;
    }
    return false;
}

namespace {

std::string escape_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string ResultTable::to_csv() const {
    std::string out = "point,label,rep,metric,value,note\n";
    for (const auto& r : rows) {
        out += std::to_string(r.point) + "," + escape_csv(r.label) + "," + std::to_string(r.rep) + "," +
               escape_csv(r.metric) + "," + format_number(r.value) + "," + escape_csv(r.note) + "\n";
    }
    return out;
}

std::string ResultTable::to_jsonl() const {
    std::string out;
    for (const auto& r : rows) {
        out += "{\"point\":" + std::to_string(r.point) + ",\"label\":\"" + r.label +
               "\",\"rep\":" + std::to_string(r.rep) + ",\"metric\":\"" + r.metric +
               "\",\"value\":" + format_number(r.value);
        if (!r.note.empty()) out += ",\"note\":\"" + r.note + "\"";
        out += "}\n";
    }
    return out;
}

ResultTable ResultTable::from_csv(const std::string& text) {
    ResultTable t;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() < 5) throw std::invalid_argument("ResultTable::from_csv: malformed row: " + line);
        ResultRow r;
        r.point = std::stoull(f[0]);
        r.label = f[1];
        r.rep = std::stoll(f[2]);
        r.metric = f[3];
        r.value = std::stod(f[4]);
        if (f.size() > 5) r.note = f[5];
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace rlsim
