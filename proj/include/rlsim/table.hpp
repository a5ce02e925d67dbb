#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rlsim {

// Long-format results: one row per (sweep point, repetition, metric).
// Summary rows use rep = -1.
struct ResultRow {
    std::uint64_t point = 0;
    std::string label;       // e.g. "async_generation_ratio=2"
    std::int64_t rep = 0;
    std::string metric;
    double value = 0.0;
    std::string note;        // diagnostics for failed runs, usually empty
};

struct ResultTable {
    std::vector<ResultRow> rows;

    void add(std::uint64_t point, std::string label, std::int64_t rep, std::string metric, double value,
             std::string note = "");

    // Deterministic ordering: (point, rep, metric); summaries sort behind
    // their point's repetitions.
    void sort();

    // Mean/std per (point, metric) plus speedup rows against a baseline
    // point's metric, appended as summary rows (rep = -1).
    void add_summaries(const std::string& metric, std::uint64_t baseline_point);

    double get(std::uint64_t point, std::int64_t rep, const std::string& metric) const;
    bool has(std::uint64_t point, std::int64_t rep, const std::string& metric) const;

    std::string to_csv() const;
    std::string to_jsonl() const;
    static ResultTable from_csv(const std::string& text);
};

}  // namespace rlsim
