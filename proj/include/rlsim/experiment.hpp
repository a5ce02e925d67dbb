#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "rlsim/table.hpp"

namespace rlsim {

enum class ExperimentMode : std::uint8_t {
    sync,
    async,
    batch_vs_queue,
    replication,
    env_async,
    redundancy,
    bounds,
    offpolicy,
};

const char* to_string(ExperimentMode m) noexcept;

// A validated experiment description: the raw (defaulted) JSON document plus
// the expanded sweep axes. Field names follow the training-config convention
// (async_generation_ratio, rollout_batch_size, num_env_groups, ...).
struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::bounds;
    std::uint64_t seed = 42;
    std::int64_t repetitions = 1;
    std::string document;  // canonical echo of the full config with defaults applied

    struct SweepAxis {
        std::string param;           // dotted path into the document
        std::vector<double> values;
    };
    std::vector<SweepAxis> sweep;

    std::uint64_t point_count() const;
    // The config document with sweep point `index` substituted in.
    std::string document_for_point(std::uint64_t index) const;
    std::string label_for_point(std::uint64_t index) const;
};

// Parses and validates a config file. Unknown keys are rejected with their
// location; defaults are applied and echoed into `document`.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// Derives the per-run seed for (master seed, sweep point, repetition).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point, std::uint64_t rep);

// Runs repetitions x sweep points; failures are recorded per-row under the
// "error" metric without aborting the table. With an out_dir, pipeline modes
// also write per-step records (steps-p<point>-r<rep>.jsonl plus a run summary)
// and the offpolicy mode writes learning curves (curve-p<point>-r<rep>.csv).
ResultTable run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");

struct BoundVerdict {
    std::uint64_t checked = 0;
    std::vector<std::string> violations;
    bool pass() const { return violations.empty(); }
    std::string to_string() const;
};

// Realized-moment completion bound check over every (point, rep) group in the
// table that carries a makespan tuple.
BoundVerdict verify_bounds(const ResultTable& table);

struct FigureCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct FigureReport {
    std::string figure;
    ResultTable table;
    std::vector<FigureCheck> checks;
    bool pass() const;
    std::string to_string() const;
};

// Runs the documented recipe for a named figure-style experiment and
// evaluates its attached acceptance checks.
// Names: fig9, fig10, fig3a-shape, fig7-direction, fig8-direction, takeaway3.
FigureReport reproduce_figure(const std::string& name, std::uint64_t seed = 42);

std::vector<std::string> known_figures();

}  // namespace rlsim
