#pragma once

#include "attenmfg/core_model.hpp"
#include "attenmfg/evaluator.hpp"
#include "attenmfg/manifest.hpp"
#include "attenmfg/oracle.hpp"
#include "attenmfg/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace attenmfg::harness {

namespace fs = std::filesystem;

nlohmann::ordered_json describe(const GeneratorConfig& cfg);
nlohmann::ordered_json describe(const TrainConfig& cfg);

// generate: `count` instances named <model>_<seed>.json with seeds
// seed, seed+1, ...
struct GenerateOptions {
    GeneratorConfig generator;
    int count = 20;
    std::uint64_t seed = 0;
    bool dump_features = false;  // also write <stem>.features.json
};
RunManifest cmd_generate(const GenerateOptions& opt, const fs::path& out);

// train: policy.ckpt, metrics.csv. Resumes from `resume` when set.
struct TrainOptions {
    TrainConfig train;
    GeneratorConfig generator;
    std::optional<fs::path> resume;
    bool quiet = false;
};
RunManifest cmd_train(const TrainOptions& opt, const fs::path& out);

enum class OracleMethod { bnb, exhaustive };

struct OracleOptions {
    OracleMethod method = OracleMethod::bnb;
    double time_budget = kDefaultTimeBudgetSeconds;
    std::int64_t node_budget = kDefaultNodeBudget;
};

// solve-oracle: <stem>.oracle.json per instance. Sets `any_unproven` when a
// search stopped at its time budget.
struct SolveOptions {
    std::vector<fs::path> instances;  // files or directories
    OracleOptions oracle;
    int threads = 1;
};
RunManifest cmd_solve_oracle(const SolveOptions& opt, const fs::path& out, bool* any_unproven);

// evaluate: gap_report.csv and summary.csv.
struct EvaluateOptions {
    fs::path checkpoint;
    fs::path instance_dir;
    bool with_oracle = true;
    OracleOptions oracle;
    int threads = 1;
};
RunManifest cmd_evaluate(const EvaluateOptions& opt, const fs::path& out);

// Greedy decode plus optional oracle for one instance.
GapReport evaluate_instance(const std::string& id, const Instance& instance,
                            const PolicyParams& params, bool with_oracle,
                            const OracleOptions& oracle);

std::string summary_csv(std::span<const GapReport> rows);

// gap-matrix: rows are checkpoints (named by the configuration they were
// trained on), columns are evaluation configurations.
struct GapMatrixOptions {
    std::vector<fs::path> checkpoints;
    std::vector<GeneratorConfig> eval_configs;
    int n_eval = 20;
    std::uint64_t seed = 0;
    OracleOptions oracle;
    int threads = 1;
};

struct GapMatrix {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<std::optional<double>>> mean_gap;  // nullopt: NA
    std::vector<std::vector<int>> proven;

    std::string csv() const;
    // Compares cells whose row and column name match against the rest.
    struct Direction {
        std::optional<double> matched_mean;
        std::optional<double> mismatched_mean;
        bool matched_lower = false;
    };
    Direction direction() const;
};

GapMatrix compute_gap_matrix(const GapMatrixOptions& opt, RunManifest* manifest = nullptr);
RunManifest cmd_gap_matrix(const GapMatrixOptions& opt, const fs::path& out);

// Instance files under `dir` (sorted by name), or `dir` itself when it is a file.
std::vector<fs::path> list_instances(const fs::path& dir);

void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

// `verify`: invariant suites shared with the acceptance tests.
struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct DualPathOptions {
    int instances = 100;
    int schedules = 10;
    std::uint64_t seed = 1;
    double tolerance = 1e-9;
};
SuiteResult suite_dual_path(const DualPathOptions& opt);

struct CubeOptions {
    int instances = 50;
    int max_horizon = 5;
    std::uint64_t seed = 2;
};
SuiteResult suite_throughput_cube(const CubeOptions& opt);

struct MaskingOptions {
    int rollouts = 10000;
    int instances = 50;
    std::uint64_t seed = 3;
    int hidden = 16;
    int heads = 2;
};
SuiteResult suite_masking(const MaskingOptions& opt);

struct GradientOptions {
    std::uint64_t seed = 4;
    double tolerance = 1e-4;
};
SuiteResult suite_gradient(const GradientOptions& opt);

struct OracleSuiteOptions {
    int instances = 50;
    std::int64_t max_space = 1'000'000;  // (M+1)^(T*J)
    int assignment_instances = 20;
    std::uint64_t seed = 5;
};
SuiteResult suite_oracle(const OracleSuiteOptions& opt);

SuiteResult suite_checkpoint_roundtrip(std::uint64_t seed);

struct VerifyOptions {
    bool full = false;  // acceptance-size workloads
    std::uint64_t seed = 0;
};
std::vector<SuiteResult> run_verify(const VerifyOptions& opt);

}  // namespace attenmfg::harness
