#include "attenmfg/checkpoint.hpp"
#include "attenmfg/harness.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

using namespace attenmfg;
using namespace attenmfg::harness;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

fs::path scratch_root() {
    const fs::path p = fs::temp_directory_path() / ("attenmfg_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Outcome from_suite(const SuiteResult& r, double limit_seconds) {
    const bool fast = r.seconds < limit_seconds;
    return {r.passed && fast, r.detail + (fast ? "" : ", over the time limit")};
}

GenerateOptions gen_opts(const std::string& name, int count, std::uint64_t seed) {
    GenerateOptions o;
    o.generator = preset(name);
    o.count = count;
    o.seed = seed;
    return o;
}

TrainOptions desk_training(const std::string& config, std::uint64_t seed, int epochs) {
    TrainOptions t;
    t.generator = preset(config);
    t.train.epochs = epochs;
    t.train.instances_per_epoch = 1280;
    t.train.batch = 16;
    t.train.lr = 1e-3;
    t.train.baseline_rollouts = 8;
    t.train.holdout = 32;
    t.train.seed = seed;
    t.train.hyper.hidden = 32;
    t.train.hyper.heads = 4;
    t.train.hyper.layers = 2;
    t.quiet = true;
    return t;
}

constexpr std::uint64_t kHoldoutSeed = 900000;
constexpr int kHoldoutCount = 20;

struct GapStats {
    int proven = 0;
    double mean = 0.0;
};

GapStats holdout_gap(const PolicyParams& params, const std::vector<Instance>& instances) {
    std::vector<GapReport> rows;
    for (std::size_t i = 0; i < instances.size(); ++i)
        rows.push_back(evaluate_instance(std::to_string(i), instances[i], params, true, {}));
    const GapSummary s = summarize_gaps(rows);
    return {s.count, s.mean};
}

Outcome learning_efficacy(const fs::path& root) {
    const TrainOptions opt = desk_training("D_L2P4M6_J2", 1, 8);
    std::vector<Instance> holdout;
    for (int i = 0; i < kHoldoutCount; ++i) {
        GeneratorConfig g = opt.generator;
        g.seed = kHoldoutSeed + i;
        holdout.push_back(generate_instance(g));
    }
    const GapStats untrained =
        holdout_gap(PolicyParams::initialize(opt.train.hyper, mix_seed(opt.train.seed, 0)), holdout);

    const double cpu0 = cpu_seconds();
    cmd_train(opt, root / "c6");
    const double cpu = cpu_seconds() - cpu0;
    const Checkpoint ckpt = read_checkpoint_file((root / "c6" / "policy.ckpt").string());
    const GapStats trained = holdout_gap(ckpt.params, holdout);

    const bool all_proven = trained.proven == kHoldoutCount && untrained.proven == kHoldoutCount;
    Outcome o;
    o.passed = all_proven && cpu <= 1800.0 && trained.mean <= 10.0 && trained.mean < untrained.mean;
    o.detail = "trained gap " + fmt("%.3f", trained.mean) + "% vs untrained " +
               fmt("%.3f", untrained.mean) + "% over " + std::to_string(trained.proven) +
               " proven instances, training " + fmt("%.1f", cpu) + " CPU s";
    return o;
}

Outcome inference_speed() {
    GeneratorConfig g = preset("L5P10M25");
    g.seed = 42;
    const Instance inst = generate_instance(g);
    const PolicyParams params = PolicyParams::initialize(PolicyHyper{}, 42);
    double worst = 0.0;
    bool feasible = true;
    for (int rep = 0; rep < 3; ++rep) {
        const auto start = Clock::now();
        const FeatureTensor f = assemble_features(inst);
        const PolicyRollout r = rollout(f, inst.economics, params, DecodeMode::greedy);
        worst = std::max(worst, std::chrono::duration<double>(Clock::now() - start).count());
        feasible = feasible && check_feasible(r.schedule, f).empty();
    }
    return {feasible && worst < 1.0,
            "worst of 3 greedy decodes " + fmt("%.3f", worst) + " s (features included), hidden " +
                std::to_string(params.hyper.hidden) + ", layers " + std::to_string(params.hyper.layers)};
}

bool same_outputs(const fs::path& a, const fs::path& b, std::string* why) {
    const RunManifest ma = RunManifest::read(a / std::string(kManifestName));
    const RunManifest mb = RunManifest::read(b / std::string(kManifestName));
    if (ma.content_hash() != mb.content_hash()) {
        *why = ma.command + " manifest hash differs";
        return false;
    }
    for (std::size_t i = 0; i < ma.outputs.size(); ++i) {
        const std::string x = stable_artifact_bytes(a / ma.outputs[i].path);
        const std::string y = stable_artifact_bytes(b / mb.outputs[i].path);
        if (x != y) {
            *why = ma.outputs[i].path + " differs";
            return false;
        }
    }
    return true;
}

Outcome determinism(const fs::path& root) {
    TrainOptions t;
    t.generator = preset("D_L2P3M3_J1");
    t.train.epochs = 2;
    t.train.instances_per_epoch = 64;
    t.train.batch = 16;
    t.train.baseline_rollouts = 4;
    t.train.holdout = 8;
    t.train.seed = 8;
    t.train.threads = 1;
    t.train.hyper.hidden = 16;
    t.train.hyper.heads = 2;
    t.train.hyper.layers = 1;
    t.quiet = true;
    std::string hashes[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path d = root / ("c8_" + std::to_string(run));
        cmd_generate(gen_opts("D_L2P3M3_J1", 10, 80), d / "generate");
        cmd_train(t, d / "train");
        EvaluateOptions e;
        e.checkpoint = d / "train" / "policy.ckpt";
        e.instance_dir = d / "generate";
        hashes[run] = cmd_evaluate(e, d / "evaluate").content_hash();
    }
    std::string why;
    bool ok = true;
    for (const char* step : {"generate", "train", "evaluate"})
        ok = ok && same_outputs(root / "c8_0" / step, root / "c8_1" / step, &why);
    return {ok, ok ? "generate, train and evaluate reproduce; evaluate hash " + hashes[0].substr(0, 16)
                   : why};
}

Outcome gap_matrix(const fs::path& root) {
    const std::vector<std::string> configs{"D_L2P4M6_J2", "D_L3P5M8_J2"};
    GapMatrixOptions opt;
    opt.n_eval = kHoldoutCount;
    opt.seed = kHoldoutSeed;
    for (const auto& c : configs) {
        const fs::path dir = root / ("c9_" + c);
        cmd_train(desk_training(c, 2, 6), dir);
        opt.checkpoints.push_back(dir / "policy.ckpt");
        opt.eval_configs.push_back(preset(c));
    }
    cmd_gap_matrix(opt, root / "c9");
    const GapMatrix gm = compute_gap_matrix(opt);
    std::string cells;
    for (std::size_t r = 0; r < gm.rows.size(); ++r)
        for (std::size_t c = 0; c < gm.cols.size(); ++c)
            cells += " " + gm.rows[r] + "->" + gm.cols[c] + "=" +
                     (gm.mean_gap[r][c] ? fmt("%.3f", *gm.mean_gap[r][c]) + "%" : std::string("NA"));
    const auto d = gm.direction();
    const bool emitted = fs::exists(root / "c9" / "gap_matrix.csv") && fs::exists(root / "c9" / "direction.csv");
    return {emitted, "cells" + cells + "; matched cells lower: " + (d.matched_lower ? "yes" : "no")};
}

}  // namespace

int main() {
    const fs::path root = scratch_root();
    struct Criterion {
        int id;
        std::string name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "dual-path cost equality", [] { return from_suite(suite_dual_path({100, 10, 1, 1e-9}), 10.0); }},
        {2, "throughput cube equals simulator", [] { return from_suite(suite_throughput_cube({50, 5, 2}), 5.0); }},
        {3, "masking feasibility", [] { return from_suite(suite_masking({10000, 50, 3, 16, 2}), 60.0); }},
        {4, "gradient check", [] { return from_suite(suite_gradient({4, 1e-4}), 60.0); }},
        {5, "oracle optimality", [] { return from_suite(suite_oracle({50, 1'000'000, 20, 5}), 300.0); }},
        {6, "learning efficacy", [&] { return learning_efficacy(root); }},
        {7, "inference speed", [] { return inference_speed(); }},
        {8, "determinism", [&] { return determinism(root); }},
        {9, "gap matrix direction (reported)", [&] { return gap_matrix(root); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        std::printf("%s criterion %d %s: %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.passed ? 0 : 1;
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    return failures == 0 ? 0 : 1;
}
