#include "attenmfg/harness.hpp"

#include "attenmfg/checkpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace attenmfg::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

nlohmann::ordered_json range_json(Range r) { return nlohmann::ordered_json::array({r.lo, r.hi}); }

nlohmann::ordered_json describe(const OracleOptions& o) {
    return {{"method", o.method == OracleMethod::bnb ? "bnb" : "exhaustive"},
            {"time_budget", o.time_budget},
            {"node_budget", o.node_budget}};
}

OracleResult run_oracle(const FeatureTensor& f, const EconomicParams& econ,
                        const OracleOptions& o) {
    if (o.method == OracleMethod::exhaustive) return solve_exhaustive(f, econ, o.node_budget);
    return solve_bnb(f, econ, o.time_budget);
}

int max_site(const Instance& inst) {
    int top = 0;
    for (const auto& m : inst.machines) top = std::max(top, m.site);
    return top;
}

}  // namespace

nlohmann::ordered_json describe(const GeneratorConfig& g) {
    nlohmann::ordered_json j;
    j["name"] = g.name;
    j["family"] = g.family == SiteFamily::fixed ? "fixed" : "random";
    j["n_sites"] = g.n_sites;
    j["max_random_sites"] = g.max_random_sites;
    j["n_machines"] = g.n_machines;
    j["horizon"] = g.horizon;
    j["J"] = g.max_maint_per_period;
    j["n_scenarios"] = g.n_scenarios;
    j["preventive_cost"] = range_json(g.preventive_cost);
    j["corrective_ratio"] = range_json(g.corrective_ratio);
    j["weibull_shape"] = range_json(g.weibull_shape);
    j["weibull_scale"] = range_json(g.weibull_scale);
    j["observe_time"] = range_json(g.observe_time);
    j["nominal_rate"] = range_json(g.nominal_rate);
    j["demand_sigma"] = g.demand_sigma;
    j["idle_penalty"] = g.idle_penalty;
    j["demand_penalty"] = g.demand_penalty;
    j["travel_cost"] = g.travel_cost;
    return j;
}

nlohmann::ordered_json describe(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["epochs"] = c.epochs;
    j["instances_per_epoch"] = c.instances_per_epoch;
    j["batch"] = c.batch;
    j["lr"] = c.lr;
    j["baseline_rollouts"] = c.baseline_rollouts;
    j["baseline"] = c.baseline == BaselineKind::greedy ? "greedy" : "rollout_mean";
    j["grad_clip"] = c.grad_clip;
    j["holdout"] = c.holdout;
    j["hidden"] = c.hyper.hidden;
    j["heads"] = c.hyper.heads;
    j["layers"] = c.hyper.layers;
    j["site_vocab"] = c.hyper.site_vocab;
    j["logit_clip"] = c.hyper.logit_clip;
    return j;
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<fs::path> list_instances(const fs::path& dir) {
    if (fs::is_regular_file(dir)) return {dir};
    if (!fs::is_directory(dir)) throw Error("no such instance file or directory '" + dir.string() + "'");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (!e.is_regular_file() || e.path().extension() != ".json") continue;
        if (name == kManifestName || name.find(".oracle.") != std::string::npos ||
            name.find(".features.") != std::string::npos)
            continue;
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

Instance load_instance_file(const fs::path& path) {
    try {
        return load_instance(read_text(path));
    } catch (const ParseError& e) {
        throw ParseError(path.filename().string() + ": " + e.field(), e.what());
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace

RunManifest cmd_generate(const GenerateOptions& opt, const fs::path& out) {
    const auto start = Clock::now();
    if (opt.count < 0) throw InvalidParameters("count must be >= 0");
    opt.generator.validate();
    fs::create_directories(out);
    RunManifest man;
    man.command = "generate";
    man.config = {{"generator", describe(opt.generator)},
                  {"count", opt.count},
                  {"dump_features", opt.dump_features}};
    man.seeds["seed"] = opt.seed;
    for (int i = 0; i < opt.count; ++i) {
        GeneratorConfig cfg = opt.generator;
        cfg.seed = opt.seed + static_cast<std::uint64_t>(i);
        const Instance inst = generate_instance(cfg);
        const fs::path file = out / (cfg.name + "_" + std::to_string(cfg.seed) + ".json");
        write_text(file, save_instance(inst));
        man.add_output(out, file);
        if (opt.dump_features) {
            const fs::path dump = out / (file.stem().string() + ".features.json");
            write_text(dump, dump_features_json(inst));
            man.add_output(out, dump);
        }
    }
    man.wall_times["total"] = seconds_since(start);
    man.write(out);
    return man;
}

RunManifest cmd_train(const TrainOptions& opt, const fs::path& out) {
    const auto start = Clock::now();
    fs::create_directories(out);
    RunManifest man;
    man.command = "train";
    man.config = {{"train", describe(opt.train)}, {"generator", describe(opt.generator)}};
    man.seeds["seed"] = opt.train.seed;

    std::optional<Trainer> trainer;
    if (opt.resume) {
        man.add_input(*opt.resume);
        trainer.emplace(opt.train, opt.generator, read_checkpoint_file(opt.resume->string()));
    } else {
        trainer.emplace(opt.train, opt.generator);
    }

    const fs::path ckpt = out / "policy.ckpt";
    const fs::path metrics = out / "metrics.csv";
    std::string csv(kMetricsHeader);
    csv += '\n';
    nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
    while (trainer->epoch() < opt.train.epochs) {
        const EpochMetrics m = trainer->run_epoch();
        csv += metrics_row(m) + "\n";
        epochs.push_back(m.seconds);
        write_text(metrics, csv);
        write_checkpoint_file(ckpt.string(), trainer->checkpoint());
        if (!opt.quiet) std::cerr << "epoch " << metrics_row(m) << '\n';
    }
    if (!fs::exists(ckpt)) write_checkpoint_file(ckpt.string(), trainer->checkpoint());
    write_text(metrics, csv);
    man.add_output(out, ckpt);
    man.add_output(out, metrics);
    man.wall_times["epochs"] = epochs;
    man.wall_times["total"] = seconds_since(start);
    man.write(out);
    return man;
}

RunManifest cmd_solve_oracle(const SolveOptions& opt, const fs::path& out, bool* any_unproven) {
    const auto start = Clock::now();
    std::vector<fs::path> files;
    for (const auto& p : opt.instances)
        for (auto& f : list_instances(p)) files.push_back(std::move(f));
    fs::create_directories(out);
    RunManifest man;
    man.command = "solve-oracle";
    man.config = {{"oracle", describe(opt.oracle)}};
    for (const auto& f : files) man.add_input(f);

    std::vector<OracleResult> results(files.size());
    parallel_for(static_cast<int>(files.size()), opt.threads, [&](int i) {
        const Instance inst = load_instance_file(files[i]);
        results[i] = run_oracle(assemble_features(inst), inst.economics, opt.oracle);
    });
    bool unproven = false;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const fs::path file = out / (files[i].stem().string() + ".oracle.json");
        write_text(file, oracle_result_json(results[i]) + "\n");
        man.add_output(out, file);
        unproven = unproven || !results[i].proven;
    }
    if (any_unproven) *any_unproven = unproven;
    man.wall_times["total"] = seconds_since(start);
    man.write(out);
    return man;
}

GapReport evaluate_instance(const std::string& id, const Instance& inst,
                            const PolicyParams& params, bool with_oracle,
                            const OracleOptions& oracle) {
    GapReport row;
    row.instance_id = id;
    const auto start = Clock::now();
    const FeatureTensor f = assemble_features(inst);
    const PolicyRollout r = rollout(f, inst.economics, params, DecodeMode::greedy);
    row.decode_ms = 1000.0 * seconds_since(start);
    row.policy_cost = r.cost;
    if (with_oracle) {
        const OracleResult o = run_oracle(f, inst.economics, oracle);
        row.oracle_cost = o.cost;
        row.oracle_ms = o.ms;
        row.oracle_proven = o.proven;
        if (o.proven) row.gap_pct = gap(o.cost, r.cost);
    }
    return row;
}

std::string summary_csv(std::span<const GapReport> rows) {
    const GapSummary s = summarize_gaps(rows);
    int unproven = 0;
    double policy = 0.0;
    for (const auto& r : rows) {
        unproven += r.oracle_cost && !r.oracle_proven ? 1 : 0;
        policy += r.policy_cost;
    }
    std::string out = "instances,proven,unproven,mean_gap,median_gap,q1_gap,q3_gap,mean_policy_cost\n";
    out += std::to_string(rows.size()) + "," + std::to_string(s.count) + "," +
           std::to_string(unproven) + ",";
    if (s.count > 0)
        out += fmt(s.mean) + "," + fmt(s.median) + "," + fmt(s.q1) + "," + fmt(s.q3) + ",";
    else
        out += "NA,NA,NA,NA,";
    out += rows.empty() ? "NA" : fmt(policy / static_cast<double>(rows.size()));
    out += '\n';
    return out;
}

RunManifest cmd_evaluate(const EvaluateOptions& opt, const fs::path& out) {
    const auto start = Clock::now();
    const Checkpoint ck = read_checkpoint_file(opt.checkpoint.string());
    const auto files = list_instances(opt.instance_dir);
    fs::create_directories(out);
    RunManifest man;
    man.command = "evaluate";
    man.config = {{"with_oracle", opt.with_oracle}, {"oracle", describe(opt.oracle)}};
    man.add_input(opt.checkpoint);
    for (const auto& f : files) man.add_input(f);

    std::vector<Instance> instances;
    for (const auto& f : files) {
        instances.push_back(load_instance_file(f));
        if (max_site(instances.back()) >= ck.params.hyper.site_vocab)
            throw ValidationError(f.string() + ": site id exceeds the checkpoint's site vocabulary");
    }
    std::vector<GapReport> rows(files.size());
    parallel_for(static_cast<int>(files.size()), opt.threads, [&](int i) {
        rows[i] = evaluate_instance(files[i].stem().string(), instances[i], ck.params,
                                    opt.with_oracle, opt.oracle);
    });
    const fs::path report = out / "gap_report.csv";
    const fs::path summary = out / "summary.csv";
    write_text(report, gap_report_csv(rows));
    write_text(summary, summary_csv(rows));
    man.add_output(out, report);
    man.add_output(out, summary);
    double decode = 0.0;
    for (const auto& r : rows) decode += r.decode_ms;
    man.wall_times["mean_decode_ms"] = rows.empty() ? 0.0 : decode / static_cast<double>(rows.size());
    man.wall_times["total"] = seconds_since(start);
    man.write(out);
    return man;
}

std::string GapMatrix::csv() const {
    std::string out = "train_config";
    for (const auto& c : cols) out += "," + c;
    out += '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out += rows[r];
        for (std::size_t c = 0; c < cols.size(); ++c)
            out += "," + (mean_gap[r][c] ? fmt(*mean_gap[r][c]) : std::string("NA"));
        out += '\n';
    }
    return out;
}

GapMatrix::Direction GapMatrix::direction() const {
    double matched = 0.0, mismatched = 0.0;
    int n_matched = 0, n_mismatched = 0;
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (!mean_gap[r][c]) continue;
            if (rows[r] == cols[c]) {
                matched += *mean_gap[r][c];
                ++n_matched;
            } else {
                mismatched += *mean_gap[r][c];
                ++n_mismatched;
            }
        }
    Direction d;
    if (n_matched) d.matched_mean = matched / n_matched;
    if (n_mismatched) d.mismatched_mean = mismatched / n_mismatched;
    d.matched_lower = d.matched_mean && d.mismatched_mean && *d.matched_mean < *d.mismatched_mean;
    return d;
}

GapMatrix compute_gap_matrix(const GapMatrixOptions& opt, RunManifest* man) {
    if (opt.checkpoints.empty() || opt.eval_configs.empty())
        throw InvalidParameters("gap-matrix needs at least one checkpoint and one configuration");
    GapMatrix gm;
    std::vector<Checkpoint> ckpts;
    for (const auto& p : opt.checkpoints) {
        ckpts.push_back(read_checkpoint_file(p.string()));
        gm.rows.push_back(ckpts.back().train_config.empty() ? p.stem().string()
                                                            : ckpts.back().train_config);
        if (man) man->add_input(p);
    }
    for (const auto& g : opt.eval_configs) gm.cols.push_back(g.name);
    gm.mean_gap.assign(gm.rows.size(), std::vector<std::optional<double>>(gm.cols.size()));
    gm.proven.assign(gm.rows.size(), std::vector<int>(gm.cols.size(), 0));

    for (std::size_t c = 0; c < opt.eval_configs.size(); ++c) {
        // instances and oracle results are shared by every row of the column
        std::vector<Instance> instances;
        std::vector<FeatureTensor> features;
        for (int i = 0; i < opt.n_eval; ++i) {
            GeneratorConfig cfg = opt.eval_configs[c];
            cfg.seed = opt.seed + static_cast<std::uint64_t>(i);
            instances.push_back(generate_instance(cfg));
            features.push_back(assemble_features(instances.back()));
        }
        std::vector<std::optional<OracleResult>> oracle(instances.size());
        parallel_for(opt.n_eval, opt.threads, [&](int i) {
            try {
                oracle[i] = run_oracle(features[i], instances[i].economics, opt.oracle);
            } catch (const BudgetExceeded&) {
                oracle[i].reset();
            }
        });
        for (std::size_t r = 0; r < ckpts.size(); ++r) {
            std::vector<double> gaps(instances.size(), 0.0);
            std::vector<char> ok(instances.size(), 0);
            bool usable = true;
            for (const auto& inst : instances)
                usable = usable && max_site(inst) < ckpts[r].params.hyper.site_vocab;
            if (!usable) continue;
            parallel_for(opt.n_eval, opt.threads, [&](int i) {
                if (!oracle[i] || !oracle[i]->proven) return;
                const PolicyRollout pr =
                    rollout(features[i], instances[i].economics, ckpts[r].params, DecodeMode::greedy);
                gaps[i] = gap(oracle[i]->cost, pr.cost);
                ok[i] = 1;
            });
            double total = 0.0;
            int n = 0;
            for (std::size_t i = 0; i < gaps.size(); ++i)
                if (ok[i]) {
                    total += gaps[i];
                    ++n;
                }
            gm.proven[r][c] = n;
            // any unproven oracle makes the cell NA
            if (n == opt.n_eval && n > 0) gm.mean_gap[r][c] = total / n;
        }
    }
    return gm;
}

RunManifest cmd_gap_matrix(const GapMatrixOptions& opt, const fs::path& out) {
    const auto start = Clock::now();
    fs::create_directories(out);
    RunManifest man;
    man.command = "gap-matrix";
    nlohmann::ordered_json cfgs = nlohmann::ordered_json::array();
    for (const auto& g : opt.eval_configs) cfgs.push_back(describe(g));
    man.config = {{"eval_configs", cfgs}, {"n_eval", opt.n_eval}, {"oracle", describe(opt.oracle)}};
    man.seeds["seed"] = opt.seed;
    const GapMatrix gm = compute_gap_matrix(opt, &man);

    const fs::path matrix = out / "gap_matrix.csv";
    write_text(matrix, gm.csv());
    const auto d = gm.direction();
    std::string report = "matched_mean_gap,mismatched_mean_gap,matched_lower\n";
    report += (d.matched_mean ? fmt(*d.matched_mean) : std::string("NA")) + "," +
              (d.mismatched_mean ? fmt(*d.mismatched_mean) : std::string("NA")) + "," +
              (d.matched_lower ? "yes" : "no") + "\n";
    const fs::path direction = out / "direction.csv";
    write_text(direction, report);
    man.add_output(out, matrix);
    man.add_output(out, direction);
    man.wall_times["total"] = seconds_since(start);
    man.write(out);
    return man;
}

}  // namespace attenmfg::harness
