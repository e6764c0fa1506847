#include "attenmfg/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <optional>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using namespace attenmfg;

// --config accepts TOML or JSON; JSON objects become sections, so
// {"train": {"epochs": 2}} is the same as `[train] epochs = 2`.
class TomlOrJson : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool defaults, bool descriptions,
                          std::string prefix) const override {
        return toml_.to_config(app, defaults, descriptions, std::move(prefix));
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            std::vector<CLI::ConfigItem> out;
            flatten(out, nlohmann::json::parse(text), "", {});
            return out;
        }
        std::istringstream ss(text);
        return toml_.from_config(ss);
    }

private:
    static std::string scalar(const nlohmann::json& j) {
        if (j.is_string()) return j.get<std::string>();
        if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
        return j.dump();
    }

    static void flatten(std::vector<CLI::ConfigItem>& out, const nlohmann::json& j,
                        const std::string& name, std::vector<std::string> parents) {
        if (j.is_object()) {
            if (!name.empty()) parents.push_back(name);
            for (auto it = j.begin(); it != j.end(); ++it) flatten(out, *it, it.key(), parents);
            return;
        }
        CLI::ConfigItem item;
        item.parents = std::move(parents);
        item.name = name;
        if (j.is_array())
            for (const auto& v : j) item.inputs.push_back(scalar(v));
        else
            item.inputs.push_back(scalar(j));
        out.push_back(std::move(item));
    }

    CLI::ConfigTOML toml_;
};

struct GeneratorFlags {
    std::string preset = "D_L2P4M6_J2";
    std::optional<int> sites, machines, horizon, max_maint, scenarios;
    std::optional<double> idle_penalty, demand_penalty, travel_cost, demand_sigma;

    void attach(CLI::App* app) {
        app->add_option("--preset", preset, "Configuration name, e.g. L5P10M25, LRP15M40, D_L2P4M6_J2")
            ->capture_default_str();
        app->add_option("--sites", sites, "Override the number of sites (fixed family)");
        app->add_option("--machines", machines, "Override M");
        app->add_option("--horizon", horizon, "Override T");
        app->add_option("--max-maint", max_maint, "Override J");
        app->add_option("--scenarios", scenarios, "Override |S|");
        app->add_option("--idle-penalty", idle_penalty);
        app->add_option("--demand-penalty", demand_penalty);
        app->add_option("--travel-cost", travel_cost);
        app->add_option("--demand-sigma", demand_sigma, "Demand std as a fraction of the rate");
    }

    GeneratorConfig resolve() const {
        GeneratorConfig g = attenmfg::preset(preset);
        if (sites) {
            g.family = SiteFamily::fixed;
            g.n_sites = *sites;
        }
        if (machines) g.n_machines = *machines;
        if (horizon) g.horizon = *horizon;
        if (max_maint) g.max_maint_per_period = *max_maint;
        if (scenarios) g.n_scenarios = *scenarios;
        if (idle_penalty) g.idle_penalty = *idle_penalty;
        if (demand_penalty) g.demand_penalty = *demand_penalty;
        if (travel_cost) g.travel_cost = *travel_cost;
        if (demand_sigma) g.demand_sigma = *demand_sigma;
        if (sites || machines || horizon || max_maint) {
            const std::string l = g.family == SiteFamily::fixed ? std::to_string(g.n_sites) : "R";
            g.name = "L" + l + "P" + std::to_string(g.horizon) + "M" + std::to_string(g.n_machines) +
                     "_J" + std::to_string(g.max_maint_per_period);
        }
        g.validate();
        return g;
    }
};

void attach_oracle(CLI::App* app, harness::OracleOptions& o, std::string& method) {
    app->add_option("--method", method, "bnb or exhaustive")
        ->check(CLI::IsMember({"bnb", "exhaustive"}))
        ->capture_default_str();
    app->add_option("--time-budget", o.time_budget, "Branch-and-bound time budget in seconds")
        ->capture_default_str();
    app->add_option("--node-budget", o.node_budget, "Exhaustive enumeration budget")
        ->capture_default_str();
}

harness::OracleMethod to_method(const std::string& m) {
    return m == "exhaustive" ? harness::OracleMethod::exhaustive : harness::OracleMethod::bnb;
}

void report(const RunManifest& man, const fs::path& out) {
    std::cout << man.command << ": " << man.outputs.size() << " file(s) in " << out.string()
              << "\nmanifest " << (out / kManifestName).string() << " content_hash "
              << man.content_hash() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Maintenance scheduling with an attention policy: generation, training, exact "
                 "solving and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.config_formatter(std::make_shared<TomlOrJson>());

    std::uint64_t seed = 0;
    int threads = 1;
    std::string out = "out";
    app.add_option("--seed", seed, "Base seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out", out, "Output directory")->capture_default_str();
    app.set_config("--config", "", "TOML or JSON file with option values");

    // generate
    auto* gen = app.add_subcommand("generate", "Write instance JSON files and a manifest");
    GeneratorFlags gen_flags;
    gen_flags.attach(gen);
    int count = 20;
    gen->add_option("-n,--count", count, "Number of instances")->capture_default_str();
    bool dump_features = false;
    gen->add_flag("--dump-features", dump_features, "Also write x, y and the throughput cube");

    // train
    auto* tr = app.add_subcommand("train", "Train the policy with REINFORCE");
    GeneratorFlags tr_flags;
    tr_flags.attach(tr);
    TrainConfig tc;
    std::string baseline = "mean";
    std::string resume;
    bool quiet = false;
    tr->add_option("--epochs", tc.epochs)->capture_default_str();
    tr->add_option("--instances-per-epoch", tc.instances_per_epoch)->capture_default_str();
    tr->add_option("--batch", tc.batch)->capture_default_str();
    tr->add_option("--lr", tc.lr)->capture_default_str();
    tr->add_option("--rollouts", tc.baseline_rollouts, "K sampled rollouts per instance")
        ->capture_default_str();
    tr->add_option("--baseline", baseline, "mean (of the K rollouts) or greedy")
        ->check(CLI::IsMember({"mean", "greedy"}))
        ->capture_default_str();
    tr->add_option("--grad-clip", tc.grad_clip)->capture_default_str();
    tr->add_option("--holdout", tc.holdout, "Held-out instances for the greedy cost")
        ->capture_default_str();
    tr->add_option("--hidden", tc.hyper.hidden)->capture_default_str();
    tr->add_option("--heads", tc.hyper.heads)->capture_default_str();
    tr->add_option("--layers", tc.hyper.layers)->capture_default_str();
    tr->add_option("--logit-clip", tc.hyper.logit_clip)->capture_default_str();
    tr->add_option("--resume", resume, "Checkpoint to continue from");
    tr->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

    // solve-oracle
    auto* so = app.add_subcommand("solve-oracle", "Solve instances exactly");
    std::vector<std::string> so_inputs;
    harness::OracleOptions so_oracle;
    std::string so_method = "bnb";
    so->add_option("instances", so_inputs, "Instance files or directories")->required();
    attach_oracle(so, so_oracle, so_method);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Greedy-decode instances and compare to the oracle");
    std::string ev_ckpt, ev_dir;
    bool no_oracle = false;
    harness::OracleOptions ev_oracle;
    std::string ev_method = "bnb";
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--instances", ev_dir, "Directory of instance files")->required();
    ev->add_flag("--no-oracle", no_oracle, "Skip the exact solve");
    attach_oracle(ev, ev_oracle, ev_method);

    // gap-matrix
    auto* gm = app.add_subcommand("gap-matrix", "Cross-evaluate checkpoints over configurations");
    std::vector<std::string> gm_ckpts, gm_presets;
    int n_eval = 20;
    harness::OracleOptions gm_oracle;
    std::string gm_method = "bnb";
    gm->add_option("--checkpoint", gm_ckpts, "Checkpoints (one matrix row each)")->required();
    gm->add_option("--eval-preset", gm_presets, "Evaluation configurations (columns)")->required();
    gm->add_option("--n-eval", n_eval)->capture_default_str();
    attach_oracle(gm, gm_oracle, gm_method);

    // verify
    auto* vf = app.add_subcommand("verify", "Run the invariant suites");
    bool full = false;
    vf->add_flag("--full", full, "Use the full acceptance-size workloads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const fs::path out_dir(out);
        if (*gen) {
            harness::GenerateOptions opt{gen_flags.resolve(), count, seed, dump_features};
            report(harness::cmd_generate(opt, out_dir), out_dir);
        } else if (*tr) {
            harness::TrainOptions opt;
            opt.generator = tr_flags.resolve();
            opt.train = tc;
            opt.train.seed = seed;
            opt.train.threads = threads;
            opt.train.baseline = baseline == "greedy" ? BaselineKind::greedy : BaselineKind::rollout_mean;
            if (!resume.empty()) opt.resume = resume;
            opt.quiet = quiet;
            report(harness::cmd_train(opt, out_dir), out_dir);
        } else if (*so) {
            harness::SolveOptions opt;
            for (const auto& p : so_inputs) opt.instances.emplace_back(p);
            opt.oracle = so_oracle;
            opt.oracle.method = to_method(so_method);
            opt.threads = threads;
            bool unproven = false;
            const auto man = harness::cmd_solve_oracle(opt, out_dir, &unproven);
            report(man, out_dir);
            if (unproven) {
                std::cerr << "time budget reached before optimality was proven\n";
                return 4;
            }
        } else if (*ev) {
            harness::EvaluateOptions opt;
            opt.checkpoint = ev_ckpt;
            opt.instance_dir = ev_dir;
            opt.with_oracle = !no_oracle;
            opt.oracle = ev_oracle;
            opt.oracle.method = to_method(ev_method);
            opt.threads = threads;
            const auto man = harness::cmd_evaluate(opt, out_dir);
            std::cout << harness::read_text(out_dir / "summary.csv");
            report(man, out_dir);
        } else if (*gm) {
            harness::GapMatrixOptions opt;
            for (const auto& p : gm_ckpts) opt.checkpoints.emplace_back(p);
            for (const auto& p : gm_presets) opt.eval_configs.push_back(attenmfg::preset(p));
            opt.n_eval = n_eval;
            opt.seed = seed;
            opt.oracle = gm_oracle;
            opt.oracle.method = to_method(gm_method);
            opt.threads = threads;
            const auto man = harness::cmd_gap_matrix(opt, out_dir);
            std::cout << harness::read_text(out_dir / "gap_matrix.csv")
                      << harness::read_text(out_dir / "direction.csv");
            report(man, out_dir);
        } else if (*vf) {
            bool ok = true;
            for (const auto& r : harness::run_verify({full, seed})) {
                std::printf("%s  %-45s %8.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                            r.seconds, r.detail.c_str());
                ok = ok && r.passed;
            }
            return ok ? 0 : 2;
        }
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 3;
    } catch (const TimeoutError& e) {
        std::cerr << "timeout: " << e.what() << '\n';
        return 4;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
