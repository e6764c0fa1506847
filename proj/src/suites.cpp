#include "attenmfg/checks.hpp"
#include "attenmfg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace attenmfg::harness {

namespace {

using Clock = std::chrono::steady_clock;

struct Shape {
    int sites_max = 3;
    int horizon_min = 1;
    int horizon_max = 5;
    int dup_max = 3;
    int machines_max = 8;
};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

GeneratorConfig random_config(Rng& rng, const Shape& s) {
    GeneratorConfig cfg;
    cfg.name = "random";
    cfg.family = SiteFamily::fixed;
    cfg.n_sites = uniform_int(rng, 1, s.sites_max);
    cfg.horizon = uniform_int(rng, s.horizon_min, s.horizon_max);
    cfg.max_maint_per_period = uniform_int(rng, 1, s.dup_max);
    cfg.n_machines = uniform_int(rng, 1, std::min(s.machines_max, cfg.horizon * cfg.max_maint_per_period));
    cfg.n_scenarios = uniform_int(rng, 1, 5);
    cfg.idle_penalty = uniform_real(rng, 0.0, 50.0);
    cfg.demand_penalty = uniform_real(rng, 0.0, 5.0);
    cfg.travel_cost = uniform_real(rng, 0.0, 100.0);
    cfg.seed = rng();
    return cfg;
}

// Machines placed in distinct random slots, idle elsewhere.
std::vector<int> random_schedule(Rng& rng, int n_real, int slots) {
    std::vector<int> order(slots);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> seq(slots, n_real);
    for (int m = 0; m < n_real; ++m) seq[order[m]] = m;
    return seq;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

template <typename F>
SuiteResult timed(std::string name, F&& body) {
    SuiteResult r;
    r.name = std::move(name);
    const auto start = Clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

}  // namespace

SuiteResult suite_dual_path(const DualPathOptions& opt) {
    return timed("dual-path cost equality", [&](SuiteResult& r) {
        Rng rng(mix_seed(opt.seed));
        double worst = 0.0;
        int checked = 0;
        int disagreements = 0;
        for (int i = 0; i < opt.instances; ++i) {
            const Instance inst = generate_instance(random_config(rng, Shape{4, 1, 6, 3, 10}));
            const FeatureTensor f = assemble_features(inst);
            const auto sites = row_sites(inst);
            for (int k = 0; k < opt.schedules; ++k) {
                const auto seq = random_schedule(rng, f.n_real, f.cols());
                const Schedule s = Schedule::from_sequence(seq, f);
                const bool ours = check_feasible(s, inst).empty();
                const bool ref = checks::reference_violations(seq, sites, f.n_real, f.horizon, f.dup,
                                                              &s.crew_site)
                                     .empty();
                disagreements += ours != ref || !ours ? 1 : 0;  // every random schedule is feasible
                const double a = sequence_cost(s, f, inst.economics).total;
                const double b = direct_mip_cost(s, inst).total;
                worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-300));
                ++checked;
            }
        }
        r.passed = worst <= opt.tolerance && disagreements == 0;
        r.detail = std::to_string(checked) + " schedules, max relative difference " +
                   fmt("%.3e", worst) + ", feasibility disagreements " + std::to_string(disagreements);
    });
}

SuiteResult suite_throughput_cube(const CubeOptions& opt) {
    return timed("throughput cube vs state-machine simulator", [&](SuiteResult& r) {
        Rng rng(mix_seed(opt.seed));
        std::int64_t cells = 0, mismatches = 0;
        double worst_xy = 0.0;
        for (int i = 0; i < opt.instances; ++i) {
            const Instance inst =
                generate_instance(random_config(rng, Shape{3, 1, opt.max_horizon, 3, 8}));
            const ThroughputCube cube = build_throughput_cube(inst);
            const int T = inst.horizon;
            for (int s = 0; s < inst.scenarios.size(); ++s)
                for (int m = 0; m < inst.n_machines(); ++m) {
                    std::vector<double> limit(T);
                    for (int l = 0; l < T; ++l) limit[l] = inst.scenarios.limit[s](m, l);
                    for (int t = 0; t < T; ++t) {
                        const auto sim =
                            checks::simulate_throughput(inst.scenarios.failure(s, m), t + 1, limit);
                        for (int l = 0; l < T; ++l) {
                            ++cells;
                            mismatches += cube(s, m, t, l) != sim[l] ? 1 : 0;
                        }
                    }
                }
            const Matrix x = build_maintenance_cost(inst);
            const Matrix y = build_demand_penalty(inst, cube);
            const Matrix rx = checks::reference_maintenance_cost(inst);
            const Matrix ry = checks::reference_demand_penalty(inst);
            for (Eigen::Index k = 0; k < x.size(); ++k) {
                worst_xy = std::max(worst_xy, std::abs(x.data()[k] - rx.data()[k]) /
                                                  std::max(1.0, std::abs(rx.data()[k])));
                worst_xy = std::max(worst_xy, std::abs(y.data()[k] - ry.data()[k]) /
                                                  std::max(1.0, std::abs(ry.data()[k])));
            }
        }
        r.passed = mismatches == 0 && worst_xy <= 1e-12;
        r.detail = std::to_string(cells) + " cells, " + std::to_string(mismatches) +
                   " mismatches; x/y max relative difference " + fmt("%.3e", worst_xy);
    });
}

SuiteResult suite_masking(const MaskingOptions& opt) {
    return timed("masking feasibility", [&](SuiteResult& r) {
        Rng rng(mix_seed(opt.seed));
        PolicyHyper hyper;
        hyper.hidden = opt.hidden;
        hyper.heads = opt.heads;
        const PolicyParams params = PolicyParams::initialize(hyper, rng());
        std::int64_t violations = 0, bad_steps = 0, total = 0;
        const int per = (opt.rollouts + opt.instances - 1) / opt.instances;
        for (int i = 0; i < opt.instances && total < opt.rollouts; ++i) {
            const Instance inst = generate_instance(random_config(rng, Shape{5, 1, 5, 3, 12}));
            const FeatureTensor f = assemble_features(inst);
            const auto sites = row_sites(inst);
            const EncoderState enc = encode(f, params);
            const DecoderContext ctx = prepare_decoder(enc, f, params);
            for (int k = 0; k < per && total < opt.rollouts; ++k, ++total) {
                const Rollout ro = decode(ctx, params, DecodeMode::sample, &rng, true);
                const Schedule s = Schedule::from_sequence(ro.seq, f);
                if (!check_feasible(s, inst).empty() ||
                    !checks::reference_violations(ro.seq, sites, f.n_real, f.horizon, f.dup).empty())
                    ++violations;
                for (const auto& st : ro.steps) {
                    double sum = 0.0;
                    bool ok = true;
                    for (Eigen::Index row = 0; row < st.probs.size(); ++row) {
                        ok = ok && st.probs(row) >= 0.0 && (st.allowed[row] || st.probs(row) == 0.0);
                        ok = ok && std::abs(st.logits(row)) <= hyper.logit_clip;
                        sum += st.probs(row);
                    }
                    if (!ok || std::abs(sum - 1.0) > 1e-9) ++bad_steps;
                }
            }
        }
        r.passed = violations == 0 && bad_steps == 0 && total == opt.rollouts;
        r.detail = std::to_string(total) + " rollouts, " + std::to_string(violations) +
                   " infeasible, " + std::to_string(bad_steps) + " invalid step distributions";
    });
}

SuiteResult suite_gradient(const GradientOptions& opt) {
    return timed("finite-difference gradient check", [&](SuiteResult& r) {
        GeneratorConfig cfg;
        cfg.name = "toy";
        cfg.n_sites = 2;
        cfg.n_machines = 3;
        cfg.horizon = 2;
        cfg.max_maint_per_period = 2;
        cfg.seed = opt.seed;
        const Instance inst = generate_instance(cfg);
        const FeatureTensor f = assemble_features(inst);
        PolicyHyper hyper;
        hyper.hidden = 8;
        hyper.heads = 2;
        // Weights at 3x the default range keep every tensor's gradient well
        // above the finite-difference noise floor.
        PolicyParams params = PolicyParams::initialize(hyper, mix_seed(opt.seed, 1));
        params.visit([](const std::string&, Matrix& m) { m *= 3.0; });
        Rng rng(mix_seed(opt.seed, 2));
        const EncoderState enc = encode(f, params);
        const DecoderContext ctx = prepare_decoder(enc, f, params);
        std::vector<std::vector<int>> seqs;
        std::vector<double> cost;
        for (int k = 0; k < 4; ++k) {
            seqs.push_back(decode(ctx, params, DecodeMode::sample, &rng).seq);
            cost.push_back(canonical_cost(seqs.back(), f, inst.economics));
        }
        const double mean = std::accumulate(cost.begin(), cost.end(), 0.0) / 4.0;
        std::vector<double> weights;
        for (double c : cost) weights.push_back((c - mean) / 100.0 + 0.25);
        const auto rows = checks::finite_difference_check(f, params, seqs, weights, 1e-5, 1e-8);
        double worst = 0.0;
        std::string worst_name;
        for (const auto& row : rows)
            if (row.max_rel_error >= worst) {
                worst = row.max_rel_error;
                worst_name = row.tensor;
            }
        r.passed = worst < opt.tolerance;
        r.detail = std::to_string(rows.size()) + " tensors, worst relative error " +
                   fmt("%.3e", worst) + " (" + worst_name + ")";
    });
}

SuiteResult suite_oracle(const OracleSuiteOptions& opt) {
    return timed("oracle optimality", [&](SuiteResult& r) {
        Rng rng(mix_seed(opt.seed));
        int exact_mismatch = 0, brute_mismatch = 0, unproven = 0;
        int solved = 0;
        while (solved < opt.instances) {
            GeneratorConfig cfg = random_config(rng, Shape{3, 1, 4, 3, 7});
            double space = std::pow(cfg.n_machines + 1.0, cfg.horizon * cfg.max_maint_per_period);
            if (space > static_cast<double>(opt.max_space)) continue;
            const Instance inst = generate_instance(cfg);
            const FeatureTensor f = assemble_features(inst);
            const OracleResult ex = solve_exhaustive(f, inst.economics);
            const OracleResult bb = solve_bnb(f, inst.economics);
            unproven += bb.proven ? 0 : 1;
            exact_mismatch += bb.cost != ex.cost ? 1 : 0;
            if (space <= 2e5) {
                const auto ref = checks::brute_force_optimum(f, inst.economics.travel_cost);
                brute_mismatch +=
                    std::abs(ref.cost - ex.cost) > 1e-9 * std::max(1.0, std::abs(ref.cost)) ? 1 : 0;
            }
            ++solved;
        }
        int assign_mismatch = 0, perm_mismatch = 0;
        for (int i = 0; i < opt.assignment_instances; ++i) {
            GeneratorConfig cfg = random_config(rng, Shape{1, 2, 6, 3, 12});
            cfg.n_sites = 1;
            cfg.travel_cost = 0.0;
            const Instance inst = generate_instance(cfg);
            const FeatureTensor f = assemble_features(inst);
            const OracleResult bb = solve_bnb(f, inst.economics);
            const double hung = checks::assignment_optimum(f);
            unproven += bb.proven ? 0 : 1;
            assign_mismatch +=
                std::abs(hung - bb.cost) > 1e-9 * std::max(1.0, std::abs(hung)) ? 1 : 0;
        }
        for (int i = 0; i < opt.assignment_instances; ++i) {
            GeneratorConfig cfg = random_config(rng, Shape{3, 1, 1, 1, 1});
            const int n = uniform_int(rng, 2, 7);
            cfg.n_machines = n;
            cfg.horizon = i % 2 ? n : 1;
            cfg.max_maint_per_period = i % 2 ? 1 : n;
            const Instance inst = generate_instance(cfg);
            const FeatureTensor f = assemble_features(inst);
            const OracleResult bb = solve_bnb(f, inst.economics);
            const auto perm = checks::permutation_optimum(f, inst.economics.travel_cost);
            unproven += bb.proven ? 0 : 1;
            perm_mismatch +=
                std::abs(perm.cost - bb.cost) > 1e-9 * std::max(1.0, std::abs(perm.cost)) ? 1 : 0;
        }
        r.passed = exact_mismatch == 0 && brute_mismatch == 0 && assign_mismatch == 0 &&
                   perm_mismatch == 0 && unproven == 0;
        r.detail = std::to_string(solved) + " instances: bnb/exhaustive mismatches " +
                   std::to_string(exact_mismatch) + ", reference enumeration mismatches " +
                   std::to_string(brute_mismatch) + ", assignment mismatches " +
                   std::to_string(assign_mismatch) + ", permutation mismatches " +
                   std::to_string(perm_mismatch) + ", unproven " + std::to_string(unproven);
    });
}

SuiteResult suite_checkpoint_roundtrip(std::uint64_t seed) {
    return timed("checkpoint resume is bit-identical", [&](SuiteResult& r) {
        GeneratorConfig gen = preset("D_L2P4M6_J2");
        TrainConfig cfg;
        cfg.seed = seed;
        cfg.epochs = 1;
        cfg.instances_per_epoch = 8;
        cfg.batch = 4;
        cfg.baseline_rollouts = 4;
        cfg.holdout = 2;
        cfg.hyper.hidden = 16;
        cfg.hyper.heads = 2;
        cfg.hyper.layers = 2;
        Trainer straight(cfg, gen);
        straight.step();
        const std::string bytes = save_checkpoint(straight.checkpoint());
        straight.step();
        Trainer resumed(cfg, gen, load_checkpoint(bytes));
        resumed.step();
        const std::string a = save_checkpoint(straight.checkpoint());
        const std::string b = save_checkpoint(resumed.checkpoint());
        r.passed = a == b;
        r.detail = r.passed ? "parameters and optimizer state identical after resume"
                            : "resumed run diverged";
    });
}

std::vector<SuiteResult> run_verify(const VerifyOptions& opt) {
    std::vector<SuiteResult> out;
    const std::uint64_t s = opt.seed;
    if (opt.full) {
        out.push_back(suite_dual_path({100, 10, mix_seed(s, 1)}));
        out.push_back(suite_throughput_cube({50, 5, mix_seed(s, 2)}));
        out.push_back(suite_masking({10000, 50, mix_seed(s, 3)}));
        out.push_back(suite_gradient({mix_seed(s, 4)}));
        out.push_back(suite_oracle({50, 1'000'000, 20, mix_seed(s, 5)}));
    } else {
        out.push_back(suite_dual_path({20, 5, mix_seed(s, 1)}));
        out.push_back(suite_throughput_cube({10, 5, mix_seed(s, 2)}));
        out.push_back(suite_masking({1000, 50, mix_seed(s, 3)}));
        out.push_back(suite_gradient({mix_seed(s, 4)}));
        out.push_back(suite_oracle({10, 20'000, 5, mix_seed(s, 5)}));
    }
    out.push_back(suite_checkpoint_roundtrip(mix_seed(s, 6)));
    return out;
}

}  // namespace attenmfg::harness
