#include "attenmfg/checks.hpp"
#include "attenmfg/oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

using namespace attenmfg;

namespace {

struct Case {
    Instance instance;
    FeatureTensor features;
};

Case random_case(Rng& rng, int sites, int horizon, int dup, int machines) {
    GeneratorConfig cfg;
    cfg.n_sites = sites;
    cfg.horizon = horizon;
    cfg.max_maint_per_period = dup;
    cfg.n_machines = machines;
    cfg.n_scenarios = 3;
    cfg.travel_cost = std::uniform_real_distribution<double>(5.0, 100.0)(rng);
    cfg.seed = rng();
    Instance inst = generate_instance(cfg);
    FeatureTensor f = assemble_features(inst);
    return {std::move(inst), std::move(f)};
}

}  // namespace

TEST_CASE("trivial instances") {
    Matrix one(2, 1);
    one << 42.5, 0.0;
    const FeatureTensor f1 = testing::hand_features(one, {0}, 1, 1);
    EconomicParams econ;
    econ.travel_cost = 9.0;
    econ.max_maint_per_period = 1;
    CHECK(solve_exhaustive(f1, econ).cost == 42.5);
    CHECK(solve_exhaustive(f1, econ).seq == std::vector<int>{0});
    CHECK(solve_bnb(f1, econ).cost == 42.5);

    Matrix two(3, 2);
    two << 4, 9,
           6, 2,
           0, 0;
    const FeatureTensor f2 = testing::hand_features(two, {1, 1}, 2, 1);
    econ.travel_cost = 0.0;
    // min(4 + 2, 9 + 6)
    CHECK(solve_exhaustive(f2, econ).cost == 6.0);
    const OracleResult b = solve_bnb(f2, econ);
    CHECK(b.cost == 6.0);
    CHECK(b.proven);
    CHECK(b.seq == std::vector<int>{0, 1});
}

TEST_CASE("exhaustive search equals an independent enumeration of 6^6 sequences") {
    Rng rng(51);
    for (int i = 0; i < 5; ++i) {
        const Case c = random_case(rng, 2, 3, 2, 5);
        const auto& econ = c.instance.economics;
        const auto ref = checks::brute_force_optimum(c.features, econ.travel_cost);
        const OracleResult ex = solve_exhaustive(c.features, econ);
        const OracleResult bnb = solve_bnb(c.features, econ);
        CHECK(ex.cost == doctest::Approx(ref.cost).epsilon(1e-12));
        CHECK(ex.seq == ref.seq);
        CHECK(bnb.proven);
        CHECK(bnb.cost == ex.cost);
        CHECK(canonical_cost(bnb.seq, c.features, econ) == bnb.cost);
        CHECK(check_feasible(Schedule::from_sequence(bnb.seq, c.features), c.features).empty());
    }
}

TEST_CASE("branch and bound equals exhaustive search on tiny instances") {
    Rng rng(52);
    int checked = 0;
    while (checked < 100) {
        const GeneratorConfig cfg = testing::random_config(rng, 3, 4, 2, 6);
        const Instance inst = generate_instance(cfg);
        double space = 1.0;
        for (int k = 0; k < inst.slots(); ++k) space *= inst.n_machines() + 1;
        if (space > 2e5) continue;
        const FeatureTensor f = assemble_features(inst);
        const OracleResult ex = solve_exhaustive(f, inst.economics);
        const OracleResult bnb = solve_bnb(f, inst.economics);
        CHECK(bnb.proven);
        CHECK(bnb.cost == ex.cost);
        ++checked;
    }
}

TEST_CASE("one site and no travel cost reduces to an assignment problem") {
    Rng rng(53);
    for (int i = 0; i < 20; ++i) {
        GeneratorConfig cfg = testing::random_config(rng, 1, 4, 3, 7);
        cfg.n_sites = 1;
        cfg.travel_cost = 0.0;
        const Instance inst = generate_instance(cfg);
        const FeatureTensor f = assemble_features(inst);
        const double oracle = checks::assignment_optimum(f);
        const OracleResult bnb = solve_bnb(f, inst.economics);
        CHECK(bnb.proven);
        CHECK(bnb.cost == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("hungarian oracle on a hand matrix") {
    Matrix cost(2, 3);
    cost << 4, 1, 3,
            2, 0, 5;
    std::vector<int> assign;
    CHECK(checks::min_cost_assignment(cost, &assign) == 3.0);
    CHECK(assign == std::vector<int>{1, 0});
}

TEST_CASE("no idle slack: optimum matches permutation enumeration") {
    Rng rng(54);
    const int shapes[][2] = {{2, 2}, {3, 2}, {7, 1}, {2, 3}, {3, 1}, {1, 2}};
    for (const auto& s : shapes)
        for (int k = 0; k < 3; ++k) {
            const Case c = random_case(rng, 3, s[0], s[1], s[0] * s[1]);
            const auto ref = checks::permutation_optimum(c.features, c.instance.economics.travel_cost);
            const OracleResult bnb = solve_bnb(c.features, c.instance.economics);
            CHECK(bnb.proven);
            CHECK(bnb.cost == doctest::Approx(ref.cost).epsilon(1e-12));
        }
}

TEST_CASE("optimal cost is non-decreasing in the travel cost") {
    Rng rng(55);
    for (int i = 0; i < 10; ++i) {
        const Case c = random_case(rng, 3, 3, 2, 4);
        EconomicParams econ = c.instance.economics;
        double prev = -1.0;
        for (double delta : {0.0, 1.0, 10.0, 50.0, 200.0}) {
            econ.travel_cost = delta;
            const double cost = solve_bnb(c.features, econ).cost;
            CHECK(cost >= prev);
            prev = cost;
        }
    }
}

TEST_CASE("searches are deterministic") {
    Rng rng(56);
    const Case c = random_case(rng, 2, 4, 2, 6);
    const OracleResult a = solve_bnb(c.features, c.instance.economics);
    const OracleResult b = solve_bnb(c.features, c.instance.economics);
    CHECK(a.seq == b.seq);
    CHECK(a.nodes == b.nodes);
    CHECK(a.cost == b.cost);
    CHECK(solve_exhaustive(c.features, c.instance.economics).seq ==
          solve_exhaustive(c.features, c.instance.economics).seq);
}

TEST_CASE("budgets") {
    Rng rng(57);
    const Case c = random_case(rng, 2, 4, 2, 6);
    CHECK_THROWS_AS(solve_exhaustive(c.features, c.instance.economics, 1000), BudgetExceeded);

    GeneratorConfig big = preset("L5P10M25");
    big.seed = 1;
    const Instance inst = generate_instance(big);
    const FeatureTensor f = assemble_features(inst);
    const OracleResult r = solve_bnb(f, inst.economics, 0.0);
    CHECK_FALSE(r.proven);
    REQUIRE(r.seq.size() == static_cast<std::size_t>(inst.slots()));
    CHECK(check_feasible(Schedule::from_sequence(r.seq, f), f).empty());
    CHECK(r.cost == doctest::Approx(canonical_cost(r.seq, f, inst.economics)));
}

TEST_CASE("greedy sequence is feasible and never beats the optimum") {
    Rng rng(58);
    for (int i = 0; i < 30; ++i) {
        const Instance inst = generate_instance(testing::random_config(rng, 3, 4, 2, 6));
        const FeatureTensor f = assemble_features(inst);
        const auto g = greedy_sequence(f, inst.economics);
        CHECK(check_feasible(Schedule::from_sequence(g, f), f).empty());
        CHECK(canonical_cost(g, f, inst.economics) >= solve_bnb(f, inst.economics).cost - 1e-9);
    }
}

TEST_CASE("canonical cost equals the evaluator sequence cost") {
    Rng rng(59);
    for (int i = 0; i < 50; ++i) {
        const Instance inst = generate_instance(testing::random_config(rng));
        const FeatureTensor f = assemble_features(inst);
        const auto seq = testing::random_schedule(rng, inst.n_machines(), inst.slots());
        const double a = canonical_cost(seq, f, inst.economics);
        const double b = sequence_cost(Schedule::from_sequence(seq, f), f, inst.economics).total;
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
        CHECK(checks::reference_sequence_cost(seq, f, inst.economics.travel_cost) ==
              doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("oracle json") {
    OracleResult r;
    r.seq = {2, 0, 1};
    r.cost = 12.25;
    r.proven = true;
    r.nodes = 17;
    r.ms = 3.5;
    const auto j = nlohmann::json::parse(oracle_result_json(r));
    CHECK(j["cost"].get<double>() == 12.25);
    CHECK(j["seq"].get<std::vector<int>>() == r.seq);
    CHECK(j["proven"].get<bool>());
    CHECK(j["nodes"].get<int>() == 17);
    CHECK(j["ms"].get<double>() == 3.5);
}
