#include "attenmfg/checks.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <set>

using namespace attenmfg;
using testing::blank_instance;

namespace {

std::set<int> constraint_ids(const std::vector<Violation>& v) {
    std::set<int> out;
    for (const auto& x : v) out.insert(x.constraint);
    return out;
}

}  // namespace

TEST_CASE("feasibility: masked-style sequences pass, duplicates and all-idle fail") {
    const Instance inst = blank_instance(4, 3, 2, 2);
    const Schedule ok = Schedule::from_sequence({0, 4, 1, 2, 3, 4}, inst);
    CHECK(check_feasible(ok, inst).empty());

    const Schedule dup = Schedule::from_sequence({3, 0, 1, 3, 4, 4}, inst);
    const auto v = check_feasible(dup, inst);
    REQUIRE_FALSE(v.empty());
    bool found = false;
    for (const auto& x : v) found |= x.constraint == 8 && x.index == 3;
    CHECK(found);

    const Schedule idle = Schedule::from_sequence({4, 4, 4, 4, 4, 4}, inst);
    std::set<int> missing;
    for (const auto& x : check_feasible(idle, inst))
        if (x.constraint == 8) missing.insert(x.index);
    CHECK(missing == std::set<int>{0, 1, 2, 3});

    const Schedule short_seq = Schedule::from_sequence({0, 1, 2}, inst);
    CHECK(constraint_ids(check_feasible(short_seq, inst)).count(0) == 1);
    const Schedule bad_row = Schedule::from_sequence({0, 1, 2, 3, 9, 4}, inst);
    CHECK(constraint_ids(check_feasible(bad_row, inst)).count(0) == 1);
}

TEST_CASE("feasibility agrees with the constraint-by-constraint reference") {
    Rng rng(41);
    int feasible = 0;
    for (int i = 0; i < 300; ++i) {
        const Instance inst = generate_instance(testing::random_config(rng, 3, 3, 2, 4));
        const int rows = inst.n_machines() + 1;
        std::vector<int> seq(inst.slots());
        for (auto& r : seq) r = testing::uniform_int(rng, 0, rows - 1);
        if (i % 3 == 0) seq = testing::random_schedule(rng, inst.n_machines(), inst.slots());
        const Schedule sch = Schedule::from_sequence(seq, inst);
        const auto got = constraint_ids(check_feasible(sch, inst));
        const auto want = checks::reference_violations(seq, row_sites(inst), inst.n_machines(),
                                                       inst.horizon,
                                                       inst.economics.max_maint_per_period,
                                                       &sch.crew_site);
        CHECK(got == want);
        feasible += got.empty();
    }
    CHECK(feasible >= 100);
}

TEST_CASE("sequence cost: single relocation") {
    Instance inst = blank_instance(2, 3, 1, 1);
    inst.economics.travel_cost = 7.0;
    const FeatureTensor f = assemble_features(inst);
    const auto c = sequence_cost(Schedule::from_sequence({2, 0, 1}, f), f, inst.economics);
    CHECK(c.travel == 7.0);
    CHECK(c.total == doctest::Approx(c.maint_pre + c.demand_pen + 7.0));
    // idling afterwards sends the crew back to the depot
    CHECK(count_relocations(std::vector<int>{0, 1, 2}, f.site) == 2);
}

TEST_CASE("sequence cost: all idle with no machines costs nothing") {
    Instance inst = blank_instance(0, 3, 1);
    inst.economics.travel_cost = 50.0;
    const FeatureTensor f = assemble_features(inst);
    REQUIRE(f.rows() == 1);
    const auto c = sequence_cost(Schedule::from_sequence({0, 0, 0}, f), f, inst.economics);
    CHECK(c.total == 0.0);
}

TEST_CASE("sequence cost: hand-computed toy") {
    Matrix chi(4, 3);
    chi << 5, 6, 7,
           3, 9, 4,
           8, 2, 1,
           0, 0, 0;
    FeatureTensor f = testing::hand_features(chi, {1, 2, 1}, 3, 1);
    f.y(1, 2) = 10.0;
    EconomicParams econ;
    econ.travel_cost = 7.0;
    // chi 5 + 2 + 4, y 10, moves depot->1->1->2
    const auto c = sequence_cost(Schedule::from_sequence({0, 2, 1}, f), f, econ);
    CHECK(c.maint_pre == 11.0);
    CHECK(c.demand_pen == 10.0);
    CHECK(c.travel == 14.0);
    CHECK(c.total == 35.0);
    CHECK(checks::reference_sequence_cost({0, 2, 1}, f, 7.0) == 35.0);
}

TEST_CASE("sequence cost rejects infeasible schedules") {
    const Instance inst = blank_instance(2, 2, 1);
    const FeatureTensor f = assemble_features(inst);
    CHECK_THROWS_AS(sequence_cost(Schedule::from_sequence({0, 0}, f), f, inst.economics),
                    InfeasibleError);
    CHECK_THROWS_AS(direct_mip_cost(Schedule::from_sequence({2, 2}, inst), inst), InfeasibleError);
}

TEST_CASE("dual path: sequence cost equals the direct objective") {
    Rng rng(42);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Instance inst = generate_instance(testing::random_config(rng, 3, 5, 3, 8));
        const FeatureTensor f = assemble_features(inst);
        for (int k = 0; k < 10; ++k) {
            const auto seq = testing::random_schedule(rng, inst.n_machines(), inst.slots());
            const double a = sequence_cost(Schedule::from_sequence(seq, f), f, inst.economics).total;
            const auto d = direct_mip_cost(Schedule::from_sequence(seq, inst), inst);
            worst = std::max(worst, std::abs(a - d.total) / std::abs(d.total));
            CHECK(d.total == doctest::Approx(d.maintenance() + d.demand_pen + d.travel));
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("direct objective: degenerate terms") {
    Rng rng(43);
    for (int i = 0; i < 20; ++i) {
        GeneratorConfig cfg = testing::random_config(rng);
        cfg.idle_penalty = 0.0;
        Instance inst = generate_instance(cfg);
        inst.demand.setZero();
        inst.scenarios.failure.setConstant(inst.horizon + 1);
        const auto seq = testing::random_schedule(rng, inst.n_machines(), inst.slots());
        const auto d = direct_mip_cost(Schedule::from_sequence(seq, inst), inst);
        CHECK(d.demand_pen == 0.0);
        CHECK(d.maint_corr == 0.0);
        CHECK(d.idle_pen == 0.0);
    }
}

TEST_CASE("permuting picks within a period changes only travel") {
    Rng rng(44);
    int changed = 0;
    for (int i = 0; i < 100; ++i) {
        GeneratorConfig cfg = testing::random_config(rng, 3, 4, 3, 6);
        cfg.max_maint_per_period = std::max(2, cfg.max_maint_per_period);
        cfg.travel_cost = 10.0;
        const Instance inst = generate_instance(cfg);
        const FeatureTensor f = assemble_features(inst);
        auto seq = testing::random_schedule(rng, inst.n_machines(), inst.slots());
        const auto a = sequence_cost(Schedule::from_sequence(seq, f), f, inst.economics);
        const auto da = direct_mip_cost(Schedule::from_sequence(seq, inst), inst);
        const int J = inst.economics.max_maint_per_period;
        const int t = testing::uniform_int(rng, 0, inst.horizon - 1);
        std::reverse(seq.begin() + t * J, seq.begin() + (t + 1) * J);
        const auto b = sequence_cost(Schedule::from_sequence(seq, f), f, inst.economics);
        const auto db = direct_mip_cost(Schedule::from_sequence(seq, inst), inst);
        CHECK(b.maint_pre == doctest::Approx(a.maint_pre).epsilon(1e-12));
        CHECK(b.demand_pen == doctest::Approx(a.demand_pen).epsilon(1e-12));
        CHECK(db.maintenance() == doctest::Approx(da.maintenance()).epsilon(1e-12));
        CHECK(db.demand_pen == doctest::Approx(da.demand_pen).epsilon(1e-12));
        changed += b.travel != a.travel;
    }
    CHECK(changed > 0);
}

TEST_CASE("gap") {
    CHECK(gap(100, 100) == 0.0);
    CHECK(gap(100, 105) == 5.0);
    CHECK(gap(80, 120) == 50.0);
    CHECK_THROWS_AS(gap(0, 10), InvalidParameters);
    CHECK_THROWS_AS(gap(-1, 10), InvalidParameters);
}

TEST_CASE("quantiles interpolate linearly") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(quantile(v, 0.5) == 2.5);
    CHECK(quantile(v, 0.25) == 1.75);
    CHECK(quantile(v, 0.75) == 3.25);
    CHECK(quantile({7}, 0.3) == 7);
}

TEST_CASE("gap report csv round trip and summary recompute") {
    std::vector<GapReport> rows;
    Rng rng(45);
    std::uniform_real_distribution<double> u(1.0, 500.0);
    for (int i = 0; i < 25; ++i) {
        GapReport r;
        r.instance_id = "inst_" + std::to_string(i);
        r.policy_cost = u(rng);
        r.decode_ms = 1.5;
        if (i % 7 != 3) {
            r.oracle_cost = r.policy_cost / (1.0 + u(rng) / 1000.0);
            r.oracle_proven = i % 5 != 4;
            if (r.oracle_proven) r.gap_pct = gap(*r.oracle_cost, r.policy_cost);
            r.oracle_ms = 2.25;
        }
        rows.push_back(r);
    }
    const std::string csv = gap_report_csv(rows);
    CHECK(csv.substr(0, csv.find('\n')) == kGapReportHeader);
    const auto back = parse_gap_report_csv(csv);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].instance_id == rows[i].instance_id);
        CHECK(back[i].policy_cost == rows[i].policy_cost);
        CHECK(back[i].oracle_proven == rows[i].oracle_proven);
        CHECK(back[i].gap_pct == rows[i].gap_pct);
    }
    const GapSummary a = summarize_gaps(rows);
    const GapSummary b = summarize_gaps(back);
    CHECK(a.count == b.count);
    CHECK(a.mean == b.mean);
    CHECK(a.median == b.median);
    CHECK(a.q1 == b.q1);
    CHECK(a.q3 == b.q3);

    std::vector<double> proven;
    for (const auto& r : rows)
        if (r.oracle_proven && r.gap_pct) proven.push_back(*r.gap_pct);
    CHECK(a.count == static_cast<int>(proven.size()));
    double sum = 0.0;
    for (double g : proven) sum += g;
    CHECK(a.mean == doctest::Approx(sum / proven.size()).epsilon(1e-14));

    CHECK(gap_report_csv({}) == std::string(kGapReportHeader) + "\n");
    CHECK_THROWS_AS(parse_gap_report_csv("a,b\n"), ParseError);
}
