#include "attenmfg/checks.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

using namespace attenmfg;
using testing::blank_instance;

namespace {

// One machine, one scenario, failure period F, rate P.
Instance single(int horizon, int failure, double rate) {
    Instance inst = blank_instance(1, horizon, 1);
    inst.scenarios.failure(0, 0) = failure;
    inst.scenarios.limit[0].setConstant(rate);
    inst.machines[0].nominal_rate = rate;
    return inst;
}

std::vector<double> cube_trace(const Instance& inst, int t) {
    const ThroughputCube cube = build_throughput_cube(inst);
    std::vector<double> out;
    for (int l = 0; l < inst.horizon; ++l) out.push_back(cube(0, 0, t, l));
    return out;
}

}  // namespace

TEST_CASE("maintenance cost x: pre-failure and post-failure branches") {
    Instance inst = single(3, 2, 10.0);
    inst.dmc.row(0) << 7, 8, 9;
    inst.economics.idle_penalty = 1.0;
    inst.machines[0].corrective_cost = 50.0;
    const Matrix x = build_maintenance_cost(inst);
    CHECK(x(0, 0) == 8.0);
    CHECK(x(0, 1) == 51.0);
    CHECK(x(0, 2) == 52.0);
    CHECK(checks::reference_maintenance_cost(inst).isApprox(x, 0.0));
}

TEST_CASE("maintenance cost x: no failures and no idle penalty gives the DMC") {
    Instance inst = blank_instance(3, 4, 1);
    inst.dmc << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    inst.economics.idle_penalty = 0.0;
    CHECK(build_maintenance_cost(inst) == inst.dmc);
}

TEST_CASE("maintenance cost x: identical scenarios average to one") {
    Instance one = single(4, 3, 10.0);
    one.dmc.row(0) << 3, 4, 5, 6;
    one.economics.idle_penalty = 2.5;
    Instance two = one;
    two.scenarios.failure = IndexMatrix::Constant(2, 1, 3);
    two.scenarios.limit.push_back(two.scenarios.limit[0]);
    CHECK(build_maintenance_cost(two).isApprox(build_maintenance_cost(one), 1e-15));
}

TEST_CASE("throughput cube traces") {
    const Instance inst = single(4, 3, 10.0);
    CHECK(cube_trace(inst, 0) == std::vector<double>{0, 10, 10, 10});
    CHECK(cube_trace(inst, 2) == std::vector<double>{10, 10, 0, 10});

    const Instance healthy = single(4, 5, 10.0);
    for (int t = 0; t < 4; ++t) {
        std::vector<double> want(4, 10.0);
        want[t] = 0.0;
        CHECK(cube_trace(healthy, t) == want);
    }
}

TEST_CASE("throughput cube equals the state-machine simulator") {
    Rng rng(31);
    for (int i = 0; i < 40; ++i) {
        const Instance inst = generate_instance(testing::random_config(rng, 3, 5, 2, 6));
        const ThroughputCube cube = build_throughput_cube(inst);
        for (int s = 0; s < inst.scenarios.size(); ++s)
            for (int m = 0; m < inst.n_machines(); ++m) {
                const Matrix& lim = inst.scenarios.limit[s];
                std::vector<double> row(inst.horizon);
                for (int l = 0; l < inst.horizon; ++l) row[l] = lim(m, l);
                for (int t = 1; t <= inst.horizon; ++t) {
                    const auto sim =
                        checks::simulate_throughput(inst.scenarios.failure(s, m), t, row);
                    for (int l = 0; l < inst.horizon; ++l) CHECK(cube(s, m, t - 1, l) == sim[l]);
                }
            }
    }
}

TEST_CASE("demand penalty y") {
    Instance inst = single(3, 2, 10.0);
    inst.demand.setConstant(8.0);
    inst.economics.demand_penalty = 2.0;
    const Matrix y = build_demand_penalty(inst, build_throughput_cube(inst));
    CHECK(y(0, 0) == 16.0);
    CHECK(y(0, 2) == 32.0);

    Instance none = inst;
    none.demand.setZero();
    CHECK(build_demand_penalty(none, build_throughput_cube(none)).isZero(0.0));

    Instance dead = blank_instance(2, 3, 1);
    dead.scenarios.limit[0].setZero();
    dead.demand << 1, 2, 3, 4, 5, 6;
    dead.economics.demand_penalty = 1.5;
    const Matrix yd = build_demand_penalty(dead, build_throughput_cube(dead));
    for (int t = 0; t < 3; ++t) {
        CHECK(yd(0, t) == doctest::Approx(1.5 * 6));
        CHECK(yd(1, t) == doctest::Approx(1.5 * 15));
    }
}

TEST_CASE("x and y equal the term-by-term reference on random instances") {
    Rng rng(32);
    for (int i = 0; i < 40; ++i) {
        const Instance inst = generate_instance(testing::random_config(rng, 3, 5, 2, 6));
        const Matrix x = build_maintenance_cost(inst);
        const Matrix y = build_demand_penalty(inst, build_throughput_cube(inst));
        CHECK((x - checks::reference_maintenance_cost(inst)).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()));
        CHECK((y - checks::reference_demand_penalty(inst)).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("feature tensor: shape, duplication and idle row") {
    Instance inst = blank_instance(2, 3, 2, 2);
    inst.dmc << 1, 2, 3, 4, 5, 6;
    const FeatureTensor f = assemble_features(inst);
    CHECK(f.rows() == 3);
    CHECK(f.cols() == 6);
    CHECK(f.chi.rows() == 3);
    CHECK(f.chi.cols() == 6);
    CHECK(f.idle_row() == 2);
    CHECK(f.site == std::vector<int>{1, 2, 0});
    const Matrix x = build_maintenance_cost(inst);
    for (int c = 0; c < 6; ++c) {
        CHECK(f.period_of(c) == c / 2);
        CHECK(f.chi(0, c) == x(0, c / 2));
        CHECK(f.chi(1, c) == x(1, c / 2));
        CHECK(f.chi(2, c) == 0.0);
        CHECK(f.y(2, c) == 0.0);
    }
    CHECK(f.time_channel(5) == doctest::Approx(2.0 / 3.0));
    CHECK(f.dup_channel(5) == 0.5);
}

TEST_CASE("feature tensor is a pure function of the instance") {
    GeneratorConfig cfg = preset("D_L2P4M6_J2");
    cfg.seed = 3;
    const Instance inst = generate_instance(cfg);
    const FeatureTensor a = assemble_features(inst);
    const FeatureTensor b = assemble_features(generate_instance(cfg));
    CHECK(a.chi == b.chi);
    CHECK(a.y == b.y);
    CHECK(a.site == b.site);
}

TEST_CASE("feature dump carries x, y and the cube") {
    Instance inst = single(3, 2, 10.0);
    inst.dmc.row(0) << 7, 8, 9;
    inst.economics.idle_penalty = 1.0;
    inst.machines[0].corrective_cost = 50.0;
    const auto j = nlohmann::json::parse(dump_features_json(inst));
    CHECK(j["x"][0][1].get<double>() == 51.0);
    CHECK(j["lambda"].size() == 1);
    CHECK(j["lambda"][0]["by_t"][1][0].get<double>() == 10.0);
    CHECK(j["lambda"][0]["by_t"][1][1].get<double>() == 0.0);
}
