#pragma once

#include "attenmfg/core_model.hpp"
#include "attenmfg/embedding.hpp"
#include "attenmfg/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

using namespace attenmfg;

// M machines on sites 1..L round robin, one scenario without failures,
// rate 10, demand 10, zero DMC. Tests overwrite what they need.
inline Instance blank_instance(int machines, int horizon, int dup, int sites = 1,
                               int scenarios = 1) {
    Instance inst;
    inst.n_sites = sites;
    inst.horizon = horizon;
    inst.economics.max_maint_per_period = dup;
    for (int m = 0; m < machines; ++m) {
        MachineSpec spec;
        spec.id = m;
        spec.site = 1 + m % sites;
        spec.preventive_cost = 100.0;
        spec.corrective_cost = 500.0;
        spec.survival = {2.0, static_cast<double>(horizon), 0.0, LifetimeFamily::weibull};
        spec.nominal_rate = 10.0;
        inst.machines.push_back(spec);
    }
    inst.scenarios.failure = IndexMatrix::Constant(scenarios, machines, horizon + 1);
    for (int s = 0; s < scenarios; ++s)
        inst.scenarios.limit.push_back(Matrix::Constant(machines, horizon, 10.0));
    inst.demand = Matrix::Constant(machines, horizon, 10.0);
    inst.dmc = Matrix::Zero(machines, horizon);
    return inst;
}

// Feature tensor with the given per-slot costs (rows M+1, idle row last) and
// row sites; y is zero.
inline FeatureTensor hand_features(const Matrix& slot_cost, std::vector<int> real_sites,
                                   int horizon, int dup) {
    FeatureTensor f;
    f.n_real = static_cast<int>(real_sites.size());
    f.horizon = horizon;
    f.dup = dup;
    f.chi = slot_cost;
    f.y = Matrix::Zero(slot_cost.rows(), slot_cost.cols());
    f.site = std::move(real_sites);
    f.site.push_back(0);
    return f;
}

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Small random generator configuration with M <= T*J.
inline GeneratorConfig random_config(Rng& rng, int max_sites = 3, int max_horizon = 4,
                                     int max_dup = 2, int max_machines = 6) {
    GeneratorConfig cfg;
    cfg.n_sites = uniform_int(rng, 1, max_sites);
    cfg.horizon = uniform_int(rng, 1, max_horizon);
    cfg.max_maint_per_period = uniform_int(rng, 1, max_dup);
    cfg.n_machines =
        uniform_int(rng, 1, std::min(max_machines, cfg.horizon * cfg.max_maint_per_period));
    cfg.n_scenarios = uniform_int(rng, 1, 4);
    cfg.travel_cost = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
    cfg.seed = rng();
    return cfg;
}

// Machines in distinct random slots, idle elsewhere.
inline std::vector<int> random_schedule(Rng& rng, int n_real, int slots) {
    std::vector<int> order(slots);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> seq(slots, n_real);
    for (int m = 0; m < n_real; ++m) seq[order[m]] = m;
    return seq;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("attenmfg_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
