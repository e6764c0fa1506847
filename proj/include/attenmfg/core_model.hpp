#pragma once

#include "attenmfg/error.hpp"
#include "attenmfg/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attenmfg {

using Rng = std::mt19937_64;

struct EconomicParams {
    double idle_penalty = 0.0;    // P^f, cost per idle machine-period
    double demand_penalty = 0.0;  // P^d, cost per unit of unmet demand
    double travel_cost = 0.0;     // Delta, cost per crew relocation
    int max_maint_per_period = 1; // J
};

enum class LifetimeFamily { weibull, deterministic };

// Remaining-life distribution observed at `observe_time`. The deterministic
// family is the k -> infinity limit: life equals `scale` exactly.
struct SurvivalParams {
    double shape = 1.0;
    double scale = 1.0;
    double observe_time = 0.0;
    LifetimeFamily family = LifetimeFamily::weibull;

    // P(R > z)
    double survival(double z) const {
        if (family == LifetimeFamily::deterministic) return z < scale ? 1.0 : 0.0;
        if (z <= 0.0) return 1.0;
        return std::exp(-std::pow(z / scale, shape));
    }

    double sample(Rng& rng) const;
    void validate() const;
};

struct MachineSpec {
    int id = 0;
    int site = 1;  // 1..L; 0 is the depot
    double preventive_cost = 0.0;
    double corrective_cost = 0.0;
    SurvivalParams survival;
    double nominal_rate = 1.0;
};

struct ScenarioSet {
    IndexMatrix failure;         // S x M, periods 1..T+1 (T+1: no failure in horizon)
    std::vector<Matrix> limit;   // S entries of M x T production limits

    int size() const { return static_cast<int>(failure.rows()); }
};

struct Instance {
    int n_sites = 1;
    int horizon = 1;
    EconomicParams economics;
    std::vector<MachineSpec> machines;
    ScenarioSet scenarios;
    Matrix demand;  // M x T
    Matrix dmc;     // M x T, C_{m,t}
    std::uint64_t seed = 0;

    int n_machines() const { return static_cast<int>(machines.size()); }
    int slots() const { return horizon * economics.max_maint_per_period; }

    // Throws ValidationError (or InfeasibleError for M > T*J).
    void validate() const;
};

bool operator==(const Instance& a, const Instance& b);

// Dynamic maintenance cost for a generic survival function, integrating the
// mean residual life with the composite trapezoid rule on [0, horizon_cap].
template <typename SurvivalFn>
double dynamic_cost(SurvivalFn&& survival, double preventive_cost, double corrective_cost,
                    double t, double observe_time, double horizon_cap, double step) {
    if (!(t >= 1.0)) throw InvalidParameters("dynamic_cost: t must be >= 1");
    if (!(step > 0.0) || !(horizon_cap > 0.0))
        throw InvalidParameters("dynamic_cost: integration step and cap must be positive");
    const auto n = static_cast<long>(std::ceil(horizon_cap / step - 1e-9));
    const double h = horizon_cap / static_cast<double>(n);
    double area = 0.5 * (survival(0.0) + survival(horizon_cap));
    for (long i = 1; i < n; ++i) area += survival(h * static_cast<double>(i));
    area *= h;
    const double alive = survival(t);
    if (!std::isfinite(area) || !std::isfinite(alive))
        throw InvalidParameters("dynamic_cost: survival function is not finite");
    const double numer = preventive_cost * alive + corrective_cost * (1.0 - alive);
    return numer / (area + observe_time);
}

// Step scale/1000 truncated at 10*scale.
double compute_dynamic_cost(const SurvivalParams& survival, double preventive_cost,
                            double corrective_cost, int t);

ScenarioSet sample_scenarios(std::span<const MachineSpec> machines, int horizon, int n_scenarios,
                             Rng& rng);

Matrix sample_demand(std::span<const MachineSpec> machines, int horizon, Rng& rng,
                     double sigma_multiplier = 0.1);

Matrix dynamic_cost_matrix(std::span<const MachineSpec> machines, int horizon);

enum class SiteFamily { fixed, random };

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct GeneratorConfig {
    std::string name = "custom";
    SiteFamily family = SiteFamily::fixed;
    int n_sites = 1;   // used by the fixed family
    int max_random_sites = 10;
    int n_machines = 1;
    int horizon = 1;
    int max_maint_per_period = 3;
    int n_scenarios = 5;
    std::uint64_t seed = 0;

    // Machine parameter draws. Weibull scale and observation time are
    // fractions of the horizon; corrective cost is preventive cost times a ratio.
    Range preventive_cost{50.0, 150.0};
    Range corrective_ratio{3.0, 6.0};
    Range weibull_shape{1.5, 3.0};
    Range weibull_scale{0.5, 1.5};
    Range observe_time{0.0, 0.5};
    Range nominal_rate{20.0, 60.0};
    double demand_sigma = 0.1;

    double idle_penalty = 20.0;
    double demand_penalty = 2.0;
    double travel_cost = 40.0;

    void validate() const;
};

// Table-style names: L5P10M25, LRP15M40 (random sites), and desk presets such
// as D_L2P4M6_J2. J defaults to 3.
GeneratorConfig preset(std::string_view name);

Instance generate_instance(const GeneratorConfig& cfg);

std::string save_instance(const Instance& instance);
Instance load_instance(std::string_view text);

}  // namespace attenmfg
