#include "attenmfg/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <regex>

namespace attenmfg {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

template <typename Derived>
bool all_finite_nonneg(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite() && (m.size() == 0 || m.minCoeff() >= 0.0);
}

double draw(const Range& r, Rng& rng) {
    if (r.hi <= r.lo) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

int to_int(const std::string& s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

}  // namespace

double SurvivalParams::sample(Rng& rng) const {
    if (family == LifetimeFamily::deterministic) return scale;
    return std::weibull_distribution<double>(shape, scale)(rng);
}

void SurvivalParams::validate() const {
    if (!(shape > 0.0) || !std::isfinite(shape)) throw ValidationError("weibull shape must be > 0");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("weibull scale must be > 0");
    if (!finite_nonneg(observe_time)) throw ValidationError("observation time must be >= 0");
}

void Instance::validate() const {
    const int m_count = n_machines();
    const auto& e = economics;
    if (n_sites < 1) throw ValidationError("n_sites must be >= 1");
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    if (e.max_maint_per_period < 1) throw ValidationError("J must be >= 1");
    if (!finite_nonneg(e.idle_penalty) || !finite_nonneg(e.demand_penalty) ||
        !finite_nonneg(e.travel_cost))
        throw ValidationError("economic costs must be finite and >= 0");
    if (m_count > slots())
        throw InfeasibleError("M = " + std::to_string(m_count) + " exceeds T*J = " +
                              std::to_string(slots()));
    for (int m = 0; m < m_count; ++m) {
        const auto& spec = machines[m];
        const auto where = "machine " + std::to_string(m) + ": ";
        if (spec.id != m) throw ValidationError(where + "id must equal its position");
        if (spec.site < 1 || spec.site > n_sites)
            throw ValidationError(where + "site must lie in [1, n_sites] (0 is the depot)");
        if (!finite_nonneg(spec.preventive_cost) || !finite_nonneg(spec.corrective_cost))
            throw ValidationError(where + "costs must be finite and >= 0");
        if (!(spec.nominal_rate > 0.0) || !std::isfinite(spec.nominal_rate))
            throw ValidationError(where + "rate must be > 0");
        try {
            spec.survival.validate();
        } catch (const ValidationError& err) {
            throw ValidationError(where + err.what());
        }
    }
    const int s_count = scenarios.size();
    if (s_count < 1) throw ValidationError("at least one scenario is required");
    if (scenarios.failure.cols() != m_count) throw ValidationError("scenario failure shape");
    if (m_count > 0 &&
        (scenarios.failure.minCoeff() < 1 || scenarios.failure.maxCoeff() > horizon + 1))
        throw ValidationError("failure periods must lie in [1, T+1]");
    if (static_cast<int>(scenarios.limit.size()) != s_count)
        throw ValidationError("one production-limit matrix per scenario is required");
    for (const auto& lim : scenarios.limit) {
        if (lim.rows() != m_count || lim.cols() != horizon)
            throw ValidationError("production limit shape must be M x T");
        if (!all_finite_nonneg(lim)) throw ValidationError("production limits must be >= 0");
    }
    if (demand.rows() != m_count || demand.cols() != horizon)
        throw ValidationError("demand shape must be M x T");
    if (!all_finite_nonneg(demand)) throw ValidationError("demand must be finite and >= 0");
    if (dmc.rows() != m_count || dmc.cols() != horizon)
        throw ValidationError("dmc shape must be M x T");
    if (!all_finite_nonneg(dmc)) throw ValidationError("dmc must be finite and >= 0");
}

bool operator==(const Instance& a, const Instance& b) {
    auto same_machine = [](const MachineSpec& x, const MachineSpec& y) {
        return x.id == y.id && x.site == y.site && x.preventive_cost == y.preventive_cost &&
               x.corrective_cost == y.corrective_cost && x.nominal_rate == y.nominal_rate &&
               x.survival.shape == y.survival.shape && x.survival.scale == y.survival.scale &&
               x.survival.observe_time == y.survival.observe_time &&
               x.survival.family == y.survival.family;
    };
    if (a.n_sites != b.n_sites || a.horizon != b.horizon || a.seed != b.seed) return false;
    const auto& ea = a.economics;
    const auto& eb = b.economics;
    if (ea.idle_penalty != eb.idle_penalty || ea.demand_penalty != eb.demand_penalty ||
        ea.travel_cost != eb.travel_cost || ea.max_maint_per_period != eb.max_maint_per_period)
        return false;
    if (!std::equal(a.machines.begin(), a.machines.end(), b.machines.begin(), b.machines.end(),
                    same_machine))
        return false;
    if (a.scenarios.failure != b.scenarios.failure) return false;
    if (a.scenarios.limit.size() != b.scenarios.limit.size()) return false;
    for (std::size_t s = 0; s < a.scenarios.limit.size(); ++s)
        if (a.scenarios.limit[s] != b.scenarios.limit[s]) return false;
    return a.demand == b.demand && a.dmc == b.dmc;
}

double compute_dynamic_cost(const SurvivalParams& survival, double preventive_cost,
                            double corrective_cost, int t) {
    const double cap = 10.0 * survival.scale;
    return dynamic_cost([&](double z) { return survival.survival(z); }, preventive_cost,
                        corrective_cost, static_cast<double>(t), survival.observe_time, cap,
                        survival.scale / 1000.0);
}

ScenarioSet sample_scenarios(std::span<const MachineSpec> machines, int horizon, int n_scenarios,
                             Rng& rng) {
    if (n_scenarios < 1) throw InvalidParameters("n_scenarios must be >= 1");
    const int m_count = static_cast<int>(machines.size());
    ScenarioSet set;
    set.failure.resize(n_scenarios, m_count);
    set.limit.reserve(n_scenarios);
    for (int s = 0; s < n_scenarios; ++s) {
        Matrix limit(m_count, horizon);
        for (int m = 0; m < m_count; ++m) {
            const double life = machines[m].survival.sample(rng);
            const double period = std::clamp(std::ceil(life), 1.0, static_cast<double>(horizon + 1));
            set.failure(s, m) = static_cast<int>(period);
            limit.row(m).setConstant(machines[m].nominal_rate);
        }
        set.limit.push_back(std::move(limit));
    }
    return set;
}

Matrix sample_demand(std::span<const MachineSpec> machines, int horizon, Rng& rng,
                     double sigma_multiplier) {
    const int m_count = static_cast<int>(machines.size());
    Matrix demand(m_count, horizon);
    for (int m = 0; m < m_count; ++m) {
        const double mu = machines[m].nominal_rate;
        if (sigma_multiplier <= 0.0) {
            demand.row(m).setConstant(mu);
            continue;
        }
        std::normal_distribution<double> normal(mu, sigma_multiplier * mu);
        for (int t = 0; t < horizon; ++t) demand(m, t) = std::max(0.0, normal(rng));
    }
    return demand;
}

Matrix dynamic_cost_matrix(std::span<const MachineSpec> machines, int horizon) {
    Matrix dmc(static_cast<Eigen::Index>(machines.size()), horizon);
    for (std::size_t m = 0; m < machines.size(); ++m) {
        const auto& spec = machines[m];
        for (int t = 0; t < horizon; ++t)
            dmc(static_cast<Eigen::Index>(m), t) = compute_dynamic_cost(
                spec.survival, spec.preventive_cost, spec.corrective_cost, t + 1);
    }
    return dmc;
}

void GeneratorConfig::validate() const {
    if (n_machines < 0) throw InvalidParameters("n_machines must be >= 0");
    if (horizon < 1) throw InvalidParameters("horizon must be >= 1");
    if (max_maint_per_period < 1) throw InvalidParameters("J must be >= 1");
    if (n_scenarios < 1) throw InvalidParameters("n_scenarios must be >= 1");
    if (family == SiteFamily::fixed && n_sites < 1) throw InvalidParameters("n_sites must be >= 1");
    if (family == SiteFamily::random && max_random_sites < 1)
        throw InvalidParameters("max_random_sites must be >= 1");
    for (const Range* r : {&preventive_cost, &corrective_ratio, &weibull_shape, &weibull_scale,
                           &observe_time, &nominal_rate}) {
        if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || r->lo > r->hi)
            throw InvalidParameters("generator range has lo > hi or is not finite");
    }
    if (preventive_cost.lo < 0.0 || observe_time.lo < 0.0)
        throw InvalidParameters("costs and observation times must be >= 0");
    if (corrective_ratio.lo < 1.0)
        throw InvalidParameters("corrective cost ratio must be >= 1");
    if (weibull_shape.lo <= 0.0 || weibull_scale.lo <= 0.0 || nominal_rate.lo <= 0.0)
        throw InvalidParameters("weibull parameters and rates must be > 0");
    if (demand_sigma < 0.0) throw InvalidParameters("demand sigma must be >= 0");
    if (idle_penalty < 0.0 || demand_penalty < 0.0 || travel_cost < 0.0)
        throw InvalidParameters("economic costs must be >= 0");
    if (n_machines > horizon * max_maint_per_period)
        throw InfeasibleError("infeasible configuration: M = " + std::to_string(n_machines) +
                              " exceeds T*J = " + std::to_string(horizon * max_maint_per_period));
}

GeneratorConfig preset(std::string_view name) {
    static const std::regex pattern(R"(^(D_)?L(\d+|R)P(\d+)M(\d+)(?:_J(\d+))?$)");
    std::smatch match;
    const std::string text(name);
    if (!std::regex_match(text, match, pattern))
        throw InvalidParameters("unknown configuration name '" + text + "'");
    GeneratorConfig cfg;
    cfg.name = text;
    if (match[2] == "R") {
        cfg.family = SiteFamily::random;
    } else {
        cfg.family = SiteFamily::fixed;
        cfg.n_sites = to_int(match[2]);
    }
    cfg.horizon = to_int(match[3]);
    cfg.n_machines = to_int(match[4]);
    cfg.max_maint_per_period = match[5].matched ? to_int(match[5]) : 3;
    cfg.n_scenarios = 5;
    return cfg;
}

Instance generate_instance(const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng(mix_seed(cfg.seed));
    Instance inst;
    inst.seed = cfg.seed;
    inst.horizon = cfg.horizon;
    inst.economics = {cfg.idle_penalty, cfg.demand_penalty, cfg.travel_cost,
                      cfg.max_maint_per_period};
    inst.n_sites = cfg.family == SiteFamily::fixed
                       ? cfg.n_sites
                       : std::uniform_int_distribution<int>(1, cfg.max_random_sites)(rng);
    const double T = cfg.horizon;
    std::uniform_int_distribution<int> site_draw(1, inst.n_sites);
    inst.machines.resize(cfg.n_machines);
    for (int m = 0; m < cfg.n_machines; ++m) {
        auto& spec = inst.machines[m];
        spec.id = m;
        spec.site = site_draw(rng);
        spec.preventive_cost = draw(cfg.preventive_cost, rng);
        spec.corrective_cost = spec.preventive_cost * draw(cfg.corrective_ratio, rng);
        spec.survival.shape = draw(cfg.weibull_shape, rng);
        spec.survival.scale = draw(cfg.weibull_scale, rng) * T;
        spec.survival.observe_time = draw(cfg.observe_time, rng) * T;
        spec.nominal_rate = draw(cfg.nominal_rate, rng);
    }
    inst.scenarios = sample_scenarios(inst.machines, cfg.horizon, cfg.n_scenarios, rng);
    inst.demand = sample_demand(inst.machines, cfg.horizon, rng, cfg.demand_sigma);
    inst.dmc = dynamic_cost_matrix(inst.machines, cfg.horizon);
    inst.validate();
    return inst;
}

}  // namespace attenmfg
