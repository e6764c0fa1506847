#include "attenmfg/oracle.hpp"

#include "attenmfg/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace attenmfg {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void require_searchable(const FeatureTensor& f) {
    if (f.n_real > 64) throw InvalidParameters("exact search supports at most 64 machines");
    if (f.n_real > f.cols())
        throw InfeasibleError("M = " + std::to_string(f.n_real) + " exceeds T*J = " +
                              std::to_string(f.cols()));
}

struct Search {
    Search(const FeatureTensor& f, const EconomicParams& e)
        : w(f.slot_cost()), sites(f.site), delta(e.travel_cost), n_real(f.n_real),
          idle(f.idle_row()), slots(f.cols()), cur(f.cols(), 0) {
        suffix_min = Matrix::Constant(n_real, slots + 1, kInf);
        for (int m = 0; m < n_real; ++m)
            for (int c = slots - 1; c >= 0; --c)
                suffix_min(m, c) = std::min(suffix_min(m, c + 1), w(m, c));
        max_site = *std::max_element(sites.begin(), sites.end());
    }

    bool used(int m) const { return (mask >> m) & 1ULL; }

    // Sum of cheapest remaining slot per unplaced machine, plus one
    // relocation for every site still to be entered.
    double lower_bound(int c, int crew) const {
        double lb = 0.0;
        std::vector<char> pending(max_site + 1, 0);
        for (int m = 0; m < n_real; ++m) {
            if (used(m)) continue;
            lb += suffix_min(m, c);
            pending[sites[m]] = 1;
        }
        int entries = 0;
        for (int s = 0; s <= max_site; ++s) entries += pending[s] && s != crew;
        return lb + delta * entries;
    }

    double step_cost(int row, int c, int crew) const {
        return w(row, c) + (sites[row] != crew ? delta : 0.0);
    }

    bool allowed(int row, int c, int remaining) const {
        if (row == idle) return remaining < slots - c;
        return !used(row);
    }

    void exhaustive(int c, int crew, double partial, int remaining) {
        ++nodes;
        if (c == slots) {
            if (partial < best) {
                best = partial;
                best_seq = cur;
            }
            return;
        }
        for (int row = 0; row <= idle; ++row) {
            if (!allowed(row, c, remaining)) continue;
            cur[c] = row;
            const bool real = row != idle;
            if (real) mask |= 1ULL << row;
            exhaustive(c + 1, sites[row], partial + step_cost(row, c, crew), remaining - real);
            if (real) mask &= ~(1ULL << row);
        }
    }

    void branch(int c, int crew, double partial, int remaining) {
        ++nodes;
        if ((nodes & 0xfff) == 0 && Clock::now() > deadline) timed_out = true;
        if (timed_out) return;
        if (c == slots) {
            if (partial < best) {
                best = partial;
                best_seq = cur;
            }
            return;
        }
        const double slack = 1e-9 * std::max(1.0, std::abs(best));
        if (partial + lower_bound(c, crew) >= best + slack) return;

        std::vector<std::pair<double, int>> children;
        children.reserve(idle + 1);
        for (int row = 0; row <= idle; ++row)
            if (allowed(row, c, remaining)) children.emplace_back(step_cost(row, c, crew), row);
        std::sort(children.begin(), children.end());
        for (const auto& [inc, row] : children) {
            cur[c] = row;
            const bool real = row != idle;
            if (real) mask |= 1ULL << row;
            branch(c + 1, sites[row], partial + inc, remaining - real);
            if (real) mask &= ~(1ULL << row);
            if (timed_out) return;
        }
    }

    Matrix w;
    Matrix suffix_min;
    std::vector<int> sites;
    double delta;
    int n_real, idle, slots, max_site = 0;
    std::uint64_t mask = 0;
    std::vector<int> cur;
    std::vector<int> best_seq;
    double best = kInf;
    std::int64_t nodes = 0;
    Clock::time_point deadline;
    bool timed_out = false;
};

}  // namespace

double canonical_cost(const std::vector<int>& seq, const FeatureTensor& f,
                      const EconomicParams& e) {
    double cost = 0.0;
    int crew = 0;
    for (int c = 0; c < static_cast<int>(seq.size()); ++c) {
        const int row = seq[c];
        cost += f.chi(row, c) + f.y(row, c) + (f.site[row] != crew ? e.travel_cost : 0.0);
        crew = f.site[row];
    }
    return cost;
}

std::vector<int> greedy_sequence(const FeatureTensor& f, const EconomicParams& e) {
    require_searchable(f);
    Search s(f, e);
    std::vector<int> seq(f.cols());
    int crew = 0;
    int remaining = f.n_real;
    for (int c = 0; c < f.cols(); ++c) {
        int pick = -1;
        double pick_cost = kInf;
        for (int row = 0; row <= s.idle; ++row) {
            if (!s.allowed(row, c, remaining)) continue;
            const double inc = s.step_cost(row, c, crew);
            if (inc < pick_cost) {
                pick_cost = inc;
                pick = row;
            }
        }
        seq[c] = pick;
        if (pick != s.idle) {
            s.mask |= 1ULL << pick;
            --remaining;
        }
        crew = f.site[pick];
    }
    return seq;
}

OracleResult solve_exhaustive(const FeatureTensor& f, const EconomicParams& e,
                              std::int64_t node_budget) {
    require_searchable(f);
    const double space = std::pow(static_cast<double>(f.rows()), f.cols());
    if (space > static_cast<double>(node_budget))
        throw BudgetExceeded("search space (M+1)^(T*J) = " + std::to_string(space) +
                             " exceeds the node budget; use branch and bound");
    const auto start = Clock::now();
    Search s(f, e);
    s.exhaustive(0, 0, 0.0, f.n_real);
    return {s.best_seq, s.best, true, s.nodes, elapsed_ms(start)};
}

OracleResult solve_bnb(const FeatureTensor& f, const EconomicParams& e,
                       double time_budget_seconds) {
    require_searchable(f);
    const auto start = Clock::now();
    Search s(f, e);
    s.deadline = start + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(time_budget_seconds));
    s.best_seq = greedy_sequence(f, e);
    s.best = canonical_cost(s.best_seq, f, e);
    s.branch(0, 0, 0.0, f.n_real);
    return {s.best_seq, s.best, !s.timed_out, s.nodes, elapsed_ms(start)};
}

std::string oracle_result_json(const OracleResult& r) {
    nlohmann::ordered_json j;
    j["cost"] = r.cost;
    j["seq"] = r.seq;
    j["proven"] = r.proven;
    j["nodes"] = r.nodes;
    j["ms"] = r.ms;
    return j.dump(2) + "\n";
}

}  // namespace attenmfg
