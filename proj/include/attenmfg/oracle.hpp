#pragma once

#include "attenmfg/embedding.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace attenmfg {

struct OracleResult {
    std::vector<int> seq;
    double cost = 0.0;
    bool proven = false;
    std::int64_t nodes = 0;
    double ms = 0.0;
};

inline constexpr std::int64_t kDefaultNodeBudget = 50'000'000;
inline constexpr double kDefaultTimeBudgetSeconds = 600.0;

// Enumerates every feasible sequence. Throws BudgetExceeded when
// (M+1)^(T*J) > node_budget. Ties resolve to the lexicographically smallest
// sequence.
OracleResult solve_exhaustive(const FeatureTensor& features, const EconomicParams& economics,
                              std::int64_t node_budget = kDefaultNodeBudget);

// Depth-first branch and bound. On timeout the incumbent is returned with
// proven = false.
OracleResult solve_bnb(const FeatureTensor& features, const EconomicParams& economics,
                       double time_budget_seconds = kDefaultTimeBudgetSeconds);

// Slot-by-slot cheapest allowed pick (incremental cost, then row index).
std::vector<int> greedy_sequence(const FeatureTensor& features, const EconomicParams& economics);

// Canonical cost accumulated slot by slot, the way both searches do.
double canonical_cost(const std::vector<int>& seq, const FeatureTensor& features,
                      const EconomicParams& economics);

// {cost, seq[], proven, nodes, ms}
std::string oracle_result_json(const OracleResult& result);

}  // namespace attenmfg
