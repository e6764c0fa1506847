#pragma once

// Reference implementations written independently of the production code
// paths. Tests and the `verify` command compare the two.

#include "attenmfg/core_model.hpp"
#include "attenmfg/embedding.hpp"
#include "attenmfg/policy.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace attenmfg::checks {

// Steps one machine period by period through
// running -> down -> in maintenance -> repaired and records the production in
// each period l = 1..T when maintenance happens in period `maint_period`.
// `failure` is the 1-based failure period (T+1 for none).
std::vector<double> simulate_throughput(int failure, int maint_period,
                                        const std::vector<double>& limit);

// x and y matrices (M x T) re-evaluated term by term from the instance using
// the simulator above.
Matrix reference_maintenance_cost(const Instance& instance);
Matrix reference_demand_penalty(const Instance& instance);

// Constraint-by-constraint checker for a row sequence. Returns the set of
// violated constraint ids (7 cap, 8 exactly once, 9 crew presence, 0 shape).
// `crew_site` (per slot) defaults to the site of each pick.
std::set<int> reference_violations(const std::vector<int>& seq, const std::vector<int>& row_site,
                                   int n_real, int horizon, int dup,
                                   const std::vector<int>* crew_site = nullptr);

// Canonical cost re-derived from the instance-level definition.
double reference_sequence_cost(const std::vector<int>& seq, const FeatureTensor& features,
                               double travel_cost);

struct BruteForceResult {
    std::vector<int> seq;
    double cost = 0.0;
    std::int64_t feasible = 0;  // number of feasible sequences visited
};

// Odometer over all (M+1)^(T*J) row sequences; ties keep the
// lexicographically smallest.
BruteForceResult brute_force_optimum(const FeatureTensor& features, double travel_cost);

// M == T*J: every feasible sequence is a permutation of the machines.
BruteForceResult permutation_optimum(const FeatureTensor& features, double travel_cost);

// Rectangular min-cost assignment (rows <= cols), Hungarian method.
// Returns the minimum total and the column chosen for each row.
double min_cost_assignment(const Matrix& cost, std::vector<int>* assignment = nullptr);

// With one site and no travel cost the sequencing problem is an assignment of
// machines to slots. Returns that optimum.
double assignment_optimum(const FeatureTensor& features);

// Exact sequence probabilities of the decoding process when every allowed
// row is equally likely at each step.
std::map<std::vector<int>, double> masked_uniform_distribution(int n_real, int horizon, int dup);

// Scalar Adam for one coordinate.
struct ScalarAdam {
    double m = 0.0;
    double v = 0.0;
    int t = 0;
    double step(double theta, double grad, double lr, double b1 = 0.9, double b2 = 0.999,
                double eps = 1e-8);
};

// Simpson's rule on [0, 10*scale] at scale/10000 for the mean residual life.
double reference_dynamic_cost(double shape, double scale, double observe_time,
                              double preventive_cost, double corrective_cost, double t);

// Triple-loop multi-head self attention with projections, no Eigen products.
Matrix naive_self_attention(const Matrix& x, const AttentionWeights& w, int heads,
                            double inv_scale);

// Analytic gradient against central finite differences of
// `log_prob_objective`, per tensor:
//   max_rel_error   = max|a - n| / max(max|a|, max|n|, floor)
//   max_entry_error = max over entries of |a - n| / max(|a|, |n|, floor)
struct GradientCheck {
    std::string tensor;
    double max_rel_error = 0.0;
    double max_entry_error = 0.0;
    double max_abs_analytic = 0.0;
    std::size_t entries = 0;
};

std::vector<GradientCheck> finite_difference_check(const FeatureTensor& features,
                                                   const PolicyParams& params,
                                                   const std::vector<std::vector<int>>& seqs,
                                                   const std::vector<double>& weights,
                                                   double eps = 1e-5, double floor = 1e-6);

}  // namespace attenmfg::checks
