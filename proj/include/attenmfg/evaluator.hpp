#pragma once

#include "attenmfg/core_model.hpp"
#include "attenmfg/embedding.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace attenmfg {

// A decoded sequence of row picks (real machine index or the idle row M),
// one per slot, plus the MIP variables it implies.
struct Schedule {
    std::vector<int> seq;

    IndexMatrix z;                               // M x T, 1 iff machine maintained in period
    std::vector<int> crew_site;                  // per slot, after the pick
    std::vector<std::vector<int>> period_sites;  // per period, sites the crew visits (phi)
    std::vector<char> relocated;                 // per slot, crew site changed (delta)

    // Derives the MIP variables; out-of-range picks are left for check_feasible.
    static Schedule from_sequence(std::vector<int> seq, std::span<const int> row_sites,
                                  int n_real, int horizon, int dup);
    static Schedule from_sequence(std::vector<int> seq, const FeatureTensor& features);
    static Schedule from_sequence(std::vector<int> seq, const Instance& instance);
};

// Sites per row of an instance: machines then the depot token.
std::vector<int> row_sites(const Instance& instance);

struct Violation {
    int constraint = 0;  // 0 structural, 7 per-period cap, 8 exactly once, 9 crew presence
    int index = -1;      // machine, period or slot, depending on the constraint
    std::string detail;
};

std::vector<Violation> check_feasible(const Schedule& schedule, const Instance& instance);
std::vector<Violation> check_feasible(const Schedule& schedule, const FeatureTensor& features);

// maint_pre/maint_corr/idle_pen split the maintenance term on the direct
// path. The sequence path cannot separate them (they are fused in chi) and
// reports the whole chi sum in maint_pre.
struct CostBreakdown {
    double maint_pre = 0.0;
    double maint_corr = 0.0;
    double idle_pen = 0.0;
    double demand_pen = 0.0;
    double travel = 0.0;
    double total = 0.0;

    double maintenance() const { return maint_pre + maint_corr + idle_pen; }
};

// Per-slot (chi + Y) plus travel_cost per crew-site change; the crew starts
// at the depot and the idle token returns it there.
CostBreakdown sequence_cost(const Schedule& schedule, const FeatureTensor& features,
                            const EconomicParams& economics);

// Objective terms evaluated straight from the instance through the
// production and unmet-demand constraints.
CostBreakdown direct_mip_cost(const Schedule& schedule, const Instance& instance);

int count_relocations(std::span<const int> seq, std::span<const int> row_sites);

double gap(double oracle_cost, double policy_cost);

struct GapReport {
    std::string instance_id;
    std::optional<double> oracle_cost;
    double policy_cost = 0.0;
    std::optional<double> gap_pct;
    bool oracle_proven = false;
    double decode_ms = 0.0;
    std::optional<double> oracle_ms;
};

struct GapSummary {
    int count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

inline constexpr std::string_view kGapReportHeader =
    "instance_id,oracle_cost,policy_cost,gap_pct,decode_ms,oracle_ms";

std::string gap_report_row(const GapReport& row);
std::string gap_report_csv(std::span<const GapReport> rows);
std::vector<GapReport> parse_gap_report_csv(std::string_view text);

// Over rows with a proven gap. Quartiles use linear interpolation.
GapSummary summarize_gaps(std::span<const GapReport> rows);
double quantile(std::vector<double> values, double q);

}  // namespace attenmfg
