#include "attenmfg/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace attenmfg {

std::vector<int> row_sites(const Instance& instance) {
    std::vector<int> sites(instance.n_machines() + 1, 0);
    for (int m = 0; m < instance.n_machines(); ++m) sites[m] = instance.machines[m].site;
    return sites;
}

Schedule Schedule::from_sequence(std::vector<int> seq, std::span<const int> sites, int n_real,
                                 int horizon, int dup) {
    Schedule s;
    s.seq = std::move(seq);
    s.z = IndexMatrix::Zero(n_real, horizon);
    s.crew_site.assign(s.seq.size(), 0);
    s.relocated.assign(s.seq.size(), 0);
    s.period_sites.assign(horizon, {});
    int crew = 0;
    for (std::size_t c = 0; c < s.seq.size(); ++c) {
        const int row = s.seq[c];
        const int period = static_cast<int>(c) / dup;
        const bool valid_row = row >= 0 && row < static_cast<int>(sites.size());
        const int site = valid_row ? sites[row] : crew;
        s.relocated[c] = site != crew;
        crew = site;
        s.crew_site[c] = crew;
        if (period < horizon) {
            auto& visited = s.period_sites[period];
            if (std::find(visited.begin(), visited.end(), crew) == visited.end())
                visited.push_back(crew);
            if (valid_row && row < n_real) s.z(row, period) += 1;
        }
    }
    return s;
}

Schedule Schedule::from_sequence(std::vector<int> seq, const FeatureTensor& f) {
    return from_sequence(std::move(seq), f.site, f.n_real, f.horizon, f.dup);
}

Schedule Schedule::from_sequence(std::vector<int> seq, const Instance& inst) {
    return from_sequence(std::move(seq), row_sites(inst), inst.n_machines(), inst.horizon,
                         inst.economics.max_maint_per_period);
}

namespace {

std::vector<Violation> violations(const Schedule& sch, std::span<const int> sites, int n_real,
                                  int horizon, int dup) {
    std::vector<Violation> out;
    const int slots = horizon * dup;
    const int rows = n_real + 1;
    if (static_cast<int>(sch.seq.size()) != slots)
        out.push_back({0, -1, "sequence length " + std::to_string(sch.seq.size()) +
                                  " != T*J = " + std::to_string(slots)});
    std::vector<int> count(n_real, 0);
    for (std::size_t c = 0; c < sch.seq.size(); ++c) {
        const int row = sch.seq[c];
        if (row < 0 || row >= rows) {
            out.push_back({0, static_cast<int>(c), "row " + std::to_string(row) + " out of range"});
            continue;
        }
        if (row < n_real) ++count[row];
    }
    if (!out.empty()) return out;

    // at most J real machines per period
    for (int t = 0; t < horizon; ++t) {
        const int maintained = sch.z.col(t).sum();
        if (maintained > dup)
            out.push_back({7, t, std::to_string(maintained) + " maintenances in period " +
                                     std::to_string(t + 1)});
    }
    // every machine exactly once
    for (int m = 0; m < n_real; ++m)
        if (count[m] != 1)
            out.push_back({8, m, "machine " + std::to_string(m) + " maintained " +
                                     std::to_string(count[m]) + " times"});
    // crew present at the machine's site in the slot and period it is maintained
    for (int c = 0; c < slots; ++c) {
        const int row = sch.seq[c];
        if (row >= n_real) continue;
        const int t = c / dup;
        const auto& visited = sch.period_sites[t];
        const bool present = sch.crew_site[c] == sites[row] &&
                             std::find(visited.begin(), visited.end(), sites[row]) != visited.end();
        if (!present)
            out.push_back({9, c, "crew absent from site " + std::to_string(sites[row])});
    }
    return out;
}

}  // namespace

std::vector<Violation> check_feasible(const Schedule& sch, const Instance& inst) {
    return violations(sch, row_sites(inst), inst.n_machines(), inst.horizon,
                      inst.economics.max_maint_per_period);
}

std::vector<Violation> check_feasible(const Schedule& sch, const FeatureTensor& f) {
    return violations(sch, f.site, f.n_real, f.horizon, f.dup);
}

int count_relocations(std::span<const int> seq, std::span<const int> sites) {
    int crew = 0;
    int moves = 0;
    for (int row : seq) {
        if (sites[row] != crew) ++moves;
        crew = sites[row];
    }
    return moves;
}

namespace {

void require_feasible(const std::vector<Violation>& v) {
    if (v.empty()) return;
    std::string msg = "infeasible schedule: " + v.front().detail;
    if (v.size() > 1) msg += " (+" + std::to_string(v.size() - 1) + " more)";
    throw InfeasibleError(msg);
}

}  // namespace

CostBreakdown sequence_cost(const Schedule& sch, const FeatureTensor& f,
                            const EconomicParams& econ) {
    require_feasible(check_feasible(sch, f));
    CostBreakdown out;
    for (int c = 0; c < f.cols(); ++c) {
        out.maint_pre += f.chi(sch.seq[c], c);
        out.demand_pen += f.y(sch.seq[c], c);
    }
    out.travel = econ.travel_cost * count_relocations(sch.seq, f.site);
    out.total = out.maint_pre + out.demand_pen + out.travel;
    return out;
}

CostBreakdown direct_mip_cost(const Schedule& sch, const Instance& inst) {
    require_feasible(check_feasible(sch, inst));
    const int m_count = inst.n_machines();
    const int horizon = inst.horizon;
    const int s_count = inst.scenarios.size();
    const auto& econ = inst.economics;
    CostBreakdown out;

    // maintenance period (1-based) of every machine
    std::vector<int> when(m_count, 0);
    for (int m = 0; m < m_count; ++m)
        for (int t = 0; t < horizon; ++t)
            if (sch.z(m, t)) when[m] = t + 1;

    double pre = 0.0, corr = 0.0, idle = 0.0;
    Matrix unmet = Matrix::Zero(m_count, horizon);  // d^u
    for (int s = 0; s < s_count; ++s) {
        const Matrix& limit = inst.scenarios.limit[s];
        for (int m = 0; m < m_count; ++m) {
            const int fail = inst.scenarios.failure(s, m);
            for (int t = 1; t <= horizon; ++t) {
                const int z = sch.z(m, t - 1);
                if (t <= fail - 1) {
                    pre += inst.dmc(m, t - 1) * z;
                    idle += econ.idle_penalty * z;
                } else {
                    corr += inst.machines[m].corrective_cost * z;
                    idle += (t - fail + 1) * econ.idle_penalty * z;
                }
                // production level at its upper bound
                double lam;
                if (t <= fail - 1) {
                    lam = limit(m, t - 1) * (1 - z);
                } else {
                    int maintained_before = 0;
                    for (int l = 1; l <= t - 1; ++l) maintained_before += sch.z(m, l - 1);
                    lam = limit(m, t - 1) * maintained_before;
                }
                const double gamma = std::max(inst.demand(m, t - 1) - lam, 0.0);
                unmet(m, t - 1) += gamma / s_count;
            }
        }
    }
    out.maint_pre = pre / s_count;
    out.maint_corr = corr / s_count;
    out.idle_pen = idle / s_count;
    out.demand_pen = econ.demand_penalty * unmet.sum();

    int crew = 0;
    int moves = 0;
    const auto sites = row_sites(inst);
    for (int row : sch.seq) {
        moves += sites[row] != crew;
        crew = sites[row];
    }
    out.travel = econ.travel_cost * moves;
    out.total = out.maint_pre + out.maint_corr + out.idle_pen + out.demand_pen + out.travel;
    return out;
}

double gap(double oracle_cost, double policy_cost) {
    if (!(oracle_cost > 0.0)) throw InvalidParameters("gap: oracle cost must be > 0");
    return 100.0 * (policy_cost - oracle_cost) / oracle_cost;
}

namespace {

std::string fmt_num(double v, const char* spec = "%.17g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::string gap_report_row(const GapReport& r) {
    std::string out = r.instance_id;
    out += ',';
    out += r.oracle_cost ? fmt_num(*r.oracle_cost) : "NA";
    out += ',';
    out += fmt_num(r.policy_cost);
    out += ',';
    if (r.gap_pct && r.oracle_proven)
        out += fmt_num(*r.gap_pct);
    else
        out += r.oracle_cost ? "unproven" : "NA";
    out += ',';
    out += fmt_num(r.decode_ms, "%.3f");
    out += ',';
    out += r.oracle_ms ? fmt_num(*r.oracle_ms, "%.3f") : "NA";
    return out;
}

std::string gap_report_csv(std::span<const GapReport> rows) {
    std::string out(kGapReportHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += gap_report_row(r);
        out += '\n';
    }
    return out;
}

std::vector<GapReport> parse_gap_report_csv(std::string_view text) {
    std::vector<GapReport> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kGapReportHeader)
        throw ParseError("header", "expected '" + std::string(kGapReportHeader) + "'");
    auto opt = [](const std::string& s) -> std::optional<double> {
        if (s == "NA" || s == "unproven") return std::nullopt;
        return std::stod(s);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw ParseError("row", "expected 6 columns: " + line);
        GapReport r;
        r.instance_id = cells[0];
        r.oracle_cost = opt(cells[1]);
        r.policy_cost = std::stod(cells[2]);
        r.gap_pct = opt(cells[3]);
        r.oracle_proven = r.gap_pct.has_value();
        r.decode_ms = std::stod(cells[4]);
        r.oracle_ms = opt(cells[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

GapSummary summarize_gaps(std::span<const GapReport> rows) {
    std::vector<double> gaps;
    for (const auto& r : rows)
        if (r.gap_pct && r.oracle_proven) gaps.push_back(*r.gap_pct);
    GapSummary s;
    s.count = static_cast<int>(gaps.size());
    if (gaps.empty()) return s;
    double sum = 0.0;
    for (double g : gaps) sum += g;
    s.mean = sum / static_cast<double>(gaps.size());
    s.median = quantile(gaps, 0.5);
    s.q1 = quantile(gaps, 0.25);
    s.q3 = quantile(gaps, 0.75);
    return s;
}

}  // namespace attenmfg
