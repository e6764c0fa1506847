#include "attenmfg/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace attenmfg::checks {

namespace {

enum class MachineState { running, down, maintenance, repaired };

}  // namespace

std::vector<double> simulate_throughput(int failure, int maint_period,
                                        const std::vector<double>& limit) {
    const int horizon = static_cast<int>(limit.size());
    std::vector<double> out(horizon, 0.0);
    MachineState state = MachineState::running;
    for (int l = 1; l <= horizon; ++l) {
        if (state == MachineState::maintenance) state = MachineState::repaired;
        if (state == MachineState::running && l >= failure) state = MachineState::down;
        if (l == maint_period) state = MachineState::maintenance;
        switch (state) {
            case MachineState::running:
            case MachineState::repaired:
                out[l - 1] = limit[l - 1];
                break;
            case MachineState::down:
            case MachineState::maintenance:
                out[l - 1] = 0.0;
                break;
        }
    }
    return out;
}

Matrix reference_maintenance_cost(const Instance& inst) {
    const int M = inst.n_machines();
    const int T = inst.horizon;
    const int S = inst.scenarios.size();
    const double pf = inst.economics.idle_penalty;
    Matrix x = Matrix::Zero(M, T);
    for (int m = 0; m < M; ++m) {
        for (int t = 1; t <= T; ++t) {
            double total = 0.0;
            for (int s = 0; s < S; ++s) {
                const int F = inst.scenarios.failure(s, m);
                if (t < F)
                    total += inst.dmc(m, t - 1) + pf;
                else
                    total += inst.machines[m].corrective_cost + (t - F + 1) * pf;
            }
            x(m, t - 1) = total / S;
        }
    }
    return x;
}

Matrix reference_demand_penalty(const Instance& inst) {
    const int M = inst.n_machines();
    const int T = inst.horizon;
    const int S = inst.scenarios.size();
    Matrix y = Matrix::Zero(M, T);
    for (int m = 0; m < M; ++m) {
        for (int t = 1; t <= T; ++t) {
            double total = 0.0;
            for (int s = 0; s < S; ++s) {
                std::vector<double> limit(T);
                for (int l = 0; l < T; ++l) limit[l] = inst.scenarios.limit[s](m, l);
                const auto produced = simulate_throughput(inst.scenarios.failure(s, m), t, limit);
                for (int l = 0; l < T; ++l)
                    total += std::max(inst.demand(m, l) - produced[l], 0.0);
            }
            y(m, t - 1) = inst.economics.demand_penalty * total / S;
        }
    }
    return y;
}

std::set<int> reference_violations(const std::vector<int>& seq, const std::vector<int>& row_site,
                                   int n_real, int horizon, int dup,
                                   const std::vector<int>* crew_site) {
    std::set<int> bad;
    if (static_cast<int>(seq.size()) != horizon * dup) {
        bad.insert(0);
        return bad;
    }
    for (int r : seq)
        if (r < 0 || r > n_real) {
            bad.insert(0);
            return bad;
        }
    // each machine maintained in exactly one period.
    for (int m = 0; m < n_real; ++m) {
        int periods = 0;
        for (int t = 0; t < horizon; ++t) {
            bool here = false;
            for (int j = 0; j < dup; ++j) here = here || seq[t * dup + j] == m;
            periods += here ? 1 : 0;
        }
        const auto copies = std::count(seq.begin(), seq.end(), m);
        if (periods != 1 || copies != 1) bad.insert(8);
    }
    // at most J machines per period.
    for (int t = 0; t < horizon; ++t) {
        int real = 0;
        for (int j = 0; j < dup; ++j) real += seq[t * dup + j] < n_real ? 1 : 0;
        if (real > dup) bad.insert(7);
    }
    // a machine at site l maintained in period t needs the crew at l
    // during t; with no explicit crew path the crew follows the picks.
    for (int c = 0; c < horizon * dup; ++c) {
        const int m = seq[c];
        if (m >= n_real) continue;
        const int t = c / dup;
        bool present = false;
        for (int j = 0; j < dup; ++j) {
            const int slot = t * dup + j;
            const int at = crew_site ? (*crew_site)[slot] : row_site[seq[slot]];
            present = present || (at == row_site[m] && (!crew_site || slot == c));
        }
        if (!present) bad.insert(9);
    }
    return bad;
}

double reference_sequence_cost(const std::vector<int>& seq, const FeatureTensor& f,
                               double travel_cost) {
    double total = 0.0;
    int prev_site = 0;
    for (std::size_t c = 0; c < seq.size(); ++c) {
        const int r = seq[c];
        const int col = static_cast<int>(c);
        total += f.chi(r, col) + f.y(r, col);
        if (f.site[r] != prev_site) total += travel_cost;
        prev_site = f.site[r];
    }
    return total;
}

BruteForceResult brute_force_optimum(const FeatureTensor& f, double travel_cost) {
    const int n = f.cols();
    const int base = f.rows();
    BruteForceResult best;
    best.cost = std::numeric_limits<double>::infinity();
    std::vector<int> seq(n, 0);
    while (true) {
        const auto bad = reference_violations(seq, f.site, f.n_real, f.horizon, f.dup);
        if (bad.empty()) {
            ++best.feasible;
            const double c = reference_sequence_cost(seq, f, travel_cost);
            // the odometer runs in lexicographic order, so strict < keeps the smallest
            if (c < best.cost) {
                best.cost = c;
                best.seq = seq;
            }
        }
        int pos = n - 1;
        while (pos >= 0 && seq[pos] == base - 1) seq[pos--] = 0;
        if (pos < 0) break;
        ++seq[pos];
    }
    return best;
}

BruteForceResult permutation_optimum(const FeatureTensor& f, double travel_cost) {
    if (f.n_real != f.cols()) throw InvalidParameters("permutation_optimum needs M == T*J");
    std::vector<int> seq(f.n_real);
    std::iota(seq.begin(), seq.end(), 0);
    BruteForceResult best;
    best.cost = std::numeric_limits<double>::infinity();
    do {
        ++best.feasible;
        const double c = reference_sequence_cost(seq, f, travel_cost);
        if (c < best.cost) {
            best.cost = c;
            best.seq = seq;
        }
    } while (std::next_permutation(seq.begin(), seq.end()));
    return best;
}

double min_cost_assignment(const Matrix& a, std::vector<int>* assignment) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    if (n > m) throw InvalidParameters("min_cost_assignment needs rows <= cols");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials formulation
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) col[p[j] - 1] = j - 1;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += a(i, col[i]);
    if (assignment) *assignment = std::move(col);
    return total;
}

double assignment_optimum(const FeatureTensor& f) {
    Matrix cost(f.n_real, f.cols());
    for (int m = 0; m < f.n_real; ++m)
        for (int c = 0; c < f.cols(); ++c) cost(m, c) = f.chi(m, c) + f.y(m, c);
    return min_cost_assignment(cost);
}

std::map<std::vector<int>, double> masked_uniform_distribution(int n_real, int horizon, int dup) {
    std::map<std::vector<int>, double> out;
    const int steps = horizon * dup;
    std::vector<int> seq;
    std::vector<char> used(n_real, 0);
    auto rec = [&](auto&& self, double prob) -> void {
        const int step = static_cast<int>(seq.size());
        if (step == steps) {
            out[seq] += prob;
            return;
        }
        const int left_real = n_real - static_cast<int>(std::count(used.begin(), used.end(), 1));
        std::vector<int> options;
        for (int m = 0; m < n_real; ++m)
            if (!used[m]) options.push_back(m);
        if (left_real < steps - step) options.push_back(n_real);
        const double share = prob / static_cast<double>(options.size());
        for (int r : options) {
            seq.push_back(r);
            if (r < n_real) used[r] = 1;
            self(self, share);
            if (r < n_real) used[r] = 0;
            seq.pop_back();
        }
    };
    rec(rec, 1.0);
    return out;
}

double ScalarAdam::step(double theta, double grad, double lr, double b1, double b2, double eps) {
    ++t;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(b1, t));
    const double vhat = v / (1.0 - std::pow(b2, t));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
}

double reference_dynamic_cost(double shape, double scale, double observe_time,
                              double preventive_cost, double corrective_cost, double t) {
    auto surv = [&](double z) { return z <= 0.0 ? 1.0 : std::exp(-std::pow(z / scale, shape)); };
    const long n = 10000 * 10;  // even
    const double b = 10.0 * scale;
    const double h = b / static_cast<double>(n);
    double s = surv(0.0) + surv(b);
    for (long i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * surv(h * static_cast<double>(i));
    const double area = s * h / 3.0;
    const double alive = surv(t);
    return (preventive_cost * alive + corrective_cost * (1.0 - alive)) / (area + observe_time);
}

Matrix naive_self_attention(const Matrix& x, const AttentionWeights& w, int heads,
                            double inv_scale) {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    auto project = [&](const Matrix& wm) {
        Matrix out(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k) s += x(i, k) * wm(k, j);
                out(i, j) = s;
            }
        return out;
    };
    const Matrix q = project(w.query), k = project(w.key), v = project(w.value);
    const int width = d / heads;
    Matrix out = Matrix::Zero(n, d);
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < n; ++i) {
            std::vector<double> score(n);
            double top = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int c = h * width; c < (h + 1) * width; ++c) s += q(i, c) * k(j, c);
                score[j] = s * inv_scale;
                top = std::max(top, score[j]);
            }
            double z = 0.0;
            for (double& s : score) z += (s = std::exp(s - top));
            for (int j = 0; j < n; ++j)
                for (int c = h * width; c < (h + 1) * width; ++c)
                    out(i, c) += score[j] / z * v(j, c);
        }
    }
    return out;
}

std::vector<GradientCheck> finite_difference_check(const FeatureTensor& features,
                                                   const PolicyParams& params,
                                                   const std::vector<std::vector<int>>& seqs,
                                                   const std::vector<double>& weights, double eps,
                                                   double floor) {
    PolicyParams grad = PolicyParams::zeros(params.hyper);
    log_prob_objective(features, params, seqs, weights, &grad);

    std::vector<const Matrix*> analytic;
    grad.visit([&](const std::string&, const Matrix& m) { analytic.push_back(&m); });

    PolicyParams probe = params;
    std::vector<GradientCheck> out;
    std::size_t index = 0;
    probe.visit([&](const std::string& name, Matrix& m) {
        const Matrix& a = *analytic[index++];
        GradientCheck row{name, 0.0, 0.0, a.cwiseAbs().maxCoeff(), static_cast<std::size_t>(m.size())};
        double max_numeric = 0.0;
        double max_diff = 0.0;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double keep = m.data()[i];
            m.data()[i] = keep + eps;
            const double up = log_prob_objective(features, probe, seqs, weights, nullptr);
            m.data()[i] = keep - eps;
            const double down = log_prob_objective(features, probe, seqs, weights, nullptr);
            m.data()[i] = keep;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic_i = a.data()[i];
            const double denom = std::max({std::abs(numeric), std::abs(analytic_i), floor});
            row.max_entry_error = std::max(row.max_entry_error, std::abs(numeric - analytic_i) / denom);
            max_numeric = std::max(max_numeric, std::abs(numeric));
            max_diff = std::max(max_diff, std::abs(numeric - analytic_i));
        }
        row.max_rel_error = max_diff / std::max({max_numeric, row.max_abs_analytic, floor});
        out.push_back(row);
    });
    return out;
}

}  // namespace attenmfg::checks
