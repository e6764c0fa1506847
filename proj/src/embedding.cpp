#include "attenmfg/embedding.hpp"

#include <cstdio>
#include <string>

namespace attenmfg {

Matrix build_maintenance_cost(const Instance& inst) {
    const int m_count = inst.n_machines();
    const int horizon = inst.horizon;
    const int s_count = inst.scenarios.size();
    const double idle = inst.economics.idle_penalty;
    Matrix x = Matrix::Zero(m_count, horizon);
    for (int m = 0; m < m_count; ++m) {
        const double corrective = inst.machines[m].corrective_cost;
        for (int t = 1; t <= horizon; ++t) {
            double acc = 0.0;
            for (int s = 0; s < s_count; ++s) {
                const int fail = inst.scenarios.failure(s, m);
                if (t < fail)
                    acc += inst.dmc(m, t - 1) + idle;
                else
                    acc += corrective + (t - fail + 1) * idle;
            }
            x(m, t - 1) = acc / s_count;
        }
    }
    return x;
}

ThroughputCube build_throughput_cube(const Instance& inst) {
    const int m_count = inst.n_machines();
    const int horizon = inst.horizon;
    ThroughputCube cube(inst.scenarios.size(), m_count, horizon);
    for (int s = 0; s < cube.scenarios(); ++s) {
        const Matrix& limit = inst.scenarios.limit[s];
        for (int m = 0; m < m_count; ++m) {
            const int fail = inst.scenarios.failure(s, m);
            for (int t = 1; t <= horizon; ++t) {
                for (int l = 1; l <= horizon; ++l) {
                    double lam;
                    if (t <= fail - 1)
                        lam = l == t ? 0.0 : limit(m, l - 1);
                    else  // maintained at or after the failure
                        lam = (l >= fail && l <= t) ? 0.0 : limit(m, l - 1);
                    cube(s, m, t - 1, l - 1) = lam;
                }
            }
        }
    }
    return cube;
}

Matrix build_demand_penalty(const Instance& inst, const ThroughputCube& cube) {
    const int m_count = inst.n_machines();
    const int horizon = inst.horizon;
    const int s_count = cube.scenarios();
    Matrix y = Matrix::Zero(m_count, horizon);
    for (int m = 0; m < m_count; ++m) {
        for (int t = 0; t < horizon; ++t) {
            double unmet = 0.0;
            for (int s = 0; s < s_count; ++s)
                for (int l = 0; l < horizon; ++l)
                    unmet += std::max(inst.demand(m, l) - cube(s, m, t, l), 0.0);
            y(m, t) = inst.economics.demand_penalty * unmet / s_count;
        }
    }
    return y;
}

FeatureTensor assemble_features(const Instance& inst) {
    const Matrix x = build_maintenance_cost(inst);
    const Matrix y = build_demand_penalty(inst, build_throughput_cube(inst));
    FeatureTensor f;
    f.n_real = inst.n_machines();
    f.n_idle = 1;
    f.horizon = inst.horizon;
    f.dup = inst.economics.max_maint_per_period;
    f.chi = Matrix::Zero(f.rows(), f.cols());
    f.y = Matrix::Zero(f.rows(), f.cols());
    for (int c = 0; c < f.cols(); ++c) {
        const int t = f.period_of(c);
        f.chi.col(c).head(f.n_real) = x.col(t);
        f.y.col(c).head(f.n_real) = y.col(t);
    }
    f.site.resize(f.rows(), 0);
    for (int m = 0; m < f.n_real; ++m) f.site[m] = inst.machines[m].site;
    return f;
}

namespace {

void put(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void put_matrix(std::string& out, const Matrix& m, const char* indent) {
    out += "[";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out += r ? ",\n" : "\n";
        out += indent;
        out += "[";
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out += ", ";
            put(out, m(r, c));
        }
        out += "]";
    }
    out += "]";
}

}  // namespace

std::string dump_features_json(const Instance& inst) {
    const ThroughputCube cube = build_throughput_cube(inst);
    std::string out = "{\n  \"x\": ";
    put_matrix(out, build_maintenance_cost(inst), "    ");
    out += ",\n  \"y\": ";
    put_matrix(out, build_demand_penalty(inst, cube), "    ");
    out += ",\n  \"lambda\": [";
    const int T = inst.horizon;
    for (int s = 0; s < cube.scenarios(); ++s)
        for (int m = 0; m < cube.machines(); ++m) {
            Matrix block(T, T);
            for (int t = 0; t < T; ++t)
                for (int l = 0; l < T; ++l) block(t, l) = cube(s, m, t, l);
            out += s || m ? ",\n    " : "\n    ";
            out += "{\"s\": " + std::to_string(s) + ", \"m\": " + std::to_string(m) + ", \"by_t\": ";
            put_matrix(out, block, "      ");
            out += "}";
        }
    out += "]\n}\n";
    return out;
}

}  // namespace attenmfg
