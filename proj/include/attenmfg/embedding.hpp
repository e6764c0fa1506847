#pragma once

#include "attenmfg/core_model.hpp"

#include <string>
#include <vector>

namespace attenmfg {

// Production available per (scenario, machine, maintenance period t,
// production period l) when the machine is maintained in period t.
class ThroughputCube {
public:
    ThroughputCube(int scenarios, int machines, int horizon)
        : s_(scenarios), m_(machines), t_(horizon),
          data_(static_cast<std::size_t>(scenarios) * machines * horizon * horizon, 0.0) {}

    double& operator()(int s, int m, int t, int l) { return data_[index(s, m, t, l)]; }
    double operator()(int s, int m, int t, int l) const { return data_[index(s, m, t, l)]; }

    int scenarios() const { return s_; }
    int machines() const { return m_; }
    int horizon() const { return t_; }

private:
    std::size_t index(int s, int m, int t, int l) const {
        return ((static_cast<std::size_t>(s) * m_ + m) * t_ + t) * t_ + l;
    }
    int s_, m_, t_;
    std::vector<double> data_;
};

// Canonical per-slot cost tensors. Rows are the M real machines followed by a
// single reusable idle token (row M, site 0). Columns are decoding slots
// c = t*J + j for period t in [0, T) and duplicate j in [0, J).
struct FeatureTensor {
    Matrix chi;             // (M+1) x (T*J), maintenance cost
    Matrix y;               // (M+1) x (T*J), unmet-demand penalty
    std::vector<int> site;  // per row, 0 for the idle token
    int n_real = 0;
    int n_idle = 1;
    int horizon = 0;
    int dup = 1;

    int rows() const { return n_real + n_idle; }
    int cols() const { return horizon * dup; }
    int idle_row() const { return n_real; }
    int period_of(int col) const { return col / dup; }
    double time_channel(int col) const { return static_cast<double>(col / dup) / horizon; }
    double dup_channel(int col) const { return static_cast<double>(col % dup) / dup; }

    // chi + y
    Matrix slot_cost() const { return chi + y; }
};

// Periods are 1-based in the formulas; matrices are 0-based.
Matrix build_maintenance_cost(const Instance& instance);
ThroughputCube build_throughput_cube(const Instance& instance);
Matrix build_demand_penalty(const Instance& instance, const ThroughputCube& cube);
FeatureTensor assemble_features(const Instance& instance);

// Debug dump {x: M x T, y: M x T, lambda: [{s, m, by_t: T x T (rows t, cols l)}]}.
std::string dump_features_json(const Instance& instance);

}  // namespace attenmfg
