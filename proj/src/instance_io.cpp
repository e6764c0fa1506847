#include "attenmfg/core_model.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace attenmfg {

namespace {

using json = nlohmann::json;

constexpr std::string_view kSchema = "attenmfg-instance/1";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename Derived>
void write_row(std::string& out, const Eigen::MatrixBase<Derived>& row) {
    out += '[';
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_integral_v<typename Derived::Scalar>)
            out += std::to_string(row(i));
        else
            out += num(row(i));
    }
    out += ']';
}

template <typename Derived>
void write_matrix(std::string& out, const Eigen::MatrixBase<Derived>& m, std::string_view indent) {
    out += '[';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out += r ? ",\n" : "\n";
        out += indent;
        out += "  ";
        write_row(out, m.row(r));
    }
    if (m.rows()) {
        out += '\n';
        out += indent;
    }
    out += ']';
}

const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path.empty() ? key : path + "." + key, "missing field");
    return *it;
}

double number(const json& obj, const char* key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number()) throw ParseError(path.empty() ? key : path + "." + key, "expected a number");
    return v.get<double>();
}

long integer(const json& obj, const char* key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number_integer())
        throw ParseError(path.empty() ? key : path + "." + key, "expected an integer");
    return v.get<long>();
}

Matrix matrix(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows)
        throw ParseError(path, "expected " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = v[r];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ParseError(path + "[" + std::to_string(r) + "]",
                             "expected " + std::to_string(cols) + " columns");
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!row[c].is_number())
                throw ParseError(path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]",
                                 "expected a number");
            m(r, c) = row[c].get<double>();
        }
    }
    return m;
}

}  // namespace

std::string save_instance(const Instance& inst) {
    std::string out;
    out.reserve(4096);
    const auto& e = inst.economics;
    out += "{\n";
    out += "  \"schema\": \"" + std::string(kSchema) + "\",\n";
    out += "  \"n_sites\": " + std::to_string(inst.n_sites) + ",\n";
    out += "  \"horizon\": " + std::to_string(inst.horizon) + ",\n";
    out += "  \"J\": " + std::to_string(e.max_maint_per_period) + ",\n";
    out += "  \"seed\": " + std::to_string(inst.seed) + ",\n";
    out += "  \"economics\": {\"idle_penalty\": " + num(e.idle_penalty) +
           ", \"demand_penalty\": " + num(e.demand_penalty) +
           ", \"travel_cost\": " + num(e.travel_cost) + "},\n";
    out += "  \"machines\": [";
    for (int m = 0; m < inst.n_machines(); ++m) {
        const auto& s = inst.machines[m];
        out += m ? ",\n    " : "\n    ";
        out += "{\"id\": " + std::to_string(s.id) + ", \"site\": " + std::to_string(s.site) +
               ", \"cp\": " + num(s.preventive_cost) + ", \"cf\": " + num(s.corrective_cost) +
               ", \"weibull\": {\"k\": " + num(s.survival.shape) +
               ", \"lambda\": " + num(s.survival.scale) +
               ", \"t_obs\": " + num(s.survival.observe_time);
        if (s.survival.family == LifetimeFamily::deterministic) out += ", \"family\": \"deterministic\"";
        out += "}, \"rate\": " + num(s.nominal_rate) + "}";
    }
    out += inst.n_machines() ? "\n  ],\n" : "],\n";
    out += "  \"scenarios\": {\n    \"failure\": ";
    write_matrix(out, inst.scenarios.failure, "    ");
    out += ",\n    \"limit\": [";
    for (std::size_t s = 0; s < inst.scenarios.limit.size(); ++s) {
        out += s ? ",\n      " : "\n      ";
        write_matrix(out, inst.scenarios.limit[s], "      ");
    }
    out += inst.scenarios.limit.empty() ? "]\n  },\n" : "\n    ]\n  },\n";
    out += "  \"demand\": ";
    write_matrix(out, inst.demand, "  ");
    out += ",\n  \"dmc\": ";
    write_matrix(out, inst.dmc, "  ");
    out += "\n}\n";
    return out;
}

Instance load_instance(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ParseError("<document>", err.what());
    }
    const auto& schema = field(doc, "schema", "");
    if (!schema.is_string() || schema.get<std::string>() != kSchema)
        throw ParseError("schema", "expected \"" + std::string(kSchema) + "\"");

    Instance inst;
    inst.n_sites = static_cast<int>(integer(doc, "n_sites", ""));
    inst.horizon = static_cast<int>(integer(doc, "horizon", ""));
    inst.economics.max_maint_per_period = static_cast<int>(integer(doc, "J", ""));
    {
        const auto& s = field(doc, "seed", "");
        if (!s.is_number_unsigned() && !s.is_number_integer())
            throw ParseError("seed", "expected an unsigned integer");
        inst.seed = s.get<std::uint64_t>();
    }
    const auto& econ = field(doc, "economics", "");
    inst.economics.idle_penalty = number(econ, "idle_penalty", "economics");
    inst.economics.demand_penalty = number(econ, "demand_penalty", "economics");
    inst.economics.travel_cost = number(econ, "travel_cost", "economics");
    if (inst.horizon < 1) throw ValidationError("horizon must be >= 1");

    const auto& machines = field(doc, "machines", "");
    if (!machines.is_array()) throw ParseError("machines", "expected an array");
    for (std::size_t m = 0; m < machines.size(); ++m) {
        const std::string path = "machines[" + std::to_string(m) + "]";
        const auto& j = machines[m];
        MachineSpec spec;
        spec.id = static_cast<int>(integer(j, "id", path));
        spec.site = static_cast<int>(integer(j, "site", path));
        spec.preventive_cost = number(j, "cp", path);
        spec.corrective_cost = number(j, "cf", path);
        spec.nominal_rate = number(j, "rate", path);
        const auto& w = field(j, "weibull", path);
        spec.survival.shape = number(w, "k", path + ".weibull");
        spec.survival.scale = number(w, "lambda", path + ".weibull");
        spec.survival.observe_time = number(w, "t_obs", path + ".weibull");
        if (auto it = w.find("family"); it != w.end()) {
            if (*it == "deterministic")
                spec.survival.family = LifetimeFamily::deterministic;
            else if (*it != "weibull")
                throw ParseError(path + ".weibull.family", "expected weibull or deterministic");
        }
        inst.machines.push_back(spec);
    }
    const auto m_count = static_cast<Eigen::Index>(inst.machines.size());
    const Eigen::Index horizon = inst.horizon;

    const auto& scen = field(doc, "scenarios", "");
    const auto& failure = field(scen, "failure", "scenarios");
    if (!failure.is_array() || failure.empty())
        throw ParseError("scenarios.failure", "expected a non-empty array");
    const auto s_count = static_cast<Eigen::Index>(failure.size());
    const Matrix fail = matrix(failure, s_count, m_count, "scenarios.failure");
    inst.scenarios.failure = fail.cast<int>();
    if (fail != inst.scenarios.failure.cast<double>())
        throw ParseError("scenarios.failure", "failure periods must be integers");
    const auto& limit = field(scen, "limit", "scenarios");
    if (!limit.is_array() || static_cast<Eigen::Index>(limit.size()) != s_count)
        throw ParseError("scenarios.limit", "expected one matrix per scenario");
    for (Eigen::Index s = 0; s < s_count; ++s)
        inst.scenarios.limit.push_back(
            matrix(limit[s], m_count, horizon, "scenarios.limit[" + std::to_string(s) + "]"));

    inst.demand = matrix(field(doc, "demand", ""), m_count, horizon, "demand");
    inst.dmc = matrix(field(doc, "dmc", ""), m_count, horizon, "dmc");
    inst.validate();
    return inst;
}

}  // namespace attenmfg
