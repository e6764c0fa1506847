#include "attenmfg/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace attenmfg {

namespace {

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(std::string_view bytes, std::size_t& pos) {
    if (pos + 8 > bytes.size()) throw ParseError("weights", "checkpoint is truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

void put_tensors(std::string& out, const PolicyParams& p) {
    p.visit([&](const std::string&, const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    });
}

void get_tensors(std::string_view bytes, std::size_t& pos, PolicyParams& p) {
    p.visit([&](const std::string&, Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64(bytes, pos);
    });
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
T parse_number(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(key, "missing checkpoint key");
    T v{};
    const auto& s = it->second;
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw ParseError(key, "expected a number, got '" + s + "'");
        }
    } else {
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ParseError(key, "expected an integer, got '" + s + "'");
    }
    return v;
}

}  // namespace

std::string save_checkpoint(const Checkpoint& ck) {
    static_assert(sizeof(double) == 8);
    const auto& h = ck.params.hyper;
    std::size_t count = 0;
    ck.params.visit([&](const std::string&, const Matrix&) { ++count; });
    std::string out;
    out += kCheckpointMagic;
    out += '\n';
    out += "hidden=" + std::to_string(h.hidden) + "\n";
    out += "heads=" + std::to_string(h.heads) + "\n";
    out += "layers=" + std::to_string(h.layers) + "\n";
    out += "site_vocab=" + std::to_string(h.site_vocab) + "\n";
    out += "logit_clip=" + fmt17(h.logit_clip) + "\n";
    out += "channels=" + std::to_string(PolicyHyper::kChannels) + "\n";
    out += "tensors=" + std::to_string(count) + "\n";
    out += "parameters=" + std::to_string(ck.params.parameter_count()) + "\n";
    out += "optimizer=" + std::string(ck.optimizer ? "1" : "0") + "\n";
    out += "adam_steps=" + std::to_string(ck.optimizer ? ck.optimizer->steps : 0) + "\n";
    out += "epoch=" + std::to_string(ck.epoch) + "\n";
    out += "global_step=" + std::to_string(ck.global_step) + "\n";
    out += "seed=" + std::to_string(ck.seed) + "\n";
    out += "config_hash=" + std::to_string(ck.config_hash) + "\n";
    out += "train_config=" + ck.train_config + "\n";
    out += "end\n";
    put_tensors(out, ck.params);
    if (ck.optimizer) {
        put_tensors(out, ck.optimizer->first);
        put_tensors(out, ck.optimizer->second);
    }
    return out;
}

Checkpoint load_checkpoint(std::string_view bytes) {
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) throw ParseError("header", "unterminated header");
        std::string line(bytes.substr(pos, nl - pos));
        pos = nl + 1;
        return line;
    };
    if (next_line() != kCheckpointMagic)
        throw ParseError("magic", "expected '" + std::string(kCheckpointMagic) + "'");
    std::map<std::string, std::string> kv;
    for (std::string line = next_line(); line != "end"; line = next_line()) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("header", "malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (parse_number<int>(kv, "channels") != PolicyHyper::kChannels)
        throw ValidationError("checkpoint input channel count is unsupported");

    PolicyHyper h;
    h.hidden = parse_number<int>(kv, "hidden");
    h.heads = parse_number<int>(kv, "heads");
    h.layers = parse_number<int>(kv, "layers");
    h.site_vocab = parse_number<int>(kv, "site_vocab");
    h.logit_clip = parse_number<double>(kv, "logit_clip");

    Checkpoint ck;
    ck.params = PolicyParams::zeros(h);
    if (parse_number<std::size_t>(kv, "parameters") != ck.params.parameter_count())
        throw ValidationError("checkpoint parameter count does not match its hyperparameters");
    ck.epoch = parse_number<int>(kv, "epoch");
    ck.global_step = parse_number<std::int64_t>(kv, "global_step");
    ck.seed = parse_number<std::uint64_t>(kv, "seed");
    ck.config_hash = parse_number<std::uint64_t>(kv, "config_hash");
    if (auto it = kv.find("train_config"); it != kv.end()) ck.train_config = it->second;

    get_tensors(bytes, pos, ck.params);
    if (parse_number<int>(kv, "optimizer") == 1) {
        AdamState adam{PolicyParams::zeros(h), PolicyParams::zeros(h),
                       parse_number<std::int64_t>(kv, "adam_steps")};
        get_tensors(bytes, pos, adam.first);
        get_tensors(bytes, pos, adam.second);
        ck.optimizer = std::move(adam);
    }
    if (pos != bytes.size()) throw ParseError("weights", "trailing bytes after the last tensor");
    ck.params.validate();
    return ck;
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    const std::string bytes = save_checkpoint(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path + "'");
}

Checkpoint read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_checkpoint(ss.str());
}

}  // namespace attenmfg
