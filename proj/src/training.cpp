#include "attenmfg/training.hpp"

#include "attenmfg/oracle.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace attenmfg {

namespace {

// Stream tags for mix_seed(seed, tag).
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kHoldoutStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kRolloutStream = 3;

class Fnv1a {
public:
    void add(std::string_view s) {
        for (unsigned char ch : s) {
            h_ ^= ch;
            h_ *= 0x100000001b3ULL;
        }
        h_ ^= 0xff;
        h_ *= 0x100000001b3ULL;
    }
    void add(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        add(std::string_view(buf));
    }
    void add(std::int64_t v) { add(std::string_view(std::to_string(v))); }
    void add(std::uint64_t v) { add(std::string_view(std::to_string(v))); }
    void add(int v) { add(static_cast<std::int64_t>(v)); }
    void add(Range r) {
        add(r.lo);
        add(r.hi);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

Instance generate_with_seed(const GeneratorConfig& generator, std::uint64_t seed) {
    GeneratorConfig cfg = generator;
    cfg.seed = seed;
    return generate_instance(cfg);
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidParameters("epochs must be positive");
    if (instances_per_epoch < 1) throw InvalidParameters("instances_per_epoch must be positive");
    if (batch < 1) throw InvalidParameters("batch must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameters("lr must be finite and >= 0");
    if (baseline_rollouts < 2) throw InvalidParameters("baseline_rollouts must be at least 2");
    if (!(grad_clip > 0.0)) throw InvalidParameters("grad_clip must be positive");
    if (holdout < 1) throw InvalidParameters("holdout must be positive");
    if (threads < 1) throw InvalidParameters("threads must be positive");
    hyper.validate();
}

std::uint64_t TrainConfig::hash(const GeneratorConfig& g) const {
    Fnv1a h;
    h.add(instances_per_epoch);
    h.add(batch);
    h.add(lr);
    h.add(baseline_rollouts);
    h.add(seed);
    h.add(grad_clip);
    h.add(static_cast<int>(baseline));
    h.add(holdout);
    h.add(hyper.hidden);
    h.add(hyper.heads);
    h.add(hyper.layers);
    h.add(hyper.site_vocab);
    h.add(hyper.logit_clip);
    h.add(static_cast<int>(g.family));
    h.add(g.n_sites);
    h.add(g.max_random_sites);
    h.add(g.n_machines);
    h.add(g.horizon);
    h.add(g.max_maint_per_period);
    h.add(g.n_scenarios);
    h.add(g.preventive_cost);
    h.add(g.corrective_ratio);
    h.add(g.weibull_shape);
    h.add(g.weibull_scale);
    h.add(g.observe_time);
    h.add(g.nominal_rate);
    h.add(g.demand_sigma);
    h.add(g.idle_penalty);
    h.add(g.demand_penalty);
    h.add(g.travel_cost);
    return h.value();
}

TrainingSample make_sample(const Instance& instance) {
    return {assemble_features(instance), instance.economics};
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    int first_index = n;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < first_index) {
                    first_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(threads, n);
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void check_finite(const PolicyParams& grad) {
    grad.visit([](const std::string& name, const Matrix& m) {
        if (!m.allFinite()) throw Error("non-finite gradient in parameter '" + name + "'");
    });
}

GradientResult reinforce_grad(std::span<const TrainingSample> batch, const PolicyParams& params,
                              int rollouts, Rng& rng, PolicyParams& grad, BaselineKind baseline,
                              int threads, double cost_scale) {
    if (rollouts < 2) throw InvalidParameters("reinforce_grad needs at least 2 rollouts");
    if (batch.empty()) throw InvalidParameters("reinforce_grad needs a non-empty batch");
    const int n = static_cast<int>(batch.size());
    std::vector<std::uint64_t> seeds(batch.size());
    for (auto& s : seeds) s = rng();

    const double norm = 1.0 / (static_cast<double>(n) * rollouts);
    std::vector<PolicyParams> grads(threads > 1 ? batch.size() : 1);
    std::vector<double> cost_sums(batch.size(), 0.0);
    std::vector<double> losses(batch.size(), 0.0);
    grad = PolicyParams::zeros(params.hyper);

    auto work = [&](int i, PolicyParams& g) {
        const TrainingSample& sample = batch[i];
        EncoderTape tape;
        const EncoderState enc = encode(sample.features, params, &tape);
        const DecoderContext ctx = prepare_decoder(enc, sample.features, params);
        Rng local(seeds[i]);
        std::vector<Rollout> rs;
        rs.reserve(rollouts);
        std::vector<double> cost(rollouts);
        for (int k = 0; k < rollouts; ++k) {
            rs.push_back(decode(ctx, params, DecodeMode::sample, &local, true));
            cost[k] = cost_scale * canonical_cost(rs.back().seq, sample.features, sample.economics);
            rs.back().cost = cost[k];
        }
        double b = 0.0;
        if (baseline == BaselineKind::greedy) {
            const Rollout g0 = decode(ctx, params, DecodeMode::greedy, nullptr, false);
            b = cost_scale * canonical_cost(g0.seq, sample.features, sample.economics);
        } else {
            for (double c : cost) b += c;
            b /= rollouts;
        }
        std::vector<WeightedRollout> weighted;
        weighted.reserve(rollouts);
        double loss = 0.0;
        for (int k = 0; k < rollouts; ++k) {
            const double w = (cost[k] - b) * norm;
            weighted.push_back({&rs[k], w});
            loss += w * rs[k].log_prob;
            cost_sums[i] += cost[k];
        }
        losses[i] = loss;
        g = PolicyParams::zeros(params.hyper);
        accumulate_log_prob_gradient(sample.features, params, tape, ctx, weighted, g);
    };

    if (threads > 1) {
        parallel_for(n, threads, [&](int i) { work(i, grads[i]); });
        for (int i = 0; i < n; ++i) axpy(1.0, grads[i], grad);
    } else {
        for (int i = 0; i < n; ++i) {
            work(i, grads[0]);
            axpy(1.0, grads[0], grad);
        }
    }
    check_finite(grad);

    GradientResult out;
    for (int i = 0; i < n; ++i) {
        out.mean_cost += cost_sums[i];
        out.loss += losses[i];
    }
    out.mean_cost *= norm;
    return out;
}

AdamState make_adam_state(const PolicyHyper& hyper) {
    return {PolicyParams::zeros(hyper), PolicyParams::zeros(hyper), 0};
}

double adam_step(PolicyParams& params, PolicyParams& grad, AdamState& state, double lr,
                 double clip) {
    const double norm = std::sqrt(squared_norm(grad));
    if (clip > 0.0 && norm > clip) scale(grad, clip / norm);
    state.steps += 1;
    const double t = static_cast<double>(state.steps);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);

    std::vector<Matrix*> p, g, m, v;
    params.visit([&](const std::string&, Matrix& x) { p.push_back(&x); });
    grad.visit([&](const std::string&, Matrix& x) { g.push_back(&x); });
    state.first.visit([&](const std::string&, Matrix& x) { m.push_back(&x); });
    state.second.visit([&](const std::string&, Matrix& x) { v.push_back(&x); });
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto gi = g[i]->array();
        m[i]->array() = kAdamBeta1 * m[i]->array() + (1.0 - kAdamBeta1) * gi;
        v[i]->array() = kAdamBeta2 * v[i]->array() + (1.0 - kAdamBeta2) * gi.square();
        p[i]->array() -=
            lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + kAdamEpsilon);
    }
    return norm;
}

std::string metrics_row(const EpochMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.3f", m.epoch, m.train_mean_cost,
                  m.holdout_greedy_cost, m.grad_norm, m.seconds);
    return buf;
}

double greedy_mean_cost(std::span<const TrainingSample> samples, const PolicyParams& params,
                        int threads) {
    std::vector<double> cost(samples.size());
    parallel_for(static_cast<int>(samples.size()), threads, [&](int i) {
        const auto& s = samples[i];
        const EncoderState enc = encode(s.features, params);
        const DecoderContext ctx = prepare_decoder(enc, s.features, params);
        const Rollout r = decode(ctx, params, DecodeMode::greedy, nullptr);
        cost[i] = canonical_cost(r.seq, s.features, s.economics);
    });
    double total = 0.0;
    for (double c : cost) total += c;
    return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

Trainer::Trainer(TrainConfig config, GeneratorConfig generator)
    : config_(std::move(config)), generator_(std::move(generator)) {
    config_.validate();
    generator_.validate();
    params_ = PolicyParams::initialize(config_.hyper, mix_seed(config_.seed, kInitStream));
    adam_ = make_adam_state(config_.hyper);
    const std::uint64_t base = mix_seed(config_.seed, kHoldoutStream);
    for (int i = 0; i < config_.holdout; ++i)
        holdout_.push_back(make_sample(generate_with_seed(generator_, mix_seed(base, i))));
}

Trainer::Trainer(TrainConfig config, GeneratorConfig generator, const Checkpoint& resume)
    : Trainer(std::move(config), std::move(generator)) {
    if (resume.config_hash != config_.hash(generator_))
        throw ValidationError("checkpoint was trained under a different configuration");
    if (!(resume.params.hyper == config_.hyper))
        throw ValidationError("checkpoint hyperparameters differ from the configuration");
    params_ = resume.params;
    adam_ = resume.optimizer ? *resume.optimizer : make_adam_state(config_.hyper);
    epoch_ = resume.epoch;
    global_step_ = resume.global_step;
}

int Trainer::steps_per_epoch() const {
    return (config_.instances_per_epoch + config_.batch - 1) / config_.batch;
}

std::vector<TrainingSample> Trainer::next_batch() {
    const std::int64_t spe = steps_per_epoch();
    const std::int64_t epoch = global_step_ / spe;
    const std::int64_t within = global_step_ % spe;
    const std::int64_t first = within * config_.batch;
    const std::int64_t last =
        std::min<std::int64_t>(first + config_.batch, config_.instances_per_epoch);
    const std::uint64_t base = mix_seed(config_.seed, kTrainStream);
    std::vector<TrainingSample> batch(static_cast<std::size_t>(last - first));
    parallel_for(static_cast<int>(batch.size()), config_.threads, [&](int i) {
        const auto index = static_cast<std::uint64_t>(epoch * config_.instances_per_epoch + first + i);
        batch[i] = make_sample(generate_with_seed(generator_, mix_seed(base, index)));
    });
    return batch;
}

double Trainer::step() {
    const auto batch = next_batch();
    Rng rng(mix_seed(mix_seed(config_.seed, kRolloutStream), static_cast<std::uint64_t>(global_step_)));
    PolicyParams grad;
    const GradientResult res = reinforce_grad(batch, params_, config_.baseline_rollouts, rng, grad,
                                              config_.baseline, config_.threads);
    last_mean_cost_ = res.mean_cost;
    const double norm = adam_step(params_, grad, adam_, config_.lr, config_.grad_clip);
    ++global_step_;
    return norm;
}

EpochMetrics Trainer::run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t spe = steps_per_epoch();
    const std::int64_t end = (static_cast<std::int64_t>(epoch_) + 1) * spe;
    double cost_sum = 0.0;
    double norm_sum = 0.0;
    double weight_sum = 0.0;
    int steps = 0;
    while (global_step_ < end) {
        const std::int64_t within = global_step_ % spe;
        const double size = static_cast<double>(
            std::min<std::int64_t>(config_.batch, config_.instances_per_epoch - within * config_.batch));
        norm_sum += step();
        cost_sum += last_mean_cost_ * size;
        weight_sum += size;
        ++steps;
    }
    ++epoch_;
    EpochMetrics m;
    m.epoch = epoch_;
    m.train_mean_cost = weight_sum > 0.0 ? cost_sum / weight_sum : 0.0;
    m.grad_norm = steps > 0 ? norm_sum / steps : 0.0;
    m.holdout_greedy_cost = holdout_greedy_cost();
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

double Trainer::holdout_greedy_cost() const {
    return greedy_mean_cost(holdout_, params_, config_.threads);
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ck;
    ck.params = params_;
    ck.optimizer = adam_;
    ck.epoch = epoch_;
    ck.global_step = global_step_;
    ck.seed = config_.seed;
    ck.config_hash = config_.hash(generator_);
    ck.train_config = generator_.name;
    return ck;
}

TrainResult train(const TrainConfig& config, const GeneratorConfig& generator,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
    Trainer trainer(config, generator);
    TrainResult out;
    while (trainer.epoch() < config.epochs) {
        out.metrics.push_back(trainer.run_epoch());
        if (on_epoch) on_epoch(out.metrics.back());
    }
    out.checkpoint = trainer.checkpoint();
    return out;
}

}  // namespace attenmfg
