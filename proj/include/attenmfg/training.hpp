#pragma once

#include "attenmfg/checkpoint.hpp"
#include "attenmfg/core_model.hpp"
#include "attenmfg/embedding.hpp"
#include "attenmfg/policy.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace attenmfg {

enum class BaselineKind { rollout_mean, greedy };

struct TrainConfig {
    int epochs = 100;
    int instances_per_epoch = 12800;
    int batch = 16;
    double lr = 1e-4;
    int baseline_rollouts = 8;  // K
    std::uint64_t seed = 0;
    double grad_clip = 1.0;
    BaselineKind baseline = BaselineKind::rollout_mean;
    int holdout = 32;
    int threads = 1;
    PolicyHyper hyper;

    void validate() const;
    // FNV-1a over every field except `threads`, together with the generator.
    std::uint64_t hash(const GeneratorConfig& generator) const;
};

struct TrainingSample {
    FeatureTensor features;
    EconomicParams economics;
};

TrainingSample make_sample(const Instance& instance);

struct GradientResult {
    double mean_cost = 0.0;  // over all sampled rollouts
    double loss = 0.0;       // mean of (L - b) * log p, the surrogate being differentiated
};

// REINFORCE estimate: per instance K sampled rollouts with baseline b; the
// gradient is the mean over batch and rollouts of (L - b) * grad log p.
// `grad` is overwritten. One stream seed is drawn from `rng` per instance
// before any work starts, so the result does not depend on `threads`.
// `cost_scale` multiplies every cost (1 in training).
GradientResult reinforce_grad(std::span<const TrainingSample> batch, const PolicyParams& params,
                              int rollouts, Rng& rng, PolicyParams& grad,
                              BaselineKind baseline = BaselineKind::rollout_mean, int threads = 1,
                              double cost_scale = 1.0);

// Throws Error naming the first tensor with a non-finite entry.
void check_finite(const PolicyParams& grad);

AdamState make_adam_state(const PolicyHyper& hyper);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// Clips `grad` in place to `clip` global norm (clip <= 0 disables), then
// applies one Adam step. Returns the norm before clipping.
double adam_step(PolicyParams& params, PolicyParams& grad, AdamState& state, double lr,
                 double clip);

struct EpochMetrics {
    int epoch = 0;
    double train_mean_cost = 0.0;
    double holdout_greedy_cost = 0.0;
    double grad_norm = 0.0;  // mean pre-clip norm over the epoch's steps
    double seconds = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "epoch,train_mean_cost,holdout_greedy_cost,grad_norm,seconds";
std::string metrics_row(const EpochMetrics& m);

// Mean greedy canonical cost over a sample set.
double greedy_mean_cost(std::span<const TrainingSample> samples, const PolicyParams& params,
                        int threads = 1);

class Trainer {
public:
    Trainer(TrainConfig config, GeneratorConfig generator);
    // Continues from a checkpoint. Throws ValidationError when the checkpoint
    // was produced under a different configuration.
    Trainer(TrainConfig config, GeneratorConfig generator, const Checkpoint& resume);

    // One optimizer step on the next batch of the instance stream.
    // Returns the pre-clip gradient norm.
    double step();
    EpochMetrics run_epoch();

    int epoch() const { return epoch_; }
    std::int64_t global_step() const { return global_step_; }
    int steps_per_epoch() const;
    const PolicyParams& params() const { return params_; }
    const std::vector<TrainingSample>& holdout() const { return holdout_; }
    double holdout_greedy_cost() const;

    Checkpoint checkpoint() const;

private:
    std::vector<TrainingSample> next_batch();

    TrainConfig config_;
    GeneratorConfig generator_;
    PolicyParams params_;
    AdamState adam_;
    std::vector<TrainingSample> holdout_;
    int epoch_ = 0;
    std::int64_t global_step_ = 0;
    double last_mean_cost_ = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochMetrics> metrics;
};

// Runs config.epochs epochs. `on_epoch` sees each epoch's metrics as they are
// produced.
TrainResult train(const TrainConfig& config, const GeneratorConfig& generator,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace attenmfg
