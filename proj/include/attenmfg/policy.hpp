#pragma once

#include "attenmfg/core_model.hpp"
#include "attenmfg/embedding.hpp"
#include "attenmfg/evaluator.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace attenmfg {

struct PolicyHyper {
    static constexpr int kChannels = 4;  // chi, y, t/T, j/J

    int hidden = 128;
    int heads = 8;
    int layers = 3;
    int site_vocab = 11;  // depot + up to 10 sites
    double logit_clip = 10.0;

    void validate() const;
    bool operator==(const PolicyHyper&) const = default;
};

struct AttentionWeights {
    Matrix query, key, value;  // D x D, row-vector convention: x * W
};

struct EncoderLayerParams {
    AttentionWeights spatial;
    AttentionWeights temporal;
    Matrix integrate;  // 2D x D
};

struct PolicyParams {
    PolicyHyper hyper;
    Matrix input_weight;  // channels x D
    Matrix input_bias;    // 1 x D
    Matrix site_embed;    // site_vocab x D
    std::vector<EncoderLayerParams> layers;
    Matrix context_query;  // 2D x D
    Matrix context_key;    // D x D
    Matrix context_value;  // D x D
    Matrix pointer;        // D x D

    static PolicyParams zeros(const PolicyHyper& hyper);
    // Uniform(-1/sqrt(D), 1/sqrt(D)) for every tensor.
    static PolicyParams initialize(const PolicyHyper& hyper, std::uint64_t seed);

    // Visits every tensor in checkpoint order as f(name, matrix).
    template <typename F>
    void visit(F&& f) {
        visit_impl(*this, f);
    }
    template <typename F>
    void visit(F&& f) const {
        visit_impl(*this, f);
    }

    std::size_t parameter_count() const;
    void validate() const;

private:
    template <typename Self, typename F>
    static void visit_impl(Self& p, F& f) {
        f(std::string("input_weight"), p.input_weight);
        f(std::string("input_bias"), p.input_bias);
        f(std::string("site_embed"), p.site_embed);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto& layer = p.layers[l];
            const std::string pre = "layer" + std::to_string(l) + ".";
            f(pre + "spatial.query", layer.spatial.query);
            f(pre + "spatial.key", layer.spatial.key);
            f(pre + "spatial.value", layer.spatial.value);
            f(pre + "temporal.query", layer.temporal.query);
            f(pre + "temporal.key", layer.temporal.key);
            f(pre + "temporal.value", layer.temporal.value);
            f(pre + "integrate", layer.integrate);
        }
        f(std::string("context_query"), p.context_query);
        f(std::string("context_key"), p.context_key);
        f(std::string("context_value"), p.context_value);
        f(std::string("pointer"), p.pointer);
    }
};

// Elementwise helpers over matching parameter sets.
void axpy(double alpha, const PolicyParams& x, PolicyParams& y);  // y += alpha * x
void scale(PolicyParams& p, double alpha);
double squared_norm(const PolicyParams& p);

// Per-cell input channels (rows*cols x 4), chi and y divided by
// max |chi + y| over the instance (1 when that is zero).
struct InputChannels {
    Matrix values;
    double scale = 1.0;
};
InputChannels input_channels(const FeatureTensor& features);

// Hidden states indexed by cell n = row * cols + col.
struct EncoderState {
    Matrix h;  // (rows*cols) x D
    int rows = 0;
    int cols = 0;

    auto column(int c) const { return h(Eigen::seqN(c, rows, cols), Eigen::all); }
    auto row(int r) const { return h.middleRows(static_cast<Eigen::Index>(r) * cols, cols); }
};

Matrix embed_inputs(const FeatureTensor& features, const PolicyParams& params);

Matrix spatial_attention(const Matrix& rows_at_column, const AttentionWeights& w, int heads,
                         double inv_scale);
Matrix temporal_attention(const Matrix& columns_of_row, const AttentionWeights& w, int heads,
                          double inv_scale);
Matrix integrate(const Matrix& spatial, const Matrix& temporal, const Matrix& weight);

// Forward activations kept for the reverse pass.
struct EncoderLayerTape {
    Matrix input;
    Matrix spatial_q, spatial_k, spatial_v;
    Matrix temporal_q, temporal_k, temporal_v;
    std::vector<std::vector<Matrix>> spatial_weights;   // per column, per head
    std::vector<std::vector<Matrix>> temporal_weights;  // per row, per head
    Matrix concat;  // [H_S  H_T]
    Matrix output;
};

struct EncoderTape {
    Matrix channels;
    std::vector<EncoderLayerTape> layers;
};

EncoderState encode(const FeatureTensor& features, const PolicyParams& params,
                    EncoderTape* tape = nullptr);

// Per-instance decoder inputs that do not depend on the decoding state.
struct DecoderContext {
    int rows = 0;
    int cols = 0;
    int n_real = 0;
    std::vector<int> site;
    std::vector<Matrix> hidden;     // per column, rows x D (the temporal pointer slice)
    std::vector<Matrix> keys;       // hidden * context_key
    std::vector<Matrix> values;     // hidden * context_value
    std::vector<Matrix> pointers;   // hidden * pointer
    std::vector<RowVector> pooled;  // per column, sum of hidden over rows
};

DecoderContext prepare_decoder(const EncoderState& enc, const FeatureTensor& features,
                               const PolicyParams& params);

struct DecoderState {
    int step = 0;
    int total_steps = 0;
    int n_real = 0;
    std::vector<char> selected;  // per real row
    int crew_site = 0;
    int last_selected = 0;  // starts at the idle row (crew at the depot)
    int remaining_real = 0;

    static DecoderState initial(const FeatureTensor& features);

    int idle_row() const { return n_real; }
    int remaining_steps() const { return total_steps - step; }
    bool allowed(int row) const {
        if (row == n_real) return remaining_real < remaining_steps();
        return !selected[row];
    }
    std::vector<char> mask() const;
    void advance(int row, int site);
};

struct StepTape {
    int column = 0;
    int last = 0;
    int choice = 0;
    std::vector<char> allowed;
    Vector logits;  // clipped, before masking
    Vector probs;
    RowVector context;  // [h_last, pooled]
    RowVector query;
    RowVector glimpse;
    std::vector<Matrix> head_weights;  // per head, 1 x rows
};

// Distribution over rows for the current step. Forbidden rows get exactly 0.
StepTape decode_step(const DecoderContext& ctx, const DecoderState& state,
                     const PolicyParams& params);

enum class DecodeMode { greedy, sample };

struct Rollout {
    std::vector<int> seq;
    double log_prob = 0.0;
    double cost = 0.0;
    std::vector<StepTape> steps;  // kept only when requested
};

Rollout decode(const DecoderContext& ctx, const PolicyParams& params, DecodeMode mode,
               Rng* rng, bool keep_tape = false);
// Teacher-forced pass over a fixed sequence.
Rollout replay(const DecoderContext& ctx, const PolicyParams& params, std::span<const int> seq,
               bool keep_tape = true);

// Encodes, decodes and prices a schedule on the unscaled canonical cost.
struct PolicyRollout {
    Schedule schedule;
    double log_prob = 0.0;
    double cost = 0.0;
};
PolicyRollout rollout(const FeatureTensor& features, const EconomicParams& economics,
                      const PolicyParams& params, DecodeMode mode, Rng* rng = nullptr);

// Gradient of sum_k weight_k * log p(seq_k) for the rollouts on one
// instance (each with tapes), accumulated into `grad`.
struct WeightedRollout {
    const Rollout* rollout;
    double weight;
};
void accumulate_log_prob_gradient(const FeatureTensor& features, const PolicyParams& params,
                                  const EncoderTape& tape, const DecoderContext& ctx,
                                  std::span<const WeightedRollout> rollouts, PolicyParams& grad);

// Convenience: encode + replay the fixed sequences + gradient. Returns the
// weighted log-probability sum.
double log_prob_objective(const FeatureTensor& features, const PolicyParams& params,
                          std::span<const std::vector<int>> seqs, std::span<const double> weights,
                          PolicyParams* grad);

}  // namespace attenmfg
