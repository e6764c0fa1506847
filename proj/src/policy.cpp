#include "attenmfg/policy.hpp"

#include "attenmfg/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace attenmfg {

namespace {

using Eigen::all;

double inv_scale(const PolicyHyper& h) { return 1.0 / std::sqrt(static_cast<double>(h.hidden)); }

auto column_cells(int c, int rows, int cols) { return Eigen::seqN(c, rows, cols); }

std::vector<Matrix*> tensors(PolicyParams& p) {
    std::vector<Matrix*> out;
    p.visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
    return out;
}

std::vector<const Matrix*> tensors(const PolicyParams& p) {
    std::vector<const Matrix*> out;
    p.visit([&](const std::string&, const Matrix& m) { out.push_back(&m); });
    return out;
}

}  // namespace

void PolicyHyper::validate() const {
    if (hidden < 1 || heads < 1 || hidden % heads != 0)
        throw InvalidParameters("policy: heads must divide the hidden dimension");
    if (layers < 0) throw InvalidParameters("policy: layer count must be >= 0");
    if (site_vocab < 1) throw InvalidParameters("policy: site vocabulary must be >= 1");
    if (!(logit_clip > 0.0)) throw InvalidParameters("policy: logit clip must be > 0");
}

PolicyParams PolicyParams::zeros(const PolicyHyper& hyper) {
    hyper.validate();
    const int d = hyper.hidden;
    PolicyParams p;
    p.hyper = hyper;
    p.input_weight = Matrix::Zero(PolicyHyper::kChannels, d);
    p.input_bias = Matrix::Zero(1, d);
    p.site_embed = Matrix::Zero(hyper.site_vocab, d);
    p.layers.resize(hyper.layers);
    for (auto& layer : p.layers) {
        for (AttentionWeights* w : {&layer.spatial, &layer.temporal}) {
            w->query = Matrix::Zero(d, d);
            w->key = Matrix::Zero(d, d);
            w->value = Matrix::Zero(d, d);
        }
        layer.integrate = Matrix::Zero(2 * d, d);
    }
    p.context_query = Matrix::Zero(2 * d, d);
    p.context_key = Matrix::Zero(d, d);
    p.context_value = Matrix::Zero(d, d);
    p.pointer = Matrix::Zero(d, d);
    return p;
}

PolicyParams PolicyParams::initialize(const PolicyHyper& hyper, std::uint64_t seed) {
    PolicyParams p = zeros(hyper);
    Rng rng(mix_seed(seed, 0x706f6c696379ULL));
    const double bound = 1.0 / std::sqrt(static_cast<double>(hyper.hidden));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    p.visit([&](const std::string&, Matrix& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng);
    });
    return p;
}

std::size_t PolicyParams::parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

void PolicyParams::validate() const {
    hyper.validate();
    const PolicyParams ref = zeros(hyper);
    if (layers.size() != ref.layers.size()) throw ValidationError("policy: layer count mismatch");
    auto mine = tensors(*this);
    auto want = tensors(ref);
    std::size_t i = 0;
    visit([&](const std::string& name, const Matrix& m) {
        if (m.rows() != want[i]->rows() || m.cols() != want[i]->cols())
            throw ValidationError("policy: tensor '" + name + "' has the wrong shape");
        if (!m.allFinite()) throw ValidationError("policy: tensor '" + name + "' is not finite");
        ++i;
    });
    (void)mine;
}

void axpy(double alpha, const PolicyParams& x, PolicyParams& y) {
    auto xs = tensors(x);
    auto ys = tensors(y);
    for (std::size_t i = 0; i < xs.size(); ++i) *ys[i] += alpha * *xs[i];
}

void scale(PolicyParams& p, double alpha) {
    p.visit([&](const std::string&, Matrix& m) { m *= alpha; });
}

double squared_norm(const PolicyParams& p) {
    double s = 0.0;
    p.visit([&](const std::string&, const Matrix& m) { s += m.squaredNorm(); });
    return s;
}

InputChannels input_channels(const FeatureTensor& f) {
    const int rows = f.rows();
    const int cols = f.cols();
    InputChannels in;
    const double top = rows > 0 && cols > 0 ? (f.chi + f.y).cwiseAbs().maxCoeff() : 0.0;
    in.scale = top > 0.0 ? top : 1.0;
    in.values.resize(static_cast<Eigen::Index>(rows) * cols, PolicyHyper::kChannels);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Eigen::Index n = static_cast<Eigen::Index>(r) * cols + c;
            in.values(n, 0) = f.chi(r, c) / in.scale;
            in.values(n, 1) = f.y(r, c) / in.scale;
            in.values(n, 2) = f.time_channel(c);
            in.values(n, 3) = f.dup_channel(c);
        }
    }
    return in;
}

namespace {

Matrix embed_channels(const Matrix& channels, const FeatureTensor& f, const PolicyParams& p) {
    const int cols = f.cols();
    Matrix h = channels * p.input_weight;
    h.rowwise() += p.input_bias.row(0);
    for (int r = 0; r < f.rows(); ++r) {
        const int site = f.site[r];
        if (site < 0 || site >= p.hyper.site_vocab)
            throw InvalidParameters("site " + std::to_string(site) +
                                    " is outside the policy's site vocabulary");
        h.middleRows(static_cast<Eigen::Index>(r) * cols, cols).rowwise() += p.site_embed.row(site);
    }
    return h;
}

}  // namespace

Matrix embed_inputs(const FeatureTensor& f, const PolicyParams& p) {
    return embed_channels(input_channels(f).values, f, p);
}

Matrix spatial_attention(const Matrix& x, const AttentionWeights& w, int heads, double inv) {
    return nn::self_attention(x, w.query, w.key, w.value, heads, inv);
}

Matrix temporal_attention(const Matrix& x, const AttentionWeights& w, int heads, double inv) {
    return nn::self_attention(x, w.query, w.key, w.value, heads, inv);
}

Matrix integrate(const Matrix& spatial, const Matrix& temporal, const Matrix& weight) {
    Matrix cat(spatial.rows(), spatial.cols() + temporal.cols());
    cat << spatial, temporal;
    return nn::sigmoid(cat * weight);
}

EncoderState encode(const FeatureTensor& f, const PolicyParams& p, EncoderTape* tape) {
    const int rows = f.rows();
    const int cols = f.cols();
    const int d = p.hyper.hidden;
    const int heads = p.hyper.heads;
    const double inv = inv_scale(p.hyper);
    const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;

    Matrix channels = input_channels(f).values;
    Matrix h = embed_channels(channels, f, p);
    if (tape) {
        tape->channels = std::move(channels);
        tape->layers.assign(p.layers.size(), {});
    }

    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        Matrix sq = h * layer.spatial.query;
        Matrix sk = h * layer.spatial.key;
        Matrix sv = h * layer.spatial.value;
        Matrix tq = h * layer.temporal.query;
        Matrix tk = h * layer.temporal.key;
        Matrix tv = h * layer.temporal.value;
        Matrix cat(n, 2 * d);
        EncoderLayerTape* lt = tape ? &tape->layers[l] : nullptr;
        if (lt) {
            lt->spatial_weights.resize(cols);
            lt->temporal_weights.resize(rows);
        }
        for (int c = 0; c < cols; ++c) {
            const auto idx = column_cells(c, rows, cols);
            const Matrix q = sq(idx, all), k = sk(idx, all), v = sv(idx, all);
            cat(idx, Eigen::seqN(0, d)) = nn::multi_head_attention(
                q, k, v, heads, inv, lt ? &lt->spatial_weights[c] : nullptr);
        }
        for (int r = 0; r < rows; ++r) {
            const Eigen::Index off = static_cast<Eigen::Index>(r) * cols;
            cat.block(off, d, cols, d) = nn::multi_head_attention(
                tq.middleRows(off, cols), tk.middleRows(off, cols), tv.middleRows(off, cols),
                heads, inv, lt ? &lt->temporal_weights[r] : nullptr);
        }
        Matrix out = nn::sigmoid(cat * layer.integrate);
        if (lt) {
            lt->input = std::move(h);
            lt->spatial_q = std::move(sq);
            lt->spatial_k = std::move(sk);
            lt->spatial_v = std::move(sv);
            lt->temporal_q = std::move(tq);
            lt->temporal_k = std::move(tk);
            lt->temporal_v = std::move(tv);
            lt->concat = std::move(cat);
            lt->output = out;
        }
        h = std::move(out);
    }
    return {std::move(h), rows, cols};
}

DecoderContext prepare_decoder(const EncoderState& enc, const FeatureTensor& f,
                               const PolicyParams& p) {
    DecoderContext ctx;
    ctx.rows = enc.rows;
    ctx.cols = enc.cols;
    ctx.n_real = f.n_real;
    ctx.site = f.site;
    ctx.hidden.reserve(enc.cols);
    for (int c = 0; c < enc.cols; ++c) {
        Matrix h = enc.column(c);
        ctx.keys.push_back(h * p.context_key);
        ctx.values.push_back(h * p.context_value);
        ctx.pointers.push_back(h * p.pointer);
        ctx.pooled.push_back(h.colwise().sum());
        ctx.hidden.push_back(std::move(h));
    }
    return ctx;
}

DecoderState DecoderState::initial(const FeatureTensor& f) {
    DecoderState s;
    s.total_steps = f.cols();
    s.n_real = f.n_real;
    s.selected.assign(f.n_real, 0);
    s.last_selected = f.idle_row();
    s.remaining_real = f.n_real;
    return s;
}

std::vector<char> DecoderState::mask() const {
    std::vector<char> m(n_real + 1);
    for (int r = 0; r <= n_real; ++r) m[r] = allowed(r);
    return m;
}

void DecoderState::advance(int row, int site) {
    if (row < n_real) {
        selected[row] = 1;
        --remaining_real;
    }
    crew_site = site;
    last_selected = row;
    ++step;
}

StepTape decode_step(const DecoderContext& ctx, const DecoderState& st, const PolicyParams& p) {
    if (st.step >= st.total_steps) throw std::logic_error("decode_step: sequence is complete");
    const int c = st.step;
    const int d = p.hyper.hidden;
    StepTape t;
    t.column = c;
    t.last = st.last_selected;
    t.allowed = st.mask();
    bool any = false;
    for (char a : t.allowed) any = any || a;
    if (!any) throw std::logic_error("decode_step: mask admits no row");

    const Matrix& hidden = ctx.hidden[c];
    t.context.resize(2 * d);
    t.context << hidden.row(t.last), ctx.pooled[c];
    t.query = t.context * p.context_query;
    t.glimpse = nn::multi_head_attention(t.query, ctx.keys[c], ctx.values[c], p.hyper.heads,
                                         inv_scale(p.hyper), &t.head_weights);
    const Vector u = ctx.pointers[c] * t.glimpse.transpose();
    t.logits = p.hyper.logit_clip * u.array().tanh();
    t.probs = nn::masked_softmax(t.logits, t.allowed);
    return t;
}

namespace {

template <typename Choose>
Rollout run_decoder(const DecoderContext& ctx, const PolicyParams& p, Choose&& choose,
                    bool keep_tape) {
    DecoderState st;
    st.total_steps = ctx.cols;
    st.n_real = ctx.n_real;
    st.selected.assign(ctx.n_real, 0);
    st.last_selected = ctx.n_real;
    st.remaining_real = ctx.n_real;

    Rollout out;
    out.seq.reserve(ctx.cols);
    for (int step = 0; step < ctx.cols; ++step) {
        StepTape t = decode_step(ctx, st, p);
        const int pick = choose(t, step);
        if (pick < 0 || pick >= ctx.rows || !t.allowed[pick])
            throw InfeasibleError("decoder: row " + std::to_string(pick) + " is masked at step " +
                                  std::to_string(step));
        t.choice = pick;
        out.log_prob += std::log(t.probs(pick));
        out.seq.push_back(pick);
        st.advance(pick, ctx.site[pick]);
        if (keep_tape) out.steps.push_back(std::move(t));
    }
    return out;
}

}  // namespace

Rollout decode(const DecoderContext& ctx, const PolicyParams& p, DecodeMode mode, Rng* rng,
               bool keep_tape) {
    if (mode == DecodeMode::sample && !rng)
        throw InvalidParameters("sampling requires a random generator");
    return run_decoder(
        ctx, p,
        [&](const StepTape& t, int) {
            if (mode == DecodeMode::greedy) {
                int best = -1;
                for (int r = 0; r < ctx.rows; ++r)
                    if (t.allowed[r] && (best < 0 || t.probs(r) > t.probs(best))) best = r;
                return best;
            }
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(*rng);
            double acc = 0.0;
            int last = -1;
            for (int r = 0; r < ctx.rows; ++r) {
                if (!t.allowed[r]) continue;
                last = r;
                acc += t.probs(r);
                if (u < acc) return r;
            }
            return last;
        },
        keep_tape);
}

Rollout replay(const DecoderContext& ctx, const PolicyParams& p, std::span<const int> seq,
               bool keep_tape) {
    if (static_cast<int>(seq.size()) != ctx.cols)
        throw InfeasibleError("replay: sequence length differs from T*J");
    return run_decoder(ctx, p, [&](const StepTape&, int step) { return seq[step]; }, keep_tape);
}

PolicyRollout rollout(const FeatureTensor& f, const EconomicParams& econ, const PolicyParams& p,
                      DecodeMode mode, Rng* rng) {
    const EncoderState enc = encode(f, p);
    const DecoderContext ctx = prepare_decoder(enc, f, p);
    Rollout r = decode(ctx, p, mode, rng);
    PolicyRollout out;
    out.schedule = Schedule::from_sequence(std::move(r.seq), f);
    out.log_prob = r.log_prob;
    out.cost = sequence_cost(out.schedule, f, econ).total;
    return out;
}

void accumulate_log_prob_gradient(const FeatureTensor& f, const PolicyParams& p,
                                  const EncoderTape& tape, const DecoderContext& ctx,
                                  std::span<const WeightedRollout> rollouts, PolicyParams& grad) {
    const int rows = ctx.rows;
    const int cols = ctx.cols;
    const int d = p.hyper.hidden;
    const int heads = p.hyper.heads;
    const double inv = inv_scale(p.hyper);
    const double clip = p.hyper.logit_clip;

    std::vector<Matrix> d_hidden(cols, Matrix::Zero(rows, d));
    std::vector<Matrix> d_keys(cols, Matrix::Zero(rows, d));
    std::vector<Matrix> d_values(cols, Matrix::Zero(rows, d));
    std::vector<Matrix> d_pointers(cols, Matrix::Zero(rows, d));
    std::vector<RowVector> d_pooled(cols, RowVector::Zero(d));

    Matrix dq, dk, dv;
    for (const auto& wr : rollouts) {
        if (wr.weight == 0.0) continue;
        if (wr.rollout->steps.size() != static_cast<std::size_t>(cols))
            throw std::logic_error("gradient requires a rollout recorded with its tape");
        for (const StepTape& t : wr.rollout->steps) {
            const int c = t.column;
            // d log p(choice) / d logits = onehot - p over admissible rows
            Vector d_logits = -wr.weight * t.probs;
            d_logits(t.choice) += wr.weight;
            const Vector squashed = t.logits / clip;
            const Vector du =
                (d_logits.array() * clip * (1.0 - squashed.array().square())).matrix();

            const Matrix d_glimpse = du.transpose() * ctx.pointers[c];
            d_pointers[c].noalias() += du * t.glimpse;

            nn::multi_head_attention_backward<double>(t.query, ctx.keys[c], ctx.values[c],
                                                      t.head_weights, d_glimpse, heads, inv, dq,
                                                      dk, dv);
            d_keys[c] += dk;
            d_values[c] += dv;
            grad.context_query.noalias() += t.context.transpose() * dq;
            const RowVector d_context = dq * p.context_query.transpose();
            d_hidden[c].row(t.last) += d_context.head(d);
            d_pooled[c] += d_context.tail(d);
        }
    }

    const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;
    Matrix dh(n, d);
    for (int c = 0; c < cols; ++c) {
        const Matrix& h = ctx.hidden[c];
        grad.context_key.noalias() += h.transpose() * d_keys[c];
        grad.context_value.noalias() += h.transpose() * d_values[c];
        grad.pointer.noalias() += h.transpose() * d_pointers[c];
        Matrix total = d_hidden[c];
        total.noalias() += d_keys[c] * p.context_key.transpose();
        total.noalias() += d_values[c] * p.context_value.transpose();
        total.noalias() += d_pointers[c] * p.pointer.transpose();
        total.rowwise() += d_pooled[c];
        dh(column_cells(c, rows, cols), all) = total;
    }

    for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
        const auto& layer = p.layers[l];
        const auto& lt = tape.layers[l];
        auto& g = grad.layers[l];

        const Matrix dz = (dh.array() * lt.output.array() * (1.0 - lt.output.array())).matrix();
        g.integrate.noalias() += lt.concat.transpose() * dz;
        const Matrix d_cat = dz * layer.integrate.transpose();

        Matrix dsq(n, d), dsk(n, d), dsv(n, d);
        for (int c = 0; c < cols; ++c) {
            const auto idx = column_cells(c, rows, cols);
            const Matrix q = lt.spatial_q(idx, all), k = lt.spatial_k(idx, all),
                         v = lt.spatial_v(idx, all), d_out = d_cat(idx, Eigen::seqN(0, d));
            nn::multi_head_attention_backward<double>(q, k, v, lt.spatial_weights[c], d_out, heads,
                                                      inv, dq, dk, dv);
            dsq(idx, all) = dq;
            dsk(idx, all) = dk;
            dsv(idx, all) = dv;
        }
        Matrix dtq(n, d), dtk(n, d), dtv(n, d);
        for (int r = 0; r < rows; ++r) {
            const Eigen::Index off = static_cast<Eigen::Index>(r) * cols;
            const Matrix q = lt.temporal_q.middleRows(off, cols),
                         k = lt.temporal_k.middleRows(off, cols),
                         v = lt.temporal_v.middleRows(off, cols),
                         d_out = d_cat.block(off, d, cols, d);
            nn::multi_head_attention_backward<double>(q, k, v, lt.temporal_weights[r], d_out,
                                                      heads, inv, dq, dk, dv);
            dtq.middleRows(off, cols) = dq;
            dtk.middleRows(off, cols) = dk;
            dtv.middleRows(off, cols) = dv;
        }
        const Matrix& x = lt.input;
        g.spatial.query.noalias() += x.transpose() * dsq;
        g.spatial.key.noalias() += x.transpose() * dsk;
        g.spatial.value.noalias() += x.transpose() * dsv;
        g.temporal.query.noalias() += x.transpose() * dtq;
        g.temporal.key.noalias() += x.transpose() * dtk;
        g.temporal.value.noalias() += x.transpose() * dtv;

        Matrix dx = dsq * layer.spatial.query.transpose();
        dx.noalias() += dsk * layer.spatial.key.transpose();
        dx.noalias() += dsv * layer.spatial.value.transpose();
        dx.noalias() += dtq * layer.temporal.query.transpose();
        dx.noalias() += dtk * layer.temporal.key.transpose();
        dx.noalias() += dtv * layer.temporal.value.transpose();
        dh = std::move(dx);
    }

    grad.input_weight.noalias() += tape.channels.transpose() * dh;
    grad.input_bias += dh.colwise().sum();
    for (int r = 0; r < rows; ++r)
        grad.site_embed.row(f.site[r]) +=
            dh.middleRows(static_cast<Eigen::Index>(r) * cols, cols).colwise().sum();
}

double log_prob_objective(const FeatureTensor& f, const PolicyParams& p,
                          std::span<const std::vector<int>> seqs, std::span<const double> weights,
                          PolicyParams* grad) {
    EncoderTape tape;
    const EncoderState enc = encode(f, p, grad ? &tape : nullptr);
    const DecoderContext ctx = prepare_decoder(enc, f, p);
    std::vector<Rollout> replays;
    replays.reserve(seqs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < seqs.size(); ++k) {
        replays.push_back(replay(ctx, p, seqs[k], grad != nullptr));
        total += weights[k] * replays.back().log_prob;
    }
    if (grad) {
        std::vector<WeightedRollout> weighted;
        for (std::size_t k = 0; k < seqs.size(); ++k) weighted.push_back({&replays[k], weights[k]});
        accumulate_log_prob_gradient(f, p, tape, ctx, weighted, *grad);
    }
    return total;
}

}  // namespace attenmfg
