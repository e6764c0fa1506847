#pragma once

// Dense building blocks for the attention policy: activations, masked
// softmax and multi-head scaled dot-product attention with its reverse pass.
// Everything is templated on the scalar so the same code runs in double for
// training and in other precisions for experiments.

#include "attenmfg/types.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

namespace attenmfg::nn {

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
}

// Softmax of each row, in place.
template <typename Derived>
void softmax_rows(Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
}

// Softmax restricted to `allowed` entries; the rest get exactly zero.
template <typename DerivedL, typename Mask>
auto masked_softmax(const Eigen::MatrixBase<DerivedL>& logits, const Mask& allowed) {
    using Scalar = typename DerivedL::Scalar;
    VectorX<Scalar> p = VectorX<Scalar>::Zero(logits.size());
    Scalar top = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (allowed[i]) top = std::max(top, logits(i));
    assert(std::isfinite(top));
    Scalar total = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!allowed[i]) continue;
        p(i) = std::exp(logits(i) - top);
        total += p(i);
    }
    return VectorX<Scalar>(p / total);
}

// Multi-head attention on projected queries (nq x D), keys and values
// (nk x D). Head h uses columns [h*D/H, (h+1)*D/H). Scores are scaled by
// `inv_scale`. Per-head weight matrices (nq x nk) are saved when requested.
template <typename DQ, typename DK, typename DV>
MatrixX<typename DQ::Scalar> multi_head_attention(
    const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
    const Eigen::MatrixBase<DV>& v, int heads, typename DQ::Scalar inv_scale,
    std::vector<MatrixX<typename DQ::Scalar>>* weights = nullptr) {
    using Scalar = typename DQ::Scalar;
    const Eigen::Index width = q.cols() / heads;
    MatrixX<Scalar> out(q.rows(), v.cols());
    if (weights) weights->resize(heads);
    for (int h = 0; h < heads; ++h) {
        const Eigen::Index off = h * width;
        MatrixX<Scalar> a =
            (q.middleCols(off, width) * k.middleCols(off, width).transpose()) * inv_scale;
        softmax_rows(a);
        out.middleCols(off, width).noalias() = a * v.middleCols(off, width);
        if (weights) (*weights)[h] = std::move(a);
    }
    return out;
}

// Reverse pass of multi_head_attention. Overwrites dq, dk, dv.
template <typename Scalar>
void multi_head_attention_backward(const MatrixX<Scalar>& q, const MatrixX<Scalar>& k,
                                   const MatrixX<Scalar>& v,
                                   const std::vector<MatrixX<Scalar>>& weights,
                                   const MatrixX<Scalar>& d_out, int heads, Scalar inv_scale,
                                   MatrixX<Scalar>& dq, MatrixX<Scalar>& dk,
                                   MatrixX<Scalar>& dv) {
    const Eigen::Index width = q.cols() / heads;
    dq.resize(q.rows(), q.cols());
    dk.resize(k.rows(), k.cols());
    dv.resize(v.rows(), v.cols());
    for (int h = 0; h < heads; ++h) {
        const Eigen::Index off = h * width;
        const MatrixX<Scalar>& a = weights[h];
        const auto d_o = d_out.middleCols(off, width);
        dv.middleCols(off, width).noalias() = a.transpose() * d_o;
        MatrixX<Scalar> da = d_o * v.middleCols(off, width).transpose();
        // softmax Jacobian, row by row
        const VectorX<Scalar> inner = (da.array() * a.array()).rowwise().sum();
        MatrixX<Scalar> ds = a.array() * (da.colwise() - inner).array();
        ds *= inv_scale;
        dq.middleCols(off, width).noalias() = ds * k.middleCols(off, width);
        dk.middleCols(off, width).noalias() = ds.transpose() * q.middleCols(off, width);
    }
}

// Self-attention over the rows of x with projection matrices (D x D).
template <typename DX, typename DW>
MatrixX<typename DX::Scalar> self_attention(const Eigen::MatrixBase<DX>& x,
                                            const Eigen::MatrixBase<DW>& wq,
                                            const Eigen::MatrixBase<DW>& wk,
                                            const Eigen::MatrixBase<DW>& wv, int heads,
                                            typename DX::Scalar inv_scale) {
    using Scalar = typename DX::Scalar;
    const MatrixX<Scalar> q = x * wq;
    const MatrixX<Scalar> k = x * wk;
    const MatrixX<Scalar> v = x * wv;
    return multi_head_attention(q, k, v, heads, inv_scale);
}

}  // namespace attenmfg::nn
