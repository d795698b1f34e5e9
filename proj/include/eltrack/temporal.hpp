#pragma once

#include <deque>

#include "eltrack/ensemble.hpp"
#include "eltrack/layers.hpp"

namespace eltrack {

/// FIFO of the last L online queries of one tracker, oldest first.
template <typename T>
class QueryMemory {
public:
    explicit QueryMemory(int capacity = 5);

    /// Appends q (1 x c); drops the oldest entry once capacity is exceeded.
    void push(const Tensor<T>& q);
    void clear() { entries_.clear(); }

    bool empty() const { return entries_.empty(); }
    int size() const { return static_cast<int>(entries_.size()); }
    int capacity() const { return capacity_; }
    const Tensor<T>& at(int i) const { return entries_.at(static_cast<std::size_t>(i)); }

    /// (size x c) stack, row 0 oldest.
    Tensor<T> stacked() const;

private:
    int capacity_;
    std::deque<Tensor<T>> entries_;
};

/// Produces the next online query from a target embedding and the memory:
///   memory nonempty: adjust(LN(attn(e, memory) + e))
///   memory empty:    adjust(e)
/// with adjust(x) = LN(x + FFN2(FFN1(x))).
template <typename T>
class TcaModel {
public:
    TcaModel() = default;
    TcaModel(ParamSet<T>& params, const AttentionConfig& cfg, int ffn_dim, InitRng& rng);

    Tensor<T> forward(const Tensor<T>& embedding, const QueryMemory<T>& memory) const;
    Tensor<T> adjust(const Tensor<T>& x) const;

    MultiHeadAttention<T> cross_attn;
    LayerNorm<T> ln_attn;
    FeedForward<T> ffn1;
    FeedForward<T> ffn2;
    LayerNorm<T> ln_out;
};

/// Next-frame reference of the activated tracker: the predicted box centre.
inline Point2 transfer_reference(const Candidate& accepted) { return box_center(accepted.box); }

}  // namespace eltrack
