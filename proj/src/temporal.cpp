#include "eltrack/temporal.hpp"

#include <vector>

namespace eltrack {

template <typename T>
QueryMemory<T>::QueryMemory(int capacity) : capacity_(capacity) {
    if (capacity < 1) {
        throw ValidationError("query memory capacity must be >= 1");
    }
}

template <typename T>
void QueryMemory<T>::push(const Tensor<T>& q) {
    if (q.rows() != 1) {
        throw ShapeError("memory_push: expected a single query row");
    }
    if (!entries_.empty() && q.cols() != entries_.front().cols()) {
        throw ShapeError("memory_push: query width differs from memory");
    }
    entries_.push_back(q);
    while (static_cast<int>(entries_.size()) > capacity_) {
        entries_.pop_front();
    }
}

template <typename T>
Tensor<T> QueryMemory<T>::stacked() const {
    if (entries_.empty()) {
        throw ValidationError("memory is empty");
    }
    const std::vector<Tensor<T>> rows(entries_.begin(), entries_.end());
    return ops::concat_rows<T>(rows);
}

template <typename T>
TcaModel<T>::TcaModel(ParamSet<T>& params, const AttentionConfig& cfg, int ffn_dim, InitRng& rng)
    : cross_attn(params, "tca.cross_attn", cfg, rng),
      ln_attn(params, "tca.ln_attn", cfg.embed_dim),
      ffn1(params, "tca.ffn1", cfg.embed_dim, ffn_dim, rng),
      ffn2(params, "tca.ffn2", cfg.embed_dim, ffn_dim, rng),
      ln_out(params, "tca.ln_out", cfg.embed_dim) {}

template <typename T>
Tensor<T> TcaModel<T>::adjust(const Tensor<T>& x) const {
    return ln_out.forward(ops::add(x, ffn2.forward(ffn1.forward(x))));
}

template <typename T>
Tensor<T> TcaModel<T>::forward(const Tensor<T>& e, const QueryMemory<T>& memory) const {
    if (e.rows() != 1 || e.cols() != cross_attn.cfg.embed_dim) {
        throw ShapeError("tca_forward: embedding must be 1 x c");
    }
    if (memory.empty()) {
        return adjust(e);
    }
    const Tensor<T> mem = memory.stacked();
    if (mem.cols() != e.cols()) {
        throw ShapeError("tca_forward: memory width differs from embedding");
    }
    const Tensor<T> attended = cross_attn.forward(e, mem).output;
    return adjust(ln_attn.forward(ops::add(attended, e)));
}

template class QueryMemory<float>;
template class QueryMemory<double>;
template class TcaModel<float>;
template class TcaModel<double>;

}  // namespace eltrack
