#include "eltrack/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eltrack {

namespace detail {
bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

namespace ops {

namespace {

template <typename T>
const Mat<T>& pv(Node<T>& n, std::size_t i) {
    return n.parents[i]->value;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}

// Four-neighbour bilinear stencil for one normalized point.
template <typename T>
struct Stencil {
    Index idx[4];
    T w[4];
    bool valid[4];
    // d(weight)/d(grid x), d(weight)/d(grid y)
    T dwx[4];
    T dwy[4];

    Stencil(T px, T py, int height, int width) {
        const T gx = px * T(width) - T(0.5);
        const T gy = py * T(height) - T(0.5);
        const T fx0 = std::floor(gx);
        const T fy0 = std::floor(gy);
        const T fx = gx - fx0;
        const T fy = gy - fy0;
        const long x0 = static_cast<long>(fx0);
        const long y0 = static_cast<long>(fy0);
        const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
        const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
        w[0] = (T(1) - fx) * (T(1) - fy);
        w[1] = fx * (T(1) - fy);
        w[2] = (T(1) - fx) * fy;
        w[3] = fx * fy;
        dwx[0] = -(T(1) - fy);
        dwx[1] = (T(1) - fy);
        dwx[2] = -fy;
        dwx[3] = fy;
        dwy[0] = -(T(1) - fx);
        dwy[1] = -fx;
        dwy[2] = (T(1) - fx);
        dwy[3] = fx;
        for (int c = 0; c < 4; ++c) {
            valid[c] = xs[c] >= 0 && xs[c] < width && ys[c] >= 0 && ys[c] < height;
            idx[c] = valid[c] ? static_cast<Index>(ys[c] * width + xs[c]) : 0;
        }
    }
};

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    return Tensor<T>::from_op(a.value() + b.value(), {a, b}, [](Node<T>& n) {
        accumulate(n, 0, n.grad);
        accumulate(n, 1, n.grad);
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    return Tensor<T>::from_op(a.value() - b.value(), {a, b}, [](Node<T>& n) {
        accumulate(n, 0, n.grad);
        accumulate(n, 1, -n.grad);
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    return Tensor<T>::from_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node<T>& n) {
        accumulate(n, 0, n.grad.cwiseProduct(pv(n, 1)));
        accumulate(n, 1, n.grad.cwiseProduct(pv(n, 0)));
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    return Tensor<T>::from_op(a.value() * s, {a}, [s](Node<T>& n) { accumulate(n, 0, n.grad * s); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    Mat<T> v = a.value().array() + s;
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) { accumulate(n, 0, n.grad); });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: row must be 1 x cols");
    }
    Mat<T> v = a.value().rowwise() + row.value().row(0);
    return Tensor<T>::from_op(std::move(v), {a, row}, [](Node<T>& n) {
        accumulate(n, 0, n.grad);
        accumulate(n, 1, n.grad.colwise().sum());
    });
}

template <typename T>
Tensor<T> mul_row(const Tensor<T>& a, const Tensor<T>& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("mul_row: row must be 1 x cols");
    }
    Mat<T> v = a.value().array().rowwise() * row.value().row(0).array();
    return Tensor<T>::from_op(std::move(v), {a, row}, [](Node<T>& n) {
        const Mat<T> ga = n.grad.array().rowwise() * pv(n, 1).row(0).array();
        accumulate(n, 0, ga);
        accumulate(n, 1, n.grad.cwiseProduct(pv(n, 0)).colwise().sum());
    });
}

template <typename T>
Tensor<T> mul_col(const Tensor<T>& a, const Tensor<T>& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw ShapeError("mul_col: col must be rows x 1");
    }
    Mat<T> v = a.value().array().colwise() * col.value().col(0).array();
    return Tensor<T>::from_op(std::move(v), {a, col}, [](Node<T>& n) {
        const Mat<T> ga = n.grad.array().colwise() * pv(n, 1).col(0).array();
        accumulate(n, 0, ga);
        accumulate(n, 1, n.grad.cwiseProduct(pv(n, 0)).rowwise().sum());
    });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
    }
    Mat<T> v(a.rows(), b.cols());
    v.noalias() = a.value() * b.value();
    return Tensor<T>::from_op(std::move(v), {a, b}, [](Node<T>& n) {
        if (n.parents[0]->requires_grad) {
            n.parents[0]->grad_ref().noalias() += n.grad * pv(n, 1).transpose();
        }
        if (n.parents[1]->requires_grad) {
            n.parents[1]->grad_ref().noalias() += pv(n, 0).transpose() * n.grad;
        }
    });
}

template <typename T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_bt: column counts differ");
    }
    Mat<T> v(a.rows(), b.rows());
    v.noalias() = a.value() * b.value().transpose();
    return Tensor<T>::from_op(std::move(v), {a, b}, [](Node<T>& n) {
        if (n.parents[0]->requires_grad) {
            n.parents[0]->grad_ref().noalias() += n.grad * pv(n, 1);
        }
        if (n.parents[1]->requires_grad) {
            n.parents[1]->grad_ref().noalias() += n.grad.transpose() * pv(n, 0);
        }
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    Mat<T> v = a.value().transpose();
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) { accumulate(n, 0, n.grad.transpose()); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    Mat<T> v = a.value().cwiseMax(T(0));
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) {
        const Mat<T> g = (pv(n, 0).array() > T(0)).select(n.grad, T(0));
        accumulate(n, 0, g);
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    Mat<T> v = a.value().unaryExpr([](T x) {
        if (x >= T(0)) {
            return T(1) / (T(1) + std::exp(-x));
        }
        const T e = std::exp(x);
        return e / (T(1) + e);
    });
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) {
        const Mat<T> g = n.grad.array() * n.value.array() * (T(1) - n.value.array());
        accumulate(n, 0, g);
    });
}

template <typename T>
Tensor<T> logit(const Tensor<T>& a, T eps) {
    const Mat<T> x = a.value().cwiseMax(eps).cwiseMin(T(1) - eps);
    Mat<T> v = x.unaryExpr([](T p) { return std::log(p / (T(1) - p)); });
    const Mat<T> in = a.value();
    return Tensor<T>::from_op(std::move(v), {a}, [x, in, eps](Node<T>& n) {
        Mat<T> g(x.rows(), x.cols());
        for (Index i = 0; i < g.size(); ++i) {
            const bool inside = in.data()[i] > eps && in.data()[i] < T(1) - eps;
            g.data()[i] = inside ? n.grad.data()[i] / (x.data()[i] * (T(1) - x.data()[i])) : T(0);
        }
        accumulate(n, 0, g);
    });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    Mat<T> v = a.value().cwiseAbs();
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) {
        const Mat<T> g = n.grad.array() * pv(n, 0).array().sign();
        accumulate(n, 0, g);
    });
}

template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "minimum");
    Mat<T> v = a.value().cwiseMin(b.value());
    return Tensor<T>::from_op(std::move(v), {a, b}, [](Node<T>& n) {
        const auto pick_a = (pv(n, 0).array() <= pv(n, 1).array());
        const Mat<T> ga = pick_a.select(n.grad, T(0));
        const Mat<T> gb = pick_a.select(T(0), n.grad);
        accumulate(n, 0, ga);
        accumulate(n, 1, gb);
    });
}

template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "maximum");
    Mat<T> v = a.value().cwiseMax(b.value());
    return Tensor<T>::from_op(std::move(v), {a, b}, [](Node<T>& n) {
        const auto pick_a = (pv(n, 0).array() >= pv(n, 1).array());
        const Mat<T> ga = pick_a.select(n.grad, T(0));
        const Mat<T> gb = pick_a.select(T(0), n.grad);
        accumulate(n, 0, ga);
        accumulate(n, 1, gb);
    });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& a, T lo) {
    Mat<T> v = a.value().cwiseMax(lo);
    return Tensor<T>::from_op(std::move(v), {a}, [lo](Node<T>& n) {
        const Mat<T> g = (pv(n, 0).array() > lo).select(n.grad, T(0));
        accumulate(n, 0, g);
    });
}

template <typename T>
Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "divide");
    Mat<T> v = a.value().cwiseQuotient(b.value());
    return Tensor<T>::from_op(std::move(v), {a, b}, [](Node<T>& n) {
        accumulate(n, 0, n.grad.cwiseQuotient(pv(n, 1)));
        const Mat<T> gb = -(n.grad.array() * n.value.array() / pv(n, 1).array());
        accumulate(n, 1, gb);
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    Mat<T> v(1, 1);
    v(0, 0) = a.value().sum();
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (p.requires_grad) {
            p.grad_ref().array() += n.grad(0, 0);
        }
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> row_sum(const Tensor<T>& a) {
    Mat<T> v = a.value().rowwise().sum();
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (p.requires_grad) {
            p.grad_ref().colwise() += n.grad.col(0);
        }
    });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
    if (a.cols() == 0) {
        throw ShapeError("softmax over an empty axis");
    }
    Mat<T> v = a.value();
    for (Index r = 0; r < v.rows(); ++r) {
        auto row = v.row(r);
        const T m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= row.sum();
    }
    return Tensor<T>::from_op(std::move(v), {a}, [](Node<T>& n) {
        const auto dot = n.grad.cwiseProduct(n.value).rowwise().sum();
        const Mat<T> g = n.value.array() * (n.grad.colwise() - dot).array();
        accumulate(n, 0, g);
    });
}

template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    const Index c = a.cols();
    if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
        throw ShapeError("layer_norm_rows: gamma/beta must be 1 x cols");
    }
    Mat<T> xhat(a.rows(), c);
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(a.rows());
    for (Index r = 0; r < a.rows(); ++r) {
        const auto row = a.value().row(r);
        const T mu = row.mean();
        const T var = (row.array() - mu).square().mean();
        inv_std(r) = T(1) / std::sqrt(var + eps);
        xhat.row(r) = (row.array() - mu) * inv_std(r);
    }
    Mat<T> v = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
    return Tensor<T>::from_op(
        std::move(v), {a, gamma, beta},
        [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& n) {
            const Index cols = xhat.cols();
            if (n.parents[0]->requires_grad) {
                const Mat<T> dxhat = n.grad.array().rowwise() * pv(n, 1).row(0).array();
                Mat<T>& ga = n.parents[0]->grad_ref();
                for (Index r = 0; r < xhat.rows(); ++r) {
                    const T m1 = dxhat.row(r).sum() / T(cols);
                    const T m2 = dxhat.row(r).dot(xhat.row(r)) / T(cols);
                    ga.row(r).array() +=
                        inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                }
            }
            accumulate(n, 1, n.grad.cwiseProduct(xhat).colwise().sum());
            accumulate(n, 2, n.grad.colwise().sum());
        });
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& a, T eps) {
    Mat<T> v = a.value();
    Eigen::Matrix<T, Eigen::Dynamic, 1> norms(v.rows());
    for (Index r = 0; r < v.rows(); ++r) {
        norms(r) = std::sqrt(v.row(r).squaredNorm() + eps);
        v.row(r) /= norms(r);
    }
    return Tensor<T>::from_op(std::move(v), {a}, [norms = std::move(norms)](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (!p.requires_grad) {
            return;
        }
        Mat<T>& g = p.grad_ref();
        for (Index r = 0; r < n.value.rows(); ++r) {
            const T d = n.value.row(r).dot(n.grad.row(r));
            g.row(r) += (n.grad.row(r) - n.value.row(r) * d) / norms(r);
        }
    });
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: nothing to concatenate");
    }
    const Index cols = parts[0].cols();
    Index rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            throw ShapeError("concat_rows: column counts differ");
        }
        rows += p.rows();
    }
    Mat<T> v(rows, cols);
    Index off = 0;
    for (const auto& p : parts) {
        v.middleRows(off, p.rows()) = p.value();
        off += p.rows();
    }
    std::vector<Tensor<T>> parents(parts.begin(), parts.end());
    return Tensor<T>::from_op(std::move(v), std::move(parents), [](Node<T>& n) {
        Index o = 0;
        for (auto& p : n.parents) {
            const Index r = p->value.rows();
            if (p->requires_grad) {
                p->grad_ref() += n.grad.middleRows(o, r);
            }
            o += r;
        }
    });
}

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols: nothing to concatenate");
    }
    const Index rows = parts[0].rows();
    Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row counts differ");
        }
        cols += p.cols();
    }
    Mat<T> v(rows, cols);
    Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    std::vector<Tensor<T>> parents(parts.begin(), parts.end());
    return Tensor<T>::from_op(std::move(v), std::move(parents), [](Node<T>& n) {
        Index o = 0;
        for (auto& p : n.parents) {
            const Index c = p->value.cols();
            if (p->requires_grad) {
                p->grad_ref() += n.grad.middleCols(o, c);
            }
            o += c;
        }
    });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw ShapeError("slice_rows: range out of bounds");
    }
    Mat<T> v = a.value().middleRows(start, count);
    return Tensor<T>::from_op(std::move(v), {a}, [start, count](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (p.requires_grad) {
            p.grad_ref().middleRows(start, count) += n.grad;
        }
    });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        throw ShapeError("slice_cols: range out of bounds");
    }
    Mat<T> v = a.value().middleCols(start, count);
    return Tensor<T>::from_op(std::move(v), {a}, [start, count](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (p.requires_grad) {
            p.grad_ref().middleCols(start, count) += n.grad;
        }
    });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const Index> rows) {
    Mat<T> v(static_cast<Index>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= a.rows()) {
            throw ShapeError("gather_rows: index out of bounds");
        }
        v.row(static_cast<Index>(i)) = a.value().row(rows[i]);
    }
    std::vector<Index> idx(rows.begin(), rows.end());
    return Tensor<T>::from_op(std::move(v), {a}, [idx = std::move(idx)](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (!p.requires_grad) {
            return;
        }
        Mat<T>& g = p.grad_ref();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            g.row(idx[i]) += n.grad.row(static_cast<Index>(i));
        }
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Index rows, Index cols) {
    if (rows * cols != a.size()) {
        throw ShapeError("reshape: element count changes");
    }
    Mat<T> v = Eigen::Map<const Mat<T>>(a.value().data(), rows, cols);
    const Index r0 = a.rows();
    const Index c0 = a.cols();
    return Tensor<T>::from_op(std::move(v), {a}, [r0, c0](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (p.requires_grad) {
            p.grad_ref() += Eigen::Map<const Mat<T>>(n.grad.data(), r0, c0);
        }
    });
}

template <typename T>
Tensor<T> tile_cols(const Tensor<T>& a, Index times) {
    if (times < 1) {
        throw ShapeError("tile_cols: times must be positive");
    }
    const Index c = a.cols();
    Mat<T> v(a.rows(), c * times);
    for (Index t = 0; t < times; ++t) {
        v.middleCols(t * c, c) = a.value();
    }
    return Tensor<T>::from_op(std::move(v), {a}, [times, c](Node<T>& n) {
        Node<T>& p = *n.parents[0];
        if (!p.requires_grad) {
            return;
        }
        Mat<T>& g = p.grad_ref();
        for (Index t = 0; t < times; ++t) {
            g += n.grad.middleCols(t * c, c);
        }
    });
}

template <typename T>
Tensor<T> detach(const Tensor<T>& a) {
    Tensor<T> out(a.value());
    return out;
}

template <typename T>
Tensor<T> im2col(const Tensor<T>& a, int height, int width, int kernel, int stride, int pad) {
    const Index channels = a.cols();
    if (a.rows() != static_cast<Index>(height) * width) {
        throw ShapeError("im2col: rows must equal height*width");
    }
    const int out_h = (height + 2 * pad - kernel) / stride + 1;
    const int out_w = (width + 2 * pad - kernel) / stride + 1;
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("im2col: input smaller than kernel");
    }
    const Index patch = static_cast<Index>(kernel) * kernel * channels;
    Mat<T> v = Mat<T>::Zero(static_cast<Index>(out_h) * out_w, patch);
    const Mat<T>& x = a.value();
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const Index row = static_cast<Index>(oy) * out_w + ox;
            for (int ky = 0; ky < kernel; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= height) {
                    continue;
                }
                for (int kx = 0; kx < kernel; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= width) {
                        continue;
                    }
                    v.row(row).segment((static_cast<Index>(ky) * kernel + kx) * channels, channels) =
                        x.row(static_cast<Index>(iy) * width + ix);
                }
            }
        }
    }
    return Tensor<T>::from_op(
        std::move(v), {a},
        [=](Node<T>& n) {
            Node<T>& p = *n.parents[0];
            if (!p.requires_grad) {
                return;
            }
            Mat<T>& g = p.grad_ref();
            for (int oy = 0; oy < out_h; ++oy) {
                for (int ox = 0; ox < out_w; ++ox) {
                    const Index row = static_cast<Index>(oy) * out_w + ox;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= height) {
                            continue;
                        }
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= width) {
                                continue;
                            }
                            g.row(static_cast<Index>(iy) * width + ix) += n.grad.row(row).segment(
                                (static_cast<Index>(ky) * kernel + kx) * channels, channels);
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& map, int height, int width, const Tensor<T>& points) {
    if (height <= 0 || width <= 0 || map.rows() != static_cast<Index>(height) * width) {
        throw ShapeError("bilinear_sample: map rows must equal height*width > 0");
    }
    if (points.cols() != 2) {
        throw ShapeError("bilinear_sample: points must be N x 2");
    }
    const Index n_pts = points.rows();
    const Index c = map.cols();
    Mat<T> v = Mat<T>::Zero(n_pts, c);
    for (Index i = 0; i < n_pts; ++i) {
        const Stencil<T> s(points.value()(i, 0), points.value()(i, 1), height, width);
        for (int k = 0; k < 4; ++k) {
            if (s.valid[k]) {
                v.row(i) += s.w[k] * map.value().row(s.idx[k]);
            }
        }
    }
    return Tensor<T>::from_op(std::move(v), {map, points}, [height, width](Node<T>& n) {
        const Mat<T>& fmap = pv(n, 0);
        const Mat<T>& pts = pv(n, 1);
        Node<T>& pmap = *n.parents[0];
        Node<T>& ppts = *n.parents[1];
        for (Index i = 0; i < pts.rows(); ++i) {
            const Stencil<T> s(pts(i, 0), pts(i, 1), height, width);
            T gx = 0;
            T gy = 0;
            for (int k = 0; k < 4; ++k) {
                if (!s.valid[k]) {
                    continue;
                }
                if (pmap.requires_grad) {
                    pmap.grad_ref().row(s.idx[k]) += s.w[k] * n.grad.row(i);
                }
                const T d = fmap.row(s.idx[k]).dot(n.grad.row(i));
                gx += s.dwx[k] * d;
                gy += s.dwy[k] * d;
            }
            if (ppts.requires_grad) {
                ppts.grad_ref()(i, 0) += gx * T(width);
                ppts.grad_ref()(i, 1) += gy * T(height);
            }
        }
    });
}

template <typename T>
Tensor<T> deformable_gather(const Tensor<T>& value, int height, int width, int heads,
                            const Tensor<T>& locations, const Tensor<T>& weights) {
    if (height <= 0 || width <= 0 || value.rows() != static_cast<Index>(height) * width) {
        throw ShapeError("deformable_gather: empty or inconsistent feature map");
    }
    if (heads <= 0 || value.cols() % heads != 0) {
        throw ShapeError("deformable_gather: channels must divide into heads");
    }
    const Index n_q = locations.rows();
    const Index hk = weights.cols();
    if (weights.rows() != n_q || hk % heads != 0 || locations.cols() != 2 * hk) {
        throw ShapeError("deformable_gather: locations must be N x 2HK and weights N x HK");
    }
    const Index points = hk / heads;
    const Index d = value.cols() / heads;
    const Mat<T>& val = value.value();
    const Mat<T>& loc = locations.value();
    const Mat<T>& w = weights.value();
    Mat<T> out = Mat<T>::Zero(n_q, value.cols());
    for (Index q = 0; q < n_q; ++q) {
        for (Index m = 0; m < heads; ++m) {
            for (Index k = 0; k < points; ++k) {
                const Index slot = m * points + k;
                const Stencil<T> s(loc(q, 2 * slot), loc(q, 2 * slot + 1), height, width);
                const T a = w(q, slot);
                for (int c = 0; c < 4; ++c) {
                    if (s.valid[c]) {
                        out.row(q).segment(m * d, d) += (a * s.w[c]) * val.row(s.idx[c]).segment(m * d, d);
                    }
                }
            }
        }
    }
    return Tensor<T>::from_op(
        std::move(out), {value, locations, weights}, [height, width, heads, points, d](Node<T>& n) {
            const Mat<T>& val = pv(n, 0);
            const Mat<T>& loc = pv(n, 1);
            const Mat<T>& w = pv(n, 2);
            Node<T>& pval = *n.parents[0];
            Node<T>& ploc = *n.parents[1];
            Node<T>& pw = *n.parents[2];
            for (Index q = 0; q < loc.rows(); ++q) {
                for (Index m = 0; m < heads; ++m) {
                    const auto gout = n.grad.row(q).segment(m * d, d);
                    for (Index k = 0; k < points; ++k) {
                        const Index slot = m * points + k;
                        const Stencil<T> s(loc(q, 2 * slot), loc(q, 2 * slot + 1), height, width);
                        const T a = w(q, slot);
                        T gw = 0;
                        T gx = 0;
                        T gy = 0;
                        for (int c = 0; c < 4; ++c) {
                            if (!s.valid[c]) {
                                continue;
                            }
                            const T dot = val.row(s.idx[c]).segment(m * d, d).dot(gout);
                            gw += s.w[c] * dot;
                            gx += s.dwx[c] * dot;
                            gy += s.dwy[c] * dot;
                            if (pval.requires_grad) {
                                pval.grad_ref().row(s.idx[c]).segment(m * d, d) += (a * s.w[c]) * gout;
                            }
                        }
                        if (pw.requires_grad) {
                            pw.grad_ref()(q, slot) += gw;
                        }
                        if (ploc.requires_grad) {
                            ploc.grad_ref()(q, 2 * slot) += a * gx * T(width);
                            ploc.grad_ref()(q, 2 * slot + 1) += a * gy * T(height);
                        }
                    }
                }
            }
        });
}

#define ELTRACK_INSTANTIATE_OPS(T)                                                               \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> scale(const Tensor<T>&, T);                                               \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
    template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> mul_row(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> mul_col(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> matmul_bt(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> transpose(const Tensor<T>&);                                              \
    template Tensor<T> relu(const Tensor<T>&);                                                   \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                \
    template Tensor<T> logit(const Tensor<T>&, T);                                               \
    template Tensor<T> abs(const Tensor<T>&);                                                    \
    template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> clamp_min(const Tensor<T>&, T);                                           \
    template Tensor<T> divide(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> sum(const Tensor<T>&);                                                    \
    template Tensor<T> mean(const Tensor<T>&);                                                   \
    template Tensor<T> row_sum(const Tensor<T>&);                                                \
    template Tensor<T> softmax_rows(const Tensor<T>&);                                           \
    template Tensor<T> layer_norm_rows(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
    template Tensor<T> l2_normalize_rows(const Tensor<T>&, T);                                   \
    template Tensor<T> concat_rows(std::span<const Tensor<T>>);                                  \
    template Tensor<T> concat_cols(std::span<const Tensor<T>>);                                  \
    template Tensor<T> slice_rows(const Tensor<T>&, Index, Index);                               \
    template Tensor<T> slice_cols(const Tensor<T>&, Index, Index);                               \
    template Tensor<T> gather_rows(const Tensor<T>&, std::span<const Index>);                    \
    template Tensor<T> reshape(const Tensor<T>&, Index, Index);                                  \
    template Tensor<T> tile_cols(const Tensor<T>&, Index);                                       \
    template Tensor<T> detach(const Tensor<T>&);                                                 \
    template Tensor<T> im2col(const Tensor<T>&, int, int, int, int, int);                        \
    template Tensor<T> bilinear_sample(const Tensor<T>&, int, int, const Tensor<T>&);            \
    template Tensor<T> deformable_gather(const Tensor<T>&, int, int, int, const Tensor<T>&,      \
                                         const Tensor<T>&);

ELTRACK_INSTANTIATE_OPS(float)
ELTRACK_INSTANTIATE_OPS(double)

}  // namespace ops
}  // namespace eltrack
