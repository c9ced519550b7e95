#include "maskgae/tape.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace maskgae::num {

// ---------------------------------------------------------------------------
// raw kernels
// ---------------------------------------------------------------------------

namespace {

// Scratch row of doubles, reused across calls within a thread.
thread_local std::vector<double> g_acc_row;

double* acc_row(std::int64_t n) {
    if (static_cast<std::int64_t>(g_acc_row.size()) < n) g_acc_row.resize(n);
    return g_acc_row.data();
}

} // namespace

void mm_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols)
        throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " * " +
                                    b.shape_str() + " -> " + out.shape_str());
    const std::int64_t n = b.cols;
    double* acc = acc_row(n);
    for (std::int64_t i = 0; i < a.rows; ++i) {
        std::fill(acc, acc + n, 0.0);
        const float* arow = a.row_ptr(i);
        for (std::int64_t k = 0; k < a.cols; ++k) {
            const double av = static_cast<double>(arow[k]);
            if (av == 0.0) continue;
            const float* brow = b.row_ptr(k);
            for (std::int64_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        float* orow = out.row_ptr(i);
        for (std::int64_t j = 0; j < n; ++j) orow[j] += static_cast<float>(acc[j]);
    }
}

void mm_nt_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows)
        throw std::invalid_argument("matmul_nt: shape mismatch");
    for (std::int64_t i = 0; i < a.rows; ++i) {
        const float* arow = a.row_ptr(i);
        float* orow = out.row_ptr(i);
        for (std::int64_t j = 0; j < b.rows; ++j) {
            const float* brow = b.row_ptr(j);
            double acc = 0.0;
            for (std::int64_t k = 0; k < a.cols; ++k)
                acc += static_cast<double>(arow[k]) * static_cast<double>(brow[k]);
            orow[j] += static_cast<float>(acc);
        }
    }
}

void mm_tn_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols)
        throw std::invalid_argument("matmul_tn: shape mismatch");
    const std::int64_t n = b.cols;
    double* acc = acc_row(n);
    for (std::int64_t i = 0; i < a.cols; ++i) {
        std::fill(acc, acc + n, 0.0);
        for (std::int64_t k = 0; k < a.rows; ++k) {
            const double av = static_cast<double>(a(k, i));
            if (av == 0.0) continue;
            const float* brow = b.row_ptr(k);
            for (std::int64_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        float* orow = out.row_ptr(i);
        for (std::int64_t j = 0; j < n; ++j) orow[j] += static_cast<float>(acc[j]);
    }
}

void spmm_accumulate(const SparseMatrix& s, const DenseMatrix& x, DenseMatrix& out) {
    if (s.cols != x.rows || out.rows != s.rows || out.cols != x.cols)
        throw std::invalid_argument("spmm: shape mismatch");
    const std::int64_t n = x.cols;
    double* acc = acc_row(n);
    for (std::int64_t i = 0; i < s.rows; ++i) {
        std::fill(acc, acc + n, 0.0);
        for (std::int64_t p = s.offsets[i]; p < s.offsets[i + 1]; ++p) {
            const double v = static_cast<double>(s.values[p]);
            const float* xrow = x.row_ptr(s.col_idx[p]);
            for (std::int64_t j = 0; j < n; ++j) acc[j] += v * static_cast<double>(xrow[j]);
        }
        float* orow = out.row_ptr(i);
        for (std::int64_t j = 0; j < n; ++j) orow[j] += static_cast<float>(acc[j]);
    }
}

void spmm_t_accumulate(const SparseMatrix& s, const DenseMatrix& x, DenseMatrix& out) {
    if (s.rows != x.rows || out.rows != s.cols || out.cols != x.cols)
        throw std::invalid_argument("spmm_t: shape mismatch");
    // Scatter into a 64-bit buffer so the reduction order does not leak
    // rounding into the 32-bit result.
    std::vector<double> acc(static_cast<std::size_t>(out.rows * out.cols), 0.0);
    const std::int64_t n = x.cols;
    for (std::int64_t i = 0; i < s.rows; ++i) {
        const float* xrow = x.row_ptr(i);
        for (std::int64_t p = s.offsets[i]; p < s.offsets[i + 1]; ++p) {
            const double v = static_cast<double>(s.values[p]);
            double* arow = acc.data() + static_cast<std::int64_t>(s.col_idx[p]) * n;
            for (std::int64_t j = 0; j < n; ++j) arow[j] += v * static_cast<double>(xrow[j]);
        }
    }
    for (std::int64_t i = 0; i < out.size(); ++i)
        out.data[static_cast<std::size_t>(i)] += static_cast<float>(acc[static_cast<std::size_t>(i)]);
}

float stable_sigmoid(float x) {
    if (x >= 0.0f) {
        const float z = std::exp(-x);
        return 1.0f / (1.0f + z);
    }
    const float z = std::exp(x);
    return z / (1.0f + z);
}

float softplus(float x) {
    // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    return std::max(x, 0.0f) + std::log1p(std::exp(-std::abs(x)));
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

ValueRef Tape::push(DenseMatrix value, bool requires_grad, std::function<void(Tape&)> fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = requires_grad ? std::move(fn) : std::function<void(Tape&)>{};
    nodes_.push_back(std::move(n));
    return ValueRef{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::check_ref(ValueRef v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::invalid_argument("Tape: invalid value handle");
}

Tape::Node& Tape::node(ValueRef v) {
    check_ref(v);
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(ValueRef v) const {
    check_ref(v);
    return nodes_[static_cast<std::size_t>(v.id)];
}

DenseMatrix& Tape::grad_buffer(ValueRef v) {
    Node& n = node(v);
    if (!n.grad_alloc) {
        n.grad = DenseMatrix::zeros(n.value.rows, n.value.cols);
        n.grad_alloc = true;
    }
    return n.grad;
}

const DenseMatrix& Tape::value(ValueRef v) const { return node(v).value; }

bool Tape::requires_grad(ValueRef v) const { return node(v).requires_grad; }

const DenseMatrix& Tape::grad(ValueRef v) const {
    const Node& n = node(v);
    if (!n.grad_alloc) throw std::logic_error("Tape::grad: node has no gradient (backward not run or unreachable)");
    return n.grad;
}

DenseMatrix Tape::grad_or_zeros(ValueRef v) const {
    const Node& n = node(v);
    if (n.grad_alloc) return n.grad;
    return DenseMatrix::zeros(n.value.rows, n.value.cols);
}

ValueRef Tape::leaf(DenseMatrix value, bool requires_grad) {
    return push(std::move(value), requires_grad, {});
}

ValueRef Tape::spmm(const SparseMatrix& a, ValueRef x) {
    const DenseMatrix& xv = value(x);
    if (a.cols != xv.rows)
        throw std::invalid_argument("spmm: shape mismatch " + std::to_string(a.rows) + "x" +
                                    std::to_string(a.cols) + " * " + xv.shape_str());
    DenseMatrix y = DenseMatrix::zeros(a.rows, xv.cols);
    spmm_accumulate(a, xv, y);
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        // Copy of the CSR structure keeps the closure self-contained.
        node(out).backprop = [a, x, out](Tape& t) {
            spmm_t_accumulate(a, t.grad(out), t.grad_buffer(x));
        };
    }
    return out;
}

ValueRef Tape::matmul(ValueRef x, ValueRef w) {
    const DenseMatrix& xv = value(x);
    const DenseMatrix& wv = value(w);
    if (xv.cols != wv.rows)
        throw std::invalid_argument("matmul: shape mismatch " + xv.shape_str() + " * " +
                                    wv.shape_str());
    DenseMatrix y = DenseMatrix::zeros(xv.rows, wv.cols);
    mm_accumulate(xv, wv, y);
    const bool rg = requires_grad(x) || requires_grad(w);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, w, out](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            if (t.requires_grad(x)) mm_nt_accumulate(gy, t.value(w), t.grad_buffer(x));
            if (t.requires_grad(w)) mm_tn_accumulate(t.value(x), gy, t.grad_buffer(w));
        };
    }
    return out;
}

ValueRef Tape::add_row_bias(ValueRef x, ValueRef b) {
    const DenseMatrix& xv = value(x);
    const DenseMatrix& bv = value(b);
    if (bv.rows != 1 || bv.cols != xv.cols)
        throw std::invalid_argument("add_row_bias: bias must be 1x" + std::to_string(xv.cols) +
                                    ", got " + bv.shape_str());
    DenseMatrix y(xv.rows, xv.cols);
    for (std::int64_t i = 0; i < xv.rows; ++i)
        for (std::int64_t j = 0; j < xv.cols; ++j) y(i, j) = xv(i, j) + bv(0, j);
    const bool rg = requires_grad(x) || requires_grad(b);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, b, out](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            if (t.requires_grad(x)) {
                DenseMatrix& gx = t.grad_buffer(x);
                for (std::int64_t i = 0; i < gy.size(); ++i)
                    gx.data[static_cast<std::size_t>(i)] += gy.data[static_cast<std::size_t>(i)];
            }
            if (t.requires_grad(b)) {
                DenseMatrix& gb = t.grad_buffer(b);
                for (std::int64_t j = 0; j < gy.cols; ++j) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < gy.rows; ++i) acc += static_cast<double>(gy(i, j));
                    gb(0, j) += static_cast<float>(acc);
                }
            }
        };
    }
    return out;
}

ValueRef Tape::hadamard(ValueRef x, ValueRef y) {
    const DenseMatrix& xv = value(x);
    const DenseMatrix& yv = value(y);
    if (!xv.same_shape(yv))
        throw std::invalid_argument("hadamard: shape mismatch " + xv.shape_str() + " vs " +
                                    yv.shape_str());
    DenseMatrix z(xv.rows, xv.cols);
    for (std::int64_t i = 0; i < xv.size(); ++i)
        z.data[static_cast<std::size_t>(i)] =
            xv.data[static_cast<std::size_t>(i)] * yv.data[static_cast<std::size_t>(i)];
    const bool rg = requires_grad(x) || requires_grad(y);
    ValueRef out = push(std::move(z), rg, {});
    if (rg) {
        node(out).backprop = [x, y, out](Tape& t) {
            const DenseMatrix& gz = t.grad(out);
            if (t.requires_grad(x)) {
                DenseMatrix& gx = t.grad_buffer(x);
                const DenseMatrix& yv2 = t.value(y);
                for (std::int64_t i = 0; i < gz.size(); ++i)
                    gx.data[static_cast<std::size_t>(i)] +=
                        gz.data[static_cast<std::size_t>(i)] * yv2.data[static_cast<std::size_t>(i)];
            }
            if (t.requires_grad(y)) {
                DenseMatrix& gy = t.grad_buffer(y);
                const DenseMatrix& xv2 = t.value(x);
                for (std::int64_t i = 0; i < gz.size(); ++i)
                    gy.data[static_cast<std::size_t>(i)] +=
                        gz.data[static_cast<std::size_t>(i)] * xv2.data[static_cast<std::size_t>(i)];
            }
        };
    }
    return out;
}

ValueRef Tape::concat_cols(std::span<const ValueRef> xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::int64_t rows = value(xs[0]).rows;
    std::int64_t total = 0;
    bool rg = false;
    for (ValueRef v : xs) {
        const DenseMatrix& m = value(v);
        if (m.rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
        total += m.cols;
        rg = rg || requires_grad(v);
    }
    DenseMatrix y(rows, total);
    std::int64_t off = 0;
    for (ValueRef v : xs) {
        const DenseMatrix& m = value(v);
        for (std::int64_t i = 0; i < rows; ++i)
            std::memcpy(y.row_ptr(i) + off, m.row_ptr(i), sizeof(float) * static_cast<std::size_t>(m.cols));
        off += m.cols;
    }
    std::vector<ValueRef> inputs(xs.begin(), xs.end());
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [inputs, out](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            std::int64_t o = 0;
            for (ValueRef v : inputs) {
                const std::int64_t c = t.value(v).cols;
                if (t.requires_grad(v)) {
                    DenseMatrix& gx = t.grad_buffer(v);
                    for (std::int64_t i = 0; i < gy.rows; ++i)
                        for (std::int64_t j = 0; j < c; ++j) gx(i, j) += gy(i, o + j);
                }
                o += c;
            }
        };
    }
    return out;
}

ValueRef Tape::row_sum(ValueRef x) {
    const DenseMatrix& xv = value(x);
    DenseMatrix y(xv.rows, 1);
    for (std::int64_t i = 0; i < xv.rows; ++i) {
        double acc = 0.0;
        const float* r = xv.row_ptr(i);
        for (std::int64_t j = 0; j < xv.cols; ++j) acc += static_cast<double>(r[j]);
        y(i, 0) = static_cast<float>(acc);
    }
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, out](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            DenseMatrix& gx = t.grad_buffer(x);
            for (std::int64_t i = 0; i < gx.rows; ++i) {
                const float g = gy(i, 0);
                float* r = gx.row_ptr(i);
                for (std::int64_t j = 0; j < gx.cols; ++j) r[j] += g;
            }
        };
    }
    return out;
}

ValueRef Tape::gather_rows(ValueRef x, std::vector<std::int32_t> index) {
    const DenseMatrix& xv = value(x);
    for (std::int32_t i : index)
        if (i < 0 || i >= xv.rows)
            throw std::out_of_range("gather_rows: index " + std::to_string(i) + " out of range");
    DenseMatrix y(static_cast<std::int64_t>(index.size()), xv.cols);
    for (std::size_t e = 0; e < index.size(); ++e)
        std::memcpy(y.row_ptr(static_cast<std::int64_t>(e)), xv.row_ptr(index[e]),
                    sizeof(float) * static_cast<std::size_t>(xv.cols));
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        auto idx = std::make_shared<std::vector<std::int32_t>>(std::move(index));
        node(out).backprop = [x, out, idx](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            DenseMatrix& gx = t.grad_buffer(x);
            for (std::size_t e = 0; e < idx->size(); ++e) {
                float* dst = gx.row_ptr((*idx)[e]);
                const float* src = gy.row_ptr(static_cast<std::int64_t>(e));
                for (std::int64_t j = 0; j < gx.cols; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

ValueRef Tape::elu(ValueRef x) {
    const DenseMatrix& xv = value(x);
    DenseMatrix y(xv.rows, xv.cols);
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        const float t = xv.data[static_cast<std::size_t>(i)];
        y.data[static_cast<std::size_t>(i)] = t >= 0.0f ? t : std::expm1(t);
    }
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, out](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            const DenseMatrix& yv = t.value(out);
            DenseMatrix& gx = t.grad_buffer(x);
            for (std::int64_t i = 0; i < gy.size(); ++i) {
                const float yi = yv.data[static_cast<std::size_t>(i)];
                // d elu = 1 for t >= 0 (y >= 0), else e^t = y + 1
                const float d = yi >= 0.0f ? 1.0f : yi + 1.0f;
                gx.data[static_cast<std::size_t>(i)] += gy.data[static_cast<std::size_t>(i)] * d;
            }
        };
    }
    return out;
}

ValueRef Tape::sigmoid(ValueRef x) {
    const DenseMatrix& xv = value(x);
    DenseMatrix y(xv.rows, xv.cols);
    for (std::int64_t i = 0; i < xv.size(); ++i)
        y.data[static_cast<std::size_t>(i)] = stable_sigmoid(xv.data[static_cast<std::size_t>(i)]);
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, out](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            const DenseMatrix& yv = t.value(out);
            DenseMatrix& gx = t.grad_buffer(x);
            for (std::int64_t i = 0; i < gy.size(); ++i) {
                const float s = yv.data[static_cast<std::size_t>(i)];
                gx.data[static_cast<std::size_t>(i)] +=
                    gy.data[static_cast<std::size_t>(i)] * s * (1.0f - s);
            }
        };
    }
    return out;
}

ValueRef Tape::batchnorm_train(ValueRef x, ValueRef gamma, ValueRef beta, float eps) {
    const DenseMatrix& xv = value(x);
    const DenseMatrix& gv = value(gamma);
    const DenseMatrix& bv = value(beta);
    if (xv.rows < 2) throw std::invalid_argument("batchnorm_train: requires at least 2 rows");
    if (gv.rows != 1 || gv.cols != xv.cols || bv.rows != 1 || bv.cols != xv.cols)
        throw std::invalid_argument("batchnorm_train: gamma/beta must be 1x" +
                                    std::to_string(xv.cols));

    const std::int64_t n = xv.rows, c = xv.cols;
    auto xhat = std::make_shared<DenseMatrix>(n, c);
    auto inv_std = std::make_shared<std::vector<float>>(static_cast<std::size_t>(c));
    DenseMatrix y(n, c);
    for (std::int64_t j = 0; j < c; ++j) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < n; ++i) mean += static_cast<double>(xv(i, j));
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(xv(i, j)) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n); // biased batch variance
        const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
        (*inv_std)[static_cast<std::size_t>(j)] = static_cast<float>(is);
        for (std::int64_t i = 0; i < n; ++i) {
            const float xh = static_cast<float>((static_cast<double>(xv(i, j)) - mean) * is);
            (*xhat)(i, j) = xh;
            y(i, j) = gv(0, j) * xh + bv(0, j);
        }
    }
    const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, gamma, beta, out, xhat, inv_std](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            const std::int64_t n2 = gy.rows, c2 = gy.cols;
            const DenseMatrix& gmv = t.value(gamma);
            for (std::int64_t j = 0; j < c2; ++j) {
                double sum_gy = 0.0, sum_gy_xhat = 0.0;
                for (std::int64_t i = 0; i < n2; ++i) {
                    sum_gy += static_cast<double>(gy(i, j));
                    sum_gy_xhat += static_cast<double>(gy(i, j)) * static_cast<double>((*xhat)(i, j));
                }
                if (t.requires_grad(beta))
                    t.grad_buffer(beta)(0, j) += static_cast<float>(sum_gy);
                if (t.requires_grad(gamma))
                    t.grad_buffer(gamma)(0, j) += static_cast<float>(sum_gy_xhat);
                if (t.requires_grad(x)) {
                    DenseMatrix& gx = t.grad_buffer(x);
                    const double g = static_cast<double>(gmv(0, j));
                    const double is = static_cast<double>((*inv_std)[static_cast<std::size_t>(j)]);
                    const double mean_gy = sum_gy / static_cast<double>(n2);
                    const double mean_gy_xhat = sum_gy_xhat / static_cast<double>(n2);
                    for (std::int64_t i = 0; i < n2; ++i) {
                        const double xh = static_cast<double>((*xhat)(i, j));
                        gx(i, j) += static_cast<float>(
                            g * is * (static_cast<double>(gy(i, j)) - mean_gy - xh * mean_gy_xhat));
                    }
                }
            }
        };
    }
    return out;
}

ValueRef Tape::dropout(ValueRef x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (rate == 0.0) return x;
    const DenseMatrix& xv = value(x);
    auto mask = std::make_shared<std::vector<float>>(static_cast<std::size_t>(xv.size()));
    const float scale = static_cast<float>(1.0 / (1.0 - rate));
    DenseMatrix y(xv.rows, xv.cols);
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        const float m = rng.uniform_real() >= rate ? scale : 0.0f;
        (*mask)[static_cast<std::size_t>(i)] = m;
        y.data[static_cast<std::size_t>(i)] = xv.data[static_cast<std::size_t>(i)] * m;
    }
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [x, out, mask](Tape& t) {
            const DenseMatrix& gy = t.grad(out);
            DenseMatrix& gx = t.grad_buffer(x);
            for (std::int64_t i = 0; i < gy.size(); ++i)
                gx.data[static_cast<std::size_t>(i)] +=
                    gy.data[static_cast<std::size_t>(i)] * (*mask)[static_cast<std::size_t>(i)];
        };
    }
    return out;
}

ValueRef Tape::bce_with_logits_mean(ValueRef logits, bool positive) {
    const DenseMatrix& lv = value(logits);
    if (lv.size() == 0) throw std::invalid_argument("bce_with_logits_mean: empty logits");
    double acc = 0.0;
    for (std::int64_t i = 0; i < lv.size(); ++i) {
        const float x = lv.data[static_cast<std::size_t>(i)];
        // -log sigmoid(x) = softplus(-x); -log(1 - sigmoid(x)) = softplus(x)
        acc += static_cast<double>(positive ? softplus(-x) : softplus(x));
    }
    DenseMatrix y(1, 1);
    y(0, 0) = static_cast<float>(acc / static_cast<double>(lv.size()));
    const bool rg = requires_grad(logits);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [logits, out, positive](Tape& t) {
            const float g = t.grad(out)(0, 0);
            const DenseMatrix& lv2 = t.value(logits);
            DenseMatrix& gl = t.grad_buffer(logits);
            const float inv_n = 1.0f / static_cast<float>(lv2.size());
            for (std::int64_t i = 0; i < lv2.size(); ++i) {
                const float s = stable_sigmoid(lv2.data[static_cast<std::size_t>(i)]);
                const float d = positive ? (s - 1.0f) : s;
                gl.data[static_cast<std::size_t>(i)] += g * d * inv_n;
            }
        };
    }
    return out;
}

ValueRef Tape::mse_mean(ValueRef x, std::vector<float> target) {
    const DenseMatrix& xv = value(x);
    if (static_cast<std::size_t>(xv.size()) != target.size())
        throw std::invalid_argument("mse_mean: length mismatch (" + std::to_string(xv.size()) +
                                    " vs " + std::to_string(target.size()) + ")");
    double acc = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        const double d = static_cast<double>(xv.data[static_cast<std::size_t>(i)]) -
                         static_cast<double>(target[static_cast<std::size_t>(i)]);
        acc += d * d;
    }
    DenseMatrix y(1, 1);
    y(0, 0) = static_cast<float>(acc / static_cast<double>(xv.size()));
    const bool rg = requires_grad(x);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        auto tgt = std::make_shared<std::vector<float>>(std::move(target));
        node(out).backprop = [x, out, tgt](Tape& t) {
            const float g = t.grad(out)(0, 0);
            const DenseMatrix& xv2 = t.value(x);
            DenseMatrix& gx = t.grad_buffer(x);
            const float inv_n = 1.0f / static_cast<float>(xv2.size());
            for (std::int64_t i = 0; i < xv2.size(); ++i)
                gx.data[static_cast<std::size_t>(i)] +=
                    g * 2.0f *
                    (xv2.data[static_cast<std::size_t>(i)] - (*tgt)[static_cast<std::size_t>(i)]) *
                    inv_n;
        };
    }
    return out;
}

ValueRef Tape::softmax_cross_entropy_mean(ValueRef logits, std::vector<std::int32_t> labels) {
    const DenseMatrix& lv = value(logits);
    if (static_cast<std::size_t>(lv.rows) != labels.size())
        throw std::invalid_argument("softmax_cross_entropy_mean: label count mismatch");
    for (std::int32_t y : labels)
        if (y < 0 || y >= lv.cols)
            throw std::out_of_range("softmax_cross_entropy_mean: label out of range");

    auto probs = std::make_shared<DenseMatrix>(lv.rows, lv.cols);
    double acc = 0.0;
    for (std::int64_t i = 0; i < lv.rows; ++i) {
        const float* r = lv.row_ptr(i);
        double mx = static_cast<double>(r[0]);
        for (std::int64_t j = 1; j < lv.cols; ++j) mx = std::max(mx, static_cast<double>(r[j]));
        double z = 0.0;
        for (std::int64_t j = 0; j < lv.cols; ++j) z += std::exp(static_cast<double>(r[j]) - mx);
        const double logz = std::log(z) + mx;
        for (std::int64_t j = 0; j < lv.cols; ++j)
            (*probs)(i, j) = static_cast<float>(std::exp(static_cast<double>(r[j]) - logz));
        acc += logz - static_cast<double>(r[labels[static_cast<std::size_t>(i)]]);
    }
    DenseMatrix y(1, 1);
    y(0, 0) = static_cast<float>(acc / static_cast<double>(lv.rows));
    const bool rg = requires_grad(logits);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        auto lab = std::make_shared<std::vector<std::int32_t>>(std::move(labels));
        node(out).backprop = [logits, out, probs, lab](Tape& t) {
            const float g = t.grad(out)(0, 0);
            DenseMatrix& gl = t.grad_buffer(logits);
            const float inv_n = 1.0f / static_cast<float>(gl.rows);
            for (std::int64_t i = 0; i < gl.rows; ++i) {
                for (std::int64_t j = 0; j < gl.cols; ++j) {
                    float d = (*probs)(i, j);
                    if (j == (*lab)[static_cast<std::size_t>(i)]) d -= 1.0f;
                    gl(i, j) += g * d * inv_n;
                }
            }
        };
    }
    return out;
}

ValueRef Tape::add_scaled(ValueRef a, ValueRef b, double alpha) {
    const DenseMatrix& av = value(a);
    const DenseMatrix& bv = value(b);
    if (av.rows != 1 || av.cols != 1 || bv.rows != 1 || bv.cols != 1)
        throw std::invalid_argument("add_scaled: expects two scalars");
    DenseMatrix y(1, 1);
    y(0, 0) = static_cast<float>(static_cast<double>(av(0, 0)) +
                                 alpha * static_cast<double>(bv(0, 0)));
    const bool rg = requires_grad(a) || requires_grad(b);
    ValueRef out = push(std::move(y), rg, {});
    if (rg) {
        node(out).backprop = [a, b, out, alpha](Tape& t) {
            const float g = t.grad(out)(0, 0);
            if (t.requires_grad(a)) t.grad_buffer(a)(0, 0) += g;
            if (t.requires_grad(b)) t.grad_buffer(b)(0, 0) += static_cast<float>(alpha) * g;
        };
    }
    return out;
}

void Tape::backward(ValueRef loss) {
    const Node& ln = node(loss);
    if (ln.value.rows != 1 || ln.value.cols != 1)
        throw std::invalid_argument("backward: loss must be a 1x1 scalar, got " +
                                    ln.value.shape_str());
    if (consumed_) throw std::logic_error("backward: tape already consumed");
    if (!ln.requires_grad)
        throw std::logic_error("backward: loss does not depend on any parameter");
    consumed_ = true;
    grad_buffer(loss)(0, 0) = 1.0f;
    for (std::int32_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        // Only nodes whose gradient buffer was reached participate.
        if (n.grad_alloc && n.backprop) n.backprop(*this);
    }
}

} // namespace maskgae::num
