#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "maskgae/dense.hpp"
#include "maskgae/rng.hpp"

namespace maskgae::num {

class Tape;

// Handle to a value recorded on a Tape.
struct ValueRef {
    std::int32_t id{-1};
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff record. Operations append nodes in topological order;
// backward() walks the record in reverse exactly once. A Tape is single-owner
// and not shareable across threads; independent tapes may run in parallel.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // --- leaves ------------------------------------------------------------
    ValueRef leaf(DenseMatrix value, bool requires_grad);

    // --- recorded operations ------------------------------------------------
    // y = a * x with a held constant; gradient flows to x only.
    ValueRef spmm(const SparseMatrix& a, ValueRef x);
    ValueRef matmul(ValueRef x, ValueRef w);
    // y[i,j] = x[i,j] + b[0,j], b is 1 x cols.
    ValueRef add_row_bias(ValueRef x, ValueRef b);
    ValueRef hadamard(ValueRef x, ValueRef y);
    ValueRef concat_cols(std::span<const ValueRef> xs);
    // y[i,0] = sum_j x[i,j].
    ValueRef row_sum(ValueRef x);
    // Gathers rows of x by index; backward scatter-adds.
    ValueRef gather_rows(ValueRef x, std::vector<std::int32_t> index);

    ValueRef elu(ValueRef x);        // alpha = 1
    ValueRef sigmoid(ValueRef x);
    // Column-wise batch normalization over the row dimension using batch
    // statistics (train mode). gamma/beta are 1 x cols. Requires rows >= 2.
    ValueRef batchnorm_train(ValueRef x, ValueRef gamma, ValueRef beta, float eps = 1e-5f);
    // Inverted dropout; records a mask drawn from rng. rate in [0,1).
    ValueRef dropout(ValueRef x, double rate, Rng& rng);

    // --- scalar reductions (1x1 outputs) -------------------------------------
    // mean over entries of -log(sigmoid(x)) if positive, else -log(1-sigmoid(x)),
    // computed in the log-sum-exp stable form.
    ValueRef bce_with_logits_mean(ValueRef logits, bool positive);
    // mean over entries of (x - target)^2; target is a constant.
    ValueRef mse_mean(ValueRef x, std::vector<float> target);
    // mean over rows of -log softmax(logits)[label]; labels are constant.
    ValueRef softmax_cross_entropy_mean(ValueRef logits, std::vector<std::int32_t> labels);
    // y = a + alpha * b, both scalars.
    ValueRef add_scaled(ValueRef a, ValueRef b, double alpha);

    // --- access --------------------------------------------------------------
    // References stay valid while the tape lives (node storage never moves).
    const DenseMatrix& value(ValueRef v) const;
    bool requires_grad(ValueRef v) const;
    // Gradient of a node after backward(); throws if backward has not run.
    const DenseMatrix& grad(ValueRef v) const;
    // Gradient if the node was reached, otherwise a zero matrix of its shape.
    DenseMatrix grad_or_zeros(ValueRef v) const;

    // Accumulates gradients for every parameter leaf reachable from `loss`.
    // `loss` must be a 1x1 value recorded on this tape; a tape can be
    // backwarded once.
    void backward(ValueRef loss);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        DenseMatrix value;
        DenseMatrix grad;                  // allocated lazily on first reach
        bool requires_grad{false};
        bool grad_alloc{false};
        std::function<void(Tape&)> backprop; // empty for leaves / constant nodes
    };

    std::deque<Node> nodes_;
    bool consumed_{false};

    ValueRef push(DenseMatrix value, bool requires_grad, std::function<void(Tape&)> fn);
    Node& node(ValueRef v);
    const Node& node(ValueRef v) const;
    // Returns the gradient buffer of v, allocating zeros on first use.
    DenseMatrix& grad_buffer(ValueRef v);
    void check_ref(ValueRef v) const;
};

// --- raw kernels (shared with inference paths and tests) ---------------------
// All accumulate in 64-bit and write 32-bit results.

// out += a * b   (rows_a x k) * (k x cols_b)
void mm_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out += a * b^T (rows_a x k) * (cols_b x k)^T
void mm_nt_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out += a^T * b (k x rows_out)^T * (k x cols_b)
void mm_tn_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out += s * x
void spmm_accumulate(const SparseMatrix& s, const DenseMatrix& x, DenseMatrix& out);
// out += s^T * x
void spmm_t_accumulate(const SparseMatrix& s, const DenseMatrix& x, DenseMatrix& out);

float stable_sigmoid(float x);
float softplus(float x);

} // namespace maskgae::num
