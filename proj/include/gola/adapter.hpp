#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gola/error.hpp"

namespace gola {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Matrix = MatrixT<double>;
using MatrixF = MatrixT<float>;
using Vector = Eigen::VectorXd;

// 0-based: slot i of a permuted adapter holds original rank perm[i].
using Permutation = std::vector<std::size_t>;

// Throws ValidationError unless `perm` is a bijection on {0..size-1}.
void validate_permutation(const Permutation& perm, std::size_t size);

Permutation identity_permutation(std::size_t size);

/// Frozen base weight W (c_out x c_in) plus a low-rank update B (c_out x r) * A (r x c_in).
///
/// Construction validates shapes, finiteness and r <= min(c_out, c_in); the
/// object is immutable afterwards. Ranks above half the channel count are
/// accepted but reported by exceeds_low_rank_regime() so front-ends can warn.
template <typename Scalar>
class BasicAdapterPair {
public:
    using MatrixType = MatrixT<Scalar>;

    BasicAdapterPair(MatrixType W, MatrixType A, MatrixType B, Scalar scale = Scalar(1))
        : W_(std::move(W)), A_(std::move(A)), B_(std::move(B)), scale_(scale) {
        validate();
    }

    const MatrixType& W() const { return W_; }
    const MatrixType& A() const { return A_; }
    const MatrixType& B() const { return B_; }
    Scalar scale() const { return scale_; }

    std::size_t rank() const { return static_cast<std::size_t>(A_.rows()); }
    std::size_t out_channels() const { return static_cast<std::size_t>(W_.rows()); }
    std::size_t in_channels() const { return static_cast<std::size_t>(W_.cols()); }

    bool exceeds_low_rank_regime() const {
        return 2 * rank() > std::min(out_channels(), in_channels());
    }

    template <typename Other>
    BasicAdapterPair<Other> cast() const {
        return BasicAdapterPair<Other>(W_.template cast<Other>(), A_.template cast<Other>(),
                                       B_.template cast<Other>(), static_cast<Other>(scale_));
    }

    friend bool operator==(const BasicAdapterPair& a, const BasicAdapterPair& b) {
        return a.scale_ == b.scale_ && a.W_.rows() == b.W_.rows() && a.W_.cols() == b.W_.cols() &&
               a.A_.rows() == b.A_.rows() && a.W_ == b.W_ && a.A_ == b.A_ && a.B_ == b.B_;
    }

private:
    void validate() const {
        if (A_.rows() < 1) {
            throw ShapeError("adapter rank must be positive (A has 0 rows)");
        }
        if (B_.cols() != A_.rows()) {
            throw ShapeError("rank axis mismatch: B has " + std::to_string(B_.cols()) +
                             " columns but A has " + std::to_string(A_.rows()) + " rows");
        }
        if (B_.rows() != W_.rows()) {
            throw ShapeError("output axis mismatch: B has " + std::to_string(B_.rows()) +
                             " rows but W has " + std::to_string(W_.rows()));
        }
        if (A_.cols() != W_.cols()) {
            throw ShapeError("input axis mismatch: A has " + std::to_string(A_.cols()) +
                             " columns but W has " + std::to_string(W_.cols()));
        }
        if (rank() > std::min(out_channels(), in_channels())) {
            throw ParameterError("rank " + std::to_string(rank()) + " exceeds min(c_out, c_in) = " +
                                 std::to_string(std::min(out_channels(), in_channels())));
        }
        if (!W_.allFinite() || !A_.allFinite() || !B_.allFinite() || !std::isfinite(scale_)) {
            throw ValidationError("adapter contains non-finite entries");
        }
    }

    MatrixType W_;
    MatrixType A_;
    MatrixType B_;
    Scalar scale_;
};

using AdapterPair = BasicAdapterPair<double>;
using AdapterPairF = BasicAdapterPair<float>;

/// h' = W h + scale * B (A h), applied to each column of `batch` (c_in x m).
template <typename Scalar, typename Derived>
MatrixT<Scalar> forward(const BasicAdapterPair<Scalar>& adapter,
                        const Eigen::MatrixBase<Derived>& batch) {
    if (static_cast<std::size_t>(batch.rows()) != adapter.in_channels()) {
        throw ShapeError("input axis mismatch: batch has " + std::to_string(batch.rows()) +
                         " rows but adapter expects c_in = " +
                         std::to_string(adapter.in_channels()));
    }
    if (batch.cols() < 1) {
        throw ShapeError("batch axis is empty: need at least one column");
    }
    if (!batch.allFinite()) {
        throw ValidationError("feature batch contains non-finite entries");
    }
    MatrixT<Scalar> low = adapter.A() * batch;
    MatrixT<Scalar> out = adapter.W() * batch;
    out.noalias() += adapter.scale() * (adapter.B() * low);
    return out;
}

// W' = W + scale * B A. Inference then runs a plain linear layer.
template <typename Scalar>
MatrixT<Scalar> merge(const BasicAdapterPair<Scalar>& adapter) {
    MatrixT<Scalar> merged = adapter.W();
    merged.noalias() += adapter.scale() * (adapter.B() * adapter.A());
    return merged;
}

template <typename Scalar>
MatrixT<Scalar> effective_update(const BasicAdapterPair<Scalar>& adapter) {
    return adapter.scale() * (adapter.B() * adapter.A());
}

// Rows of A and columns of B reordered together; B A is unchanged.
template <typename Scalar>
BasicAdapterPair<Scalar> apply_permutation(const BasicAdapterPair<Scalar>& adapter,
                                           const Permutation& perm) {
    validate_permutation(perm, adapter.rank());
    MatrixT<Scalar> A(adapter.A().rows(), adapter.A().cols());
    MatrixT<Scalar> B(adapter.B().rows(), adapter.B().cols());
    for (std::size_t slot = 0; slot < perm.size(); ++slot) {
        const auto src = static_cast<Eigen::Index>(perm[slot]);
        const auto dst = static_cast<Eigen::Index>(slot);
        A.row(dst) = adapter.A().row(src);
        B.col(dst) = adapter.B().col(src);
    }
    return BasicAdapterPair<Scalar>(adapter.W(), std::move(A), std::move(B), adapter.scale());
}

}  // namespace gola
