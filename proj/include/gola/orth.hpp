#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gola/partition.hpp"

namespace gola {

// Two distinct group indices (0-based). Stored with i < j by sample_pair,
// but any ordering with i != j is accepted.
struct GroupPair {
    std::size_t i = 0;
    std::size_t j = 0;

    friend bool operator==(const GroupPair&, const GroupPair&) = default;
};

enum class Factor { A, B };

struct OrthGradient {
    Matrix A_i;  // g x c_in
    Matrix A_j;
    Matrix B_i;  // c_out x g
    Matrix B_j;
};

struct OrthHeatmap {
    Matrix values;  // n x n, max entry 1 unless all zero
    std::string normalization;
};

struct Histogram {
    std::vector<double> edges;  // bins + 1 entries
    std::vector<std::size_t> counts;
};

// Group slices gathered from full-size factors: rows of A, columns of B.
Matrix gather_rows(const Matrix& A, const IndexSet& members);
Matrix gather_cols(const Matrix& B, const IndexSet& members);

/// Inter-group orthogonality penalty for one pair of groups:
///   sum |A_i^T A_j| + sum |B_i^T B_j|
/// where A_i is the g x c_in row block of group i (channel-space cross-Gram,
/// c_in x c_in) and B_i the c_out x g column block (rank-space cross-Gram, g x g).
double orth_loss(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups, GroupPair pair);
double orth_loss(const GroupedAdapter& grouped, GroupPair pair);

/// Subgradient of orth_loss with sign(0) = 0:
///   dA_i = A_j sign(C_A)^T, dA_j = A_i sign(C_A), and likewise for B.
OrthGradient orth_loss_grad(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups,
                            GroupPair pair);
OrthGradient orth_loss_grad(const GroupedAdapter& grouped, GroupPair pair);

// Sum of orth_loss over every unordered pair. Offline analysis only.
double orth_loss_all_pairs(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups);

// Uniform over the n(n-1)/2 unordered pairs; returns i < j.
GroupPair sample_pair(std::size_t n, std::mt19937_64& rng);

/// Normalized inter-group orthogonality map.
///
/// Every rank vector (row of A, column of B) is scaled to unit L2 norm, then
/// H(i, j) is the mean absolute entry of the same cross-Gram the loss uses.
/// H is finally divided by its largest entry (left as is when all zero).
OrthHeatmap orth_heatmap(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups,
                         Factor factor);
OrthHeatmap orth_heatmap(const GroupedAdapter& grouped, Factor factor);

// Mean of the off-diagonal heatmap entries.
double offdiagonal_mass(const OrthHeatmap& heatmap);

// Singular values of the effective update, descending, truncated to the adapter rank.
Vector singular_spectrum(const AdapterPair& adapter);

// `bins` uniform bins over [0, max(values)]; the last bin is closed.
Histogram spectrum_histogram(const Vector& values, std::size_t bins = 50);

}  // namespace gola
