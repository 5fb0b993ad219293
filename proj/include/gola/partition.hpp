#pragma once

#include <cstdint>
#include <vector>

#include "gola/adapter.hpp"

namespace gola {

using IndexSet = std::vector<std::size_t>;

struct ImportanceScores {
    Vector scores;        // one non-negative entry per rank
    std::size_t topk = 0; // number of principal directions used as reference
    bool degenerate = false;  // centered B was zero; every score is 0
};

/// Sort permutation, crucial count and the balanced redundant groups.
///
/// `sigma` maps sorted slot -> original rank. Group members are sorted-slot
/// positions in [k, r), so they index directly into the permuted adapter.
struct RankPartition {
    Permutation sigma;
    std::size_t k = 0;
    std::size_t n = 0;
    std::vector<IndexSet> groups;
    std::uint64_t seed = 0;
    bool degenerate = false;

    std::size_t rank() const { return sigma.size(); }
    std::size_t group_size() const { return n == 0 ? 0 : (rank() - k) / n; }

    friend bool operator==(const RankPartition&, const RankPartition&) = default;
};

/// An adapter already permuted into sorted-slot order, with its partition.
///
/// Slots [0, k) are the frozen crucial ranks; the remaining slots are split
/// into `partition.groups`. Before cluster_groups has run `groups` is empty.
class GroupedAdapter {
public:
    GroupedAdapter(AdapterPair adapter, RankPartition partition);

    const AdapterPair& adapter() const { return adapter_; }
    const RankPartition& partition() const { return partition_; }
    const std::vector<bool>& frozen_mask() const { return frozen_mask_; }
    std::size_t group_count() const { return partition_.groups.size(); }

    // Rows of A belonging to group i (g x c_in).
    Matrix group_rows_A(std::size_t group) const;
    // Columns of B belonging to group i (c_out x g).
    Matrix group_cols_B(std::size_t group) const;

private:
    AdapterPair adapter_;
    RankPartition partition_;
    std::vector<bool> frozen_mask_;
};

// Throws ValidationError unless the groups are disjoint, equal-sized and
// cover [k, r) exactly.
void validate_groups(const std::vector<IndexSet>& groups, std::size_t k, std::size_t r);

// Subtracts the mean rank column from every column of B.
Matrix center_columns(const Matrix& B);

/// Importance of each rank (column of B).
///
/// Centers B across its columns, takes the SVD of the result and projects
/// every centered rank vector onto the top-k left singular directions,
/// weighting coordinate j by sigma_j. The score of a rank is the L2 norm of
/// its weighted projection.
ImportanceScores rank_importance(const Matrix& B, std::size_t k);

// Descending by score; ties keep ascending original index.
Permutation sort_ranks(const ImportanceScores& scores);

// Permutes the adapter and marks the first k slots as frozen. Groups are left empty.
GroupedAdapter split_crucial(const AdapterPair& adapter, const Permutation& sigma, std::size_t k);

/// Capacity-constrained k-means over the columns of `points` (c x m).
///
/// Returns n disjoint index sets of exactly m/n column indices each, ordered
/// by their smallest member. Output depends only on (points, n, seed).
std::vector<IndexSet> cluster_groups(const Matrix& points, std::size_t n, std::uint64_t seed);

// Full offline pipeline: score B, sort, split off k crucial ranks, cluster the rest into n groups.
GroupedAdapter partition(const AdapterPair& adapter, std::size_t k, std::size_t n,
                         std::uint64_t seed);

// Builds a GroupedAdapter from a partition computed earlier; the adapter is
// permuted by `partition.sigma` unless `already_permuted` is set.
GroupedAdapter regroup(const AdapterPair& adapter, const RankPartition& partition,
                       bool already_permuted);

}  // namespace gola
