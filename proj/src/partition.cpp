#include "gola/partition.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace gola {

namespace {

constexpr int kMaxClusterIterations = 100;

void check_partition_parameters(std::size_t r, std::size_t k, std::size_t n) {
    if (k < 1 || k >= r) {
        throw ParameterError("crucial-rank count k=" + std::to_string(k) + " must satisfy 1 <= k < r=" +
                             std::to_string(r));
    }
    if (n < 2) {
        throw ParameterError("group count n=" + std::to_string(n) + " must be at least 2");
    }
    if ((r - k) % n != 0) {
        throw ParameterError("group count n=" + std::to_string(n) + " does not divide r-k=" +
                             std::to_string(r - k) + "; adjust k or n so that n | (r-k)");
    }
}

// k-means++ seeding: first centre uniform, then proportional to squared distance.
std::vector<Eigen::Index> seed_centroids(const Matrix& points, std::size_t n, std::mt19937_64& rng) {
    const Eigen::Index m = points.cols();
    std::vector<Eigen::Index> chosen;
    chosen.reserve(n);
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    chosen.push_back(pick(rng));

    Vector nearest = Vector::Constant(m, std::numeric_limits<double>::infinity());
    while (chosen.size() < n) {
        const auto last = points.col(chosen.back());
        for (Eigen::Index p = 0; p < m; ++p) {
            nearest[p] = std::min(nearest[p], (points.col(p) - last).squaredNorm());
        }
        const double total = nearest.sum();
        Eigen::Index next = -1;
        if (total > 0.0) {
            std::uniform_real_distribution<double> unit(0.0, total);
            const double target = unit(rng);
            double acc = 0.0;
            for (Eigen::Index p = 0; p < m; ++p) {
                acc += nearest[p];
                if (nearest[p] > 0.0 && acc >= target) {
                    next = p;
                    break;
                }
            }
            if (next < 0) {
                for (Eigen::Index p = m - 1; p >= 0; --p) {
                    if (nearest[p] > 0.0) {
                        next = p;
                        break;
                    }
                }
            }
        } else {
            // All remaining points coincide with a centre: take the first unused index.
            for (Eigen::Index p = 0; p < m; ++p) {
                if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) {
                    next = p;
                    break;
                }
            }
        }
        chosen.push_back(next);
    }
    return chosen;
}

// Greedy balanced assignment. Points that lose most by missing their nearest
// centre (largest second-nearest minus nearest cost) pick first.
std::vector<std::size_t> balanced_assign(const Matrix& points, const Matrix& centroids,
                                         std::size_t capacity) {
    const Eigen::Index m = points.cols();
    const Eigen::Index n = centroids.cols();
    Matrix cost(m, n);
    for (Eigen::Index p = 0; p < m; ++p) {
        for (Eigen::Index c = 0; c < n; ++c) {
            cost(p, c) = (points.col(p) - centroids.col(c)).squaredNorm();
        }
    }
    std::vector<double> regret(static_cast<std::size_t>(m));
    for (Eigen::Index p = 0; p < m; ++p) {
        double best = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < n; ++c) {
            const double v = cost(p, c);
            if (v < best) {
                second = best;
                best = v;
            } else if (v < second) {
                second = v;
            }
        }
        regret[static_cast<std::size_t>(p)] = second - best;
    }
    std::vector<std::size_t> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return regret[a] > regret[b]; });

    std::vector<std::size_t> remaining(static_cast<std::size_t>(n), capacity);
    std::vector<std::size_t> assignment(static_cast<std::size_t>(m), 0);
    for (std::size_t p : order) {
        Eigen::Index best = -1;
        for (Eigen::Index c = 0; c < n; ++c) {
            if (remaining[static_cast<std::size_t>(c)] == 0) {
                continue;
            }
            if (best < 0 || cost(static_cast<Eigen::Index>(p), c) < cost(static_cast<Eigen::Index>(p), best)) {
                best = c;
            }
        }
        assignment[p] = static_cast<std::size_t>(best);
        --remaining[static_cast<std::size_t>(best)];
    }
    return assignment;
}

}  // namespace

GroupedAdapter::GroupedAdapter(AdapterPair adapter, RankPartition partition)
    : adapter_(std::move(adapter)), partition_(std::move(partition)) {
    const std::size_t r = adapter_.rank();
    validate_permutation(partition_.sigma, r);
    if (partition_.k < 1 || partition_.k >= r) {
        throw ParameterError("crucial-rank count k=" + std::to_string(partition_.k) +
                             " must satisfy 1 <= k < r=" + std::to_string(r));
    }
    if (!partition_.groups.empty()) {
        if (partition_.groups.size() != partition_.n) {
            throw ValidationError("partition lists " + std::to_string(partition_.groups.size()) +
                                  " groups but n=" + std::to_string(partition_.n));
        }
        validate_groups(partition_.groups, partition_.k, r);
    }
    frozen_mask_.assign(r, false);
    std::fill_n(frozen_mask_.begin(), partition_.k, true);
}

Matrix GroupedAdapter::group_rows_A(std::size_t group) const {
    const IndexSet& members = partition_.groups.at(group);
    Matrix out(static_cast<Eigen::Index>(members.size()), adapter_.A().cols());
    for (std::size_t i = 0; i < members.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = adapter_.A().row(static_cast<Eigen::Index>(members[i]));
    }
    return out;
}

Matrix GroupedAdapter::group_cols_B(std::size_t group) const {
    const IndexSet& members = partition_.groups.at(group);
    Matrix out(adapter_.B().rows(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = adapter_.B().col(static_cast<Eigen::Index>(members[i]));
    }
    return out;
}

void validate_groups(const std::vector<IndexSet>& groups, std::size_t k, std::size_t r) {
    if (groups.empty()) {
        throw ValidationError("partition has no groups");
    }
    const std::size_t size = groups.front().size();
    if (size == 0 || size * groups.size() != r - k) {
        throw ValidationError("groups must split the " + std::to_string(r - k) +
                              " redundant slots into equal non-empty parts");
    }
    std::vector<bool> seen(r, false);
    for (const IndexSet& group : groups) {
        if (group.size() != size) {
            throw ValidationError("groups have unequal sizes");
        }
        for (std::size_t slot : group) {
            if (slot < k || slot >= r) {
                throw ValidationError("group member " + std::to_string(slot) +
                                      " lies outside the redundant slots [" + std::to_string(k) + ", " +
                                      std::to_string(r) + ")");
            }
            if (seen[slot]) {
                throw ValidationError("slot " + std::to_string(slot) + " appears in two groups");
            }
            seen[slot] = true;
        }
    }
}

Matrix center_columns(const Matrix& B) {
    if (B.cols() < 2) {
        throw DegenerateInputError("centering needs at least two rank columns, got " +
                                   std::to_string(B.cols()));
    }
    const Vector mean = B.rowwise().mean();
    return B.colwise() - mean;
}

ImportanceScores rank_importance(const Matrix& B, std::size_t k) {
    const auto c = static_cast<std::size_t>(B.rows());
    const auto r = static_cast<std::size_t>(B.cols());
    if (r < 2) {
        throw DegenerateInputError("importance scoring needs at least two ranks, got " + std::to_string(r));
    }
    if (k < 1 || k > std::min(c, r)) {
        throw ParameterError("reference count k=" + std::to_string(k) + " must lie in [1, min(c, r)=" +
                             std::to_string(std::min(c, r)) + "]");
    }
    if (!B.allFinite()) {
        throw ValidationError("B contains non-finite entries");
    }

    ImportanceScores out;
    out.topk = k;
    out.scores = Vector::Zero(static_cast<Eigen::Index>(r));

    const Matrix centered = center_columns(B);
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * B.norm();
    if (centered.norm() <= tol) {
        out.degenerate = true;
        return out;
    }

    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);
    const auto kk = static_cast<Eigen::Index>(k);
    const Matrix reference = svd.matrixU().leftCols(kk);           // c x k
    Matrix weighted = centered.transpose() * reference;            // r x k
    weighted *= svd.singularValues().head(kk).asDiagonal();
    out.scores = weighted.rowwise().norm();
    return out;
}

Permutation sort_ranks(const ImportanceScores& scores) {
    Permutation sigma = identity_permutation(static_cast<std::size_t>(scores.scores.size()));
    std::stable_sort(sigma.begin(), sigma.end(), [&](std::size_t a, std::size_t b) {
        return scores.scores[static_cast<Eigen::Index>(a)] > scores.scores[static_cast<Eigen::Index>(b)];
    });
    return sigma;
}

GroupedAdapter split_crucial(const AdapterPair& adapter, const Permutation& sigma, std::size_t k) {
    const std::size_t r = adapter.rank();
    if (k < 1 || k >= r) {
        throw ParameterError("crucial-rank count k=" + std::to_string(k) + " must satisfy 1 <= k < r=" +
                             std::to_string(r));
    }
    RankPartition part;
    part.sigma = sigma;
    part.k = k;
    return GroupedAdapter(apply_permutation(adapter, sigma), std::move(part));
}

std::vector<IndexSet> cluster_groups(const Matrix& points, std::size_t n, std::uint64_t seed) {
    const auto m = static_cast<std::size_t>(points.cols());
    if (n < 2) {
        throw ParameterError("group count n=" + std::to_string(n) + " must be at least 2");
    }
    if (m == 0 || m % n != 0) {
        throw ParameterError("group count n=" + std::to_string(n) + " does not divide the " +
                             std::to_string(m) + " redundant ranks; adjust k or n so that n | (r-k)");
    }
    if (!points.allFinite()) {
        throw ValidationError("cluster input contains non-finite entries");
    }
    const std::size_t capacity = m / n;

    std::mt19937_64 rng(seed);
    const auto seeds = seed_centroids(points, n, rng);
    Matrix centroids(points.rows(), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
        centroids.col(static_cast<Eigen::Index>(c)) = points.col(seeds[c]);
    }

    std::vector<std::size_t> assignment;
    for (int iter = 0; iter < kMaxClusterIterations; ++iter) {
        auto next = balanced_assign(points, centroids, capacity);
        const bool fixpoint = next == assignment;
        assignment = std::move(next);
        if (fixpoint) {
            break;
        }
        centroids.setZero();
        for (std::size_t p = 0; p < m; ++p) {
            centroids.col(static_cast<Eigen::Index>(assignment[p])) += points.col(static_cast<Eigen::Index>(p));
        }
        centroids /= static_cast<double>(capacity);
    }

    std::vector<IndexSet> groups(n);
    for (std::size_t p = 0; p < m; ++p) {
        groups[assignment[p]].push_back(p);
    }
    std::sort(groups.begin(), groups.end(),
              [](const IndexSet& a, const IndexSet& b) { return a.front() < b.front(); });
    return groups;
}

GroupedAdapter partition(const AdapterPair& adapter, std::size_t k, std::size_t n, std::uint64_t seed) {
    const std::size_t r = adapter.rank();
    check_partition_parameters(r, k, n);

    const ImportanceScores scores = rank_importance(adapter.B(), k);
    const Permutation sigma = scores.degenerate ? identity_permutation(r) : sort_ranks(scores);
    const AdapterPair permuted = apply_permutation(adapter, sigma);

    const auto redundant = static_cast<Eigen::Index>(r - k);
    std::vector<IndexSet> groups = cluster_groups(permuted.B().rightCols(redundant), n, seed);
    for (IndexSet& group : groups) {
        for (std::size_t& slot : group) {
            slot += k;
        }
    }

    RankPartition part;
    part.sigma = sigma;
    part.k = k;
    part.n = n;
    part.groups = std::move(groups);
    part.seed = seed;
    part.degenerate = scores.degenerate;
    return GroupedAdapter(permuted, std::move(part));
}

GroupedAdapter regroup(const AdapterPair& adapter, const RankPartition& partition, bool already_permuted) {
    if (partition.rank() != adapter.rank()) {
        throw ShapeError("partition covers " + std::to_string(partition.rank()) +
                         " ranks but the adapter has rank " + std::to_string(adapter.rank()));
    }
    if (already_permuted) {
        return GroupedAdapter(adapter, partition);
    }
    return GroupedAdapter(apply_permutation(adapter, partition.sigma), partition);
}

}  // namespace gola
