#include "gola/orth.hpp"

#include <algorithm>
#include <cmath>

namespace gola {

namespace {

void check_pair(GroupPair pair, std::size_t n) {
    if (pair.i == pair.j) {
        throw ParameterError("group pair must name two distinct groups, got (" + std::to_string(pair.i) +
                             ", " + std::to_string(pair.j) + ")");
    }
    if (pair.i >= n || pair.j >= n) {
        throw ParameterError("group pair (" + std::to_string(pair.i) + ", " + std::to_string(pair.j) +
                             ") out of range for " + std::to_string(n) + " groups");
    }
}

Matrix sign_of(const Matrix& m) {
    return m.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
}

Matrix unit_rows(Matrix m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double norm = m.row(r).norm();
        if (norm > 0.0) {
            m.row(r) /= norm;
        }
    }
    return m;
}

Matrix unit_cols(Matrix m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double norm = m.col(c).norm();
        if (norm > 0.0) {
            m.col(c) /= norm;
        }
    }
    return m;
}

}  // namespace

Matrix gather_rows(const Matrix& A, const IndexSet& members) {
    Matrix out(static_cast<Eigen::Index>(members.size()), A.cols());
    for (std::size_t i = 0; i < members.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = A.row(static_cast<Eigen::Index>(members[i]));
    }
    return out;
}

Matrix gather_cols(const Matrix& B, const IndexSet& members) {
    Matrix out(B.rows(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = B.col(static_cast<Eigen::Index>(members[i]));
    }
    return out;
}

double orth_loss(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups, GroupPair pair) {
    check_pair(pair, groups.size());
    const Matrix Ai = gather_rows(A, groups[pair.i]);
    const Matrix Aj = gather_rows(A, groups[pair.j]);
    const Matrix Bi = gather_cols(B, groups[pair.i]);
    const Matrix Bj = gather_cols(B, groups[pair.j]);
    return (Ai.transpose() * Aj).cwiseAbs().sum() + (Bi.transpose() * Bj).cwiseAbs().sum();
}

double orth_loss(const GroupedAdapter& grouped, GroupPair pair) {
    return orth_loss(grouped.adapter().A(), grouped.adapter().B(), grouped.partition().groups, pair);
}

OrthGradient orth_loss_grad(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups,
                            GroupPair pair) {
    check_pair(pair, groups.size());
    const Matrix Ai = gather_rows(A, groups[pair.i]);
    const Matrix Aj = gather_rows(A, groups[pair.j]);
    const Matrix Bi = gather_cols(B, groups[pair.i]);
    const Matrix Bj = gather_cols(B, groups[pair.j]);
    const Matrix signA = sign_of(Ai.transpose() * Aj);
    const Matrix signB = sign_of(Bi.transpose() * Bj);

    OrthGradient grad;
    grad.A_i = Aj * signA.transpose();
    grad.A_j = Ai * signA;
    grad.B_i = Bj * signB.transpose();
    grad.B_j = Bi * signB;
    return grad;
}

OrthGradient orth_loss_grad(const GroupedAdapter& grouped, GroupPair pair) {
    return orth_loss_grad(grouped.adapter().A(), grouped.adapter().B(), grouped.partition().groups, pair);
}

double orth_loss_all_pairs(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups) {
    double total = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            total += orth_loss(A, B, groups, {i, j});
        }
    }
    return total;
}

GroupPair sample_pair(std::size_t n, std::mt19937_64& rng) {
    if (n < 2) {
        throw ParameterError("pair sampling needs at least 2 groups, got " + std::to_string(n));
    }
    const std::size_t pairs = n * (n - 1) / 2;
    std::uniform_int_distribution<std::size_t> pick(0, pairs - 1);
    std::size_t index = pick(rng);
    std::size_t i = 0;
    while (index >= n - 1 - i) {
        index -= n - 1 - i;
        ++i;
    }
    return {i, i + 1 + index};
}

OrthHeatmap orth_heatmap(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups,
                         Factor factor) {
    const std::size_t n = groups.size();
    std::vector<Matrix> slices;
    slices.reserve(n);
    for (const IndexSet& members : groups) {
        slices.push_back(factor == Factor::A ? unit_rows(gather_rows(A, members))
                                             : unit_cols(gather_cols(B, members)));
    }

    OrthHeatmap out;
    out.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = (slices[i].transpose() * slices[j]).cwiseAbs().mean();
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    const double peak = n == 0 ? 0.0 : out.values.maxCoeff();
    if (peak > 0.0) {
        out.values /= peak;
    }
    out.normalization = factor == Factor::A ? "unit-rows-mean-abs-AtA-max" : "unit-cols-mean-abs-BtB-max";
    return out;
}

OrthHeatmap orth_heatmap(const GroupedAdapter& grouped, Factor factor) {
    return orth_heatmap(grouped.adapter().A(), grouped.adapter().B(), grouped.partition().groups, factor);
}

double offdiagonal_mass(const OrthHeatmap& heatmap) {
    const Eigen::Index n = heatmap.values.rows();
    if (n < 2) {
        return 0.0;
    }
    const double off = heatmap.values.sum() - heatmap.values.trace();
    return off / static_cast<double>(n * (n - 1));
}

Vector singular_spectrum(const AdapterPair& adapter) {
    // B A = Q_B (R_B R_A^T) Q_A^T; the SVD runs on the r x r core.
    const auto r = static_cast<Eigen::Index>(adapter.rank());
    Eigen::HouseholderQR<Matrix> qr_b(adapter.B());
    Eigen::HouseholderQR<Matrix> qr_a(adapter.A().transpose());
    const Matrix R_b = qr_b.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    const Matrix R_a = qr_a.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    const Matrix core = R_b * R_a.transpose();
    Eigen::JacobiSVD<Matrix> svd(core);
    return std::abs(adapter.scale()) * svd.singularValues();
}

Histogram spectrum_histogram(const Vector& values, std::size_t bins) {
    if (bins == 0) {
        throw ParameterError("histogram needs at least one bin");
    }
    Histogram out;
    const double top = values.size() == 0 ? 0.0 : std::max(0.0, values.maxCoeff());
    out.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        out.edges[b] = top * static_cast<double>(b) / static_cast<double>(bins);
    }
    out.counts.assign(bins, 0);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        std::size_t bin = 0;
        if (top > 0.0) {
            bin = static_cast<std::size_t>(std::floor(values[i] / top * static_cast<double>(bins)));
            bin = std::min(bin, bins - 1);
        }
        ++out.counts[bin];
    }
    return out;
}

}  // namespace gola
