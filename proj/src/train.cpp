#include "gola/train.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace gola {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// One generator per purpose: task, data, pair sampling, initialization.
enum class Stream : std::uint64_t { Task = 1, Data = 2, Pairs = 3, Init = 4 };

std::mt19937_64 stream(std::uint64_t seed, Stream which) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(which))));
}

Vector unit_gaussian(Eigen::Index size, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        v[i] = normal(rng);
    }
    return v / v.norm();
}

void fnv1a(std::uint64_t& h, const double* data, std::size_t count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < count * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ULL;
    }
}

double heatmap_mass(const Matrix& A, const Matrix& B, const std::vector<IndexSet>& groups) {
    return 0.5 * (offdiagonal_mass(orth_heatmap(A, B, groups, Factor::A)) +
                  offdiagonal_mass(orth_heatmap(A, B, groups, Factor::B)));
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("lambda must be finite and non-negative");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ParameterError("learning rate must be finite and non-negative");
    }
    if (batch < 1) {
        throw ParameterError("batch size must be at least 1");
    }
    if (rank < 2) {
        throw ParameterError("adapter rank must be at least 2");
    }
    if (pairs_per_step < 1) {
        throw ParameterError("pairs_per_step must be at least 1");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ParameterError("momentum must lie in [0, 1)");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw ParameterError("tau must lie in [0, 1]");
    }
    if (k < 1 || k >= rank) {
        throw ParameterError("k=" + std::to_string(k) + " must satisfy 1 <= k < rank=" + std::to_string(rank));
    }
    if (n < 2 || (rank - k) % n != 0) {
        throw ParameterError("n=" + std::to_string(n) + " must be >= 2 and divide rank-k=" +
                             std::to_string(rank - k) + "; adjust k or n");
    }
}

SyntheticTask make_synthetic_task(std::size_t channels, std::size_t modes, std::uint64_t seed) {
    if (channels < 8) {
        throw ParameterError("synthetic task needs at least 8 channels, got " + std::to_string(channels));
    }
    if (modes < 1 || modes > 8) {
        throw ParameterError("synthetic task supports 1..8 modes, got " + std::to_string(modes));
    }
    std::mt19937_64 rng = stream(seed, Stream::Task);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(channels)));

    SyntheticTask task;
    task.channels = channels;
    task.seed = seed;
    const auto c = static_cast<Eigen::Index>(channels);
    task.W0 = Matrix::NullaryExpr(c, c, [&]() { return normal(rng); });

    const std::size_t block = channels / modes;
    for (std::size_t j = 0; j < modes; ++j) {
        ChallengeMode mode;
        mode.begin = j * block;
        mode.end = j + 1 == modes ? channels : (j + 1) * block;
        const auto width = static_cast<Eigen::Index>(mode.end - mode.begin);
        mode.delta = Matrix::Zero(c, c);
        for (int term = 0; term < 2; ++term) {
            const Vector u = unit_gaussian(c, rng);
            Vector v = Vector::Zero(c);
            v.segment(static_cast<Eigen::Index>(mode.begin), width) = unit_gaussian(width, rng);
            mode.delta.noalias() += u * v.transpose();
        }
        task.modes.push_back(std::move(mode));
    }
    return task;
}

Batch sample_batch(const SyntheticTask& task, std::size_t size, std::mt19937_64& rng) {
    const auto c = static_cast<Eigen::Index>(task.channels);
    const auto m = static_cast<Eigen::Index>(size);
    std::uniform_int_distribution<std::size_t> pick(0, task.modes.size() - 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    Batch batch;
    batch.X = Matrix::Zero(c, m);
    batch.Y.resize(c, m);
    batch.mode.resize(size);
    for (Eigen::Index col = 0; col < m; ++col) {
        const std::size_t j = pick(rng);
        const ChallengeMode& mode = task.modes[j];
        for (auto ch = static_cast<Eigen::Index>(mode.begin); ch < static_cast<Eigen::Index>(mode.end); ++ch) {
            batch.X(ch, col) = normal(rng);
        }
        batch.Y.col(col) = (task.W0 + mode.delta) * batch.X.col(col);
        batch.mode[static_cast<std::size_t>(col)] = j;
    }
    return batch;
}

LossBreakdown train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg,
                         std::mt19937_64& pair_rng) {
    const Eigen::Index r = state.A.rows();
    const auto first = static_cast<Eigen::Index>(state.frozen());
    const auto m = static_cast<double>(batch.X.cols());
    const auto outputs = static_cast<double>(batch.Y.rows());

    const Matrix hidden = state.A * batch.X;
    const Matrix residual = state.W0 * batch.X + state.B * hidden - batch.Y;

    LossBreakdown loss;
    loss.task = residual.squaredNorm() / (m * outputs);

    // d(mean squared error)/d(prediction)
    const Matrix dpred = (2.0 / (m * outputs)) * residual;
    Matrix grad_B = dpred * hidden.transpose();
    Matrix grad_A = state.B.transpose() * (dpred * batch.X.transpose());

    const auto& groups = state.partition.groups;
    if (!groups.empty()) {
        for (std::size_t p = 0; p < cfg.pairs_per_step; ++p) {
            const GroupPair pair = sample_pair(groups.size(), pair_rng);
            loss.orth += orth_loss(state.A, state.B, groups, pair);
            if (cfg.lambda > 0.0) {
                const OrthGradient g = orth_loss_grad(state.A, state.B, groups, pair);
                const IndexSet& gi = groups[pair.i];
                const IndexSet& gj = groups[pair.j];
                for (std::size_t s = 0; s < gi.size(); ++s) {
                    const auto row = static_cast<Eigen::Index>(s);
                    grad_A.row(static_cast<Eigen::Index>(gi[s])) += cfg.lambda * g.A_i.row(row);
                    grad_B.col(static_cast<Eigen::Index>(gi[s])) += cfg.lambda * g.B_i.col(row);
                }
                for (std::size_t s = 0; s < gj.size(); ++s) {
                    const auto row = static_cast<Eigen::Index>(s);
                    grad_A.row(static_cast<Eigen::Index>(gj[s])) += cfg.lambda * g.A_j.row(row);
                    grad_B.col(static_cast<Eigen::Index>(gj[s])) += cfg.lambda * g.B_j.col(row);
                }
            }
        }
    }
    loss.total = loss.task + cfg.lambda * loss.orth;
    if (!std::isfinite(loss.total)) {
        throw NumericError("non-finite loss at step " + std::to_string(state.step) +
                           " (task=" + std::to_string(loss.task) + ", orth=" + std::to_string(loss.orth) + ")");
    }

    const Eigen::Index trainable = r - first;
    if (cfg.momentum > 0.0) {
        if (state.velocity_A.size() == 0) {
            state.velocity_A = Matrix::Zero(state.A.rows(), state.A.cols());
            state.velocity_B = Matrix::Zero(state.B.rows(), state.B.cols());
        }
        state.velocity_A.bottomRows(trainable) =
            cfg.momentum * state.velocity_A.bottomRows(trainable) + grad_A.bottomRows(trainable);
        state.velocity_B.rightCols(trainable) =
            cfg.momentum * state.velocity_B.rightCols(trainable) + grad_B.rightCols(trainable);
        state.A.bottomRows(trainable) -= cfg.lr * state.velocity_A.bottomRows(trainable);
        state.B.rightCols(trainable) -= cfg.lr * state.velocity_B.rightCols(trainable);
    } else if (cfg.lr != 0.0) {
        state.A.bottomRows(trainable) -= cfg.lr * grad_A.bottomRows(trainable);
        state.B.rightCols(trainable) -= cfg.lr * grad_B.rightCols(trainable);
    }
    if (!state.A.allFinite() || !state.B.allFinite()) {
        throw NumericError("parameters diverged at step " + std::to_string(state.step));
    }
    ++state.step;
    return loss;
}

TrainReport train(const SyntheticTask& task, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.rank > task.channels) {
        throw ParameterError("rank " + std::to_string(cfg.rank) + " exceeds the task's " +
                             std::to_string(task.channels) + " channels");
    }
    const auto c = static_cast<Eigen::Index>(task.channels);
    const auto r = static_cast<Eigen::Index>(cfg.rank);

    std::mt19937_64 init_rng = stream(cfg.seed, Stream::Init);
    std::mt19937_64 data_rng = stream(cfg.seed, Stream::Data);
    std::mt19937_64 pair_rng = stream(cfg.seed, Stream::Pairs);

    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(task.channels)));
    TrainState state;
    state.W0 = task.W0;
    state.A = Matrix::NullaryExpr(r, c, [&]() { return init(init_rng); });
    state.B = Matrix::Zero(c, r);

    // Plain low-rank warm start: every rank trainable, no regularizer.
    TrainConfig warm = cfg;
    warm.lambda = 0.0;
    for (std::size_t s = 0; s < cfg.steps / 2; ++s) {
        train_step(state, sample_batch(task, cfg.batch, data_rng), warm, pair_rng);
    }

    const GroupedAdapter grouped = partition(state.adapter(), cfg.k, cfg.n, cfg.seed);
    state.A = grouped.adapter().A();
    state.B = grouped.adapter().B();
    state.partition = grouped.partition();
    state.velocity_A.resize(0, 0);
    state.velocity_B.resize(0, 0);
    state.step = 0;

    TrainReport report;
    report.partition = state.partition;
    report.frozen_checksum_before = frozen_checksum(state.W0, state.A, state.B, cfg.k);
    report.initial_gram_mass = orth_loss_all_pairs(state.A, state.B, state.partition.groups);
    report.initial_heatmap_mass = heatmap_mass(state.A, state.B, state.partition.groups);

    for (std::size_t s = 0; s < cfg.steps; ++s) {
        const LossBreakdown loss = train_step(state, sample_batch(task, cfg.batch, data_rng), cfg, pair_rng);
        report.task_trace.push_back(loss.task);
        report.orth_trace.push_back(loss.orth);
        report.total_trace.push_back(loss.total);
        report.gram_mass_trace.push_back(orth_loss_all_pairs(state.A, state.B, state.partition.groups));
    }

    if (!report.task_trace.empty()) {
        report.final_task_loss = report.task_trace.back();
        report.final_orth_loss = report.orth_trace.back();
    }
    report.final_heatmap_mass = heatmap_mass(state.A, state.B, state.partition.groups);
    report.frozen_checksum_after = frozen_checksum(state.W0, state.A, state.B, cfg.k);
    report.W0 = std::move(state.W0);
    report.A = std::move(state.A);
    report.B = std::move(state.B);
    return report;
}

std::uint64_t frozen_checksum(const Matrix& W0, const Matrix& A, const Matrix& B, std::size_t frozen) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    fnv1a(h, W0.data(), static_cast<std::size_t>(W0.size()));
    const auto k = static_cast<Eigen::Index>(frozen);
    const Matrix rows = A.topRows(k);
    const Matrix cols = B.leftCols(k);
    fnv1a(h, rows.data(), static_cast<std::size_t>(rows.size()));
    fnv1a(h, cols.data(), static_cast<std::size_t>(cols.size()));
    return h;
}

bool confidence_gate(double conf, double tau) {
    if (!(conf >= 0.0 && conf <= 1.0)) {
        throw ValidationError("confidence " + std::to_string(conf) + " outside [0, 1]");
    }
    return conf >= tau;
}

}  // namespace gola
