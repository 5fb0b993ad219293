#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gola/orth.hpp"
#include "gola/partition.hpp"

namespace gola {

struct TrainConfig {
    double lambda = 1.4e-3;       // weight of the orthogonality term
    double lr = 0.2;
    std::size_t steps = 400;
    std::size_t batch = 32;
    std::size_t rank = 64;
    std::size_t k = 16;           // frozen crucial ranks
    std::size_t n = 8;            // redundant-rank groups
    std::uint64_t seed = 0;
    std::size_t pairs_per_step = 1;
    double tau = 0.84;            // template-update confidence threshold
    double momentum = 0.0;        // 0 selects plain SGD

    // Throws ParameterError on out-of-range fields.
    void validate() const;
};

// One challenge: a rank-2 update active on inputs supported in channels [begin, end).
struct ChallengeMode {
    Matrix delta;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct SyntheticTask {
    std::size_t channels = 0;
    Matrix W0;
    std::vector<ChallengeMode> modes;
    std::uint64_t seed = 0;
};

struct Batch {
    Matrix X;  // c x m
    Matrix Y;  // c x m, Y = (W0 + delta_mode) X column by column
    std::vector<std::size_t> mode;
};

struct LossBreakdown {
    double task = 0.0;
    double orth = 0.0;
    double total = 0.0;
};

/// Parameters being optimized: frozen base weight, low-rank factors in
/// sorted-slot order, and the partition that decides which slots move.
///
/// Slots [0, frozen) never change. With an empty partition (frozen = 0) every
/// rank is trainable, which is how the plain warm-start phase runs.
struct TrainState {
    Matrix W0;
    Matrix A;
    Matrix B;
    RankPartition partition;
    Matrix velocity_A;  // empty unless momentum > 0
    Matrix velocity_B;
    std::size_t step = 0;

    std::size_t frozen() const { return partition.k; }
    AdapterPair adapter() const { return AdapterPair(W0, A, B); }
    GroupedAdapter grouped() const { return GroupedAdapter(adapter(), partition); }
};

struct TrainReport {
    double final_task_loss = 0.0;
    double final_orth_loss = 0.0;
    std::vector<double> task_trace;
    std::vector<double> orth_trace;
    std::vector<double> total_trace;
    std::vector<double> gram_mass_trace;  // all-pairs orthogonality loss after each step
    double initial_gram_mass = 0.0;
    double initial_heatmap_mass = 0.0;   // mean off-diagonal heatmap entry, A and B averaged
    double final_heatmap_mass = 0.0;
    std::uint64_t frozen_checksum_before = 0;
    std::uint64_t frozen_checksum_after = 0;
    RankPartition partition;
    Matrix W0;
    Matrix A;
    Matrix B;
};

SyntheticTask make_synthetic_task(std::size_t channels, std::size_t modes, std::uint64_t seed);

// Modes drawn uniformly; inputs are standard normal on the mode's channel block.
Batch sample_batch(const SyntheticTask& task, std::size_t size, std::mt19937_64& rng);

/// One optimizer step on the composed objective task_mse + lambda * orth.
///
/// Orthogonality gradients are only formed when lambda > 0; pairs come from
/// `pair_rng`, which is left untouched when the state has no groups.
LossBreakdown train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg,
                         std::mt19937_64& pair_rng);

/// Warm start (plain low-rank fit for steps/2), offline partition, then
/// cfg.steps regularized steps. Deterministic in (task, cfg).
TrainReport train(const SyntheticTask& task, const TrainConfig& cfg);

// FNV-1a over the bytes of W0 and the first `frozen` slots of A and B.
std::uint64_t frozen_checksum(const Matrix& W0, const Matrix& A, const Matrix& B, std::size_t frozen);

// True when the tracker should refresh its online template (conf >= tau).
bool confidence_gate(double conf, double tau);

}  // namespace gola
