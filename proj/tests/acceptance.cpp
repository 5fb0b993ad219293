// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "gola/cli.hpp"
#include "gola/container.hpp"
#include "gola/fileutil.hpp"
#include "gola/metrics.hpp"
#include "gola/orth.hpp"
#include "gola/partition.hpp"
#include "gola/serialize.hpp"
#include "gola/train.hpp"
#include "test_support.hpp"

using namespace gola;
using gola::testing::contiguous_partition;
using gola::testing::max_abs;
using gola::testing::random_matrix;
using gola::testing::random_permutation;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// ---- merge equivalence ---------------------------------------------------

Outcome merge_equivalence() {
    // Relative error is measured per adapter over its whole probe batch:
    // max |forward - merged| / max |merged output|.
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> channels(1, 64);
    double worst64 = 0.0, worst32 = 0.0, worst32_single = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int c_out = channels(rng);
        const int c_in = channels(rng);
        const int r = std::uniform_int_distribution<int>(1, std::min({16, c_out, c_in}))(rng);
        const double s = 1.0 / std::sqrt(static_cast<double>(c_in));
        const AdapterPair a(random_matrix(c_out, c_in, rng, s), random_matrix(r, c_in, rng, s),
                            random_matrix(c_out, r, rng, s), 1.0);
        const AdapterPairF af = a.cast<float>();
        const Matrix probes = random_matrix(c_in, 100, rng);
        const MatrixF probes_f = probes.cast<float>();

        const Matrix y = merge(a) * probes;
        worst64 = std::max(worst64, max_abs(forward(a, probes) - y) / max_abs(y));
        const MatrixF yf = merge(af) * probes_f;
        const MatrixF diff = forward(af, probes_f) - yf;
        worst32 = std::max(worst32, static_cast<double>(diff.cwiseAbs().maxCoeff() / yf.cwiseAbs().maxCoeff()));
        for (Eigen::Index col = 0; col < diff.cols(); ++col) {
            worst32_single = std::max(worst32_single, static_cast<double>(diff.col(col).cwiseAbs().maxCoeff() /
                                                                          yf.col(col).cwiseAbs().maxCoeff()));
        }
    }
    return {worst64 <= 1e-10 && worst32 <= 1e-5,
            fmt::format("worst batch relative error f64 {:.2e}, f32 {:.2e} (single-probe f32 worst {:.2e})", worst64,
                        worst32, worst32_single)};
}

// ---- permutation invariance ----------------------------------------------

Outcome permutation_invariance() {
    std::mt19937_64 rng(102);
    std::uniform_int_distribution<int> channels(2, 64);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int c = channels(rng);
        const int r = std::uniform_int_distribution<int>(1, std::min(16, c))(rng);
        const AdapterPair a = gola::testing::random_adapter(c, c, r, rng, 0.7);
        const AdapterPair p = apply_permutation(a, random_permutation(static_cast<std::size_t>(r), rng));
        worst = std::max(worst, max_abs(effective_update(a) - effective_update(p)));
    }
    return {worst <= 1e-12, fmt::format("worst |delta W| difference {:.2e}", worst)};
}

// ---- importance planting -------------------------------------------------

Outcome importance_planting() {
    int recovered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        Matrix B = random_matrix(16, 8, rng, 0.01);
        const Permutation order = random_permutation(8, rng);
        B.col(static_cast<Eigen::Index>(order[0])) = 10.0 * Vector::Unit(16, 0);
        B.col(static_cast<Eigen::Index>(order[1])) = 10.0 * Vector::Unit(16, 1);
        const Permutation sigma = sort_ranks(rank_importance(B, 2));
        recovered += std::set<std::size_t>{sigma[0], sigma[1]} == std::set<std::size_t>{order[0], order[1]};
    }
    int stable = 0;
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix B = random_matrix(16, 8, rng);
        const double t = std::pow(10.0, log_scale(rng));
        stable += sort_ranks(rank_importance(B, 2)) == sort_ranks(rank_importance(t * B, 2));
    }
    return {recovered >= 99 && stable == 100,
            fmt::format("planted top-2 recovered {}/100, ordering stable under scaling {}/100", recovered, stable)};
}

// ---- balanced clustering -------------------------------------------------

Outcome balanced_clustering() {
    std::mt19937_64 rng(104);
    int balanced = 0;
    for (int run = 0; run < 20; ++run) {
        const AdapterPair a = gola::testing::random_adapter(128, 128, 64, rng, 0.1);
        const RankPartition p = partition(a, 16, 8, static_cast<std::uint64_t>(run)).partition();
        bool ok = p.groups.size() == 8;
        for (const auto& g : p.groups) {
            ok = ok && g.size() == 6;
        }
        balanced += ok;
    }
    int bundles = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 local(seed);
        Matrix points = random_matrix(6, 8, local, 0.01);
        const Permutation order = random_permutation(8, local);
        std::set<std::size_t> plus, minus;
        for (std::size_t i = 0; i < 8; ++i) {
            points.col(static_cast<Eigen::Index>(order[i])) += (i < 4 ? 10.0 : -10.0) * Vector::Unit(6, 0);
            (i < 4 ? plus : minus).insert(order[i]);
        }
        const auto groups = cluster_groups(points, 2, seed);
        const std::set<std::size_t> g0(groups[0].begin(), groups[0].end());
        const std::set<std::size_t> g1(groups[1].begin(), groups[1].end());
        bundles += (g0 == plus && g1 == minus) || (g0 == minus && g1 == plus);
    }
    const AdapterPair a = gola::testing::random_adapter(96, 96, 64, rng);
    const std::string first = dump_json(partition_to_json(partition(a, 16, 8, 5).partition()));
    const std::string second = dump_json(partition_to_json(partition(a, 16, 8, 5).partition()));
    return {balanced == 20 && bundles == 100 && first == second,
            fmt::format("8x6 groups in {}/20 runs, bundles recovered {}/100, identical output {}", balanced, bundles,
                        first == second ? "yes" : "no")};
}

// ---- orthogonality gradient ----------------------------------------------

Outcome orth_gradient() {
    std::mt19937_64 rng(105);
    std::uniform_int_distribution<int> dims(2, 6);
    double worst = 0.0;
    int checked = 0;
    while (checked < 500) {
        const std::size_t g = static_cast<std::size_t>(dims(rng));
        const RankPartition p = contiguous_partition(1 + 2 * g, 1, 2);
        const Matrix A = random_matrix(static_cast<Eigen::Index>(1 + 2 * g), dims(rng), rng);
        const Matrix B = random_matrix(dims(rng), static_cast<Eigen::Index>(1 + 2 * g), rng);
        const Matrix ca = gather_rows(A, p.groups[0]).transpose() * gather_rows(A, p.groups[1]);
        const Matrix cb = gather_cols(B, p.groups[0]).transpose() * gather_cols(B, p.groups[1]);
        if (std::min(ca.cwiseAbs().minCoeff(), cb.cwiseAbs().minCoeff()) < 1e-2) {
            continue;
        }
        ++checked;
        const OrthGradient grad = orth_loss_grad(A, B, p.groups, {0, 1});
        Matrix dA = Matrix::Zero(A.rows(), A.cols());
        Matrix dB = Matrix::Zero(B.rows(), B.cols());
        for (std::size_t s = 0; s < g; ++s) {
            dA.row(static_cast<Eigen::Index>(p.groups[0][s])) = grad.A_i.row(static_cast<Eigen::Index>(s));
            dA.row(static_cast<Eigen::Index>(p.groups[1][s])) = grad.A_j.row(static_cast<Eigen::Index>(s));
            dB.col(static_cast<Eigen::Index>(p.groups[0][s])) = grad.B_i.col(static_cast<Eigen::Index>(s));
            dB.col(static_cast<Eigen::Index>(p.groups[1][s])) = grad.B_j.col(static_cast<Eigen::Index>(s));
        }
        const double h = 1e-6;
        double err = 0.0;
        for (Eigen::Index e = 0; e < A.size(); ++e) {
            Matrix up = A, down = A;
            up.data()[e] += h;
            down.data()[e] -= h;
            const double fd = (orth_loss(up, B, p.groups, {0, 1}) - orth_loss(down, B, p.groups, {0, 1})) / (2 * h);
            err = std::max(err, std::abs(fd - dA.data()[e]));
        }
        for (Eigen::Index e = 0; e < B.size(); ++e) {
            Matrix up = B, down = B;
            up.data()[e] += h;
            down.data()[e] -= h;
            const double fd = (orth_loss(A, up, p.groups, {0, 1}) - orth_loss(A, down, p.groups, {0, 1})) / (2 * h);
            err = std::max(err, std::abs(fd - dB.data()[e]));
        }
        worst = std::max(worst, err / std::max({1.0, max_abs(dA), max_abs(dB)}));
    }

    int zero = 0;
    const RankPartition p = contiguous_partition(6, 2, 2);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix A = random_matrix(6, 5, rng);
        A.row(3) = A.row(2);
        A.row(5) = -A.row(4);
        Matrix B = random_matrix(8, 6, rng);
        B.block(4, 2, 4, 2).setZero();
        B.block(0, 4, 4, 2).setZero();
        const OrthGradient gr = orth_loss_grad(A, B, p.groups, {0, 1});
        zero += orth_loss(A, B, p.groups, {0, 1}) == 0.0 && max_abs(gr.A_i) == 0.0 && max_abs(gr.A_j) == 0.0 &&
                max_abs(gr.B_i) == 0.0 && max_abs(gr.B_j) == 0.0;
    }
    return {worst <= 1e-4 && zero == 100,
            fmt::format("worst relative gradient error {:.2e} over 500 instances, zero loss and gradient {}/100",
                        worst, zero)};
}

// ---- frozen ranks --------------------------------------------------------

Outcome frozen_contract() {
    const SyntheticTask task = make_synthetic_task(64, 4, 0);
    const TrainConfig cfg;  // lambda 1.4e-3, k 16, n 8, tau 0.84
    const TrainReport report = train(task, cfg);
    const bool base_same = report.W0 == task.W0;
    const bool frozen_same = report.frozen_checksum_before == report.frozen_checksum_after;
    double worst = 0.0;
    for (std::size_t s = 0; s < report.total_trace.size(); ++s) {
        const double composed = report.task_trace[s] + cfg.lambda * report.orth_trace[s];
        worst = std::max(worst, std::abs(report.total_trace[s] - composed) / std::abs(report.total_trace[s]));
    }
    const bool defaults = cfg.lambda == 1.4e-3 && cfg.k == 16 && cfg.n == 8 && cfg.tau == 0.84;
    return {base_same && frozen_same && worst <= 1e-7 && defaults && report.total_trace.size() == cfg.steps,
            fmt::format("base weight unchanged {}, frozen checksum {:016x} -> {:016x}, worst loss composition "
                        "error {:.2e} over {} steps",
                        base_same ? "yes" : "no", report.frozen_checksum_before, report.frozen_checksum_after, worst,
                        report.total_trace.size())};
}

// ---- redundancy reduction ------------------------------------------------

Outcome redundancy_reduction() {
    int lower = 0, close = 0;
    std::string rows;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SyntheticTask task = make_synthetic_task(64, 4, seed);
        TrainConfig regularized;
        regularized.seed = seed;
        TrainConfig plain = regularized;
        plain.lambda = 0.0;
        const TrainReport on = train(task, regularized);
        const TrainReport off = train(task, plain);
        lower += on.final_heatmap_mass < off.final_heatmap_mass;
        close += on.final_task_loss <= 2.0 * off.final_task_loss;
        rows += fmt::format("\n    seed {}: heatmap mass {:.4f} vs {:.4f}, task mse {:.5f} vs {:.5f}", seed,
                            on.final_heatmap_mass, off.final_heatmap_mass, on.final_task_loss, off.final_task_loss);
    }
    return {lower == 5 && close == 5,
            fmt::format("mass lower with the penalty in {}/5 seeds, mse within 2x in {}/5{}", lower, close, rows)};
}

// ---- metric oracles ------------------------------------------------------

struct Lattice {
    int x, y, w, h;
};

double lattice_iou(const Lattice& a, const Lattice& b) {
    long long inter = 0;
    for (int x = a.x; x < a.x + a.w; ++x) {
        for (int y = a.y; y < a.y + a.h; ++y) {
            inter += x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
        }
    }
    const long long uni = 1LL * a.w * a.h + 1LL * b.w * b.h - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool lattice_near(const Lattice& a, const Lattice& b, int xi) {
    const long long dx = (2LL * a.x + a.w) - (2LL * b.x + b.w);
    const long long dy = (2LL * a.y + a.h) - (2LL * b.y + b.h);
    return dx * dx + dy * dy < 4LL * xi * xi;
}

Outcome metric_oracles() {
    std::mt19937_64 rng(106);
    std::uniform_int_distribution<int> pos(0, 40), size(0, 30), length(1, 30), xi_pick(0, 60), grid_pick(0, 20);
    const auto box = [&]() { return Lattice{pos(rng), pos(rng), size(rng), size(rng)}; };
    const auto to_box = [](const Lattice& l) { return BBox{double(l.x), double(l.y), double(l.w), double(l.h)}; };
    double worst = 0.0;
    bool invariants = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = length(rng);
        std::vector<Lattice> pv, pt, gt;
        std::vector<FramePair> vis, thr;
        for (int f = 0; f < n; ++f) {
            gt.push_back(box());
            pv.push_back(box());
            pt.push_back(box());
            vis.push_back({to_box(pv.back()), to_box(gt.back())});
            thr.push_back({to_box(pt.back()), to_box(gt.back())});
        }
        const ModalPair pair{BBoxSequence(vis), BBoxSequence(thr)};
        const int xi = xi_pick(rng);
        const double xs = success_thresholds()[static_cast<std::size_t>(grid_pick(rng))];
        double pr = 0, sr = 0, m_pr = 0, m_sr = 0;
        for (int f = 0; f < n; ++f) {
            pr += lattice_near(pv[f], gt[f], xi);
            sr += lattice_iou(pv[f], gt[f]) >= xs;
            m_pr += lattice_near(pv[f], gt[f], xi) || lattice_near(pt[f], gt[f], xi);
            m_sr += std::max(lattice_iou(pv[f], gt[f]), lattice_iou(pt[f], gt[f])) >= xs;
        }
        worst = std::max({worst, std::abs(precision_rate(pair.visible(), xi) - pr / n),
                          std::abs(success_rate(pair.visible(), xs) - sr / n), std::abs(mpr(pair, xi) - m_pr / n),
                          std::abs(msr(pair, xs) - m_sr / n)});
        invariants = invariants &&
                     mpr(pair, xi) >= std::max(precision_rate(pair.visible(), xi), precision_rate(pair.thermal(), xi)) &&
                     msr(pair, xs) >= std::max(success_rate(pair.visible(), xs), success_rate(pair.thermal(), xs)) &&
                     precision_rate(pair.visible(), xi + 1.0) >= precision_rate(pair.visible(), xi) &&
                     success_rate(pair.visible(), std::min(1.0, xs + 0.05)) <= success_rate(pair.visible(), xs);
    }
    const BBoxSequence at_pr(std::vector<FramePair>{{{0, 0, 10, 10}, {12, 16, 10, 10}}});  // center error 20
    const BBoxSequence at_sr(std::vector<FramePair>{{{0, 0, 10, 10}, {0, 0, 10, 5}}});  // IoU 0.5
    const bool boundaries = precision_rate(at_pr, 20.0) == 0.0 && success_rate(at_sr, 0.5) == 1.0;
    return {worst <= 1e-12 && invariants && boundaries,
            fmt::format("worst oracle difference {:.1e} over 1000 sequences, boundaries {}, invariants {}", worst,
                        boundaries ? "ok" : "broken", invariants ? "ok" : "broken")};
}

// ---- CLI helpers ---------------------------------------------------------

struct CliResult {
    int code;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "gola");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gola_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---- container round trip ------------------------------------------------

Outcome container_round_trip() {
    const fs::path dir = scratch("container");
    std::mt19937_64 rng(107);
    std::uniform_int_distribution<int> channels(1, 64);
    int identical = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int c_out = channels(rng);
        const int c_in = channels(rng);
        const int r = std::uniform_int_distribution<int>(1, std::min({16, c_out, c_in}))(rng);
        const AdapterPair a = gola::testing::random_adapter(c_out, c_in, r, rng);
        const Container c = adapter_to_container(a, "layer");
        const fs::path file = dir / "a.gola";
        write_container(file, c);
        const Container back = read_container(file);
        const std::string bytes = read_file(file);
        write_container(dir / "b.gola", back);
        identical += back.tensors == c.tensors && back.metadata == c.metadata && read_file(dir / "b.gola") == bytes &&
                     adapter_from_container(back) == a.cast<float>().cast<double>();
    }

    const std::string good = read_file(dir / "a.gola");
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    write_file_atomic(dir / "magic.gola", bad_magic);
    write_file_atomic(dir / "trunc.gola", good.substr(0, good.size() - 5));
    const CliResult m = run_cli({"partition", "--in", (dir / "magic.gola").string(), "--out", (dir / "p.json").string()});
    const CliResult t = run_cli({"partition", "--in", (dir / "trunc.gola").string(), "--out", (dir / "p.json").string()});
    fs::remove_all(dir);
    const bool corrupt_ok = m.code == 3 && t.code == 3 && m.err != t.err;
    return {identical == 100 && corrupt_ok,
            fmt::format("bitwise round trips {}/100, corrupted magic exit {}, truncation exit {}, distinct diagnostics {}",
                        identical, m.code, t.code, m.err != t.err ? "yes" : "no")};
}

// ---- CLI determinism -----------------------------------------------------

Outcome cli_determinism() {
    const fs::path dir = scratch("cli");
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    std::mt19937_64 rng(108);
    write_container(p("in.gola"), adapter_to_container(gola::testing::random_adapter(96, 96, 64, rng, 0.1), "layer"));
    write_file_atomic(p("cfg.json"), R"({"steps": 60})");
    const std::string csv_v = "frame,px,py,pw,ph,gx,gy,gw,gh\n1,1.5,2,10,12,0,0,10,10\n2,30,4,8,8,3,3,9,9\n";
    const std::string csv_t = "frame,px,py,pw,ph,gx,gy,gw,gh\n1,0,0,10,10,0,0,10,10\n2,50,50,8,8,3,3,9,9\n";
    write_file_atomic(p("v.csv"), csv_v);
    write_file_atomic(p("t.csv"), csv_t);

    std::vector<std::string> mismatched;
    bool all_ok = true;
    for (const std::string run : {"1", "2"}) {
        all_ok = all_ok && run_cli({"partition", "--in", p("in.gola"), "--out", p("part" + run + ".json")}).code == 0;
        all_ok = all_ok &&
                 run_cli({"train", "--cfg", p("cfg.json"), "--out-dir", p("train" + run), "--task-seed", "3"}).code == 0;
        all_ok = all_ok && run_cli({"eval", "--visible", p("v.csv"), "--thermal", p("t.csv"), "--out",
                                    p("eval" + run + ".json")})
                                   .code == 0;
        all_ok = all_ok && run_cli({"analyze", "--in", p("in.gola"), "--partition", p("part1.json"), "--spectrum-out",
                                    p("spectrum" + run + ".csv"), "--heatmap-out", p("heat" + run + ".csv")})
                                   .code == 0;
    }
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"part1.json", "part2.json"},
        {"part1.json.gola", "part2.json.gola"},
        {"train1/report.json", "train2/report.json"},
        {"train1/loss_trace.csv", "train2/loss_trace.csv"},
        {"train1/partition.json", "train2/partition.json"},
        {"train1/adapter.gola", "train2/adapter.gola"},
        {"train1/manifest.json", "train2/manifest.json"},
        {"eval1.json", "eval2.json"},
        {"spectrum1.csv", "spectrum2.csv"},
        {"heat1.csv", "heat2.csv"},
        {"spectrum1.csv.hist.csv", "spectrum2.csv.hist.csv"},
    };
    for (const auto& [a, b] : pairs) {
        if (!all_ok || read_file(p(a)) != read_file(p(b))) {
            mismatched.push_back(a);
        }
    }
    fs::remove_all(dir);
    std::string detail = fmt::format("{} artifact pairs compared across partition, train, eval, analyze", pairs.size());
    for (const auto& name : mismatched) {
        detail += ", differs: " + name;
    }
    return {all_ok && mismatched.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"merge equivalence", merge_equivalence},
        {"permutation invariance", permutation_invariance},
        {"importance planting", importance_planting},
        {"balanced clustering", balanced_clustering},
        {"orthogonality gradient", orth_gradient},
        {"frozen-rank contract", frozen_contract},
        {"redundancy reduction", redundancy_reduction},
        {"metric oracles", metric_oracles},
        {"container round trip", container_round_trip},
        {"cli determinism", cli_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !outcome.pass;
        std::cout << fmt::format("{} {:2d} {} ({:.1f}s): {}\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                                 criteria[i].first, seconds, outcome.detail)
                  << std::flush;
    }
    std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
                             criteria.size());
    return failures == 0 ? 0 : 1;
}
