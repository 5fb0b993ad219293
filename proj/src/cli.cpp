#include "gola/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gola/container.hpp"
#include "gola/fileutil.hpp"
#include "gola/metrics.hpp"
#include "gola/orth.hpp"
#include "gola/partition.hpp"
#include "gola/serialize.hpp"
#include "gola/train.hpp"

namespace gola::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// GOLA_SEED, when set, takes precedence over --seed.
std::uint64_t resolve_seed(std::uint64_t flag_seed) {
    const char* env = std::getenv("GOLA_SEED");
    if (env == nullptr || *env == '\0') {
        return flag_seed;
    }
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') {
        throw ParameterError(std::string("GOLA_SEED must be a non-negative integer, got '") + env + "'");
    }
    return v;
}

json read_json_file(const fs::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParameterError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

json file_entry(const fs::path& path, const std::string& label) {
    return {{"path", label}, {"sha256", sha256_hex(read_file(path))}};
}

struct PartitionArgs {
    std::string in;
    std::string out;
    std::size_t k = 16;
    std::size_t n = 8;
    std::uint64_t seed = 0;
};

int cmd_partition(const PartitionArgs& a, std::ostream& out, std::ostream& err) {
    const Container container = read_container(a.in);
    const AdapterPair adapter = adapter_from_container(container);
    if (adapter.exceeds_low_rank_regime()) {
        err << fmt::format("warning: rank {} is above half of min(c_out, c_in) = {}\n", adapter.rank(),
                           std::min(adapter.out_channels(), adapter.in_channels()));
    }
    const GroupedAdapter grouped = partition(adapter, a.k, a.n, resolve_seed(a.seed));

    write_file_atomic(a.out, dump_json(partition_to_json(grouped.partition())));
    const std::string layer = container.metadata.value("layer_name", std::string("layer"));
    Container permuted = adapter_to_container(grouped.adapter(), layer);
    permuted.metadata["sigma_applied"] = true;
    write_container(a.out + ".gola", permuted);

    const RankPartition& p = grouped.partition();
    out << fmt::format("partition: r={} k={} n={} group_size={} degenerate={}\n", p.rank(), p.k, p.n,
                       p.group_size(), p.degenerate ? "true" : "false");
    return kOk;
}

struct TrainArgs {
    std::uint64_t task_seed = 0;
    std::size_t modes = 4;
    std::size_t channels = 64;
    std::string cfg;
    std::string out_dir;
    std::optional<std::size_t> steps;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    TrainConfig cfg;
    json inputs = json::array();
    if (!a.cfg.empty()) {
        cfg = config_from_json(read_json_file(a.cfg));
        inputs.push_back(file_entry(a.cfg, fs::path(a.cfg).filename().string()));
    }
    if (a.steps) {
        cfg.steps = *a.steps;
    }
    cfg.seed = resolve_seed(a.seed.value_or(cfg.seed));
    cfg.validate();

    const SyntheticTask task = make_synthetic_task(a.channels, a.modes, a.task_seed);
    const TrainReport report = train(task, cfg);

    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }

    const std::vector<std::pair<std::string, std::string>> files = {
        {"report.json", dump_json(report_to_json(report))},
        {"loss_trace.csv", loss_trace_csv(report)},
        {"partition.json", dump_json(partition_to_json(report.partition))},
    };
    for (const auto& [name, contents] : files) {
        write_file_atomic(dir / name, contents);
    }
    Container adapter = adapter_to_container(AdapterPair(report.W0, report.A, report.B), "synthetic");
    adapter.metadata["sigma_applied"] = true;
    write_container(dir / "adapter.gola", adapter);

    json outputs = json::array();
    for (const char* name : {"report.json", "loss_trace.csv", "partition.json", "adapter.gola"}) {
        outputs.push_back(file_entry(dir / name, name));
    }
    const json manifest = {{"tool", "gola"},
                           {"version", kToolVersion},
                           {"command", "train"},
                           {"config", config_to_json(cfg)},
                           {"seeds", {{"task_seed", a.task_seed}, {"seed", cfg.seed}}},
                           {"task", {{"channels", a.channels}, {"modes", a.modes}}},
                           {"inputs", inputs},
                           {"outputs", outputs}};
    write_file_atomic(dir / "manifest.json", dump_json(manifest));

    out << fmt::format("train: steps={} task_loss={} orth_loss={} heatmap_mass={} -> {}\n", report.task_trace.size(),
                       format_number(report.final_task_loss), format_number(report.final_orth_loss),
                       format_number(report.final_heatmap_mass), dir.string());
    return kOk;
}

struct EvalArgs {
    std::string visible;
    std::string thermal;
    double xi_pr = 20.0;
    std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (!(a.xi_pr > 0.0)) {
        throw ParameterError("--xi-pr must be positive");
    }
    BBoxSequence visible = read_sequence_csv(a.visible);
    BBoxSequence thermal = read_sequence_csv(a.thermal);
    const ModalPair pair(visible, thermal);

    const double pr = precision_rate(pair.visible(), a.xi_pr);
    const double sr = success_auc(pair.visible());
    const double mp = mpr(pair, a.xi_pr);
    const double ms = msr_auc(pair);
    const auto grid = success_thresholds();
    const json result = {{"PR", pr},
                         {"SR_auc", sr},
                         {"MPR", mp},
                         {"MSR_auc", ms},
                         {"N", pair.size()},
                         {"thresholds", {{"xi_pr", a.xi_pr}, {"xi_sr_grid", grid}}}};
    write_file_atomic(a.out, dump_json(result));
    out << fmt::format("PR={:.4f} SR_auc={:.4f} MPR={:.4f} MSR_auc={:.4f}\n", pr, sr, mp, ms);
    return kOk;
}

struct AnalyzeArgs {
    std::string in;
    std::string partition;
    std::string spectrum_out;
    std::string heatmap_out;
    std::string histogram_out;
    std::string factor = "B";
    std::size_t bins = 50;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    const Container container = read_container(a.in);
    const AdapterPair adapter = adapter_from_container(container);
    const RankPartition part = partition_from_json(read_json_file(a.partition));
    if (part.rank() != adapter.rank()) {
        throw ParameterError("partition covers " + std::to_string(part.rank()) + " ranks but the container has rank " +
                             std::to_string(adapter.rank()));
    }
    const bool permuted = container.metadata.value("sigma_applied", false);
    const GroupedAdapter grouped = regroup(adapter, part, permuted);

    const Vector spectrum = singular_spectrum(adapter);
    const OrthHeatmap heatmap = orth_heatmap(grouped, a.factor == "A" ? Factor::A : Factor::B);
    const Histogram hist = spectrum_histogram(spectrum, a.bins);

    const std::string hist_path = a.histogram_out.empty() ? a.spectrum_out + ".hist.csv" : a.histogram_out;
    write_file_atomic(a.spectrum_out, spectrum_csv(spectrum));
    write_file_atomic(a.heatmap_out, heatmap_csv(heatmap));
    write_file_atomic(hist_path, histogram_csv(hist));

    out << fmt::format("analyze: r={} groups={} sigma_max={} offdiag_mass={}\n", adapter.rank(), part.n,
                       format_number(spectrum.size() ? spectrum.maxCoeff() : 0.0),
                       format_number(offdiagonal_mass(heatmap)));
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Group-orthogonal low-rank adaptation toolkit", "gola"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    PartitionArgs pa;
    auto* partition_cmd = app.add_subcommand("partition", "Score, sort and group the ranks of an adapter container");
    partition_cmd->add_option("--in", pa.in, "Input adapter container")->required();
    partition_cmd->add_option("--out", pa.out, "Partition JSON; the permuted container goes to <out>.gola")->required();
    partition_cmd->add_option("--k", pa.k, "Crucial (frozen) rank count")->capture_default_str();
    partition_cmd->add_option("--n", pa.n, "Redundant-rank group count")->capture_default_str();
    partition_cmd->add_option("--seed", pa.seed, "Clustering seed (GOLA_SEED overrides)")->capture_default_str();

    TrainArgs ta;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    auto* train_cmd = app.add_subcommand("train", "Run the synthetic fine-tuning harness");
    train_cmd->add_option("--task-seed", ta.task_seed, "Synthetic task seed")->capture_default_str();
    train_cmd->add_option("--modes", ta.modes, "Number of challenge modes (1..8)")->capture_default_str();
    train_cmd->add_option("--c", ta.channels, "Channel count")->capture_default_str();
    train_cmd->add_option("--cfg", ta.cfg, "Training config JSON");
    train_cmd->add_option("--out-dir", ta.out_dir, "Output directory")->required();
    auto* steps_opt = train_cmd->add_option("--steps", steps, "Override cfg.steps");
    auto* seed_opt = train_cmd->add_option("--seed", seed, "Override cfg.seed (GOLA_SEED overrides)");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Compute PR, SR, MPR and MSR from per-modality box CSVs");
    eval_cmd->add_option("--visible", ea.visible, "Visible-modality CSV (prediction + ground truth)")->required();
    eval_cmd->add_option("--thermal", ea.thermal, "Thermal-modality CSV (prediction + ground truth)")->required();
    eval_cmd->add_option("--xi-pr", ea.xi_pr, "Center-error threshold in pixels")->capture_default_str();
    eval_cmd->add_option("--out", ea.out, "Output JSON")->required();

    AnalyzeArgs aa;
    auto* analyze_cmd = app.add_subcommand("analyze", "Write the singular spectrum and group orthogonality heatmap");
    analyze_cmd->add_option("--in", aa.in, "Adapter container")->required();
    analyze_cmd->add_option("--partition", aa.partition, "Partition JSON")->required();
    analyze_cmd->add_option("--spectrum-out", aa.spectrum_out, "Spectrum CSV (index,sigma)")->required();
    analyze_cmd->add_option("--heatmap-out", aa.heatmap_out, "Heatmap CSV (n x n)")->required();
    analyze_cmd->add_option("--histogram-out", aa.histogram_out, "Histogram CSV (default <spectrum-out>.hist.csv)");
    analyze_cmd->add_option("--factor", aa.factor, "Factor for the heatmap")
        ->check(CLI::IsMember({"A", "B"}))
        ->capture_default_str();
    analyze_cmd->add_option("--bins", aa.bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (partition_cmd->parsed()) {
            return cmd_partition(pa, out, err);
        }
        if (train_cmd->parsed()) {
            if (steps_opt->count() > 0) {
                ta.steps = steps;
            }
            if (seed_opt->count() > 0) {
                ta.seed = seed;
            }
            return cmd_train(ta, out);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(ea, out);
        }
        return cmd_analyze(aa, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
}

}  // namespace gola::cli
