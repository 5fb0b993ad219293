#include "gola/serialize.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "gola/fileutil.hpp"

namespace gola {

namespace {

const char* const kSequenceHeader = "frame,px,py,pw,ph,gx,gy,gw,gh";

std::string hex64(std::uint64_t v) {
    return fmt::format("{:016x}", v);
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParameterError(std::string("config field '") + key + "' has the wrong type");
    }
}

double parse_double(std::string_view field, const std::string& source, std::size_t line) {
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw CsvError(source + ":" + std::to_string(line) + ": cannot parse number '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

std::string format_number(double value) {
    return fmt::format("{:.9g}", value);
}

std::string dump_json(const nlohmann::json& value) {
    return value.dump(2) + "\n";
}

nlohmann::json partition_to_json(const RankPartition& partition) {
    return {{"sigma", partition.sigma},
            {"k", partition.k},
            {"n", partition.n},
            {"groups", partition.groups},
            {"seed", partition.seed},
            {"degenerate", partition.degenerate}};
}

RankPartition partition_from_json(const nlohmann::json& value) {
    RankPartition out;
    try {
        out.sigma = value.at("sigma").get<Permutation>();
        out.k = value.at("k").get<std::size_t>();
        out.groups = value.at("groups").get<std::vector<IndexSet>>();
        out.n = value.contains("n") ? value.at("n").get<std::size_t>() : out.groups.size();
        out.seed = value.value("seed", std::uint64_t{0});
        out.degenerate = value.value("degenerate", false);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed partition JSON: ") + e.what());
    }
    validate_permutation(out.sigma, out.sigma.size());
    if (out.n != out.groups.size()) {
        throw ValidationError("partition JSON lists " + std::to_string(out.groups.size()) + " groups but n=" +
                              std::to_string(out.n));
    }
    if (out.k < 1 || out.k >= out.sigma.size()) {
        throw ValidationError("partition JSON has k=" + std::to_string(out.k) + " outside [1, r)");
    }
    validate_groups(out.groups, out.k, out.sigma.size());
    return out;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
    return {{"lambda", cfg.lambda},     {"lr", cfg.lr},         {"steps", cfg.steps},
            {"batch", cfg.batch},       {"rank", cfg.rank},     {"k", cfg.k},
            {"n", cfg.n},               {"seed", cfg.seed},     {"pairs_per_step", cfg.pairs_per_step},
            {"tau", cfg.tau},           {"momentum", cfg.momentum}};
}

TrainConfig config_from_json(const nlohmann::json& value) {
    if (!value.is_object()) {
        throw ParameterError("config must be a JSON object");
    }
    static const std::set<std::string> known = {"lambda", "lr",   "steps", "batch",          "rank",    "k",
                                                "n",      "seed", "tau",   "pairs_per_step", "momentum"};
    for (const auto& item : value.items()) {
        if (!known.count(item.key())) {
            throw ParameterError("unknown config field '" + item.key() + "'");
        }
    }
    TrainConfig cfg;
    read_field(value, "lambda", cfg.lambda);
    read_field(value, "lr", cfg.lr);
    read_field(value, "steps", cfg.steps);
    read_field(value, "batch", cfg.batch);
    read_field(value, "rank", cfg.rank);
    read_field(value, "k", cfg.k);
    read_field(value, "n", cfg.n);
    read_field(value, "seed", cfg.seed);
    read_field(value, "tau", cfg.tau);
    read_field(value, "pairs_per_step", cfg.pairs_per_step);
    read_field(value, "momentum", cfg.momentum);
    cfg.validate();
    return cfg;
}

nlohmann::json report_to_json(const TrainReport& report) {
    return {{"final_task_loss", report.final_task_loss},
            {"final_orth_loss", report.final_orth_loss},
            {"initial_gram_mass", report.initial_gram_mass},
            {"final_gram_mass", report.gram_mass_trace.empty() ? report.initial_gram_mass
                                                                : report.gram_mass_trace.back()},
            {"initial_heatmap_mass", report.initial_heatmap_mass},
            {"final_heatmap_mass", report.final_heatmap_mass},
            {"frozen_checksum_before", hex64(report.frozen_checksum_before)},
            {"frozen_checksum_after", hex64(report.frozen_checksum_after)},
            {"steps", report.task_trace.size()},
            {"task_loss_trace", report.task_trace},
            {"orth_loss_trace", report.orth_trace},
            {"total_loss_trace", report.total_trace},
            {"gram_mass_trace", report.gram_mass_trace},
            {"partition", partition_to_json(report.partition)}};
}

std::string loss_trace_csv(const TrainReport& report) {
    std::string out = "step,task_loss,orth_loss\n";
    for (std::size_t s = 0; s < report.task_trace.size(); ++s) {
        out += fmt::format("{},{},{}\n", s, format_number(report.task_trace[s]), format_number(report.orth_trace[s]));
    }
    return out;
}

std::string spectrum_csv(const Vector& spectrum) {
    std::string out = "index,sigma\n";
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
        out += fmt::format("{},{}\n", i, format_number(spectrum[i]));
    }
    return out;
}

std::string heatmap_csv(const OrthHeatmap& heatmap) {
    const Eigen::Index n = heatmap.values.rows();
    std::string out;
    for (Eigen::Index j = 0; j < n; ++j) {
        out += fmt::format("{}g{}", j == 0 ? "" : ",", j);
    }
    out += "\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out += (j == 0 ? "" : ",") + format_number(heatmap.values(i, j));
        }
        out += "\n";
    }
    return out;
}

std::string histogram_csv(const Histogram& histogram) {
    std::string out = "bin,lower,upper,count\n";
    for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
        out += fmt::format("{},{},{},{}\n", b, format_number(histogram.edges[b]),
                           format_number(histogram.edges[b + 1]), histogram.counts[b]);
    }
    return out;
}

BBoxSequence parse_sequence_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<FramePair> frames;
    double last_frame = 0.0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!header_seen) {
            if (line != kSequenceHeader) {
                throw CsvError(source + ":" + std::to_string(line_no) + ": expected header '" + kSequenceHeader + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view field(line.data() + start,
                                         (comma == std::string::npos ? line.size() : comma) - start);
            fields.push_back(parse_double(field, source, line_no));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (fields.size() != 9) {
            throw CsvError(source + ":" + std::to_string(line_no) + ": expected 9 fields, found " +
                           std::to_string(fields.size()));
        }
        if (!frames.empty() && !(fields[0] > last_frame)) {
            throw CsvError(source + ":" + std::to_string(line_no) + ": frames must be strictly increasing");
        }
        last_frame = fields[0];
        FramePair f{{fields[1], fields[2], fields[3], fields[4]}, {fields[5], fields[6], fields[7], fields[8]}};
        try {
            validate_box(f.prediction);
            validate_box(f.truth);
        } catch (const ValidationError& e) {
            throw CsvError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
        frames.push_back(f);
    }
    if (!header_seen) {
        throw CsvError(source + ":1: empty file, expected header '" + std::string(kSequenceHeader) + "'");
    }
    if (frames.empty()) {
        throw CsvError(source + ": no frames");
    }
    return BBoxSequence(std::move(frames));
}

BBoxSequence read_sequence_csv(const std::filesystem::path& path) {
    return parse_sequence_csv(read_file(path), path.string());
}

}  // namespace gola
