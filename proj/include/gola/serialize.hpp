#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gola/metrics.hpp"
#include "gola/orth.hpp"
#include "gola/train.hpp"

namespace gola {

// Nine significant digits, the fixed format of every CSV number.
std::string format_number(double value);

// Pretty-printed JSON with a trailing newline.
std::string dump_json(const nlohmann::json& value);

// {"sigma":[...], "k":.., "n":.., "groups":[[...],...], "seed":.., "degenerate":..}
// Indices are 0-based; group members are sorted-slot positions.
nlohmann::json partition_to_json(const RankPartition& partition);
RankPartition partition_from_json(const nlohmann::json& value);

nlohmann::json config_to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys or wrong types throw ParameterError.
TrainConfig config_from_json(const nlohmann::json& value);

nlohmann::json report_to_json(const TrainReport& report);

std::string loss_trace_csv(const TrainReport& report);
std::string spectrum_csv(const Vector& spectrum);
std::string heatmap_csv(const OrthHeatmap& heatmap);
std::string histogram_csv(const Histogram& histogram);

// Header `frame,px,py,pw,ph,gx,gy,gw,gh`, frames strictly increasing.
// Malformed rows throw CsvError naming the file and line.
class CsvError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

BBoxSequence parse_sequence_csv(const std::string& text, const std::string& source);
BBoxSequence read_sequence_csv(const std::filesystem::path& path);

}  // namespace gola
