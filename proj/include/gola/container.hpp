#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gola/adapter.hpp"

namespace gola {

// On-disk layout (all integers little-endian):
//   "GOLA" | u32 version (=1) | u64 header_len | header JSON | payload
// The header lists {name, shape [rows, cols], dtype "f32", offset, length_bytes}
// per tensor, offsets relative to the payload start, plus a metadata object.
inline constexpr char kContainerMagic[4] = {'G', 'O', 'L', 'A'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;  // row-major

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct Container {
    std::vector<Tensor> tensors;
    nlohmann::json metadata = nlohmann::json::object();

    const Tensor& tensor(const std::string& name) const;
};

class ContainerError : public IoError {
public:
    enum class Kind { BadMagic, VersionMismatch, Truncated, MalformedHeader, ShapeMismatch, Overlap };

    ContainerError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::vector<std::uint8_t> encode_container(const Container& container);
Container decode_container(std::span<const std::uint8_t> bytes);

// Writes to a sibling temporary file and renames it into place.
void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

// Tensors "W", "A", "B" in f32 plus metadata {r, scale, layer_name}.
Container adapter_to_container(const AdapterPair& adapter, const std::string& layer_name);
// Upcasts to f64. Throws ShapeError/ValidationError for inconsistent tensors.
AdapterPair adapter_from_container(const Container& container);

}  // namespace gola
