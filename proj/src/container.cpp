#include "gola/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gola/fileutil.hpp"

namespace gola {

namespace {

constexpr std::size_t kPreambleBytes = 4 + 4 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t at) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(bytes[at + i]) << (8 * i);
    }
    return value;
}

MatrixF to_matrix(const Tensor& t) {
    MatrixF m(static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
    for (std::size_t r = 0; r < t.rows; ++r) {
        for (std::size_t c = 0; c < t.cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.data[r * t.cols + c];
        }
    }
    return m;
}

Tensor from_matrix(const std::string& name, const Matrix& m) {
    Tensor t;
    t.name = name;
    t.rows = static_cast<std::size_t>(m.rows());
    t.cols = static_cast<std::size_t>(m.cols());
    t.data.reserve(t.rows * t.cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            t.data.push_back(static_cast<float>(m(r, c)));
        }
    }
    return t;
}

}  // namespace

const Tensor& Container::tensor(const std::string& name) const {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const Tensor& t) { return t.name == name; });
    if (it == tensors.end()) {
        throw ValidationError("container has no tensor named '" + name + "'");
    }
    return *it;
}

std::vector<std::uint8_t> encode_container(const Container& container) {
    nlohmann::json header;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const Tensor& t : container.tensors) {
        if (t.data.size() != t.rows * t.cols) {
            throw ShapeError("tensor '" + t.name + "' holds " + std::to_string(t.data.size()) +
                             " values but its shape is " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
        }
        const std::uint64_t length = t.data.size() * sizeof(float);
        header["tensors"].push_back({{"name", t.name},
                                     {"shape", {t.rows, t.cols}},
                                     {"dtype", "f32"},
                                     {"offset", offset},
                                     {"length_bytes", length}});
        offset += length;
    }
    header["metadata"] = container.metadata;
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kPreambleBytes + text.size() + offset);
    out.insert(out.end(), std::begin(kContainerMagic), std::end(kContainerMagic));
    put_le<std::uint32_t>(out, kContainerVersion);
    put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const Tensor& t : container.tensors) {
        for (float v : t.data) {
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

Container decode_container(std::span<const std::uint8_t> bytes) {
    using Kind = ContainerError::Kind;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kContainerMagic, 4) != 0) {
        throw ContainerError(Kind::BadMagic, "bad magic: not a GOLA container");
    }
    if (bytes.size() < kPreambleBytes) {
        throw ContainerError(Kind::Truncated, "truncated container: preamble is incomplete");
    }
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kContainerVersion) {
        throw ContainerError(Kind::VersionMismatch, "unsupported container version " + std::to_string(version) +
                                                        " (expected " + std::to_string(kContainerVersion) + ")");
    }
    const auto header_len = get_le<std::uint64_t>(bytes, 8);
    if (header_len > bytes.size() - kPreambleBytes) {
        throw ContainerError(Kind::Truncated, "truncated container: header declares " + std::to_string(header_len) +
                                                  " bytes but only " +
                                                  std::to_string(bytes.size() - kPreambleBytes) + " remain");
    }
    const auto header_begin = bytes.begin() + static_cast<std::ptrdiff_t>(kPreambleBytes);
    const auto payload_begin = header_begin + static_cast<std::ptrdiff_t>(header_len);
    const std::span<const std::uint8_t> payload(payload_begin, bytes.end());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_begin, payload_begin);
    } catch (const nlohmann::json::exception& e) {
        throw ContainerError(Kind::MalformedHeader, std::string("malformed container header: ") + e.what());
    }

    Container out;
    struct Extent {
        std::uint64_t begin;
        std::uint64_t end;
        std::string name;
    };
    std::vector<Extent> extents;
    try {
        if (!header.is_object() || !header.contains("tensors") || !header["tensors"].is_array()) {
            throw ContainerError(Kind::MalformedHeader, "malformed container header: missing tensor list");
        }
        out.metadata = header.value("metadata", nlohmann::json::object());
        for (const auto& entry : header["tensors"]) {
            Tensor t;
            t.name = entry.at("name").get<std::string>();
            const auto& shape = entry.at("shape");
            if (!shape.is_array() || shape.size() != 2) {
                throw ContainerError(Kind::MalformedHeader, "tensor '" + t.name + "' must have a 2-D shape");
            }
            if (entry.at("dtype").get<std::string>() != "f32") {
                throw ContainerError(Kind::MalformedHeader, "tensor '" + t.name + "' has unsupported dtype " +
                                                                entry.at("dtype").dump());
            }
            t.rows = shape[0].get<std::size_t>();
            t.cols = shape[1].get<std::size_t>();
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const auto length = entry.at("length_bytes").get<std::uint64_t>();
            if (t.rows * t.cols * sizeof(float) != length) {
                throw ContainerError(Kind::ShapeMismatch, "tensor '" + t.name + "' shape " + std::to_string(t.rows) +
                                                              "x" + std::to_string(t.cols) + " does not match " +
                                                              std::to_string(length) + " bytes");
            }
            if (offset > payload.size() || length > payload.size() - offset) {
                throw ContainerError(Kind::Truncated, "truncated payload: tensor '" + t.name + "' needs bytes [" +
                                                          std::to_string(offset) + ", " +
                                                          std::to_string(offset + length) + ") of " +
                                                          std::to_string(payload.size()));
            }
            t.data.resize(t.rows * t.cols);
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                t.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload, offset + 4 * i));
            }
            extents.push_back({offset, offset + length, t.name});
            out.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContainerError(Kind::MalformedHeader, std::string("malformed container header: ") + e.what());
    }

    std::sort(extents.begin(), extents.end(), [](const Extent& a, const Extent& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < extents.size(); ++i) {
        if (extents[i].begin < extents[i - 1].end) {
            throw ContainerError(Kind::Overlap, "overlapping tensors '" + extents[i - 1].name + "' and '" +
                                                    extents[i].name + "' in payload");
        }
    }
    return out;
}

void write_container(const std::filesystem::path& path, const Container& container) {
    const auto bytes = encode_container(container);
    write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Container read_container(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    return decode_container(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

Container adapter_to_container(const AdapterPair& adapter, const std::string& layer_name) {
    Container out;
    out.tensors.push_back(from_matrix("W", adapter.W()));
    out.tensors.push_back(from_matrix("A", adapter.A()));
    out.tensors.push_back(from_matrix("B", adapter.B()));
    out.metadata = {{"r", adapter.rank()}, {"scale", adapter.scale()}, {"layer_name", layer_name}};
    return out;
}

AdapterPair adapter_from_container(const Container& container) {
    const MatrixF W = to_matrix(container.tensor("W"));
    const MatrixF A = to_matrix(container.tensor("A"));
    const MatrixF B = to_matrix(container.tensor("B"));
    double scale = 1.0;
    if (container.metadata.contains("scale")) {
        scale = container.metadata["scale"].get<double>();
    }
    AdapterPair adapter(W.cast<double>(), A.cast<double>(), B.cast<double>(), scale);
    if (container.metadata.contains("r") && container.metadata["r"].get<std::size_t>() != adapter.rank()) {
        throw ShapeError("container metadata says r=" + container.metadata["r"].dump() + " but A has " +
                         std::to_string(adapter.rank()) + " rows");
    }
    return adapter;
}

}  // namespace gola
