#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rollalign::npy {

// NPY 1.0, C order, little endian. Only '<f4' and '|u1' payloads are supported.
template <typename T>
struct Array {
    std::vector<std::size_t> shape;
    std::vector<T> data;
};

void write(const std::filesystem::path& path, std::span<const float> data,
           std::span<const std::size_t> shape);
void write(const std::filesystem::path& path, std::span<const std::uint8_t> data,
           std::span<const std::size_t> shape);

// Throws ProtocolMismatch on malformed files or an unexpected dtype.
Array<float> read_f32(const std::filesystem::path& path);
Array<std::uint8_t> read_u8(const std::filesystem::path& path);

}  // namespace rollalign::npy
