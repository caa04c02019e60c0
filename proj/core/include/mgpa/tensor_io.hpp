#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "mgpa/tensor.hpp"

namespace mgpa {

// Binary tensor file ("MGPT"):
//   4 bytes  magic "MGPT"
//   u32      version (= 1)
//   u32      ndim
//   u64[ndim] dims
//   f64[...]  payload, row-major
// All integers and floats are little-endian.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<std::byte> encode_tensor(const Tensor& t);
// Throws TensorFormatError with the failing byte offset.
Tensor decode_tensor(std::span<const std::byte> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
// Throws std::runtime_error when the file cannot be opened, TensorFormatError
// when its contents are malformed.
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace mgpa
