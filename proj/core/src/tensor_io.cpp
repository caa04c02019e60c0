#include "mgpa/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>

namespace mgpa {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'P', 'T'};

template <typename U>
void put_le(std::vector<std::byte>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le(const char* what) {
    if (bytes_.size() - pos_ < sizeof(U)) {
      throw TensorFormatError(std::string("truncated tensor file while reading ") + what, pos_);
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::byte at(std::size_t i) const { return bytes_[i]; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_tensor(const Tensor& t) {
  std::vector<std::byte> out;
  out.reserve(16 + 8 * t.ndim() + 8 * t.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  Reader in(bytes);
  if (bytes.size() < 4) throw TensorFormatError("truncated tensor file while reading magic", 0);
  for (std::size_t i = 0; i < 4; ++i) {
    if (in.at(i) != static_cast<std::byte>(kMagic[i])) {
      throw TensorFormatError("bad magic, expected \"MGPT\"", i);
    }
  }
  in.get_le<std::uint32_t>("magic");
  const std::size_t version_at = in.pos();
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kTensorFormatVersion) {
    throw TensorFormatError("unsupported tensor format version " + std::to_string(version),
                            version_at);
  }
  const std::size_t ndim_at = in.pos();
  const auto ndim = in.get_le<std::uint32_t>("ndim");
  if (ndim > 16) throw TensorFormatError("implausible ndim " + std::to_string(ndim), ndim_at);

  std::vector<std::size_t> shape;
  std::uint64_t count = 1;
  for (std::uint32_t d = 0; d < ndim; ++d) {
    const std::size_t dim_at = in.pos();
    const auto dim = in.get_le<std::uint64_t>("dims");
    if (dim != 0 && count > std::numeric_limits<std::uint64_t>::max() / 8 / dim) {
      throw TensorFormatError("tensor dimensions overflow", dim_at);
    }
    count *= dim;
    shape.push_back(static_cast<std::size_t>(dim));
  }
  if (in.remaining() != count * 8) {
    const std::size_t at = in.remaining() < count * 8 ? bytes.size() : in.pos() + count * 8;
    throw TensorFormatError("payload size does not match dims (expected " +
                                std::to_string(count * 8) + " bytes, found " +
                                std::to_string(in.remaining()) + ")",
                            at);
  }
  std::vector<double> values(static_cast<std::size_t>(count));
  for (auto& v : values) {
    const std::size_t at = in.pos();
    v = std::bit_cast<double>(in.get_le<std::uint64_t>("payload"));
    if (!std::isfinite(v)) throw TensorFormatError("non-finite value in payload", at);
  }
  return Tensor(std::move(shape), std::move(values));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace mgpa
