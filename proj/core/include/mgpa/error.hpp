#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mgpa {

// Raised when a caller breaks an operation's precondition (shape mismatch,
// non-positive scale, bad index, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when the optimizer produces a non-finite value. The message names
// the offending term or parameter block.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an input file is malformed. Carries the byte offset at which
// parsing failed when there is one (structural problems, such as a tensor of
// the wrong shape, have none).
class DataFormatError : public std::runtime_error {
 public:
  DataFormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

// Raised while decoding a binary tensor file.
class TensorFormatError : public DataFormatError {
 public:
  TensorFormatError(const std::string& what, std::uint64_t offset) : DataFormatError(what, offset) {}
};

inline void require(bool condition, std::string_view message) {
  if (!condition) throw ContractViolation(std::string(message));
}

}  // namespace mgpa
