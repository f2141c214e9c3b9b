#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fpn {

/// Malformed input: bad files, bad flags, violated preconditions.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A requested computation exceeds a configured dense-size limit.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Version stamp written into every structured output file.
inline constexpr int kFormatVersion = 1;

/// Largest state space for which dense joint tables are built by default.
inline constexpr std::size_t kDenseStateLimit = std::size_t{1} << 20;

}  // namespace fpn
