#pragma once

#include <stdexcept>

namespace markush {

/// Unreadable or unwritable file.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Readable file with contents we do not understand (bad magic, bad schema).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace markush
