#pragma once

#include <stdexcept>
#include <string>

namespace hloc {

/// Input failed a schema or invariant check (bad file content, out-of-range
/// parameter, inconsistent dimensions). Maps to CLI exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure (missing file, short read, write error).
/// Maps to CLI exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hloc
