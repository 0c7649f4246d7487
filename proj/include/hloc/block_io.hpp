#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace hloc {

// Shared binary container for descriptor-style matrices. Each block is
//   magic "HLOC" | format version u32 | dim u32 | count u64 | payload
// with the payload stored row-major (one vector per row), little-endian.
// Version 1 carries float32 payloads (map descriptor sidecars), version 2
// carries float64 payloads (PCA projector files).

inline constexpr char kBlockMagic[4] = {'H', 'L', 'O', 'C'};
inline constexpr std::uint32_t kBlockVersionF32 = 1;
inline constexpr std::uint32_t kBlockVersionF64 = 2;

/// Writes one block; `vectors` holds one vector per column (dim x count).
void write_block(std::ostream& out, const Eigen::MatrixXf& vectors);
void write_block(std::ostream& out, const Eigen::MatrixXd& vectors);

/// Reads one block, returning vectors as columns. `context` names the block
/// in error messages.
Eigen::MatrixXf read_block_f32(std::istream& in, const std::string& context);
Eigen::MatrixXd read_block_f64(std::istream& in, const std::string& context);

}  // namespace hloc
