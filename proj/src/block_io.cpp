#include "hloc/block_io.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "hloc/errors.hpp"

namespace hloc {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const std::string& context) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("truncated block header in " + context);
  return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& context) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("truncated block header in " + context);
  return v;
}

template <typename Scalar>
void write_block_impl(std::ostream& out, std::uint32_t version,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& vectors) {
  out.write(kBlockMagic, 4);
  write_u32(out, version);
  write_u32(out, static_cast<std::uint32_t>(vectors.rows()));
  write_u64(out, static_cast<std::uint64_t>(vectors.cols()));
  // Row-major on disk: one vector per row.
  using RowMajor =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor transposed = vectors.transpose();
  out.write(reinterpret_cast<const char*>(transposed.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * transposed.size()));
  if (!out) throw IoError("failed to write descriptor block");
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> read_block_impl(
    std::istream& in, std::uint32_t expected_version, const std::string& context) {
  char magic[4] = {};
  if (!in.read(magic, 4)) throw IoError("truncated block header in " + context);
  if (std::memcmp(magic, kBlockMagic, 4) != 0)
    throw ValidationError("bad block magic in " + context);
  const std::uint32_t version = read_u32(in, context);
  if (version != expected_version)
    throw ValidationError("unexpected block version " + std::to_string(version) + " in " +
                          context);
  const std::uint32_t dim = read_u32(in, context);
  const std::uint64_t count = read_u64(in, context);

  using RowMajor =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  if (!in.read(reinterpret_cast<char*>(rows.data()),
               static_cast<std::streamsize>(sizeof(Scalar) * rows.size())))
    throw IoError("truncated block payload in " + context);
  return rows.transpose();
}

}  // namespace

void write_block(std::ostream& out, const Eigen::MatrixXf& vectors) {
  write_block_impl(out, kBlockVersionF32, vectors);
}

void write_block(std::ostream& out, const Eigen::MatrixXd& vectors) {
  write_block_impl(out, kBlockVersionF64, vectors);
}

Eigen::MatrixXf read_block_f32(std::istream& in, const std::string& context) {
  return read_block_impl<float>(in, kBlockVersionF32, context);
}

Eigen::MatrixXd read_block_f64(std::istream& in, const std::string& context) {
  return read_block_impl<double>(in, kBlockVersionF64, context);
}

}  // namespace hloc
