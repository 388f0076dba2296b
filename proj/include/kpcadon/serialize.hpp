#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kpcadon/errors.hpp"
#include "kpcadon/matrix.hpp"

namespace kpcadon::io {

// Binary container primitives shared by the model and dataset formats. All
// integers and floats are little-endian; arrays carry an explicit shape
// header (u32 rank, u64 dims) ahead of raw f64 data. Byte layouts are fixed
// here and documented in docs/formats.md; both formats round-trip doubles
// bit-exactly.

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw io_error("truncated file while reading " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw io_error("truncated file while reading " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(read_u64(is, what));
}

inline void write_magic(std::ostream& os, const std::string& magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, const std::string& magic,
                         const std::string& what) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(magic.size()));
  if (!is || got != magic) {
    throw io_error("bad magic in " + what + ": expected '" + magic + "'");
  }
}

/// Length-prefixed UTF-8 string (u64 byte count, then bytes).
inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const std::string& what) {
  const std::uint64_t n = read_u64(is, what + " length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw io_error("truncated file while reading " + what);
  return s;
}

inline void write_f64_block(std::ostream& os, const double* data,
                            std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) write_f64(os, data[i]);
  }
}

inline void read_f64_block(std::istream& is, double* data, std::size_t count,
                           const std::string& what) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw io_error("truncated file while reading " + what);
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = read_f64(is, what);
  }
}

/// Array block: u32 rank, u64 dims[rank], f64 data in row-major order.
inline void write_array(std::ostream& os, const Matrix& m) {
  write_u32(os, 2);
  write_u64(os, m.rows());
  write_u64(os, m.cols());
  write_f64_block(os, m.data().data(), m.size());
}

inline void write_array(std::ostream& os, std::span<const double> v) {
  write_u32(os, 1);
  write_u64(os, v.size());
  write_f64_block(os, v.data(), v.size());
}

/// Scalar as a rank-0 array block.
inline void write_array(std::ostream& os, double v) {
  write_u32(os, 0);
  write_f64(os, v);
}

inline Matrix read_array_2d(std::istream& is, const std::string& what) {
  const std::uint32_t rank = read_u32(is, what + " rank");
  if (rank != 2) {
    throw io_error(what + ": expected rank-2 array, got rank " +
                   std::to_string(rank));
  }
  const std::uint64_t rows = read_u64(is, what + " rows");
  const std::uint64_t cols = read_u64(is, what + " cols");
  Matrix m(rows, cols);
  read_f64_block(is, m.data().data(), m.size(), what);
  return m;
}

inline std::vector<double> read_array_1d(std::istream& is,
                                         const std::string& what) {
  const std::uint32_t rank = read_u32(is, what + " rank");
  if (rank != 1) {
    throw io_error(what + ": expected rank-1 array, got rank " +
                   std::to_string(rank));
  }
  const std::uint64_t n = read_u64(is, what + " length");
  std::vector<double> v(n);
  read_f64_block(is, v.data(), n, what);
  return v;
}

inline double read_array_scalar(std::istream& is, const std::string& what) {
  const std::uint32_t rank = read_u32(is, what + " rank");
  if (rank != 0) {
    throw io_error(what + ": expected rank-0 array, got rank " +
                   std::to_string(rank));
  }
  return read_f64(is, what);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot open '" + path + "' for writing");
  return os;
}

/// Write-temp-then-rename file sink: the final path either keeps its old
/// content or receives the complete new content, never a partial write.
/// Destruction without commit() removes the temporary.
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path)
      : path_(path), tmp_(path + ".tmp") {
    os_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!os_) throw io_error("cannot open '" + path + "' for writing");
  }

  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  ~AtomicFile() {
    if (os_.is_open()) {
      os_.close();
      std::error_code ignored;
      std::filesystem::remove(tmp_, ignored);
    }
  }

  std::ostream& stream() { return os_; }

  void commit() {
    os_.flush();
    if (!os_) throw io_error("failed writing '" + path_ + "'");
    os_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) {
      throw io_error("cannot move '" + tmp_ + "' to '" + path_ +
                     "': " + ec.message());
    }
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream os_;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace kpcadon::io
