#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mlgp::io {

/// Little-endian binary serialization with doubles written as raw bytes, so
/// save -> load -> save round-trips are bit-exact.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(const char* tag) { out_.write(tag, 8); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void mat(const Eigen::MatrixXd& m) {
    i32(static_cast<std::int32_t>(m.rows()));
    i32(static_cast<std::int32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void magic(const char* expect) {
    char buf[9] = {};
    raw(buf, 8);
    if (std::string(buf, 8) != std::string(expect)) {
      throw std::runtime_error("io: bad file magic, expected " +
                               std::string(expect));
    }
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  double f64() { return get<double>(); }

  Eigen::MatrixXd mat() {
    const std::int32_t rows = i32();
    const std::int32_t cols = i32();
    if (rows < 0 || cols < 0 || static_cast<std::int64_t>(rows) * cols > (1 << 28)) {
      throw std::runtime_error("io: corrupt matrix header");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64();
    }
    return m;
  }

 private:
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw std::runtime_error("io: truncated file");
    }
  }
  std::istream& in_;
};

/// Refuses versions newer than the build understands.
inline void check_version(std::uint32_t got, std::uint32_t supported,
                          const char* what) {
  if (got > supported) {
    throw std::runtime_error(std::string("io: ") + what + " version " +
                             std::to_string(got) +
                             " is newer than supported version " +
                             std::to_string(supported));
  }
}

}  // namespace mlgp::io
