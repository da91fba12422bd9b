#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>

#include "mldili/errors.hpp"

namespace mldili::io {

// Little-endian binary primitives. The host is little-endian on every
// platform this project targets; a guard in write_header catches the rest.

inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw NumericalError("binary file truncated");
  return v;
}

inline double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw NumericalError("binary file truncated");
  return v;
}

inline void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * v.size()));
}

inline void get_vector(std::istream& is, Eigen::VectorXd& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  if (!is) throw NumericalError("binary file truncated");
}

// Row-major matrix payload.
inline void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
}

inline void get_matrix(std::istream& is, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(is);
}

inline void write_magic(std::ostream& os, const char magic[8]) {
  static_assert(sizeof(std::uint64_t) == 8);
  const std::uint64_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) != 1)
    throw NumericalError("binary files require a little-endian host");
  os.write(magic, 8);
}

inline void check_magic(std::istream& is, const char magic[8],
                        const std::string& what) {
  char buf[8] = {};
  is.read(buf, 8);
  if (!is || std::string(buf, 8) != std::string(magic, 8))
    throw NumericalError(what + ": bad or missing file header");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  return is;
}

}  // namespace mldili::io
