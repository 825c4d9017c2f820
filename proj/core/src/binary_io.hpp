#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "gridrl/errors.hpp"

namespace gridrl::io {

// Little helpers for the checkpoint format: raw host-endian scalars and
// length-prefixed Eigen blocks.

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw SchemaError("checkpoint: truncated stream");
  }
  return value;
}

inline void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline Eigen::MatrixXd get_matrix(std::istream& in) {
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24)) {
    throw SchemaError("checkpoint: implausible matrix shape");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) {
    throw SchemaError("checkpoint: truncated matrix");
  }
  return m;
}

inline void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  put_matrix(out, v);
}

inline Eigen::VectorXd get_vector(std::istream& in) {
  Eigen::MatrixXd m = get_matrix(in);
  if (m.cols() != 1) {
    throw SchemaError("checkpoint: expected a column vector");
  }
  return m.col(0);
}

inline void put_tag(std::ostream& out, const std::string& tag) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tag.size()));
  out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
}

inline void expect_tag(std::istream& in, const std::string& tag) {
  const auto n = get<std::uint32_t>(in);
  if (n > 256) {
    throw SchemaError("checkpoint: corrupt section tag");
  }
  std::string got(n, '\0');
  in.read(got.data(), n);
  if (!in || got != tag) {
    throw SchemaError("checkpoint: expected section '" + tag + "'");
  }
}

}  // namespace gridrl::io
