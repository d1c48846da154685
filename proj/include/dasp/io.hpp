// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp::io {

// Binary tensor container: magic "DSPT", u32 version, u32 ndim,
// u64 dims[ndim], then little-endian f64 payload. Checkpoints are a count
// followed by (u32 name length, name bytes, tensor) records.

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n,
                       const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw std::runtime_error(std::string("tensor container: truncated ") +
                             what);
}

template <class T>
void write_le(std::ostream& os, T v) {
  // Host is little-endian on every supported target; keep the raw write.
  write_bytes(os, &v, sizeof(T));
}

template <class T>
T read_le(std::istream& is, const char* what) {
  T v;
  read_bytes(is, &v, sizeof(T), what);
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kTensorFormatVersion = 1;

inline void save_tensor(std::ostream& os, const Tensor& t) {
  detail::write_bytes(os, "DSPT", 4);
  detail::write_le<std::uint32_t>(os, kTensorFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t e : t.shape())
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(e));
  detail::write_bytes(os, t.data().data(), t.size() * sizeof(double));
}

inline Tensor load_tensor(std::istream& is) {
  char magic[4];
  detail::read_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, "DSPT", 4) != 0)
    throw std::runtime_error("tensor container: bad magic");
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != kTensorFormatVersion)
    throw std::runtime_error("tensor container: unsupported version " +
                             std::to_string(version));
  const auto ndim = detail::read_le<std::uint32_t>(is, "ndim");
  std::vector<std::size_t> shape(ndim);
  for (auto& e : shape)
    e = static_cast<std::size_t>(detail::read_le<std::uint64_t>(is, "dim"));
  Tensor t(shape);
  detail::read_bytes(is, t.data().data(), t.size() * sizeof(double),
                     "payload");
  return t;
}

inline void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  save_tensor(os, t);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return load_tensor(is);
}

using Checkpoint = std::map<std::string, Tensor>;

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cp.size()));
  for (const auto& [name, tensor] : cp) {
    detail::write_le<std::uint32_t>(os,
                                    static_cast<std::uint32_t>(name.size()));
    detail::write_bytes(os, name.data(), name.size());
    save_tensor(os, tensor);
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  const auto count = detail::read_le<std::uint32_t>(is, "entry count");
  Checkpoint cp;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_le<std::uint32_t>(is, "name length");
    std::string name(len, '\0');
    detail::read_bytes(is, name.data(), len, "name");
    cp.emplace(std::move(name), load_tensor(is));
  }
  return cp;
}

}  // namespace dasp::io
