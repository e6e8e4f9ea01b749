#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/nn.hpp"

namespace jamshield::ckpt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr char kMagic[8] = {'J', 'S', 'H', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  nn::Mat value;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string config_echo;

  const nn::Mat& tensor(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw ConfigError("checkpoint missing tensor: " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return true;
    return false;
  }
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw ConfigError("checkpoint truncated");
  return v;
}

inline void write_f64_block(std::ostream& os, const nn::Mat& m) {
  std::vector<double> buf(static_cast<size_t>(m.rows()) * m.cols());
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) buf[k++] = m(r, c);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(double)));
}

inline nn::Mat read_f64_block(std::istream& is, std::uint32_t rows,
                              std::uint32_t cols) {
  std::vector<double> buf(static_cast<size_t>(rows) * cols);
  if (!is.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(double))))
    throw ConfigError("checkpoint truncated");
  nn::Mat m(rows, cols);
  size_t k = 0;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = buf[k++];
  return m;
}

}  // namespace detail

inline void save(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  detail::write_u32(os, kVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    detail::write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(t.value.rows()));
    detail::write_u32(os, static_cast<std::uint32_t>(t.value.cols()));
    detail::write_f64_block(os, t.value);
  }
  detail::write_u32(os, static_cast<std::uint32_t>(ck.config_echo.size()));
  os.write(ck.config_echo.data(),
           static_cast<std::streamsize>(ck.config_echo.size()));
  if (!os) throw ConfigError("checkpoint write failed: " + path);
}

inline Checkpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic)))
    throw ConfigError("not a checkpoint file: " + path);
  std::uint32_t version = detail::read_u32(is);
  if (version != kVersion)
    throw ConfigError("unsupported checkpoint version " +
                      std::to_string(version));
  Checkpoint ck;
  std::uint32_t n = detail::read_u32(is);
  ck.tensors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw ConfigError("checkpoint truncated");
    std::uint32_t rows = detail::read_u32(is);
    std::uint32_t cols = detail::read_u32(is);
    ck.tensors.push_back({std::move(name), detail::read_f64_block(is, rows, cols)});
  }
  std::uint32_t echo_len = detail::read_u32(is);
  ck.config_echo.resize(echo_len);
  if (echo_len > 0 && !is.read(ck.config_echo.data(), echo_len))
    throw ConfigError("checkpoint truncated");
  return ck;
}

inline Checkpoint from_store(const nn::ParamStore& ps, std::string echo) {
  Checkpoint ck;
  ck.config_echo = std::move(echo);
  for (int i = 0; i < static_cast<int>(ps.count()); ++i)
    ck.tensors.push_back({ps.at(i).name, ps.at(i).value});
  return ck;
}

// Restores values into params of matching index; names and shapes must agree.
inline void into_store(const Checkpoint& ck, nn::ParamStore& ps) {
  if (ck.tensors.size() < ps.count())
    throw ConfigError("checkpoint has fewer tensors than parameter store");
  for (int i = 0; i < static_cast<int>(ps.count()); ++i) {
    const nn::Mat& src = ck.tensor(ps.at(i).name);
    nn::Mat& dst = ps.at(i).value;
    if (src.rows() != dst.rows() || src.cols() != dst.cols())
      throw ConfigError("checkpoint shape mismatch for " + ps.at(i).name);
    dst = src;
  }
}

}  // namespace jamshield::ckpt
