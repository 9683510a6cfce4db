#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hebbsnn/common.hpp"

namespace hebbsnn {

// Self-describing binary container for named tensors plus string metadata.
// Layout (all integers and floats little-endian):
//   8 bytes magic "HSNNCKPT", u32 version,
//   u32 tensor count, then per tensor: u32 name length, name bytes,
//     u32 ndim, u64 dims..., f64 data,
//   u32 meta count, then per entry: u32 key length, key, u32 value length, value.
struct Checkpoint {
  struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
  };

  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> meta;

  void add(const std::string& name, const Mat& m);
  void add(const std::string& name, const std::vector<double>& v);
  const Tensor& get(const std::string& name) const;
  // Shape-checked extraction; throws on missing tensor or mismatch.
  void read(const std::string& name, Mat& out) const;
  void read(const std::string& name, std::vector<double>& out) const;
  std::string meta_or(const std::string& key, const std::string& fallback) const;

  // Writes to a temporary file first and renames, so an interrupted run
  // leaves the previous checkpoint intact.
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace hebbsnn
