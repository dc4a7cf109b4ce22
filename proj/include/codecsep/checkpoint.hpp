#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "codecsep/autodiff.hpp"

namespace codecsep {

// NTAR1 tensor archive.
//
// Layout (all integers little-endian):
//   magic "NTAR1" (5 bytes)
//   u32 tensor count
//   per tensor: u32 name length, name bytes (UTF-8), u8 dtype (0 = f32),
//               u32 rank, u64 dims..., raw row-major f32 payload
//   u32 metadata length, metadata bytes: UTF-8 "key=value" lines
//
// Metadata keys preserve insertion order on write; duplicate keys are
// rejected on read.
struct TensorArchive {
  std::vector<std::pair<std::string, ad::Tensor>> tensors;
  std::vector<std::pair<std::string, std::string>> metadata;

  bool has_tensor(const std::string& name) const;
  const ad::Tensor& tensor(const std::string& name) const;  // throws if missing
  bool has_meta(const std::string& key) const;
  const std::string& meta(const std::string& key) const;  // throws if missing
  std::string meta_or(const std::string& key, const std::string& fallback) const;

  void add_tensor(std::string name, ad::Tensor t);
  void set_meta(std::string key, std::string value);
};

void save_archive(const TensorArchive& a, const std::string& path);
TensorArchive load_archive(const std::string& path);  // throws on bad magic/truncation/dtype

}  // namespace codecsep
