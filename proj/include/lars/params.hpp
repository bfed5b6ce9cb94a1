#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lars {

struct ParamEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grads;
  bool trainable = true;

  std::size_t size() const { return values.size(); }
};

// Named, shaped parameter tensors with paired gradient buffers. Entries
// keep insertion order, which is also the checkpoint order.
class ParamStore {
 public:
  // Adds a zero-initialised entry; names must be unique.
  ParamEntry& add(std::string name, std::vector<std::size_t> shape);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  ParamEntry& at(std::string_view name) { return entries_[index_of(name)]; }
  const ParamEntry& at(std::string_view name) const { return entries_[index_of(name)]; }
  ParamEntry& at(std::size_t i) { return entries_[i]; }
  const ParamEntry& at(std::size_t i) const { return entries_[i]; }

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  void zero_grads();
  // Marks every entry whose name starts with `prefix`.
  void set_trainable(std::string_view prefix, bool trainable);

  // Appends all entries of `other`; names must not collide.
  void merge(const ParamStore& other);

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<ParamEntry> entries_;
};

// Binary checkpoint: "LARS", version byte 0x01, u32 entry count, then per
// entry u32 name length, UTF-8 name, u32 rank, rank x u32 dims and the raw
// little-endian float64 values. Gradients and optimizer state are not stored.
std::vector<unsigned char> encode_checkpoint(const ParamStore& store);
ParamStore decode_checkpoint(const std::vector<unsigned char>& bytes);
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace lars
