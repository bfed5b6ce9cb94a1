#include "lars/params.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "lars/errors.hpp"

namespace lars {

ParamEntry& ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  LARS_REQUIRE(!contains(name), "duplicate parameter name: " + name);
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  ParamEntry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.values.assign(n, 0.0);
  e.grads.assign(n, 0.0);
  entries_.push_back(std::move(e));
  return entries_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const ParamEntry& e) { return e.name == name; });
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw ContractViolation("unknown parameter: " + std::string(name));
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) std::fill(e.grads.begin(), e.grads.end(), 0.0);
}

void ParamStore::set_trainable(std::string_view prefix, bool trainable) {
  for (auto& e : entries_)
    if (e.name.starts_with(prefix)) e.trainable = trainable;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& e : other.entries_) {
    LARS_REQUIRE(!contains(e.name), "duplicate parameter name: " + e.name);
    entries_.push_back(e);
  }
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.shape != b.shape) return false;
    // bitwise, so that -0.0 != 0.0 and NaN payloads count
    if (a.values.size() != b.values.size() ||
        std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

namespace {

constexpr unsigned char kMagic[4] = {'L', 'A', 'R', 'S'};
constexpr unsigned char kVersion = 0x01;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("truncated checkpoint", pos_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  unsigned char byte() {
    need(1);
    return bytes_[pos_++];
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParamStore& store) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& e : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : e.values) put_f64(out, v);
  }
  return out;
}

ParamStore decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  for (unsigned char m : kMagic)
    if (r.byte() != m) throw ParseError("bad checkpoint magic", r.pos() - 1);
  if (const auto v = r.byte(); v != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(v), r.pos() - 1);
  ParamStore store;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u32();
    if (store.contains(name)) throw ParseError("duplicate entry " + name, r.pos());
    auto& e = store.add(std::move(name), std::move(shape));
    r.need(e.size() * 8);
    for (double& v : e.values) v = r.f64();
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", r.pos());
  return store;
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace lars
