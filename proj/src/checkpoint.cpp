#include "hebbsnn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace hebbsnn {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};

static_assert(sizeof(double) == 8, "64-bit IEEE doubles required");

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    T out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  }
}

template <class T>
T from_le(T v) {
  return to_le(v);
}

struct Writer {
  std::FILE* f;
  void bytes(const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f) != n) fail_numeric("checkpoint: write failed");
  }
  void u32(std::uint32_t v) {
    v = to_le(v);
    bytes(&v, 4);
  }
  void u64(std::uint64_t v) {
    v = to_le(v);
    bytes(&v, 8);
  }
  void f64_array(const double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(p, n * 8);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, p + i, 8);
        u64(bits);
      }
    }
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::FILE* f;
  void bytes(void* p, std::size_t n) {
    if (std::fread(p, 1, n, f) != n) fail_numeric("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return from_le(v);
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return from_le(v);
  }
  void f64_array(double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(p, n * 8);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = u64();
        std::memcpy(p + i, &bits, 8);
      }
    }
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) fail_numeric("checkpoint: implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void Checkpoint::add(const std::string& name, const Mat& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows), static_cast<std::uint64_t>(m.cols)};
  t.data = m.a;
  tensors[name] = std::move(t);
}

void Checkpoint::add(const std::string& name, const std::vector<double>& v) {
  Tensor t;
  t.dims = {v.size()};
  t.data = v;
  tensors[name] = std::move(t);
}

const Checkpoint::Tensor& Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail_numeric("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

void Checkpoint::read(const std::string& name, Mat& out) const {
  const Tensor& t = get(name);
  if (t.dims.size() != 2 || t.dims[0] != static_cast<std::uint64_t>(out.rows) ||
      t.dims[1] != static_cast<std::uint64_t>(out.cols)) {
    fail_numeric("checkpoint: shape mismatch for tensor '" + name + "'");
  }
  out.a = t.data;
}

void Checkpoint::read(const std::string& name, std::vector<double>& out) const {
  const Tensor& t = get(name);
  if (t.dims.size() != 1 || t.dims[0] != out.size()) {
    fail_numeric("checkpoint: shape mismatch for tensor '" + name + "'");
  }
  out = t.data;
}

std::string Checkpoint::meta_or(const std::string& key, const std::string& fallback) const {
  auto it = meta.find(key);
  return it == meta.end() ? fallback : it->second;
}

void Checkpoint::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) fail_numeric("checkpoint: cannot open '" + tmp + "' for writing");
  Writer w{f};
  w.bytes(kMagic, 8);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    std::uint64_t total = 1;
    for (std::uint64_t d : t.dims) {
      w.u64(d);
      total *= d;
    }
    HSNN_CHECK_STATE(total == t.data.size(), "checkpoint: tensor dims inconsistent");
    w.f64_array(t.data.data(), t.data.size());
  }
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  if (std::fclose(f) != 0) fail_numeric("checkpoint: close failed");
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    fail_numeric("checkpoint: rename to '" + path + "' failed");
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail_numeric("checkpoint: cannot open '" + path + "'");
  Checkpoint ck;
  try {
    Reader r{f};
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) fail_numeric("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
      fail_numeric("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t n_tensors = r.u32();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
      const std::string name = r.str();
      Tensor t;
      const std::uint32_t ndim = r.u32();
      if (ndim > 8) fail_numeric("checkpoint: implausible rank");
      std::uint64_t total = 1;
      for (std::uint32_t d = 0; d < ndim; ++d) {
        t.dims.push_back(r.u64());
        total *= t.dims.back();
      }
      if (total > (1ull << 32)) fail_numeric("checkpoint: implausible tensor size");
      t.data.resize(total);
      r.f64_array(t.data.data(), total);
      ck.tensors[name] = std::move(t);
    }
    const std::uint32_t n_meta = r.u32();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
      const std::string k = r.str();
      ck.meta[k] = r.str();
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return ck;
}

}  // namespace hebbsnn
