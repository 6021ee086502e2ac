#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/model/config.hpp"
#include "safmn/model/safmn.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

// Binary layout (all integers little-endian, all values IEEE-754 binary64):
//
//   "SAFM" u16 version
//   u32 num_blocks  u32 channels  u32 scale  u32 len  variant text
//   u64 iteration   u64 seed
//   u32 count  { record }   parameters
//   u32 count  { record }   buffers
//   u8 has_optimizer [ u64 step  u32 count { record }  u32 count { record } ]
//
//   record := u32 name_len  name  u32 rank  u64 dims[rank]  f64 values[prod(dims)]
inline constexpr char kCheckpointMagic[4] = {'S', 'A', 'F', 'M'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedBlob {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const NamedBlob&, const NamedBlob&) = default;
};

struct OptimizerBlob {
  std::uint64_t step = 0;
  std::vector<NamedBlob> first_moment;
  std::vector<NamedBlob> second_moment;

  friend bool operator==(const OptimizerBlob&, const OptimizerBlob&) = default;
};

struct Checkpoint {
  std::uint16_t version = kCheckpointVersion;
  ModelConfig config;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::vector<NamedBlob> params;
  std::vector<NamedBlob> buffers;
  std::optional<OptimizerBlob> optimizer;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
  std::uint64_t u64() { return get(8, "u64"); }
  double f64() { return std::bit_cast<double>(get(8, "f64")); }

  std::string str(const char* what) {
    const std::size_t n = u32();
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
  }

 private:
  std::uint64_t get(std::size_t n, const char* what) {
    need(n, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

inline void write_records(ByteWriter& w, const std::vector<NamedBlob>& records) {
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    w.str(r.name);
    w.u32(4);
    w.u64(r.shape.n);
    w.u64(r.shape.c);
    w.u64(r.shape.h);
    w.u64(r.shape.w);
    for (double v : r.values) w.f64(v);
  }
}

inline std::vector<NamedBlob> read_records(ByteReader& r) {
  const std::uint32_t count = r.u32();
  std::vector<NamedBlob> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedBlob b;
    b.name = r.str("record name");
    const std::size_t rank_pos = r.pos();
    const std::uint32_t rank = r.u32();
    if (rank != 4) throw FormatError("unsupported record rank " + std::to_string(rank), rank_pos);
    b.shape = Shape{r.u64(), r.u64(), r.u64(), r.u64()};
    const std::size_t n = b.shape.numel();
    r.need(n * 8, "record values");
    b.values.resize(n);
    for (auto& v : b.values) v = r.f64();
    out.push_back(std::move(b));
  }
  return out;
}

template <class T>
NamedBlob to_blob(const std::string& name, const Tensor<T>& t) {
  NamedBlob b{name, t.shape(), std::vector<double>(t.numel())};
  for (std::size_t i = 0; i < t.numel(); ++i) b.values[i] = static_cast<double>(t[i]);
  return b;
}

template <class T>
void from_blob(const NamedBlob& b, const std::string& expected_name, Tensor<T>& t) {
  if (b.name != expected_name || !(b.shape == t.shape())) {
    throw FormatError("checkpoint record '" + b.name + "' " + to_string(b.shape) +
                          " does not match model parameter '" + expected_name + "' " +
                          to_string(t.shape()),
                      0);
  }
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(b.values[i]);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u16(ck.version);
  w.u32(static_cast<std::uint32_t>(ck.config.num_blocks));
  w.u32(static_cast<std::uint32_t>(ck.config.channels));
  w.u32(static_cast<std::uint32_t>(ck.config.scale));
  w.str(to_string(ck.config.variant));
  w.u64(ck.iteration);
  w.u64(ck.seed);
  detail::write_records(w, ck.params);
  detail::write_records(w, ck.buffers);
  w.u8(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    w.u64(ck.optimizer->step);
    detail::write_records(w, ck.optimizer->first_moment);
    detail::write_records(w, ck.optimizer->second_moment);
  }
  return w.take();
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.need(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (r.u8() != static_cast<std::uint8_t>(kCheckpointMagic[i])) {
      throw FormatError("bad checkpoint magic (expected \"SAFM\")", static_cast<std::size_t>(i));
    }
  }
  Checkpoint ck;
  const std::size_t version_pos = r.pos();
  ck.version = r.u16();
  if (ck.version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(ck.version), version_pos);
  }
  ck.config.num_blocks = r.u32();
  ck.config.channels = r.u32();
  ck.config.scale = r.u32();
  const std::size_t variant_pos = r.pos();
  try {
    ck.config.variant = variant_from_string(r.str("variant"));
    validate(ck.config);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model config: ") + e.what(), variant_pos);
  }
  ck.iteration = r.u64();
  ck.seed = r.u64();
  ck.params = detail::read_records(r);
  ck.buffers = detail::read_records(r);
  const std::size_t flag_pos = r.pos();
  const std::uint8_t has_opt = r.u8();
  if (has_opt > 1) throw FormatError("bad optimizer flag", flag_pos);
  if (has_opt == 1) {
    OptimizerBlob o;
    o.step = r.u64();
    o.first_moment = detail::read_records(r);
    o.second_moment = detail::read_records(r);
    ck.optimizer = std::move(o);
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.pos());
  return ck;
}

template <class T>
Checkpoint make_checkpoint(const SafmnModel<T>& model, std::uint64_t iteration = 0,
                           std::uint64_t seed = 0) {
  Checkpoint ck;
  ck.config = model.config();
  ck.iteration = iteration;
  ck.seed = seed;
  model.for_each_param([&ck](const std::string& name, const Tensor<T>& t) {
    ck.params.push_back(detail::to_blob(name, t));
  });
  model.for_each_buffer([&ck](const std::string& name, const Tensor<T>& t) {
    ck.buffers.push_back(detail::to_blob(name, t));
  });
  return ck;
}

template <class T>
SafmnModel<T> model_from_checkpoint(const Checkpoint& ck) {
  SafmnModel<T> model(ck.config);
  std::size_t i = 0;
  model.for_each_param([&](const std::string& name, Tensor<T>& t) {
    if (i >= ck.params.size()) throw FormatError("checkpoint is missing parameter " + name, 0);
    detail::from_blob(ck.params[i++], name, t);
  });
  if (i != ck.params.size()) throw FormatError("checkpoint has extra parameter records", 0);
  std::size_t j = 0;
  model.for_each_buffer([&](const std::string& name, Tensor<T>& t) {
    if (j >= ck.buffers.size()) throw FormatError("checkpoint is missing buffer " + name, 0);
    detail::from_blob(ck.buffers[j++], name, t);
  });
  if (j != ck.buffers.size()) throw FormatError("checkpoint has extra buffer records", 0);
  return model;
}

inline void write_checkpoint_file(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ck);
  // write-then-rename so an interrupted save never clobbers the previous file
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <class T>
void save_checkpoint(const SafmnModel<T>& model, const std::filesystem::path& path,
                     std::uint64_t iteration = 0, std::uint64_t seed = 0) {
  write_checkpoint_file(make_checkpoint(model, iteration, seed), path);
}

template <class T>
SafmnModel<T> load_checkpoint(const std::filesystem::path& path) {
  return model_from_checkpoint<T>(read_checkpoint_file(path));
}

}  // namespace safmn
