#pragma once

// Binary model container. All integers and floats are little-endian.
//
//   magic            8 bytes  "ACHDSLVQ"
//   version          u32
//   embedding_dim    u64
//   subspace_dim     u64
//   beta             f64
//   distance_kind    u8       0 = chordal, 1 = geodesic
//   class count      u32, then per class: u32 byte length + UTF-8 bytes
//   relevances       f64 × subspace_dim
//   prototype count  u32, then per prototype: u32 class index +
//                    f64 × (embedding_dim · subspace_dim), row-major
//   hyperparameters  f64 lr_prototypes, f64 lr_relevances, u64 epochs,
//                    u64 seed, u64 prototypes_per_class
//   log count        u32, then per entry: u64 epoch, f64 mean_cost,
//                    f64 accuracy, u64 skipped
//   checksum         u64 FNV-1a over every preceding byte

#include "achords/error.hpp"
#include "achords/io_util.hpp"
#include "achords/lvq.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>

namespace achords {

inline constexpr std::string_view kModelMagic = "ACHDSLVQ";
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
public:
  template <class T> void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(raw, raw + sizeof(T));
    bytes_.append(reinterpret_cast<const char *>(raw), sizeof(T));
  }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  void put_raw(std::string_view s) { bytes_.append(s); }
  const std::string &bytes() const { return bytes_; }

private:
  std::string bytes_;
};

class ByteReader {
public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <class T> T get() {
    static_assert(std::is_arithmetic_v<T>);
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view get_raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCategory::format, "model file truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_model(const ModelState &model) {
  validate(model);
  detail::ByteWriter w;
  w.put_raw(kModelMagic);
  w.put(kModelFormatVersion);
  w.put(static_cast<std::uint64_t>(model.embedding_dim));
  w.put(static_cast<std::uint64_t>(model.subspace_dim));
  w.put(model.beta);
  w.put(static_cast<std::uint8_t>(model.distance_kind));
  w.put(static_cast<std::uint32_t>(model.class_labels.size()));
  for (const auto &label : model.class_labels)
    w.put_string(label);
  for (Eigen::Index i = 0; i < model.relevances.size(); ++i)
    w.put(model.relevances.weights(i));
  w.put(static_cast<std::uint32_t>(model.prototypes.size()));
  for (const auto &p : model.prototypes) {
    w.put(static_cast<std::uint32_t>(p.class_index));
    for (Eigen::Index r = 0; r < p.basis.rows(); ++r)
      for (Eigen::Index c = 0; c < p.basis.cols(); ++c)
        w.put(p.basis(r, c));
  }
  w.put(model.hyper.lr_prototypes);
  w.put(model.hyper.lr_relevances);
  w.put(static_cast<std::uint64_t>(model.hyper.epochs));
  w.put(static_cast<std::uint64_t>(model.hyper.seed));
  w.put(static_cast<std::uint64_t>(model.hyper.prototypes_per_class));
  w.put(static_cast<std::uint32_t>(model.training_log.size()));
  for (const auto &e : model.training_log) {
    w.put(static_cast<std::uint64_t>(e.epoch));
    w.put(e.mean_cost);
    w.put(e.accuracy);
    w.put(static_cast<std::uint64_t>(e.skipped));
  }
  w.put(fnv1a64(w.bytes()));
  return w.bytes();
}

inline ModelState deserialize_model(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.get_raw(kModelMagic.size()) != kModelMagic)
    throw Error(ErrorCategory::format, "not a model file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw Error(ErrorCategory::format, "unsupported model format version " + std::to_string(version));

  // The payload is bounded by the file size, so a corrupt count cannot make
  // us allocate more than the file could describe.
  auto bounded = [&](std::uint64_t count, std::size_t bytes_each, const char *what) {
    if (bytes_each != 0 && count > r.remaining() / bytes_each)
      throw Error(ErrorCategory::format, std::string("model file: implausible ") + what);
    return static_cast<std::size_t>(count);
  };

  ModelState m;
  m.embedding_dim = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  m.subspace_dim = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  m.beta = r.get<double>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1)
    throw Error(ErrorCategory::format, "model file: unknown distance kind");
  m.distance_kind = static_cast<DistanceKind>(kind);
  const auto n_classes = bounded(r.get<std::uint32_t>(), 4, "class count");
  for (std::size_t i = 0; i < n_classes; ++i)
    m.class_labels.push_back(r.get_string());
  const auto d = bounded(static_cast<std::uint64_t>(m.subspace_dim), 8, "subspace dimension");
  m.relevances.weights.resize(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    m.relevances.weights(static_cast<Eigen::Index>(i)) = r.get<double>();
  const auto n_protos = bounded(r.get<std::uint32_t>(), 4, "prototype count");
  const auto entries = bounded(static_cast<std::uint64_t>(m.embedding_dim) * d, 8, "prototype size");
  for (std::size_t j = 0; j < n_protos; ++j) {
    Prototype p;
    p.class_index = r.get<std::uint32_t>();
    bounded(entries, 8, "prototype size");
    p.basis.resize(m.embedding_dim, m.subspace_dim);
    for (Eigen::Index row = 0; row < m.embedding_dim; ++row)
      for (Eigen::Index col = 0; col < m.subspace_dim; ++col)
        p.basis(row, col) = r.get<double>();
    m.prototypes.push_back(std::move(p));
  }
  m.hyper.lr_prototypes = r.get<double>();
  m.hyper.lr_relevances = r.get<double>();
  m.hyper.epochs = static_cast<std::size_t>(r.get<std::uint64_t>());
  m.hyper.seed = r.get<std::uint64_t>();
  m.hyper.prototypes_per_class = static_cast<std::size_t>(r.get<std::uint64_t>());
  const auto n_log = bounded(r.get<std::uint32_t>(), 32, "log length");
  for (std::size_t i = 0; i < n_log; ++i) {
    EpochLog e;
    e.epoch = static_cast<std::size_t>(r.get<std::uint64_t>());
    e.mean_cost = r.get<double>();
    e.accuracy = r.get<double>();
    e.skipped = static_cast<std::size_t>(r.get<std::uint64_t>());
    m.training_log.push_back(e);
  }
  const std::size_t payload = r.position();
  const auto stored = r.get<std::uint64_t>();
  if (stored != fnv1a64(bytes.substr(0, payload)))
    throw Error(ErrorCategory::format, "model file checksum mismatch");
  if (r.remaining() != 0)
    throw Error(ErrorCategory::format, "model file has trailing bytes");
  validate(m);
  return m;
}

/// Writes through a temporary file and an atomic rename, so an interrupted
/// save never leaves a half-written model behind.
inline void save_model(const std::filesystem::path &path, const ModelState &model) {
  write_file_atomic(path, serialize_model(model));
}

inline ModelState load_model(const std::filesystem::path &path) {
  return deserialize_model(read_file(path));
}

} // namespace achords
