#include "kgsq/model_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace kgsq {

namespace {

class Writer {
public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw Error("write failed after " + std::to_string(count_) + " bytes");
    count_ += n;
  }

  void u32(std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 4);
  }

  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }

  void str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("string too long to serialize");
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  template <typename Scalar>
  void matrix(const RowMatrix<Scalar>& m) {
    std::vector<unsigned char> buf(static_cast<std::size_t>(m.size()) * 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i]));
      for (int b = 0; b < 4; ++b) buf[static_cast<std::size_t>(i) * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    bytes(buf.data(), buf.size());
  }

  std::uint64_t count() const { return count_; }

private:
  std::ostream& out_;
  std::uint64_t count_ = 0;
};

class Reader {
public:
  Reader(std::istream& in, std::uint64_t cap) : in_(in), cap_(cap) {
    // Seekable sources tell us their length, so a corrupt size field can be
    // rejected before we allocate for it.
    const auto here = in_.tellg();
    if (here != std::istream::pos_type(-1) && in_.seekg(0, std::ios::end)) {
      const auto end = in_.tellg();
      if (end != std::istream::pos_type(-1) && end >= here) size_ = static_cast<std::uint64_t>(end - here);
      in_.seekg(here);
    }
    in_.clear();
  }

  void bytes(void* dst, std::uint64_t n, const char* section) {
    require(n, section);
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(in_.gcount());
    if (got != n) {
      throw FormatError(section, offset_,
                        "truncated: expected " + std::to_string(n) + " bytes, got " + std::to_string(got));
    }
    offset_ += n;
  }

  std::uint32_t u32(const char* section) {
    unsigned char buf[4];
    bytes(buf, 4, section);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf[i]} << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* section) {
    unsigned char buf[8];
    bytes(buf, 8, section);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
    return v;
  }

  std::string str(const char* section) {
    const std::uint64_t at = offset_;
    const std::uint32_t len = u32(section);
    if (len > cap_ - offset_) throw FormatError(section, at, "string length " + std::to_string(len) + " exceeds load cap");
    require(len, section);
    std::string s(len, '\0');
    bytes(s.data(), len, section);
    return s;
  }

  void matrix(RowMatrix<float>& m, Eigen::Index rows, Eigen::Index cols, const char* section) {
    const std::uint64_t start = offset_;
    const auto n = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
    require(n * 4, section);
    std::vector<unsigned char> buf(n * 4);
    bytes(buf.data(), n * 4, section);
    m.resize(rows, cols);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t{buf[i * 4 + b]} << (8 * b);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) throw FormatError(section, start + i * 4, "non-finite value");
      m.data()[i] = v;
    }
  }

  bool at_end() { return in_.peek() == std::istream::traits_type::eof(); }
  std::uint64_t offset() const { return offset_; }

private:
  // Throws unless n more bytes are within the cap and, if known, the source.
  void require(std::uint64_t n, const char* section) const {
    if (n > cap_ || offset_ > cap_ - n) {
      throw FormatError(section, offset_, "read of " + std::to_string(n) + " bytes exceeds load cap");
    }
    if (size_ && offset_ + n > *size_) {
      throw FormatError(section, offset_,
                        "truncated: expected " + std::to_string(n) + " bytes, got " + std::to_string(*size_ - offset_));
    }
  }

  std::istream& in_;
  std::uint64_t cap_;
  std::optional<std::uint64_t> size_;
  std::uint64_t offset_ = 0;
};

// a * b, or nullopt on overflow.
std::optional<std::uint64_t> mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::nullopt;
  return a * b;
}

}  // namespace

template <typename Scalar>
std::uint64_t save_model(const EmbeddingModel<Scalar>& model, std::ostream& sink) {
  const auto& vocab = model.vocabulary;
  if (static_cast<std::size_t>(model.entity_count()) != vocab.entity_count() ||
      static_cast<std::size_t>(model.relation_count()) != 2 * vocab.relation_count() ||
      model.tail.rows() != model.head.rows() || model.tail.cols() != model.dim() ||
      model.relation.cols() != model.dim()) {
    throw Error("save_model: matrix shapes disagree with vocabulary");
  }
  if (model.dim() > std::numeric_limits<std::uint32_t>::max()) throw Error("save_model: dim too large");

  Writer w(sink);
  w.bytes(kModelMagic, 4);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.dim()));
  w.u64(static_cast<std::uint64_t>(model.entity_count()));
  w.u64(static_cast<std::uint64_t>(model.relation_count()));
  for (const auto& name : vocab.entity_names()) w.str(name);
  for (const auto& name : vocab.relation_names()) w.str(name);
  w.u64(vocab.entity_types().size());
  for (const auto& [id, type] : vocab.entity_types()) {
    w.u64(id);
    w.str(type);
  }
  w.matrix(model.head);
  w.matrix(model.tail);
  w.matrix(model.relation);
  sink.flush();
  if (!sink) throw Error("save_model: flush failed");
  return w.count();
}

template std::uint64_t save_model<float>(const EmbeddingModel<float>&, std::ostream&);
template std::uint64_t save_model<double>(const EmbeddingModel<double>&, std::ostream&);

EmbeddingModel<float> load_model(std::istream& source, std::uint64_t cap) {
  Reader r(source, cap);

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError("magic", 0, "expected \"KGSQ\"");
  const std::uint32_t version = r.u32("version");
  if (version != kModelVersion) {
    throw FormatError("version", 4, "unsupported version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32("header");
  const std::uint64_t n_entities = r.u64("header");
  const std::uint64_t n_relations = r.u64("header");
  if (dim == 0) throw FormatError("header", 8, "dim is zero");
  if (n_entities == 0) throw FormatError("header", 12, "no entities");
  if (n_relations % 2 != 0) throw FormatError("header", 20, "relation count is odd");

  // Minimum bytes the declared sizes imply; reject before allocating anything.
  const auto row_bytes = mul(dim, 4);
  const auto ent_bytes = mul(n_entities, *row_bytes);
  const auto rel_bytes = mul(n_relations, *row_bytes);
  const auto name_bytes = mul(n_entities + n_relations / 2, 4);
  if (!ent_bytes || !rel_bytes || !name_bytes || *ent_bytes > cap / 2 || *rel_bytes > cap ||
      *name_bytes > cap || 2 * *ent_bytes + *rel_bytes + *name_bytes > cap - r.offset()) {
    throw FormatError("header", 8, "declared sizes exceed load cap of " + std::to_string(cap) + " bytes");
  }

  EmbeddingModel<float> model;
  auto& vocab = model.vocabulary;
  for (std::uint64_t i = 0; i < n_entities; ++i) {
    const auto at = r.offset();
    if (vocab.add_entity(r.str("entity names")) != i) throw FormatError("entity names", at, "duplicate entity name");
  }
  for (std::uint64_t i = 0; i < n_relations / 2; ++i) {
    const auto at = r.offset();
    if (vocab.add_relation(r.str("relation names")) != i) {
      throw FormatError("relation names", at, "duplicate relation name");
    }
  }
  const auto types_at = r.offset();
  const std::uint64_t n_types = r.u64("entity types");
  if (n_types > n_entities) throw FormatError("entity types", types_at, "more type pairs than entities");
  for (std::uint64_t i = 0; i < n_types; ++i) {
    const auto at = r.offset();
    const std::uint64_t id = r.u64("entity types");
    if (id >= n_entities) throw FormatError("entity types", at, "entity id out of range");
    if (vocab.has_type(static_cast<EntityId>(id))) throw FormatError("entity types", at, "entity typed twice");
    vocab.set_type(static_cast<EntityId>(id), r.str("entity types"));
  }

  const auto n = static_cast<Eigen::Index>(n_entities);
  const auto m2 = static_cast<Eigen::Index>(n_relations);
  const auto d = static_cast<Eigen::Index>(dim);
  r.matrix(model.head, n, d, "head_vectors");
  r.matrix(model.tail, n, d, "tail_vectors");
  r.matrix(model.relation, m2, d, "relation_vectors");
  if (!r.at_end()) throw FormatError("trailer", r.offset(), "trailing bytes after relation_vectors");

  model.config.dim = dim;
  return model;
}

void save_model_file(const EmbeddingModel<double>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_model(model, out);
}

EmbeddingModel<float> load_model_file(const std::string& path, std::uint64_t cap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_model(in, cap);
}

}  // namespace kgsq
