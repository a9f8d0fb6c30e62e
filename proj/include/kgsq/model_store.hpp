#pragma once

// Single-file model format (.kgsq), all integers little-endian:
//
//   "KGSQ"            4 bytes
//   version           u32 = 1
//   dim               u32
//   n_entities        u64
//   n_relations_total u64 (= 2M)
//   entity names      n_entities x (u32 byte length, UTF-8 bytes)
//   relation names    M x (u32 byte length, UTF-8 bytes)
//   type pairs        u64 count, then count x (u64 entity id, u32 length, bytes)
//   head_vectors      n_entities x dim f32, row-major
//   tail_vectors      n_entities x dim f32, row-major
//   relation_vectors  n_relations_total x dim f32, row-major
//
// Nothing may follow the last matrix.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "kgsq/model.hpp"

namespace kgsq {

inline constexpr char kModelMagic[4] = {'K', 'G', 'S', 'Q'};
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::uint64_t kDefaultLoadCap = std::uint64_t{4} << 30;

/// Writes the model with every entry rounded to the nearest f32. Returns bytes written.
template <typename Scalar>
std::uint64_t save_model(const EmbeddingModel<Scalar>& model, std::ostream& sink);

/// Reads and validates a model. Throws FormatError naming the failing section
/// and byte offset. Files larger than `cap` bytes are rejected before allocation.
EmbeddingModel<float> load_model(std::istream& source, std::uint64_t cap = kDefaultLoadCap);

void save_model_file(const EmbeddingModel<double>& model, const std::string& path);
EmbeddingModel<float> load_model_file(const std::string& path, std::uint64_t cap = kDefaultLoadCap);

extern template std::uint64_t save_model<float>(const EmbeddingModel<float>&, std::ostream&);
extern template std::uint64_t save_model<double>(const EmbeddingModel<double>&, std::ostream&);

}  // namespace kgsq
