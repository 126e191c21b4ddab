#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsr/geo.hpp"

namespace fsr::data {

struct Observation {
  std::uint32_t species_id = 0;
  geo::GeoPoint location;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Presence-only records with a per-species index. Built once, then read.
class ObservationStore {
 public:
  void add(std::uint32_t species_id, const geo::GeoPoint& location);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<Observation>& records() const { return records_; }
  const Observation& operator[](std::size_t i) const { return records_[i]; }

  bool contains(std::uint32_t species_id) const { return index_.count(species_id) > 0; }
  // Record indices for one species in insertion order; empty if unknown.
  const std::vector<std::size_t>& indices_of(std::uint32_t species_id) const;
  // Sorted ascending.
  std::vector<std::uint32_t> species() const;

  // Copy restricted to the listed species (order of records preserved).
  ObservationStore subset(const std::vector<std::uint32_t>& keep) const;

 private:
  std::vector<Observation> records_;
  std::map<std::uint32_t, std::vector<std::size_t>> index_;
};

// CSV with header `species_id,lat,lon`. Errors carry the 1-based line.
ObservationStore load_observations(const std::filesystem::path& path);
void save_observations(const ObservationStore& store, const std::filesystem::path& path);

// Per-species fixed-length vectors (text or image side information).
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  // Absent when the provider knows nothing about the species.
  virtual std::optional<std::vector<float>> lookup(std::uint32_t species_id) const = 0;
};

inline constexpr std::size_t kStubTextDim = 4096;

// Hashed bag of words over lowercased whitespace tokens, L2-normalised.
// The empty string maps to the zero vector.
std::vector<float> stub_text_embedding(std::string_view text, std::size_t dim = kStubTextDim);

// Routes species descriptions through stub_text_embedding.
class StubTextProvider : public EmbeddingProvider {
 public:
  StubTextProvider(std::map<std::uint32_t, std::string> texts, std::size_t dim = kStubTextDim)
      : texts_(std::move(texts)), dim_(dim) {}

  std::size_t dim() const override { return dim_; }
  std::optional<std::vector<float>> lookup(std::uint32_t species_id) const override;
  std::vector<float> embed(std::string_view text) const { return stub_text_embedding(text, dim_); }
  const std::map<std::uint32_t, std::string>& texts() const { return texts_; }

 private:
  std::map<std::uint32_t, std::string> texts_;
  std::size_t dim_;
};

// Manifest `<base>.json` = {"dim": d, "species": {"<id>": byte_offset}} next to
// a `<base>.bin` payload of little-endian float32 vectors.
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  static FileEmbeddingProvider load(const std::filesystem::path& base);

  std::size_t dim() const override { return dim_; }
  std::optional<std::vector<float>> lookup(std::uint32_t species_id) const override;

 private:
  std::size_t dim_ = 0;
  std::map<std::uint32_t, std::size_t> offsets_;
  std::vector<float> payload_;
};

void write_embedding_file(const std::filesystem::path& base, std::size_t dim,
                          const std::map<std::uint32_t, std::vector<float>>& vectors);

}  // namespace fsr::data
