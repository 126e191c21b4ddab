#include "fsr/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "fsr/error.hpp"
#include "fsr/hash.hpp"
#include "json.hpp"

namespace fsr::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename N>
N parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  N value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": bad " + what +
                                            " '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::filesystem::path suffixed(const std::filesystem::path& base, const char* s) {
  return std::filesystem::path(base.string() + s);
}

}  // namespace

void ObservationStore::add(std::uint32_t species_id, const geo::GeoPoint& location) {
  index_[species_id].push_back(records_.size());
  records_.push_back({species_id, location});
}

const std::vector<std::size_t>& ObservationStore::indices_of(std::uint32_t species_id) const {
  static const std::vector<std::size_t> kNone;
  const auto it = index_.find(species_id);
  return it == index_.end() ? kNone : it->second;
}

std::vector<std::uint32_t> ObservationStore::species() const {
  std::vector<std::uint32_t> out;
  out.reserve(index_.size());
  for (const auto& [id, _] : index_) out.push_back(id);
  return out;
}

ObservationStore ObservationStore::subset(const std::vector<std::uint32_t>& keep) const {
  ObservationStore out;
  for (const auto& r : records_) {
    if (std::find(keep.begin(), keep.end(), r.species_id) != keep.end()) {
      out.add(r.species_id, r.location);
    }
  }
  return out;
}

ObservationStore load_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "species_id,lat,lon") {
    throw Error(ErrorCode::kParseError, "line 1: expected header 'species_id,lat,lon'");
  }
  ObservationStore store;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    const auto id = parse_number<std::uint32_t>(row.substr(0, c1), line_no, "species_id");
    const auto lat = parse_number<double>(row.substr(c1 + 1, c2 - c1 - 1), line_no, "lat");
    const auto lon = parse_number<double>(row.substr(c2 + 1), line_no, "lon");
    try {
      store.add(id, geo::GeoPoint(lat, lon));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

void save_observations(const ObservationStore& store, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "species_id,lat,lon\n";
  for (const auto& r : store.records()) {
    out << r.species_id << ',' << format_double(r.location.lat()) << ','
        << format_double(r.location.lon()) << '\n';
  }
}

std::vector<float> stub_text_embedding(std::string_view text, std::size_t dim) {
  std::vector<double> acc(dim, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a64(token);
    acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
    token.clear();
  };
  for (const char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      flush();
    } else {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(dim, 0.0f);
  if (norm > 0) {
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / norm);
  }
  return out;
}

std::optional<std::vector<float>> StubTextProvider::lookup(std::uint32_t species_id) const {
  const auto it = texts_.find(species_id);
  if (it == texts_.end()) return std::nullopt;
  return embed(it->second);
}

FileEmbeddingProvider FileEmbeddingProvider::load(const std::filesystem::path& base) {
  std::ifstream js(suffixed(base, ".json"));
  if (!js) throw Error(ErrorCode::kIoError, "cannot open " + base.string() + ".json");
  FileEmbeddingProvider p;
  try {
    const auto j = nlohmann::json::parse(js);
    p.dim_ = j.at("dim").get<std::size_t>();
    for (const auto& [key, offset] : j.at("species").items()) {
      p.offsets_[static_cast<std::uint32_t>(std::stoul(key))] = offset.get<std::size_t>();
    }
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kCorruptManifest, base.string() + ".json: " + e.what());
  }
  if (p.dim_ == 0) throw Error(ErrorCode::kCorruptManifest, "embedding dim must be positive");

  const auto bin = suffixed(base, ".bin");
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(bin, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot open " + bin.string());
  const std::size_t stride = p.dim_ * sizeof(float);
  if (bytes != p.offsets_.size() * stride) {
    throw Error(ErrorCode::kPayloadLengthMismatch,
                bin.string() + " has " + std::to_string(bytes) + " bytes, manifest needs " +
                    std::to_string(p.offsets_.size() * stride));
  }
  for (const auto& [id, offset] : p.offsets_) {
    if (offset % stride != 0 || offset + stride > bytes) {
      throw Error(ErrorCode::kCorruptManifest,
                  "offset " + std::to_string(offset) + " for species " + std::to_string(id));
    }
  }
  p.payload_.resize(bytes / sizeof(float));
  std::ifstream in(bin, std::ios::binary);
  in.read(reinterpret_cast<char*>(p.payload_.data()), static_cast<std::streamsize>(bytes));
  return p;
}

std::optional<std::vector<float>> FileEmbeddingProvider::lookup(std::uint32_t species_id) const {
  const auto it = offsets_.find(species_id);
  if (it == offsets_.end()) return std::nullopt;
  const auto begin = payload_.begin() + static_cast<std::ptrdiff_t>(it->second / sizeof(float));
  return std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(dim_));
}

void write_embedding_file(const std::filesystem::path& base, std::size_t dim,
                          const std::map<std::uint32_t, std::vector<float>>& vectors) {
  nlohmann::json species = nlohmann::json::object();
  std::ofstream bin(suffixed(base, ".bin"), std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIoError, "cannot write " + base.string() + ".bin");
  std::size_t offset = 0;
  for (const auto& [id, v] : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::kEmbeddingDimMismatch,
                  "species " + std::to_string(id) + " has " + std::to_string(v.size()) +
                      " values, expected " + std::to_string(dim));
    }
    species[std::to_string(id)] = offset;
    bin.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
    offset += dim * sizeof(float);
  }
  std::ofstream js(suffixed(base, ".json"));
  js << nlohmann::json{{"dim", dim}, {"species", species}}.dump(2) << '\n';
}

}  // namespace fsr::data
