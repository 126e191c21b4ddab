#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fsr/fewshot.hpp"
#include "fsr/model.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace fsr::service {

inline constexpr std::size_t kMaxContextLocations = 50;
// Explicit-bounds grids larger than this are refused with 413.
inline constexpr std::size_t kMaxRequestCells = 1u << 20;

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Turns free text into a text-token embedding.
using TextEncoder = std::function<std::vector<float>(std::string_view)>;

// Read-only inference over one or more FS-SINR models sharing a config. The
// first model answers /api/embed; every model takes part in ensemble
// predictions. Cell embeddings for each preset grid are computed once at
// construction. Handlers never write to the models.
class InferenceService {
 public:
  InferenceService(std::vector<model::FsSinrModel<float>*> models,
                   std::map<std::string, geo::GridSpec> presets, TextEncoder text = {});

  Response embed(std::string_view body) const;
  Response predict(std::string_view body) const;
  Response model_info() const;

  std::string checksum() const;
  std::size_t members() const { return models_.size(); }

 private:
  model::ContextSet parse_context(const nlohmann::json& req) const;
  std::vector<float> embed_context(const model::ContextSet& ctx, std::size_t member) const;

  std::vector<model::FsSinrModel<float>*> models_;
  std::map<std::string, geo::GridSpec> presets_;
  // caches_[preset][member]
  std::map<std::string, std::vector<std::unique_ptr<fewshot::CellCache>>> caches_;
  TextEncoder text_;
};

// Adds the /api/ routes, CORS headers and preflight handling.
void register_routes(httplib::Server& server, const InferenceService& service);

// Blocks serving on host:port; returns false if the port cannot be bound.
bool serve(const InferenceService& service, const std::string& host, int port);

}  // namespace fsr::service
