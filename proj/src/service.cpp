#include "fsr/service.hpp"

#include "fsr/checkpoint.hpp"
#include "fsr/data.hpp"
#include "fsr/error.hpp"
#include "httplib.h"

namespace fsr::service {

namespace {

struct HttpError {
  int status;
  std::string message;
};

Response error_response(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

nlohmann::json parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    return nlohmann::json::object();
  }
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw HttpError{400, "body is not valid JSON"};
  if (!j.is_object()) throw HttpError{400, "body must be a JSON object"};
  return j;
}

std::vector<float> float_array(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw HttpError{400, std::string(field) + " must be an array of numbers"};
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw HttpError{400, std::string(field) + " must be an array of numbers"};
    out.push_back(v.get<float>());
  }
  return out;
}

// Maps library errors onto HTTP statuses.
template <typename F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kEmbeddingDimMismatch:
        return error_response(422, e.what());
      case ErrorCode::kOutOfRangeCoordinate:
      case ErrorCode::kDomainError:
        return error_response(400, e.what());
      default:
        return error_response(500, e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, e.what());
  }
}

}  // namespace

InferenceService::InferenceService(std::vector<model::FsSinrModel<float>*> models,
                                   std::map<std::string, geo::GridSpec> presets, TextEncoder text)
    : models_(std::move(models)), presets_(std::move(presets)), text_(std::move(text)) {
  if (models_.empty()) throw Error(ErrorCode::kDomainError, "service needs at least one model");
  for (auto* m : models_) {
    if (!(m->config() == models_.front()->config())) {
      throw Error(ErrorCode::kConfigMismatch, "ensemble members must share a model config");
    }
  }
  if (!text_) {
    const std::size_t dim = models_.front()->config().text_dim;
    text_ = [dim](std::string_view s) { return data::stub_text_embedding(s, dim); };
  }
  for (const auto& [name, grid] : presets_) {
    auto& per_member = caches_[name];
    for (auto* m : models_) per_member.push_back(std::make_unique<fewshot::CellCache>(m->encoder, grid));
  }
}

model::ContextSet InferenceService::parse_context(const nlohmann::json& req) const {
  if (!req.is_object()) throw HttpError{400, "context must be a JSON object"};
  const auto& cfg = models_.front()->config();
  model::ContextSet ctx;
  if (req.contains("context_locations")) {
    const auto& locs = req.at("context_locations");
    if (!locs.is_array()) throw HttpError{400, "context_locations must be an array"};
    if (locs.size() > kMaxContextLocations) {
      throw HttpError{413, "at most " + std::to_string(kMaxContextLocations) +
                               " context locations are accepted"};
    }
    for (const auto& p : locs) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw HttpError{400, "each context location must be [lat, lon]"};
      }
      ctx.locations.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
  }
  const bool has_text = req.contains("text") && !req.at("text").is_null();
  if (has_text && req.contains("text_embedding")) {
    throw HttpError{400, "give either text or text_embedding, not both"};
  }
  if (has_text) {
    if (!req.at("text").is_string()) throw HttpError{400, "text must be a string"};
    const auto text = req.at("text").get<std::string>();
    if (!text.empty()) ctx.text_embedding = text_(text);
  }
  if (req.contains("text_embedding")) {
    ctx.text_embedding = float_array(req.at("text_embedding"), "text_embedding");
  }
  if (req.contains("image_embedding")) {
    ctx.image_embedding = float_array(req.at("image_embedding"), "image_embedding");
  }
  if (ctx.text_embedding && ctx.text_embedding->size() != cfg.text_dim) {
    throw HttpError{422, "text_embedding needs " + std::to_string(cfg.text_dim) + " values"};
  }
  if (ctx.image_embedding && ctx.image_embedding->size() != cfg.image_dim) {
    throw HttpError{422, "image_embedding needs " + std::to_string(cfg.image_dim) + " values"};
  }
  return ctx;
}

std::vector<float> InferenceService::embed_context(const model::ContextSet& ctx,
                                                   std::size_t member) const {
  return model::species_embedding(*models_[member], ctx).weights;
}

Response InferenceService::embed(std::string_view body) const {
  return guarded([&] {
    const auto req = parse_body(body);
    const auto ctx = parse_context(req);
    return Response{200, {{"embedding", embed_context(ctx, 0)}}};
  });
}

Response InferenceService::predict(std::string_view body) const {
  return guarded([&]() -> Response {
    const auto req = parse_body(body);
    const bool has_embedding = req.contains("embedding");
    const bool has_context = req.contains("context");
    if (has_embedding == has_context) {
      throw HttpError{400, "give exactly one of embedding or context"};
    }
    const bool ensemble = req.value("ensemble", false);
    if (ensemble && (has_embedding || models_.size() < 2)) {
      throw HttpError{400, "ensemble predictions need an inline context and at least two models"};
    }

    // Grid: a named preset (cached) or explicit bounds (embedded per request).
    geo::GridSpec grid;
    const std::vector<std::unique_ptr<fewshot::CellCache>>* cached = nullptr;
    std::vector<std::unique_ptr<fewshot::CellCache>> fresh;
    const auto& g = req.contains("grid") ? req.at("grid") : nlohmann::json();
    if (g.is_null() || g.is_string()) {
      if (presets_.empty()) throw HttpError{400, "no preset grids are configured"};
      const std::string name = g.is_string() ? g.get<std::string>() : presets_.begin()->first;
      const auto it = caches_.find(name);
      if (it == caches_.end()) throw HttpError{404, "unknown grid preset '" + name + "'"};
      grid = presets_.at(name);
      cached = &it->second;
    } else if (g.is_object()) {
      grid = geo::grid_from_json(g);
      if (grid.size() > kMaxRequestCells) throw HttpError{413, "grid has too many cells"};
      const std::size_t members = ensemble ? models_.size() : 1;
      for (std::size_t m = 0; m < members; ++m) {
        fresh.push_back(std::make_unique<fewshot::CellCache>(models_[m]->encoder, grid));
      }
      cached = &fresh;
    } else {
      throw HttpError{400, "grid must be a preset name or a bounds object"};
    }

    std::optional<double> threshold;
    if (req.contains("threshold") && !req.at("threshold").is_null()) {
      if (!req.at("threshold").is_number()) throw HttpError{400, "threshold must be a number"};
      threshold = req.at("threshold").get<double>();
      if (!(*threshold >= 0.0 && *threshold <= 1.0)) {
        throw HttpError{400, "threshold must lie in [0, 1]"};
      }
    }

    nlohmann::json out{{"grid", geo::to_json(grid)}};
    std::vector<float> probs;
    if (has_embedding) {
      model::SpeciesEmbedding w{float_array(req.at("embedding"), "embedding"), 0.0f};
      if (w.weights.size() != models_.front()->encoder.width()) {
        throw HttpError{422, "embedding needs " + std::to_string(models_.front()->encoder.width()) +
                                 " values"};
      }
      probs = fewshot::score_grid(w, *(*cached)[0]).cells;
    } else {
      const auto ctx = parse_context(req.at("context"));
      if (ensemble) {
        std::vector<fewshot::EnsembleMember> members;
        for (std::size_t m = 0; m < models_.size(); ++m) {
          members.push_back({models_[m], (*cached)[m].get()});
        }
        auto e = fewshot::ensemble_predict(members, ctx);
        probs = std::move(e.mean);
        out["variance"] = e.variance;
        out["members"] = e.members;
      } else {
        probs = fewshot::score_grid({embed_context(ctx, 0), 0.0f}, *(*cached)[0]).cells;
      }
    }
    if (threshold) {
      std::vector<int> binary(probs.size());
      for (std::size_t i = 0; i < probs.size(); ++i) binary[i] = probs[i] >= *threshold;
      out["binary"] = binary;
    }
    out["probabilities"] = std::move(probs);
    return {200, std::move(out)};
  });
}

Response InferenceService::model_info() const {
  auto* m = models_.front();
  nlohmann::json presets = nlohmann::json::array();
  for (const auto& [name, grid] : presets_) {
    presets.push_back({{"name", name}, {"grid", geo::to_json(grid)}});
  }
  return {200,
          {{"config", model::to_json(m->config())},
           {"parameter_counts", model::to_json(m->counts())},
           {"checksum", checksum()},
           {"members", models_.size()},
           {"presets", presets}}};
}

std::string InferenceService::checksum() const {
  std::string out;
  for (auto* m : models_) {
    if (!out.empty()) out += ',';
    out += model::checksum(m->parameters());
  }
  return out;
}

void register_routes(httplib::Server& server, const InferenceService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post("/api/embed", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.embed(req.body));
  });
  server.Post("/api/predict", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.predict(req.body));
  });
  server.Get("/api/model", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.model_info());
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
}

bool serve(const InferenceService& service, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, service);
  return server.listen(host, port);
}

}  // namespace fsr::service
