#include "fsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "fsr/error.hpp"

namespace fsr::train {

namespace {

using nlohmann::json;

// Per-example tapes are kept alive between the embedding pass and the
// backward pass up to this batch size; larger batches recompute forward.
constexpr std::size_t kRetainTapesUpTo = 256;

double clamped_log(double p) { return std::log(std::max(p, kProbFloor)); }

template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  Tensor<T> out(rows.size(), rows.empty() ? 0 : rows[0].cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].row(0).begin(), rows[i].row(0).end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
Tensor<T> row_of(const Tensor<T>& m, std::size_t r) {
  Tensor<T> out(1, m.cols());
  std::copy(m.row(r).begin(), m.row(r).end(), out.row(0).begin());
  return out;
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"lr_decay_per_epoch", c.lr_decay_per_epoch},
              {"batch_size", c.batch_size},
              {"lambda_pos", c.lambda_pos},
              {"sinr_epochs", c.sinr_epochs},
              {"fsinr_epochs", c.fsinr_epochs},
              {"sinr_dropout", c.sinr_dropout},
              {"fsinr_dropout", c.fsinr_dropout},
              {"context_len", c.context_len},
              {"p_drop_locations", c.p_drop_locations},
              {"p_drop_text", c.p_drop_text},
              {"p_drop_image", c.p_drop_image},
              {"sinr_cap", c.sinr_cap},
              {"fsinr_cap", c.fsinr_cap},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::kDomainError, "train config must be a JSON object");
  const json known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kDomainError, "unknown train config key " + key);
  }
  try {
    c.lr = j.value("lr", c.lr);
    c.lr_decay_per_epoch = j.value("lr_decay_per_epoch", c.lr_decay_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lambda_pos = j.value("lambda_pos", c.lambda_pos);
    c.sinr_epochs = j.value("sinr_epochs", c.sinr_epochs);
    c.fsinr_epochs = j.value("fsinr_epochs", c.fsinr_epochs);
    c.sinr_dropout = j.value("sinr_dropout", c.sinr_dropout);
    c.fsinr_dropout = j.value("fsinr_dropout", c.fsinr_dropout);
    c.context_len = j.value("context_len", c.context_len);
    c.p_drop_locations = j.value("p_drop_locations", c.p_drop_locations);
    c.p_drop_text = j.value("p_drop_text", c.p_drop_text);
    c.p_drop_image = j.value("p_drop_image", c.p_drop_image);
    c.sinr_cap = j.value("sinr_cap", c.sinr_cap);
    c.fsinr_cap = j.value("fsinr_cap", c.fsinr_cap);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kDomainError, std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

void validate(const TrainConfig& c) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(c.lr > 0.0) || !(c.lr_decay_per_epoch > 0.0 && c.lr_decay_per_epoch <= 1.0)) {
    throw Error(ErrorCode::kDomainError, "lr must be positive and decay in (0, 1]");
  }
  if (c.batch_size < 1 || c.sinr_cap < 1 || c.fsinr_cap < 1) {
    throw Error(ErrorCode::kDomainError, "batch size and per-species caps must be >= 1");
  }
  if (!(c.lambda_pos >= 0.0)) throw Error(ErrorCode::kDomainError, "lambda_pos must be >= 0");
  if (!prob(c.sinr_dropout) || !prob(c.fsinr_dropout) || !prob(c.p_drop_locations) ||
      !prob(c.p_drop_text) || !prob(c.p_drop_image) || c.sinr_dropout >= 1.0 ||
      c.fsinr_dropout >= 1.0) {
    throw Error(ErrorCode::kDomainError, "probabilities must lie in [0, 1] (dropout < 1)");
  }
}

double lr_at_epoch(const TrainConfig& c, std::size_t epoch) {
  return c.lr * std::pow(c.lr_decay_per_epoch, static_cast<double>(epoch));
}

double loss_an_full(std::span<const double> yhat, std::size_t z,
                    std::span<const double> yhat_pseudo, double lambda) {
  if (yhat.empty() || yhat.size() != yhat_pseudo.size() || z >= yhat.size()) {
    throw Error(ErrorCode::kDomainError, "loss needs matching nonempty predictions and z < s");
  }
  auto check = [](double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kDomainError, "probability " + std::to_string(p) + " outside [0, 1]");
    }
  };
  double total = 0.0;
  for (std::size_t j = 0; j < yhat.size(); ++j) {
    check(yhat[j]);
    check(yhat_pseudo[j]);
    total += j == z ? lambda * clamped_log(yhat[j]) : clamped_log(1.0 - yhat[j]);
    total += clamped_log(1.0 - yhat_pseudo[j]);
  }
  return -total / static_cast<double>(yhat.size());
}

template <typename T>
Var an_full_loss(Tape<T>& tape, Var probs, Var pseudo_probs, const Tensor<T>& positive,
                 T lambda) {
  const std::size_t rows = tape.value(probs).rows();
  const std::size_t cols = tape.value(probs).cols();
  if (rows * cols == 0) throw Error(ErrorCode::kEmptyBatch, "empty prediction matrix");
  if (positive.rows() != rows || positive.cols() != cols ||
      tape.value(pseudo_probs).rows() != rows || tape.value(pseudo_probs).cols() != cols) {
    throw Error(ErrorCode::kShapeMismatch, "loss inputs must share a shape");
  }
  const T inv = T(1) / static_cast<T>(rows * cols);
  Tensor<T> c_pos(rows, cols), c_neg(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    c_pos[i] = positive[i] != T(0) ? lambda * inv : T(0);
    c_neg[i] = positive[i] != T(0) ? T(0) : inv;
  }
  const T floor = static_cast<T>(kProbFloor);
  const Var log_p = tape.log_clamped(probs, floor);
  const Var log_not_p = tape.log_clamped(tape.affine_scalar(probs, T(-1), T(1)), floor);
  const Var log_not_pseudo = tape.log_clamped(tape.affine_scalar(pseudo_probs, T(-1), T(1)), floor);
  const Var sum = tape.add(tape.add(tape.weighted_sum(log_p, c_pos), tape.weighted_sum(log_not_p, c_neg)),
                           tape.weighted_sum(log_not_pseudo, Tensor<T>(rows, cols, inv)));
  return tape.scale(sum, T(-1));
}

template <typename T>
Var batch_loss(Tape<T>& tape, Var loc, Var pseudo, Var species_embeddings,
               std::span<const std::uint32_t> species, T lambda) {
  const std::size_t b = species.size();
  if (b == 0) throw Error(ErrorCode::kEmptyBatch, "batch has no examples");
  if (tape.value(loc).rows() != b || tape.value(pseudo).rows() != b ||
      tape.value(species_embeddings).rows() != b) {
    throw Error(ErrorCode::kShapeMismatch, "batch loss inputs need one row per example");
  }
  Tensor<T> positive(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) positive(i, j) = species[i] == species[j] ? T(1) : T(0);
  }
  const Var p = tape.sigmoid(tape.matmul_nt(loc, species_embeddings));
  const Var q = tape.sigmoid(tape.matmul_nt(pseudo, species_embeddings));
  return an_full_loss(tape, p, q, positive, lambda);
}

template <typename T>
Adam<T>::Adam(model::ParamList<T> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i]->grad.same_shape(params_[i]->value)) {
      throw Error(ErrorCode::kShapeMismatch, "gradient shape differs for " + params_[i]->name);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& value = params_[i]->value;
    const auto& grad = params_[i]->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      const double update = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      value[k] = static_cast<T>(value[k] - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
  return std::mt19937_64(seq);
}

std::vector<TrainingExample> capped_examples(const data::ObservationStore& store,
                                             std::size_t cap, std::mt19937_64& rng) {
  std::vector<TrainingExample> out;
  for (const auto id : store.species()) {
    const auto& idx = store.indices_of(id);
    std::vector<std::size_t> chosen;
    if (idx.size() <= cap) {
      chosen = idx;
    } else {
      std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), cap, rng);
    }
    for (const auto r : chosen) out.push_back({id, store[r].location, r});
  }
  return out;
}

AssembledContext assemble_context(const TrainingExample& ex, const data::ObservationStore& store,
                                  const Modalities& side, std::mt19937_64& rng,
                                  const TrainConfig& cfg) {
  std::vector<std::size_t> siblings;
  for (const auto r : store.indices_of(ex.species_id)) {
    if (r != ex.record && store[r].location != ex.location) siblings.push_back(r);
  }
  std::vector<std::size_t> picked;
  std::sample(siblings.begin(), siblings.end(), std::back_inserter(picked),
              std::min(cfg.context_len, siblings.size()), rng);

  std::bernoulli_distribution drop_loc(cfg.p_drop_locations), drop_text(cfg.p_drop_text),
      drop_image(cfg.p_drop_image);
  const bool no_loc = drop_loc(rng);
  const bool no_text = drop_text(rng);
  const bool no_image = drop_image(rng);

  AssembledContext out;
  if (!no_loc) {
    for (const auto r : picked) out.context.locations.push_back(store[r].location);
  }
  bool missing = false;
  if (!no_text && side.text != nullptr) {
    out.context.text_embedding = side.text->lookup(ex.species_id);
    missing |= !out.context.text_embedding;
  }
  if (!no_image && side.image != nullptr) {
    out.context.image_embedding = side.image->lookup(ex.species_id);
    missing |= !out.context.image_embedding;
  }
  out.skip = no_loc && missing && !out.context.text_embedding && !out.context.image_embedding;
  return out;
}

template <typename T>
std::vector<EpochLog> pretrain_sinr(model::SinrModel<T>& model, const data::ObservationStore& store,
                                    const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  if (store.empty()) throw Error(ErrorCode::kNoTrainingData, "observation store is empty");
  std::map<std::uint32_t, std::size_t> column;
  for (std::size_t j = 0; j < model.num_species(); ++j) column[model.species_ids()[j]] = j;
  for (const auto id : store.species()) {
    if (!column.count(id)) {
      throw Error(ErrorCode::kDomainError,
                  "species " + std::to_string(id) + " has no classifier column");
    }
  }

  auto rng = derive_rng(cfg.seed, 0);
  auto examples = capped_examples(store, cfg.sinr_cap, rng);
  auto params = model.parameters();
  Adam<T> adam(params);
  adam.zero_grad();
  const std::size_t s = model.num_species();
  std::vector<EpochLog> logs;

  for (std::size_t epoch = 0; epoch < cfg.sinr_epochs; ++epoch) {
    auto shuffle_rng = derive_rng(cfg.seed, 1, epoch);
    std::shuffle(examples.begin(), examples.end(), shuffle_rng);
    const double lr = lr_at_epoch(cfg, epoch);
    double loss_sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < examples.size();
         start += cfg.batch_size, ++batch) {
      const std::size_t n = std::min(cfg.batch_size, examples.size() - start);
      std::vector<geo::GeoPoint> locs(n);
      Tensor<T> positive(n, s);
      for (std::size_t i = 0; i < n; ++i) {
        locs[i] = examples[start + i].location;
        positive(i, column[examples[start + i].species_id]) = T(1);
      }
      auto batch_rng = derive_rng(cfg.seed, 2, epoch, batch);
      const auto pseudo = geo::sample_uniform_sphere(batch_rng, n);
      const model::Dropout drop{cfg.sinr_dropout, &batch_rng};

      Tape<T> tape;
      const Var w = tape.parameter(model.classifier);
      const Var p = tape.sigmoid(tape.matmul(model.encoder.embed(tape, locs, drop), w));
      const Var q = tape.sigmoid(tape.matmul(model.encoder.embed(tape, pseudo, drop), w));
      const Var loss = an_full_loss(tape, p, q, positive, static_cast<T>(cfg.lambda_pos));
      tape.backward_into_parameters(loss, Tensor<T>(1, 1, T(1)));
      loss_sum += static_cast<double>(tape.value(loss)[0]) * static_cast<double>(n);
      adam.step(lr);
      adam.zero_grad();
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(examples.size()), lr, examples.size()};
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

template <typename T>
double fsinr_batch_step(model::FsSinrModel<T>& model, std::span<const BatchItem> items,
                        std::span<const geo::GeoPoint> pseudo, double lambda, double dropout,
                        std::mt19937_64* batch_rng, bool compute_grads) {
  const std::size_t n = items.size();
  if (n == 0) throw Error(ErrorCode::kEmptyBatch, "batch has no examples");
  if (pseudo.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "need one pseudo-absence per example");
  }
  const bool retain = compute_grads && n <= kRetainTapesUpTo;
  auto embed = [&](Tape<T>& tape, std::size_t i) {
    auto rng = items[i].dropout_rng;
    return model.species_embedding(tape, items[i].context,
                                   model::Dropout{dropout, rng ? &*rng : nullptr});
  };

  // Species embeddings, one tape per example.
  std::vector<std::optional<Tape<T>>> tapes(n);
  std::vector<Var> outs(n);
  std::vector<Tensor<T>> w_rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    tapes[i].emplace(retain);
    outs[i] = embed(*tapes[i], i);
    w_rows[i] = tapes[i]->value(outs[i]);
    if (!retain) tapes[i].reset();
  }

  // Within-batch loss with the embeddings as leaves.
  std::vector<geo::GeoPoint> locs(n);
  std::vector<std::uint32_t> species(n);
  for (std::size_t i = 0; i < n; ++i) {
    locs[i] = items[i].location;
    species[i] = items[i].species_id;
  }
  const model::Dropout drop{dropout, batch_rng};
  Tape<T> tape(compute_grads);
  const Var f = model.encoder.embed(tape, locs, drop);
  const Var f_pseudo = model.encoder.embed(tape, pseudo, drop);
  const Var w = compute_grads ? tape.variable(stack_rows(w_rows)) : tape.constant(stack_rows(w_rows));
  const Var loss = batch_loss(tape, f, f_pseudo, w, species, static_cast<T>(lambda));
  const double value = static_cast<double>(tape.value(loss)[0]);
  if (!compute_grads) return value;
  tape.backward_into_parameters(loss, Tensor<T>(1, 1, T(1)));
  const Tensor<T> grad_w = tape.grad(w);

  // Push dL/dw_i back through each example's tape, in example order.
  for (std::size_t i = 0; i < n; ++i) {
    if (!retain) {
      tapes[i].emplace(true);
      outs[i] = embed(*tapes[i], i);
    }
    tapes[i]->backward_into_parameters(outs[i], row_of(grad_w, i));
    tapes[i].reset();
  }
  return value;
}

template <typename T>
std::vector<EpochLog> train_fsinr(model::FsSinrModel<T>& model,
                                  model::LocationEncoder<T>* pretrained,
                                  const data::ObservationStore& store, const Modalities& side,
                                  const TrainConfig& cfg, std::vector<std::uint32_t>* seen,
                                  const EpochCallback& on_epoch) {
  validate(cfg);
  if (pretrained == nullptr) {
    throw Error(ErrorCode::kMissingEncoder, "FS-SINR training needs a pretrained location encoder");
  }
  {
    model::ParamList<T> dst, src;
    model.encoder.collect(dst);
    pretrained->collect(src);
    bool same = dst.size() == src.size();
    for (std::size_t i = 0; same && i < dst.size(); ++i) {
      same = dst[i]->value.same_shape(src[i]->value);
    }
    if (!same) {
      throw Error(ErrorCode::kMissingEncoder, "pretrained encoder shape differs from the model's");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  }
  if (store.empty()) throw Error(ErrorCode::kNoTrainingData, "observation store is empty");

  auto rng = derive_rng(cfg.seed, 10);
  auto examples = capped_examples(store, cfg.fsinr_cap, rng);
  auto params = model.parameters();
  Adam<T> adam(params);
  adam.zero_grad();
  std::vector<EpochLog> logs;
  std::map<std::uint32_t, bool> seen_ids;

  for (std::size_t epoch = 0; epoch < cfg.fsinr_epochs; ++epoch) {
    auto shuffle_rng = derive_rng(cfg.seed, 11, epoch);
    std::shuffle(examples.begin(), examples.end(), shuffle_rng);
    const double lr = lr_at_epoch(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t used = 0;

    for (std::size_t start = 0, batch = 0; start < examples.size();
         start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(examples.size(), start + cfg.batch_size);

      std::vector<BatchItem> items;
      for (std::size_t e = start; e < end; ++e) {
        auto ex_rng = derive_rng(cfg.seed, 12, epoch, e);
        auto ctx = assemble_context(examples[e], store, side, ex_rng, cfg);
        if (ctx.skip) continue;
        items.push_back({examples[e].species_id, examples[e].location, std::move(ctx.context),
                         ex_rng});
      }
      if (items.empty()) continue;
      const std::size_t n = items.size();
      for (const auto& it : items) seen_ids[it.species_id] = true;
      auto batch_rng = derive_rng(cfg.seed, 13, epoch, batch);
      const auto pseudo = geo::sample_uniform_sphere(batch_rng, n);
      const double loss = fsinr_batch_step(model, items, pseudo, cfg.lambda_pos,
                                           cfg.fsinr_dropout, &batch_rng, true);
      loss_sum += loss * static_cast<double>(n);
      used += n;
      adam.step(lr);
      adam.zero_grad();
    }
    EpochLog log{epoch, used ? loss_sum / static_cast<double>(used) : 0.0, lr, used};
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (seen) {
    seen->clear();
    for (const auto& [id, _] : seen_ids) seen->push_back(id);
  }
  return logs;
}

#define FSR_INSTANTIATE(T)                                                                   \
  template Var an_full_loss<T>(Tape<T>&, Var, Var, const Tensor<T>&, T);                    \
  template Var batch_loss<T>(Tape<T>&, Var, Var, Var, std::span<const std::uint32_t>, T);   \
  template class Adam<T>;                                                                    \
  template double fsinr_batch_step<T>(model::FsSinrModel<T>&, std::span<const BatchItem>,     \
                                      std::span<const geo::GeoPoint>, double, double,          \
                                      std::mt19937_64*, bool);                                 \
  template std::vector<EpochLog> pretrain_sinr<T>(model::SinrModel<T>&,                      \
                                                  const data::ObservationStore&,             \
                                                  const TrainConfig&, const EpochCallback&); \
  template std::vector<EpochLog> train_fsinr<T>(                                             \
      model::FsSinrModel<T>&, model::LocationEncoder<T>*, const data::ObservationStore&, \
      const Modalities&, const TrainConfig&, std::vector<std::uint32_t>*, const EpochCallback&);

FSR_INSTANTIATE(float)
FSR_INSTANTIATE(double)
#undef FSR_INSTANTIATE

}  // namespace fsr::train
