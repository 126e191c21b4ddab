#include "fsr/fewshot.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fsr/error.hpp"

namespace fsr::fewshot {

namespace {

double log_sigmoid(double z) {
  // log σ(z) = −log(1 + e^{−z}), evaluated without overflow.
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double cosine(std::span<const float> f, const std::vector<double>& p) {
  double dot = 0, nf = 0, np = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    dot += f[i] * p[i];
    nf += static_cast<double>(f[i]) * f[i];
    np += p[i] * p[i];
  }
  const double denom = std::sqrt(nf) * std::sqrt(np);
  return denom > 0 ? dot / denom : 0.0;
}

std::vector<double> mean_row(const Tensor<float>& t) {
  std::vector<double> out(t.cols(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) out[c] += t(r, c);
  }
  for (auto& v : out) v /= static_cast<double>(t.rows());
  return out;
}

}  // namespace

CellCache::CellCache(model::LocationEncoder<float>& encoder, const geo::GridSpec& grid)
    : grid_(grid) {
  geo::validate(grid);
  const auto centers = grid.centers();
  features_ = model::embed_points(encoder, centers);
}

std::span<const float> CellCache::row(std::size_t cell) const {
  return {features_.data() + cell * features_.cols(), features_.cols()};
}

geo::PredictionGrid score_grid(const SpeciesEmbedding& w, const CellCache& cells) {
  if (w.weights.size() != cells.features().cols()) {
    throw Error(ErrorCode::kEmbeddingDimMismatch,
                "species embedding has " + std::to_string(w.weights.size()) +
                    " values, cells have " + std::to_string(cells.features().cols()));
  }
  geo::PredictionGrid out{cells.grid(), std::vector<float>(cells.size())};
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.cells[static_cast<std::size_t>(i)] =
        model::presence(cells.row(static_cast<std::size_t>(i)), w);
  }
  return out;
}

geo::PredictionGrid feedforward_range(model::FsSinrModel<float>& model,
                                      const model::ContextSet& ctx, const CellCache& cells) {
  return score_grid(model::species_embedding(model, ctx), cells);
}

std::vector<geo::GeoPoint> pseudo_negatives(std::size_t n_uniform, std::size_t n_target,
                                            std::span<const geo::GeoPoint> pool,
                                            std::mt19937_64& rng) {
  auto out = geo::sample_uniform_sphere(rng, n_uniform);
  if (pool.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = 0; i < n_target; ++i) out.push_back(pool[pick(rng)]);
  return out;
}

PrototypePair build_prototypes(std::span<const geo::GeoPoint> presences,
                               std::span<const geo::GeoPoint> negatives,
                               model::LocationEncoder<float>& encoder) {
  if (presences.empty() || negatives.empty()) {
    throw Error(ErrorCode::kEmptySupport, "both prototype support sets must be nonempty");
  }
  return {mean_row(model::embed_points(encoder, presences)),
          mean_row(model::embed_points(encoder, negatives))};
}

double prototype_probability(const PrototypePair& protos, std::span<const float> feature) {
  const double sp = cosine(feature, protos.present);
  const double sa = cosine(feature, protos.absent);
  return 1.0 / (1.0 + std::exp(sa - sp));
}

double prototype_predict(std::span<const geo::GeoPoint> presences,
                         std::span<const geo::GeoPoint> negatives, const geo::GeoPoint& x,
                         model::LocationEncoder<float>& encoder) {
  const auto protos = build_prototypes(presences, negatives, encoder);
  const auto f = model::embed_points(encoder, std::span(&x, 1));
  return prototype_probability(protos, f.span());
}

geo::PredictionGrid prototype_range(const PrototypePair& protos, const CellCache& cells) {
  geo::PredictionGrid out{cells.grid(), std::vector<float>(cells.size())};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out.cells[i] = static_cast<float>(prototype_probability(protos, cells.row(i)));
  }
  return out;
}

ActiveResult active_embedding(std::span<const geo::GeoPoint> context,
                              const Tensor<float>& classifier,
                              model::LocationEncoder<float>& encoder) {
  if (context.empty()) throw Error(ErrorCode::kEmptyContext, "no context locations");
  const std::size_t d = classifier.rows(), s = classifier.cols();
  const auto f = model::embed_points(encoder, context);
  if (f.cols() != d) {
    throw Error(ErrorCode::kShapeMismatch, "classifier rows differ from encoder width");
  }
  std::vector<double> logw(s, 0.0);
  for (std::size_t j = 0; j < s; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < f.rows(); ++c) {
      double z = 0.0;
      for (std::size_t k = 0; k < d; ++k) z += static_cast<double>(f(c, k)) * classifier(k, j);
      acc += log_sigmoid(z);
    }
    logw[j] = std::max(acc, kLogFloor);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  if (top <= kLogFloor) {
    throw Error(ErrorCode::kAllZeroWeights, "context is implausible under every species");
  }
  double total = 0.0;
  for (auto& v : logw) total += (v = std::exp(v - top));
  ActiveResult out;
  out.weights = std::move(logw);
  std::vector<double> acc(d, 0.0);
  for (std::size_t j = 0; j < s; ++j) {
    out.weights[j] /= total;
    for (std::size_t k = 0; k < d; ++k) acc[k] += out.weights[j] * classifier(k, j);
  }
  out.embedding.weights.assign(acc.begin(), acc.end());
  return out;
}

LogRegFit fit_logistic(const Tensor<float>& features, std::span<const std::uint8_t> labels,
                       const LogRegConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(features.rows());
  const auto d = static_cast<Eigen::Index>(features.cols());
  if (labels.size() != features.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "one label per feature row required");
  }
  // Design matrix with a trailing bias column.
  Eigen::MatrixXd x(n, d + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      x(i, k) = features(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    }
    x(i, d) = 1.0;
    y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, cfg.reg_weight);
  penalty(d) = 0.0;

  auto objective = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = x * w;
    double total = 0.5 * (penalty.array() * w.array().square()).sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      total -= y(i) > 0 ? log_sigmoid(z(i)) : log_sigmoid(-z(i));
    }
    return total;
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  LogRegFit fit;
  double value = objective(w);
  for (fit.iterations = 0; fit.iterations < cfg.max_iter; ++fit.iterations) {
    const Eigen::VectorXd z = x * w;
    const Eigen::ArrayXd p = 1.0 / (1.0 + (-z.array()).exp());
    const Eigen::VectorXd grad =
        x.transpose() * (p.matrix() - y) + (penalty.array() * w.array()).matrix();
    fit.grad_norm = grad.norm();
    if (fit.grad_norm <= cfg.grad_tol) break;
    const Eigen::ArrayXd curv = (p * (1.0 - p)).max(1e-12);
    Eigen::MatrixXd hess = x.transpose() * (x.array().colwise() * curv).matrix();
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    // Backtracking keeps each Newton step a descent step.
    double t = 1.0;
    Eigen::VectorXd next = w - step;
    double next_value = objective(next);
    while (next_value > value - 1e-4 * t * grad.dot(step) && t > 1e-8) {
      t *= 0.5;
      next = w - t * step;
      next_value = objective(next);
    }
    w = next;
    value = next_value;
  }
  fit.head.weights.resize(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) fit.head.weights[static_cast<std::size_t>(k)] = static_cast<float>(w(k));
  fit.head.bias = static_cast<float>(w(d));
  return fit;
}

LogRegFit fit_logreg_head(std::span<const geo::GeoPoint> presences,
                          model::LocationEncoder<float>& encoder,
                          const Tensor<float>& negative_features, const LogRegConfig& cfg) {
  if (presences.empty()) throw Error(ErrorCode::kNoPresences, "no presence locations");
  const auto pos = model::embed_points(encoder, presences);
  if (negative_features.rows() > 0 && negative_features.cols() != pos.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "negative features differ from encoder width");
  }
  Tensor<float> feats(pos.rows() + negative_features.rows(), pos.cols());
  std::copy(pos.data(), pos.data() + pos.size(), feats.data());
  std::copy(negative_features.data(), negative_features.data() + negative_features.size(),
            feats.data() + pos.size());
  std::vector<std::uint8_t> labels(feats.rows(), 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(pos.rows()), 1);
  return fit_logistic(feats, labels, cfg);
}

LogRegFit fit_logreg_head(std::span<const geo::GeoPoint> presences,
                          model::LocationEncoder<float>& encoder,
                          std::span<const geo::GeoPoint> target_pool, const LogRegConfig& cfg,
                          std::mt19937_64& rng) {
  if (presences.empty()) throw Error(ErrorCode::kNoPresences, "no presence locations");
  const auto negatives =
      pseudo_negatives(cfg.n_pseudo_uniform, cfg.n_pseudo_target, target_pool, rng);
  return fit_logreg_head(presences, encoder, model::embed_points(encoder, negatives), cfg);
}

EnsemblePrediction ensemble_predict(std::span<const geo::PredictionGrid> members) {
  if (members.size() < 2) {
    throw Error(ErrorCode::kFewerThanTwoMembers, "an ensemble needs at least two members");
  }
  const auto& first = members.front();
  for (const auto& m : members) {
    if (!(m.grid == first.grid) || m.cells.size() != first.cells.size()) {
      throw Error(ErrorCode::kGeometryMismatch, "ensemble members disagree on grid geometry");
    }
  }
  EnsemblePrediction out{first.grid, std::vector<float>(first.cells.size()),
                         std::vector<float>(first.cells.size()), members.size()};
  const double n = static_cast<double>(members.size());
  for (std::size_t i = 0; i < first.cells.size(); ++i) {
    double mean = 0.0;
    for (const auto& m : members) mean += m.cells[i];
    mean /= n;
    double var = 0.0;
    for (const auto& m : members) var += (m.cells[i] - mean) * (m.cells[i] - mean);
    out.mean[i] = static_cast<float>(mean);
    out.variance[i] = static_cast<float>(var / n);
  }
  return out;
}

EnsemblePrediction ensemble_predict(std::span<const EnsembleMember> members,
                                    const model::ContextSet& ctx) {
  if (members.size() < 2) {
    throw Error(ErrorCode::kFewerThanTwoMembers, "an ensemble needs at least two members");
  }
  std::vector<geo::PredictionGrid> grids;
  for (const auto& m : members) grids.push_back(feedforward_range(*m.model, ctx, *m.cells));
  return ensemble_predict(grids);
}

}  // namespace fsr::fewshot
