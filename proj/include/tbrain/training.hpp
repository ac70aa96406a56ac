#pragma once

// Cross-entropy objectives with analytic gradients, and the trainers built on
// them: supervised perception, Monte Carlo EM self-supervision, semantic
// memory adaptation (with optional replay) and consolidation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tbrain/decoder.hpp"
#include "tbrain/error.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/model.hpp"
#include "tbrain/random.hpp"
#include "tbrain/sensory.hpp"

namespace tbrain {

enum class ParamBlock : std::uint32_t {
  kA = 1U << 0,  // includes the untied input embeddings
  kD = 1U << 1,
  kV = 1U << 2,
  kW = 1U << 3,
  kB = 1U << 4,
  kABar = 1U << 5,
  kABarBg = 1U << 6,
};

class FreezeSet {
 public:
  FreezeSet() = default;
  FreezeSet(std::initializer_list<ParamBlock> blocks) {
    for (auto b : blocks) add(b);
  }

  void add(ParamBlock b) { bits_ |= static_cast<std::uint32_t>(b); }
  [[nodiscard]] bool contains(ParamBlock b) const {
    return (bits_ & static_cast<std::uint32_t>(b)) != 0;
  }

  static FreezeSet shared_weights() {
    return {ParamBlock::kA, ParamBlock::kD, ParamBlock::kV, ParamBlock::kW, ParamBlock::kB};
  }

 private:
  std::uint32_t bits_ = 0;
};

inline std::optional<ParamBlock> param_block_from_string(std::string_view name) {
  if (name == "A") return ParamBlock::kA;
  if (name == "D") return ParamBlock::kD;
  if (name == "V") return ParamBlock::kV;
  if (name == "W") return ParamBlock::kW;
  if (name == "B") return ParamBlock::kB;
  if (name == "a_bar") return ParamBlock::kABar;
  if (name == "a_bar_bg") return ParamBlock::kABarBg;
  return std::nullopt;
}

struct Gradients {
  Matrix A, A_in, D, V, W, B;
  Segments a_bar, a_bar_bg;

  static Gradients zeros_like(const ModelParams& p) {
    Gradients g;
    g.A = Matrix::Zero(p.A.rows(), p.A.cols());
    g.A_in = Matrix::Zero(p.A_in.rows(), p.A_in.cols());
    g.D = Matrix::Zero(p.D.rows(), p.D.cols());
    g.V = Matrix::Zero(p.V.rows(), p.V.cols());
    g.W = Matrix::Zero(p.W.rows(), p.W.cols());
    g.B = Matrix::Zero(p.B.rows(), p.B.cols());
    g.a_bar = Segments::zeros(p.A.rows());
    g.a_bar_bg = Segments::zeros(p.A.rows());
    return g;
  }

  void scale(double c) {
    for (Matrix* m : {&A, &A_in, &D, &V, &W, &B}) *m *= c;
    for (Segments* s : {&a_bar, &a_bar_bg}) {
      s->sub *= c;
      s->pred *= c;
      s->obj *= c;
    }
  }

  void add(const Gradients& other) {
    A += other.A;
    A_in += other.A_in;
    D += other.D;
    V += other.V;
    W += other.W;
    B += other.B;
    for (auto [mine, theirs] : {std::pair{&a_bar, &other.a_bar}, std::pair{&a_bar_bg, &other.a_bar_bg}}) {
      mine->sub += theirs->sub;
      mine->pred += theirs->pred;
      mine->obj += theirs->obj;
    }
  }

  void apply_freeze(const FreezeSet& freeze) {
    if (freeze.contains(ParamBlock::kA)) {
      A.setZero();
      A_in.setZero();
    }
    if (freeze.contains(ParamBlock::kD)) D.setZero();
    if (freeze.contains(ParamBlock::kV)) V.setZero();
    if (freeze.contains(ParamBlock::kW)) W.setZero();
    if (freeze.contains(ParamBlock::kB)) B.setZero();
    if (freeze.contains(ParamBlock::kABar)) a_bar = Segments::zeros(a_bar.sub.size());
    if (freeze.contains(ParamBlock::kABarBg)) a_bar_bg = Segments::zeros(a_bar_bg.sub.size());
  }

  [[nodiscard]] bool all_finite() const {
    for (const Matrix* m : {&A, &A_in, &D, &V, &W, &B})
      if (!m->allFinite()) return false;
    for (const Segments* s : {&a_bar, &a_bar_bg})
      if (!s->sub.allFinite() || !s->pred.allFinite() || !s->obj.allFinite()) return false;
    return true;
  }
};

namespace detail {

inline Vector logistic_slope(const Vector& activation) {
  return activation.array() * (1.0 - activation.array());
}

// Teacher-forced chain cost for one triple with representation inputs x.
// Accumulates gradients of A, A_in, V, W, B into g and of x into dx.
inline double chain_backward(const Segments& x, const Triple& t, const ModelParams& p,
                             Gradients& g, Segments& dx) {
  const Eigen::Index num_concepts = p.num_concepts();
  const Eigen::Index num_predicates = p.num_predicates();
  if (t.s >= num_concepts || t.o >= num_concepts || t.p >= num_predicates) {
    fail(ErrorCode::kInvalidIndex, "training triple out of range");
  }
  const auto a_out_c = p.concept_out();
  const auto a_out_p = p.predicate_out();
  Matrix& g_in = p.tie_weights ? g.A : g.A_in;

  // forward
  const Vector z1 = concept_logits(x.sub, p);
  const Vector u1 = p.concept_embedding(t.s) + x.sub;
  const Vector h1 = sigmoid(p.V * u1);
  const Vector m1 = sigmoid(p.B * h1);
  const Vector wm1 = p.W * m1;
  const Vector q2 = x.obj + wm1;
  const Vector z2 = concept_logits(q2, p);
  const Vector u2 = p.concept_embedding(t.o) + wm1 + x.obj;
  Vector r2 = p.V * u2;
  if (p.use_skip) r2 += p.B * h1;
  const Vector h2 = sigmoid(r2);
  const Vector m2 = sigmoid(p.B * h2);
  const Vector q3 = x.pred + p.W * m2;
  const Vector z3 = predicate_logits_from(q3, p);

  const double cost = neg_log_softmax(z1, t.s) + neg_log_softmax(z2, t.o) + neg_log_softmax(z3, t.p);
  if (!std::isfinite(cost) || !h2.allFinite() || !z3.allFinite()) {
    fail(ErrorCode::kNumericOverflow, "non-finite value in decoder chain");
  }

  // predicate step
  Vector dz3 = softmax(z3);
  dz3[t.p] -= 1.0;
  g.A.rightCols(num_predicates).noalias() += q3 * dz3.transpose();
  const Vector dq3 = a_out_p * dz3;
  dx.pred += dq3;
  g.W.noalias() += dq3 * m2.transpose();
  const Vector da2 = (p.W.transpose() * dq3).cwiseProduct(logistic_slope(m2));
  g.B.noalias() += da2 * h2.transpose();
  const Vector dr2 = (p.B.transpose() * da2).cwiseProduct(logistic_slope(h2));
  g.V.noalias() += dr2 * u2.transpose();
  const Vector du2 = p.V.transpose() * dr2;
  Vector dh1 = Vector::Zero(h1.size());
  if (p.use_skip) {
    g.B.noalias() += dr2 * h1.transpose();
    dh1 += p.B.transpose() * dr2;
  }
  g_in.col(t.o) += du2;
  dx.obj += du2;
  Vector dm1 = p.W.transpose() * du2;
  g.W.noalias() += du2 * m1.transpose();

  // object step
  Vector dz2 = softmax(z2);
  dz2[t.o] -= 1.0;
  g.A.leftCols(num_concepts).noalias() += q2 * dz2.transpose();
  const Vector dq2 = a_out_c * dz2;
  dx.obj += dq2;
  g.W.noalias() += dq2 * m1.transpose();
  dm1 += p.W.transpose() * dq2;
  const Vector da1 = dm1.cwiseProduct(logistic_slope(m1));
  g.B.noalias() += da1 * h1.transpose();
  dh1 += p.B.transpose() * da1;
  const Vector dr1 = dh1.cwiseProduct(logistic_slope(h1));
  g.V.noalias() += dr1 * u1.transpose();
  const Vector du1 = p.V.transpose() * dr1;
  g_in.col(t.s) += du1;
  dx.sub += du1;

  // subject step
  Vector dz1 = softmax(z1);
  dz1[t.s] -= 1.0;
  g.A.leftCols(num_concepts).noalias() += x.sub * dz1.transpose();
  dx.sub += a_out_c * dz1;
  return cost;
}

}  // namespace detail

// --- costs --------------------------------------------------------------------

struct CostTerms {
  double subject = 0.0;
  double object = 0.0;
  double predicate = 0.0;

  [[nodiscard]] double total() const { return subject + object + predicate; }
};

inline CostTerms chain_cost_terms(const Segments& x, const Triple& t, const ModelParams& params) {
  const auto tr = run_chain(x, params, ChainPolicy::forced(t));
  return {neg_log_softmax(tr.logits_sub, t.s), neg_log_softmax(tr.logits_obj, t.o),
          neg_log_softmax(tr.logits_pred, t.p)};
}

// -log P(s*) - log P(o*|s*) - log P(p*|s*,o*) with the boxes' sensory input.
inline double cost_perception(const Triple& t, const Scene& scene, const ModelParams& params) {
  return chain_cost_terms(sensory_segments(scene, params), t, params).total();
}

// Same three terms with a-bar (or the background a-bar) in place of D*g.
inline double cost_prob(const Triple& t, const ModelParams& params,
                        SemanticSource source = SemanticSource::kPerceptual) {
  return chain_cost_terms(semantic_segments(params, source), t, params).total();
}

// Mean teacher-forced cost over all ground-truth triples of the scenes.
inline double mean_perception_cost(std::span<const Scene> scenes, const ModelParams& params) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& scene : scenes) {
    const Segments x = sensory_segments(scene, params);
    for (const auto& t : scene.triples()) {
      total += chain_cost_terms(x, t, params).total();
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

inline double mean_prob_cost(std::span<const Triple> triples, const ModelParams& params,
                             SemanticSource source) {
  double total = 0.0;
  for (const auto& t : triples) total += cost_prob(t, params, source);
  return triples.empty() ? 0.0 : total / static_cast<double>(triples.size());
}

// --- gradients ----------------------------------------------------------------

struct CostGradient {
  double cost = 0.0;
  Gradients grad;
};

// Gradient of the summed perception cost of the given triples on one scene.
inline CostGradient grad_perception(std::span<const Triple> triples, const Scene& scene,
                                    const ModelParams& params, const FreezeSet& freeze = {}) {
  CostGradient out{0.0, Gradients::zeros_like(params)};
  const Segments x = sensory_segments(scene, params);
  Segments dx = Segments::zeros(params.A.rows());
  for (const auto& t : triples) out.cost += detail::chain_backward(x, t, params, out.grad, dx);
  out.grad.D.noalias() += dx.sub * scene.g_sub.transpose();
  out.grad.D.noalias() += dx.pred * scene.g_pred.transpose();
  out.grad.D.noalias() += dx.obj * scene.g_obj.transpose();
  out.grad.apply_freeze(freeze);
  if (!out.grad.all_finite()) fail(ErrorCode::kNumericOverflow, "non-finite gradient");
  return out;
}

inline CostGradient grad_perception(const Triple& t, const Scene& scene, const ModelParams& params,
                                    const FreezeSet& freeze = {}) {
  return grad_perception(std::span<const Triple>(&t, 1), scene, params, freeze);
}

inline CostGradient grad_prob(std::span<const Triple> triples, const ModelParams& params,
                              SemanticSource source, const FreezeSet& freeze = {}) {
  CostGradient out{0.0, Gradients::zeros_like(params)};
  const Segments& x = semantic_segments(params, source);
  Segments& dx = source == SemanticSource::kBackground ? out.grad.a_bar_bg : out.grad.a_bar;
  for (const auto& t : triples) out.cost += detail::chain_backward(x, t, params, out.grad, dx);
  out.grad.apply_freeze(freeze);
  if (!out.grad.all_finite()) fail(ErrorCode::kNumericOverflow, "non-finite gradient");
  return out;
}

inline CostGradient grad_prob(const Triple& t, const ModelParams& params, SemanticSource source,
                              const FreezeSet& freeze = {}) {
  return grad_prob(std::span<const Triple>(&t, 1), params, source, freeze);
}

// --- optimizer ----------------------------------------------------------------

enum class OptimizerKind { kSgd, kAdam };

// Plain SGD, SGD with heavy-ball momentum, or Adam (beta1 0.9, beta2 0.999).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double momentum = 0.0)
      : kind_(kind), lr_(learning_rate), momentum_(momentum) {}

  void step(ModelParams& p, const Gradients& g) {
    if (lr_ == 0.0) return;
    if (kind_ == OptimizerKind::kAdam) {
      adam_step(p, g);
      return;
    }
    const Gradients* direction = &g;
    if (momentum_ > 0.0) {
      if (!velocity_) {
        velocity_ = g;
      } else {
        velocity_->scale(momentum_);
        velocity_->add(g);
      }
      direction = &*velocity_;
    }
    const Gradients& d = *direction;
    p.A -= lr_ * d.A;
    if (!p.tie_weights) p.A_in -= lr_ * d.A_in;
    p.D -= lr_ * d.D;
    p.V -= lr_ * d.V;
    p.W -= lr_ * d.W;
    p.B -= lr_ * d.B;
    for (auto [seg, grad] : {std::pair{&p.a_bar, &d.a_bar}, std::pair{&p.a_bar_bg, &d.a_bar_bg}}) {
      seg->sub -= lr_ * grad->sub;
      seg->pred -= lr_ * grad->pred;
      seg->obj -= lr_ * grad->obj;
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  template <typename Param, typename Grad>
  void adam_update(Param& param, const Grad& grad, Matrix& m, Matrix& v, double c1, double c2) {
    if (m.size() != grad.size()) {
      m = Matrix::Zero(grad.rows(), grad.cols());
      v = Matrix::Zero(grad.rows(), grad.cols());
    }
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }

  void adam_step(ModelParams& p, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    std::size_t slot = 0;
    auto update = [&](auto& param, const auto& grad) {
      if (moments_.size() <= slot) moments_.emplace_back();
      auto& [m, v] = moments_[slot++];
      adam_update(param, grad, m, v, c1, c2);
    };
    update(p.A, g.A);
    if (!p.tie_weights) update(p.A_in, g.A_in);
    update(p.D, g.D);
    update(p.V, g.V);
    update(p.W, g.W);
    update(p.B, g.B);
    for (auto [seg, grad] : {std::pair{&p.a_bar, &g.a_bar}, std::pair{&p.a_bar_bg, &g.a_bar_bg}}) {
      update(seg->sub, grad->sub);
      update(seg->pred, grad->pred);
      update(seg->obj, grad->obj);
    }
  }

  OptimizerKind kind_;
  double lr_;
  double momentum_;
  std::optional<Gradients> velocity_;
  std::uint64_t t_ = 0;
  std::vector<std::pair<Matrix, Matrix>> moments_;
};

// --- trainers -----------------------------------------------------------------

enum class TrainMode { kSupervised, kSelfSupervised, kSemantic, kSemanticReplay };

inline std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kSupervised: return "supervised";
    case TrainMode::kSelfSupervised: return "self_supervised";
    case TrainMode::kSemantic: return "semantic";
    case TrainMode::kSemanticReplay: return "semantic_replay";
  }
  return "supervised";
}

inline std::optional<TrainMode> train_mode_from_string(std::string_view text) {
  for (auto m : {TrainMode::kSupervised, TrainMode::kSelfSupervised, TrainMode::kSemantic,
                 TrainMode::kSemanticReplay}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

struct TrainConfig {
  double learning_rate = 0.5;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.0;
  std::uint32_t epochs = 50;
  std::uint32_t batch_size = 1;          // scenes (or triples) per update
  TrainMode mode = TrainMode::kSupervised;
  std::uint32_t samples_per_scene = 30;  // N for the Monte Carlo E-step
  std::uint64_t seed = 7;
  FreezeSet freeze;
  // Early stopping on the held-out cost; 0 disables it.
  std::uint32_t patience = 0;
  SemanticSource semantic_source = SemanticSource::kPerceptual;
  // semantic_replay: background samples drawn per stream triple.
  std::uint32_t replay_per_step = 1;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      fail(ErrorCode::kConfig, "learning_rate must be finite and >= 0");
    }
    if (samples_per_scene < 1) fail(ErrorCode::kConfig, "samples_per_scene must be >= 1");
    if (batch_size < 1) fail(ErrorCode::kConfig, "batch_size must be >= 1");
  }
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  TrainMode mode = TrainMode::kSupervised;
  double mean_cost = 0.0;
  double heldout_cost = 0.0;
};

// epoch \t mode \t mean_cost \t heldout_cost
inline std::string format_epoch(const EpochRecord& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.epoch << '\t' << to_string(r.mode) << '\t' << r.mean_cost << '\t' << r.heldout_cost;
  return out.str();
}

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::uint32_t best_epoch = 0;
};

namespace detail {

inline std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

// Shared epoch loop: `step` consumes one batch of item indices and returns the
// summed cost and number of cost terms; `heldout` evaluates the model.
template <typename StepFn, typename HeldoutFn>
TrainReport run_epochs(ModelParams& params, std::size_t num_items, const TrainConfig& cfg,
                       StepFn&& step, HeldoutFn&& heldout, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainReport report;
  Rng order_rng(derive_seed(cfg.seed, "epoch-order"));
  double best = heldout(params);
  ModelParams best_params = params;
  std::uint32_t since_best = 0;
  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled_order(num_items, order_rng);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const auto [cost, n] = step(std::span<const std::size_t>(order.data() + begin, end - begin), epoch);
      total += cost;
      count += n;
    }
    EpochRecord rec{epoch, cfg.mode, count == 0 ? 0.0 : total / static_cast<double>(count),
                    heldout(params)};
    if (!std::isfinite(rec.mean_cost) || !std::isfinite(rec.heldout_cost)) {
      fail(ErrorCode::kNumericOverflow, "training diverged at epoch " + std::to_string(epoch) +
                                            ": " + format_epoch(rec));
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (cfg.patience == 0) continue;
    if (rec.heldout_cost < best) {
      best = rec.heldout_cost;
      best_params = params;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      params = best_params;
      break;
    }
  }
  if (cfg.patience > 0 && report.best_epoch != report.epochs.size()) params = best_params;
  if (cfg.patience == 0) report.best_epoch = static_cast<std::uint32_t>(report.epochs.size());
  return report;
}

// One SGD update from scenes paired with their target triples.
inline std::pair<double, std::size_t> perception_update(
    ModelParams& params, Optimizer& opt, std::span<const std::size_t> batch,
    std::span<const Scene> scenes, const std::vector<std::vector<Triple>>& targets,
    const FreezeSet& freeze) {
  Gradients total = Gradients::zeros_like(params);
  double cost = 0.0;
  std::size_t terms = 0;
  std::size_t used = 0;
  for (std::size_t i : batch) {
    const auto& triples = targets[i];
    if (triples.empty()) continue;
    auto cg = grad_perception(triples, scenes[i], params, freeze);
    cg.grad.scale(1.0 / static_cast<double>(triples.size()));
    total.add(cg.grad);
    cost += cg.cost;
    terms += triples.size();
    ++used;
  }
  if (used == 0) return {0.0, 0};
  total.scale(1.0 / static_cast<double>(used));
  opt.step(params, total);
  return {cost, terms};
}

}  // namespace detail

// Supervised perception: each scene's ground-truth triples are the targets.
inline TrainReport train_supervised(ModelParams& params, std::span<const Scene> train,
                                    std::span<const Scene> heldout, const TrainConfig& cfg,
                                    const EpochCallback& on_epoch = {}) {
  std::vector<std::vector<Triple>> targets;
  targets.reserve(train.size());
  for (const auto& scene : train) {
    const auto set = scene.triples();
    targets.emplace_back(set.begin(), set.end());
  }
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.momentum);
  auto step = [&](std::span<const std::size_t> batch, std::uint32_t) {
    return detail::perception_update(params, opt, batch, train, targets, cfg.freeze);
  };
  auto eval = [&](const ModelParams& p) { return mean_perception_cost(heldout, p); };
  return detail::run_epochs(params, train.size(), cfg, step, eval, on_epoch);
}

// Monte Carlo EM: the E-step decodes each scene into a deduplicated set of
// samples, the M-step takes a gradient step treating them as data.
inline TrainReport train_self_supervised(ModelParams& params, std::span<const Scene> scenes,
                                         std::span<const Scene> heldout, const TrainConfig& cfg,
                                         const EpochCallback& on_epoch = {}) {
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.momentum);
  std::vector<std::vector<Triple>> targets(scenes.size());
  auto step = [&](std::span<const std::size_t> batch, std::uint32_t epoch) {
    for (std::size_t i : batch) {
      Rng rng(derive_seed(derive_seed(cfg.seed, "e-step"), (std::uint64_t{epoch} << 32) | i));
      const auto decoded = decode_scene(scenes[i], params, cfg.samples_per_scene,
                                        DecodeMode::kSample, rng);
      targets[i].assign(decoded.facts.begin(), decoded.facts.end());
    }
    return detail::perception_update(params, opt, batch, scenes, targets, cfg.freeze);
  };
  auto eval = [&](const ModelParams& p) { return mean_perception_cost(heldout, p); };
  return detail::run_epochs(params, scenes.size(), cfg, step, eval, on_epoch);
}

// Semantic memory adaptation on a triple stream with cost_prob. In replay mode
// every stream triple is interleaved with samples drawn from the background
// semantic memory as it stood when the call began, trained against the
// background a-bar. Samples from the live model would carry zero expected
// gradient and could not hold the background distribution in place.
inline TrainReport train_semantic(ModelParams& params, std::span<const Triple> stream,
                                  std::span<const Triple> heldout, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch = {}) {
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.momentum);
  const bool replay = cfg.mode == TrainMode::kSemanticReplay;
  Rng replay_rng(derive_seed(cfg.seed, "replay"));
  const ModelParams snapshot = replay ? params : ModelParams{};
  auto step = [&](std::span<const std::size_t> batch, std::uint32_t) {
    std::vector<Triple> triples;
    triples.reserve(batch.size());
    for (std::size_t i : batch) triples.push_back(stream[i]);
    auto cg = grad_prob(triples, params, cfg.semantic_source, cfg.freeze);
    Gradients total = std::move(cg.grad);
    double n = static_cast<double>(triples.size());
    if (replay) {
      std::vector<Triple> replayed;
      for (std::size_t k = 0; k < triples.size() * cfg.replay_per_step; ++k) {
        replayed.push_back(sample_semantic(snapshot, SemanticSource::kBackground, std::nullopt, replay_rng));
      }
      if (!replayed.empty()) {
        total.add(grad_prob(replayed, params, SemanticSource::kBackground, cfg.freeze).grad);
        n += static_cast<double>(replayed.size());
      }
    }
    total.scale(1.0 / n);
    opt.step(params, total);
    return std::pair<double, std::size_t>{cg.cost, triples.size()};
  };
  auto eval = [&](const ModelParams& p) { return mean_prob_cost(heldout, p, cfg.semantic_source); };
  return detail::run_epochs(params, stream.size(), cfg, step, eval, on_epoch);
}

// a-bar := per-segment arithmetic mean of the stored engrams.
inline void consolidate_semantic(ModelParams& params) {
  if (params.episodic.empty()) fail(ErrorCode::kMissingEngram, "episodic store is empty");
  Segments sum = Segments::zeros(params.A.rows());
  for (const auto& [t, seg] : params.episodic) {
    sum.sub += seg.sub;
    sum.pred += seg.pred;
    sum.obj += seg.obj;
  }
  const double n = static_cast<double>(params.episodic.size());
  params.a_bar = {sum.sub / n, sum.pred / n, sum.obj / n};
}

}  // namespace tbrain
