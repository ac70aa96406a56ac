#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "tbrain/tbrain.hpp"

namespace support {

using namespace tbrain;

inline ModelParams small_params(std::uint64_t seed, std::uint32_t n_e = 6, std::uint32_t n_p = 4,
                                std::uint32_t d_g = 5, std::uint32_t d_q = 4, std::uint32_t d_h = 5,
                                bool skip = false, bool tied = true, double scale = 1.0) {
  ModelParams p = init_params({n_e, n_p, d_g, d_q, d_h}, seed, {skip, tied, scale});
  Rng rng(derive_seed(seed, "abar"));
  for (Segments* s : {&p.a_bar, &p.a_bar_bg})
    for (Vector* v : {&s->sub, &s->pred, &s->obj})
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = rng.normal();
  return p;
}

inline Vector random_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Scene random_scene(Rng& rng, std::uint32_t d_g, std::uint32_t n_e, std::uint32_t n_p,
                          std::size_t t = 0) {
  Scene s;
  s.t = t;
  s.sub_labels = {static_cast<Index>(rng.below(n_e))};
  s.obj_labels = {static_cast<Index>(rng.below(n_e)), static_cast<Index>(rng.below(n_e))};
  s.predicates = {static_cast<Index>(rng.below(n_p))};
  s.g_sub = random_vector(rng, d_g);
  s.g_pred = random_vector(rng, d_g);
  s.g_obj = random_vector(rng, d_g);
  return s;
}

// Upper-tail p-value of Pearson's statistic for observed counts vs expected
// probabilities (cells with zero expectation must have zero counts).
inline double chi_square_p(const std::vector<double>& counts, const std::vector<double>& probs) {
  double n = 0.0;
  for (double c : counts) n += c;
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (probs[i] <= 0.0) {
      if (counts[i] > 0.0) return 0.0;
      continue;
    }
    const double e = n * probs[i];
    stat += (counts[i] - e) * (counts[i] - e) / e;
    ++cells;
  }
  if (cells < 2) return 1.0;
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// --- finite-difference gradient check ------------------------------------------

struct GradCheck {
  double worst_rel = 0.0;
  std::string worst_at;
  std::size_t entries = 0;
};

// Every trainable entry of p paired with the matching gradient entry.
inline std::vector<std::pair<std::string, std::pair<double*, const double*>>> entries(ModelParams& p,
                                                                                        const Gradients& g) {
  std::vector<std::pair<std::string, std::pair<double*, const double*>>> out;
  auto mat = [&](const std::string& name, Matrix& m, const Matrix& gm) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      out.push_back({name + "[" + std::to_string(i) + "]", {m.data() + i, gm.data() + i}});
  };
  mat("A", p.A, g.A);
  if (!p.tie_weights) mat("A_in", p.A_in, g.A_in);
  mat("D", p.D, g.D);
  mat("V", p.V, g.V);
  mat("W", p.W, g.W);
  mat("B", p.B, g.B);
  auto seg = [&](const std::string& name, Segments& s, const Segments& gs) {
    for (auto [v, gv, tag] : {std::tuple{&s.sub, &gs.sub, "sub"}, std::tuple{&s.pred, &gs.pred, "pred"},
                              std::tuple{&s.obj, &gs.obj, "obj"}}) {
      for (Eigen::Index i = 0; i < v->size(); ++i)
        out.push_back({name + "." + tag + "[" + std::to_string(i) + "]", {v->data() + i, gv->data() + i}});
    }
  };
  seg("a_bar", p.a_bar, g.a_bar);
  seg("a_bar_bg", p.a_bar_bg, g.a_bar_bg);
  return out;
}

// Central differences with step h, relative error |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradient(ModelParams p, const Gradients& analytic,
                                const std::function<double(const ModelParams&)>& cost, double h = 1e-5,
                                double floor = 1e-3) {
  GradCheck out;
  for (auto& [name, ptrs] : entries(p, analytic)) {
    double* x = ptrs.first;
    const double saved = *x;
    *x = saved + h;
    const double up = cost(p);
    *x = saved - h;
    const double down = cost(p);
    *x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = *ptrs.second;
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    ++out.entries;
    if (rel > out.worst_rel) {
      out.worst_rel = rel;
      out.worst_at = name;
    }
  }
  return out;
}

// --- trained toy model ---------------------------------------------------------------

struct Trained {
  World world;
  ModelParams params;
  ModelParams untrained;
};

inline TrainConfig toy_train_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 50;
  cfg.patience = 5;
  cfg.seed = 7;
  return cfg;
}

inline ModelParams fresh_model(const World& w, std::uint64_t seed = 7) {
  const ModelDims dims{static_cast<std::uint32_t>(w.vocab.num_concepts()),
                       static_cast<std::uint32_t>(w.vocab.num_predicates()), w.config.feature_dim, 32, 64};
  return init_params(dims, seed);
}

// Default toy world, supervised training with the last 50 training scenes held out.
inline const Trained& trained_toy() {
  static const Trained instance = [] {
    Trained t;
    t.world = generate_world(WorldConfig{});
    t.params = fresh_model(t.world);
    t.untrained = t.params;
    const std::span<const Scene> all(t.world.train);
    train_supervised(t.params, all.first(all.size() - 50), all.last(50), toy_train_config());
    return t;
  }();
  return instance;
}

}  // namespace support
