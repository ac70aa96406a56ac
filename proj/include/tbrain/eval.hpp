#pragma once

// Recall@K and the desk-scale task suite: subject, predicate and phrase
// detection, their zero-shot restrictions, the working-memory ablation and
// semantic-memory-only retrieval.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "tbrain/decoder.hpp"
#include "tbrain/error.hpp"
#include "tbrain/kg.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/model.hpp"
#include "tbrain/random.hpp"
#include "tbrain/sensory.hpp"

namespace tbrain {

using ScoredTriple = std::pair<Triple, double>;

// Per-scene predictions, best first.
struct RankedPredictions {
  std::vector<ScoredTriple> ranked;

  // Descending score; equal scores in canonical (s, p, o) order. Keeps the best
  // score of duplicated triples.
  void finalize() {
    std::sort(ranked.begin(), ranked.end(), [](const ScoredTriple& a, const ScoredTriple& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::set<Triple> seen;
    std::erase_if(ranked, [&seen](const ScoredTriple& e) { return !seen.insert(e.first).second; });
  }

  [[nodiscard]] std::set<Triple> top(std::size_t k) const {
    std::set<Triple> out;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.insert(ranked[i].first);
    return out;
  }
};

// Mean over scenes of |truth intersect top-K| / |truth|. Scenes with empty truth
// are skipped with a warning.
inline double recall_at_k(std::span<const RankedPredictions> preds,
                          std::span<const std::set<Triple>> truth, std::size_t k) {
  if (k < 1) fail(ErrorCode::kConfig, "k must be >= 1");
  if (preds.size() != truth.size()) fail(ErrorCode::kShape, "predictions and truth differ in length");
  double sum = 0.0;
  std::size_t scenes = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truth[i].empty()) {
      std::clog << "warning: scene " << i << " has no ground truth; excluded from recall\n";
      continue;
    }
    const auto top = preds[i].top(k);
    const auto hits = std::count_if(truth[i].begin(), truth[i].end(),
                                    [&top](const Triple& t) { return top.contains(t); });
    sum += static_cast<double>(hits) / static_cast<double>(truth[i].size());
    ++scenes;
  }
  if (scenes == 0) fail(ErrorCode::kNotApplicable, "no scene has ground truth");
  return sum / static_cast<double>(scenes);
}

// --- model-based rankers ------------------------------------------------------

namespace detail {

inline std::vector<Index> top_indices(const Vector& probs, std::size_t n) {
  std::vector<Index> idx(static_cast<std::size_t>(probs.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&probs](Index a, Index b) { return probs[a] > probs[b]; });
  idx.resize(std::min(n, idx.size()));
  return idx;
}

}  // namespace detail

// Full-triple ranking by the chain product P(s) P(o|s) P(p|s,o) over the top
// `beam` subjects, then the top `beam` objects per subject, then all predicates.
inline RankedPredictions rank_triples(const Segments& x, const ModelParams& params,
                                      std::size_t beam) {
  RankedPredictions out;
  const Vector p_s = softmax(concept_logits(x.sub, params));
  for (Index s : detail::top_indices(p_s, beam)) {
    const Vector h_s = subject_state(s, x.sub, params);
    const Vector p_o = softmax(concept_logits(x.obj + memory_readout(h_s, params), params));
    for (Index o : detail::top_indices(p_o, beam)) {
      const Vector h_so = object_state(o, x.obj, h_s, params);
      const Vector p_p = softmax(predicate_logits_from(x.pred + memory_readout(h_so, params), params));
      for (Index p = 0; p < p_p.size(); ++p) {
        out.ranked.push_back({{s, p, o}, p_s[s] * p_o[o] * p_p[p]});
      }
    }
  }
  out.finalize();
  return out;
}

// Predicate detection for one scene: each distinct ground-truth (s, o) pair is
// committed and its top-K predicates under P(p|s,o) are emitted.
inline RankedPredictions predicate_predictions(const Segments& x, const ModelParams& params,
                                               const std::set<Triple>& truth, std::size_t k) {
  RankedPredictions out;
  std::set<std::pair<Index, Index>> pairs;
  for (const auto& t : truth) pairs.insert({t.s, t.o});
  for (const auto& [s, o] : pairs) {
    const Vector h_s = subject_state(s, x.sub, params);
    const Vector h_so = object_state(o, x.obj, h_s, params);
    const Vector p_p = softmax(predicate_logits_from(x.pred + memory_readout(h_so, params), params));
    for (Index p : detail::top_indices(p_p, k)) out.ranked.push_back({{s, p, o}, p_p[p]});
  }
  // Every emitted triple is within its pair's top-K; keep them all.
  out.finalize();
  return out;
}

enum class Task { kSubject, kPredicate, kPhrase };

inline std::string_view to_string(Task task) {
  switch (task) {
    case Task::kSubject: return "subject";
    case Task::kPredicate: return "predicate";
    case Task::kPhrase: return "phrase";
  }
  return "phrase";
}

struct EvalOptions {
  std::size_t beam = 10;
};

namespace detail {

// Subject detection treats the subject labels as the truth, encoded as (s,0,0).
inline std::set<Triple> subject_truth(const Scene& scene) {
  std::set<Triple> out;
  for (Index s : scene.sub_labels) out.insert({s, 0, 0});
  return out;
}

inline RankedPredictions subject_predictions(const Segments& x, const ModelParams& params) {
  RankedPredictions out;
  const Vector p_s = softmax(concept_logits(x.sub, params));
  for (Index s = 0; s < p_s.size(); ++s) out.ranked.push_back({{s, 0, 0}, p_s[s]});
  out.finalize();
  return out;
}

}  // namespace detail

// Recall@K of one task; `restrict_to`, when given, keeps only ground-truth
// triples in that set and drops scenes left without any.
inline double evaluate_task(const ModelParams& params, std::span<const Scene> scenes, Task task,
                            std::size_t k, const EvalOptions& options = {},
                            const std::set<Triple>* restrict_to = nullptr) {
  std::vector<RankedPredictions> preds;
  std::vector<std::set<Triple>> truth;
  for (const auto& scene : scenes) {
    std::set<Triple> t = task == Task::kSubject ? detail::subject_truth(scene) : scene.triples();
    if (restrict_to != nullptr) {
      std::erase_if(t, [restrict_to](const Triple& x) { return !restrict_to->contains(x); });
      if (t.empty()) continue;
    }
    const Segments x = sensory_segments(scene, params);
    switch (task) {
      case Task::kSubject: preds.push_back(detail::subject_predictions(x, params)); break;
      case Task::kPredicate: preds.push_back(predicate_predictions(x, params, t, k)); break;
      case Task::kPhrase: preds.push_back(rank_triples(x, params, options.beam)); break;
    }
    truth.push_back(std::move(t));
  }
  if (truth.empty()) fail(ErrorCode::kNotApplicable, "no scene has evaluable ground truth");
  // Predicate predictions hold top-K per pair, so all of them count.
  const std::size_t cut = task == Task::kPredicate ? SIZE_MAX : k;
  return recall_at_k(preds, truth, cut);
}

inline double predicate_detection(const ModelParams& params, std::span<const Scene> scenes,
                                  std::size_t k) {
  return evaluate_task(params, scenes, Task::kPredicate, k);
}

inline double phrase_detection(const ModelParams& params, std::span<const Scene> scenes,
                               std::size_t k, const EvalOptions& options = {}) {
  return evaluate_task(params, scenes, Task::kPhrase, k, options);
}

inline double subject_detection(const ModelParams& params, std::span<const Scene> scenes,
                                std::size_t k) {
  return evaluate_task(params, scenes, Task::kSubject, k);
}

// Recall restricted to ground-truth triples never seen in training.
inline double zero_shot_eval(const ModelParams& params, std::span<const Scene> test,
                             const std::set<Triple>& zero_shot, std::size_t k,
                             Task task = Task::kPredicate, const EvalOptions& options = {}) {
  if (zero_shot.empty()) fail(ErrorCode::kNotApplicable, "zero-shot triple set is empty");
  return evaluate_task(params, test, task, k, options, &zero_shot);
}

// The model with every working-memory contribution to q removed (W = 0).
inline ModelParams without_working_memory(const ModelParams& params) {
  ModelParams out = params;
  out.W.setZero();
  return out;
}

inline double ablation_dir(const ModelParams& params, std::span<const Scene> scenes, Task task,
                           std::size_t k, const EvalOptions& options = {}) {
  return evaluate_task(without_working_memory(params), scenes, task, k, options);
}

// Semantic-memory-only retrieval: one global ranking from a-bar, scored against
// every scene's ground truth.
inline double semantic_recall(const ModelParams& params, std::span<const Scene> scenes,
                              std::size_t k, SemanticSource source = SemanticSource::kPerceptual) {
  const auto ranking = rank_triples(semantic_segments(params, source), params,
                                    static_cast<std::size_t>(params.num_concepts()));
  std::vector<RankedPredictions> preds;
  std::vector<std::set<Triple>> truth;
  for (const auto& scene : scenes) {
    preds.push_back(ranking);
    truth.push_back(scene.triples());
  }
  return recall_at_k(preds, truth, k);
}

// Baseline: uniformly random scores over the full triple space.
inline double random_phrase_recall(std::span<const Scene> scenes, std::size_t num_concepts,
                                   std::size_t num_predicates, std::size_t k, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "random-scorer"));
  std::vector<RankedPredictions> preds;
  std::vector<std::set<Triple>> truth;
  for (const auto& scene : scenes) {
    RankedPredictions r;
    for (Index s = 0; s < num_concepts; ++s)
      for (Index p = 0; p < num_predicates; ++p)
        for (Index o = 0; o < num_concepts; ++o) r.ranked.push_back({{s, p, o}, rng.uniform()});
    r.finalize();
    preds.push_back(std::move(r));
    truth.push_back(scene.triples());
  }
  return recall_at_k(preds, truth, k);
}

}  // namespace tbrain
