#pragma once

// The four-layer decoder: sensory buffer g, representation layer q, working
// memory h and index layer e. A triple is decoded in three steps (subject,
// object, predicate); every step recomputes q from its current inputs:
//
//   subject:   q = x_sub                     -> softmax over concepts
//              h_S = sig(V (a_s + x_sub))
//   object:    q = x_obj + W sig(B h_S)      -> softmax over concepts
//              h_SO = sig(V (a_o + W sig(B h_S) + x_obj) [+ B h_S])
//   predicate: q = x_pred + W sig(B h_SO)    -> softmax over predicates
//
// x is D*g in perception, the stored engram a_t in episodic recall and a-bar
// (or the background a-bar) in semantic recall.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "tbrain/error.hpp"
#include "tbrain/kg.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/model.hpp"
#include "tbrain/random.hpp"
#include "tbrain/sensory.hpp"

namespace tbrain {

enum class DecodeMode { kSample, kGreedy };
enum class SemanticSource { kPerceptual, kBackground };

// --- single steps -----------------------------------------------------------

inline void check_feature(const FeatureVector& g, const ModelParams& params) {
  if (g.size() != params.D.cols()) {
    fail(ErrorCode::kShape, "feature vector has dimension " + std::to_string(g.size()) +
                                ", model expects d_g = " + std::to_string(params.D.cols()));
  }
}

inline void check_representation(const Vector& x, const ModelParams& params) {
  if (x.size() != params.A.rows()) {
    fail(ErrorCode::kShape, "representation has dimension " + std::to_string(x.size()) +
                                ", model expects d_q = " + std::to_string(params.A.rows()));
  }
}

// a(BB) = D g
inline Vector sensory_representation(const FeatureVector& g, const ModelParams& params) {
  check_feature(g, params);
  return params.D * g;
}

inline Segments sensory_segments(const Scene& scene, const ModelParams& params) {
  return {sensory_representation(scene.g_sub, params), sensory_representation(scene.g_pred, params),
          sensory_representation(scene.g_obj, params)};
}

inline Vector concept_logits(const Vector& q, const ModelParams& params) {
  return params.concept_out().transpose() * q;
}

inline Vector predicate_logits_from(const Vector& q, const ModelParams& params) {
  return params.predicate_out().transpose() * q;
}

// W sig(B h): the working memory's contribution to q.
inline Vector memory_readout(const Vector& h, const ModelParams& params) {
  return params.W * sigmoid(params.B * h);
}

inline Vector subject_state(Index s, const Vector& x_sub, const ModelParams& params) {
  return sigmoid(params.V * (params.concept_embedding(s) + x_sub));
}

inline Vector object_state(Index o, const Vector& x_obj, const Vector& h_s,
                           const ModelParams& params) {
  Vector pre = params.V * (params.concept_embedding(o) + memory_readout(h_s, params) + x_obj);
  if (params.use_skip) pre += params.B * h_s;
  return sigmoid(pre);
}

inline Vector triple_state(Index p, const Vector& x_pred, const Vector& h_so,
                           const ModelParams& params) {
  Vector pre = params.V * (params.predicate_embedding(p) + memory_readout(h_so, params) + x_pred);
  if (params.use_skip) pre += params.B * h_so;
  return sigmoid(pre);
}

// Public step API in terms of sensory features.

inline Vector subject_logits(const FeatureVector& g_sub, const ModelParams& params) {
  return concept_logits(sensory_representation(g_sub, params), params);
}

inline Vector wm_after_subject(Index s_star, const FeatureVector& g_sub, const ModelParams& params) {
  return subject_state(s_star, sensory_representation(g_sub, params), params);
}

inline Vector object_logits(const FeatureVector& g_obj, const Vector& h_s, const ModelParams& params) {
  return concept_logits(sensory_representation(g_obj, params) + memory_readout(h_s, params), params);
}

inline Vector wm_after_object(Index o_star, const FeatureVector& g_obj, const Vector& h_s,
                              const ModelParams& params) {
  return object_state(o_star, sensory_representation(g_obj, params), h_s, params);
}

inline Vector predicate_logits(const FeatureVector& g_pred, const Vector& h_so,
                               const ModelParams& params) {
  return predicate_logits_from(sensory_representation(g_pred, params) + memory_readout(h_so, params),
                               params);
}

struct IntegratedTriple {
  Vector h_spo;
  Vector q_final;  // W sig(B h_SPO); can seed the next triple's decoding
};

inline IntegratedTriple integrate_triple(Index p_star, const FeatureVector& g_pred,
                                         const Vector& h_so, const ModelParams& params) {
  IntegratedTriple out;
  out.h_spo = triple_state(p_star, sensory_representation(g_pred, params), h_so, params);
  out.q_final = memory_readout(out.h_spo, params);
  return out;
}

// --- full chain ---------------------------------------------------------------

struct DecoderTrace {
  Triple triple;
  Vector logits_sub, logits_obj, logits_pred;
  Vector probs_sub, probs_obj, probs_pred;
  Vector q_sub, q_obj, q_pred;
  Vector h_s, h_so, h_spo;
  Vector q_final;

  // P(s*) P(o*|s*) P(p*|s*,o*)
  [[nodiscard]] double joint_probability() const {
    return probs_sub[triple.s] * probs_obj[triple.o] * probs_pred[triple.p];
  }
};

// Per-step index selection. Forced entries commit that index regardless of
// the distribution (teacher forcing / conditioning).
struct ChainPolicy {
  DecodeMode mode = DecodeMode::kSample;
  std::optional<Index> subject;
  std::optional<Index> object;
  std::optional<Index> predicate;

  static ChainPolicy greedy() { return {DecodeMode::kGreedy, std::nullopt, std::nullopt, std::nullopt}; }

  static ChainPolicy forced(const Triple& t) {
    return {DecodeMode::kGreedy, t.s, t.o, t.p};
  }
};

namespace detail {

inline Index choose(const Vector& probs, std::optional<Index> forced, DecodeMode mode, Rng* rng) {
  if (forced) {
    if (*forced >= probs.size()) {
      fail(ErrorCode::kInvalidIndex, "index " + std::to_string(*forced) + " out of range");
    }
    return *forced;
  }
  if (mode == DecodeMode::kGreedy || rng == nullptr) return static_cast<Index>(argmax(probs));
  return static_cast<Index>(rng->categorical({probs.data(), static_cast<std::size_t>(probs.size())}));
}

}  // namespace detail

inline DecoderTrace run_chain(const Segments& x, const ModelParams& params,
                              const ChainPolicy& policy, Rng* rng = nullptr) {
  check_representation(x.sub, params);
  check_representation(x.pred, params);
  check_representation(x.obj, params);
  DecoderTrace tr;

  tr.q_sub = x.sub;
  tr.logits_sub = concept_logits(tr.q_sub, params);
  tr.probs_sub = softmax(tr.logits_sub);
  tr.triple.s = detail::choose(tr.probs_sub, policy.subject, policy.mode, rng);
  tr.h_s = subject_state(tr.triple.s, x.sub, params);

  tr.q_obj = x.obj + memory_readout(tr.h_s, params);
  tr.logits_obj = concept_logits(tr.q_obj, params);
  tr.probs_obj = softmax(tr.logits_obj);
  tr.triple.o = detail::choose(tr.probs_obj, policy.object, policy.mode, rng);
  tr.h_so = object_state(tr.triple.o, x.obj, tr.h_s, params);

  tr.q_pred = x.pred + memory_readout(tr.h_so, params);
  tr.logits_pred = predicate_logits_from(tr.q_pred, params);
  tr.probs_pred = softmax(tr.logits_pred);
  tr.triple.p = detail::choose(tr.probs_pred, policy.predicate, policy.mode, rng);
  tr.h_spo = triple_state(tr.triple.p, x.pred, tr.h_so, params);
  tr.q_final = memory_readout(tr.h_spo, params);
  return tr;
}

struct DecodeResult {
  std::vector<Triple> bag;  // samples in draw order
  std::set<Triple> facts;   // deduplicated
};

inline DecodeResult decode_segments(const Segments& x, const ModelParams& params,
                                    std::size_t n_samples, DecodeMode mode, Rng& rng,
                                    std::optional<Index> fixed_subject = std::nullopt) {
  DecodeResult out;
  ChainPolicy policy;
  policy.mode = mode;
  policy.subject = fixed_subject;
  const std::size_t draws = mode == DecodeMode::kGreedy ? 1 : n_samples;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto tr = run_chain(x, params, policy, &rng);
    out.bag.push_back(tr.triple);
    out.facts.insert(tr.triple);
  }
  return out;
}

// Chatterbox decoding of one scene: a bag of n ancestral samples, deduplicated.
// Greedy mode emits the single argmax chain.
inline DecodeResult decode_scene(const Scene& scene, const ModelParams& params,
                                 std::size_t n_samples, DecodeMode mode, Rng& rng) {
  if (n_samples == 0) fail(ErrorCode::kConfig, "n_samples must be >= 1");
  return decode_segments(sensory_segments(scene, params), params, n_samples, mode, rng);
}

// Memoryless label sampling on one box: distinct sampled labels s1 != s2 yield
// (s1, hasProperty, s2). Reads only D and the concept embeddings.
inline std::set<Triple> simple_decode(const FeatureVector& g_box, const ModelParams& params,
                                      std::size_t n_samples, Index has_property, Rng& rng) {
  if (has_property >= params.num_predicates()) {
    fail(ErrorCode::kInvalidIndex, "hasProperty predicate index out of range");
  }
  const Vector probs = softmax(subject_logits(g_box, params));
  std::set<Index> labels;
  for (std::size_t i = 0; i < n_samples; ++i) {
    labels.insert(static_cast<Index>(
        rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())})));
  }
  std::set<Triple> out;
  for (Index a : labels)
    for (Index b : labels)
      if (a != b) out.insert({a, has_property, b});
  return out;
}

// Post-processing of hasProperty facts: the property concept (object) selects a
// more specific predicate, e.g. Blond -> hasHaircolor. Unmapped objects keep
// hasProperty.
inline std::set<Triple> refine_properties(const std::set<Triple>& facts, Index has_property,
                                          const std::map<Index, Index>& by_object) {
  std::set<Triple> out;
  for (Triple t : facts) {
    if (t.p == has_property) {
      if (auto it = by_object.find(t.o); it != by_object.end()) t.p = it->second;
    }
    out.insert(t);
  }
  return out;
}

inline const Segments& semantic_segments(const ModelParams& params, SemanticSource source) {
  return source == SemanticSource::kBackground ? params.a_bar_bg : params.a_bar;
}

inline DecoderTrace sample_semantic_trace(const ModelParams& params, SemanticSource source,
                                          std::optional<Index> fixed_subject, Rng& rng,
                                          DecodeMode mode = DecodeMode::kSample) {
  ChainPolicy policy;
  policy.mode = mode;
  policy.subject = fixed_subject;
  return run_chain(semantic_segments(params, source), params, policy, &rng);
}

// One triple from semantic memory: the perception chain with a-bar substituted
// segment-wise for D*g.
inline Triple sample_semantic(const ModelParams& params, SemanticSource source,
                              std::optional<Index> fixed_subject, Rng& rng) {
  return sample_semantic_trace(params, source, fixed_subject, rng).triple;
}

// --- episodic memory ----------------------------------------------------------

// Stores a_t = (D g_sub, D g_pred, D g_obj) under the scene's time index.
inline std::uint64_t store_episode(const Scene& scene, ModelParams& params) {
  if (params.episodic.contains(scene.t)) {
    fail(ErrorCode::kOverwriteRefused,
         "episode " + std::to_string(scene.t) + " already stored");
  }
  params.episodic.emplace(scene.t, sensory_segments(scene, params));
  return scene.t;
}

// Surprise-gated variant: stores only when -log P of the greedy triple exceeds
// the threshold.
inline std::optional<std::uint64_t> store_episode_if_surprising(const Scene& scene,
                                                                ModelParams& params,
                                                                double nll_threshold) {
  const auto tr = run_chain(sensory_segments(scene, params), params, ChainPolicy::greedy());
  const double nll = -std::log(tr.joint_probability());
  if (!(nll > nll_threshold)) return std::nullopt;
  return store_episode(scene, params);
}

inline const Segments& episode_segments(std::uint64_t t, const ModelParams& params) {
  auto it = params.episodic.find(t);
  if (it == params.episodic.end()) {
    fail(ErrorCode::kMissingEngram, "no episode stored at time " + std::to_string(t));
  }
  return it->second;
}

// Replays the engram for t through the decoder in place of the sensory input.
inline DecodeResult recall_episodic(std::uint64_t t, const ModelParams& params, DecodeMode mode,
                                    Rng& rng, std::size_t n_samples = 1,
                                    std::optional<Index> fixed_subject = std::nullopt) {
  return decode_segments(episode_segments(t, params), params, n_samples, mode, rng, fixed_subject);
}

}  // namespace tbrain
