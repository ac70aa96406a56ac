#pragma once

// Exact tabular serialization of a KG into a triple stream: a categorical joint
// over true triples, its S -> O -> P chain-rule factorization and ancestral
// sampling from the factors.

#include <algorithm>
#include <iterator>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tbrain/error.hpp"
#include "tbrain/kg.hpp"
#include "tbrain/random.hpp"

namespace tbrain {

struct JointTripleDist {
  // Sorted by triple, strictly positive, sums to 1.
  std::vector<std::pair<Triple, double>> support;
  double normalizer = 1.0;

  [[nodiscard]] double prob(const Triple& t) const {
    auto it = std::lower_bound(support.begin(), support.end(), t,
                               [](const auto& entry, const Triple& key) { return entry.first < key; });
    return (it != support.end() && it->first == t) ? it->second : 0.0;
  }
};

// A categorical table over indices with its probabilities in canonical index order.
using CategoricalTable = std::map<Index, double>;

struct ChainFactors {
  CategoricalTable p_s;
  std::map<Index, CategoricalTable> p_o_given_s;
  std::map<std::pair<Index, Index>, CategoricalTable> p_p_given_so;

  [[nodiscard]] double joint(const Triple& t) const {
    auto s_it = p_s.find(t.s);
    if (s_it == p_s.end()) return 0.0;
    const auto& po = p_o_given_s.at(t.s);
    auto o_it = po.find(t.o);
    if (o_it == po.end()) return 0.0;
    const auto& pp = p_p_given_so.at({t.s, t.o});
    auto p_it = pp.find(t.p);
    if (p_it == pp.end()) return 0.0;
    return s_it->second * o_it->second * p_it->second;
  }
};

namespace detail {

inline void renormalize(CategoricalTable& table) {
  double total = 0.0;
  for (const auto& [_, w] : table) total += w;
  for (auto& [_, w] : table) w /= total;
}

inline JointTripleDist normalize_weights(const std::map<Triple, double>& weights) {
  JointTripleDist dist;
  double total = 0.0;
  for (const auto& [_, w] : weights) total += w;
  if (weights.empty() || !(total > 0.0)) {
    fail(ErrorCode::kEmptySupport, "joint distribution has empty support");
  }
  dist.normalizer = total;
  dist.support.reserve(weights.size());
  for (const auto& [t, w] : weights) {
    if (w > 0.0) dist.support.emplace_back(t, w / total);
  }
  return dist;
}

inline Index draw(const CategoricalTable& table, Rng& rng) {
  std::vector<double> weights;
  weights.reserve(table.size());
  for (const auto& [_, w] : table) weights.push_back(w);
  const std::size_t k = rng.categorical(weights);
  return std::next(table.begin(), static_cast<std::ptrdiff_t>(k))->first;
}

}  // namespace detail

// Uniform over the member triples.
inline JointTripleDist joint_from_static(const StaticKG& kg) {
  std::map<Triple, double> weights;
  for (const auto& t : kg.triples()) weights.emplace(t, 1.0);
  return detail::normalize_weights(weights);
}

// prob(s,p,o) = gamma_{s,p,o} / sum gamma.
inline JointTripleDist joint_from_prob(const ProbabilisticKG& pkg) {
  return detail::normalize_weights(pkg.entries());
}

inline ChainFactors chain_decompose(const JointTripleDist& joint) {
  ChainFactors f;
  for (const auto& [t, prob] : joint.support) {
    f.p_s[t.s] += prob;
    f.p_o_given_s[t.s][t.o] += prob;
    f.p_p_given_so[{t.s, t.o}][t.p] += prob;
  }
  detail::renormalize(f.p_s);
  for (auto& [_, table] : f.p_o_given_s) detail::renormalize(table);
  for (auto& [_, table] : f.p_p_given_so) detail::renormalize(table);
  return f;
}

// s* ~ P(S) (or the fixed subject), o* ~ P(O|s*), p* ~ P(P|s*,o*).
inline Triple forward_sample(const ChainFactors& f, Rng& rng,
                             std::optional<Index> fixed_subject = std::nullopt) {
  Index s = 0;
  if (fixed_subject) {
    auto it = f.p_s.find(*fixed_subject);
    if (it == f.p_s.end() || !(it->second > 0.0)) {
      fail(ErrorCode::kUnsupportedCondition,
           "fixed subject " + std::to_string(*fixed_subject) + " has zero marginal");
    }
    s = *fixed_subject;
  } else {
    s = detail::draw(f.p_s, rng);
  }
  const Index o = detail::draw(f.p_o_given_s.at(s), rng);
  const Index p = detail::draw(f.p_p_given_so.at({s, o}), rng);
  return {s, p, o};
}

}  // namespace tbrain
