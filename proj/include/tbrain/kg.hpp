#pragma once

// Symbol tables and the three knowledge-graph variants (static, temporal,
// probabilistic), all stored sparsely.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "tbrain/error.hpp"
#include "tbrain/random.hpp"

namespace tbrain {

using Index = std::uint32_t;

enum class ConceptKind { kEntity, kClass, kAttribute, kLocation };

inline std::string_view to_string(ConceptKind kind) {
  switch (kind) {
    case ConceptKind::kEntity: return "entity";
    case ConceptKind::kClass: return "class";
    case ConceptKind::kAttribute: return "attribute";
    case ConceptKind::kLocation: return "location";
  }
  return "entity";
}

inline ConceptKind concept_kind_from_string(std::string_view text) {
  if (text == "entity") return ConceptKind::kEntity;
  if (text == "class") return ConceptKind::kClass;
  if (text == "attribute") return ConceptKind::kAttribute;
  if (text == "location") return ConceptKind::kLocation;
  fail(ErrorCode::kParse, "unknown concept kind '" + std::string(text) + "'");
}

struct Triple {
  Index s = 0;
  Index p = 0;
  Index o = 0;

  // Canonical order is (s, p, o) lexicographic.
  auto operator<=>(const Triple&) const = default;
};

// Concepts and predicates live in two disjoint 0-based index spaces.
class Vocabulary {
 public:
  Vocabulary() = default;

  Index add_concept(const std::string& name, ConceptKind kind = ConceptKind::kEntity) {
    if (concept_index_.contains(name)) {
      fail(ErrorCode::kConfig, "duplicate concept name '" + name + "'");
    }
    const auto id = static_cast<Index>(concepts_.size());
    concepts_.push_back(name);
    kinds_.push_back(kind);
    concept_index_.emplace(name, id);
    return id;
  }

  Index add_predicate(const std::string& name) {
    if (predicate_index_.contains(name)) {
      fail(ErrorCode::kConfig, "duplicate predicate name '" + name + "'");
    }
    const auto id = static_cast<Index>(predicates_.size());
    predicates_.push_back(name);
    predicate_index_.emplace(name, id);
    return id;
  }

  [[nodiscard]] std::size_t num_concepts() const { return concepts_.size(); }
  [[nodiscard]] std::size_t num_predicates() const { return predicates_.size(); }

  [[nodiscard]] const std::string& concept_name(Index i) const {
    check_concept(i);
    return concepts_[i];
  }
  [[nodiscard]] const std::string& predicate_name(Index i) const {
    check_predicate(i);
    return predicates_[i];
  }
  [[nodiscard]] ConceptKind concept_kind(Index i) const {
    check_concept(i);
    return kinds_[i];
  }

  [[nodiscard]] std::optional<Index> find_concept(const std::string& name) const {
    auto it = concept_index_.find(name);
    if (it == concept_index_.end()) return std::nullopt;
    return it->second;
  }
  [[nodiscard]] std::optional<Index> find_predicate(const std::string& name) const {
    auto it = predicate_index_.find(name);
    if (it == predicate_index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] Index concept_id(const std::string& name) const {
    if (auto id = find_concept(name)) return *id;
    fail(ErrorCode::kInvalidIndex, "unknown concept '" + name + "'");
  }
  [[nodiscard]] Index predicate_id(const std::string& name) const {
    if (auto id = find_predicate(name)) return *id;
    fail(ErrorCode::kInvalidIndex, "unknown predicate '" + name + "'");
  }

  void check_concept(Index i) const {
    if (i >= concepts_.size()) {
      fail(ErrorCode::kInvalidIndex, "concept index " + std::to_string(i) + " out of range");
    }
  }
  void check_predicate(Index i) const {
    if (i >= predicates_.size()) {
      fail(ErrorCode::kInvalidIndex, "predicate index " + std::to_string(i) + " out of range");
    }
  }
  void check(const Triple& t) const {
    check_concept(t.s);
    check_predicate(t.p);
    check_concept(t.o);
  }

  bool operator==(const Vocabulary& other) const {
    return concepts_ == other.concepts_ && predicates_ == other.predicates_ &&
           kinds_ == other.kinds_;
  }

 private:
  std::vector<std::string> concepts_;
  std::vector<std::string> predicates_;
  std::vector<ConceptKind> kinds_;
  std::unordered_map<std::string, Index> concept_index_;
  std::unordered_map<std::string, Index> predicate_index_;
};

// Range bounds shared by the KG containers, so that they can validate indices
// without holding a Vocabulary.
struct KgShape {
  std::size_t num_concepts = 0;
  std::size_t num_predicates = 0;

  static KgShape of(const Vocabulary& vocab) {
    return {vocab.num_concepts(), vocab.num_predicates()};
  }

  void check(const Triple& t) const {
    if (t.s >= num_concepts || t.o >= num_concepts || t.p >= num_predicates) {
      fail(ErrorCode::kInvalidIndex,
           "triple (" + std::to_string(t.s) + "," + std::to_string(t.p) + "," +
               std::to_string(t.o) + ") out of vocabulary range");
    }
  }

  bool operator==(const KgShape&) const = default;
};

class StaticKG {
 public:
  explicit StaticKG(KgShape shape) : shape_(shape) {}

  void insert(const Triple& t) {
    shape_.check(t);
    triples_.insert(t);
  }

  // y_{s,p,o}: 1 iff the triple is a member.
  [[nodiscard]] int contains(const Triple& t) const {
    shape_.check(t);
    return triples_.contains(t) ? 1 : 0;
  }

  [[nodiscard]] const std::set<Triple>& triples() const { return triples_; }
  [[nodiscard]] std::size_t size() const { return triples_.size(); }
  [[nodiscard]] bool empty() const { return triples_.empty(); }
  [[nodiscard]] const KgShape& shape() const { return shape_; }

 private:
  KgShape shape_;
  std::set<Triple> triples_;
};

inline int static_contains(const StaticKG& kg, const Triple& t) { return kg.contains(t); }

class TemporalKG {
 public:
  TemporalKG(KgShape shape, std::size_t num_times) : shape_(shape), by_time_(num_times) {}

  void insert(const Triple& t, std::size_t time) {
    shape_.check(t);
    if (time >= by_time_.size()) {
      fail(ErrorCode::kInvalidIndex, "time index " + std::to_string(time) + " >= N_T " +
                                         std::to_string(by_time_.size()));
    }
    by_time_[time].insert(t);
  }

  [[nodiscard]] int contains(const Triple& t, std::size_t time) const {
    shape_.check(t);
    if (time >= by_time_.size()) return 0;
    return by_time_[time].contains(t) ? 1 : 0;
  }

  [[nodiscard]] std::size_t num_times() const { return by_time_.size(); }
  [[nodiscard]] const std::set<Triple>& at(std::size_t time) const { return by_time_.at(time); }
  [[nodiscard]] const KgShape& shape() const { return shape_; }

  bool operator==(const TemporalKG&) const = default;

 private:
  KgShape shape_;
  std::vector<std::set<Triple>> by_time_;
};

class ProbabilisticKG {
 public:
  explicit ProbabilisticKG(KgShape shape) : shape_(shape) {}

  // Stores gamma for t; a zero weight erases the entry (absent means exactly 0).
  void set(const Triple& t, double gamma) {
    shape_.check(t);
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
      fail(ErrorCode::kConfig, "gamma must lie in [0,1]");
    }
    if (gamma == 0.0) {
      gamma_.erase(t);
    } else {
      gamma_[t] = gamma;
    }
  }

  [[nodiscard]] double gamma(const Triple& t) const {
    shape_.check(t);
    auto it = gamma_.find(t);
    return it == gamma_.end() ? 0.0 : it->second;
  }

  [[nodiscard]] const std::map<Triple, double>& entries() const { return gamma_; }
  [[nodiscard]] std::size_t size() const { return gamma_.size(); }
  [[nodiscard]] const KgShape& shape() const { return shape_; }

 private:
  KgShape shape_;
  std::map<Triple, double> gamma_;
};

// gamma(s,p,o) = (1/N_T) sum_t y_{s,p,o,t}
inline ProbabilisticKG estimate_gamma(const TemporalKG& tkg) {
  if (tkg.num_times() == 0) fail(ErrorCode::kEmptyHistory, "temporal KG has no time steps");
  std::map<Triple, std::size_t> counts;
  for (std::size_t t = 0; t < tkg.num_times(); ++t) {
    for (const auto& triple : tkg.at(t)) ++counts[triple];
  }
  ProbabilisticKG out(tkg.shape());
  const auto n = static_cast<double>(tkg.num_times());
  for (const auto& [triple, count] : counts) out.set(triple, static_cast<double>(count) / n);
  return out;
}

// Independent Bernoulli(gamma) draw per stored entry and time step.
inline TemporalKG sample_temporal(const ProbabilisticKG& pkg, std::size_t num_times, Rng& rng) {
  if (num_times == 0) fail(ErrorCode::kEmptyHistory, "n_t must be at least 1");
  TemporalKG out(pkg.shape(), num_times);
  for (std::size_t t = 0; t < num_times; ++t) {
    for (const auto& [triple, gamma] : pkg.entries()) {
      if (rng.bernoulli(gamma)) out.insert(triple, t);
    }
  }
  return out;
}

}  // namespace tbrain
