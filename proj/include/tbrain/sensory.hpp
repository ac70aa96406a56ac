#pragma once

// Synthetic stand-in for the visual backbone. A world is a latent pool of
// relational facts between entities; each scene (one time index) shows one
// fact as three boxes whose features are noisy mixtures of label prototypes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tbrain/error.hpp"
#include "tbrain/kg.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/random.hpp"

namespace tbrain {

inline constexpr const char* kHasProperty = "hasProperty";

using FeatureVector = Vector;

struct Scene {
  std::size_t t = 0;
  std::set<Index> sub_labels;
  std::set<Index> predicates;
  std::set<Index> obj_labels;
  FeatureVector g_sub;
  FeatureVector g_pred;
  FeatureVector g_obj;

  // Cartesian product of the three label sets.
  [[nodiscard]] std::set<Triple> triples() const {
    std::set<Triple> out;
    for (Index s : sub_labels)
      for (Index p : predicates)
        for (Index o : obj_labels) out.insert({s, p, o});
    return out;
  }
};

struct PrototypeBank {
  Matrix concepts;    // d_g x N_E, unit-norm columns
  Matrix predicates;  // d_g x N_P, unit-norm columns
  double noise_sigma = 0.0;

  [[nodiscard]] Eigen::Index dim() const { return concepts.rows(); }
};

enum class BoxRole { kSub, kPred, kObj };

namespace detail {

inline FeatureVector encode_from(const std::set<Index>& labels, const Matrix& prototypes,
                                 double sigma, Rng* rng) {
  if (labels.empty()) fail(ErrorCode::kInvalidIndex, "box has no labels");
  FeatureVector g = FeatureVector::Zero(prototypes.rows());
  for (Index l : labels) {
    if (l >= prototypes.cols()) {
      fail(ErrorCode::kInvalidIndex, "label " + std::to_string(l) + " has no prototype");
    }
    g += prototypes.col(l);
  }
  g /= static_cast<double>(labels.size());
  if (sigma > 0.0 && rng != nullptr) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += sigma * rng->normal();
  }
  const double norm = g.norm();
  if (norm > 0.0) g /= norm;
  return g;
}

}  // namespace detail

// Mean of the label prototypes plus N(0, sigma^2) noise, renormalized to unit norm.
inline FeatureVector encode_box(const std::set<Index>& labels, const PrototypeBank& bank,
                                Rng& rng) {
  return detail::encode_from(labels, bank.concepts, bank.noise_sigma, &rng);
}

inline FeatureVector encode_predicate_box(const std::set<Index>& predicates,
                                          const PrototypeBank& bank, Rng& rng) {
  return detail::encode_from(predicates, bank.predicates, bank.noise_sigma, &rng);
}

// Noise-free predicate-box encoding of a scene's predicate set.
inline FeatureVector predicate_box_features(const Scene& scene, const PrototypeBank& bank) {
  return detail::encode_from(scene.predicates, bank.predicates, 0.0, nullptr);
}

struct WorldConfig {
  std::uint32_t num_concepts = 20;     // N_E
  std::uint32_t num_predicates = 8;    // relational predicates; hasProperty is appended
  std::uint32_t feature_dim = 64;      // d_g
  std::uint32_t num_facts = 40;        // latent relational facts between entities
  std::uint32_t n_train_scenes = 500;
  std::uint32_t n_test_scenes = 100;
  std::uint32_t labels_min = 1;
  std::uint32_t labels_max = 3;
  // Predicates sharing one visual prototype. With 1 the predicate box identifies
  // the predicate; above 1 the variant within a group follows the subject entity,
  // so only the working-memory path can resolve it.
  std::uint32_t predicate_group_size = 1;
  double zero_shot_fraction = 0.2;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;

  void validate() const {
    if (num_concepts < 4) fail(ErrorCode::kConfig, "num_concepts must be >= 4");
    if (num_predicates < 1) fail(ErrorCode::kConfig, "num_predicates must be >= 1");
    if (feature_dim < 1) fail(ErrorCode::kConfig, "feature_dim must be >= 1");
    if (num_facts < 1) fail(ErrorCode::kConfig, "num_facts must be >= 1");
    if (n_train_scenes < 1 || n_test_scenes < 1) {
      fail(ErrorCode::kConfig, "scene counts must be positive");
    }
    if (labels_min < 1 || labels_max < labels_min || labels_max > 3) {
      fail(ErrorCode::kConfig, "labels per box must satisfy 1 <= min <= max <= 3");
    }
    if (predicate_group_size < 1 || predicate_group_size > num_predicates) {
      fail(ErrorCode::kConfig, "predicate_group_size must lie in [1, num_predicates]");
    }
    if (!(zero_shot_fraction >= 0.0 && zero_shot_fraction < 1.0)) {
      fail(ErrorCode::kConfig, "zero_shot_fraction must lie in [0, 1)");
    }
    if (!(noise_sigma >= 0.0)) fail(ErrorCode::kConfig, "noise_sigma must be >= 0");
  }

  bool operator==(const WorldConfig&) const = default;
};

// Concept layout of a generated world: entities first, then classes, then attributes.
struct WorldLayout {
  std::uint32_t num_entities = 0;
  std::uint32_t num_classes = 0;
  std::uint32_t num_attributes = 0;

  static WorldLayout of(const WorldConfig& cfg) {
    WorldLayout l;
    l.num_entities = cfg.num_concepts / 2;
    l.num_classes = std::max<std::uint32_t>(1, cfg.num_concepts / 4);
    l.num_attributes = cfg.num_concepts - l.num_entities - l.num_classes;
    return l;
  }

  [[nodiscard]] Index class_of(Index entity) const { return num_entities + entity % num_classes; }
  [[nodiscard]] std::optional<Index> attribute_of(Index entity) const {
    if (num_attributes == 0) return std::nullopt;
    return num_entities + num_classes + entity % num_attributes;
  }
};

struct World {
  WorldConfig config;
  Vocabulary vocab;
  PrototypeBank bank;
  std::vector<Triple> facts;        // entity-level facts; scenes depict one each
  std::set<Triple> held_out_facts;  // facts never shown in training scenes
  TemporalKG tkg{KgShape{}, 0};
  std::vector<Scene> train;
  std::vector<Scene> test;
  std::set<Triple> zero_shot;

  [[nodiscard]] Index has_property() const { return vocab.predicate_id(kHasProperty); }
};

namespace detail {

inline constexpr std::array<const char*, 12> kEntityNames = {
    "Jack", "Mary", "David", "Anna", "Tom", "Lisa", "Paul", "Emma", "Rex", "Bella", "Max", "Zoe"};
inline constexpr std::array<const char*, 6> kClassNames = {"Person", "Dog", "Cat",
                                                           "Child", "Robot", "Bird"};
inline constexpr std::array<const char*, 6> kAttributeNames = {"Happy", "Blond", "Tall",
                                                               "Young", "Sleepy", "Loud"};
inline constexpr std::array<const char*, 10> kPredicateNames = {
    "looksAt", "holds", "feeds", "follows", "greets", "pushes", "carries", "chases",
    "hugs", "watches"};

template <std::size_t N>
std::string pick_name(const std::array<const char*, N>& names, std::size_t i,
                      const char* fallback) {
  if (i < N) return names[i];
  return std::string(fallback) + "_" + std::to_string(i);
}

inline Matrix random_unit_columns(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    m.col(j).normalize();
  }
  return m;
}

inline std::set<Index> box_labels(Index entity, const WorldLayout& layout,
                                  const WorldConfig& cfg, Rng& rng) {
  std::vector<Index> extras = {layout.class_of(entity)};
  if (auto attr = layout.attribute_of(entity)) extras.push_back(*attr);
  if (extras.size() == 2 && rng.bernoulli(0.5)) std::swap(extras[0], extras[1]);
  const std::uint32_t span = cfg.labels_max - cfg.labels_min + 1;
  const auto count = cfg.labels_min + static_cast<std::uint32_t>(rng.below(span));
  std::set<Index> labels = {entity};
  for (std::size_t i = 0; i + 1 < count && i < extras.size(); ++i) labels.insert(extras[i]);
  return labels;
}

inline Scene make_scene(std::size_t t, const Triple& fact, const World& world, Rng& rng) {
  const auto layout = WorldLayout::of(world.config);
  Scene scene;
  scene.t = t;
  scene.sub_labels = box_labels(fact.s, layout, world.config, rng);
  scene.obj_labels = box_labels(fact.o, layout, world.config, rng);
  scene.predicates = {fact.p};
  scene.g_sub = encode_box(scene.sub_labels, world.bank, rng);
  scene.g_pred = encode_predicate_box(scene.predicates, world.bank, rng);
  scene.g_obj = encode_box(scene.obj_labels, world.bank, rng);
  return scene;
}

}  // namespace detail

inline Vocabulary make_world_vocabulary(const WorldConfig& cfg) {
  const auto layout = WorldLayout::of(cfg);
  Vocabulary vocab;
  for (std::uint32_t i = 0; i < layout.num_entities; ++i)
    vocab.add_concept(detail::pick_name(detail::kEntityNames, i, "entity"), ConceptKind::kEntity);
  for (std::uint32_t i = 0; i < layout.num_classes; ++i)
    vocab.add_concept(detail::pick_name(detail::kClassNames, i, "class"), ConceptKind::kClass);
  for (std::uint32_t i = 0; i < layout.num_attributes; ++i)
    vocab.add_concept(detail::pick_name(detail::kAttributeNames, i, "attribute"),
                      ConceptKind::kAttribute);
  for (std::uint32_t i = 0; i < cfg.num_predicates; ++i)
    vocab.add_predicate(detail::pick_name(detail::kPredicateNames, i, "predicate"));
  vocab.add_predicate(kHasProperty);
  return vocab;
}

// Predicate of a fact between two entities for a chosen visual group.
inline Index relational_predicate(std::uint32_t group, Index subject, const WorldConfig& cfg) {
  const std::uint32_t first = group * cfg.predicate_group_size;
  const std::uint32_t size = std::min(cfg.predicate_group_size, cfg.num_predicates - first);
  return first + subject % size;
}

inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World world;
  world.config = cfg;
  world.vocab = make_world_vocabulary(cfg);
  const auto layout = WorldLayout::of(cfg);
  const std::uint32_t num_groups =
      (cfg.num_predicates + cfg.predicate_group_size - 1) / cfg.predicate_group_size;

  // Prototypes: predicates in one group share the group's vector; hasProperty
  // gets its own.
  Rng proto_rng(derive_seed(cfg.seed, "prototypes"));
  world.bank.concepts = detail::random_unit_columns(cfg.feature_dim, cfg.num_concepts, proto_rng);
  const Matrix group_protos =
      detail::random_unit_columns(cfg.feature_dim, num_groups + 1, proto_rng);
  world.bank.predicates.resize(cfg.feature_dim, cfg.num_predicates + 1);
  for (std::uint32_t p = 0; p < cfg.num_predicates; ++p)
    world.bank.predicates.col(p) = group_protos.col(p / cfg.predicate_group_size);
  world.bank.predicates.col(cfg.num_predicates) = group_protos.col(num_groups);
  world.bank.noise_sigma = cfg.noise_sigma;

  // Latent fact pool.
  const std::uint64_t max_facts =
      static_cast<std::uint64_t>(layout.num_entities) * (layout.num_entities - 1) * num_groups;
  if (cfg.num_facts > max_facts) {
    fail(ErrorCode::kInfeasibleSplit, "num_facts exceeds the number of distinct entity facts");
  }
  Rng fact_rng(derive_seed(cfg.seed, "facts"));
  std::set<Triple> seen;
  while (world.facts.size() < cfg.num_facts) {
    const auto s = static_cast<Index>(fact_rng.below(layout.num_entities));
    const auto o = static_cast<Index>(fact_rng.below(layout.num_entities));
    const auto group = static_cast<std::uint32_t>(fact_rng.below(num_groups));
    if (s == o) continue;
    const Triple fact{s, relational_predicate(group, s, cfg), o};
    if (seen.insert(fact).second) world.facts.push_back(fact);
  }

  const auto held_out = static_cast<std::size_t>(std::llround(cfg.zero_shot_fraction * cfg.num_facts));
  if (cfg.zero_shot_fraction > 0.0 && (held_out == 0 || held_out >= world.facts.size())) {
    fail(ErrorCode::kInfeasibleSplit,
         "zero_shot_fraction " + std::to_string(cfg.zero_shot_fraction) + " leaves no " +
             (held_out == 0 ? "held-out" : "training") + " facts among " +
             std::to_string(cfg.num_facts));
  }
  // Facts are generated in random order, so the tail is a random subset.
  const std::size_t num_seen = world.facts.size() - held_out;
  for (std::size_t i = num_seen; i < world.facts.size(); ++i)
    world.held_out_facts.insert(world.facts[i]);

  const std::size_t total = std::size_t{cfg.n_train_scenes} + cfg.n_test_scenes;
  world.tkg = TemporalKG(KgShape::of(world.vocab), total);
  Rng pick_rng(derive_seed(cfg.seed, "scenes"));
  for (std::size_t t = 0; t < total; ++t) {
    const bool is_train = t < cfg.n_train_scenes;
    const std::size_t pool = is_train ? num_seen : world.facts.size();
    const Triple& fact = world.facts[pick_rng.below(pool)];
    Rng scene_rng(derive_seed(derive_seed(cfg.seed, "scene"), t));
    Scene scene = detail::make_scene(t, fact, world, scene_rng);
    for (const auto& triple : scene.triples()) world.tkg.insert(triple, t);
    (is_train ? world.train : world.test).push_back(std::move(scene));
  }

  std::set<Triple> train_triples;
  for (const auto& scene : world.train)
    for (const auto& triple : scene.triples()) train_triples.insert(triple);
  for (const auto& scene : world.test) {
    if (!world.held_out_facts.contains(
            {*scene.sub_labels.begin(), *scene.predicates.begin(), *scene.obj_labels.begin()})) {
      continue;
    }
    for (const auto& triple : scene.triples())
      if (!train_triples.contains(triple)) world.zero_shot.insert(triple);
  }
  return world;
}

}  // namespace tbrain
