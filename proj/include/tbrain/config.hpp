#pragma once

// JSON configuration binding and world-directory persistence. Every config is
// one JSON object; unknown keys are rejected.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbrain/error.hpp"
#include "tbrain/formats.hpp"
#include "tbrain/model.hpp"
#include "tbrain/sensory.hpp"
#include "tbrain/training.hpp"

namespace tbrain {

using Json = nlohmann::ordered_json;

namespace detail {

class JsonReader {
 public:
  JsonReader(const Json& doc, std::string what) : doc_(doc), what_(std::move(what)) {
    if (!doc_.is_object()) fail(ErrorCode::kConfig, what_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer() || it->template get<std::int64_t>() < 0) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
      }
      out = it->template get<T>();
    } catch (const std::exception& e) {
      fail(ErrorCode::kConfig, what_ + ": key '" + key + "': " + e.what());
    }
  }

  // Rejects keys that were never requested.
  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.contains(it.key())) fail(ErrorCode::kConfig, what_ + ": unknown key '" + it.key() + "'");
    }
  }

  [[noreturn]] void bad(const char* key, const std::string& msg) const {
    fail(ErrorCode::kConfig, what_ + ": key '" + key + "': " + msg);
  }

 private:
  const Json& doc_;
  std::string what_;
  std::set<std::string> seen_;
};

}  // namespace detail

// --- world config ------------------------------------------------------------------

inline Json to_json(const WorldConfig& c) {
  return Json{{"num_concepts", c.num_concepts},
              {"num_predicates", c.num_predicates},
              {"feature_dim", c.feature_dim},
              {"num_facts", c.num_facts},
              {"n_train_scenes", c.n_train_scenes},
              {"n_test_scenes", c.n_test_scenes},
              {"labels_min", c.labels_min},
              {"labels_max", c.labels_max},
              {"predicate_group_size", c.predicate_group_size},
              {"zero_shot_fraction", c.zero_shot_fraction},
              {"noise_sigma", c.noise_sigma},
              {"seed", c.seed}};
}

inline WorldConfig world_config_from_json(const Json& doc) {
  WorldConfig c;
  detail::JsonReader r(doc, "world config");
  r.get("num_concepts", c.num_concepts);
  r.get("num_predicates", c.num_predicates);
  r.get("feature_dim", c.feature_dim);
  r.get("num_facts", c.num_facts);
  r.get("n_train_scenes", c.n_train_scenes);
  r.get("n_test_scenes", c.n_test_scenes);
  r.get("labels_min", c.labels_min);
  r.get("labels_max", c.labels_max);
  r.get("predicate_group_size", c.predicate_group_size);
  r.get("zero_shot_fraction", c.zero_shot_fraction);
  r.get("noise_sigma", c.noise_sigma);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

// --- training run config ----------------------------------------------------------

struct RunConfig {
  TrainConfig train;
  std::uint32_t d_q = 32;
  std::uint32_t d_h = 64;
  InitOptions init;
  // Tail fraction of the training scenes held out for the early-stopping cost.
  double heldout_fraction = 0.1;
  // Store an engram for every training scene after training.
  bool store_episodes = false;
};

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }
inline std::string_view to_string(SemanticSource s) {
  return s == SemanticSource::kBackground ? "background" : "perceptual";
}

inline Json to_json(const RunConfig& c) {
  Json freeze = Json::array();
  for (const char* name : {"A", "D", "V", "W", "B", "a_bar", "a_bar_bg"}) {
    if (c.train.freeze.contains(*param_block_from_string(name))) freeze.push_back(name);
  }
  return Json{{"mode", to_string(c.train.mode)},
              {"learning_rate", c.train.learning_rate},
              {"optimizer", to_string(c.train.optimizer)},
              {"momentum", c.train.momentum},
              {"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"samples_per_scene", c.train.samples_per_scene},
              {"patience", c.train.patience},
              {"semantic_source", to_string(c.train.semantic_source)},
              {"replay_per_step", c.train.replay_per_step},
              {"freeze", freeze},
              {"seed", c.train.seed},
              {"d_q", c.d_q},
              {"d_h", c.d_h},
              {"use_skip", c.init.use_skip},
              {"tie_weights", c.init.tie_weights},
              {"init_scale", c.init.scale},
              {"heldout_fraction", c.heldout_fraction},
              {"store_episodes", c.store_episodes}};
}

inline RunConfig run_config_from_json(const Json& doc) {
  RunConfig c;
  detail::JsonReader r(doc, "train config");
  std::string mode(to_string(c.train.mode));
  std::string optimizer(to_string(c.train.optimizer));
  std::string source(to_string(c.train.semantic_source));
  std::vector<std::string> freeze;
  r.get("mode", mode);
  r.get("learning_rate", c.train.learning_rate);
  r.get("optimizer", optimizer);
  r.get("momentum", c.train.momentum);
  r.get("epochs", c.train.epochs);
  r.get("batch_size", c.train.batch_size);
  r.get("samples_per_scene", c.train.samples_per_scene);
  r.get("patience", c.train.patience);
  r.get("semantic_source", source);
  r.get("replay_per_step", c.train.replay_per_step);
  r.get("freeze", freeze);
  r.get("seed", c.train.seed);
  r.get("d_q", c.d_q);
  r.get("d_h", c.d_h);
  r.get("use_skip", c.init.use_skip);
  r.get("tie_weights", c.init.tie_weights);
  r.get("init_scale", c.init.scale);
  r.get("heldout_fraction", c.heldout_fraction);
  r.get("store_episodes", c.store_episodes);
  r.finish();

  if (auto m = train_mode_from_string(mode)) {
    c.train.mode = *m;
  } else {
    r.bad("mode", "unknown mode '" + mode + "'");
  }
  if (optimizer == "sgd") {
    c.train.optimizer = OptimizerKind::kSgd;
  } else if (optimizer == "adam") {
    c.train.optimizer = OptimizerKind::kAdam;
  } else {
    r.bad("optimizer", "expected sgd|adam");
  }
  if (source == "perceptual") {
    c.train.semantic_source = SemanticSource::kPerceptual;
  } else if (source == "background") {
    c.train.semantic_source = SemanticSource::kBackground;
  } else {
    r.bad("semantic_source", "expected perceptual|background");
  }
  for (const auto& name : freeze) {
    auto block = param_block_from_string(name);
    if (!block) r.bad("freeze", "unknown parameter block '" + name + "'");
    c.train.freeze.add(*block);
  }
  if (c.d_q < 1 || c.d_h < 1) r.bad("d_q", "d_q and d_h must be >= 1");
  if (!(c.heldout_fraction >= 0.0 && c.heldout_fraction < 1.0)) {
    r.bad("heldout_fraction", "must lie in [0, 1)");
  }
  c.train.validate();
  return c;
}

// --- world directory ---------------------------------------------------------------
// config.json, vocab.tsv, facts.tsv, held_out.tsv, scenes.tsv, features.tbfeat,
// temporal.tsv, zero_shot.tsv

inline constexpr const char* kWorldFiles[] = {"config.json", "vocab.tsv",       "facts.tsv",
                                              "held_out.tsv", "scenes.tsv",     "features.tbfeat",
                                              "temporal.tsv", "zero_shot.tsv"};

inline void save_world_dir(const World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) { return (dir / name).string(); };
  with_output_file(path("config.json"), [&](std::ostream& o) { o << to_json(world.config).dump(2) << '\n'; });
  with_output_file(path("vocab.tsv"), [&](std::ostream& o) { write_vocabulary(o, world.vocab); });
  with_output_file(path("facts.tsv"), [&](std::ostream& o) {
    for (const auto& t : world.facts) write_triples(o, {t}, world.vocab);
  });
  with_output_file(path("held_out.tsv"),
                   [&](std::ostream& o) { write_triples(o, world.held_out_facts, world.vocab); });
  with_output_file(path("scenes.tsv"), [&](std::ostream& o) {
    write_scene_labels(o, SceneSet{world.train, world.test}, world.vocab);
  });
  with_output_file(path("features.tbfeat"), [&](std::ostream& o) {
    auto records = scene_feature_records(world.train);
    auto test = scene_feature_records(world.test);
    records.insert(records.end(), test.begin(), test.end());
    write_features(o, records, world.config.feature_dim);
  });
  with_output_file(path("temporal.tsv"), [&](std::ostream& o) { write_temporal(o, world.tkg, world.vocab); });
  with_output_file(path("zero_shot.tsv"),
                   [&](std::ostream& o) { write_triples(o, world.zero_shot, world.vocab); });
}

// Loads everything but the prototype bank, which is not persisted.
inline World load_world_dir(const std::filesystem::path& dir) {
  World w;
  auto path = [&](const char* name) { return (dir / name).string(); };
  w.config = with_input_file(path("config.json"), [&](std::istream& in) {
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::kParse, path("config.json") + ": " + e.what());
    }
    return world_config_from_json(doc);
  });
  w.vocab = with_input_file(path("vocab.tsv"), [&](std::istream& in) { return read_vocabulary(in, path("vocab.tsv")); });
  w.facts = with_input_file(path("facts.tsv"),
                            [&](std::istream& in) { return read_triples(in, path("facts.tsv"), w.vocab); });
  for (const auto& t : with_input_file(path("held_out.tsv"), [&](std::istream& in) {
         return read_triples(in, path("held_out.tsv"), w.vocab);
       })) {
    w.held_out_facts.insert(t);
  }
  auto scenes = with_input_file(path("scenes.tsv"),
                                [&](std::istream& in) { return read_scene_labels(in, path("scenes.tsv"), w.vocab); });
  std::size_t dim = 0;
  const auto records = with_input_file(path("features.tbfeat"), [&](std::istream& in) {
    return read_features(in, path("features.tbfeat"), &dim);
  });
  if (dim != w.config.feature_dim) {
    fail(ErrorCode::kParse, path("features.tbfeat") + ":1: field d_g: differs from config feature_dim");
  }
  attach_features(scenes.train, records, path("features.tbfeat"));
  attach_features(scenes.test, records, path("features.tbfeat"));
  w.train = std::move(scenes.train);
  w.test = std::move(scenes.test);
  w.tkg = with_input_file(path("temporal.tsv"),
                          [&](std::istream& in) { return read_temporal(in, path("temporal.tsv"), w.vocab); });
  for (const auto& t : with_input_file(path("zero_shot.tsv"), [&](std::istream& in) {
         return read_triples(in, path("zero_shot.tsv"), w.vocab);
       })) {
    w.zero_shot.insert(t);
  }
  return w;
}

}  // namespace tbrain
