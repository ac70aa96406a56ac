#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace tbrain;
namespace fs = std::filesystem;

namespace {

ErrorCode config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(WorldConfigJson, RoundTrip) {
  WorldConfig c;
  c.num_concepts = 30;
  c.noise_sigma = 0.125;
  c.seed = 1234567890123ULL;
  EXPECT_EQ(world_config_from_json(to_json(c)), c);
}

TEST(WorldConfigJson, UnknownKeyRejected) {
  EXPECT_EQ(config_error([] { (void)world_config_from_json(Json{{"num_concept", 3}}); }), ErrorCode::kConfig);
}

TEST(WorldConfigJson, WrongTypeRejected) {
  EXPECT_EQ(config_error([] { (void)world_config_from_json(Json{{"num_concepts", -3}}); }), ErrorCode::kConfig);
  EXPECT_EQ(config_error([] { (void)world_config_from_json(Json{{"noise_sigma", "big"}}); }), ErrorCode::kConfig);
  EXPECT_EQ(config_error([] { (void)world_config_from_json(Json::array()); }), ErrorCode::kConfig);
}

TEST(WorldConfigJson, ZeroShotFractionOneRejected) {
  EXPECT_EQ(config_error([] { (void)world_config_from_json(Json{{"zero_shot_fraction", 1.0}}); }), ErrorCode::kConfig);
}

TEST(RunConfigJson, ParsesEveryKey) {
  const Json doc{{"mode", "semantic_replay"}, {"learning_rate", 0.003}, {"optimizer", "adam"},
                 {"epochs", 120},             {"batch_size", 8},        {"freeze", {"A", "D"}},
                 {"semantic_source", "background"}, {"d_q", 16},        {"use_skip", true},
                 {"store_episodes", true}};
  const auto c = run_config_from_json(doc);
  EXPECT_EQ(c.train.mode, TrainMode::kSemanticReplay);
  EXPECT_EQ(c.train.optimizer, OptimizerKind::kAdam);
  EXPECT_EQ(c.train.epochs, 120u);
  EXPECT_TRUE(c.train.freeze.contains(ParamBlock::kA));
  EXPECT_FALSE(c.train.freeze.contains(ParamBlock::kV));
  EXPECT_EQ(c.train.semantic_source, SemanticSource::kBackground);
  EXPECT_EQ(c.d_q, 16u);
  EXPECT_TRUE(c.init.use_skip);
  EXPECT_TRUE(c.store_episodes);
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
}

TEST(RunConfigJson, RejectsBadValues) {
  EXPECT_EQ(config_error([] { (void)run_config_from_json(Json{{"mode", "dreaming"}}); }), ErrorCode::kConfig);
  EXPECT_EQ(config_error([] { (void)run_config_from_json(Json{{"freeze", {"Q"}}}); }), ErrorCode::kConfig);
  EXPECT_EQ(config_error([] { (void)run_config_from_json(Json{{"samples_per_scene", 0}}); }), ErrorCode::kConfig);
  EXPECT_EQ(config_error([] { (void)run_config_from_json(Json{{"lr", 0.1}}); }), ErrorCode::kConfig);
}

TEST(WorldDir, RoundTripIsByteIdentical) {
  WorldConfig cfg;
  cfg.n_train_scenes = 40;
  cfg.n_test_scenes = 10;
  const auto w = generate_world(cfg);
  const fs::path a = fs::temp_directory_path() / "tbrain_world_a";
  const fs::path b = fs::temp_directory_path() / "tbrain_world_b";
  fs::remove_all(a);
  fs::remove_all(b);
  save_world_dir(w, a);
  const auto loaded = load_world_dir(a);
  EXPECT_EQ(loaded.vocab, w.vocab);
  EXPECT_EQ(loaded.tkg, w.tkg);
  EXPECT_EQ(loaded.zero_shot, w.zero_shot);
  EXPECT_EQ(loaded.facts, w.facts);
  ASSERT_EQ(loaded.train.size(), w.train.size());
  for (std::size_t i = 0; i < w.train.size(); ++i) {
    EXPECT_EQ(loaded.train[i].g_sub, w.train[i].g_sub);
    EXPECT_EQ(loaded.train[i].g_obj, w.train[i].g_obj);
  }
  save_world_dir(loaded, b);
  for (const char* name : kWorldFiles) EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  fs::remove_all(a);
  fs::remove_all(b);
}
