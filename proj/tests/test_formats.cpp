#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace tbrain;

namespace {

const World& small_world() {
  static const World w = [] {
    WorldConfig cfg;
    cfg.n_train_scenes = 30;
    cfg.n_test_scenes = 10;
    return generate_world(cfg);
  }();
  return w;
}

std::string parse_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    return e.what();
  }
  ADD_FAILURE() << "no parse error";
  return {};
}

}  // namespace

TEST(Vocabulary, RoundTrip) {
  std::ostringstream a;
  write_vocabulary(a, small_world().vocab);
  std::istringstream in(a.str());
  const auto v = read_vocabulary(in, "vocab.tsv");
  EXPECT_EQ(v, small_world().vocab);
  std::ostringstream b;
  write_vocabulary(b, v);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Vocabulary, ErrorsNameFileLineField) {
  std::istringstream in("concept\tJack\tentity\nconcept\tMary\tplanet\n");
  const auto msg = parse_error([&] { (void)read_vocabulary(in, "v.tsv"); });
  EXPECT_NE(msg.find("v.tsv:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("field kind"), std::string::npos) << msg;
}

TEST(Triples, UseNamesAndRoundTrip) {
  const auto& w = small_world();
  std::ostringstream a;
  write_triples(a, w.zero_shot, w.vocab);
  const auto first = a.str().substr(0, a.str().find('\n'));
  const auto t = *w.zero_shot.begin();
  EXPECT_EQ(first, w.vocab.concept_name(t.s) + "\t" + w.vocab.predicate_name(t.p) + "\t" + w.vocab.concept_name(t.o));
  std::istringstream in(a.str());
  const auto read = read_triples(in, "z.tsv", w.vocab);
  EXPECT_EQ(std::set<Triple>(read.begin(), read.end()), w.zero_shot);
}

TEST(Triples, UnknownNameIsParseError) {
  std::istringstream in("Jack\tlooksAt\tMary\nJack\tflies\tMary\n");
  const auto msg = parse_error([&] { (void)read_triples(in, "t.tsv", small_world().vocab); });
  EXPECT_NE(msg.find("t.tsv:2: field p"), std::string::npos) << msg;
}

TEST(Temporal, RoundTripIsBitExact) {
  const auto& w = small_world();
  std::ostringstream a;
  write_temporal(a, w.tkg, w.vocab);
  std::istringstream in(a.str());
  const auto tkg = read_temporal(in, "temporal.tsv", w.vocab);
  EXPECT_EQ(tkg, w.tkg);
  std::ostringstream b;
  write_temporal(b, tkg, w.vocab);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Temporal, TrailingEmptyStepsSurvive) {
  const auto& w = small_world();
  TemporalKG tkg(KgShape::of(w.vocab), 9);
  tkg.insert({0, 0, 1}, 2);
  std::ostringstream a;
  write_temporal(a, tkg, w.vocab);
  std::istringstream in(a.str());
  EXPECT_EQ(read_temporal(in, "t.tsv", w.vocab), tkg);
}

TEST(Temporal, TimeOutOfRange) {
  std::istringstream in("# N_T=2\nJack\tlooksAt\tMary\t5\n");
  const auto msg = parse_error([&] { (void)read_temporal(in, "t.tsv", small_world().vocab); });
  EXPECT_NE(msg.find("t.tsv:2: field t"), std::string::npos) << msg;
}

TEST(Features, RoundTripIsBitExact) {
  const auto& w = small_world();
  const auto records = scene_feature_records(w.train);
  std::ostringstream a;
  write_features(a, records, 64);
  EXPECT_EQ(a.str().substr(0, 13), "TB-FEAT 1 64\n");
  std::istringstream in(a.str());
  std::size_t dim = 0;
  const auto read = read_features(in, "f.tbfeat", &dim);
  EXPECT_EQ(dim, 64u);
  EXPECT_EQ(read, records);
  std::ostringstream b;
  write_features(b, read, 64);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Features, ImportAttachesToScenes) {
  std::istringstream in("TB-FEAT 1 2\n4\tsub\t1\t0\n4\tpred\t0.5\t0.5\n4\tobj\t-1\t2e-3\n");
  const auto records = read_features(in, "f.tbfeat");
  std::vector<Scene> scenes(1);
  scenes[0].t = 4;
  attach_features(scenes, records, "f.tbfeat");
  EXPECT_EQ(scenes[0].g_obj[1], 2e-3);
  std::vector<Scene> missing(1);
  missing[0].t = 5;
  parse_error([&] { attach_features(missing, records, "f.tbfeat"); });
}

TEST(Features, MalformedInputNamesField) {
  std::istringstream bad_header("TB-FEAT 2 3\n");
  EXPECT_NE(parse_error([&] { (void)read_features(bad_header, "f"); }).find("f:1: field version"), std::string::npos);
  std::istringstream bad_role("TB-FEAT 1 2\n0\tsub\t1\t2\n0\tverb\t1\t2\n");
  EXPECT_NE(parse_error([&] { (void)read_features(bad_role, "f"); }).find("f:3: field role"), std::string::npos);
  std::istringstream bad_value("TB-FEAT 1 2\n0\tsub\t1\tx\n");
  EXPECT_NE(parse_error([&] { (void)read_features(bad_value, "f"); }).find("f:2: field v2"), std::string::npos);
  std::istringstream short_row("TB-FEAT 1 3\n0\tsub\t1\t2\n");
  EXPECT_NE(parse_error([&] { (void)read_features(short_row, "f"); }).find("f:2: field record"), std::string::npos);
}

TEST(Scenes, RoundTrip) {
  const auto& w = small_world();
  std::ostringstream a;
  write_scene_labels(a, SceneSet{w.train, w.test}, w.vocab);
  std::istringstream in(a.str());
  const auto s = read_scene_labels(in, "scenes.tsv", w.vocab);
  ASSERT_EQ(s.train.size(), w.train.size());
  ASSERT_EQ(s.test.size(), w.test.size());
  for (std::size_t i = 0; i < s.train.size(); ++i) EXPECT_EQ(s.train[i].triples(), w.train[i].triples());
  std::ostringstream b;
  write_scene_labels(b, s, w.vocab);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Scenes, BadSplit) {
  std::istringstream in("0\tvalidation\tJack\tlooksAt\tMary\n");
  EXPECT_NE(parse_error([&] { (void)read_scene_labels(in, "s", small_world().vocab); }).find("s:1: field split"),
            std::string::npos);
}
