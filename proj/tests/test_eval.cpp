#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

using namespace tbrain;

namespace {

RankedPredictions ranked(std::vector<ScoredTriple> v) {
  RankedPredictions r{std::move(v)};
  r.finalize();
  return r;
}

}  // namespace

TEST(RecallAtK, PartialHit) {
  const Triple t1{0, 0, 1}, t2{1, 0, 0}, other{2, 0, 2};
  const std::vector<RankedPredictions> preds{ranked({{t1, 0.9}, {other, 0.5}, {t2, 0.1}})};
  const std::vector<std::set<Triple>> truth{{t1, t2}};
  EXPECT_EQ(recall_at_k(preds, truth, 2), 0.5);
  EXPECT_EQ(recall_at_k(preds, truth, 3), 1.0);
}

TEST(RecallAtK, FullCoverageIsOne) {
  const std::vector<RankedPredictions> preds{ranked({{{0, 0, 0}, 0.4}, {{1, 0, 1}, 0.6}}), ranked({{{2, 1, 2}, 1.0}})};
  const std::vector<std::set<Triple>> truth{{{0, 0, 0}, {1, 0, 1}}, {{2, 1, 2}}};
  EXPECT_EQ(recall_at_k(preds, truth, 2), 1.0);
}

TEST(RecallAtK, EmptyTruthExcludedAndAllEmptyNotApplicable) {
  const std::vector<RankedPredictions> preds{ranked({{{0, 0, 0}, 1.0}}), ranked({})};
  const std::vector<std::set<Triple>> truth{{{0, 0, 0}}, {}};
  EXPECT_EQ(recall_at_k(preds, truth, 1), 1.0);
  const std::vector<std::set<Triple>> none{{}, {}};
  try {
    (void)recall_at_k(preds, none, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotApplicable);
  }
}

TEST(RecallAtK, TiesBrokenCanonicallyAndDeduplicated) {
  const auto r = ranked({{{2, 0, 0}, 0.5}, {{1, 0, 0}, 0.5}, {{2, 0, 0}, 0.1}});
  ASSERT_EQ(r.ranked.size(), 2u);
  EXPECT_EQ(r.ranked[0].first, (Triple{1, 0, 0}));
  EXPECT_EQ(r.ranked[1].second, 0.5);
}

TEST(RecallAtK, MonotoneInKAndRankBased) {
  Rng rng(3);
  std::vector<RankedPredictions> preds, rescaled;
  std::vector<std::set<Triple>> truth;
  for (int scene = 0; scene < 20; ++scene) {
    std::vector<ScoredTriple> v, w;
    for (Index s = 0; s < 4; ++s)
      for (Index o = 0; o < 4; ++o) {
        const double score = rng.uniform();
        v.push_back({{s, 0, o}, score});
        w.push_back({{s, 0, o}, std::exp(3.0 * score) - 7.0});
      }
    preds.push_back(ranked(v));
    rescaled.push_back(ranked(w));
    truth.push_back({{static_cast<Index>(rng.below(4)), 0, static_cast<Index>(rng.below(4))},
                     {static_cast<Index>(rng.below(4)), 0, static_cast<Index>(rng.below(4))}});
  }
  double prev = 0.0;
  for (std::size_t k = 1; k <= 16; ++k) {
    const double r = recall_at_k(preds, truth, k);
    EXPECT_GE(r, prev);
    EXPECT_EQ(r, recall_at_k(rescaled, truth, k));
    prev = r;
  }
  EXPECT_EQ(recall_at_k(preds, truth, 1000), 1.0);
}

TEST(RankTriples, ScoresAreChainProbabilities) {
  const auto p = support::small_params(2);
  Rng rng(1);
  const auto scene = support::random_scene(rng, 5, 6, 4);
  const auto x = sensory_segments(scene, p);
  const auto r = rank_triples(x, p, 6);
  EXPECT_EQ(r.ranked.size(), 6u * 6u * 4u);
  double total = 0.0;
  for (const auto& [t, score] : r.ranked) {
    EXPECT_NEAR(score, run_chain(x, p, ChainPolicy::forced(t)).joint_probability(), 1e-15);
    total += score;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_TRUE(std::is_sorted(r.ranked.begin(), r.ranked.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; }));
}

TEST(Tasks, ExhaustiveKIsOne) {
  const auto& t = support::trained_toy();
  const auto n_p = static_cast<std::size_t>(t.untrained.num_predicates());
  const auto n_e = static_cast<std::size_t>(t.untrained.num_concepts());
  const std::span<const Scene> test(t.world.test);
  EXPECT_EQ(predicate_detection(t.untrained, test.first(20), n_p), 1.0);
  EXPECT_EQ(evaluate_task(t.untrained, test.first(5), Task::kPhrase, n_e * n_e * n_p, {n_e}), 1.0);
}

TEST(Tasks, TrainedBeatsBaselines) {
  const auto& t = support::trained_toy();
  const std::span<const Scene> test(t.world.test);
  const double pred = predicate_detection(t.params, test, 1);
  EXPECT_GE(pred, 0.9);
  const double phrase = phrase_detection(t.params, test, 1);
  const double random = random_phrase_recall(test, t.params.num_concepts(), t.params.num_predicates(), 1, 7);
  EXPECT_LT(random, 0.01);
  EXPECT_LT(random, phrase);
  EXPECT_GT(phrase_detection(t.params, test, 10), phrase_detection(t.untrained, test, 10));
}

TEST(Tasks, UntrainedPredicateNearUniform) {
  const auto& t = support::trained_toy();
  const std::span<const Scene> test(t.world.test);
  double sum = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) sum += predicate_detection(support::fresh_model(t.world, 100 + s), test, 1);
  EXPECT_NEAR(sum / seeds, 1.0 / static_cast<double>(t.params.num_predicates()), 0.05);
}

TEST(ZeroShot, EmptySetNotApplicable) {
  const auto& t = support::trained_toy();
  try {
    (void)zero_shot_eval(t.params, t.world.test, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotApplicable);
  }
}

TEST(ZeroShot, TrainedBeatsUntrained) {
  const auto& t = support::trained_toy();
  EXPECT_GT(zero_shot_eval(t.params, t.world.test, t.world.zero_shot, 1),
            zero_shot_eval(t.untrained, t.world.test, t.world.zero_shot, 1));
}

TEST(ZeroShot, CompositionalTripleScoresAboveMedianRandomTriple) {
  const auto& t = support::trained_toy();
  std::set<Index> subjects, predicates, objects;
  for (const auto& scene : t.world.train)
    for (const auto& tr : scene.triples()) {
      subjects.insert(tr.s);
      predicates.insert(tr.p);
      objects.insert(tr.o);
    }
  std::size_t probed = 0;
  for (const auto& scene : t.world.test) {
    for (const auto& z : scene.triples()) {
      if (!t.world.zero_shot.contains(z)) continue;
      if (!subjects.contains(z.s) || !predicates.contains(z.p) || !objects.contains(z.o)) continue;
      const auto x = sensory_segments(scene, t.params);
      const double score = run_chain(x, t.params, ChainPolicy::forced(z)).joint_probability();
      Rng rng(derive_seed(5, scene.t));
      std::vector<double> random_scores;
      for (int i = 0; i < 201; ++i) {
        const Triple r{static_cast<Index>(rng.below(t.params.num_concepts())),
                       static_cast<Index>(rng.below(t.params.num_predicates())),
                       static_cast<Index>(rng.below(t.params.num_concepts()))};
        random_scores.push_back(run_chain(x, t.params, ChainPolicy::forced(r)).joint_probability());
      }
      std::nth_element(random_scores.begin(), random_scores.begin() + 100, random_scores.end());
      EXPECT_GT(score, random_scores[100]);
      ++probed;
    }
    if (probed >= 10) break;
  }
  EXPECT_GT(probed, 0u);
}

TEST(Dir, SubjectRecallUnchanged) {
  const auto& t = support::trained_toy();
  for (std::size_t k : {1u, 3u})
    EXPECT_EQ(ablation_dir(t.params, t.world.test, Task::kSubject, k), subject_detection(t.params, t.world.test, k));
}

TEST(Dir, EqualOnControlWorld) {
  // Predicates are functions of the predicate box alone in the default world.
  const auto& t = support::trained_toy();
  EXPECT_EQ(ablation_dir(t.params, t.world.test, Task::kPredicate, 1), predicate_detection(t.params, t.world.test, 1));
}

TEST(SemanticRecall, UsesOneGlobalRanking) {
  const auto& t = support::trained_toy();
  auto p = t.params;
  p.a_bar.sub = p.A.col(0) * 1e3;
  const double r = semantic_recall(p, t.world.test, 10);
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 1.0);
}
