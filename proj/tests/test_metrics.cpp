#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tvq/corpus.hpp"
#include "tvq/errors.hpp"
#include "tvq/metrics.hpp"
#include "tvq/rng.hpp"

using namespace tvq;

namespace {

/// Corpus where each word's document-occurrence set is dictated explicitly.
Corpus corpus_from_occurrences(int n_docs, const std::vector<std::vector<int>>& docs_of_word) {
  Corpus c;
  c.documents.resize(static_cast<std::size_t>(n_docs));
  for (int d = 0; d < n_docs; ++d) c.documents[static_cast<std::size_t>(d)].id = "d" + std::to_string(d);
  for (int w = 0; w < static_cast<int>(docs_of_word.size()); ++w) {
    for (int d : docs_of_word[static_cast<std::size_t>(w)]) {
      c.documents[static_cast<std::size_t>(d)].tokens.push_back(w);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("NPMI hand worksheet over an eight-document corpus") {
  // word 0 in docs {0,1,2,3}; word 1 in {0,1,4,5}   -> independent
  // word 2 in {0,1,2};   word 3 in {0,1,3}          -> positively associated
  // word 4 in {6,7};     word 5 in {6,7}            -> always co-occurring
  Corpus corpus = corpus_from_occurrences(8, {{0, 1, 2, 3}, {0, 1, 4, 5}, {0, 1, 2}, {0, 1, 3}, {6, 7}, {6, 7}});

  TopicSet t;
  t.topics = {{0, 1}, {2, 3}, {4, 5}};
  CoherenceResult r = npmi_coherence(t, corpus, 2);
  REQUIRE(r.per_topic.size() == 3);

  // p=1/2 each, joint 1/4: ln(1)/ln(4) = 0.
  CHECK(r.per_topic[0] == doctest::Approx(0.0).epsilon(1e-12));
  // p=3/8 each, joint 2/8: ln((1/4)/(9/64)) / -ln(1/4) = ln(16/9)/ln(4).
  CHECK(r.per_topic[1] == doctest::Approx(std::log(16.0 / 9.0) / std::log(4.0)).epsilon(1e-12));
  // Identical occurrence sets: exactly 1.
  CHECK(r.per_topic[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mean == doctest::Approx((r.per_topic[0] + r.per_topic[1] + r.per_topic[2]) / 3.0).epsilon(1e-12));
  CHECK(r.missing_words.empty());
}

TEST_CASE("NPMI flags words absent from the corpus and clamps their pairs") {
  Corpus corpus = corpus_from_occurrences(4, {{0, 1}, {0, 1}, {}});
  TopicSet t;
  t.topics = {{0, 2}};  // word 2 never occurs
  CoherenceResult r = npmi_coherence(t, corpus, 2);
  CHECK(r.missing_words == std::vector<int>{2});
  CHECK(r.per_topic[0] >= -1.0);
  CHECK(r.per_topic[0] <= 1.0);

  CHECK_THROWS_AS(npmi_coherence(t, corpus, 1), ParameterError);
  CHECK_THROWS_AS(npmi_coherence(t, corpus, 3), ParameterError);
  CHECK_THROWS_AS(npmi_coherence(TopicSet{}, corpus, 2), ParameterError);
}

TEST_CASE("never-co-occurring words score the floored joint probability") {
  Corpus corpus = corpus_from_occurrences(4, {{0, 1}, {2, 3}});
  TopicSet t;
  t.topics = {{0, 1}};
  CoherenceResult r = npmi_coherence(t, corpus, 2);
  // p_i = p_j = 1/2 and the joint probability is floored at 1e-12, so the
  // score is log(1e-12 / 0.25) / -log(1e-12): close to but not exactly -1.
  double expected = std::log(1e-12 / 0.25) / -std::log(1e-12);
  CHECK(r.per_topic[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.per_topic[0] > -1.0);
}

TEST_CASE("topic diversity counts unique top-25 words") {
  TopicSet t;
  std::vector<int> base;
  for (int i = 0; i < 25; ++i) base.push_back(i);

  // Four identical topics: exactly 1/K.
  t.topics = {base, base, base, base};
  CHECK(topic_diversity(t) == doctest::Approx(0.25).epsilon(1e-15));

  // Fully disjoint topics: exactly 1.
  TopicSet disjoint;
  for (int k = 0; k < 4; ++k) {
    std::vector<int> words;
    for (int i = 0; i < 25; ++i) words.push_back(100 * k + i);
    disjoint.topics.push_back(words);
  }
  CHECK(topic_diversity(disjoint) == doctest::Approx(1.0).epsilon(1e-15));

  // Short lists are rejected.
  TopicSet shorty;
  shorty.topics = {{1, 2, 3}};
  CHECK_THROWS_AS(topic_diversity(shorty), ParameterError);

  CHECK(topic_quality(0.4, 0.5) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(topic_quality(std::nan(""), 0.5), ParameterError);
}

TEST_CASE("NMI and purity six-point hand worksheet") {
  ClusterAssignment pred;
  pred.ids = {0, 0, 1, 1, 2, 2};
  pred.k = 3;
  std::vector<int> labels = {0, 0, 0, 1, 1, 1};

  // Joint: cluster0 all label0, cluster2 all label1, cluster1 split.
  // MI = (2/3) ln 2; H(pred) = ln 3; H(labels) = ln 2.
  double expect_nmi = (2.0 / 3.0) * std::log(2.0) / (0.5 * (std::log(3.0) + std::log(2.0)));
  CHECK(nmi(pred, labels) == doctest::Approx(expect_nmi).epsilon(1e-12));
  CHECK(purity(pred, labels) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));

  // Relabeling either side never changes the scores.
  ClusterAssignment renamed;
  for (int id : pred.ids) renamed.ids.push_back((id + 1) % 3);
  renamed.k = 3;
  CHECK(nmi(renamed, labels) == doctest::Approx(expect_nmi).epsilon(1e-12));
  CHECK(purity(renamed, labels) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  std::vector<int> relabeled;
  for (int l : labels) relabeled.push_back(1 - l);
  CHECK(nmi(pred, relabeled) == doctest::Approx(expect_nmi).epsilon(1e-12));

  // Perfect agreement and the degenerate single-cluster case.
  ClusterAssignment perfect;
  perfect.ids = labels;
  perfect.k = 2;
  CHECK(nmi(perfect, labels) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(purity(perfect, labels) == 1.0);

  ClusterAssignment lump;
  lump.ids = {0, 0, 0, 0, 0, 0};
  lump.k = 1;
  CHECK(nmi(lump, labels) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nmi(lump, std::vector<int>(6, 0)) == 1.0);

  ClusterAssignment short_pred;
  short_pred.ids = {0, 1};
  CHECK_THROWS_AS(nmi(short_pred, labels), DimensionError);
  CHECK_THROWS_AS(purity(short_pred, labels), DimensionError);
}

TEST_CASE("kmeans recovers three well-separated blobs for every seed") {
  Rng rng(404);
  const int per = 30;
  Tensor pts({3 * per, 2});
  std::vector<int> labels;
  double cx[3] = {0.0, 10.0, 0.0};
  double cy[3] = {0.0, 0.0, 10.0};
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < per; ++i) {
      int row = b * per + i;
      pts.at(row, 0) = cx[b] + 0.5 * rng.normal();
      pts.at(row, 1) = cy[b] + 0.5 * rng.normal();
      labels.push_back(b);
    }
  }

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ClusterAssignment a = kmeans(pts, 3, seed);
    CHECK(nmi(a, labels) > 0.999999);
    CHECK(purity(a, labels) == 1.0);
  }

  // Determinism under an identical seed.
  ClusterAssignment x = kmeans(pts, 3, 5);
  ClusterAssignment y = kmeans(pts, 3, 5);
  CHECK(x.ids == y.ids);

  CHECK_THROWS_AS(kmeans(pts, 0, 1), ParameterError);
  CHECK_THROWS_AS(kmeans(pts, 3 * per + 1, 1), ParameterError);
  CHECK_THROWS_AS(kmeans(pts, 3, 1, 0), ParameterError);
}

TEST_CASE("kmeans handles k equal to one and to the point count") {
  Tensor pts({4, 1});
  pts.at(0) = 0.0;
  pts.at(1) = 1.0;
  pts.at(2) = 10.0;
  pts.at(3) = 11.0;

  ClusterAssignment one = kmeans(pts, 1, 0);
  for (int id : one.ids) CHECK(id == 0);

  ClusterAssignment all = kmeans(pts, 4, 0);
  std::vector<int> sorted = all.ids;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3});
}
