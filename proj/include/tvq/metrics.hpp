#pragma once

#include <cstdint>
#include <vector>

#include "tvq/corpus.hpp"
#include "tvq/tensor.hpp"

namespace tvq {

/// Ranked top-word lists, one per topic.
struct TopicSet {
  std::vector<std::vector<int>> topics;

  int k() const { return static_cast<int>(topics.size()); }
};

struct ClusterAssignment {
  std::vector<int> ids;
  int k = 0;
};

struct CoherenceResult {
  std::vector<double> per_topic;
  double mean = 0.0;
  std::vector<int> missing_words;  // top words that never occur in the corpus
};

/// Document-level NPMI coherence over the top_n words of each topic.
/// Occurrence probabilities are clamped to [1e-12, 1 - 1e-12]; pair scores
/// are clamped to [-1, 1].
CoherenceResult npmi_coherence(const TopicSet& topics, const Corpus& corpus, int top_n = 10);

/// Fraction of unique words among the pooled top-25 lists; in [1/K, 1].
double topic_diversity(const TopicSet& topics);

/// TQ = mean coherence x diversity.
double topic_quality(double tc_mean, double td);

/// k-means++ initialized Lloyd iterations (movement < 1e-9 or 300 rounds),
/// best of `restarts` runs by within-cluster squared error. Assignment ties
/// go to the lowest center index. Deterministic under seed.
ClusterAssignment kmeans(const Tensor& points, int k, std::uint64_t seed, int restarts = 10);

/// Mutual information normalized by the arithmetic mean of the two
/// entropies; 1 when both partitions are single-cluster.
double nmi(const ClusterAssignment& pred, const std::vector<int>& labels);

/// Fraction of points whose cluster's majority label matches their own.
double purity(const ClusterAssignment& pred, const std::vector<int>& labels);

}  // namespace tvq
