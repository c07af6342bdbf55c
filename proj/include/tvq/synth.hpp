#pragma once

#include <cstdint>
#include <vector>

#include "tvq/corpus.hpp"
#include "tvq/seq_prior.hpp"
#include "tvq/tensor.hpp"
#include "tvq/vq.hpp"

namespace tvq {

/// Planted-topic corpus: topics own disjoint code blocks, each word is built
/// from `codes_per_word` codes of its topic (embedding = weighted mean of
/// those code centers + noise), and documents draw words through a Dirichlet
/// topic mixture. The planted structure is the recovery oracle.
///
/// Two pool mechanisms:
///  - code_overlap > 0: each topic's pool is its own block plus the first
///    `code_overlap` codes of the next block (cyclic); words draw all their
///    codes from that pool.
///  - shared_codes > 0: the first `shared_codes` codes form a topic-neutral
///    pool used by every topic; the rest split into per-topic exclusive
///    blocks. Each word gets exactly one exclusive code and codes_per_word-1
///    shared ones, with the exclusive code weighted slightly below the shared
///    ones in the embedding, so the single nearest center is always topic-
///    neutral and only a multi-code assignment recovers the word's topic.
///    The two mechanisms are mutually exclusive.
struct PlantedTopicConfig {
  int k_topics = 5;
  int n_codes = 50;
  int n_words = 300;
  int n_docs = 2000;
  int doc_len = 40;
  int emb_dim = 0;        // 0 = n_codes; must be >= n_codes (near-orthogonal centers)
  int codes_per_word = 1;
  int code_overlap = 0;   // codes each topic's pool borrows from the next topic (cyclic)
  int shared_codes = 0;   // size of the global topic-neutral code pool
  double doc_concentration = 0.2;
  double noise = 0.02;
  std::uint64_t seed = 0;
};

struct PlantedTopicData {
  Vocabulary vocab;
  Corpus corpus;  // labeled by each document's dominant topic
  EmbeddingTable embeddings;
  Tensor code_centers;                        // (n_codes x emb_dim)
  std::vector<std::vector<int>> topic_codes;  // code ids per topic
  std::vector<std::vector<int>> topic_words;  // word ids per topic
  std::vector<std::vector<int>> word_codes;   // planted codes per word, ascending
  std::vector<int> word_topic;
  std::vector<int> doc_labels;                // dominant topic per document
};

PlantedTopicData make_planted_topics(const PlantedTopicConfig& config);

/// Conceptual vocabulary from the planted truth without any quantization.
ConceptualVocab planted_conceptual_vocab(const PlantedTopicData& data);

/// Conceptual vocabulary by top-K quantization of the word embeddings
/// against a codebook made of the given centers (no encoder involved).
ConceptualVocab quantize_vocab_against(const Tensor& centers, const EmbeddingTable& emb, int k);

/// Two planted regimes, each with its own peaked per-position categorical
/// distribution over codes. Sequences are labeled by regime; the generator's
/// distributions are the evaluation oracle.
struct TwoRegimeConfig {
  int n_codes = 20;
  int length = 16;
  int n_train = 2000;
  int n_held_out = 500;
  double peak = 0.75;
  std::uint64_t seed = 0;
};

struct TwoRegimeData {
  SequenceDataset train;
  SequenceDataset held_out;
  std::vector<std::vector<std::vector<double>>> probs;  // [regime][position][code]
};

TwoRegimeData make_two_regime_sequences(const TwoRegimeConfig& config);

/// Mean over learned topics of the best overlap fraction between the first
/// top_n learned words and any planted topic word set.
double best_match_precision(const std::vector<std::vector<int>>& learned,
                            const std::vector<std::vector<int>>& planted, int top_n);

}  // namespace tvq
