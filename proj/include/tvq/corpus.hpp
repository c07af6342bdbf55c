#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tvq/tensor.hpp"

namespace tvq {

/// Ordered token list; the index of a token is its id.
struct Vocabulary {
  std::vector<std::string> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  std::uint64_t content_hash() const;
};

struct Document {
  std::string id;
  std::vector<int> tokens;  // vocab ids
  std::optional<int> label;

  bool empty() const { return tokens.empty(); }
};

struct Corpus {
  std::vector<Document> documents;
  std::vector<std::string> label_names;

  int size() const { return static_cast<int>(documents.size()); }
};

/// One embedding row per vocabulary word, widened to float64 in memory.
struct EmbeddingTable {
  int dim = 0;
  Tensor rows;  // (N_w x dim)

  int count() const { return rows.ndim() == 2 ? rows.dim(0) : 0; }
};

/// Per-document token counts over the vocabulary.
struct WordHistogram {
  std::vector<int> counts;

  std::int64_t total() const;
};

/// One document after quantization: dense code counts c_d and word counts
/// v_d, ready for topic-model training.
struct EncodedDocument {
  std::string id;
  std::vector<int> code_counts;  // length n_codes, sums to expansion * token count
  std::vector<int> word_counts;  // length n_words
  std::optional<int> label;
  bool skipped = false;          // empty source document, excluded from training
};

struct EncodedCorpus {
  int n_codes = 0;
  int n_words = 0;
  int expansion = 1;
  std::uint64_t vocab_hash = 0;
  std::uint64_t codebook_hash = 0;
  std::vector<std::string> label_names;
  std::vector<EncodedDocument> docs;

  int size() const { return static_cast<int>(docs.size()); }
};

void save_encoded_corpus(const EncodedCorpus& enc, const std::string& path,
                         const std::string& config_echo = "");
EncodedCorpus load_encoded_corpus(const std::string& path, std::string* config_echo = nullptr);

Vocabulary load_vocab(const std::string& path);
void save_vocab(const Vocabulary& vocab, const std::string& path);

Corpus load_corpus(const std::string& path, const Vocabulary& vocab);
void save_corpus(const Corpus& corpus, const std::string& path);

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

WordHistogram word_histogram(const Document& doc, const Vocabulary& vocab);

}  // namespace tvq
