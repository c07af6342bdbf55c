#include "tvq/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "tvq/errors.hpp"
#include "tvq/rng.hpp"

namespace tvq {

PlantedTopicData make_planted_topics(const PlantedTopicConfig& config) {
  if (config.k_topics < 2) throw ParameterError("make_planted_topics: k_topics must be at least 2");
  if (config.n_words < config.k_topics || config.n_words % config.k_topics != 0) {
    throw ParameterError("make_planted_topics: n_words must be a positive multiple of k_topics");
  }
  if (config.shared_codes < 0) {
    throw ParameterError("make_planted_topics: shared_codes must be non-negative");
  }
  const bool shared_mode = config.shared_codes > 0;
  int cpt = 0;        // exclusive codes per topic
  int pool_size = 0;  // overlap mode: size of each topic's cyclic pool
  if (shared_mode) {
    if (config.code_overlap != 0) {
      throw ParameterError("make_planted_topics: shared_codes and code_overlap are mutually exclusive");
    }
    int exclusive = config.n_codes - config.shared_codes;
    if (exclusive < config.k_topics || exclusive % config.k_topics != 0) {
      throw ParameterError(
          "make_planted_topics: codes left after shared_codes must be a positive multiple of k_topics");
    }
    cpt = exclusive / config.k_topics;
    if (config.codes_per_word < 2 || config.codes_per_word - 1 > config.shared_codes) {
      throw ParameterError(
          "make_planted_topics: shared mode needs 2 <= codes_per_word <= shared_codes + 1");
    }
  } else {
    if (config.n_codes < config.k_topics || config.n_codes % config.k_topics != 0) {
      throw ParameterError("make_planted_topics: n_codes must be a positive multiple of k_topics");
    }
    cpt = config.n_codes / config.k_topics;
    if (config.code_overlap < 0 || config.code_overlap > config.n_codes - cpt) {
      throw ParameterError("make_planted_topics: code_overlap out of range");
    }
    pool_size = cpt + config.code_overlap;
    if (config.codes_per_word < 1 || config.codes_per_word > pool_size) {
      throw ParameterError("make_planted_topics: codes_per_word must fit in a topic's code pool");
    }
  }
  int emb_dim = config.emb_dim == 0 ? config.n_codes : config.emb_dim;
  if (emb_dim < config.n_codes) {
    throw ParameterError("make_planted_topics: emb_dim must be 0 (auto) or at least n_codes");
  }
  if (config.n_docs < 1 || config.doc_len < 1) {
    throw ParameterError("make_planted_topics: need at least one document and one token");
  }
  if (!(config.doc_concentration > 0.0)) {
    throw ParameterError("make_planted_topics: doc_concentration must be positive");
  }
  if (config.noise < 0.0) throw ParameterError("make_planted_topics: noise must be non-negative");

  Rng rng(config.seed);
  PlantedTopicData data;

  // Near-orthogonal code centers (scaled unit axes plus a small jitter), so
  // the mean of any small code subset is strictly closer to the subset's own
  // codes than to every other code.
  data.code_centers = Tensor({config.n_codes, emb_dim});
  for (int c = 0; c < config.n_codes; ++c) {
    double* row = data.code_centers.row_ptr(c);
    for (int d = 0; d < emb_dim; ++d) row[d] = 0.01 * rng.normal();
    row[c] += 1.0;
  }

  data.topic_codes.resize(static_cast<std::size_t>(config.k_topics));
  for (int k = 0; k < config.k_topics; ++k) {
    int base = shared_mode ? config.shared_codes + k * cpt : k * cpt;
    for (int j = 0; j < cpt; ++j) data.topic_codes[static_cast<std::size_t>(k)].push_back(base + j);
  }

  int wpt = config.n_words / config.k_topics;
  data.topic_words.resize(static_cast<std::size_t>(config.k_topics));
  data.embeddings.dim = emb_dim;
  data.embeddings.rows = Tensor({config.n_words, emb_dim});
  char buf[32];
  for (int k = 0; k < config.k_topics; ++k) {
    std::vector<int> pool;
    if (!shared_mode) {
      pool.resize(static_cast<std::size_t>(pool_size));
      for (int j = 0; j < pool_size; ++j) {
        pool[static_cast<std::size_t>(j)] = (k * cpt + j) % config.n_codes;
      }
    }
    for (int j = 0; j < wpt; ++j) {
      int w = k * wpt + j;
      std::vector<int> codes(static_cast<std::size_t>(config.codes_per_word));
      if (shared_mode) {
        // One topic-exclusive code, the rest drawn from the global pool.
        codes[0] = config.shared_codes + k * cpt + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cpt)));
        std::vector<int> order = rng.permutation(config.shared_codes);
        for (int i = 1; i < config.codes_per_word; ++i) {
          codes[static_cast<std::size_t>(i)] = order[static_cast<std::size_t>(i - 1)];
        }
      } else {
        std::vector<int> order = rng.permutation(pool_size);
        for (int i = 0; i < config.codes_per_word; ++i) {
          codes[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        }
      }
      std::sort(codes.begin(), codes.end());

      std::snprintf(buf, sizeof buf, "t%02dw%04d", k, j);
      data.vocab.tokens.push_back(buf);
      data.topic_words[static_cast<std::size_t>(k)].push_back(w);
      data.word_topic.push_back(k);

      // Overlap mode: plain mean of the member centers. Shared mode: the
      // exclusive code is weighted below the shared ones, so the single
      // nearest center is always topic-neutral and only a multi-code
      // assignment recovers the word's topic.
      double* row = data.embeddings.rows.row_ptr(w);
      const double excl_w = 0.7;
      int excl_code = shared_mode ? -1 : 0;
      double denom = config.codes_per_word;
      if (shared_mode) {
        for (int c : codes) {
          if (c >= config.shared_codes) excl_code = c;
        }
        denom = (config.codes_per_word - 1) + excl_w;
      }
      for (int d = 0; d < emb_dim; ++d) {
        double mean = 0.0;
        for (int c : codes) {
          double w_c = (shared_mode && c == excl_code) ? excl_w : 1.0;
          mean += w_c * data.code_centers.at(c, d);
        }
        row[d] = mean / denom + config.noise * rng.normal();
      }
      data.word_codes.push_back(std::move(codes));
    }
  }

  for (int k = 0; k < config.k_topics; ++k) {
    std::snprintf(buf, sizeof buf, "topic%d", k);
    data.corpus.label_names.push_back(buf);
  }
  for (int d = 0; d < config.n_docs; ++d) {
    std::vector<double> theta = rng.dirichlet(config.k_topics, config.doc_concentration);
    int label = static_cast<int>(std::max_element(theta.begin(), theta.end()) - theta.begin());
    Document doc;
    std::snprintf(buf, sizeof buf, "doc%05d", d);
    doc.id = buf;
    doc.label = label;
    doc.tokens.reserve(static_cast<std::size_t>(config.doc_len));
    for (int t = 0; t < config.doc_len; ++t) {
      int z = rng.categorical(theta);
      const std::vector<int>& words = data.topic_words[static_cast<std::size_t>(z)];
      doc.tokens.push_back(words[rng.uniform_index(words.size())]);
    }
    data.corpus.documents.push_back(std::move(doc));
    data.doc_labels.push_back(label);
  }
  return data;
}

ConceptualVocab planted_conceptual_vocab(const PlantedTopicData& data) {
  if (data.word_codes.empty()) throw ParameterError("planted_conceptual_vocab: no words");
  Codebook cb;
  cb.rho_hat = data.code_centers;
  cb.usage.assign(static_cast<std::size_t>(cb.size()), 0);

  ConceptualVocab cv;
  cv.n_codes = cb.size();
  cv.expansion = static_cast<int>(data.word_codes.front().size());
  cv.codebook_hash = cb.content_hash();
  int dim = cb.dim();
  for (int w = 0; w < static_cast<int>(data.word_codes.size()); ++w) {
    ConceptualWord cw;
    cw.word_id = w;
    cw.code_indices = data.word_codes[static_cast<std::size_t>(w)];
    cw.rho.assign(static_cast<std::size_t>(dim), 0.0);
    for (int c : cw.code_indices) {
      const double* row = cb.rho_hat.row_ptr(c);
      for (int d = 0; d < dim; ++d) cw.rho[static_cast<std::size_t>(d)] += row[d];
    }
    cv.words.push_back(std::move(cw));
  }
  return cv;
}

ConceptualVocab quantize_vocab_against(const Tensor& centers, const EmbeddingTable& emb, int k) {
  if (centers.ndim() != 2 || centers.dim(0) < 1) {
    throw DimensionError("quantize_vocab_against: centers must be a non-empty matrix");
  }
  if (emb.rows.ndim() != 2 || emb.dim != centers.dim(1)) {
    throw DimensionError("quantize_vocab_against: embedding dim disagrees with the centers");
  }
  Codebook cb;
  cb.rho_hat = centers;
  cb.usage.assign(static_cast<std::size_t>(centers.dim(0)), 0);

  ConceptualVocab cv;
  cv.n_codes = cb.size();
  cv.expansion = k;
  cv.codebook_hash = cb.content_hash();
  for (int w = 0; w < emb.count(); ++w) {
    const double* row = emb.rows.row_ptr(w);
    std::vector<double> x(row, row + emb.dim);
    QuantizedTopK q = quantize_topk(x, cb, k);
    ConceptualWord cw;
    cw.word_id = w;
    cw.code_indices = std::move(q.indices);
    cw.rho = std::move(q.rho);
    cv.words.push_back(std::move(cw));
  }
  return cv;
}

TwoRegimeData make_two_regime_sequences(const TwoRegimeConfig& config) {
  if (config.n_codes < 4 || config.n_codes % 2 != 0) {
    throw ParameterError("make_two_regime_sequences: n_codes must be even and at least 4");
  }
  if (config.length < 1) throw ParameterError("make_two_regime_sequences: length must be positive");
  if (config.n_train < 1 || config.n_held_out < 1) {
    throw ParameterError("make_two_regime_sequences: need at least one sequence per split");
  }
  if (!(config.peak > 1.0 / config.n_codes) || config.peak > 1.0) {
    throw ParameterError("make_two_regime_sequences: peak must be in (1/n_codes, 1]");
  }

  // Regime r draws position n from a categorical peaked at code
  // r*block + (n % block): each regime keeps to its own half of the code
  // space, and the position picks the code within the half.
  int block = config.n_codes / 2;
  double residue = (1.0 - config.peak) / (config.n_codes - 1);
  TwoRegimeData data;
  data.probs.assign(2, std::vector<std::vector<double>>(
                           static_cast<std::size_t>(config.length),
                           std::vector<double>(static_cast<std::size_t>(config.n_codes), residue)));
  for (int r = 0; r < 2; ++r) {
    for (int n = 0; n < config.length; ++n) {
      data.probs[static_cast<std::size_t>(r)][static_cast<std::size_t>(n)]
                [static_cast<std::size_t>(r * block + n % block)] = config.peak;
    }
  }

  Rng rng(config.seed);
  char buf[32];
  auto generate = [&](int count, const char* prefix, SequenceDataset& out) {
    out.n_codes = config.n_codes;
    out.length = config.length;
    out.label_names = {"regime0", "regime1"};
    for (int i = 0; i < count; ++i) {
      CodeSequence seq;
      std::snprintf(buf, sizeof buf, "%s%05d", prefix, i);
      seq.id = buf;
      int r = static_cast<int>(rng.uniform_index(2));
      seq.label = r;
      seq.indices.reserve(static_cast<std::size_t>(config.length));
      for (int n = 0; n < config.length; ++n) {
        seq.indices.push_back(
            rng.categorical(data.probs[static_cast<std::size_t>(r)][static_cast<std::size_t>(n)]));
      }
      out.sequences.push_back(std::move(seq));
    }
  };
  generate(config.n_train, "train", data.train);
  generate(config.n_held_out, "held", data.held_out);
  return data;
}

double best_match_precision(const std::vector<std::vector<int>>& learned,
                            const std::vector<std::vector<int>>& planted, int top_n) {
  if (learned.empty() || planted.empty()) {
    throw ParameterError("best_match_precision: topic sets must be non-empty");
  }
  if (top_n < 1) throw ParameterError("best_match_precision: top_n must be positive");
  std::vector<std::unordered_set<int>> sets;
  sets.reserve(planted.size());
  for (const auto& p : planted) sets.emplace_back(p.begin(), p.end());

  double total = 0.0;
  for (const auto& l : learned) {
    int n = std::min<int>(top_n, static_cast<int>(l.size()));
    if (n == 0) throw ParameterError("best_match_precision: empty learned topic");
    int best = 0;
    for (const auto& s : sets) {
      int hits = 0;
      for (int i = 0; i < n; ++i) hits += s.count(l[static_cast<std::size_t>(i)]) ? 1 : 0;
      best = std::max(best, hits);
    }
    total += static_cast<double>(best) / n;
  }
  return total / static_cast<double>(learned.size());
}

}  // namespace tvq
