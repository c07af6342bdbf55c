// tvq: command-line pipeline around the conceptual-word topic model.
//
// Subcommands: pretrain-vq, encode, train, topics, sample, train-ar, eval,
// gen-synth. Every command writes its resolved configuration into the output
// artifact, logs to stderr, and touches only the declared output paths.
//
// Exit codes: 0 success, 2 usage or unusable input file, 3 artifacts that do
// not belong together, 4 numeric failure (diverged training).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tvq/corpus.hpp"
#include "tvq/errors.hpp"
#include "tvq/hash.hpp"
#include "tvq/metrics.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"
#include "tvq/seq_prior.hpp"
#include "tvq/synth.hpp"
#include "tvq/topic_model.hpp"
#include "tvq/vq.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitCompat = 3;
constexpr int kExitNumeric = 4;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

/// Flat, deterministic one-line config echo: "cmd=<name> key=value ...".
class Echo {
 public:
  explicit Echo(const std::string& cmd) { out_ << "cmd=" << cmd; }
  Echo& add(const std::string& key, const std::string& v) {
    out_ << " " << key << "=" << v;
    return *this;
  }
  Echo& add(const std::string& key, const char* v) { return add(key, std::string(v)); }
  Echo& add(const std::string& key, bool v) { return add(key, std::string(v ? "true" : "false")); }
  Echo& add(const std::string& key, int v) { return add(key, std::to_string(v)); }
  Echo& add(const std::string& key, std::uint64_t v) { return add(key, std::to_string(v)); }
  Echo& add(const std::string& key, double v) { return add(key, fmt_double(v)); }
  Echo& add(const std::string& key, const std::vector<int>& v) { return add(key, fmt_ints(v)); }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

/// Accepts "uniform", "onehot:IDX", or a comma list of K non-negative weights
/// (normalized to the simplex).
std::vector<double> parse_theta(const std::string& spec, int k) {
  std::vector<double> theta(static_cast<std::size_t>(k), 0.0);
  if (spec == "uniform") {
    for (auto& t : theta) t = 1.0 / k;
    return theta;
  }
  if (spec.rfind("onehot:", 0) == 0) {
    int idx = -1;
    try {
      idx = std::stoi(spec.substr(7));
    } catch (const std::exception&) {
      throw tvq::ParameterError("--theta onehot index is not a number: " + spec);
    }
    if (idx < 0 || idx >= k) {
      throw tvq::ParameterError("--theta onehot index " + std::to_string(idx) +
                                " out of range for " + std::to_string(k) + " topics");
    }
    theta[static_cast<std::size_t>(idx)] = 1.0;
    return theta;
  }
  std::stringstream ss(spec);
  std::string part;
  std::vector<double> vals;
  while (std::getline(ss, part, ',')) {
    try {
      vals.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw tvq::ParameterError("--theta entry is not a number: " + part);
    }
  }
  if (static_cast<int>(vals.size()) != k) {
    throw tvq::ParameterError("--theta needs " + std::to_string(k) + " weights, got " +
                              std::to_string(vals.size()));
  }
  double total = 0.0;
  for (double v : vals) {
    if (v < 0.0) throw tvq::ParameterError("--theta weights must be non-negative");
    total += v;
  }
  if (!(total > 0.0)) throw tvq::ParameterError("--theta weights must not all be zero");
  for (int t = 0; t < k; ++t) theta[static_cast<std::size_t>(t)] = vals[static_cast<std::size_t>(t)] / total;
  return theta;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tvq::FormatError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw tvq::FormatError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// pretrain-vq

struct PretrainArgs {
  std::string embeddings, vocab, out;
  std::uint64_t seed = 0;
  tvq::VqTrainConfig vq;
};

int cmd_pretrain_vq(const PretrainArgs& a) {
  tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
  tvq::EmbeddingTable table = tvq::load_embeddings(a.embeddings, vocab);
  std::cerr << "loaded " << vocab.size() << " words, embedding dim " << table.dim << "\n";

  tvq::VqTrainConfig cfg = a.vq;
  cfg.seed = a.seed;
  std::string echo = Echo("pretrain-vq")
                         .add("embeddings", a.embeddings)
                         .add("vocab", a.vocab)
                         .add("out", a.out)
                         .add("seed", cfg.seed)
                         .add("n_codes", cfg.n_codes)
                         .add("latent", cfg.latent_dim)
                         .add("encoder_hidden", cfg.encoder_hidden)
                         .add("decoder_hidden", cfg.decoder_hidden)
                         .add("epochs", cfg.epochs)
                         .add("lr", cfg.lr)
                         .add("batch", cfg.batch_size)
                         .add("commitment", cfg.commitment_cost)
                         .str();

  tvq::VqModel model = tvq::train_vqvae(table, cfg);
  int dead = 0;
  for (std::int64_t u : model.codebook.usage) dead += u == 0 ? 1 : 0;
  if (!model.loss_trace.empty()) {
    std::cerr << "trained " << model.loss_trace.size() << " epochs, first loss "
              << model.loss_trace.front() << ", last loss " << model.loss_trace.back() << "\n";
  }
  std::cerr << "codebook " << model.codebook.size() << " x " << model.codebook.dim() << ", " << dead
            << " unused codes in final epoch\n";
  tvq::save_vq_model(model, a.out, echo);
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// encode

struct EncodeArgs {
  std::string vocab, corpus, embeddings, codebook, out;
  int expansion = 5;
};

int cmd_encode(const EncodeArgs& a) {
  tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
  tvq::Corpus corpus = tvq::load_corpus(a.corpus, vocab);
  tvq::EmbeddingTable table = tvq::load_embeddings(a.embeddings, vocab);
  tvq::VqModel vq = tvq::load_vq_model(a.codebook);
  std::cerr << "loaded " << corpus.size() << " documents, codebook " << vq.codebook.size() << " x "
            << vq.codebook.dim() << "\n";

  std::string echo = Echo("encode")
                         .add("vocab", a.vocab)
                         .add("corpus", a.corpus)
                         .add("embeddings", a.embeddings)
                         .add("codebook", a.codebook)
                         .add("out", a.out)
                         .add("expansion", a.expansion)
                         .str();

  tvq::ConceptualVocab cvocab =
      tvq::build_conceptual_vocab(vocab, table, vq.autoencoder, vq.codebook, a.expansion);
  tvq::EncodedCorpus enc = tvq::encode_corpus(corpus, vocab, cvocab);
  int skipped = 0;
  for (const auto& d : enc.docs) skipped += d.skipped ? 1 : 0;
  if (skipped > 0) std::cerr << "flagged " << skipped << " empty document(s) as skipped\n";
  tvq::save_encoded_corpus(enc, a.out, echo);
  std::cerr << "wrote " << a.out << " (" << enc.size() << " documents, expansion " << enc.expansion
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data, codebook, vocab, out;
  std::uint64_t seed = 0;
  tvq::TopicModelConfig tm;
};

int cmd_train(const TrainArgs& a) {
  tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
  tvq::VqModel vq = tvq::load_vq_model(a.codebook);
  tvq::EncodedCorpus enc = tvq::load_encoded_corpus(a.data);
  if (enc.vocab_hash != vocab.content_hash()) {
    throw tvq::CompatibilityError(a.data + ": encoded against a different vocabulary than " + a.vocab);
  }
  if (enc.codebook_hash != vq.codebook.content_hash()) {
    throw tvq::CompatibilityError(a.data + ": encoded against a different codebook than " + a.codebook);
  }
  if (enc.n_words != vocab.size() || enc.n_codes != vq.codebook.size()) {
    throw tvq::CompatibilityError(a.data + ": dimensions disagree with vocabulary/codebook");
  }

  tvq::TopicModelConfig cfg = a.tm;
  cfg.seed = a.seed;
  std::string echo = Echo("train")
                         .add("data", a.data)
                         .add("codebook", a.codebook)
                         .add("vocab", a.vocab)
                         .add("out", a.out)
                         .add("seed", cfg.seed)
                         .add("k_topics", cfg.k_topics)
                         .add("hidden", cfg.inference_hidden)
                         .add("epochs", cfg.epochs)
                         .add("lr", cfg.lr)
                         .add("batch", cfg.batch_size)
                         .add("concentration", cfg.resolved_concentration())
                         .str();

  tvq::TopicTrainResult result = tvq::train_topic_model(enc, vq.codebook.rho_hat, cfg);
  if (!result.trace.empty()) {
    std::cerr << "trained " << result.trace.size() << " epochs, first loss " << result.trace.front()
              << ", last loss " << result.trace.back() << "\n";
  }
  tvq::save_topic_model(result.model, a.out, echo);
  std::cerr << "wrote " << a.out << "\n";
  if (result.aborted) {
    std::cerr << "error: " << result.message << "\n";
    return kExitNumeric;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// topics

struct TopicsArgs {
  std::string model, vocab, codebook, out;
  int top = 10;
};

int cmd_topics(const TopicsArgs& a) {
  tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
  tvq::VqModel vq = tvq::load_vq_model(a.codebook);
  tvq::TopicModel model = tvq::load_topic_model(a.model, vocab, vq.codebook);

  std::string echo = Echo("topics")
                         .add("model", a.model)
                         .add("vocab", a.vocab)
                         .add("codebook", a.codebook)
                         .add("top", a.top)
                         .str();

  std::ostringstream listing;
  for (int k = 0; k < model.k_topics(); ++k) {
    std::vector<int> ids = tvq::top_words(model, k, a.top);
    listing << "topic " << k << ":";
    for (int id : ids) listing << " " << vocab.tokens[static_cast<std::size_t>(id)];
    listing << "\n";
  }
  std::cout << listing.str();
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw tvq::FormatError("cannot open for writing: " + a.out);
    out << "# " << echo << "\n" << listing.str();
    if (!out) throw tvq::FormatError("write failed: " + a.out);
    std::cerr << "wrote " << a.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string mode;  // "bow" or "seq"
  std::string model, vocab, codebook, ar, out;
  std::string theta = "uniform";
  std::uint64_t seed = 0;
  int n_tokens = 20;
  int n_docs = 1;
  int n_seq = 1;
};

int cmd_sample(const SampleArgs& a) {
  tvq::Rng rng(a.seed);
  json report;
  Echo echo("sample");
  echo.add("mode", a.mode).add("out", a.out).add("seed", a.seed);

  if (a.mode == "bow") {
    if (a.model.empty() || a.vocab.empty() || a.codebook.empty()) {
      throw tvq::ParameterError("sample --mode bow needs --model, --vocab and --codebook");
    }
    tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
    tvq::VqModel vq = tvq::load_vq_model(a.codebook);
    tvq::TopicModel model = tvq::load_topic_model(a.model, vocab, vq.codebook);
    std::vector<double> theta = parse_theta(a.theta, model.k_topics());
    echo.add("model", a.model)
        .add("vocab", a.vocab)
        .add("codebook", a.codebook)
        .add("theta", a.theta)
        .add("n_tokens", a.n_tokens)
        .add("n_docs", a.n_docs);

    report["theta"] = theta;
    json docs = json::array();
    for (int d = 0; d < a.n_docs; ++d) {
      tvq::GeneratedDocument gen = tvq::sample_bow(model, theta, a.n_tokens, rng);
      json doc;
      json words = json::array();
      for (int id : gen.words) words.push_back(vocab.tokens[static_cast<std::size_t>(id)]);
      doc["words"] = words;
      doc["word_ids"] = gen.words;
      doc["topics"] = gen.topics;
      docs.push_back(std::move(doc));
    }
    report["docs"] = std::move(docs);
  } else if (a.mode == "seq") {
    if (a.ar.empty()) throw tvq::ParameterError("sample --mode seq needs --ar");
    tvq::SequencePrior prior = tvq::load_sequence_prior(a.ar);
    echo.add("ar", a.ar).add("n_seq", a.n_seq);

    std::optional<tvq::TopicModel> model;
    std::vector<double> theta;
    if (prior.conditioned) {
      if (a.model.empty() || a.vocab.empty() || a.codebook.empty()) {
        throw tvq::ParameterError(
            "sampling a conditioned prior needs --model, --vocab and --codebook");
      }
      tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
      tvq::VqModel vq = tvq::load_vq_model(a.codebook);
      model = tvq::load_topic_model(a.model, vocab, vq.codebook);
      tvq::require_topic_compat(prior, *model);
      theta = parse_theta(a.theta, model->k_topics());
      echo.add("model", a.model).add("vocab", a.vocab).add("codebook", a.codebook).add("theta", a.theta);
      report["theta"] = theta;
    }

    json seqs = json::array();
    for (int i = 0; i < a.n_seq; ++i) {
      tvq::SampledSequence s = prior.conditioned
                                   ? tvq::sample_sequence(prior, theta, *model, rng)
                                   : tvq::sample_sequence(prior, std::vector<double>{}, rng);
      json one;
      one["indices"] = s.sequence.indices;
      one["step_log_prob"] = s.step_log_prob;
      seqs.push_back(std::move(one));
    }
    report["sequences"] = std::move(seqs);
  } else {
    throw tvq::ParameterError("--mode must be 'bow' or 'seq'");
  }

  report["config"] = echo.str();
  write_json_file(report, a.out);
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-ar

struct TrainArArgs {
  std::string sequences, out;
  std::string topic, vocab, codebook, out_topic;
  bool unconditioned = false;
  bool frozen = false;
  std::uint64_t seed = 0;
  tvq::ArTrainConfig ar;
};

int cmd_train_ar(const TrainArArgs& a) {
  if (a.unconditioned && (!a.topic.empty() || a.frozen)) {
    throw tvq::ParameterError("--unconditioned excludes --topic and --frozen");
  }
  if (a.frozen && a.topic.empty()) {
    throw tvq::ParameterError("--frozen needs a trained --topic model");
  }
  if (!a.topic.empty() && (a.vocab.empty() || a.codebook.empty())) {
    throw tvq::ParameterError("--topic needs --vocab and --codebook");
  }
  bool joint = !a.unconditioned && !a.frozen;
  if (!a.topic.empty() && joint && a.out_topic.empty()) {
    throw tvq::ParameterError(
        "joint training updates the topic model; add --out-topic (or --frozen)");
  }
  if (a.out_topic.empty() == false && a.topic.empty()) {
    throw tvq::ParameterError("--out-topic only applies when --topic is given");
  }

  tvq::SequenceDataset data = tvq::load_sequences(a.sequences);
  std::cerr << "loaded " << data.size() << " sequences of length " << data.length << " over "
            << data.n_codes << " codes\n";

  std::optional<tvq::TopicModel> topic;
  std::string topic_echo;
  if (!a.topic.empty()) {
    tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
    tvq::VqModel vq = tvq::load_vq_model(a.codebook);
    topic = tvq::load_topic_model(a.topic, vocab, vq.codebook, &topic_echo);
  }

  tvq::ArTrainConfig cfg = a.ar;
  cfg.seed = a.seed;
  cfg.conditioned = !a.unconditioned;
  cfg.joint = joint;
  std::string echo = Echo("train-ar")
                         .add("sequences", a.sequences)
                         .add("out", a.out)
                         .add("topic", a.topic.empty() ? "(none)" : a.topic)
                         .add("seed", cfg.seed)
                         .add("conditioned", cfg.conditioned)
                         .add("joint", cfg.joint)
                         .add("window", cfg.window)
                         .add("code_emb", cfg.code_emb_dim)
                         .add("hidden", cfg.hidden_dim)
                         .add("epochs", cfg.epochs)
                         .add("lr", cfg.lr)
                         .add("batch", cfg.batch_size)
                         .add("k_topics", cfg.k_topics)
                         .str();

  tvq::ArTrainResult result = tvq::train_ar(data, topic, cfg);
  if (!result.trace.empty()) {
    std::cerr << "trained " << result.trace.size() << " epochs, first loss " << result.trace.front()
              << ", last loss " << result.trace.back() << "\n";
  }
  tvq::save_sequence_prior(result.prior, a.out, echo);
  std::cerr << "wrote " << a.out << "\n";
  if (!a.out_topic.empty() && result.has_topic) {
    tvq::save_topic_model(result.topic, a.out_topic, echo);
    std::cerr << "wrote updated topic model " << a.out_topic << "\n";
  }
  if (result.aborted) {
    std::cerr << "error: " << result.message << "\n";
    return kExitNumeric;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model, vocab, codebook, data, corpus, out;
  std::string ar, sequences;
  int top_n = 10;
  std::uint64_t kmeans_seed = 0;
  int restarts = 10;
  bool no_coherence = false;
  bool no_clustering = false;
};

int cmd_eval(const EvalArgs& a) {
  tvq::Vocabulary vocab = tvq::load_vocab(a.vocab);
  tvq::VqModel vq = tvq::load_vq_model(a.codebook);
  tvq::TopicModel model = tvq::load_topic_model(a.model, vocab, vq.codebook);
  tvq::Corpus corpus = tvq::load_corpus(a.corpus, vocab);
  tvq::EncodedCorpus enc = tvq::load_encoded_corpus(a.data);
  if (enc.vocab_hash != vocab.content_hash() || enc.codebook_hash != vq.codebook.content_hash()) {
    throw tvq::CompatibilityError(a.data + ": encoded against different vocabulary/codebook artifacts");
  }
  if (enc.n_codes != model.n_codes() || enc.n_words != model.n_words()) {
    throw tvq::CompatibilityError(a.data + ": dimensions disagree with the topic model");
  }

  Echo echo("eval");
  echo.add("model", a.model)
      .add("vocab", a.vocab)
      .add("codebook", a.codebook)
      .add("data", a.data)
      .add("corpus", a.corpus)
      .add("out", a.out)
      .add("top_n", a.top_n)
      .add("kmeans_seed", a.kmeans_seed)
      .add("restarts", a.restarts)
      .add("coherence", !a.no_coherence)
      .add("clustering", !a.no_clustering);
  if (!a.ar.empty()) echo.add("ar", a.ar).add("sequences", a.sequences);

  json report;
  report["seed"] = a.kmeans_seed;
  report["k_topics"] = model.k_topics();

  if (!a.no_coherence) {
    tvq::TopicSet topics;
    for (int k = 0; k < model.k_topics(); ++k) topics.topics.push_back(tvq::top_words(model, k, 25));
    tvq::CoherenceResult coh = tvq::npmi_coherence(topics, corpus, a.top_n);
    double td = tvq::topic_diversity(topics);
    report["per_topic_npmi"] = coh.per_topic;
    report["tc"] = coh.mean;
    report["td"] = td;
    report["tq"] = tvq::topic_quality(coh.mean, td);
    if (!coh.missing_words.empty()) {
      std::cerr << "warning: " << coh.missing_words.size()
                << " top word(s) never occur in the evaluation corpus\n";
      report["missing_top_words"] = coh.missing_words;
    }
    std::cerr << "tc " << coh.mean << ", td " << td << ", tq " << report["tq"].get<double>() << "\n";
  }

  if (!a.no_clustering) {
    std::vector<const tvq::EncodedDocument*> labeled;
    for (const auto& doc : enc.docs) {
      std::int64_t total = 0;
      for (int c : doc.code_counts) total += c;
      if (doc.skipped || total == 0 || !doc.label) continue;
      labeled.push_back(&doc);
    }
    if (labeled.empty()) {
      std::cerr << "warning: no labeled documents; skipping clustering metrics\n";
    } else {
      tvq::Tensor points({static_cast<int>(labeled.size()), model.k_topics()});
      std::vector<int> labels;
      labels.reserve(labeled.size());
      for (std::size_t i = 0; i < labeled.size(); ++i) {
        tvq::ThetaSample s = tvq::infer_theta(model, labeled[i]->code_counts, {});
        for (int t = 0; t < model.k_topics(); ++t) points.at(static_cast<int>(i), t) = s.theta[static_cast<std::size_t>(t)];
        labels.push_back(*labeled[i]->label);
      }
      tvq::ClusterAssignment clusters = tvq::kmeans(points, model.k_topics(), a.kmeans_seed, a.restarts);
      report["km_nmi"] = tvq::nmi(clusters, labels);
      report["km_purity"] = tvq::purity(clusters, labels);
      report["clustered_docs"] = static_cast<int>(labeled.size());
      std::cerr << "km-nmi " << report["km_nmi"].get<double>() << ", km-purity "
                << report["km_purity"].get<double>() << " over " << labeled.size() << " documents\n";
    }
  }

  if (!a.ar.empty()) {
    if (a.sequences.empty()) throw tvq::ParameterError("--ar needs --sequences to evaluate");
    tvq::SequencePrior prior = tvq::load_sequence_prior(a.ar);
    tvq::SequenceDataset seqs = tvq::load_sequences(a.sequences);
    double total = 0.0;
    if (prior.conditioned) {
      tvq::require_topic_compat(prior, model);
      for (const auto& seq : seqs.sequences) {
        tvq::ThetaSample s = tvq::infer_theta(model, tvq::sequence_code_counts(seq, seqs.n_codes), {});
        total += tvq::ar_nll(prior, seq, s.theta, model);
      }
    } else {
      for (const auto& seq : seqs.sequences) total += tvq::ar_nll(prior, seq, {});
    }
    report["ar_nll_per_position"] = total / seqs.size();
    report["ar_sequences"] = seqs.size();
    std::cerr << "ar nll/position " << report["ar_nll_per_position"].get<double>() << " over "
              << seqs.size() << " sequences\n";
  }

  report["config"] = echo.str();
  write_json_file(report, a.out);
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gen-synth

struct GenSynthArgs {
  std::string kind;  // "topics" or "sequences"
  std::string out_dir;
  std::uint64_t seed = 0;
  tvq::PlantedTopicConfig topics;
  tvq::TwoRegimeConfig sequences;
};

int cmd_gen_synth(const GenSynthArgs& a) {
  std::filesystem::create_directories(a.out_dir);
  auto path = [&](const char* name) { return (std::filesystem::path(a.out_dir) / name).string(); };

  if (a.kind == "topics") {
    tvq::PlantedTopicConfig cfg = a.topics;
    cfg.seed = a.seed;
    std::string echo = Echo("gen-synth")
                           .add("kind", "topics")
                           .add("out_dir", a.out_dir)
                           .add("seed", cfg.seed)
                           .add("k_topics", cfg.k_topics)
                           .add("n_codes", cfg.n_codes)
                           .add("n_words", cfg.n_words)
                           .add("n_docs", cfg.n_docs)
                           .add("doc_len", cfg.doc_len)
                           .add("emb_dim", cfg.emb_dim)
                           .add("codes_per_word", cfg.codes_per_word)
                           .add("code_overlap", cfg.code_overlap)
                           .add("shared_codes", cfg.shared_codes)
                           .add("concentration", cfg.doc_concentration)
                           .add("noise", cfg.noise)
                           .str();
    tvq::PlantedTopicData data = tvq::make_planted_topics(cfg);
    tvq::save_vocab(data.vocab, path("vocab.txt"));
    tvq::save_corpus(data.corpus, path("corpus.jsonl"));
    tvq::save_embeddings(data.embeddings, path("embeddings.tvqe"));

    json truth;
    truth["config"] = echo;
    truth["topic_codes"] = data.topic_codes;
    truth["topic_words"] = data.topic_words;
    truth["word_codes"] = data.word_codes;
    truth["doc_labels"] = data.doc_labels;
    json centers = json::array();
    for (int c = 0; c < data.code_centers.dim(0); ++c) {
      json row = json::array();
      for (int d = 0; d < data.code_centers.dim(1); ++d) row.push_back(data.code_centers.at(c, d));
      centers.push_back(std::move(row));
    }
    truth["code_centers"] = std::move(centers);
    write_json_file(truth, path("truth.json"));
    std::cerr << "wrote vocab.txt, corpus.jsonl, embeddings.tvqe, truth.json to " << a.out_dir << "\n";
  } else if (a.kind == "sequences") {
    tvq::TwoRegimeConfig cfg = a.sequences;
    cfg.seed = a.seed;
    std::string echo = Echo("gen-synth")
                           .add("kind", "sequences")
                           .add("out_dir", a.out_dir)
                           .add("seed", cfg.seed)
                           .add("n_codes", cfg.n_codes)
                           .add("length", cfg.length)
                           .add("n_train", cfg.n_train)
                           .add("n_held_out", cfg.n_held_out)
                           .add("peak", cfg.peak)
                           .str();
    tvq::TwoRegimeData data = tvq::make_two_regime_sequences(cfg);
    tvq::save_sequences(data.train, path("train.jsonl"));
    tvq::save_sequences(data.held_out, path("held.jsonl"));
    json truth;
    truth["config"] = echo;
    truth["probs"] = data.probs;
    write_json_file(truth, path("truth.json"));
    std::cerr << "wrote train.jsonl, held.jsonl, truth.json to " << a.out_dir << "\n";
  } else {
    throw tvq::ParameterError("--kind must be 'topics' or 'sequences'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector-quantized conceptual-word topic modeling pipeline"};
  app.require_subcommand(1);

  PretrainArgs pre;
  CLI::App* sub_pre = app.add_subcommand("pretrain-vq", "Pretrain the autoencoder and codebook on word embeddings");
  sub_pre->set_config("--config", "", "Key=value config file; command-line flags override it");
  sub_pre->add_option("--embeddings", pre.embeddings, "Input embedding table (TVQE)")->required()->check(CLI::ExistingFile);
  sub_pre->add_option("--vocab", pre.vocab, "Vocabulary file, one token per line")->required()->check(CLI::ExistingFile);
  sub_pre->add_option("--out", pre.out, "Output model path (TVQM)")->required();
  sub_pre->add_option("--seed", pre.seed, "Random seed")->required();
  sub_pre->add_option("--n-codes", pre.vq.n_codes, "Codebook size")->capture_default_str();
  sub_pre->add_option("--latent", pre.vq.latent_dim, "Latent dimension")->capture_default_str();
  sub_pre->add_option("--encoder-hidden", pre.vq.encoder_hidden, "Encoder hidden widths")->delimiter(',');
  sub_pre->add_option("--decoder-hidden", pre.vq.decoder_hidden, "Decoder hidden widths")->delimiter(',');
  sub_pre->add_option("--epochs", pre.vq.epochs, "Training epochs")->capture_default_str();
  sub_pre->add_option("--lr", pre.vq.lr, "Adam learning rate")->capture_default_str();
  sub_pre->add_option("--batch", pre.vq.batch_size, "Batch size")->capture_default_str();
  sub_pre->add_option("--commitment", pre.vq.commitment_cost, "Commitment loss weight")->capture_default_str();

  EncodeArgs enc;
  CLI::App* sub_enc = app.add_subcommand("encode", "Quantize the vocabulary and emit per-document count histograms");
  sub_enc->set_config("--config", "", "Key=value config file; command-line flags override it");
  sub_enc->add_option("--vocab", enc.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  sub_enc->add_option("--corpus", enc.corpus, "Corpus JSON-lines file")->required()->check(CLI::ExistingFile);
  sub_enc->add_option("--embeddings", enc.embeddings, "Embedding table (TVQE)")->required()->check(CLI::ExistingFile);
  sub_enc->add_option("--codebook", enc.codebook, "Pretrained model (TVQM)")->required()->check(CLI::ExistingFile);
  sub_enc->add_option("--out", enc.out, "Output encoded corpus (JSON lines)")->required();
  sub_enc->add_option("--expansion", enc.expansion, "Codes per word (K)")->capture_default_str();

  TrainArgs tr;
  CLI::App* sub_tr = app.add_subcommand("train", "Train the topic model on an encoded corpus");
  sub_tr->set_config("--config", "", "Key=value config file; command-line flags override it");
  sub_tr->add_option("--data", tr.data, "Encoded corpus (binary, from tvq encode)")->required()->check(CLI::ExistingFile);
  sub_tr->add_option("--codebook", tr.codebook, "Pretrained model (TVQM)")->required()->check(CLI::ExistingFile);
  sub_tr->add_option("--vocab", tr.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  sub_tr->add_option("--out", tr.out, "Output topic model (TVQT)")->required();
  sub_tr->add_option("--seed", tr.seed, "Random seed")->required();
  sub_tr->add_option("--k-topics", tr.tm.k_topics, "Number of topics")->capture_default_str();
  sub_tr->add_option("--hidden", tr.tm.inference_hidden, "Inference net hidden widths")->delimiter(',');
  sub_tr->add_option("--epochs", tr.tm.epochs, "Training epochs")->capture_default_str();
  sub_tr->add_option("--lr", tr.tm.lr, "Adam learning rate")->capture_default_str();
  sub_tr->add_option("--batch", tr.tm.batch_size, "Batch size")->capture_default_str();
  sub_tr->add_option("--concentration", tr.tm.prior_concentration,
                     "Dirichlet concentration behind the prior (0 = 1/k_topics)")->capture_default_str();

  TopicsArgs tp;
  CLI::App* sub_tp = app.add_subcommand("topics", "Print the top words of each topic");
  sub_tp->add_option("--model", tp.model, "Topic model (TVQT)")->required()->check(CLI::ExistingFile);
  sub_tp->add_option("--vocab", tp.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  sub_tp->add_option("--codebook", tp.codebook, "Pretrained model (TVQM)")->required()->check(CLI::ExistingFile);
  sub_tp->add_option("--top", tp.top, "Words per topic")->capture_default_str();
  sub_tp->add_option("--out", tp.out, "Also write the listing to this file");

  SampleArgs sm;
  CLI::App* sub_sm = app.add_subcommand("sample", "Sample bag-of-words documents or code sequences");
  sub_sm->add_option("--mode", sm.mode, "'bow' or 'seq'")->required();
  sub_sm->add_option("--out", sm.out, "Output JSON path")->required();
  sub_sm->add_option("--seed", sm.seed, "Random seed")->capture_default_str();
  sub_sm->add_option("--model", sm.model, "Topic model (TVQT)")->check(CLI::ExistingFile);
  sub_sm->add_option("--vocab", sm.vocab, "Vocabulary file")->check(CLI::ExistingFile);
  sub_sm->add_option("--codebook", sm.codebook, "Pretrained model (TVQM)")->check(CLI::ExistingFile);
  sub_sm->add_option("--ar", sm.ar, "Sequence prior (TVQA)")->check(CLI::ExistingFile);
  sub_sm->add_option("--theta", sm.theta, "'uniform', 'onehot:IDX', or comma weights")->capture_default_str();
  sub_sm->add_option("--n-tokens", sm.n_tokens, "Tokens per sampled document")->capture_default_str();
  sub_sm->add_option("--n-docs", sm.n_docs, "Documents to sample")->capture_default_str();
  sub_sm->add_option("--n-seq", sm.n_seq, "Sequences to sample")->capture_default_str();

  TrainArArgs ar;
  CLI::App* sub_ar = app.add_subcommand("train-ar", "Train the autoregressive prior over code sequences");
  sub_ar->set_config("--config", "", "Key=value config file; command-line flags override it");
  sub_ar->add_option("--sequences", ar.sequences, "Training sequences (JSON lines)")->required()->check(CLI::ExistingFile);
  sub_ar->add_option("--out", ar.out, "Output prior (TVQA)")->required();
  sub_ar->add_option("--seed", ar.seed, "Random seed")->required();
  sub_ar->add_option("--topic", ar.topic, "Trained topic model to condition on (TVQT)")->check(CLI::ExistingFile);
  sub_ar->add_option("--vocab", ar.vocab, "Vocabulary file (with --topic)")->check(CLI::ExistingFile);
  sub_ar->add_option("--codebook", ar.codebook, "Pretrained model (TVQM, with --topic)")->check(CLI::ExistingFile);
  sub_ar->add_option("--out-topic", ar.out_topic, "Write the jointly updated topic model here");
  sub_ar->add_flag("--unconditioned", ar.unconditioned, "Train without topic conditioning");
  sub_ar->add_flag("--frozen", ar.frozen, "Keep the supplied topic model fixed");
  sub_ar->add_option("--window", ar.ar.window, "Visible history length")->capture_default_str();
  sub_ar->add_option("--code-emb", ar.ar.code_emb_dim, "Code embedding dimension")->capture_default_str();
  sub_ar->add_option("--hidden", ar.ar.hidden_dim, "Head hidden width")->capture_default_str();
  sub_ar->add_option("--epochs", ar.ar.epochs, "Training epochs")->capture_default_str();
  sub_ar->add_option("--lr", ar.ar.lr, "Adam learning rate")->capture_default_str();
  sub_ar->add_option("--batch", ar.ar.batch_size, "Batch size")->capture_default_str();
  sub_ar->add_option("--k-topics", ar.ar.k_topics, "Topic count for sequence-only conditioning")->capture_default_str();

  EvalArgs ev;
  CLI::App* sub_ev = app.add_subcommand("eval", "Coherence, diversity and clustering report");
  sub_ev->set_config("--config", "", "Key=value config file; command-line flags override it");
  sub_ev->add_option("--model", ev.model, "Topic model (TVQT)")->required()->check(CLI::ExistingFile);
  sub_ev->add_option("--vocab", ev.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  sub_ev->add_option("--codebook", ev.codebook, "Pretrained model (TVQM)")->required()->check(CLI::ExistingFile);
  sub_ev->add_option("--data", ev.data, "Encoded corpus (binary, from tvq encode)")->required()->check(CLI::ExistingFile);
  sub_ev->add_option("--corpus", ev.corpus, "Token corpus for co-occurrence")->required()->check(CLI::ExistingFile);
  sub_ev->add_option("--out", ev.out, "Output report (JSON)")->required();
  sub_ev->add_option("--top-n", ev.top_n, "Words per topic for coherence")->capture_default_str();
  sub_ev->add_option("--kmeans-seed", ev.kmeans_seed, "Seed for theta clustering")->capture_default_str();
  sub_ev->add_option("--restarts", ev.restarts, "k-means restarts")->capture_default_str();
  sub_ev->add_flag("--no-coherence", ev.no_coherence, "Skip NPMI/TD/TQ");
  sub_ev->add_flag("--no-clustering", ev.no_clustering, "Skip Km-NMI/Km-Purity");
  sub_ev->add_option("--ar", ev.ar, "Also report NLL of this prior (TVQA)")->check(CLI::ExistingFile);
  sub_ev->add_option("--sequences", ev.sequences, "Held-out sequences for --ar")->check(CLI::ExistingFile);

  GenSynthArgs gs;
  CLI::App* sub_gs = app.add_subcommand("gen-synth", "Generate synthetic planted-topic or two-regime data");
  sub_gs->add_option("--kind", gs.kind, "'topics' or 'sequences'")->required();
  sub_gs->add_option("--out-dir", gs.out_dir, "Output directory")->required();
  sub_gs->add_option("--seed", gs.seed, "Random seed")->capture_default_str();
  sub_gs->add_option("--k-topics", gs.topics.k_topics, "Planted topic count")->capture_default_str();
  sub_gs->add_option("--n-codes", gs.topics.n_codes, "Code count (both kinds)")->capture_default_str();
  sub_gs->add_option("--n-words", gs.topics.n_words, "Vocabulary size")->capture_default_str();
  sub_gs->add_option("--n-docs", gs.topics.n_docs, "Document count")->capture_default_str();
  sub_gs->add_option("--doc-len", gs.topics.doc_len, "Tokens per document")->capture_default_str();
  sub_gs->add_option("--emb-dim", gs.topics.emb_dim, "Embedding dimension (0 = n-codes)")->capture_default_str();
  sub_gs->add_option("--codes-per-word", gs.topics.codes_per_word, "Planted codes per word")->capture_default_str();
  sub_gs->add_option("--code-overlap", gs.topics.code_overlap, "Codes shared between neighboring topics")->capture_default_str();
  sub_gs->add_option("--shared-codes", gs.topics.shared_codes, "Global topic-neutral code pool size (one exclusive code per word)")->capture_default_str();
  sub_gs->add_option("--concentration", gs.topics.doc_concentration, "Document Dirichlet concentration")->capture_default_str();
  sub_gs->add_option("--noise", gs.topics.noise, "Embedding noise stddev")->capture_default_str();
  sub_gs->add_option("--length", gs.sequences.length, "Sequence length")->capture_default_str();
  sub_gs->add_option("--n-train", gs.sequences.n_train, "Training sequences")->capture_default_str();
  sub_gs->add_option("--n-held", gs.sequences.n_held_out, "Held-out sequences")->capture_default_str();
  sub_gs->add_option("--peak", gs.sequences.peak, "Preferred-code probability")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sub_pre->parsed()) return cmd_pretrain_vq(pre);
    if (sub_enc->parsed()) return cmd_encode(enc);
    if (sub_tr->parsed()) return cmd_train(tr);
    if (sub_tp->parsed()) return cmd_topics(tp);
    if (sub_sm->parsed()) return cmd_sample(sm);
    if (sub_ar->parsed()) return cmd_train_ar(ar);
    if (sub_ev->parsed()) return cmd_eval(ev);
    if (sub_gs->parsed()) {
      if (sub_gs->count("--n-codes")) gs.sequences.n_codes = gs.topics.n_codes;
      return cmd_gen_synth(gs);
    }
  } catch (const tvq::CompatibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompat;
  } catch (const tvq::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompat;
  } catch (const tvq::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const tvq::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const tvq::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
