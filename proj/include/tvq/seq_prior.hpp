#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tvq/corpus.hpp"
#include "tvq/rng.hpp"
#include "tvq/tensor.hpp"
#include "tvq/topic_model.hpp"
#include "tvq/vq.hpp"

namespace tvq {

/// One fixed-length sequence of codebook indices.
struct CodeSequence {
  std::string id;
  std::vector<int> indices;
  std::optional<int> label;  // ground-truth regime for synthetic data
};

struct SequenceDataset {
  int n_codes = 0;
  int length = 0;
  std::vector<std::string> label_names;
  std::vector<CodeSequence> sequences;

  int size() const { return static_cast<int>(sequences.size()); }
};

/// JSON-lines: header {"n_codes", "length", ...}, then one sequence per line.
void save_sequences(const SequenceDataset& data, const std::string& path);
SequenceDataset load_sequences(const std::string& path);

/// Per-code occurrence counts of a sequence (the c_d fed to the topic side).
std::vector<int> sequence_code_counts(const CodeSequence& seq, int n_codes);

struct ArTrainConfig {
  int window = 8;        // number of visible previous positions
  int code_emb_dim = 32;
  int hidden_dim = 64;
  int epochs = 30;
  double lr = 5e-3;
  int batch_size = 256;
  std::uint64_t seed = 0;
  bool conditioned = true;
  bool joint = true;     // also update the topic-side parameters
  int k_topics = 2;      // topic count when no topic model is supplied
};

/// Causal fixed-window autoregressive prior over code indices. Position n
/// sees the embeddings of the previous `window` indices (zero-padded), its
/// position embedding and, when conditioned, a projection of the document's
/// topic context vector; a two-layer MLP head emits the code logits.
struct SequencePrior {
  int window = 0;
  int seq_length = 0;
  bool conditioned = false;
  Tensor code_emb;    // (n_codes x code_emb_dim)
  Tensor pos_emb;     // (seq_length x code_emb_dim)
  Linear hist;        // code_emb_dim x (window * code_emb_dim)
  Tensor topic_proj;  // code_emb_dim x cond_dim; empty when unconditioned
  Linear head1;       // hidden_dim x code_emb_dim
  Linear head2;       // n_codes x hidden_dim; zero at init => exactly uniform
  std::uint64_t topic_hash = 0;
  ArTrainConfig config;

  int n_codes() const { return code_emb.ndim() == 2 ? code_emb.dim(0) : 0; }
  int cond_dim() const { return topic_proj.ndim() == 2 ? topic_proj.dim(1) : 0; }
  std::uint64_t content_hash() const;
};

SequencePrior init_sequence_prior(const ArTrainConfig& config, int n_codes, int seq_length,
                                  int cond_dim, Rng& rng);

/// theta . beta_hat . rho_hat — the conditioning vector fed to the prior.
std::vector<double> topic_context_vector(const TopicModel& model, const std::vector<double>& theta);

/// Teacher-forced per-position logits (seq_length x n_codes). `cond` must be
/// empty for an unconditioned prior and length cond_dim otherwise.
Tensor ar_logits(const SequencePrior& prior, const std::vector<int>& indices,
                 const std::vector<double>& cond);

/// Mean negative log-likelihood per position, in nats.
double ar_nll(const SequencePrior& prior, const CodeSequence& seq, const std::vector<double>& cond);
double ar_nll(const SequencePrior& prior, const CodeSequence& seq, const std::vector<double>& theta,
              const TopicModel& model);

/// Mean per-sequence batch loss, exactly as the trainer computes it: the
/// teacher-forced cross-entropy, plus the topic-side kl and code terms when
/// `joint`. `topic` must be null iff the prior is unconditioned; `eps` holds
/// one reparameterization noise row per batch sequence (empty tensor when
/// unconditioned). When `grads` is non-null it is filled with analytic
/// gradients in update order: code_emb, pos_emb, hist w/b, head1 w/b,
/// head2 w/b, then topic_proj when conditioned, then beta_hat and the
/// inference layers' w/b when joint.
double ar_training_loss(const SequencePrior& prior, const TopicModel* topic, bool joint,
                        const SequenceDataset& data, const std::vector<int>& sequence_ids,
                        const Tensor& eps, std::vector<Tensor>* grads);

struct ArTrainResult {
  SequencePrior prior;
  TopicModel topic;   // meaningful only when has_topic
  bool has_topic = false;
  std::vector<double> trace;  // mean per-sequence loss per epoch
  bool aborted = false;
  std::string message;
};

/// Teacher-forced training. Conditioned mode derives theta from each
/// sequence's code histogram; with `joint` the topic-side parameters train
/// under the combined kl + code + sequence-CE loss, otherwise they stay
/// frozen. Unconditioned mode trains the sequence CE alone. On non-finite
/// loss the result rolls back to the last completed epoch and is marked
/// aborted.
ArTrainResult train_ar(const SequenceDataset& data, const std::optional<TopicModel>& topic,
                       const ArTrainConfig& config);

struct SampledSequence {
  CodeSequence sequence;
  std::vector<double> step_log_prob;  // log-probability of each sampled index
};

SampledSequence sample_sequence(const SequencePrior& prior, const std::vector<double>& cond, Rng& rng);
SampledSequence sample_sequence(const SequencePrior& prior, const std::vector<double>& theta,
                                const TopicModel& model, Rng& rng);

/// VQ decoder applied per position to the indexed codebook row.
std::vector<std::vector<double>> decode_sequence(const CodeSequence& seq, const Codebook& cb,
                                                 const VqAutoencoder& ae);

/// Throws CompatibilityError when the prior was trained against a different
/// topic model.
void require_topic_compat(const SequencePrior& prior, const TopicModel& model);

void save_sequence_prior(const SequencePrior& prior, const std::string& path, const std::string& config_echo);
SequencePrior load_sequence_prior(const std::string& path, std::string* config_echo = nullptr);

}  // namespace tvq
