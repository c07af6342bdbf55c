#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvq/corpus.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"
#include "tvq/tensor.hpp"
#include "tvq/vq.hpp"

namespace tvq {

struct TopicModelConfig {
  int k_topics = 20;
  std::vector<int> inference_hidden = {100, 100};
  int epochs = 200;
  double lr = 5e-3;
  int batch_size = 256;
  std::uint64_t seed = 0;
  /// Symmetric Dirichlet concentration behind the logistic-normal prior;
  /// 0 selects the 1/K_t convention.
  double prior_concentration = 0.0;

  double resolved_concentration() const {
    return prior_concentration > 0.0 ? prior_concentration : 1.0 / k_topics;
  }
};

/// The generative topic model over quantized documents: topics are weight
/// vectors over codebook entries, projected through the codebook embeddings
/// and a word-projection layer to word logits.
struct TopicModel {
  Tensor beta_hat;               // (K_t x N_codes) topic-over-code weights
  Tensor alpha;                  // (N_words x D_latent) word projection, bias-free
  std::vector<Linear> inference; // code proportions -> hidden (tanh) -> 2*K_t
  Tensor prior_mean;             // (K_t)
  Tensor prior_logvar;           // (K_t)
  Tensor rho_hat;                // frozen codebook copy (N_codes x D_latent)
  std::uint64_t vocab_hash = 0;
  std::uint64_t codebook_hash = 0;
  TopicModelConfig config;

  int k_topics() const { return beta_hat.ndim() == 2 ? beta_hat.dim(0) : 0; }
  int n_codes() const { return beta_hat.ndim() == 2 ? beta_hat.dim(1) : 0; }
  int n_words() const { return alpha.ndim() == 2 ? alpha.dim(0) : 0; }
  int latent_dim() const { return rho_hat.ndim() == 2 ? rho_hat.dim(1) : 0; }

  /// Hash over the trained tensors (codebook identity is tracked separately
  /// through codebook_hash).
  std::uint64_t content_hash() const;
};

/// Fresh model with zeroed inference output layer, so an untrained model
/// infers the uniform topic mixture.
TopicModel init_topic_model(const TopicModelConfig& config, const Tensor& rho_hat,
                            int n_codes, int n_words, std::uint64_t vocab_hash,
                            std::uint64_t codebook_hash, Rng& rng);

struct ThetaSample {
  std::vector<double> theta;
  VariationalParams params;
  std::vector<double> epsilon;
};

/// Variational posterior sample for one document. Counts are normalized to
/// proportions before the inference net. An empty epsilon means the
/// deterministic mode (epsilon = 0), used for evaluation and clustering.
ThetaSample infer_theta(const TopicModel& model, const std::vector<int>& code_counts,
                        const std::vector<double>& epsilon = {});

/// logits = alpha . (rho_hat^T . (beta_hat^T . theta)); softmax of this is
/// the document's word distribution.
std::vector<double> doc_word_logits(const TopicModel& model, const std::vector<double>& theta);

/// Row k = alpha . (rho_hat^T . beta_k), the per-topic word logits.
Tensor topic_word_logits(const TopicModel& model);

struct LossTerms {
  double kl = 0.0;    // KL(q(theta|c) || prior)
  double code = 0.0;  // -sum_n c[n] log softmax(theta.beta_hat)[n]
  double word = 0.0;  // -sum_w v[w] log softmax(doc_word_logits)[w]

  double total() const { return kl + code + word; }
};

/// The three training loss terms for one document, computed forward-only.
LossTerms loss_terms(const TopicModel& model, const std::vector<int>& code_counts,
                     const std::vector<int>& word_counts, const std::vector<double>& epsilon);

/// Mean per-document batch loss (kl + code + word), exactly as the trainer
/// computes it. When `grads` is non-null it is filled with analytic parameter
/// gradients in update order: beta_hat, alpha, then each inference layer's
/// w and b. `eps` holds one reparameterization noise row per batch document.
double topic_training_loss(const TopicModel& model, const EncodedCorpus& data,
                           const std::vector<int>& doc_ids, const Tensor& eps,
                           std::vector<Tensor>* grads);

struct TopicTrainResult {
  TopicModel model;
  std::vector<double> trace;  // mean per-document total loss per epoch
  bool aborted = false;
  std::string message;        // set when aborted: reason and checkpoint epoch
};

/// Minimizes the mean of kl + code + word losses with Adam. Documents flagged
/// as skipped (or with zero counts) are excluded with a warning. On a
/// non-finite loss the model rolls back to the last completed epoch and the
/// result is marked aborted.
TopicTrainResult train_topic_model(const EncodedCorpus& data, const Tensor& rho_hat,
                                   const TopicModelConfig& config);

struct GeneratedDocument {
  std::vector<int> words;   // sampled vocab ids
  std::vector<int> topics;  // the topic index that generated each word
};

/// Ancestral sampling: per word draw a topic from theta, then a word from
/// that topic's softmax distribution.
GeneratedDocument sample_bow(const TopicModel& model, const std::vector<double>& theta,
                             int n_words, Rng& rng);

/// Ids of the n highest-logit words of topic k; ties broken by lowest id.
std::vector<int> top_words(const TopicModel& model, int topic, int n);

/// Model container (magic "TVQT"). The codebook is not stored; loading
/// validates the recorded vocabulary/codebook hashes and re-attaches the
/// supplied codebook. Mismatches throw CompatibilityError.
void save_topic_model(const TopicModel& model, const std::string& path, const std::string& config_echo);
TopicModel load_topic_model(const std::string& path, const Vocabulary& vocab, const Codebook& cb,
                            std::string* config_echo = nullptr);

}  // namespace tvq
