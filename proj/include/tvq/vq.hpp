#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvq/corpus.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"
#include "tvq/tensor.hpp"

namespace tvq {

/// Fully connected layer, weights stored (out x in).
struct Linear {
  Tensor w;
  Tensor b;
};

/// Xavier-uniform initialized layer.
Linear make_linear(int out_dim, int in_dim, Rng& rng);

/// MLP encoder/decoder pair around the quantizer. The encoder applies ReLU
/// after every layer (latents live in the non-negative orthant); the decoder
/// applies ReLU after all but the final layer.
struct VqAutoencoder {
  std::vector<Linear> encoder;
  std::vector<Linear> decoder;

  int input_dim() const;
  int latent_dim() const;

  std::vector<double> encode(const std::vector<double>& x) const;
  Tensor encode_batch(const Tensor& x) const;
  std::vector<double> decode(const std::vector<double>& f) const;
  Tensor decode_batch(const Tensor& f) const;
};

/// The learned embedding matrix used for quantization, one row per code.
struct Codebook {
  Tensor rho_hat;                   // (n_codes x latent_dim)
  std::vector<std::int64_t> usage;  // assignment counts from the last training epoch

  int size() const { return rho_hat.ndim() == 2 ? rho_hat.dim(0) : 0; }
  int dim() const { return rho_hat.ndim() == 2 ? rho_hat.dim(1) : 0; }
  std::uint64_t content_hash() const;
};

struct Quantized {
  int index = -1;
  std::vector<int> code;     // one-hot over codes
  std::vector<double> rho;   // selected codebook row
};

struct QuantizedTopK {
  std::vector<int> indices;  // ascending, K distinct entries
  std::vector<int> code;     // multi-hot over codes
  std::vector<double> rho;   // sum of the selected rows
};

/// Nearest codebook row by squared L2; ties resolved to the lowest index.
Quantized quantize(const std::vector<double>& f, const Codebook& cb);

/// K nearest distinct rows; ties at the cut resolved to the lowest index.
QuantizedTopK quantize_topk(const std::vector<double>& f, const Codebook& cb, int k);

/// A vocabulary word re-expressed over the codebook: the indices of its K
/// assigned codes and the summed embedding of those rows.
struct ConceptualWord {
  int word_id = -1;
  std::vector<int> code_indices;  // ascending, exactly K entries
  std::vector<double> rho;
};

struct ConceptualVocab {
  std::vector<ConceptualWord> words;
  int expansion = 1;
  int n_codes = 0;
  std::uint64_t codebook_hash = 0;

  int size() const { return static_cast<int>(words.size()); }
};

/// Aggregated code counts of one document (sum of its words' multi-hot codes).
struct DocumentCodeHistogram {
  std::vector<int> counts;

  std::int64_t total() const;
};

struct VqTrainConfig {
  int n_codes = 300;
  int latent_dim = 100;
  std::vector<int> encoder_hidden = {500, 500, 1000};
  std::vector<int> decoder_hidden = {100, 1000, 500, 500};
  int epochs = 20;
  double lr = 1e-3;
  int batch_size = 256;
  double commitment_cost = 0.25;
  std::uint64_t seed = 0;
};

struct VqModel {
  VqAutoencoder autoencoder;
  Codebook codebook;
  VqTrainConfig config;
  std::vector<double> loss_trace;  // mean loss per epoch

  std::uint64_t content_hash() const;
};

/// Pretrains the autoencoder and codebook on the embedding table: one
/// reconstruction-only warmup epoch, k-means++ codebook seeding from encoder
/// outputs, then `epochs` epochs of straight-through quantized training with
/// dead-code reseeding. Deterministic under config.seed.
VqModel train_vqvae(const EmbeddingTable& table, const VqTrainConfig& config);

/// Encodes and top-K quantizes every vocabulary word with a frozen encoder.
ConceptualVocab build_conceptual_vocab(const Vocabulary& vocab, const EmbeddingTable& table,
                                       const VqAutoencoder& ae, const Codebook& cb, int k);

DocumentCodeHistogram doc_code_histogram(const Document& doc, const ConceptualVocab& cvocab);

/// Full-corpus encoding: per document the code histogram c_d and word
/// histogram v_d. Empty documents become entries marked skipped.
EncodedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& vocab, const ConceptualVocab& cvocab);

void save_vq_model(const VqModel& model, const std::string& path, const std::string& config_echo);
VqModel load_vq_model(const std::string& path, std::string* config_echo = nullptr);

}  // namespace tvq
