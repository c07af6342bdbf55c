#include "tvq/vq.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <utility>

#include "tvq/autodiff.hpp"
#include "tvq/binio.hpp"
#include "tvq/errors.hpp"
#include "tvq/hash.hpp"

namespace tvq {

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double out = 0.0;
  for (int i = 0; i < d; ++i) {
    double diff = a[i] - b[i];
    out += diff * diff;
  }
  return out;
}

void relu_inplace(Tensor& t) {
  for (auto& v : t.values()) {
    if (v < 0.0) v = 0.0;
  }
}

Tensor take_rows(const Tensor& src, const std::vector<int>& order, int begin, int end) {
  int d = src.dim(1);
  Tensor out({end - begin, d});
  for (int i = begin; i < end; ++i) {
    const double* s = src.row_ptr(order[static_cast<std::size_t>(i)]);
    std::copy(s, s + d, out.row_ptr(i - begin));
  }
  return out;
}

struct MountedNet {
  std::vector<std::pair<ad::Var, ad::Var>> layers;  // (weight, bias)
};

ad::Var forward_net(ad::Tape& tape, const MountedNet& m, ad::Var x, bool relu_last) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    x = tape.add_row(tape.matmul_nt(x, m.layers[i].first), m.layers[i].second);
    if (relu_last || i + 1 < m.layers.size()) x = tape.relu(x);
  }
  return x;
}

int nearest_code(const double* f, const Tensor& rho_hat) {
  int best = 0;
  double best_d = sq_dist(f, rho_hat.row_ptr(0), rho_hat.dim(1));
  for (int i = 1; i < rho_hat.dim(0); ++i) {
    double d = sq_dist(f, rho_hat.row_ptr(i), rho_hat.dim(1));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// Exact duplicate rows collapse quantization ties; nudge later copies apart.
void ensure_distinct_rows(Tensor& m, Rng& rng) {
  int n = m.dim(0), d = m.dim(1);
  for (int pass = 0; pass < 16; ++pass) {
    bool clean = true;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (std::equal(m.row_ptr(i), m.row_ptr(i) + d, m.row_ptr(j))) {
          clean = false;
          double* row = m.row_ptr(j);
          for (int c = 0; c < d; ++c) row[c] += 1e-9 * rng.normal();
        }
      }
    }
    if (clean) return;
  }
  throw NumericError("codebook rows could not be made distinct");
}

}  // namespace

Linear make_linear(int out_dim, int in_dim, Rng& rng) {
  if (out_dim < 1 || in_dim < 1) throw ParameterError("make_linear: dims must be positive");
  Linear l;
  l.w = Tensor({out_dim, in_dim});
  double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (auto& v : l.w.values()) v = rng.uniform(-limit, limit);
  l.b = Tensor({out_dim});
  return l;
}

int VqAutoencoder::input_dim() const {
  if (encoder.empty()) throw ParameterError("autoencoder has no encoder layers");
  return encoder.front().w.dim(1);
}

int VqAutoencoder::latent_dim() const {
  if (encoder.empty()) throw ParameterError("autoencoder has no encoder layers");
  return encoder.back().w.dim(0);
}

std::vector<double> VqAutoencoder::encode(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw DimensionError("encode: input length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
  std::vector<double> cur = x, next;
  for (const Linear& l : encoder) {
    linear_forward(l.w, l.b, cur, next);
    for (auto& v : next) {
      if (v < 0.0) v = 0.0;
    }
    cur.swap(next);
  }
  return cur;
}

Tensor VqAutoencoder::encode_batch(const Tensor& x) const {
  Tensor cur = x;
  for (const Linear& l : encoder) {
    cur = linear_forward_batch(l.w, l.b, cur);
    relu_inplace(cur);
  }
  return cur;
}

std::vector<double> VqAutoencoder::decode(const std::vector<double>& f) const {
  std::vector<double> cur = f, next;
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    linear_forward(decoder[i].w, decoder[i].b, cur, next);
    if (i + 1 < decoder.size()) {
      for (auto& v : next) {
        if (v < 0.0) v = 0.0;
      }
    }
    cur.swap(next);
  }
  return cur;
}

Tensor VqAutoencoder::decode_batch(const Tensor& f) const {
  Tensor cur = f;
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    cur = linear_forward_batch(decoder[i].w, decoder[i].b, cur);
    if (i + 1 < decoder.size()) relu_inplace(cur);
  }
  return cur;
}

std::uint64_t Codebook::content_hash() const {
  Fnv1a h;
  hash_tensor_f32(h, rho_hat);
  return h.digest();
}

Quantized quantize(const std::vector<double>& f, const Codebook& cb) {
  if (cb.size() < 1) throw ParameterError("quantize: codebook is empty");
  if (static_cast<int>(f.size()) != cb.dim()) {
    throw DimensionError("quantize: latent length " + std::to_string(f.size()) + ", codebook dim " +
                         std::to_string(cb.dim()));
  }
  Quantized q;
  q.index = nearest_code(f.data(), cb.rho_hat);
  q.code.assign(static_cast<std::size_t>(cb.size()), 0);
  q.code[static_cast<std::size_t>(q.index)] = 1;
  const double* row = cb.rho_hat.row_ptr(q.index);
  q.rho.assign(row, row + cb.dim());
  return q;
}

QuantizedTopK quantize_topk(const std::vector<double>& f, const Codebook& cb, int k) {
  if (cb.size() < 1) throw ParameterError("quantize_topk: codebook is empty");
  if (k < 1) throw ParameterError("quantize_topk: K must be at least 1");
  if (k > cb.size()) {
    throw ParameterError("quantize_topk: K=" + std::to_string(k) + " exceeds codebook size " +
                         std::to_string(cb.size()));
  }
  if (static_cast<int>(f.size()) != cb.dim()) {
    throw DimensionError("quantize_topk: latent length " + std::to_string(f.size()) + ", codebook dim " +
                         std::to_string(cb.dim()));
  }
  std::vector<std::pair<double, int>> order;
  order.reserve(static_cast<std::size_t>(cb.size()));
  for (int i = 0; i < cb.size(); ++i) {
    order.emplace_back(sq_dist(f.data(), cb.rho_hat.row_ptr(i), cb.dim()), i);
  }
  // Pair ordering gives the tie rule for free: equal distances sort by index.
  std::sort(order.begin(), order.end());

  QuantizedTopK q;
  q.indices.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) q.indices.push_back(order[static_cast<std::size_t>(i)].second);
  std::sort(q.indices.begin(), q.indices.end());
  q.code.assign(static_cast<std::size_t>(cb.size()), 0);
  q.rho.assign(static_cast<std::size_t>(cb.dim()), 0.0);
  for (int idx : q.indices) {
    q.code[static_cast<std::size_t>(idx)] = 1;
    const double* row = cb.rho_hat.row_ptr(idx);
    for (int j = 0; j < cb.dim(); ++j) q.rho[static_cast<std::size_t>(j)] += row[j];
  }
  return q;
}

VqModel train_vqvae(const EmbeddingTable& table, const VqTrainConfig& config) {
  if (table.count() < 1) throw ParameterError("train_vqvae: embedding table is empty");
  if (config.n_codes < 1) throw ParameterError("train_vqvae: n_codes must be positive");
  if (config.latent_dim < 1) throw ParameterError("train_vqvae: latent_dim must be positive");
  if (config.batch_size < 1) throw ParameterError("train_vqvae: batch_size must be positive");
  if (config.epochs < 0) throw ParameterError("train_vqvae: epochs must be non-negative");
  if (!(config.lr > 0.0)) throw ParameterError("train_vqvae: lr must be positive");
  int n = table.count();
  int d_in = table.dim;
  if (n < config.n_codes) {
    std::cerr << "warning: " << n << " embeddings for " << config.n_codes
              << " codes; some codes cannot be distinct cluster centers\n";
  }

  Rng rng(config.seed);
  VqModel model;
  model.config = config;

  int prev = d_in;
  for (int h : config.encoder_hidden) {
    model.autoencoder.encoder.push_back(make_linear(h, prev, rng));
    prev = h;
  }
  model.autoencoder.encoder.push_back(make_linear(config.latent_dim, prev, rng));
  prev = config.latent_dim;
  for (int h : config.decoder_hidden) {
    model.autoencoder.decoder.push_back(make_linear(h, prev, rng));
    prev = h;
  }
  model.autoencoder.decoder.push_back(make_linear(d_in, prev, rng));

  model.codebook.rho_hat = Tensor({config.n_codes, config.latent_dim});
  for (auto& v : model.codebook.rho_hat.values()) v = 0.05 * rng.normal();
  model.codebook.usage.assign(static_cast<std::size_t>(config.n_codes), 0);

  if (config.epochs == 0) {
    ensure_distinct_rows(model.codebook.rho_hat, rng);
    return model;
  }

  // One Adam slot per parameter tensor: encoder w/b, decoder w/b, codebook last.
  std::vector<Tensor*> params;
  for (Linear& l : model.autoencoder.encoder) {
    params.push_back(&l.w);
    params.push_back(&l.b);
  }
  for (Linear& l : model.autoencoder.decoder) {
    params.push_back(&l.w);
    params.push_back(&l.b);
  }
  params.push_back(&model.codebook.rho_hat);
  std::vector<AdamState> states(params.size());

  std::vector<std::int64_t> counts(static_cast<std::size_t>(config.n_codes), 0);

  auto run_step = [&](const Tensor& x, bool quantized, int epoch_label) -> double {
    int b = x.dim(0);
    ad::Tape tape;
    std::vector<ad::Var> bound;
    MountedNet enc;
    for (Linear& l : model.autoencoder.encoder) {
      ad::Var wv = tape.input(l.w), bv = tape.input(l.b);
      enc.layers.emplace_back(wv, bv);
      bound.push_back(wv);
      bound.push_back(bv);
    }
    MountedNet dec;
    for (Linear& l : model.autoencoder.decoder) {
      ad::Var wv = tape.input(l.w), bv = tape.input(l.b);
      dec.layers.emplace_back(wv, bv);
      bound.push_back(wv);
      bound.push_back(bv);
    }
    ad::Var cbv;
    if (quantized) {
      cbv = tape.input(model.codebook.rho_hat);
      bound.push_back(cbv);
    }

    ad::Var xc = tape.constant(x);
    ad::Var f = forward_net(tape, enc, xc, true);
    ad::Var loss;
    if (quantized) {
      // Copy: later tape ops may reallocate node storage and invalidate references.
      const Tensor f_val = tape.value(f);
      std::vector<int> idx(static_cast<std::size_t>(b));
      Tensor rho_sel({b, config.latent_dim});
      for (int i = 0; i < b; ++i) {
        int code = nearest_code(f_val.row_ptr(i), model.codebook.rho_hat);
        idx[static_cast<std::size_t>(i)] = code;
        ++counts[static_cast<std::size_t>(code)];
        const double* row = model.codebook.rho_hat.row_ptr(code);
        std::copy(row, row + config.latent_dim, rho_sel.row_ptr(i));
      }
      // Straight-through: decoder sees the selected codes, the encoder
      // receives the reconstruction gradient unchanged.
      Tensor st_delta = rho_sel;
      for (std::int64_t i = 0; i < st_delta.size(); ++i) st_delta.at(i) -= f_val.at(i);
      ad::Var dec_in = tape.add(f, tape.constant(st_delta));
      ad::Var xhat = forward_net(tape, dec, dec_in, false);
      ad::Var dr = tape.sub(xhat, xc);
      ad::Var l_recon = tape.scale(tape.sum_all(tape.mul(dr, dr)), 1.0 / b);
      ad::Var cb_sel = tape.gather_rows(cbv, idx);
      ad::Var dcb = tape.sub(cb_sel, tape.constant(f_val));
      ad::Var l_code = tape.scale(tape.sum_all(tape.mul(dcb, dcb)), 1.0 / b);
      ad::Var dcm = tape.sub(f, tape.constant(rho_sel));
      ad::Var l_commit = tape.scale(tape.sum_all(tape.mul(dcm, dcm)), config.commitment_cost / b);
      loss = tape.add(tape.add(l_recon, l_code), l_commit);
    } else {
      ad::Var xhat = forward_net(tape, dec, f, false);
      ad::Var dr = tape.sub(xhat, xc);
      loss = tape.scale(tape.sum_all(tape.mul(dr, dr)), 1.0 / b);
    }

    double loss_value = tape.scalar(loss);
    if (!std::isfinite(loss_value)) {
      throw NumericError("vq training diverged (non-finite loss) at epoch " + std::to_string(epoch_label));
    }
    tape.backward(loss);
    for (std::size_t i = 0; i < bound.size(); ++i) {
      adam_step(*params[i], tape.grad(bound[i]), states[i], config.lr);
    }
    return loss_value;
  };

  auto run_epoch = [&](bool quantized, int epoch_label) -> double {
    std::vector<int> perm = rng.permutation(n);
    double total = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      int end = std::min(n, start + config.batch_size);
      Tensor x = take_rows(table.rows, perm, start, end);
      total += run_step(x, quantized, epoch_label) * (end - start);
    }
    return total / n;
  };

  // Reconstruction-only warmup so codebook seeding sees a sensible latent space.
  run_epoch(false, -1);

  Tensor latents = model.autoencoder.encode_batch(table.rows);
  std::vector<int> seeds = kmeans_plus_plus_indices(latents, std::min(config.n_codes, n), rng);
  for (int i = 0; i < config.n_codes; ++i) {
    double* dst = model.codebook.rho_hat.row_ptr(i);
    if (i < static_cast<int>(seeds.size())) {
      const double* src = latents.row_ptr(seeds[static_cast<std::size_t>(i)]);
      std::copy(src, src + config.latent_dim, dst);
    } else {
      const double* src = latents.row_ptr(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n))));
      for (int j = 0; j < config.latent_dim; ++j) dst[j] = src[j] + 1e-4 * rng.normal();
    }
  }
  ensure_distinct_rows(model.codebook.rho_hat, rng);

  auto reseed_dead = [&]() {
    std::vector<int> dead;
    for (int i = 0; i < config.n_codes; ++i) {
      if (counts[static_cast<std::size_t>(i)] == 0) dead.push_back(i);
    }
    if (dead.empty()) return;
    int sample_n = std::min(512, n);
    std::vector<int> rows(static_cast<std::size_t>(sample_n));
    for (auto& r : rows) r = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    Tensor lat = model.autoencoder.encode_batch(take_rows(table.rows, rows, 0, sample_n));
    for (int code : dead) {
      const double* src = lat.row_ptr(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(sample_n))));
      double* dst = model.codebook.rho_hat.row_ptr(code);
      for (int j = 0; j < config.latent_dim; ++j) dst[j] = src[j] + 1e-4 * rng.normal();
    }
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(counts.begin(), counts.end(), 0);
    model.loss_trace.push_back(run_epoch(true, epoch));
    if (epoch + 1 < config.epochs) reseed_dead();
  }
  model.codebook.usage.assign(counts.begin(), counts.end());
  ensure_distinct_rows(model.codebook.rho_hat, rng);
  return model;
}

ConceptualVocab build_conceptual_vocab(const Vocabulary& vocab, const EmbeddingTable& table,
                                       const VqAutoencoder& ae, const Codebook& cb, int k) {
  if (vocab.size() != table.count()) {
    throw DimensionError("build_conceptual_vocab: vocab size " + std::to_string(vocab.size()) +
                         " != embedding count " + std::to_string(table.count()));
  }
  if (table.dim != ae.input_dim()) {
    throw DimensionError("build_conceptual_vocab: embedding dim " + std::to_string(table.dim) +
                         " != encoder input dim " + std::to_string(ae.input_dim()));
  }
  if (ae.latent_dim() != cb.dim()) {
    throw DimensionError("build_conceptual_vocab: encoder latent dim " + std::to_string(ae.latent_dim()) +
                         " != codebook dim " + std::to_string(cb.dim()));
  }
  if (k < 1 || k > cb.size()) {
    throw ParameterError("build_conceptual_vocab: expansion K=" + std::to_string(k) +
                         " outside [1, " + std::to_string(cb.size()) + "]");
  }
  ConceptualVocab cv;
  cv.expansion = k;
  cv.n_codes = cb.size();
  cv.codebook_hash = cb.content_hash();
  cv.words.reserve(static_cast<std::size_t>(vocab.size()));
  std::vector<double> x(static_cast<std::size_t>(table.dim));
  for (int w = 0; w < vocab.size(); ++w) {
    const double* row = table.rows.row_ptr(w);
    x.assign(row, row + table.dim);
    QuantizedTopK q = quantize_topk(ae.encode(x), cb, k);
    ConceptualWord word;
    word.word_id = w;
    word.code_indices = std::move(q.indices);
    word.rho = std::move(q.rho);
    cv.words.push_back(std::move(word));
  }
  return cv;
}

std::int64_t DocumentCodeHistogram::total() const {
  std::int64_t t = 0;
  for (int c : counts) t += c;
  return t;
}

DocumentCodeHistogram doc_code_histogram(const Document& doc, const ConceptualVocab& cvocab) {
  DocumentCodeHistogram h;
  h.counts.assign(static_cast<std::size_t>(cvocab.n_codes), 0);
  for (int tok : doc.tokens) {
    if (tok < 0 || tok >= cvocab.size()) {
      throw DimensionError("doc_code_histogram: token id " + std::to_string(tok) +
                           " outside conceptual vocabulary of size " + std::to_string(cvocab.size()) +
                           " (document " + doc.id + ")");
    }
    for (int code : cvocab.words[static_cast<std::size_t>(tok)].code_indices) {
      ++h.counts[static_cast<std::size_t>(code)];
    }
  }
  return h;
}

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& vocab, const ConceptualVocab& cvocab) {
  if (cvocab.size() != vocab.size()) {
    throw DimensionError("encode_corpus: conceptual vocabulary size " + std::to_string(cvocab.size()) +
                         " != vocabulary size " + std::to_string(vocab.size()));
  }
  EncodedCorpus enc;
  enc.n_codes = cvocab.n_codes;
  enc.n_words = vocab.size();
  enc.expansion = cvocab.expansion;
  enc.vocab_hash = vocab.content_hash();
  enc.codebook_hash = cvocab.codebook_hash;
  enc.label_names = corpus.label_names;
  enc.docs.reserve(corpus.documents.size());
  for (const Document& doc : corpus.documents) {
    EncodedDocument e;
    e.id = doc.id;
    e.label = doc.label;
    if (doc.empty()) {
      e.skipped = true;
      e.code_counts.assign(static_cast<std::size_t>(enc.n_codes), 0);
      e.word_counts.assign(static_cast<std::size_t>(enc.n_words), 0);
    } else {
      e.code_counts = doc_code_histogram(doc, cvocab).counts;
      e.word_counts = word_histogram(doc, vocab).counts;
    }
    enc.docs.push_back(std::move(e));
  }
  return enc;
}

namespace {
constexpr char kVqMagic[4] = {'T', 'V', 'Q', 'M'};
constexpr std::uint32_t kVqVersion = 1;

void write_net(BinWriter& w, const std::vector<Linear>& net) {
  w.u32(static_cast<std::uint32_t>(net.size()));
  for (const Linear& l : net) {
    w.tensor_f32(l.w);
    w.tensor_f32(l.b);
  }
}

std::vector<Linear> read_net(BinReader& r) {
  std::uint32_t count = r.u32();
  if (count > 64) throw FormatError("model file: unreasonable layer count");
  std::vector<Linear> net(count);
  for (auto& l : net) {
    l.w = r.tensor_f32();
    l.b = r.tensor_f32();
    if (l.w.ndim() != 2 || l.b.ndim() != 1 || l.w.dim(0) != l.b.dim(0)) {
      throw FormatError("model file: inconsistent layer shapes");
    }
  }
  return net;
}

void hash_net(Fnv1a& h, const std::vector<Linear>& net) {
  for (const Linear& l : net) {
    hash_tensor_f32(h, l.w);
    hash_tensor_f32(h, l.b);
  }
}
}  // namespace

std::uint64_t VqModel::content_hash() const {
  Fnv1a h;
  hash_net(h, autoencoder.encoder);
  hash_net(h, autoencoder.decoder);
  hash_tensor_f32(h, codebook.rho_hat);
  return h.digest();
}

void save_vq_model(const VqModel& model, const std::string& path, const std::string& config_echo) {
  BinWriter w(path);
  w.magic(kVqMagic);
  w.u32(kVqVersion);
  w.u32(static_cast<std::uint32_t>(model.config.n_codes));
  w.u32(static_cast<std::uint32_t>(model.config.latent_dim));
  w.u32(static_cast<std::uint32_t>(model.config.epochs));
  w.u32(static_cast<std::uint32_t>(model.config.batch_size));
  w.f64(model.config.lr);
  w.f64(model.config.commitment_cost);
  w.u64(model.config.seed);
  w.u32(static_cast<std::uint32_t>(model.config.encoder_hidden.size()));
  for (int h : model.config.encoder_hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(model.config.decoder_hidden.size()));
  for (int h : model.config.decoder_hidden) w.u32(static_cast<std::uint32_t>(h));
  w.str(config_echo);

  write_net(w, model.autoencoder.encoder);
  write_net(w, model.autoencoder.decoder);
  w.tensor_f32(model.codebook.rho_hat);
  w.u32(static_cast<std::uint32_t>(model.codebook.usage.size()));
  for (std::int64_t u : model.codebook.usage) w.u64(static_cast<std::uint64_t>(u));
  w.u32(static_cast<std::uint32_t>(model.loss_trace.size()));
  for (double v : model.loss_trace) w.f64(v);
  w.u64(model.content_hash());
  w.close();
}

VqModel load_vq_model(const std::string& path, std::string* config_echo) {
  BinReader r(path);
  r.expect_magic(kVqMagic, "vq model");
  std::uint32_t version = r.u32();
  if (version != kVqVersion) {
    throw FormatError(path + ": unsupported vq model version " + std::to_string(version));
  }
  VqModel model;
  model.config.n_codes = static_cast<int>(r.u32());
  model.config.latent_dim = static_cast<int>(r.u32());
  model.config.epochs = static_cast<int>(r.u32());
  model.config.batch_size = static_cast<int>(r.u32());
  model.config.lr = r.f64();
  model.config.commitment_cost = r.f64();
  model.config.seed = r.u64();
  model.config.encoder_hidden.resize(r.u32());
  for (auto& h : model.config.encoder_hidden) h = static_cast<int>(r.u32());
  model.config.decoder_hidden.resize(r.u32());
  for (auto& h : model.config.decoder_hidden) h = static_cast<int>(r.u32());
  std::string echo = r.str();
  if (config_echo) *config_echo = echo;

  model.autoencoder.encoder = read_net(r);
  model.autoencoder.decoder = read_net(r);
  model.codebook.rho_hat = r.tensor_f32();
  if (model.codebook.rho_hat.ndim() != 2 || model.codebook.rho_hat.dim(0) != model.config.n_codes ||
      model.codebook.rho_hat.dim(1) != model.config.latent_dim) {
    throw FormatError(path + ": codebook shape disagrees with recorded config");
  }
  std::uint32_t usage_n = r.u32();
  model.codebook.usage.resize(usage_n);
  for (auto& u : model.codebook.usage) u = static_cast<std::int64_t>(r.u64());
  std::uint32_t trace_n = r.u32();
  if (trace_n > (1u << 24)) throw FormatError(path + ": unreasonable loss trace length");
  model.loss_trace.resize(trace_n);
  for (auto& v : model.loss_trace) v = r.f64();
  std::uint64_t stored = r.u64();
  if (stored != model.content_hash()) {
    throw FormatError(path + ": content hash mismatch (file corrupt or truncated)");
  }
  return model;
}

}  // namespace tvq
