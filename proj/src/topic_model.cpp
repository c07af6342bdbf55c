#include "tvq/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>

#include "tvq/autodiff.hpp"
#include "tvq/binio.hpp"
#include "tvq/errors.hpp"
#include "tvq/hash.hpp"

namespace tvq {

namespace {

std::vector<double> proportions(const std::vector<int>& counts) {
  double total = 0.0;
  for (int c : counts) {
    if (c < 0) throw ParameterError("counts must be non-negative");
    total += c;
  }
  if (total <= 0.0) throw ParameterError("empty document: histogram sums to zero");
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] / total;
  return out;
}

void check_inference_shape(const TopicModel& model) {
  if (model.inference.empty()) throw DimensionError("topic model has no inference layers");
  if (model.inference.front().w.dim(1) != model.n_codes()) {
    throw DimensionError("inference net input dim != code count");
  }
  if (model.inference.back().w.dim(0) != 2 * model.k_topics()) {
    throw DimensionError("inference net output dim != 2 * topic count");
  }
}

}  // namespace

std::uint64_t TopicModel::content_hash() const {
  Fnv1a h;
  hash_tensor_f32(h, beta_hat);
  hash_tensor_f32(h, alpha);
  for (const Linear& l : inference) {
    hash_tensor_f32(h, l.w);
    hash_tensor_f32(h, l.b);
  }
  hash_tensor_f32(h, prior_mean);
  hash_tensor_f32(h, prior_logvar);
  return h.digest();
}

TopicModel init_topic_model(const TopicModelConfig& config, const Tensor& rho_hat,
                            int n_codes, int n_words, std::uint64_t vocab_hash,
                            std::uint64_t codebook_hash, Rng& rng) {
  if (config.k_topics < 2) throw ParameterError("k_topics must be at least 2");
  if (n_codes < 1 || n_words < 1) throw ParameterError("model needs at least one code and one word");
  if (rho_hat.ndim() != 2 || rho_hat.dim(0) != n_codes) {
    throw DimensionError("codebook shape disagrees with n_codes");
  }

  TopicModel model;
  model.config = config;
  model.rho_hat = rho_hat;
  model.vocab_hash = vocab_hash;
  model.codebook_hash = codebook_hash;

  int k = config.k_topics;
  {
    Linear l = make_linear(k, n_codes, rng);
    model.beta_hat = std::move(l.w);
  }
  {
    Linear l = make_linear(n_words, rho_hat.dim(1), rng);
    model.alpha = std::move(l.w);
  }
  int prev = n_codes;
  for (int h : config.inference_hidden) {
    model.inference.push_back(make_linear(h, prev, rng));
    prev = h;
  }
  model.inference.push_back(make_linear(2 * k, prev, rng));
  // Zeroed output layer: the untrained posterior is the prior mean, so an
  // untrained model infers the uniform mixture.
  model.inference.back().w.fill(0.0);
  model.inference.back().b.fill(0.0);

  model.prior_mean = Tensor({k});
  double a = config.resolved_concentration();
  double prior_var = (k - 1.0) / (a * k);
  model.prior_logvar = Tensor::full({k}, std::log(prior_var));
  return model;
}

ThetaSample infer_theta(const TopicModel& model, const std::vector<int>& code_counts,
                        const std::vector<double>& epsilon) {
  check_inference_shape(model);
  if (static_cast<int>(code_counts.size()) != model.n_codes()) {
    throw DimensionError("infer_theta: histogram length " + std::to_string(code_counts.size()) +
                         ", model has " + std::to_string(model.n_codes()) + " codes");
  }
  int k = model.k_topics();
  ThetaSample s;
  s.epsilon = epsilon;
  if (s.epsilon.empty()) {
    s.epsilon.assign(static_cast<std::size_t>(k), 0.0);
  } else if (static_cast<int>(s.epsilon.size()) != k) {
    throw DimensionError("infer_theta: epsilon length != topic count");
  }

  std::vector<double> cur = proportions(code_counts), next;
  for (std::size_t i = 0; i < model.inference.size(); ++i) {
    linear_forward(model.inference[i].w, model.inference[i].b, cur, next);
    if (i + 1 < model.inference.size()) {
      for (auto& v : next) v = std::tanh(v);
    }
    cur.swap(next);
  }
  s.params.gamma_m.assign(cur.begin(), cur.begin() + k);
  s.params.log_gamma_sigma.assign(cur.begin() + k, cur.end());
  for (auto& v : s.params.log_gamma_sigma) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);
  s.params.check();
  s.theta = softmax(reparameterize(s.params, s.epsilon));
  return s;
}

std::vector<double> doc_word_logits(const TopicModel& model, const std::vector<double>& theta) {
  int k = model.k_topics(), nc = model.n_codes(), nw = model.n_words(), d = model.latent_dim();
  if (static_cast<int>(theta.size()) != k) {
    throw DimensionError("doc_word_logits: theta length != topic count");
  }
  std::vector<double> mix(static_cast<std::size_t>(nc), 0.0);
  for (int t = 0; t < k; ++t) {
    const double* beta_row = model.beta_hat.row_ptr(t);
    double w = theta[static_cast<std::size_t>(t)];
    for (int n = 0; n < nc; ++n) mix[static_cast<std::size_t>(n)] += w * beta_row[n];
  }
  std::vector<double> emb(static_cast<std::size_t>(d), 0.0);
  for (int n = 0; n < nc; ++n) {
    const double* rho_row = model.rho_hat.row_ptr(n);
    double w = mix[static_cast<std::size_t>(n)];
    for (int j = 0; j < d; ++j) emb[static_cast<std::size_t>(j)] += w * rho_row[j];
  }
  std::vector<double> logits(static_cast<std::size_t>(nw), 0.0);
  for (int w = 0; w < nw; ++w) {
    const double* a_row = model.alpha.row_ptr(w);
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += a_row[j] * emb[static_cast<std::size_t>(j)];
    logits[static_cast<std::size_t>(w)] = acc;
  }
  return logits;
}

Tensor topic_word_logits(const TopicModel& model) {
  Tensor emb({model.k_topics(), model.latent_dim()});
  ad::gemm_nn(model.beta_hat, model.rho_hat, emb, false);
  Tensor logits({model.k_topics(), model.n_words()});
  ad::gemm_nt(emb, model.alpha, logits, false);
  return logits;
}

LossTerms loss_terms(const TopicModel& model, const std::vector<int>& code_counts,
                     const std::vector<int>& word_counts, const std::vector<double>& epsilon) {
  if (static_cast<int>(word_counts.size()) != model.n_words()) {
    throw DimensionError("loss_terms: word histogram length != vocabulary size");
  }
  double word_total = 0.0;
  for (int c : word_counts) word_total += c;
  if (word_total <= 0.0) throw ParameterError("empty document: word histogram sums to zero");

  ThetaSample s = infer_theta(model, code_counts, epsilon);

  LossTerms out;
  std::vector<double> prior_m(model.prior_mean.values());
  std::vector<double> prior_lv(model.prior_logvar.values());
  out.kl = gaussian_kl(s.params, prior_m, prior_lv);

  std::vector<double> mix(static_cast<std::size_t>(model.n_codes()), 0.0);
  for (int t = 0; t < model.k_topics(); ++t) {
    const double* beta_row = model.beta_hat.row_ptr(t);
    double w = s.theta[static_cast<std::size_t>(t)];
    for (int n = 0; n < model.n_codes(); ++n) mix[static_cast<std::size_t>(n)] += w * beta_row[n];
  }
  std::vector<double> code_ls = log_softmax(mix);
  for (int n = 0; n < model.n_codes(); ++n) {
    out.code -= code_counts[static_cast<std::size_t>(n)] * code_ls[static_cast<std::size_t>(n)];
  }

  std::vector<double> word_ls = log_softmax(doc_word_logits(model, s.theta));
  for (int w = 0; w < model.n_words(); ++w) {
    out.word -= word_counts[static_cast<std::size_t>(w)] * word_ls[static_cast<std::size_t>(w)];
  }
  return out;
}

double topic_training_loss(const TopicModel& model, const EncodedCorpus& data,
                           const std::vector<int>& doc_ids, const Tensor& eps,
                           std::vector<Tensor>* grads) {
  check_inference_shape(model);
  if (data.n_codes != model.n_codes() || data.n_words != model.n_words()) {
    throw DimensionError("topic_training_loss: corpus dimensions disagree with the model");
  }
  int b = static_cast<int>(doc_ids.size());
  if (b == 0) throw ParameterError("topic_training_loss: empty batch");
  int k = model.k_topics();
  if (eps.ndim() != 2 || eps.dim(0) != b || eps.dim(1) != k) {
    throw DimensionError("topic_training_loss: eps must be (batch x k_topics)");
  }

  Tensor cn({b, data.n_codes});
  Tensor c_counts({b, data.n_codes});
  Tensor v_counts({b, data.n_words});
  for (int i = 0; i < b; ++i) {
    int id = doc_ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= data.size()) throw ParameterError("topic_training_loss: doc id out of range");
    const EncodedDocument& doc = data.docs[static_cast<std::size_t>(id)];
    std::vector<double> p = proportions(doc.code_counts);
    for (int j = 0; j < data.n_codes; ++j) {
      c_counts.at(i, j) = doc.code_counts[static_cast<std::size_t>(j)];
      cn.at(i, j) = p[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < data.n_words; ++j) v_counts.at(i, j) = doc.word_counts[static_cast<std::size_t>(j)];
  }

  double prior_lv_sum = 0.0;
  Tensor inv_prior_var({k});
  for (int t = 0; t < k; ++t) {
    prior_lv_sum += model.prior_logvar.at(t);
    inv_prior_var.at(t) = std::exp(-model.prior_logvar.at(t));
  }

  ad::Tape tape;
  std::vector<ad::Var> bound;
  ad::Var beta_v = tape.input(model.beta_hat);
  ad::Var alpha_v = tape.input(model.alpha);
  bound.push_back(beta_v);
  bound.push_back(alpha_v);
  std::vector<std::pair<ad::Var, ad::Var>> net;
  for (const Linear& l : model.inference) {
    ad::Var wv = tape.input(l.w), bv = tape.input(l.b);
    net.emplace_back(wv, bv);
    bound.push_back(wv);
    bound.push_back(bv);
  }

  ad::Var h = tape.constant(cn);
  for (std::size_t li = 0; li < net.size(); ++li) {
    h = tape.add_row(tape.matmul_nt(h, net[li].first), net[li].second);
    if (li + 1 < net.size()) h = tape.tanh(h);
  }
  ad::Var gm = tape.slice_cols(h, 0, k);
  ad::Var lv = tape.clamp(tape.slice_cols(h, k, 2 * k), -kLogVarClamp, kLogVarClamp);

  ad::Var var_ratio = tape.exp(tape.sub_row(lv, tape.constant(model.prior_logvar)));
  ad::Var dm = tape.sub_row(gm, tape.constant(model.prior_mean));
  ad::Var mean_term = tape.mul_row(tape.mul(dm, dm), tape.constant(inv_prior_var));
  ad::Var kl_core = tape.add(tape.add(tape.sum_all(var_ratio), tape.sum_all(mean_term)),
                             tape.scale(tape.sum_all(lv), -1.0));
  ad::Var l_kl = tape.add_scalar(tape.scale(kl_core, 0.5), 0.5 * b * (prior_lv_sum - k));

  ad::Var sigma = tape.exp(tape.scale(lv, 0.5));
  ad::Var theta = tape.softmax_rows(tape.add(gm, tape.mul(sigma, tape.constant(eps))));

  ad::Var mix = tape.matmul(theta, beta_v);
  ad::Var l_c = tape.softmax_ce_rows(mix, c_counts);
  ad::Var emb = tape.matmul(mix, tape.constant(model.rho_hat));
  ad::Var word_logits = tape.matmul_nt(emb, alpha_v);
  ad::Var l_v = tape.softmax_ce_rows(word_logits, v_counts);

  ad::Var loss = tape.scale(tape.add(tape.add(l_kl, l_c), l_v), 1.0 / b);
  double loss_value = tape.scalar(loss);
  if (grads) {
    tape.backward(loss);
    grads->clear();
    grads->reserve(bound.size());
    for (ad::Var v : bound) grads->push_back(tape.grad(v));
  }
  return loss_value;
}

TopicTrainResult train_topic_model(const EncodedCorpus& data, const Tensor& rho_hat,
                                   const TopicModelConfig& config) {
  if (config.epochs < 0) throw ParameterError("train_topic_model: epochs must be non-negative");
  if (!(config.lr > 0.0)) throw ParameterError("train_topic_model: lr must be positive");
  if (config.batch_size < 1) throw ParameterError("train_topic_model: batch_size must be positive");
  if (data.docs.empty()) throw ParameterError("train_topic_model: empty dataset");

  std::vector<int> usable;
  int skipped = 0;
  for (int d = 0; d < data.size(); ++d) {
    const EncodedDocument& doc = data.docs[static_cast<std::size_t>(d)];
    std::int64_t ct = 0, wt = 0;
    for (int c : doc.code_counts) ct += c;
    for (int c : doc.word_counts) wt += c;
    if (doc.skipped || ct == 0 || wt == 0) {
      ++skipped;
      continue;
    }
    usable.push_back(d);
  }
  if (skipped > 0) {
    std::cerr << "warning: skipping " << skipped << " empty document(s) out of " << data.docs.size() << "\n";
  }
  if (usable.empty()) throw ParameterError("train_topic_model: every document is empty");

  Rng rng(config.seed);
  TopicTrainResult result;
  result.model = init_topic_model(config, rho_hat, data.n_codes, data.n_words,
                                  data.vocab_hash, data.codebook_hash, rng);
  TopicModel& model = result.model;
  int k = config.k_topics;
  int n = static_cast<int>(usable.size());

  std::vector<Tensor*> params = {&model.beta_hat, &model.alpha};
  for (Linear& l : model.inference) {
    params.push_back(&l.w);
    params.push_back(&l.b);
  }
  std::vector<AdamState> states(params.size());

  TopicModel checkpoint = model;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> perm = rng.permutation(n);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      int end = std::min(n, start + config.batch_size);
      int b = end - start;

      std::vector<int> ids(static_cast<std::size_t>(b));
      Tensor eps({b, k});
      for (int i = 0; i < b; ++i) {
        ids[static_cast<std::size_t>(i)] = usable[static_cast<std::size_t>(perm[static_cast<std::size_t>(start + i)])];
        for (int t = 0; t < k; ++t) eps.at(i, t) = rng.normal();
      }

      std::vector<Tensor> grads;
      double loss_value = topic_training_loss(model, data, ids, eps, &grads);
      if (!std::isfinite(loss_value)) {
        result.model = checkpoint;
        result.aborted = true;
        result.message = "non-finite loss at epoch " + std::to_string(epoch) +
                         "; model rolled back to end of epoch " + std::to_string(epoch - 1);
        return result;
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        adam_step(*params[i], grads[i], states[i], config.lr);
      }
      epoch_loss += loss_value * b;
    }
    result.trace.push_back(epoch_loss / n);
    checkpoint = model;
  }
  return result;
}

GeneratedDocument sample_bow(const TopicModel& model, const std::vector<double>& theta,
                             int n_words, Rng& rng) {
  if (n_words < 1) throw ParameterError("sample_bow: n_words must be at least 1");
  if (static_cast<int>(theta.size()) != model.k_topics()) {
    throw DimensionError("sample_bow: theta length != topic count");
  }
  Tensor logits = topic_word_logits(model);
  std::vector<std::vector<double>> topic_probs(static_cast<std::size_t>(model.k_topics()));
  GeneratedDocument doc;
  doc.words.reserve(static_cast<std::size_t>(n_words));
  doc.topics.reserve(static_cast<std::size_t>(n_words));
  for (int i = 0; i < n_words; ++i) {
    int z = rng.categorical(theta);
    auto& probs = topic_probs[static_cast<std::size_t>(z)];
    if (probs.empty()) {
      const double* row = logits.row_ptr(z);
      probs = softmax(std::vector<double>(row, row + model.n_words()));
    }
    doc.topics.push_back(z);
    doc.words.push_back(rng.categorical(probs));
  }
  return doc;
}

std::vector<int> top_words(const TopicModel& model, int topic, int n) {
  if (topic < 0 || topic >= model.k_topics()) {
    throw ParameterError("top_words: topic index out of range");
  }
  if (n < 1) throw ParameterError("top_words: n must be at least 1");
  if (n > model.n_words()) {
    std::cerr << "warning: top_words clipped from " << n << " to vocabulary size " << model.n_words() << "\n";
    n = model.n_words();
  }
  Tensor logits = topic_word_logits(model);
  const double* row = logits.row_ptr(topic);
  std::vector<int> ids(static_cast<std::size_t>(model.n_words()));
  for (int i = 0; i < model.n_words(); ++i) ids[static_cast<std::size_t>(i)] = i;
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  ids.resize(static_cast<std::size_t>(n));
  return ids;
}

namespace {
constexpr char kTopicMagic[4] = {'T', 'V', 'Q', 'T'};
constexpr std::uint32_t kTopicVersion = 1;
}  // namespace

void save_topic_model(const TopicModel& model, const std::string& path, const std::string& config_echo) {
  BinWriter w(path);
  w.magic(kTopicMagic);
  w.u32(kTopicVersion);
  w.u32(static_cast<std::uint32_t>(model.k_topics()));
  w.u32(static_cast<std::uint32_t>(model.n_codes()));
  w.u32(static_cast<std::uint32_t>(model.n_words()));
  w.u32(static_cast<std::uint32_t>(model.latent_dim()));
  w.u64(model.vocab_hash);
  w.u64(model.codebook_hash);
  w.u32(static_cast<std::uint32_t>(model.config.epochs));
  w.u32(static_cast<std::uint32_t>(model.config.batch_size));
  w.f64(model.config.lr);
  w.f64(model.config.prior_concentration);
  w.u64(model.config.seed);
  w.u32(static_cast<std::uint32_t>(model.config.inference_hidden.size()));
  for (int h : model.config.inference_hidden) w.u32(static_cast<std::uint32_t>(h));
  w.str(config_echo);

  w.tensor_f32(model.beta_hat);
  w.tensor_f32(model.alpha);
  w.u32(static_cast<std::uint32_t>(model.inference.size()));
  for (const Linear& l : model.inference) {
    w.tensor_f32(l.w);
    w.tensor_f32(l.b);
  }
  w.tensor_f32(model.prior_mean);
  w.tensor_f32(model.prior_logvar);
  w.u64(model.content_hash());
  w.close();
}

TopicModel load_topic_model(const std::string& path, const Vocabulary& vocab, const Codebook& cb,
                            std::string* config_echo) {
  BinReader r(path);
  r.expect_magic(kTopicMagic, "topic model");
  std::uint32_t version = r.u32();
  if (version != kTopicVersion) {
    throw FormatError(path + ": unsupported topic model version " + std::to_string(version));
  }
  TopicModel model;
  std::uint32_t k = r.u32();
  std::uint32_t nc = r.u32();
  std::uint32_t nw = r.u32();
  std::uint32_t latent = r.u32();
  model.vocab_hash = r.u64();
  model.codebook_hash = r.u64();
  model.config.k_topics = static_cast<int>(k);
  model.config.epochs = static_cast<int>(r.u32());
  model.config.batch_size = static_cast<int>(r.u32());
  model.config.lr = r.f64();
  model.config.prior_concentration = r.f64();
  model.config.seed = r.u64();
  model.config.inference_hidden.resize(r.u32());
  for (auto& h : model.config.inference_hidden) h = static_cast<int>(r.u32());
  std::string echo = r.str();
  if (config_echo) *config_echo = echo;

  model.beta_hat = r.tensor_f32();
  model.alpha = r.tensor_f32();
  std::uint32_t layer_count = r.u32();
  if (layer_count > 64) throw FormatError(path + ": unreasonable layer count");
  model.inference.resize(layer_count);
  for (auto& l : model.inference) {
    l.w = r.tensor_f32();
    l.b = r.tensor_f32();
  }
  model.prior_mean = r.tensor_f32();
  model.prior_logvar = r.tensor_f32();
  std::uint64_t stored = r.u64();
  if (stored != model.content_hash()) {
    throw FormatError(path + ": content hash mismatch (file corrupt or truncated)");
  }

  if (model.beta_hat.ndim() != 2 || model.beta_hat.dim(0) != static_cast<int>(k) ||
      model.beta_hat.dim(1) != static_cast<int>(nc) || model.alpha.ndim() != 2 ||
      model.alpha.dim(0) != static_cast<int>(nw) || model.alpha.dim(1) != static_cast<int>(latent)) {
    throw FormatError(path + ": tensor shapes disagree with recorded dimensions");
  }
  if (vocab.content_hash() != model.vocab_hash) {
    throw CompatibilityError(path + ": vocabulary hash mismatch; model was trained against a different vocabulary");
  }
  if (cb.content_hash() != model.codebook_hash) {
    throw CompatibilityError(path + ": codebook hash mismatch; model was trained against a different codebook");
  }
  if (cb.size() != static_cast<int>(nc) || cb.dim() != static_cast<int>(latent)) {
    throw CompatibilityError(path + ": codebook dimensions disagree with the model");
  }
  model.rho_hat = cb.rho_hat;
  return model;
}

}  // namespace tvq
