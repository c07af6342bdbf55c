#include "tvq/seq_prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "tvq/autodiff.hpp"
#include "tvq/binio.hpp"
#include "tvq/errors.hpp"
#include "tvq/hash.hpp"

namespace tvq {

using nlohmann::json;

void save_sequences(const SequenceDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  json header;
  header["n_codes"] = data.n_codes;
  header["length"] = data.length;
  header["label_names"] = data.label_names;
  out << header.dump() << "\n";
  for (const auto& seq : data.sequences) {
    json j;
    j["id"] = seq.id;
    j["indices"] = seq.indices;
    if (seq.label) j["label"] = data.label_names[static_cast<std::size_t>(*seq.label)];
    out << j.dump() << "\n";
  }
  if (!out) throw FormatError("write failed: " + path);
}

SequenceDataset load_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open sequence file: " + path);
  std::string line;
  int line_no = 0;
  auto parse_line = [&](const std::string& text) -> json {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
  };

  SequenceDataset data;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header line");
  ++line_no;
  json header = parse_line(line);
  if (!header.is_object() || !header.contains("n_codes") || !header.contains("length")) {
    throw FormatError(path + ":1: header must carry n_codes and length");
  }
  data.n_codes = header["n_codes"].get<int>();
  data.length = header["length"].get<int>();
  if (header.contains("label_names")) {
    data.label_names = header["label_names"].get<std::vector<std::string>>();
  }
  if (data.n_codes < 1 || data.length < 1) {
    throw FormatError(path + ":1: n_codes and length must be positive");
  }

  std::vector<std::string>& names = data.label_names;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line);
    if (!j.is_object() || !j.contains("id") || !j.contains("indices") || !j["indices"].is_array()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected {\"id\", \"indices\", ...}");
    }
    CodeSequence seq;
    seq.id = j["id"].get<std::string>();
    for (const auto& v : j["indices"]) {
      if (!v.is_number_unsigned()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": indices must be unsigned integers");
      }
      auto idx = v.get<std::uint64_t>();
      if (idx >= static_cast<std::uint64_t>(data.n_codes)) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": index " + std::to_string(idx) +
                          " out of range for " + std::to_string(data.n_codes) + " codes");
      }
      seq.indices.push_back(static_cast<int>(idx));
    }
    if (static_cast<int>(seq.indices.size()) != data.length) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": sequence length " +
                        std::to_string(seq.indices.size()) + " != declared length " +
                        std::to_string(data.length));
    }
    if (j.contains("label") && !j["label"].is_null()) {
      std::string name = j["label"].get<std::string>();
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": label '" + name + "' missing from header");
      }
      seq.label = static_cast<int>(it - names.begin());
    }
    data.sequences.push_back(std::move(seq));
  }
  if (data.sequences.empty()) throw FormatError(path + ": no sequences after header");
  return data;
}

std::vector<int> sequence_code_counts(const CodeSequence& seq, int n_codes) {
  std::vector<int> counts(static_cast<std::size_t>(n_codes), 0);
  for (int idx : seq.indices) {
    if (idx < 0 || idx >= n_codes) {
      throw DimensionError("sequence index " + std::to_string(idx) + " out of range");
    }
    ++counts[static_cast<std::size_t>(idx)];
  }
  return counts;
}

std::uint64_t SequencePrior::content_hash() const {
  Fnv1a h;
  hash_tensor_f32(h, code_emb);
  hash_tensor_f32(h, pos_emb);
  hash_tensor_f32(h, hist.w);
  hash_tensor_f32(h, hist.b);
  if (conditioned) hash_tensor_f32(h, topic_proj);
  hash_tensor_f32(h, head1.w);
  hash_tensor_f32(h, head1.b);
  hash_tensor_f32(h, head2.w);
  hash_tensor_f32(h, head2.b);
  return h.digest();
}

SequencePrior init_sequence_prior(const ArTrainConfig& config, int n_codes, int seq_length,
                                  int cond_dim, Rng& rng) {
  if (n_codes < 2) throw ParameterError("sequence prior needs at least 2 codes");
  if (seq_length < 1) throw ParameterError("sequence length must be positive");
  if (config.window < 1) throw ParameterError("context window must be at least 1");
  if (config.code_emb_dim < 1 || config.hidden_dim < 1) {
    throw ParameterError("prior embedding/hidden dims must be positive");
  }
  SequencePrior prior;
  prior.config = config;
  prior.window = config.window;
  prior.seq_length = seq_length;
  prior.conditioned = cond_dim > 0;
  int de = config.code_emb_dim;
  prior.code_emb = Tensor({n_codes, de});
  for (auto& v : prior.code_emb.values()) v = 0.05 * rng.normal();
  prior.pos_emb = Tensor({seq_length, de});
  for (auto& v : prior.pos_emb.values()) v = 0.05 * rng.normal();
  prior.hist = make_linear(de, config.window * de, rng);
  if (prior.conditioned) prior.topic_proj = make_linear(de, cond_dim, rng).w;
  prior.head1 = make_linear(config.hidden_dim, de, rng);
  prior.head2 = make_linear(n_codes, config.hidden_dim, rng);
  // Zero head => uniform logits, so the untrained NLL is exactly log(n_codes).
  prior.head2.w.fill(0.0);
  prior.head2.b.fill(0.0);
  return prior;
}

std::vector<double> topic_context_vector(const TopicModel& model, const std::vector<double>& theta) {
  if (static_cast<int>(theta.size()) != model.k_topics()) {
    throw DimensionError("topic_context_vector: theta length != topic count");
  }
  std::vector<double> mix(static_cast<std::size_t>(model.n_codes()), 0.0);
  for (int t = 0; t < model.k_topics(); ++t) {
    const double* row = model.beta_hat.row_ptr(t);
    double w = theta[static_cast<std::size_t>(t)];
    for (int n = 0; n < model.n_codes(); ++n) mix[static_cast<std::size_t>(n)] += w * row[n];
  }
  std::vector<double> cond(static_cast<std::size_t>(model.latent_dim()), 0.0);
  for (int n = 0; n < model.n_codes(); ++n) {
    const double* row = model.rho_hat.row_ptr(n);
    double w = mix[static_cast<std::size_t>(n)];
    for (int d = 0; d < model.latent_dim(); ++d) cond[static_cast<std::size_t>(d)] += w * row[d];
  }
  return cond;
}

namespace {

/// Shared context builder: x = hist.b + pos_emb[n] + cond_term + sum over
/// visible offsets of the matching column block of hist.w applied to the
/// embedding of the earlier index. Reads only indices[0..n).
void position_context(const SequencePrior& prior, const std::vector<int>& indices, int n,
                      const std::vector<double>& cond_term, std::vector<double>& x) {
  int de = prior.code_emb.dim(1);
  x.assign(static_cast<std::size_t>(de), 0.0);
  const double* pos = prior.pos_emb.row_ptr(n);
  for (int d = 0; d < de; ++d) {
    x[static_cast<std::size_t>(d)] =
        prior.hist.b.at(d) + pos[d] + (cond_term.empty() ? 0.0 : cond_term[static_cast<std::size_t>(d)]);
  }
  for (int j = 1; j <= prior.window && n - j >= 0; ++j) {
    int idx = indices[static_cast<std::size_t>(n - j)];
    const double* e = prior.code_emb.row_ptr(idx);
    int off = (j - 1) * de;
    for (int r = 0; r < de; ++r) {
      const double* wrow = prior.hist.w.row_ptr(r) + off;
      double acc = 0.0;
      for (int c = 0; c < de; ++c) acc += wrow[c] * e[c];
      x[static_cast<std::size_t>(r)] += acc;
    }
  }
}

void head_logits(const SequencePrior& prior, const std::vector<double>& x,
                 std::vector<double>& h1, std::vector<double>& logits) {
  linear_forward(prior.head1.w, prior.head1.b, x, h1);
  for (auto& v : h1) v = std::tanh(v);
  linear_forward(prior.head2.w, prior.head2.b, h1, logits);
}

std::vector<double> projected_cond(const SequencePrior& prior, const std::vector<double>& cond) {
  if (!prior.conditioned) {
    if (!cond.empty()) throw ParameterError("unconditioned prior given a conditioning vector");
    return {};
  }
  if (static_cast<int>(cond.size()) != prior.cond_dim()) {
    throw DimensionError("conditioning vector length " + std::to_string(cond.size()) + ", prior expects " +
                         std::to_string(prior.cond_dim()));
  }
  std::vector<double> term;
  linear_forward(prior.topic_proj, Tensor({prior.code_emb.dim(1)}), cond, term);
  return term;
}

void check_indices(const SequencePrior& prior, const std::vector<int>& indices) {
  if (static_cast<int>(indices.size()) != prior.seq_length) {
    throw DimensionError("sequence length " + std::to_string(indices.size()) + ", prior expects " +
                         std::to_string(prior.seq_length));
  }
  for (int idx : indices) {
    if (idx < 0 || idx >= prior.n_codes()) {
      throw DimensionError("sequence index " + std::to_string(idx) + " out of range for " +
                           std::to_string(prior.n_codes()) + " codes");
    }
  }
}

}  // namespace

Tensor ar_logits(const SequencePrior& prior, const std::vector<int>& indices,
                 const std::vector<double>& cond) {
  check_indices(prior, indices);
  std::vector<double> cond_term = projected_cond(prior, cond);
  Tensor out({prior.seq_length, prior.n_codes()});
  std::vector<double> x, h1, logits;
  for (int n = 0; n < prior.seq_length; ++n) {
    position_context(prior, indices, n, cond_term, x);
    head_logits(prior, x, h1, logits);
    std::copy(logits.begin(), logits.end(), out.row_ptr(n));
  }
  return out;
}

double ar_nll(const SequencePrior& prior, const CodeSequence& seq, const std::vector<double>& cond) {
  Tensor logits = ar_logits(prior, seq.indices, cond);
  double total = 0.0;
  for (int n = 0; n < prior.seq_length; ++n) {
    const double* row = logits.row_ptr(n);
    std::vector<double> ls = log_softmax(std::vector<double>(row, row + prior.n_codes()));
    total -= ls[static_cast<std::size_t>(seq.indices[static_cast<std::size_t>(n)])];
  }
  return total / prior.seq_length;
}

double ar_nll(const SequencePrior& prior, const CodeSequence& seq, const std::vector<double>& theta,
              const TopicModel& model) {
  return ar_nll(prior, seq, topic_context_vector(model, theta));
}

double ar_training_loss(const SequencePrior& prior, const TopicModel* topic, bool joint,
                        const SequenceDataset& data, const std::vector<int>& sequence_ids,
                        const Tensor& eps, std::vector<Tensor>* grads) {
  if (prior.conditioned != (topic != nullptr)) {
    throw ParameterError(prior.conditioned
                             ? "ar_training_loss: conditioned prior needs a topic model"
                             : "ar_training_loss: unconditioned prior takes no topic model");
  }
  if (joint && !prior.conditioned) {
    throw ParameterError("ar_training_loss: joint mode requires a conditioned prior");
  }
  if (data.n_codes != prior.n_codes()) {
    throw DimensionError("ar_training_loss: dataset code count disagrees with the prior");
  }
  if (data.length != prior.seq_length) {
    throw DimensionError("ar_training_loss: dataset length disagrees with the prior");
  }
  int b = static_cast<int>(sequence_ids.size());
  if (b == 0) throw ParameterError("ar_training_loss: empty batch");
  int k = topic ? topic->k_topics() : 0;
  if (topic) {
    if (topic->n_codes() != data.n_codes) {
      throw DimensionError("ar_training_loss: topic model code count disagrees with the dataset");
    }
    if (topic->latent_dim() != prior.cond_dim()) {
      throw DimensionError("ar_training_loss: topic latent dim disagrees with the prior");
    }
    if (eps.ndim() != 2 || eps.dim(0) != b || eps.dim(1) != k) {
      throw DimensionError("ar_training_loss: eps must be (batch x k_topics)");
    }
  }

  int seq_len = data.length;
  int window = prior.window;
  int rows = b * seq_len;

  std::vector<std::vector<int>> gather_idx(static_cast<std::size_t>(window));
  for (auto& g : gather_idx) g.assign(static_cast<std::size_t>(rows), -1);
  std::vector<int> pos_idx(static_cast<std::size_t>(rows));
  std::vector<int> expand_idx(static_cast<std::size_t>(rows));
  std::vector<int> targets(static_cast<std::size_t>(rows));
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(b));
  Tensor cn, c_counts;
  if (topic) {
    cn = Tensor({b, data.n_codes});
    c_counts = Tensor({b, data.n_codes});
  }
  for (int i = 0; i < b; ++i) {
    int id = sequence_ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= data.size()) throw ParameterError("ar_training_loss: sequence id out of range");
    const CodeSequence& seq = data.sequences[static_cast<std::size_t>(id)];
    if (static_cast<int>(seq.indices.size()) != seq_len) {
      throw DimensionError("ar_training_loss: sequence '" + seq.id + "' length mismatch");
    }
    for (int pos = 0; pos < seq_len; ++pos) {
      int c = seq.indices[static_cast<std::size_t>(pos)];
      if (c < 0 || c >= data.n_codes) {
        throw ParameterError("ar_training_loss: sequence '" + seq.id + "' has a code out of range");
      }
      int r = i * seq_len + pos;
      pos_idx[static_cast<std::size_t>(r)] = pos;
      expand_idx[static_cast<std::size_t>(r)] = i;
      targets[static_cast<std::size_t>(r)] = c;
      for (int j = 1; j <= window; ++j) {
        if (pos - j >= 0) {
          gather_idx[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(r)] =
              seq.indices[static_cast<std::size_t>(pos - j)];
        }
      }
    }
    if (topic) {
      counts[static_cast<std::size_t>(i)] = sequence_code_counts(seq, data.n_codes);
      for (int j = 0; j < data.n_codes; ++j) {
        int c = counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        c_counts.at(i, j) = c;
        cn.at(i, j) = static_cast<double>(c) / seq_len;
      }
    }
  }

  double prior_lv_sum = 0.0;
  Tensor inv_prior_var;
  if (topic) {
    inv_prior_var = Tensor({k});
    for (int t = 0; t < k; ++t) {
      prior_lv_sum += topic->prior_logvar.at(t);
      inv_prior_var.at(t) = std::exp(-topic->prior_logvar.at(t));
    }
  }

  ad::Tape tape;
  std::vector<ad::Var> bound;
  ad::Var ev = tape.input(prior.code_emb);
  ad::Var pv = tape.input(prior.pos_emb);
  ad::Var whv = tape.input(prior.hist.w);
  ad::Var bhv = tape.input(prior.hist.b);
  ad::Var h1w = tape.input(prior.head1.w);
  ad::Var h1b = tape.input(prior.head1.b);
  ad::Var h2w = tape.input(prior.head2.w);
  ad::Var h2b = tape.input(prior.head2.b);
  bound.insert(bound.end(), {ev, pv, whv, bhv, h1w, h1b, h2w, h2b});
  ad::Var ptv;
  if (topic) {
    ptv = tape.input(prior.topic_proj);
    bound.push_back(ptv);
  }

  std::vector<ad::Var> blocks;
  blocks.reserve(static_cast<std::size_t>(window));
  for (int j = 0; j < window; ++j) {
    blocks.push_back(tape.gather_rows(ev, gather_idx[static_cast<std::size_t>(j)]));
  }
  ad::Var ctx = window == 1 ? blocks[0] : tape.concat_cols(blocks);
  ad::Var x = tape.add_row(tape.matmul_nt(ctx, whv), bhv);
  x = tape.add(x, tape.gather_rows(pv, pos_idx));

  ad::Var l_kl, l_c;
  double frozen_extra = 0.0;
  if (topic) {
    if (joint) {
      ad::Var beta_v = tape.input(topic->beta_hat);
      bound.push_back(beta_v);
      std::vector<std::pair<ad::Var, ad::Var>> net;
      for (const Linear& l : topic->inference) {
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
      ad::Var var_ratio = tape.exp(tape.sub_row(lv, tape.constant(topic->prior_logvar)));
      ad::Var dm = tape.sub_row(gm, tape.constant(topic->prior_mean));
      ad::Var mean_term = tape.mul_row(tape.mul(dm, dm), tape.constant(inv_prior_var));
      ad::Var kl_core = tape.add(tape.add(tape.sum_all(var_ratio), tape.sum_all(mean_term)),
                                 tape.scale(tape.sum_all(lv), -1.0));
      l_kl = tape.add_scalar(tape.scale(kl_core, 0.5), 0.5 * b * (prior_lv_sum - k));
      ad::Var sigma = tape.exp(tape.scale(lv, 0.5));
      ad::Var theta = tape.softmax_rows(tape.add(gm, tape.mul(sigma, tape.constant(eps))));
      ad::Var mix = tape.matmul(theta, beta_v);
      l_c = tape.softmax_ce_rows(mix, c_counts);
      ad::Var cond = tape.matmul(mix, tape.constant(topic->rho_hat));
      ad::Var proj = tape.matmul_nt(cond, ptv);
      x = tape.add(x, tape.gather_rows(proj, expand_idx));
    } else {
      // Frozen topic side: theta sampled forward-only; its loss terms are
      // constants added to the reported value.
      Tensor cond_rows({b, topic->latent_dim()});
      std::vector<double> prior_m(topic->prior_mean.values());
      std::vector<double> prior_lv(topic->prior_logvar.values());
      for (int i = 0; i < b; ++i) {
        const std::vector<int>& cnt = counts[static_cast<std::size_t>(i)];
        std::vector<double> e(static_cast<std::size_t>(k));
        for (int t = 0; t < k; ++t) e[static_cast<std::size_t>(t)] = eps.at(i, t);
        ThetaSample s = infer_theta(*topic, cnt, e);
        std::vector<double> cond = topic_context_vector(*topic, s.theta);
        std::copy(cond.begin(), cond.end(), cond_rows.row_ptr(i));
        frozen_extra += gaussian_kl(s.params, prior_m, prior_lv);
        std::vector<double> mix(static_cast<std::size_t>(data.n_codes), 0.0);
        for (int t = 0; t < k; ++t) {
          const double* row = topic->beta_hat.row_ptr(t);
          double w = s.theta[static_cast<std::size_t>(t)];
          for (int c = 0; c < data.n_codes; ++c) mix[static_cast<std::size_t>(c)] += w * row[c];
        }
        std::vector<double> ls = log_softmax(mix);
        for (int c = 0; c < data.n_codes; ++c) {
          frozen_extra -= cnt[static_cast<std::size_t>(c)] * ls[static_cast<std::size_t>(c)];
        }
      }
      ad::Var proj = tape.matmul_nt(tape.constant(cond_rows), ptv);
      x = tape.add(x, tape.gather_rows(proj, expand_idx));
    }
  }

  ad::Var h1 = tape.tanh(tape.add_row(tape.matmul_nt(x, h1w), h1b));
  ad::Var logits = tape.add_row(tape.matmul_nt(h1, h2w), h2b);
  ad::Var ce = tape.softmax_ce_rows_idx(logits, targets);

  ad::Var loss;
  if (joint) {
    loss = tape.scale(tape.add(tape.add(l_kl, l_c), ce), 1.0 / b);
  } else {
    loss = tape.scale(ce, 1.0 / b);
  }
  double loss_value = tape.scalar(loss) + frozen_extra / b;
  if (grads) {
    tape.backward(loss);
    grads->clear();
    grads->reserve(bound.size());
    for (ad::Var v : bound) grads->push_back(tape.grad(v));
  }
  return loss_value;
}

ArTrainResult train_ar(const SequenceDataset& data, const std::optional<TopicModel>& topic,
                       const ArTrainConfig& config) {
  if (data.sequences.empty()) throw ParameterError("train_ar: empty dataset");
  if (data.n_codes < 2) throw ParameterError("train_ar: dataset needs at least 2 codes");
  if (config.epochs < 0) throw ParameterError("train_ar: epochs must be non-negative");
  if (!(config.lr > 0.0)) throw ParameterError("train_ar: lr must be positive");
  if (config.batch_size < 1) throw ParameterError("train_ar: batch_size must be positive");
  for (const auto& seq : data.sequences) {
    if (static_cast<int>(seq.indices.size()) != data.length) {
      throw DimensionError("train_ar: sequence '" + seq.id + "' length mismatch");
    }
  }

  Rng rng(config.seed);
  ArTrainResult result;
  TopicModel& tm = result.topic;
  if (config.conditioned) {
    if (topic.has_value()) {
      if (topic->n_codes() != data.n_codes) {
        throw DimensionError("train_ar: topic model has " + std::to_string(topic->n_codes()) +
                             " codes, dataset has " + std::to_string(data.n_codes));
      }
      tm = *topic;
    } else {
      // Sequence-only training: the codebook embedding is the identity, so
      // the conditioning vector is theta . beta_hat directly. The word head
      // is initialized but unused.
      Tensor identity({data.n_codes, data.n_codes});
      for (int i = 0; i < data.n_codes; ++i) identity.at(i, i) = 1.0;
      Codebook cb;
      cb.rho_hat = identity;
      TopicModelConfig tc;
      tc.k_topics = config.k_topics;
      tc.epochs = config.epochs;
      tc.lr = config.lr;
      tc.batch_size = config.batch_size;
      tc.seed = config.seed;
      tm = init_topic_model(tc, identity, data.n_codes, data.n_codes, 0, cb.content_hash(), rng);
    }
    result.has_topic = true;
  }
  bool joint = config.conditioned && config.joint;
  int cond_dim = config.conditioned ? tm.latent_dim() : 0;
  result.prior = init_sequence_prior(config, data.n_codes, data.length, cond_dim, rng);
  SequencePrior& prior = result.prior;

  int n = data.size();
  int k = config.conditioned ? tm.k_topics() : 0;

  std::vector<Tensor*> params = {&prior.code_emb, &prior.pos_emb, &prior.hist.w, &prior.hist.b,
                                 &prior.head1.w, &prior.head1.b, &prior.head2.w, &prior.head2.b};
  if (config.conditioned) params.push_back(&prior.topic_proj);
  if (joint) {
    params.push_back(&tm.beta_hat);
    for (Linear& l : tm.inference) {
      params.push_back(&l.w);
      params.push_back(&l.b);
    }
  }
  std::vector<AdamState> states(params.size());

  SequencePrior prior_ckpt = prior;
  TopicModel tm_ckpt = tm;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> perm = rng.permutation(n);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      int end = std::min(n, start + config.batch_size);
      int b = end - start;

      std::vector<int> ids(static_cast<std::size_t>(b));
      Tensor eps;
      if (config.conditioned) eps = Tensor({b, k});
      for (int i = 0; i < b; ++i) {
        ids[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(start + i)];
        if (config.conditioned) {
          for (int t = 0; t < k; ++t) eps.at(i, t) = rng.normal();
        }
      }

      std::vector<Tensor> grads;
      double loss_value =
          ar_training_loss(prior, config.conditioned ? &tm : nullptr, joint, data, ids, eps, &grads);
      if (!std::isfinite(loss_value)) {
        result.prior = prior_ckpt;
        result.topic = tm_ckpt;
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
    prior_ckpt = prior;
    tm_ckpt = tm;
  }
  if (config.conditioned) prior.topic_hash = tm.content_hash();
  return result;
}

SampledSequence sample_sequence(const SequencePrior& prior, const std::vector<double>& cond, Rng& rng) {
  std::vector<double> cond_term = projected_cond(prior, cond);
  SampledSequence out;
  out.sequence.id = "sampled";
  out.sequence.indices.reserve(static_cast<std::size_t>(prior.seq_length));
  std::vector<double> x, h1, logits;
  for (int n = 0; n < prior.seq_length; ++n) {
    position_context(prior, out.sequence.indices, n, cond_term, x);
    head_logits(prior, x, h1, logits);
    std::vector<double> ls = log_softmax(logits);
    std::vector<double> probs(ls.size());
    for (std::size_t i = 0; i < ls.size(); ++i) probs[i] = std::exp(ls[i]);
    int z = rng.categorical(probs);
    out.sequence.indices.push_back(z);
    out.step_log_prob.push_back(ls[static_cast<std::size_t>(z)]);
  }
  return out;
}

SampledSequence sample_sequence(const SequencePrior& prior, const std::vector<double>& theta,
                                const TopicModel& model, Rng& rng) {
  return sample_sequence(prior, topic_context_vector(model, theta), rng);
}

std::vector<std::vector<double>> decode_sequence(const CodeSequence& seq, const Codebook& cb,
                                                 const VqAutoencoder& ae) {
  if (ae.latent_dim() != cb.dim()) {
    throw DimensionError("decode_sequence: decoder latent dim != codebook dim");
  }
  std::vector<std::vector<double>> out;
  out.reserve(seq.indices.size());
  for (int idx : seq.indices) {
    if (idx < 0 || idx >= cb.size()) {
      throw DimensionError("decode_sequence: index " + std::to_string(idx) + " out of range");
    }
    const double* row = cb.rho_hat.row_ptr(idx);
    out.push_back(ae.decode(std::vector<double>(row, row + cb.dim())));
  }
  return out;
}

void require_topic_compat(const SequencePrior& prior, const TopicModel& model) {
  if (!prior.conditioned) return;
  if (prior.topic_hash != model.content_hash()) {
    throw CompatibilityError("sequence prior was trained against a different topic model");
  }
}

namespace {
constexpr char kPriorMagic[4] = {'T', 'V', 'Q', 'A'};
constexpr std::uint32_t kPriorVersion = 1;
}  // namespace

void save_sequence_prior(const SequencePrior& prior, const std::string& path, const std::string& config_echo) {
  BinWriter w(path);
  w.magic(kPriorMagic);
  w.u32(kPriorVersion);
  w.u32(prior.conditioned ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(prior.window));
  w.u32(static_cast<std::uint32_t>(prior.seq_length));
  w.u32(static_cast<std::uint32_t>(prior.n_codes()));
  w.u32(static_cast<std::uint32_t>(prior.code_emb.dim(1)));
  w.u32(static_cast<std::uint32_t>(prior.head1.w.dim(0)));
  w.u32(static_cast<std::uint32_t>(prior.conditioned ? prior.cond_dim() : 0));
  w.u64(prior.topic_hash);
  w.u32(static_cast<std::uint32_t>(prior.config.epochs));
  w.u32(static_cast<std::uint32_t>(prior.config.batch_size));
  w.f64(prior.config.lr);
  w.u64(prior.config.seed);
  w.u32(prior.config.joint ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(prior.config.k_topics));
  w.str(config_echo);

  w.tensor_f32(prior.code_emb);
  w.tensor_f32(prior.pos_emb);
  w.tensor_f32(prior.hist.w);
  w.tensor_f32(prior.hist.b);
  if (prior.conditioned) w.tensor_f32(prior.topic_proj);
  w.tensor_f32(prior.head1.w);
  w.tensor_f32(prior.head1.b);
  w.tensor_f32(prior.head2.w);
  w.tensor_f32(prior.head2.b);
  w.u64(prior.content_hash());
  w.close();
}

SequencePrior load_sequence_prior(const std::string& path, std::string* config_echo) {
  BinReader r(path);
  r.expect_magic(kPriorMagic, "sequence prior");
  std::uint32_t version = r.u32();
  if (version != kPriorVersion) {
    throw FormatError(path + ": unsupported sequence prior version " + std::to_string(version));
  }
  SequencePrior prior;
  prior.conditioned = r.u32() != 0;
  prior.window = static_cast<int>(r.u32());
  prior.seq_length = static_cast<int>(r.u32());
  std::uint32_t n_codes = r.u32();
  std::uint32_t de = r.u32();
  std::uint32_t dh = r.u32();
  std::uint32_t cond_dim = r.u32();
  prior.topic_hash = r.u64();
  prior.config.window = prior.window;
  prior.config.conditioned = prior.conditioned;
  prior.config.code_emb_dim = static_cast<int>(de);
  prior.config.hidden_dim = static_cast<int>(dh);
  prior.config.epochs = static_cast<int>(r.u32());
  prior.config.batch_size = static_cast<int>(r.u32());
  prior.config.lr = r.f64();
  prior.config.seed = r.u64();
  prior.config.joint = r.u32() != 0;
  prior.config.k_topics = static_cast<int>(r.u32());
  std::string echo = r.str();
  if (config_echo) *config_echo = echo;

  prior.code_emb = r.tensor_f32();
  prior.pos_emb = r.tensor_f32();
  prior.hist.w = r.tensor_f32();
  prior.hist.b = r.tensor_f32();
  if (prior.conditioned) prior.topic_proj = r.tensor_f32();
  prior.head1.w = r.tensor_f32();
  prior.head1.b = r.tensor_f32();
  prior.head2.w = r.tensor_f32();
  prior.head2.b = r.tensor_f32();
  std::uint64_t stored = r.u64();
  if (stored != prior.content_hash()) {
    throw FormatError(path + ": content hash mismatch (file corrupt or truncated)");
  }
  if (prior.code_emb.ndim() != 2 || prior.code_emb.dim(0) != static_cast<int>(n_codes) ||
      prior.code_emb.dim(1) != static_cast<int>(de) || prior.pos_emb.dim(0) != prior.seq_length ||
      (prior.conditioned && prior.cond_dim() != static_cast<int>(cond_dim))) {
    throw FormatError(path + ": tensor shapes disagree with recorded dimensions");
  }
  return prior;
}

}  // namespace tvq
