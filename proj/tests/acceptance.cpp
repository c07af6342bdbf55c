// Acceptance checks for the quantized topic-modeling pipeline. Each check
// prints exactly one [PASS]/[FAIL] line; the process exits non-zero if any
// check fails. argv[1] must be the path to the command-line binary (used by
// the determinism check).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "tvq/corpus.hpp"
#include "tvq/metrics.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"
#include "tvq/seq_prior.hpp"
#include "tvq/synth.hpp"
#include "tvq/topic_model.hpp"
#include "tvq/vq.hpp"

using namespace tvq;

namespace {

std::string g_cli_path;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Nearest-code quantization matches an independent brute-force scan.

double sqd(const std::vector<double>& a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<int> brute_topk(const std::vector<double>& f, const Codebook& cb, int k) {
  std::vector<std::pair<double, int>> all;
  for (int i = 0; i < cb.size(); ++i) all.emplace_back(sqd(f, cb.rho_hat.row_ptr(i)), i);
  std::sort(all.begin(), all.end());
  std::vector<int> idx;
  for (int i = 0; i < k; ++i) idx.push_back(all[static_cast<std::size_t>(i)].second);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Check check_quantization() {
  Check c;
  const int dim = 16;
  Rng rng(2024);
  for (int n_codes : {1, 10, 300}) {
    Codebook cb;
    cb.rho_hat = Tensor({n_codes, dim});
    for (auto& v : cb.rho_hat.values()) v = rng.normal();
    // Plant exact duplicates in the mid-size codebook to exercise ties.
    if (n_codes == 10) {
      std::copy(cb.rho_hat.row_ptr(2), cb.rho_hat.row_ptr(2) + dim, cb.rho_hat.row_ptr(7));
    }
    cb.usage.assign(static_cast<std::size_t>(n_codes), 0);

    for (int q = 0; q < 1000; ++q) {
      std::vector<double> f(dim);
      for (auto& v : f) v = rng.normal();
      if (q % 7 == 0) {
        int r = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_codes)));
        f.assign(cb.rho_hat.row_ptr(r), cb.rho_hat.row_ptr(r) + dim);
      }

      if (quantize(f, cb).index != brute_topk(f, cb, 1)[0]) {
        c.require(false, "one-hot mismatch at n_codes=" + std::to_string(n_codes));
        return c;
      }
      for (int k : {1, 3, 5}) {
        if (k > n_codes) continue;
        QuantizedTopK t = quantize_topk(f, cb, k);
        if (t.indices != brute_topk(f, cb, k)) {
          c.require(false, "top-" + std::to_string(k) + " mismatch at n_codes=" + std::to_string(n_codes));
          return c;
        }
        std::vector<double> rho(dim, 0.0);
        int bits = 0;
        for (int i = 0; i < n_codes; ++i) bits += t.code[static_cast<std::size_t>(i)];
        for (int idx : t.indices) {
          for (int j = 0; j < dim; ++j) rho[static_cast<std::size_t>(j)] += cb.rho_hat.at(idx, j);
        }
        if (bits != k || rho != t.rho) {
          c.require(false, "multi-hot/rho mismatch at n_codes=" + std::to_string(n_codes));
          return c;
        }
      }
    }
  }
  c.note("3 codebook sizes x 1000 queries, one-hot and top-{1,3,5} all exact");
  return c;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients of both training losses match finite differences.

Check check_gradients() {
  Check c;
  Rng rng(99);

  // Topic side: 5 documents, 12 words, 8 codes, 3 topics.
  EncodedCorpus data;
  data.n_codes = 8;
  data.n_words = 12;
  data.expansion = 2;
  for (int d = 0; d < 5; ++d) {
    EncodedDocument doc;
    doc.id = "d" + std::to_string(d);
    doc.code_counts.assign(8, 0);
    doc.word_counts.assign(12, 0);
    for (int t = 0; t < 6; ++t) {
      ++doc.word_counts[rng.uniform_index(12)];
      ++doc.code_counts[rng.uniform_index(8)];
      ++doc.code_counts[rng.uniform_index(8)];
    }
    data.docs.push_back(std::move(doc));
  }
  Tensor rho({8, 6});
  for (auto& v : rho.values()) v = rng.normal();

  TopicModelConfig cfg;
  cfg.k_topics = 3;
  cfg.inference_hidden = {16};
  TopicModel model = init_topic_model(cfg, rho, 8, 12, 0, 0, rng);
  for (Linear& l : model.inference) {
    for (auto& v : l.w.values()) v += 0.2 * rng.normal();
    for (auto& v : l.b.values()) v += 0.2 * rng.normal();
  }

  Tensor eps({5, 3});
  for (auto& v : eps.values()) v = rng.normal();
  std::vector<int> ids = {0, 1, 2, 3, 4};

  std::vector<Tensor> params = {model.beta_hat, model.alpha};
  for (const Linear& l : model.inference) {
    params.push_back(l.w);
    params.push_back(l.b);
  }
  TopicModel probe = model;
  auto topic_fn = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    probe.beta_hat = ps[0];
    probe.alpha = ps[1];
    for (std::size_t i = 0; i < probe.inference.size(); ++i) {
      probe.inference[i].w = ps[2 + 2 * i];
      probe.inference[i].b = ps[3 + 2 * i];
    }
    return topic_training_loss(probe, data, ids, eps, grads);
  };
  Rng check_rng(7);
  double topic_err = grad_check(topic_fn, params, 1e-5, 30, check_rng);
  c.require(topic_err < 1e-4, "topic-loss gradient error " + fmt(topic_err));

  // Sequence side: joint loss over length-6 sequences.
  SequenceDataset seqs;
  seqs.n_codes = 8;
  seqs.length = 6;
  for (int i = 0; i < 4; ++i) {
    CodeSequence s;
    s.id = "s" + std::to_string(i);
    for (int t = 0; t < 6; ++t) s.indices.push_back(static_cast<int>(rng.uniform_index(8)));
    seqs.sequences.push_back(std::move(s));
  }

  TopicModel topic = init_topic_model(cfg, rho, 8, 12, 0, 0, rng);
  for (Linear& l : topic.inference) {
    for (auto& v : l.w.values()) v += 0.2 * rng.normal();
    for (auto& v : l.b.values()) v += 0.2 * rng.normal();
  }
  ArTrainConfig acfg;
  acfg.window = 3;
  acfg.code_emb_dim = 4;
  acfg.hidden_dim = 5;
  acfg.conditioned = true;
  acfg.joint = true;
  SequencePrior prior = init_sequence_prior(acfg, 8, 6, rho.dim(1), rng);
  for (auto& v : prior.head2.w.values()) v += 0.2 * rng.normal();
  for (auto& v : prior.head2.b.values()) v += 0.2 * rng.normal();

  Tensor aeps({4, 3});
  for (auto& v : aeps.values()) v = rng.normal();
  std::vector<int> sids = {0, 1, 2, 3};

  std::vector<Tensor> aparams = {prior.code_emb, prior.pos_emb, prior.hist.w, prior.hist.b,
                                 prior.head1.w,  prior.head1.b, prior.head2.w, prior.head2.b,
                                 prior.topic_proj, topic.beta_hat};
  for (const Linear& l : topic.inference) {
    aparams.push_back(l.w);
    aparams.push_back(l.b);
  }
  SequencePrior pprobe = prior;
  TopicModel tprobe = topic;
  auto seq_fn = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    pprobe.code_emb = ps[0];
    pprobe.pos_emb = ps[1];
    pprobe.hist.w = ps[2];
    pprobe.hist.b = ps[3];
    pprobe.head1.w = ps[4];
    pprobe.head1.b = ps[5];
    pprobe.head2.w = ps[6];
    pprobe.head2.b = ps[7];
    pprobe.topic_proj = ps[8];
    tprobe.beta_hat = ps[9];
    for (std::size_t i = 0; i < tprobe.inference.size(); ++i) {
      tprobe.inference[i].w = ps[10 + 2 * i];
      tprobe.inference[i].b = ps[11 + 2 * i];
    }
    return ar_training_loss(pprobe, &tprobe, true, seqs, sids, aeps, grads);
  };
  Rng check_rng2(8);
  double seq_err = grad_check(seq_fn, aparams, 1e-5, 25, check_rng2);
  c.require(seq_err < 1e-4, "sequence-loss gradient error " + fmt(seq_err));

  c.note("worst relative errors: topic " + fmt(topic_err) + ", sequence " + fmt(seq_err));
  return c;
}

// ---------------------------------------------------------------------------
// 3. Closed-form spot values.

Check check_spot_values() {
  Check c;
  Rng rng(5);
  const double tol = 1e-10;

  // Uniform word head: one observed token costs exactly log N_w.
  const int n_words = 12;
  Tensor rho({5, 4});
  for (auto& v : rho.values()) v = rng.normal();
  TopicModelConfig cfg;
  cfg.k_topics = 3;
  cfg.inference_hidden = {6};
  TopicModel m = init_topic_model(cfg, rho, 5, n_words, 0, 0, rng);
  m.alpha.fill(0.0);
  std::vector<int> codes = {2, 0, 1, 0, 3};
  std::vector<int> one_token(n_words, 0);
  one_token[4] = 1;
  LossTerms lt = loss_terms(m, codes, one_token, {});
  c.require(std::fabs(lt.word - std::log(static_cast<double>(n_words))) < tol,
            "uniform single-token word loss " + fmt(lt.word) + " != log(12)");

  // Posterior equal to the prior: zero KL.
  m.prior_mean.fill(0.0);
  m.prior_logvar.fill(0.0);
  LossTerms lt2 = loss_terms(m, codes, one_token, {});
  c.require(std::fabs(lt2.kl) < tol, "matched-prior KL " + fmt(lt2.kl) + " != 0");

  // Fresh sequence prior: exactly uniform, NLL = log N_codes.
  ArTrainConfig acfg;
  acfg.window = 4;
  acfg.code_emb_dim = 6;
  acfg.hidden_dim = 8;
  SequencePrior prior = init_sequence_prior(acfg, 20, 10, 0, rng);
  CodeSequence seq;
  seq.id = "s";
  for (int t = 0; t < 10; ++t) seq.indices.push_back(t % 20);
  double nll = ar_nll(prior, seq, {});
  c.require(std::fabs(nll - std::log(20.0)) < tol, "fresh prior NLL " + fmt(nll) + " != log(20)");

  // Always-co-occurring pair scores NPMI exactly 1.
  Corpus corpus;
  for (int d = 0; d < 4; ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    doc.tokens = d < 2 ? std::vector<int>{0, 1} : std::vector<int>{2, 3};
    corpus.documents.push_back(std::move(doc));
  }
  TopicSet ts;
  ts.topics = {{0, 1}};
  CoherenceResult coh = npmi_coherence(ts, corpus, 2);
  c.require(std::fabs(coh.per_topic[0] - 1.0) < tol,
            "co-occurring pair NPMI " + fmt(coh.per_topic[0]) + " != 1");

  // Identical topics: diversity exactly 1/K.
  TopicSet same;
  std::vector<int> top;
  for (int i = 0; i < 25; ++i) top.push_back(i);
  same.topics = {top, top, top, top};
  double td = topic_diversity(same);
  c.require(std::fabs(td - 0.25) < tol, "identical-topic diversity " + fmt(td) + " != 1/4");

  c.note("word loss, KL, prior NLL, NPMI and diversity all within 1e-10");
  return c;
}

// ---------------------------------------------------------------------------
// 4. Planted-topic recovery.

Check check_recovery() {
  Check c;
  PlantedTopicConfig synth;
  synth.k_topics = 5;
  synth.n_codes = 50;
  synth.n_words = 300;
  synth.n_docs = 2000;
  synth.doc_len = 40;
  synth.seed = 1;
  PlantedTopicData data = make_planted_topics(synth);

  ConceptualVocab cvocab = planted_conceptual_vocab(data);
  EncodedCorpus enc = encode_corpus(data.corpus, data.vocab, cvocab);

  TopicModelConfig cfg;
  cfg.k_topics = 5;
  cfg.epochs = 200;
  cfg.lr = 5e-3;
  cfg.batch_size = 256;
  cfg.seed = 1;
  TopicTrainResult r = train_topic_model(enc, data.code_centers, cfg);
  c.require(!r.aborted, "training aborted: " + r.message);
  if (r.aborted) return c;

  std::vector<std::vector<int>> learned10;
  TopicSet top25;
  for (int k = 0; k < cfg.k_topics; ++k) {
    learned10.push_back(top_words(r.model, k, 10));
    top25.topics.push_back(top_words(r.model, k, 25));
  }
  double precision = best_match_precision(learned10, data.topic_words, 10);
  c.require(precision >= 0.6, "best-match precision@10 " + fmt(precision) + " < 0.6");

  double td = topic_diversity(top25);
  c.require(td >= 0.5, "topic diversity " + fmt(td) + " < 0.5");

  std::vector<int> labels;
  Tensor points;
  {
    std::vector<const EncodedDocument*> used;
    for (const auto& d : enc.docs) {
      if (!d.skipped) used.push_back(&d);
    }
    points = Tensor({static_cast<int>(used.size()), cfg.k_topics});
    for (std::size_t i = 0; i < used.size(); ++i) {
      ThetaSample s = infer_theta(r.model, used[i]->code_counts);
      for (int k = 0; k < cfg.k_topics; ++k) points.at(static_cast<int>(i), k) = s.theta[static_cast<std::size_t>(k)];
      labels.push_back(used[i]->label.value());
    }
  }
  ClusterAssignment assign = kmeans(points, cfg.k_topics, 0);
  double score = nmi(assign, labels);
  c.require(score >= 0.6, "clustering NMI " + fmt(score) + " < 0.6");

  c.note("precision@10 " + fmt(precision) + ", diversity " + fmt(td) + ", clustering NMI " + fmt(score));
  return c;
}

// ---------------------------------------------------------------------------
// 5. Multi-code expansion beats single-code assignment on an overlapping plant.

Check check_expansion_ablation() {
  Check c;
  double tq_sum[2] = {0.0, 0.0};  // [0]: K=1, [1]: K=5

  for (std::uint64_t seed : {1, 2, 3}) {
    // Shared-pool plant: every word pairs one topic-exclusive code with four
    // codes from a 40-code topic-neutral pool, and the exclusive center is
    // down-weighted in the embedding — so the single nearest code is always
    // topic-neutral and only the K=5 assignment recovers the word's topic.
    PlantedTopicConfig synth;
    synth.k_topics = 5;
    synth.n_codes = 50;
    synth.n_words = 600;
    synth.n_docs = 1200;
    synth.doc_len = 40;
    synth.codes_per_word = 5;
    synth.shared_codes = 40;
    synth.seed = seed;
    PlantedTopicData data = make_planted_topics(synth);

    int which = 0;
    for (int expansion : {1, 5}) {
      ConceptualVocab cvocab = quantize_vocab_against(data.code_centers, data.embeddings, expansion);
      EncodedCorpus enc = encode_corpus(data.corpus, data.vocab, cvocab);

      TopicModelConfig cfg;
      cfg.k_topics = 5;
      cfg.epochs = 60;
      cfg.lr = 5e-3;
      cfg.batch_size = 256;
      cfg.seed = 100 + seed;
      TopicTrainResult r = train_topic_model(enc, data.code_centers, cfg);
      c.require(!r.aborted, "training aborted (seed " + std::to_string(seed) + ")");
      if (r.aborted) return c;

      TopicSet top25;
      for (int k = 0; k < cfg.k_topics; ++k) top25.topics.push_back(top_words(r.model, k, 25));
      CoherenceResult coh = npmi_coherence(top25, data.corpus, 10);
      double tq = topic_quality(coh.mean, topic_diversity(top25));
      tq_sum[which++] += tq;
    }
  }
  double tq1 = tq_sum[0] / 3.0, tq5 = tq_sum[1] / 3.0;
  c.require(tq5 >= tq1, "mean TQ at K=5 (" + fmt(tq5) + ") below K=1 (" + fmt(tq1) + ")");
  c.note("mean TQ: K=1 " + fmt(tq1) + ", K=5 " + fmt(tq5));
  return c;
}

// ---------------------------------------------------------------------------
// 6. Topic conditioning helps on two-regime sequences.

Check check_conditioning_gain() {
  Check c;
  double gap_sum = 0.0;

  for (std::uint64_t seed : {1, 2, 3}) {
    TwoRegimeConfig synth;
    synth.n_codes = 20;
    synth.length = 16;
    synth.n_train = 2000;
    synth.n_held_out = 500;
    synth.seed = seed;
    TwoRegimeData data = make_two_regime_sequences(synth);

    ArTrainConfig cond_cfg;
    cond_cfg.epochs = 60;
    cond_cfg.seed = 10 + seed;
    cond_cfg.conditioned = true;
    cond_cfg.joint = true;
    cond_cfg.k_topics = 2;
    ArTrainResult cond = train_ar(data.train, std::nullopt, cond_cfg);
    c.require(!cond.aborted && cond.has_topic, "conditioned training aborted (seed " + std::to_string(seed) + ")");
    if (cond.aborted) return c;

    ArTrainConfig flat_cfg = cond_cfg;
    flat_cfg.conditioned = false;
    flat_cfg.joint = false;
    ArTrainResult flat = train_ar(data.train, std::nullopt, flat_cfg);
    c.require(!flat.aborted, "unconditioned training aborted (seed " + std::to_string(seed) + ")");
    if (flat.aborted) return c;

    double cond_nll = 0.0, flat_nll = 0.0;
    for (const auto& s : data.held_out.sequences) {
      ThetaSample ts = infer_theta(cond.topic, sequence_code_counts(s, synth.n_codes));
      cond_nll += ar_nll(cond.prior, s, ts.theta, cond.topic);
      flat_nll += ar_nll(flat.prior, s, {});
    }
    cond_nll /= data.held_out.size();
    flat_nll /= data.held_out.size();
    gap_sum += flat_nll - cond_nll;
  }
  double gap = gap_sum / 3.0;
  c.require(gap >= 0.05, "mean conditioning gain " + fmt(gap) + " nats/position < 0.05");
  c.note("mean held-out gain " + fmt(gap) + " nats/position over 3 seeds");
  return c;
}

// ---------------------------------------------------------------------------
// 7. Metric oracles.

Check check_metric_oracles() {
  Check c;
  const double tol = 1e-9;

  // NPMI worksheet (8 documents, hand-counted occurrence sets).
  Corpus corpus;
  corpus.documents.resize(8);
  for (int d = 0; d < 8; ++d) corpus.documents[static_cast<std::size_t>(d)].id = "d" + std::to_string(d);
  auto put = [&](int word, std::vector<int> docs) {
    for (int d : docs) corpus.documents[static_cast<std::size_t>(d)].tokens.push_back(word);
  };
  put(0, {0, 1, 2, 3});
  put(1, {0, 1, 4, 5});
  put(2, {0, 1, 2});
  put(3, {0, 1, 3});
  TopicSet ts;
  ts.topics = {{0, 1}, {2, 3}};
  CoherenceResult coh = npmi_coherence(ts, corpus, 2);
  c.require(std::fabs(coh.per_topic[0] - 0.0) < tol, "independent-pair NPMI " + fmt(coh.per_topic[0]));
  double expect = std::log(16.0 / 9.0) / std::log(4.0);
  c.require(std::fabs(coh.per_topic[1] - expect) < tol, "associated-pair NPMI " + fmt(coh.per_topic[1]));

  // NMI / purity worksheet (6 points, 3 clusters vs 2 labels).
  ClusterAssignment pred;
  pred.ids = {0, 0, 1, 1, 2, 2};
  pred.k = 3;
  std::vector<int> labels = {0, 0, 0, 1, 1, 1};
  double expect_nmi = (2.0 / 3.0) * std::log(2.0) / (0.5 * (std::log(3.0) + std::log(2.0)));
  c.require(std::fabs(nmi(pred, labels) - expect_nmi) < tol, "worksheet NMI " + fmt(nmi(pred, labels)));
  c.require(std::fabs(purity(pred, labels) - 5.0 / 6.0) < tol, "worksheet purity " + fmt(purity(pred, labels)));

  // k-means recovers three separated blobs for ten consecutive seeds.
  Rng rng(606);
  const int per = 30;
  Tensor pts({3 * per, 2});
  std::vector<int> blob;
  double cx[3] = {0, 10, 0}, cy[3] = {0, 0, 10};
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < per; ++i) {
      pts.at(b * per + i, 0) = cx[b] + 0.5 * rng.normal();
      pts.at(b * per + i, 1) = cy[b] + 0.5 * rng.normal();
      blob.push_back(b);
    }
  }
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ClusterAssignment a = kmeans(pts, 3, seed);
    if (purity(a, blob) == 1.0) ++recovered;
  }
  c.require(recovered == 10, "blob recovery " + std::to_string(recovered) + "/10 seeds");

  c.note("NPMI/NMI/purity worksheets exact, blob recovery " + std::to_string(recovered) + "/10");
  return c;
}

// ---------------------------------------------------------------------------
// 8. End-to-end determinism and bit-exact containers.

int run(const std::string& args) {
  std::string cmd = g_cli_path + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<char> bytes_of(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Check check_determinism() {
  Check c;
  if (g_cli_path.empty() || !std::filesystem::exists(g_cli_path)) {
    c.require(false, "command-line binary not found at '" + g_cli_path + "'");
    return c;
  }
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / ("tvq-accept-" + std::to_string(::getpid()));
  fs::create_directories(root);
  std::string d = root.string();

  auto repeat_identical = [&](const std::string& cmd, const std::string& artifact, const std::string& label) {
    if (run(cmd) != 0) {
      c.require(false, label + ": first run failed");
      return;
    }
    std::vector<char> first = bytes_of(artifact);
    if (run(cmd) != 0) {
      c.require(false, label + ": second run failed");
      return;
    }
    c.require(first == bytes_of(artifact), label + ": artifacts differ between same-seed runs");
  };

  c.require(run("gen-synth --kind topics --out-dir " + d + "/synth --k-topics 3 --n-codes 12"
                " --n-words 60 --n-docs 150 --doc-len 10 --seed 5") == 0,
            "synthetic corpus generation failed");
  c.require(run("gen-synth --kind sequences --out-dir " + d + "/seqs --n-codes 10 --length 8"
                " --n-train 150 --n-held 30 --seed 6") == 0,
            "synthetic sequence generation failed");
  if (!c.ok) return c;

  repeat_identical("pretrain-vq --vocab " + d + "/synth/vocab.txt --embeddings " + d +
                       "/synth/embeddings.tvqe --out " + d + "/vq.tvqm --n-codes 12 --latent 8"
                       " --encoder-hidden 24 --decoder-hidden 24 --epochs 6 --seed 7",
                   d + "/vq.tvqm", "pretrain-vq");
  repeat_identical("encode --vocab " + d + "/synth/vocab.txt --embeddings " + d +
                       "/synth/embeddings.tvqe --codebook " + d + "/vq.tvqm --corpus " + d +
                       "/synth/corpus.jsonl --out " + d + "/enc.bin --expansion 2",
                   d + "/enc.bin", "encode");
  repeat_identical("train --vocab " + d + "/synth/vocab.txt --codebook " + d + "/vq.tvqm --data " + d +
                       "/enc.bin --out " + d + "/model.tvqt --k-topics 3 --hidden 16 --epochs 5"
                       " --batch 64 --seed 9",
                   d + "/model.tvqt", "train");
  repeat_identical("train-ar --sequences " + d + "/seqs/train.jsonl --out " + d + "/prior.tvqa"
                       " --unconditioned --window 4 --code-emb 8 --hidden 12 --epochs 3 --seed 11",
                   d + "/prior.tvqa", "train-ar");

  // Containers re-save to the same bytes after a load round-trip.
  try {
    Vocabulary vocab = load_vocab(d + "/synth/vocab.txt");
    save_vocab(vocab, d + "/vocab2.txt");
    c.require(bytes_of(d + "/synth/vocab.txt") == bytes_of(d + "/vocab2.txt"), "vocabulary round-trip differs");

    EmbeddingTable emb = load_embeddings(d + "/synth/embeddings.tvqe", vocab);
    save_embeddings(emb, d + "/emb2.tvqe");
    c.require(bytes_of(d + "/synth/embeddings.tvqe") == bytes_of(d + "/emb2.tvqe"),
              "embedding round-trip differs");

    std::string echo;
    EncodedCorpus enc = load_encoded_corpus(d + "/enc.bin", &echo);
    save_encoded_corpus(enc, d + "/enc2.bin", echo);
    c.require(bytes_of(d + "/enc.bin") == bytes_of(d + "/enc2.bin"), "encoded-corpus round-trip differs");

    std::string vq_echo;
    VqModel vq = load_vq_model(d + "/vq.tvqm", &vq_echo);
    save_vq_model(vq, d + "/vq2.tvqm", vq_echo);
    c.require(bytes_of(d + "/vq.tvqm") == bytes_of(d + "/vq2.tvqm"), "pretrained-model round-trip differs");

    TopicModel tm = load_topic_model(d + "/model.tvqt", vocab, vq.codebook, &echo);
    save_topic_model(tm, d + "/model2.tvqt", echo);
    c.require(bytes_of(d + "/model.tvqt") == bytes_of(d + "/model2.tvqt"), "topic-model round-trip differs");

    SequencePrior prior = load_sequence_prior(d + "/prior.tvqa", &echo);
    save_sequence_prior(prior, d + "/prior2.tvqa", echo);
    c.require(bytes_of(d + "/prior.tvqa") == bytes_of(d + "/prior2.tvqa"), "prior round-trip differs");
  } catch (const std::exception& e) {
    c.require(false, std::string("round-trip raised: ") + e.what());
  }

  std::error_code ec;
  fs::remove_all(root, ec);
  if (c.ok) c.note("same-seed reruns byte-identical, all containers round-trip bit-exactly");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];

  struct Criterion {
    const char* name;
    std::function<Check()> fn;
  };
  const Criterion criteria[] = {
      {"quantization matches brute-force scan", check_quantization},
      {"training-loss gradients match finite differences", check_gradients},
      {"closed-form spot values", check_spot_values},
      {"planted-topic recovery", check_recovery},
      {"multi-code expansion resolves shared-pool plants", check_expansion_ablation},
      {"topic conditioning lowers held-out sequence NLL", check_conditioning_gain},
      {"metric oracles", check_metric_oracles},
      {"fixed-seed determinism and bit-exact containers", check_determinism},
  };

  int failures = 0;
  int index = 0;
  for (const auto& criterion : criteria) {
    ++index;
    auto start = std::chrono::steady_clock::now();
    Check result;
    try {
      result = criterion.fn();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s — %s (%.1fs)\n", result.ok ? "PASS" : "FAIL", index,
                criterion.name, result.detail.c_str(), secs);
    std::fflush(stdout);
    if (!result.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
