#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "tvq/errors.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"
#include "tvq/seq_prior.hpp"
#include "tvq/synth.hpp"
#include "tvq/topic_model.hpp"

using namespace tvq;
using tvqtest::TempDir;

namespace {

SequenceDataset random_sequences(int n, int n_codes, int length, Rng& rng) {
  SequenceDataset data;
  data.n_codes = n_codes;
  data.length = length;
  for (int i = 0; i < n; ++i) {
    CodeSequence s;
    s.id = "s" + std::to_string(i);
    for (int t = 0; t < length; ++t) {
      s.indices.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_codes))));
    }
    data.sequences.push_back(std::move(s));
  }
  return data;
}

void perturb(Tensor& t, double scale, Rng& rng) {
  for (auto& v : t.values()) v += scale * rng.normal();
}

}  // namespace

TEST_CASE("a fresh prior is exactly uniform") {
  Rng rng(1);
  ArTrainConfig cfg;
  cfg.window = 3;
  cfg.code_emb_dim = 4;
  cfg.hidden_dim = 5;
  const int n_codes = 7, length = 6;
  SequencePrior prior = init_sequence_prior(cfg, n_codes, length, 0, rng);
  CHECK(!prior.conditioned);
  CHECK(prior.cond_dim() == 0);

  CodeSequence seq{"s", {0, 3, 6, 1, 1, 2}, std::nullopt};
  Tensor logits = ar_logits(prior, seq.indices, {});
  REQUIRE(logits.dim(0) == length);
  REQUIRE(logits.dim(1) == n_codes);
  for (std::int64_t i = 0; i < logits.size(); ++i) CHECK(logits.at(i) == 0.0);

  CHECK(ar_nll(prior, seq, {}) == doctest::Approx(std::log(static_cast<double>(n_codes))).epsilon(1e-12));
}

TEST_CASE("the prior is causal over a fixed window") {
  Rng rng(3);
  ArTrainConfig cfg;
  cfg.window = 2;
  cfg.code_emb_dim = 6;
  cfg.hidden_dim = 8;
  const int n_codes = 5, length = 7;
  SequencePrior prior = init_sequence_prior(cfg, n_codes, length, 0, rng);
  // Give the zeroed head real weights so logits depend on the context.
  perturb(prior.head2.w, 0.5, rng);
  perturb(prior.head2.b, 0.5, rng);

  std::vector<int> base = {0, 1, 2, 3, 4, 0, 1};
  Tensor l0 = ar_logits(prior, base, {});

  // Changing position 4 must leave logits at positions <= 4 untouched
  // (position t sees only positions < t) and positions beyond the window
  // (> 4 + window) as well.
  std::vector<int> changed = base;
  changed[4] = 1;
  Tensor l1 = ar_logits(prior, changed, {});
  for (int t = 0; t <= 4; ++t) {
    for (int c = 0; c < n_codes; ++c) CHECK(l0.at(t, c) == l1.at(t, c));
  }
  bool inside_window_differs = false;
  for (int t = 5; t <= std::min(length - 1, 4 + cfg.window); ++t) {
    for (int c = 0; c < n_codes; ++c) inside_window_differs |= l0.at(t, c) != l1.at(t, c);
  }
  CHECK(inside_window_differs);

  CHECK_THROWS_AS(ar_logits(prior, {0, 1}, {}), DimensionError);
  CHECK_THROWS_AS(ar_logits(prior, base, {1.0}), ParameterError);
  std::vector<int> bad = base;
  bad[0] = n_codes;
  CHECK_THROWS_AS(ar_logits(prior, bad, {}), DimensionError);
}

TEST_CASE("single-sequence batch loss equals the per-position NLL") {
  Rng rng(5);
  SequenceDataset data = random_sequences(3, 6, 8, rng);
  ArTrainConfig cfg;
  cfg.window = 3;
  cfg.code_emb_dim = 5;
  cfg.hidden_dim = 6;
  cfg.conditioned = false;
  cfg.joint = false;
  SequencePrior prior = init_sequence_prior(cfg, 6, 8, 0, rng);
  perturb(prior.head2.w, 0.4, rng);
  perturb(prior.head2.b, 0.4, rng);

  for (int i = 0; i < data.size(); ++i) {
    double batch = ar_training_loss(prior, nullptr, false, data, {i}, Tensor(), nullptr);
    double nll = ar_nll(prior, data.sequences[static_cast<std::size_t>(i)], {});
    CHECK(batch == doctest::Approx(nll * data.length).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradients of the joint sequence loss match finite differences") {
  Rng rng(7);
  const int n_codes = 6, length = 6, k_topics = 2, latent = 4;
  SequenceDataset data = random_sequences(4, n_codes, length, rng);

  Tensor rho({n_codes, latent});
  for (auto& v : rho.values()) v = rng.normal();
  TopicModelConfig tm_cfg;
  tm_cfg.k_topics = k_topics;
  tm_cfg.inference_hidden = {8};
  TopicModel topic = init_topic_model(tm_cfg, rho, n_codes, 3, 0, 0, rng);
  for (Linear& l : topic.inference) {
    perturb(l.w, 0.2, rng);
    perturb(l.b, 0.2, rng);
  }

  ArTrainConfig cfg;
  cfg.window = 3;
  cfg.code_emb_dim = 4;
  cfg.hidden_dim = 5;
  cfg.conditioned = true;
  cfg.joint = true;
  SequencePrior base = init_sequence_prior(cfg, n_codes, length, latent, rng);
  perturb(base.head2.w, 0.2, rng);
  perturb(base.head2.b, 0.2, rng);

  Tensor eps({4, k_topics});
  for (auto& v : eps.values()) v = rng.normal();
  std::vector<int> ids = {0, 1, 2, 3};

  // Update order: prior tensors, topic_proj, then beta_hat and inference w/b.
  auto collect = [&](const SequencePrior& p, const TopicModel& t) {
    std::vector<Tensor> ps = {p.code_emb, p.pos_emb, p.hist.w, p.hist.b,
                              p.head1.w, p.head1.b, p.head2.w, p.head2.b, p.topic_proj, t.beta_hat};
    for (const Linear& l : t.inference) {
      ps.push_back(l.w);
      ps.push_back(l.b);
    }
    return ps;
  };
  SequencePrior probe = base;
  TopicModel probe_topic = topic;
  auto loss_fn = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    probe.code_emb = ps[0];
    probe.pos_emb = ps[1];
    probe.hist.w = ps[2];
    probe.hist.b = ps[3];
    probe.head1.w = ps[4];
    probe.head1.b = ps[5];
    probe.head2.w = ps[6];
    probe.head2.b = ps[7];
    probe.topic_proj = ps[8];
    probe_topic.beta_hat = ps[9];
    for (std::size_t i = 0; i < probe_topic.inference.size(); ++i) {
      probe_topic.inference[i].w = ps[10 + 2 * i];
      probe_topic.inference[i].b = ps[11 + 2 * i];
    }
    return ar_training_loss(probe, &probe_topic, true, data, ids, eps, grads);
  };

  Rng check_rng(42);
  double worst = grad_check(loss_fn, collect(base, topic), 1e-5, 25, check_rng);
  CHECK(worst < 1e-4);
}

TEST_CASE("argument contract of the batch loss") {
  Rng rng(9);
  SequenceDataset data = random_sequences(2, 5, 4, rng);
  ArTrainConfig cfg;
  cfg.window = 2;
  cfg.code_emb_dim = 3;
  cfg.hidden_dim = 4;
  SequencePrior uncond = init_sequence_prior(cfg, 5, 4, 0, rng);

  TopicModelConfig tm_cfg;
  tm_cfg.k_topics = 2;
  tm_cfg.inference_hidden = {4};
  Tensor rho({5, 3});
  for (auto& v : rho.values()) v = rng.normal();
  TopicModel topic = init_topic_model(tm_cfg, rho, 5, 3, 0, 0, rng);

  // Unconditioned prior must not receive a topic model, and vice versa.
  CHECK_THROWS_AS(ar_training_loss(uncond, &topic, false, data, {0}, Tensor(), nullptr), ParameterError);
  SequencePrior cond = init_sequence_prior(cfg, 5, 4, 3, rng);
  CHECK_THROWS_AS(ar_training_loss(cond, nullptr, false, data, {0}, Tensor(), nullptr), ParameterError);
  CHECK_THROWS_AS(ar_training_loss(uncond, nullptr, true, data, {0}, Tensor(), nullptr), ParameterError);
  CHECK_THROWS_AS(ar_training_loss(uncond, nullptr, false, data, {}, Tensor(), nullptr), ParameterError);

  SequenceDataset wrong = data;
  wrong.n_codes = 9;
  CHECK_THROWS_AS(ar_training_loss(uncond, nullptr, false, wrong, {0}, Tensor(), nullptr), DimensionError);
}

TEST_CASE("sampled sequences report their own log-probabilities") {
  Rng rng(11);
  ArTrainConfig cfg;
  cfg.window = 3;
  cfg.code_emb_dim = 5;
  cfg.hidden_dim = 6;
  const int n_codes = 6, length = 9;
  SequencePrior prior = init_sequence_prior(cfg, n_codes, length, 0, rng);
  perturb(prior.head2.w, 0.6, rng);
  perturb(prior.head2.b, 0.6, rng);

  Rng s1(21), s2(21);
  SampledSequence a = sample_sequence(prior, {}, s1);
  SampledSequence b = sample_sequence(prior, {}, s2);
  CHECK(a.sequence.indices == b.sequence.indices);
  REQUIRE(static_cast<int>(a.sequence.indices.size()) == length);
  REQUIRE(a.step_log_prob.size() == a.sequence.indices.size());

  // Teacher-forcing the sampled indices reproduces the recorded step
  // log-probabilities.
  Tensor logits = ar_logits(prior, a.sequence.indices, {});
  for (int t = 0; t < length; ++t) {
    std::vector<double> row(logits.row_ptr(t), logits.row_ptr(t) + n_codes);
    auto ls = log_softmax(row);
    int idx = a.sequence.indices[static_cast<std::size_t>(t)];
    CHECK(a.step_log_prob[static_cast<std::size_t>(t)] ==
          doctest::Approx(ls[static_cast<std::size_t>(idx)]).epsilon(1e-12));
    CHECK(idx >= 0);
    CHECK(idx < n_codes);
  }
}

TEST_CASE("training reduces held-out NLL and stays deterministic") {
  TwoRegimeConfig synth;
  synth.n_codes = 8;
  synth.length = 10;
  synth.n_train = 300;
  synth.n_held_out = 60;
  synth.seed = 13;
  TwoRegimeData data = make_two_regime_sequences(synth);

  ArTrainConfig cfg;
  cfg.window = 4;
  cfg.code_emb_dim = 8;
  cfg.hidden_dim = 12;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  cfg.seed = 5;
  cfg.conditioned = false;
  cfg.joint = false;

  ArTrainResult r = train_ar(data.train, std::nullopt, cfg);
  REQUIRE(!r.aborted);
  CHECK(!r.has_topic);
  REQUIRE(static_cast<int>(r.trace.size()) == cfg.epochs);
  CHECK(r.trace.back() < r.trace.front());

  double held = 0.0;
  for (const auto& s : data.held_out.sequences) held += ar_nll(r.prior, s, {});
  held /= data.held_out.size();
  CHECK(held < std::log(static_cast<double>(synth.n_codes)));

  ArTrainResult again = train_ar(data.train, std::nullopt, cfg);
  CHECK(r.prior.content_hash() == again.prior.content_hash());
}

TEST_CASE("conditioned training from scratch builds a matching topic side") {
  TwoRegimeConfig synth;
  synth.n_codes = 8;
  synth.length = 10;
  synth.n_train = 200;
  synth.n_held_out = 40;
  synth.seed = 29;
  TwoRegimeData data = make_two_regime_sequences(synth);

  ArTrainConfig cfg;
  cfg.window = 4;
  cfg.code_emb_dim = 8;
  cfg.hidden_dim = 12;
  cfg.epochs = 6;
  cfg.batch_size = 64;
  cfg.seed = 8;
  cfg.conditioned = true;
  cfg.joint = true;
  cfg.k_topics = 2;

  ArTrainResult r = train_ar(data.train, std::nullopt, cfg);
  REQUIRE(!r.aborted);
  REQUIRE(r.has_topic);
  CHECK(r.prior.conditioned);
  CHECK(r.prior.topic_hash == r.topic.content_hash());
  CHECK_NOTHROW(require_topic_compat(r.prior, r.topic));

  // Conditioned evaluation path: infer theta from the sequence histogram.
  const CodeSequence& s = data.held_out.sequences[0];
  ThetaSample ts = infer_theta(r.topic, sequence_code_counts(s, synth.n_codes));
  double nll = ar_nll(r.prior, s, ts.theta, r.topic);
  CHECK(std::isfinite(nll));

  TopicModel other = r.topic;
  other.beta_hat.at(0, 0) += 1.0;
  CHECK_THROWS_AS(require_topic_compat(r.prior, other), CompatibilityError);
}

TEST_CASE("sequence containers round-trip bit-exactly") {
  Rng rng(33);
  SequenceDataset data = random_sequences(5, 6, 7, rng);
  data.label_names = {"r0", "r1"};
  data.sequences[0].label = 1;
  data.sequences[2].label = 0;

  TempDir dir("seqio");
  std::string p1 = dir.file("s1.jsonl"), p2 = dir.file("s2.jsonl");
  save_sequences(data, p1);
  SequenceDataset loaded = load_sequences(p1);
  CHECK(loaded.n_codes == data.n_codes);
  CHECK(loaded.length == data.length);
  CHECK(loaded.label_names == data.label_names);
  REQUIRE(loaded.size() == data.size());
  for (int i = 0; i < data.size(); ++i) {
    CHECK(loaded.sequences[static_cast<std::size_t>(i)].indices ==
          data.sequences[static_cast<std::size_t>(i)].indices);
    CHECK(loaded.sequences[static_cast<std::size_t>(i)].label ==
          data.sequences[static_cast<std::size_t>(i)].label);
  }
  save_sequences(loaded, p2);
  CHECK(tvqtest::same_bytes(p1, p2));

  CHECK(sequence_code_counts(data.sequences[0], 6) !=
        std::vector<int>(6, 0));
  std::int64_t total = 0;
  for (int c : sequence_code_counts(data.sequences[0], 6)) total += c;
  CHECK(total == data.length);
}

TEST_CASE("prior containers round-trip bit-exactly") {
  Rng rng(35);
  SequenceDataset data = random_sequences(40, 6, 8, rng);
  ArTrainConfig cfg;
  cfg.window = 3;
  cfg.code_emb_dim = 5;
  cfg.hidden_dim = 6;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 2;
  cfg.conditioned = false;
  cfg.joint = false;
  ArTrainResult r = train_ar(data, std::nullopt, cfg);
  REQUIRE(!r.aborted);

  TempDir dir("tvqa");
  std::string p1 = dir.file("p1.tvqa"), p2 = dir.file("p2.tvqa");
  save_sequence_prior(r.prior, p1, "cmd=train-ar seed=2");
  std::string echo;
  SequencePrior loaded = load_sequence_prior(p1, &echo);
  CHECK(echo == "cmd=train-ar seed=2");
  CHECK(loaded.window == r.prior.window);
  CHECK(loaded.seq_length == r.prior.seq_length);
  CHECK(loaded.conditioned == r.prior.conditioned);
  CHECK(tvqtest::matches_f32(loaded.code_emb, r.prior.code_emb));
  CHECK(tvqtest::matches_f32(loaded.head2.w, r.prior.head2.w));
  CHECK(loaded.content_hash() == r.prior.content_hash());
  CHECK(loaded.config.window == cfg.window);
  save_sequence_prior(loaded, p2, echo);
  CHECK(tvqtest::same_bytes(p1, p2));
}
