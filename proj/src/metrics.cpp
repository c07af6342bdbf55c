#include "tvq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "tvq/errors.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"

namespace tvq {

namespace {
constexpr double kProbEps = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }
}  // namespace

CoherenceResult npmi_coherence(const TopicSet& topics, const Corpus& corpus, int top_n) {
  if (topics.k() < 1) throw ParameterError("npmi_coherence: no topics");
  if (corpus.size() < 1) throw ParameterError("npmi_coherence: empty corpus");
  if (top_n < 2) throw ParameterError("npmi_coherence: top_n must be at least 2");
  for (const auto& t : topics.topics) {
    if (static_cast<int>(t.size()) < top_n) {
      throw ParameterError("npmi_coherence: a topic has fewer than top_n words");
    }
  }

  // Boolean per-document occurrence sets for just the words we need.
  std::unordered_set<int> needed;
  for (const auto& t : topics.topics) {
    for (int i = 0; i < top_n; ++i) needed.insert(t[static_cast<std::size_t>(i)]);
  }
  std::map<int, std::vector<bool>> occurs;
  for (int w : needed) occurs[w] = std::vector<bool>(static_cast<std::size_t>(corpus.size()), false);
  for (int d = 0; d < corpus.size(); ++d) {
    for (int tok : corpus.documents[static_cast<std::size_t>(d)].tokens) {
      auto it = occurs.find(tok);
      if (it != occurs.end()) it->second[static_cast<std::size_t>(d)] = true;
    }
  }

  double n_docs = corpus.size();
  auto doc_freq = [&](int w) {
    int c = 0;
    for (bool b : occurs[w]) c += b ? 1 : 0;
    return c;
  };

  CoherenceResult result;
  std::unordered_set<int> missing;
  for (const auto& topic : topics.topics) {
    double score = 0.0;
    int pairs = 0;
    for (int i = 0; i < top_n; ++i) {
      for (int j = i + 1; j < top_n; ++j) {
        int wi = topic[static_cast<std::size_t>(i)];
        int wj = topic[static_cast<std::size_t>(j)];
        int dfi = doc_freq(wi), dfj = doc_freq(wj);
        if (dfi == 0) missing.insert(wi);
        if (dfj == 0) missing.insert(wj);
        int dfij = 0;
        const auto& oi = occurs[wi];
        const auto& oj = occurs[wj];
        for (int d = 0; d < corpus.size(); ++d) {
          if (oi[static_cast<std::size_t>(d)] && oj[static_cast<std::size_t>(d)]) ++dfij;
        }
        double pi = clamp_prob(dfi / n_docs);
        double pj = clamp_prob(dfj / n_docs);
        double pij = clamp_prob(dfij / n_docs);
        double value = std::log(pij / (pi * pj)) / (-std::log(pij));
        score += std::clamp(value, -1.0, 1.0);
        ++pairs;
      }
    }
    result.per_topic.push_back(score / pairs);
  }
  result.missing_words.assign(missing.begin(), missing.end());
  std::sort(result.missing_words.begin(), result.missing_words.end());
  double total = 0.0;
  for (double s : result.per_topic) total += s;
  result.mean = total / result.per_topic.size();
  return result;
}

double topic_diversity(const TopicSet& topics) {
  constexpr int kTop = 25;
  if (topics.k() < 1) throw ParameterError("topic_diversity: no topics");
  std::unordered_set<int> pooled;
  for (const auto& t : topics.topics) {
    if (static_cast<int>(t.size()) < kTop) {
      throw ParameterError("topic_diversity: every topic needs at least 25 ranked words");
    }
    for (int i = 0; i < kTop; ++i) pooled.insert(t[static_cast<std::size_t>(i)]);
  }
  return static_cast<double>(pooled.size()) / (kTop * topics.k());
}

double topic_quality(double tc_mean, double td) {
  if (!std::isfinite(tc_mean) || !std::isfinite(td)) {
    throw ParameterError("topic_quality: inputs must be finite");
  }
  return tc_mean * td;
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double out = 0.0;
  for (int i = 0; i < d; ++i) {
    double diff = a[i] - b[i];
    out += diff * diff;
  }
  return out;
}

struct LloydRun {
  std::vector<int> assign;
  double sse = 0.0;
};

LloydRun lloyd(const Tensor& points, int k, Rng& rng) {
  int n = points.dim(0), d = points.dim(1);
  std::vector<int> seed_rows = kmeans_plus_plus_indices(points, k, rng);
  Tensor centers({k, d});
  for (int c = 0; c < k; ++c) {
    const double* src = points.row_ptr(seed_rows[static_cast<std::size_t>(c)]);
    std::copy(src, src + d, centers.row_ptr(c));
  }

  LloydRun run;
  run.assign.assign(static_cast<std::size_t>(n), 0);
  double prev_sse = -1.0;
  for (int iter = 0; iter < 300; ++iter) {
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* p = points.row_ptr(i);
      int best = 0;
      double best_d = sq_dist(p, centers.row_ptr(0), d);
      for (int c = 1; c < k; ++c) {
        double dist = sq_dist(p, centers.row_ptr(c), d);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      run.assign[static_cast<std::size_t>(i)] = best;
      sse += best_d;
    }
    if (prev_sse >= 0.0 && sse > prev_sse + 1e-9 * std::max(1.0, prev_sse)) {
      throw NumericError("kmeans: within-cluster SSE increased across a Lloyd iteration");
    }
    prev_sse = sse;
    run.sse = sse;

    Tensor next({k, d});
    std::vector<int> size(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      int c = run.assign[static_cast<std::size_t>(i)];
      ++size[static_cast<std::size_t>(c)];
      const double* p = points.row_ptr(i);
      double* dst = next.row_ptr(c);
      for (int j = 0; j < d; ++j) dst[j] += p[j];
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      double* dst = next.row_ptr(c);
      if (size[static_cast<std::size_t>(c)] == 0) {
        // Empty cluster keeps its previous center.
        std::copy(centers.row_ptr(c), centers.row_ptr(c) + d, dst);
      } else {
        for (int j = 0; j < d; ++j) dst[j] /= size[static_cast<std::size_t>(c)];
      }
      movement = std::max(movement, sq_dist(dst, centers.row_ptr(c), d));
    }
    centers = next;
    if (movement < 1e-9 * 1e-9) break;
  }
  return run;
}

}  // namespace

ClusterAssignment kmeans(const Tensor& points, int k, std::uint64_t seed, int restarts) {
  if (points.ndim() != 2 || points.dim(0) < 1) throw ParameterError("kmeans: points must be a non-empty matrix");
  if (k < 1 || k > points.dim(0)) throw ParameterError("kmeans: k must be in [1, point count]");
  if (restarts < 1) throw ParameterError("kmeans: restarts must be at least 1");

  Rng rng(seed);
  LloydRun best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    LloydRun run = lloyd(points, k, rng);
    if (!have || run.sse < best.sse) {
      best = std::move(run);
      have = true;
    }
  }
  ClusterAssignment out;
  out.ids = std::move(best.assign);
  out.k = k;
  return out;
}

namespace {

std::vector<std::int64_t> bincount(const std::vector<int>& xs) {
  int hi = 0;
  for (int x : xs) {
    if (x < 0) throw ParameterError("cluster/label ids must be non-negative");
    hi = std::max(hi, x);
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(hi) + 1, 0);
  for (int x : xs) ++counts[static_cast<std::size_t>(x)];
  return counts;
}

double entropy(const std::vector<std::int64_t>& counts, double n) {
  double h = 0.0;
  for (std::int64_t c : counts) {
    if (c > 0) {
      double p = c / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

double nmi(const ClusterAssignment& pred, const std::vector<int>& labels) {
  if (pred.ids.size() != labels.size()) throw DimensionError("nmi: assignment/label length mismatch");
  if (pred.ids.empty()) throw ParameterError("nmi: empty input");
  double n = static_cast<double>(pred.ids.size());

  std::vector<std::int64_t> pc = bincount(pred.ids);
  std::vector<std::int64_t> lc = bincount(labels);
  std::map<std::pair<int, int>, std::int64_t> joint;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++joint[{pred.ids[i], labels[i]}];
  }
  double mi = 0.0;
  for (const auto& [key, count] : joint) {
    double pij = count / n;
    double pi = pc[static_cast<std::size_t>(key.first)] / n;
    double pj = lc[static_cast<std::size_t>(key.second)] / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  double hp = entropy(pc, n);
  double hl = entropy(lc, n);
  if (hp == 0.0 && hl == 0.0) return 1.0;
  double denom = 0.5 * (hp + hl);
  return denom > 0.0 ? mi / denom : 0.0;
}

double purity(const ClusterAssignment& pred, const std::vector<int>& labels) {
  if (pred.ids.size() != labels.size()) throw DimensionError("purity: assignment/label length mismatch");
  if (pred.ids.empty()) throw ParameterError("purity: empty input");
  std::map<int, std::map<int, std::int64_t>> by_cluster;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++by_cluster[pred.ids[i]][labels[i]];
  }
  std::int64_t agree = 0;
  for (const auto& [cluster, counts] : by_cluster) {
    std::int64_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    agree += best;
  }
  return static_cast<double>(agree) / static_cast<double>(labels.size());
}

}  // namespace tvq
