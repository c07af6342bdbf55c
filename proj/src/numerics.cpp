#include "tvq/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "tvq/autodiff.hpp"

namespace tvq {

void VariationalParams::check() const {
  if (gamma_m.size() != log_gamma_sigma.size()) {
    throw DimensionError("VariationalParams: mean and log-variance lengths differ");
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw DimensionError("log_softmax: empty input");
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> reparameterize(const VariationalParams& params, const std::vector<double>& epsilon) {
  params.check();
  if (epsilon.size() != params.gamma_m.size()) {
    throw DimensionError("reparameterize: epsilon length mismatch");
  }
  std::vector<double> out(params.gamma_m.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = params.gamma_m[i] + std::exp(0.5 * params.log_gamma_sigma[i]) * epsilon[i];
  }
  return out;
}

double gaussian_kl(const VariationalParams& params, const std::vector<double>& prior_m,
                   const std::vector<double>& prior_logvar) {
  params.check();
  if (prior_m.size() != params.gamma_m.size() || prior_logvar.size() != params.gamma_m.size()) {
    throw DimensionError("gaussian_kl: prior length mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < params.gamma_m.size(); ++i) {
    double lv = params.log_gamma_sigma[i];
    double plv = prior_logvar[i];
    double dm = params.gamma_m[i] - prior_m[i];
    kl += 0.5 * (std::exp(lv - plv) + dm * dm * std::exp(-plv) - 1.0 + plv - lv);
  }
  return std::max(kl, 0.0);
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
  require_same_shape(param, grad, "adam_step");
  if (state.m.empty()) {
    state.m = Tensor(param.shape());
    state.v = Tensor(param.shape());
  }
  require_same_shape(param, state.m, "adam_step moments");
  state.step += 1;
  double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::int64_t i = 0; i < param.size(); ++i) {
    double g = grad.at(i);
    state.m.at(i) = state.beta1 * state.m.at(i) + (1.0 - state.beta1) * g;
    state.v.at(i) = state.beta2 * state.v.at(i) + (1.0 - state.beta2) * g * g;
    double mhat = state.m.at(i) / b1t;
    double vhat = state.v.at(i) / b2t;
    param.at(i) -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

double grad_check(const LossWithGrad& loss_fn, const std::vector<Tensor>& params, double eps,
                  int max_coords_per_param, Rng& rng) {
  if (eps < 1e-6 || eps > 1e-3) throw ParameterError("grad_check: eps must be in [1e-6, 1e-3]");
  std::vector<Tensor> grads;
  for (const auto& p : params) grads.emplace_back(p.shape());
  double base = loss_fn(params, &grads);
  if (!std::isfinite(base)) throw NumericError("grad_check: loss is not finite");

  std::vector<Tensor> work = params;
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::int64_t n = params[pi].size();
    std::vector<std::int64_t> coords;
    if (n <= max_coords_per_param) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords_per_param; ++i) {
        coords.push_back(static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(n))));
      }
    }
    for (std::int64_t c : coords) {
      double saved = work[pi].at(c);
      work[pi].at(c) = saved + eps;
      double up = loss_fn(work, nullptr);
      work[pi].at(c) = saved - eps;
      double down = loss_fn(work, nullptr);
      work[pi].at(c) = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: perturbed loss is not finite");
      }
      double numeric = (up - down) / (2.0 * eps);
      double analytic = grads[pi].at(c);
      double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
      worst = std::max(worst, std::fabs(numeric - analytic) / denom);
    }
  }
  return worst;
}

std::vector<int> kmeans_plus_plus_indices(const Tensor& points, int k, Rng& rng) {
  if (points.ndim() != 2 || points.dim(0) < 1) {
    throw DimensionError("kmeans_plus_plus_indices: points must be a non-empty matrix");
  }
  int n = points.dim(0), d = points.dim(1);
  if (k < 1 || k > n) throw ParameterError("kmeans_plus_plus_indices: k must be in [1, n]");

  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  chosen.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n))));

  std::vector<double> min_d2(static_cast<std::size_t>(n), 0.0);
  auto refresh = [&](int center) {
    const double* c = points.row_ptr(center);
    for (int i = 0; i < n; ++i) {
      const double* p = points.row_ptr(i);
      double d2 = 0.0;
      for (int j = 0; j < d; ++j) {
        double diff = p[j] - c[j];
        d2 += diff * diff;
      }
      if (chosen.size() == 1 || d2 < min_d2[static_cast<std::size_t>(i)]) {
        min_d2[static_cast<std::size_t>(i)] = d2;
      }
    }
  };
  refresh(chosen.back());

  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (double v : min_d2) total += v;
    int next;
    if (total <= 0.0) {
      next = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n)));
    } else {
      double r = rng.uniform() * total;
      double run = 0.0;
      next = n - 1;
      for (int i = 0; i < n; ++i) {
        run += min_d2[static_cast<std::size_t>(i)];
        if (r < run) {
          next = i;
          break;
        }
      }
    }
    chosen.push_back(next);
    refresh(next);
  }
  return chosen;
}

void linear_forward(const Tensor& w, const Tensor& b, const std::vector<double>& x, std::vector<double>& y) {
  int out = w.dim(0), in = w.dim(1);
  if (static_cast<int>(x.size()) != in) throw DimensionError("linear_forward: input length mismatch");
  if (b.size() != out) throw DimensionError("linear_forward: bias length mismatch");
  y.assign(static_cast<std::size_t>(out), 0.0);
  for (int o = 0; o < out; ++o) {
    const double* wr = w.row_ptr(o);
    double acc = b.at(o);
    for (int i = 0; i < in; ++i) acc += wr[i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
}

Tensor linear_forward_batch(const Tensor& w, const Tensor& b, const Tensor& x) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1)) {
    throw DimensionError("linear_forward_batch: shape mismatch");
  }
  Tensor y({x.dim(0), w.dim(0)});
  ad::gemm_nt(x, w, y, false);
  for (int i = 0; i < y.dim(0); ++i) {
    double* row = y.row_ptr(i);
    for (int j = 0; j < y.dim(1); ++j) row[j] += b.at(j);
  }
  return y;
}

}  // namespace tvq
