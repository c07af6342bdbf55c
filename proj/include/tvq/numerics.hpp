#pragma once

#include <functional>
#include <vector>

#include "tvq/rng.hpp"
#include "tvq/tensor.hpp"

namespace tvq {

/// Mean and log-variance of a diagonal Gaussian variational posterior.
/// Log-variances are clamped to [-10, 10] wherever they are produced.
struct VariationalParams {
  std::vector<double> gamma_m;
  std::vector<double> log_gamma_sigma;

  void check() const;
};

constexpr double kLogVarClamp = 10.0;

/// Numerically stable softmax (max subtraction). Throws on empty input.
std::vector<double> softmax(const std::vector<double>& logits);

/// Stable log softmax of one row.
std::vector<double> log_softmax(const std::vector<double>& logits);

/// gamma_m + exp(0.5 * log_gamma_sigma) ⊙ epsilon. The caller applies
/// softmax to the result to land on the simplex.
std::vector<double> reparameterize(const VariationalParams& params, const std::vector<double>& epsilon);

/// Closed-form KL(q ‖ p) between diagonal Gaussians; non-negative.
double gaussian_kl(const VariationalParams& params, const std::vector<double>& prior_m,
                   const std::vector<double>& prior_logvar);

struct AdamState {
  long step = 0;
  Tensor m, v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update in place; moments are lazily initialized to
/// zeros on first use.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

/// Loss callback for gradient checking: returns the loss at `params` and,
/// when `grads` is non-null, fills per-parameter analytic gradients.
using LossWithGrad = std::function<double(const std::vector<Tensor>& params, std::vector<Tensor>* grads)>;

/// Compares analytic gradients against central finite differences over up to
/// `max_coords_per_param` sampled coordinates per parameter; returns the
/// worst relative error. eps must be in [1e-6, 1e-3].
double grad_check(const LossWithGrad& loss_fn, const std::vector<Tensor>& params, double eps,
                  int max_coords_per_param, Rng& rng);

/// k-means++ seeding: picks k row indices of `points`, the first uniformly,
/// the rest with probability proportional to squared distance from the
/// nearest already-chosen row. Falls back to a uniform draw when every
/// remaining point coincides with a chosen center.
std::vector<int> kmeans_plus_plus_indices(const Tensor& points, int k, Rng& rng);

/// y = W.x + b with W (out x in), forward-only path for inference.
void linear_forward(const Tensor& w, const Tensor& b, const std::vector<double>& x, std::vector<double>& y);

/// Batch variant: Y (r x out) = X (r x in) . W^T + b.
Tensor linear_forward_batch(const Tensor& w, const Tensor& b, const Tensor& x);

}  // namespace tvq
