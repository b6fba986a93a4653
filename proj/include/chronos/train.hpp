#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "chronos/datasets.hpp"
#include "chronos/embed.hpp"

namespace chronos {

enum class LossKind { Approximate, Order };

std::string_view to_string(LossKind kind) noexcept;
/// Accepts "approximate"/"approx" and "order" (InvalidArgument otherwise).
LossKind parse_loss_kind(std::string_view text);

/// Training hyper-parameters. The defaults are the full-size profile.
struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 256;
  std::size_t iterations = 10000;
  std::size_t hidden_size = 1024;
  std::size_t m = 16;
  LossKind loss = LossKind::Order;
  std::uint64_t seed = 0;
  /// Validation loss is logged every this many iterations.
  std::size_t log_every = 100;

  /// Small profile for CI and laptops: hidden 128, 2000 iterations, batch 64.
  static TrainConfig desk();
  /// Throws InvalidArgument unless every numeric field is positive.
  void validate() const;
};

// Losses evaluated with the strict network (inference path). Both include the
// factor 2 on embedding distances that accounts for conjugate-symmetric
// coefficients.

/// |2 ||f(s) - f(r)||^2 - 2 (1 - corr(s, r))|
double loss_approximate(const NetworkParams& params, const NormalizedSeries& s, const NormalizedSeries& r);

/// |2 (||f(r) - f(s)||^2 - ||f(r) - f(u)||^2) - 2 (corr(r, u) - corr(r, s))|
double loss_order(const NetworkParams& params, const NormalizedSeries& s, const NormalizedSeries& r,
                  const NormalizedSeries& u);

/// A mini-batch of pairs (2 input rows per term: s, r) or triples (3 rows per
/// term: s, r, u). corr_rs[t] = corr(r, s); corr_ru[t] = corr(r, u) and is
/// unused for pairs.
struct Batch {
  LossKind kind = LossKind::Approximate;
  Matrix inputs;
  std::vector<double> corr_rs;
  std::vector<double> corr_ru;

  std::size_t terms() const noexcept { return corr_rs.size(); }
};

/// Parameter-shaped gradient (one weight matrix and bias per layer).
using Gradient = std::vector<DenseLayer>;

struct LossAndGradient {
  double loss = 0.0;
  Gradient gradient;
};

/// Mean batch loss under the training forward pass, whose output
/// normalization divides by (||z|| + 1e-12).
double batch_loss(const NetworkParams& params, const Batch& batch);

/// Mean loss and its (sub)gradient. sign(0) = 0 at the absolute value and the
/// ReLU derivative is 0 at 0.
LossAndGradient loss_and_gradient(const NetworkParams& params, const Batch& batch);

struct AdamState {
  Gradient first_moment;
  Gradient second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Zero moments shaped like params.
  static AdamState zeros_like(const NetworkParams& params);
};

/// One bias-corrected ADAM update, in place.
void adam_step(NetworkParams& params, AdamState& state, const Gradient& gradient, double learning_rate);

/// rows x cols weights uniform in +/- sqrt(6 / (rows + cols)).
Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// input -> hidden (ReLU) -> output, Xavier weights, zero biases. Layer i
/// draws from stream mix_seed(seed, i).
NetworkParams init_network(std::size_t input, std::size_t hidden, std::size_t output, std::uint64_t seed);

struct TrainLogRow {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  /// NaN when the validation partition is empty.
  double val_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<TrainLogRow> log;
  /// Mean loss on a fixed probe batch drawn from the training partition,
  /// before the first and after the last update.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

using TrainObserver = std::function<void(const TrainLogRow&)>;

/// Runs cfg.iterations ADAM steps on uniformly sampled pairs or triples from
/// the training partition (with replacement). No early stopping; the final
/// parameters are returned. Throws InsufficientData when the training
/// partition has fewer than 3 series.
TrainResult train(const Dataset& ds, const SplitDataset& split, const TrainConfig& cfg,
                  const TrainObserver& observer = {});

}  // namespace chronos
