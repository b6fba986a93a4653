#include "chronos/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "chronos/error.hpp"
#include "chronos/random.hpp"

namespace chronos {

namespace {

constexpr double kNormGuard = 1e-12;
constexpr std::size_t kValidationTerms = 256;
constexpr std::size_t kProbeTerms = 1024;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::size_t rows_per_term(LossKind kind) { return kind == LossKind::Approximate ? 2 : 3; }

struct ForwardPass {
  // layer_inputs[i] feeds layer i; pre[i] is its affine output.
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre;
  Matrix output;
  Vector norms;
};

ForwardPass forward_batch(const NetworkParams& params, const Matrix& inputs) {
  ForwardPass pass;
  const std::size_t depth = params.layers.size();
  pass.layer_inputs.reserve(depth);
  pass.pre.reserve(depth);
  Matrix activation = inputs;
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& layer = params.layers[i];
    Matrix z = activation * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    pass.layer_inputs.push_back(std::move(activation));
    activation = i + 1 < depth ? Matrix(z.cwiseMax(0.0)) : z;
    pass.pre.push_back(std::move(z));
  }
  pass.norms = activation.rowwise().norm();
  pass.output = activation;
  for (Eigen::Index row = 0; row < pass.output.rows(); ++row) {
    pass.output.row(row) /= (pass.norms[row] + kNormGuard);
  }
  return pass;
}

double sq(const Matrix& y, Eigen::Index a, Eigen::Index b) { return (y.row(a) - y.row(b)).squaredNorm(); }

// Per-term signed residual e such that the term loss is |e|.
double residual(const Batch& batch, const Matrix& y, std::size_t t) {
  const auto base = static_cast<Eigen::Index>(t * rows_per_term(batch.kind));
  if (batch.kind == LossKind::Approximate) {
    return 2.0 * sq(y, base, base + 1) - 2.0 * (1.0 - batch.corr_rs[t]);
  }
  const Eigen::Index s = base, r = base + 1, u = base + 2;
  return 2.0 * (sq(y, r, s) - sq(y, r, u)) - 2.0 * (batch.corr_ru[t] - batch.corr_rs[t]);
}

void check_batch(const NetworkParams& params, const Batch& batch) {
  if (batch.terms() == 0) throw Error(ErrorKind::Empty, "batch has no terms");
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.terms() * rows_per_term(batch.kind)) {
    throw Error(ErrorKind::SizeMismatch, "batch input rows do not match its term count");
  }
  if (batch.kind == LossKind::Order && batch.corr_ru.size() != batch.terms()) {
    throw Error(ErrorKind::SizeMismatch, "order batch needs corr(r, u) per term");
  }
  if (static_cast<std::size_t>(batch.inputs.cols()) != params.input_width()) {
    throw Error(ErrorKind::DimensionMismatch, "batch input width does not match the network");
  }
}

Gradient zeros_like(const NetworkParams& params) {
  Gradient g;
  g.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    g.push_back(DenseLayer{Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                           Vector::Zero(layer.bias.size())});
  }
  return g;
}

}  // namespace

std::string_view to_string(LossKind kind) noexcept {
  return kind == LossKind::Approximate ? "approximate" : "order";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "approximate" || text == "approx" || text == "approximation") return LossKind::Approximate;
  if (text == "order") return LossKind::Order;
  throw Error(ErrorKind::InvalidArgument, "unknown loss '" + std::string(text) + "'");
}

TrainConfig TrainConfig::desk() {
  TrainConfig cfg;
  cfg.hidden_size = 128;
  cfg.iterations = 2000;
  cfg.batch_size = 64;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
  }
  if (batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch size must be positive");
  if (hidden_size == 0) throw Error(ErrorKind::InvalidArgument, "hidden size must be positive");
  if (m == 0) throw Error(ErrorKind::InvalidM, "embedding size m must be positive");
  if (log_every == 0) throw Error(ErrorKind::InvalidArgument, "log interval must be positive");
}

double loss_approximate(const NetworkParams& params, const NormalizedSeries& s, const NormalizedSeries& r) {
  const Embedder e = LearnedEmbedder{params};
  const double dist = squared_distance(embed(e, s), embed(e, r));
  return std::abs(2.0 * dist - 2.0 * (1.0 - pearson(s, r)));
}

double loss_order(const NetworkParams& params, const NormalizedSeries& s, const NormalizedSeries& r,
                  const NormalizedSeries& u) {
  const Embedder e = LearnedEmbedder{params};
  const auto fs = embed(e, s);
  const auto fr = embed(e, r);
  const auto fu = embed(e, u);
  const double embedded_gap = squared_distance(fr, fs) - squared_distance(fr, fu);
  return std::abs(2.0 * embedded_gap - 2.0 * (pearson(r, u) - pearson(r, s)));
}

double batch_loss(const NetworkParams& params, const Batch& batch) {
  check_batch(params, batch);
  const auto pass = forward_batch(params, batch.inputs);
  double total = 0.0;
  for (std::size_t t = 0; t < batch.terms(); ++t) total += std::abs(residual(batch, pass.output, t));
  return total / static_cast<double>(batch.terms());
}

LossAndGradient loss_and_gradient(const NetworkParams& params, const Batch& batch) {
  check_batch(params, batch);
  const auto pass = forward_batch(params, batch.inputs);
  const Matrix& y = pass.output;
  const double inv_terms = 1.0 / static_cast<double>(batch.terms());

  // dL/dy, row per input.
  Matrix grad_y = Matrix::Zero(y.rows(), y.cols());
  double total = 0.0;
  for (std::size_t t = 0; t < batch.terms(); ++t) {
    const double e = residual(batch, y, t);
    total += std::abs(e);
    const double g = sign(e) * inv_terms;
    if (g == 0.0) continue;
    const auto base = static_cast<Eigen::Index>(t * rows_per_term(batch.kind));
    if (batch.kind == LossKind::Approximate) {
      const auto diff = (y.row(base) - y.row(base + 1)).eval();
      grad_y.row(base) += 4.0 * g * diff;
      grad_y.row(base + 1) -= 4.0 * g * diff;
    } else {
      const Eigen::Index s = base, r = base + 1, u = base + 2;
      grad_y.row(r) += 4.0 * g * (y.row(u) - y.row(s));
      grad_y.row(s) -= 4.0 * g * (y.row(r) - y.row(s));
      grad_y.row(u) += 4.0 * g * (y.row(r) - y.row(u));
    }
  }

  // Back through y = z / (||z|| + guard).
  const Matrix& z_out = pass.pre.back();
  Matrix grad_z = Matrix::Zero(z_out.rows(), z_out.cols());
  for (Eigen::Index row = 0; row < z_out.rows(); ++row) {
    const double norm = pass.norms[row];
    const double denom = norm + kNormGuard;
    grad_z.row(row) = grad_y.row(row) / denom;
    if (norm > 0.0) {
      const double proj = z_out.row(row).dot(grad_y.row(row));
      grad_z.row(row) -= z_out.row(row) * (proj / (norm * denom * denom));
    }
  }

  LossAndGradient out;
  out.loss = total * inv_terms;
  out.gradient = zeros_like(params);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    out.gradient[i].weights.noalias() = grad_z.transpose() * pass.layer_inputs[i];
    out.gradient[i].bias = grad_z.colwise().sum().transpose();
    if (i == 0) break;
    Matrix grad_a = grad_z * params.layers[i].weights;
    const Matrix& z_prev = pass.pre[i - 1];
    grad_z = (z_prev.array() > 0.0).select(grad_a, 0.0);
  }
  return out;
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
  AdamState state;
  state.first_moment = ::chronos::zeros_like(params);
  state.second_moment = ::chronos::zeros_like(params);
  return state;
}

void adam_step(NetworkParams& params, AdamState& state, const Gradient& gradient, double learning_rate) {
  if (gradient.size() != params.layers.size() || state.first_moment.size() != params.layers.size()) {
    throw Error(ErrorKind::DimensionMismatch, "gradient/state shape does not match the network");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -=
        learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.epsilon);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& g = gradient[i];
    auto& layer = params.layers[i];
    if (g.weights.rows() != layer.weights.rows() || g.weights.cols() != layer.weights.cols() ||
        g.bias.size() != layer.bias.size()) {
      throw Error(ErrorKind::DimensionMismatch, "gradient layer " + std::to_string(i) + " has the wrong shape");
    }
    update(layer.weights, state.first_moment[i].weights, state.second_moment[i].weights, g.weights);
    update(layer.bias, state.first_moment[i].bias, state.second_moment[i].bias, g.bias);
  }
}

Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw Error(ErrorKind::InvalidArgument, "Xavier init needs positive dimensions");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Matrix w(rows, cols);
  double* data = w.data();
  for (Eigen::Index i = 0; i < w.size(); ++i) data[i] = rng.uniform(-bound, bound);
  return w;
}

NetworkParams init_network(std::size_t input, std::size_t hidden, std::size_t output, std::uint64_t seed) {
  NetworkParams params;
  params.seed = seed;
  params.layers.push_back(DenseLayer{xavier_uniform(hidden, input, mix_seed(seed, 0)), Vector::Zero(hidden)});
  params.layers.push_back(DenseLayer{xavier_uniform(output, hidden, mix_seed(seed, 1)), Vector::Zero(output)});
  return params;
}

namespace {

struct Partition {
  Matrix features;
  std::vector<NormalizedSeries> series;
};

Partition prepare(const Dataset& ds, const std::unordered_map<RecordId, std::size_t>& pos,
                  const std::vector<RecordId>& ids, std::size_t width) {
  Partition part;
  part.features.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(width));
  part.series.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = pos.find(ids[i]);
    if (it == pos.end()) throw Error(ErrorKind::InvalidArgument, "split id " + std::to_string(ids[i]) + " not in dataset");
    part.series.push_back(normalize(ds.series[it->second].values));
    const auto f = features(part.series.back(), width);
    part.features.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), f.size());
  }
  return part;
}

Batch sample_batch(const Partition& part, LossKind kind, std::size_t terms, Rng& rng) {
  const std::size_t per = rows_per_term(kind);
  Batch batch;
  batch.kind = kind;
  batch.inputs.resize(static_cast<Eigen::Index>(terms * per), part.features.cols());
  batch.corr_rs.resize(terms);
  if (kind == LossKind::Order) batch.corr_ru.resize(terms);
  const std::size_t n = part.series.size();
  for (std::size_t t = 0; t < terms; ++t) {
    std::size_t idx[3] = {};
    for (std::size_t k = 0; k < per; ++k) {
      idx[k] = rng.index(n);
      batch.inputs.row(static_cast<Eigen::Index>(t * per + k)) = part.features.row(static_cast<Eigen::Index>(idx[k]));
    }
    batch.corr_rs[t] = pearson(part.series[idx[1]], part.series[idx[0]]);
    if (kind == LossKind::Order) batch.corr_ru[t] = pearson(part.series[idx[1]], part.series[idx[2]]);
  }
  return batch;
}

}  // namespace

TrainResult train(const Dataset& ds, const SplitDataset& split, const TrainConfig& cfg, const TrainObserver& observer) {
  cfg.validate();
  if (split.train.size() < 3) {
    throw Error(ErrorKind::InsufficientData,
                "training partition needs at least 3 series, got " + std::to_string(split.train.size()));
  }
  const auto start = std::chrono::steady_clock::now();
  const auto pos = positions_by_id(ds);
  const std::size_t width = feature_width(ds.length());
  const Partition train_part = prepare(ds, pos, split.train, width);
  const Partition val_part = prepare(ds, pos, split.validation, width);

  Rng sampler(mix_seed(cfg.seed, 101));
  Rng val_rng(mix_seed(cfg.seed, 102));
  Rng probe_rng(mix_seed(cfg.seed, 103));
  const Batch probe = sample_batch(train_part, cfg.loss, kProbeTerms, probe_rng);
  std::optional<Batch> validation;
  if (!val_part.series.empty()) validation = sample_batch(val_part, cfg.loss, kValidationTerms, val_rng);

  TrainResult result;
  result.params = init_network(width, cfg.hidden_size, cfg.m, cfg.seed);
  result.initial_loss = batch_loss(result.params, probe);

  auto log_row = [&](std::size_t iteration, double train_loss) {
    TrainLogRow row;
    row.iteration = iteration;
    row.train_loss = train_loss;
    row.val_loss = validation ? batch_loss(result.params, *validation) : std::numeric_limits<double>::quiet_NaN();
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);
    if (observer) observer(row);
  };

  AdamState adam = AdamState::zeros_like(result.params);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (it % cfg.log_every == 0) log_row(it, it == 0 ? result.initial_loss : batch_loss(result.params, probe));
    const Batch batch = sample_batch(train_part, cfg.loss, cfg.batch_size, sampler);
    const auto step = loss_and_gradient(result.params, batch);
    adam_step(result.params, adam, step.gradient, cfg.learning_rate);
  }
  result.final_loss = batch_loss(result.params, probe);
  log_row(cfg.iterations, result.final_loss);
  return result;
}

}  // namespace chronos
