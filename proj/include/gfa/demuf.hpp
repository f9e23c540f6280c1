#pragma once

// Desk-scale DEMUF learners: learnable feature masks (binary concrete), the
// normalized second-order filter block g_eps(L~)^h, MLP heads, and a
// full-batch Adam training loop. Gradients are hand-derived for this fixed
// operation set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gfa/errors.hpp"
#include "gfa/filters.hpp"
#include "gfa/graph.hpp"
#include "gfa/synth.hpp"

namespace gfa::demuf {

enum class Variant { p_demuf, t_demuf, mlp, fixed_low };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::p_demuf: return "p-demuf";
    case Variant::t_demuf: return "t-demuf";
    case Variant::mlp: return "mlp";
    case Variant::fixed_low: return "fixed-low";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "p-demuf") return Variant::p_demuf;
  if (s == "t-demuf") return Variant::t_demuf;
  if (s == "mlp") return Variant::mlp;
  if (s == "fixed-low") return Variant::fixed_low;
  throw InvalidInput("unknown model '" + s + "' (p-demuf, t-demuf, mlp, fixed-low)");
}

struct ModelConfig {
  Variant variant = Variant::p_demuf;
  std::size_t filters = 2;           // N
  std::vector<int> depths{1};        // h_k; one entry is broadcast
  std::size_t hidden = 64;
  std::size_t mlp_layers = 2;        // final MLP, output layer included
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  std::size_t epochs = 200;
  double constraint_weight = 1.0;    // beta, on constraint / n
  double tau_start = 1.0;
  double tau_end = 0.1;
  bool masking = true;               // false: masks frozen to all-ones
  std::uint64_t seed = 0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  double epsilon_limit = 0.999;

  int depth(std::size_t k) const { return depths.size() == 1 ? depths[0] : depths.at(k); }

  void validate() const {
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
      throw InvalidInput("split fractions must sum to 1");
    if (filters < 1) throw InvalidInput("need at least one filter");
    if (depths.empty()) throw InvalidInput("need a filter depth");
    if (depths.size() != 1 && depths.size() != filters) throw InvalidInput("one depth per filter or a single depth");
    for (int h : depths)
      if (h < 0) throw InvalidInput("filter depth must be >= 0");
    if (mlp_layers < 1) throw InvalidInput("final MLP needs at least one layer");
    if (dropout < 0 || dropout >= 1) throw InvalidInput("dropout must be in [0,1)");
  }
};

// ---------------------------------------------------------------------------
// Parameters and noise.

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;  // Adam moments
  Matrix v;
  bool decay = false;
  bool kink_at_zero = false;  // |.| in g_eps: not differentiable at exactly 0
};

class ParamStore {
 public:
  std::size_t add(std::string name, Matrix init, bool decay = false) {
    Param p{std::move(name), std::move(init), {}, {}, {}, decay};
    p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.m = p.grad;
    p.v = p.grad;
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t c = 0;
    for (const auto& p : params_) c += static_cast<std::size_t>(p.value.size());
    return c;
  }
  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }
  double decay_penalty(double wd) const {
    double acc = 0.0;
    for (const auto& p : params_)
      if (p.decay) acc += p.value.squaredNorm();
    return 0.5 * wd * acc;
  }
  void add_decay_grad(double wd) {
    for (auto& p : params_)
      if (p.decay) p.grad += wd * p.value;
  }

 private:
  std::vector<Param> params_;
};

/// Random draws consumed by a training forward pass. A recorded tape can be
/// replayed so that repeated forwards see the same dropout and Gumbel noise.
class NoiseTape {
 public:
  explicit NoiseTape(std::uint64_t seed) : rng_(seed) {}

  void record() {
    draws_.clear();
    cursor_ = 0;
    replay_ = false;
  }
  void replay() {
    cursor_ = 0;
    replay_ = true;
  }

  Matrix dropout(Eigen::Index rows, Eigen::Index cols, double p) {
    return next(rows, cols, [&] {
      return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p ? 0.0 : 1.0 / (1.0 - p);
    });
  }
  Matrix gumbel(Eigen::Index rows, Eigen::Index cols) {
    return next(rows, cols, [&] {
      double u = std::uniform_real_distribution<double>(1e-12, 1.0 - 1e-12)(rng_);
      return -std::log(-std::log(u));
    });
  }

 private:
  template <class Gen>
  Matrix next(Eigen::Index rows, Eigen::Index cols, Gen gen) {
    if (replay_) {
      if (cursor_ >= draws_.size()) throw TrainingError("noise tape exhausted on replay");
      return draws_[cursor_++];
    }
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gen();
    draws_.push_back(m);
    return m;
  }

  std::mt19937_64 rng_;
  std::vector<Matrix> draws_;
  std::size_t cursor_ = 0;
  bool replay_ = false;
};

// ---------------------------------------------------------------------------
// Building blocks.

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

inline Matrix glorot(std::mt19937_64& rng, Eigen::Index in, Eigen::Index out) {
  double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix w(in, out);
  for (Eigen::Index j = 0; j < out; ++j)
    for (Eigen::Index i = 0; i < in; ++i) w(i, j) = u(rng);
  return w;
}

/// Stack of linear layers with ReLU between them and dropout on each input.
struct Mlp {
  std::vector<std::size_t> weights, biases;
  double dropout = 0.0;
  bool relu_out = false;

  struct Cache {
    std::vector<Matrix> inputs;  // after dropout
    std::vector<Matrix> drops;
    std::vector<Matrix> pre;
  } cache;

  static Mlp make(ParamStore& ps, std::mt19937_64& rng, const std::string& name, std::vector<Eigen::Index> sizes,
                  double dropout, bool relu_out) {
    Mlp m;
    m.dropout = dropout;
    m.relu_out = relu_out;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      m.weights.push_back(ps.add(name + ".w" + std::to_string(i), glorot(rng, sizes[i], sizes[i + 1]), true));
      // Nonzero biases keep fully dropped rows off the ReLU kink.
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      Matrix b(1, sizes[i + 1]);
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(0, j) = u(rng);
      m.biases.push_back(ps.add(name + ".b" + std::to_string(i), b));
    }
    return m;
  }

  Matrix forward(const ParamStore& ps, const Matrix& x, bool train, NoiseTape* noise) {
    cache = {};
    Matrix h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (train && dropout > 0.0) {
        Matrix d = noise->dropout(h.rows(), h.cols(), dropout);
        h = h.cwiseProduct(d);
        cache.drops.push_back(std::move(d));
      }
      cache.inputs.push_back(h);
      Matrix pre = h * ps[weights[i]].value;
      pre.rowwise() += ps[biases[i]].value.row(0);
      cache.pre.push_back(pre);
      bool act = i + 1 < weights.size() || relu_out;
      h = act ? relu(pre) : pre;
    }
    return h;
  }

  Matrix backward(ParamStore& ps, const Matrix& dout) const {
    Matrix d = dout;
    for (std::size_t i = weights.size(); i-- > 0;) {
      bool act = i + 1 < weights.size() || relu_out;
      if (act) d = d.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
      ps[weights[i]].grad += cache.inputs[i].transpose() * d;
      ps[biases[i]].grad += d.colwise().sum();
      d = (d * ps[weights[i]].value.transpose()).eval();
      if (!cache.drops.empty()) d = d.cwiseProduct(cache.drops[i]);
    }
    return d;
  }
};

/// Feature mask from per-feature (keep, drop) logits. Training draws a
/// binary-concrete sample m = sigmoid((l0 - l1 + g0 - g1) / tau); evaluation
/// keeps feature j iff l0 >= l1.
struct Mask {
  std::size_t logits;
  Vector value;
  Vector slope;  // dm/d(l0 - l1), cached for backward

  static Mask make(ParamStore& ps, std::mt19937_64& rng, const std::string& name, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 0.01);
    Matrix l(d, 2);
    for (Eigen::Index j = 0; j < d; ++j) {
      l(j, 0) = 1.0 + n(rng);
      l(j, 1) = n(rng);
    }
    return Mask{ps.add(name, l), {}, {}};
  }

  const Vector& forward(const ParamStore& ps, bool train, NoiseTape* noise, double tau) {
    const Matrix& l = ps[logits].value;
    value.resize(l.rows());
    slope.setZero(l.rows());
    if (!train) {
      for (Eigen::Index j = 0; j < l.rows(); ++j) value(j) = l(j, 0) >= l(j, 1) ? 1.0 : 0.0;
      return value;
    }
    Matrix g = noise->gumbel(l.rows(), 2);
    for (Eigen::Index j = 0; j < l.rows(); ++j) {
      double z = (l(j, 0) - l(j, 1) + g(j, 0) - g(j, 1)) / tau;
      double m = 1.0 / (1.0 + std::exp(-z));
      value(j) = m;
      slope(j) = m * (1.0 - m) / tau;
    }
    return value;
  }

  void backward(ParamStore& ps, const Vector& dvalue) const {
    Vector d = dvalue.cwiseProduct(slope);
    ps[logits].grad.col(0) += d;
    ps[logits].grad.col(1) -= d;
  }

  double density(const ParamStore& ps) const {
    const Matrix& l = ps[logits].value;
    return (l.col(0).array() >= l.col(1).array()).cast<double>().mean();
  }
};

/// (g(L~))^h Z in the eigenbasis. Either a learnable g_eps or a fixed response.
struct FilterBlock {
  std::optional<std::size_t> epsilon;  // learnable parameter index
  Vector fixed_response;               // used when epsilon is empty
  int depth = 1;

  Vector resp_pow, dresp_pow;  // r^h and d(r^h)/d eps
  Matrix spec_in;              // U^T Z

  double eps(const ParamStore& ps) const { return epsilon ? ps[*epsilon].value(0, 0) : 0.0; }

  Matrix forward(const ParamStore& ps, const SpectralDecomposition& sd, const Matrix& z) {
    if (depth == 0) return z;
    const Vector& lam = sd.eigenvalues;
    resp_pow.resize(lam.size());
    dresp_pow.setZero(lam.size());
    if (epsilon) {
      NormalizedSecondOrderFilter g(eps(ps));
      for (Eigen::Index i = 0; i < lam.size(); ++i) {
        double r = g(lam(i));
        resp_pow(i) = std::pow(r, depth);
        dresp_pow(i) = depth * std::pow(r, depth - 1) * g.d_epsilon(lam(i));
      }
    } else {
      resp_pow = fixed_response.array().pow(depth);
    }
    spec_in = sd.eigenvectors.transpose() * z;
    return sd.eigenvectors * (resp_pow.asDiagonal() * spec_in);
  }

  Matrix backward(ParamStore& ps, const SpectralDecomposition& sd, const Matrix& dout) const {
    if (depth == 0) return dout;
    Matrix b = sd.eigenvectors.transpose() * dout;
    if (epsilon) ps[*epsilon].grad(0, 0) += dresp_pow.dot(spec_in.cwiseProduct(b).rowwise().sum());
    return sd.eigenvectors * (resp_pow.asDiagonal() * b);
  }
};

// ---------------------------------------------------------------------------
// Models.

struct ForwardResult {
  Matrix logits;
  std::vector<double> constraints;  // T-DEMUF: |S_k - X_k|^2 per layer

  Matrix scores() const {
    Matrix s(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      auto e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
      s.row(i) = e / e.sum();
    }
    return s;
  }
};

inline std::vector<double> initial_epsilons(std::size_t n) {
  if (n == 1) return {0.5};
  std::vector<double> e(n);
  for (std::size_t k = 0; k < n; ++k) e[k] = -0.5 + static_cast<double>(k) / static_cast<double>(n - 1);
  return e;
}

class Model {
 public:
  Model(const ModelConfig& cfg, Eigen::Index features, Eigen::Index classes, const SpectralDecomposition& sd)
      : cfg_(cfg), sd_(&sd), d_(features), classes_(classes) {
    cfg_.validate();
    std::mt19937_64 rng(mix_seed(cfg.seed, 1));
    const auto hid = static_cast<Eigen::Index>(cfg.hidden);
    if (cfg.variant == Variant::t_demuf) {
      build_tree(rng, hid);
      return;
    }
    // P-DEMUF, and the single-branch baselines sharing its architecture.
    bool base = cfg.variant == Variant::mlp || cfg.variant == Variant::fixed_low;
    std::size_t n = base ? 1 : cfg.filters;
    use_masks_ = cfg.masking && !base;
    auto eps0 = initial_epsilons(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::string tag = "branch" + std::to_string(k);
      if (use_masks_) masks_.push_back(Mask::make(params_, rng, tag + ".mask", features));
      branches_.push_back(Mlp::make(params_, rng, tag + ".mlp", {features, hid}, cfg.dropout, true));
      FilterBlock f;
      if (cfg.variant == Variant::p_demuf) {
        f.epsilon = params_.add(tag + ".epsilon", Matrix::Constant(1, 1, eps0[k]));
        params_[*f.epsilon].kink_at_zero = true;
        f.depth = cfg.depth(k);
      } else if (cfg.variant == Variant::fixed_low) {
        f.fixed_response = gcn_normalized_filter().responses(sd.eigenvalues);
        f.depth = cfg.depth(0);
      } else {
        f.depth = 0;
      }
      filters_.push_back(std::move(f));
      omegas_.push_back(params_.add(tag + ".omega", Matrix::Constant(1, 1, 1.0)));
    }
    head_ = make_head(rng, static_cast<Eigen::Index>(n) * hid, hid);
  }

  Model(const ModelConfig&, Eigen::Index, Eigen::Index, SpectralDecomposition&&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  ForwardResult forward(const Matrix& x, bool train, NoiseTape* noise, double tau) {
    if (x.cols() != d_ || x.rows() != static_cast<Eigen::Index>(sd_->size()))
      throw InvalidInput("feature matrix shape does not match the model");
    return cfg_.variant == Variant::t_demuf ? forward_tree(x, train, noise, tau) : forward_plain(x, train, noise, tau);
  }

  /// Accumulates gradients of sum(dlogits .* logits) + constraint_scale * sum(constraints).
  void backward(const Matrix& dlogits, double constraint_scale) {
    if (cfg_.variant == Variant::t_demuf)
      backward_tree(dlogits, constraint_scale);
    else
      backward_plain(dlogits);
  }

  std::vector<double> epsilons() const {
    std::vector<double> e;
    for (const auto& f : filters_)
      if (f.epsilon) e.push_back(f.eps(params_));
    return e;
  }

  std::vector<double> mask_densities() const {
    std::vector<double> d;
    for (const auto& m : masks_) d.push_back(m.density(params_));
    for (const auto& m : stop_masks_) d.push_back(m.density(params_));
    return d;
  }

  /// Keeps every eps strictly inside (-1, 1).
  void clamp_epsilons() {
    for (const auto& f : filters_)
      if (f.epsilon) {
        double& e = params_[*f.epsilon].value(0, 0);
        e = std::clamp(e, -cfg_.epsilon_limit, cfg_.epsilon_limit);
      }
  }

 private:
  Mlp make_head(std::mt19937_64& rng, Eigen::Index in, Eigen::Index hid) {
    std::vector<Eigen::Index> sizes{in};
    for (std::size_t i = 1; i < cfg_.mlp_layers; ++i) sizes.push_back(hid);
    sizes.push_back(classes_);
    return Mlp::make(params_, rng, "head", sizes, cfg_.dropout, false);
  }

  void build_tree(std::mt19937_64& rng, Eigen::Index hid) {
    use_masks_ = cfg_.masking;
    const std::size_t n = cfg_.filters;
    auto eps0 = initial_epsilons(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::string tag = "layer" + std::to_string(k);
      if (use_masks_) masks_.push_back(Mask::make(params_, rng, tag + ".mask", d_));
      if (use_masks_ && k + 1 < n) stop_masks_.push_back(Mask::make(params_, rng, tag + ".split_mask", d_));
      FilterBlock f;
      f.epsilon = params_.add(tag + ".epsilon", Matrix::Constant(1, 1, eps0[k]));
      params_[*f.epsilon].kink_at_zero = true;
      f.depth = cfg_.depth(k);
      filters_.push_back(std::move(f));
      omegas_.push_back(params_.add(tag + ".omega", Matrix::Constant(1, 1, 1.0)));
    }
    head_ = make_head(rng, static_cast<Eigen::Index>(n) * d_, hid);
  }

  Matrix masked(const Matrix& x, std::vector<Mask>& ms, std::size_t k, bool train, NoiseTape* noise, double tau) {
    if (!use_masks_) return x;
    return x * ms[k].forward(params_, train, noise, tau).asDiagonal();
  }

  ForwardResult forward_plain(const Matrix& x, bool train, NoiseTape* noise, double tau) {
    const std::size_t n = branches_.size();
    const auto hid = static_cast<Eigen::Index>(cfg_.hidden);
    inputs_.assign(n, Matrix());
    branch_out_.assign(n, Matrix());
    Matrix cat(x.rows(), static_cast<Eigen::Index>(n) * hid);
    for (std::size_t k = 0; k < n; ++k) {
      inputs_[k] = x;
      Matrix xm = masked(x, masks_, k, train, noise, tau);
      Matrix z = branches_[k].forward(params_, xm, train, noise);
      branch_out_[k] = filters_[k].forward(params_, *sd_, z);
      cat.middleCols(static_cast<Eigen::Index>(k) * hid, hid) = params_[omegas_[k]].value(0, 0) * branch_out_[k];
    }
    return {head_.forward(params_, cat, train, noise), {}};
  }

  void backward_plain(const Matrix& dlogits) {
    const auto hid = static_cast<Eigen::Index>(cfg_.hidden);
    Matrix dcat = head_.backward(params_, dlogits);
    for (std::size_t k = 0; k < branches_.size(); ++k) {
      Matrix dblock = dcat.middleCols(static_cast<Eigen::Index>(k) * hid, hid);
      params_[omegas_[k]].grad(0, 0) += dblock.cwiseProduct(branch_out_[k]).sum();
      Matrix dh = params_[omegas_[k]].value(0, 0) * dblock;
      Matrix dz = filters_[k].backward(params_, *sd_, dh);
      Matrix dxm = branches_[k].backward(params_, dz);
      if (use_masks_) masks_[k].backward(params_, dxm.cwiseProduct(inputs_[k]).colwise().sum().transpose());
    }
  }

  // H_1 = F_0(X . M_1); for k >= 1: S_k = X_{k-1} . M'_k, X_k = F_k(S_k),
  // constraint |S_k - X_k|^2, H_{k+1} = X_k . M_{k+1}.
  ForwardResult forward_tree(const Matrix& x, bool train, NoiseTape* noise, double tau) {
    const std::size_t n = filters_.size();
    states_.assign(n, Matrix());   // X_0 .. X_{n-1}
    splits_.assign(n, Matrix());   // S_1 .. S_{n-1} at index k
    heads_.assign(n, Matrix());    // H_1 .. H_n at index 0..n-1
    states_[0] = x;
    ForwardResult out;
    heads_[0] = filters_[0].forward(params_, *sd_, masked(x, masks_, 0, train, noise, tau));
    for (std::size_t k = 1; k < n; ++k) {
      splits_[k] = masked(states_[k - 1], stop_masks_, k - 1, train, noise, tau);
      states_[k] = filters_[k].forward(params_, *sd_, splits_[k]);
      out.constraints.push_back((splits_[k] - states_[k]).squaredNorm());
      heads_[k] = masked(states_[k], masks_, k, train, noise, tau);
    }
    Matrix cat(x.rows(), static_cast<Eigen::Index>(n) * d_);
    for (std::size_t k = 0; k < n; ++k)
      cat.middleCols(static_cast<Eigen::Index>(k) * d_, d_) = params_[omegas_[k]].value(0, 0) * heads_[k];
    out.logits = head_.forward(params_, cat, train, noise);
    return out;
  }

  void backward_tree(const Matrix& dlogits, double constraint_scale) {
    const std::size_t n = filters_.size();
    Matrix dcat = head_.backward(params_, dlogits);
    std::vector<Matrix> dheads(n);
    for (std::size_t k = 0; k < n; ++k) {
      Matrix dblock = dcat.middleCols(static_cast<Eigen::Index>(k) * d_, d_);
      params_[omegas_[k]].grad(0, 0) += dblock.cwiseProduct(heads_[k]).sum();
      dheads[k] = params_[omegas_[k]].value(0, 0) * dblock;
    }
    Matrix dstate;  // gradient flowing into X_k from deeper layers
    for (std::size_t k = n; k-- > 1;) {
      Matrix dx = use_masks_ ? Matrix(dheads[k] * masks_[k].value.asDiagonal()) : dheads[k];
      if (use_masks_) masks_[k].backward(params_, dheads[k].cwiseProduct(states_[k]).colwise().sum().transpose());
      if (dstate.size()) dx += dstate;
      Matrix diff = splits_[k] - states_[k];
      dx -= 2.0 * constraint_scale * diff;
      Matrix ds = filters_[k].backward(params_, *sd_, dx);
      ds += 2.0 * constraint_scale * diff;
      if (use_masks_) {
        stop_masks_[k - 1].backward(params_, ds.cwiseProduct(states_[k - 1]).colwise().sum().transpose());
        dstate = ds * stop_masks_[k - 1].value.asDiagonal();
      } else {
        dstate = ds;
      }
    }
    Matrix dz = filters_[0].backward(params_, *sd_, dheads[0]);
    if (use_masks_) masks_[0].backward(params_, dz.cwiseProduct(states_[0]).colwise().sum().transpose());
  }

  ModelConfig cfg_;
  const SpectralDecomposition* sd_;
  Eigen::Index d_;
  Eigen::Index classes_;
  ParamStore params_;
  bool use_masks_ = false;
  std::vector<Mask> masks_;       // Phi masks M_k
  std::vector<Mask> stop_masks_;  // Psi masks M'_k (tree only)
  std::vector<Mlp> branches_;
  std::vector<FilterBlock> filters_;
  std::vector<std::size_t> omegas_;
  Mlp head_;

  std::vector<Matrix> inputs_, branch_out_;
  std::vector<Matrix> states_, splits_, heads_;
};

// ---------------------------------------------------------------------------
// Data and training.

struct Split {
  std::vector<std::size_t> train, val, test;
};

inline Split make_split(std::size_t n, double train_fraction, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 3));
  std::shuffle(idx.begin(), idx.end(), rng);
  auto ntr = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  auto nva = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  ntr = std::min(ntr, n);
  nva = std::min(nva, n - ntr);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntr));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(ntr), idx.begin() + static_cast<std::ptrdiff_t>(ntr + nva));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(ntr + nva), idx.end());
  return s;
}

struct NodeData {
  Matrix features;
  std::vector<int> labels;
  Eigen::Index classes = 0;
  Split split;
};

inline void check_split(const Split& s, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (auto i : *part) {
      if (i >= n) throw InvalidInput("split index out of range");
      if (seen[i]++) throw InvalidInput("split index sets overlap");
    }
  if (s.train.empty()) throw InvalidInput("empty training split");
}

struct LossValue {
  double total = 0.0;
  double cross_entropy = 0.0;
  double constraint = 0.0;
  double decay = 0.0;
};

/// Loss on the training nodes and its gradient w.r.t. logits.
inline LossValue training_loss(const ForwardResult& fr, const NodeData& data, const ModelConfig& cfg,
                               const ParamStore& ps, Matrix* dlogits) {
  LossValue lv;
  Matrix p = fr.scores();
  const double scale = 1.0 / static_cast<double>(data.split.train.size());
  if (dlogits) dlogits->setZero(fr.logits.rows(), fr.logits.cols());
  for (auto i : data.split.train) {
    const auto r = static_cast<Eigen::Index>(i);
    const int y = data.labels[i];
    double mx = fr.logits.row(r).maxCoeff();
    double lse = mx + std::log((fr.logits.row(r).array() - mx).exp().sum());
    lv.cross_entropy -= (fr.logits(r, y) - lse) * scale;
    if (dlogits) {
      dlogits->row(r) = p.row(r) * scale;
      (*dlogits)(r, y) -= scale;
    }
  }
  const double n = static_cast<double>(data.features.rows());
  for (double c : fr.constraints) lv.constraint += cfg.constraint_weight * c / n;
  lv.decay = ps.decay_penalty(cfg.weight_decay);
  lv.total = lv.cross_entropy + lv.constraint + lv.decay;
  return lv;
}

inline double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  std::size_t hit = 0;
  for (auto i : idx) {
    Eigen::Index arg;
    logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    if (arg == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double constraint = 0.0;
  double tau = 1.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_val_acc = -1.0;
  double test_acc = 0.0;   // at the best validation epoch
  double train_acc = 0.0;  // at the best validation epoch
  std::vector<double> epsilons;       // at the best validation epoch
  std::vector<double> mask_densities; // at the best validation epoch
  double max_response = 0.0;          // max over filters and eigenvalues of g_eps
  double min_response = 0.0;
};

class Trainer {
 public:
  Trainer(const NodeData& data, const SpectralDecomposition& sd, const ModelConfig& cfg)
      : data_(data), sd_(sd), model_(cfg, data.features.cols(), data.classes, sd), noise_(mix_seed(cfg.seed, 2)) {
    if (data.labels.size() != static_cast<std::size_t>(data.features.rows()))
      throw InvalidInput("label count does not match feature rows");
    check_split(data.split, data.labels.size());
  }

  // The spectrum is held by reference.
  Trainer(const NodeData&, SpectralDecomposition&&, const ModelConfig&) = delete;

  Model& model() { return model_; }
  std::size_t epoch() const { return epoch_; }

  double tau() const {
    const auto& c = model_.config();
    if (c.epochs <= 1) return c.tau_start;
    double t = static_cast<double>(std::min(epoch_, c.epochs - 1)) / static_cast<double>(c.epochs - 1);
    return c.tau_start * std::pow(c.tau_end / c.tau_start, t);
  }

  /// One full-batch Adam step followed by an evaluation pass.
  EpochMetrics step() {
    const auto& cfg = model_.config();
    const double t = tau();
    auto& ps = model_.params();
    noise_.record();
    ForwardResult fr = model_.forward(data_.features, true, &noise_, t);
    Matrix dlogits;
    LossValue lv = training_loss(fr, data_, cfg, ps, &dlogits);
    if (!std::isfinite(lv.total)) {
      std::ostringstream os;
      os << "non-finite loss at epoch " << epoch_ << " (cross-entropy " << lv.cross_entropy << ", constraint "
         << lv.constraint << ", decay " << lv.decay << ", logits |.|_max " << fr.logits.cwiseAbs().maxCoeff() << ")";
      throw TrainingError(os.str());
    }
    ps.zero_grad();
    model_.backward(dlogits, cfg.constraint_weight / static_cast<double>(data_.features.rows()));
    ps.add_decay_grad(cfg.weight_decay);
    adam(ps, cfg.learning_rate);
    model_.clamp_epsilons();
    ++epoch_;

    EpochMetrics m;
    m.epoch = epoch_;
    m.loss = lv.total;
    m.constraint = lv.constraint;
    m.tau = t;
    ForwardResult ev = model_.forward(data_.features, false, nullptr, t);
    m.train_acc = accuracy(ev.logits, data_.labels, data_.split.train);
    m.val_acc = accuracy(ev.logits, data_.labels, data_.split.val);
    m.test_acc = accuracy(ev.logits, data_.labels, data_.split.test);
    return m;
  }

  /// Training-mode loss with the most recently recorded noise replayed.
  double replay_loss() {
    noise_.replay();
    ForwardResult fr = model_.forward(data_.features, true, &noise_, tau());
    return training_loss(fr, data_, model_.config(), model_.params(), nullptr).total;
  }

  /// Max relative error |a - n| / max(|a| + |n|, floor) between analytic
  /// gradients and central differences with step h, on frozen noise. An eps
  /// sitting exactly on its kink is skipped.
  double gradient_check(double h = 1e-5, double floor = 1e-6) {
    const auto& cfg = model_.config();
    auto& ps = model_.params();
    noise_.record();
    ForwardResult fr = model_.forward(data_.features, true, &noise_, tau());
    Matrix dlogits;
    training_loss(fr, data_, cfg, ps, &dlogits);
    ps.zero_grad();
    model_.backward(dlogits, cfg.constraint_weight / static_cast<double>(data_.features.rows()));
    ps.add_decay_grad(cfg.weight_decay);
    double worst = 0.0;
    for (std::size_t p = 0; p < ps.size(); ++p) {
      Matrix analytic = ps[p].grad;
      for (Eigen::Index i = 0; i < ps[p].value.size(); ++i) {
        double& w = ps[p].value.data()[i];
        if (ps[p].kink_at_zero && w == 0.0) continue;
        const double saved = w;
        w = saved + h;
        double up = replay_loss();
        w = saved - h;
        double down = replay_loss();
        w = saved;
        double numeric = (up - down) / (2.0 * h);
        double a = analytic.data()[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor));
      }
    }
    return worst;
  }

 private:
  void adam(ParamStore& ps, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++adam_t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps[i];
      p.m = b1 * p.m + (1.0 - b1) * p.grad;
      p.v = b2 * p.v + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + eps);
    }
  }

  NodeData data_;
  const SpectralDecomposition& sd_;
  Model model_;
  NoiseTape noise_;
  std::size_t epoch_ = 0;
  std::size_t adam_t_ = 0;
};

inline TrainResult train(const NodeData& data, const SpectralDecomposition& sd, const ModelConfig& cfg,
                         const std::function<void(Trainer&, const EpochMetrics&)>& on_epoch = {}) {
  Trainer tr(data, sd, cfg);
  TrainResult res;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochMetrics m = tr.step();
    res.history.push_back(m);
    if (m.val_acc > res.best_val_acc) {
      res.best_val_acc = m.val_acc;
      res.best_epoch = m.epoch;
      res.test_acc = m.test_acc;
      res.train_acc = m.train_acc;
      res.epsilons = tr.model().epsilons();
      res.mask_densities = tr.model().mask_densities();
    }
    if (on_epoch) on_epoch(tr, m);
  }
  res.max_response = -std::numeric_limits<double>::infinity();
  res.min_response = std::numeric_limits<double>::infinity();
  for (double e : tr.model().epsilons()) {
    NormalizedSecondOrderFilter g(e);
    for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i) {
      res.max_response = std::max(res.max_response, g(sd.eigenvalues(i)));
      res.min_response = std::min(res.min_response, g(sd.eigenvalues(i)));
    }
  }
  if (tr.model().epsilons().empty()) res.max_response = res.min_response = 1.0;
  return res;
}

/// Node data from an SBM sample with a seeded split.
inline NodeData node_data(const SbmSample& s, const ModelConfig& cfg) {
  NodeData d;
  d.features = s.features;
  d.labels = s.graph.labels();
  d.classes = static_cast<Eigen::Index>(s.graph.num_classes());
  d.split = make_split(s.graph.n(), cfg.train_fraction, cfg.val_fraction, cfg.seed);
  return d;
}

}  // namespace gfa::demuf
