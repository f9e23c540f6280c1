#pragma once

// Spatial and spectral graph indicators: interaction probabilities, k-homophily
// degrees, frequency distributions, response efficiency, information content.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "gfa/errors.hpp"
#include "gfa/filters.hpp"
#include "gfa/graph.hpp"

namespace gfa {

struct InteractionMatrices {
  int k = 1;
  Matrix pi;        // Pi^k = R^-1 Y^T P^k Y, rows sum to 1
  Matrix pi_tilde;  // Pi~^k = R^-1/2 Y^T A~^k Y R^-1/2, symmetric
};

/// Interaction matrices for k = 1..max_k. P^k Y and A~^k Y are formed by
/// repeated multiplication; Pi^k is never obtained by powering Pi^1.
inline std::vector<InteractionMatrices> interaction_series(const LabeledGraph& g,
                                                           const NormalizedOperators& ops, int max_k) {
  if (max_k < 1) throw InvalidInput("interaction step count must be >= 1");
  LabelMatrix lm = label_matrix(g);
  Vector r_inv = lm.R.cwiseInverse();
  Vector r_inv_sqrt = lm.R.array().rsqrt();
  Matrix walk = lm.Y;
  Matrix sym = lm.Y;
  std::vector<InteractionMatrices> out;
  for (int k = 1; k <= max_k; ++k) {
    walk = (ops.random_walk * walk).eval();
    sym = (ops.adjacency * sym).eval();
    InteractionMatrices im;
    im.k = k;
    im.pi = r_inv.asDiagonal() * (lm.Y.transpose() * walk);
    Matrix t = r_inv_sqrt.asDiagonal() * (lm.Y.transpose() * sym) * r_inv_sqrt.asDiagonal();
    im.pi_tilde = 0.5 * (t + t.transpose());
    out.push_back(std::move(im));
  }
  return out;
}

inline InteractionMatrices interaction_probability(const LabeledGraph& g, const NormalizedOperators& ops,
                                                   int k) {
  return interaction_series(g, ops, k).back();
}

inline InteractionMatrices interaction_probability(const LabeledGraph& g, int k) {
  return interaction_probability(g, normalize(g), k);
}

struct HomophilyReport {
  int k = 1;
  std::vector<double> per_class;  // H_k(Pi~ | C_l)
  double graph = 0.0;             // H_k(Pi~ | G_n)
};

inline HomophilyReport homophily_degree(const InteractionMatrices& im, const Vector& class_sizes) {
  const auto kc = class_sizes.size();
  if (im.pi_tilde.rows() != kc) throw InvalidInput("class count mismatch");
  const double n = class_sizes.sum();
  Vector w = (class_sizes / n).cwiseSqrt();
  HomophilyReport rep;
  rep.k = im.k;
  for (Eigen::Index l = 0; l < kc; ++l) {
    double h = w(l) * im.pi_tilde(l, l);
    for (Eigen::Index m = 0; m < kc; ++m)
      if (m != l) h -= w(m) * im.pi_tilde(l, m);
    rep.per_class.push_back(h);
    rep.graph += w(l) * h;
  }
  return rep;
}

inline HomophilyReport homophily_degree(const InteractionMatrices& im, const LabeledGraph& g) {
  return homophily_degree(im, label_matrix(g).R);
}

// ---------------------------------------------------------------------------
// Spectral side.

/// Relative threshold below which a spectral coefficient counts as zero.
constexpr double kSupportThreshold = 1e-10;

/// Coefficients of a signal in the eigenbasis, alpha = U^T x.
struct Spectrum {
  Vector coefficients;
  double energy = 0.0;               // sum alpha_i^2 (= |x|^2)
  std::vector<std::size_t> support;  // indices with |alpha_i| > 1e-10 |x|

  bool zero() const { return support.empty(); }

  /// Pr(f = lambda_i) = alpha_i^2 / sum alpha^2.
  Vector probabilities() const {
    if (zero()) throw Degenerate("frequency distribution of a zero signal is undefined");
    Vector p = coefficients.array().square() / energy;
    return p;
  }

  std::vector<char> support_mask() const {
    std::vector<char> mask(static_cast<std::size_t>(coefficients.size()), 0);
    for (auto i : support) mask[i] = 1;
    return mask;
  }
};

inline Spectrum spectrum_from_coefficients(Vector alpha, double norm_hint = -1.0) {
  Spectrum s;
  s.coefficients = std::move(alpha);
  s.energy = s.coefficients.squaredNorm();
  double scale = norm_hint >= 0.0 ? norm_hint : std::sqrt(s.energy);
  if (scale > 0.0)
    for (Eigen::Index i = 0; i < s.coefficients.size(); ++i)
      if (std::abs(s.coefficients(i)) > kSupportThreshold * scale)
        s.support.push_back(static_cast<std::size_t>(i));
  return s;
}

inline Spectrum signal_spectrum(const SpectralDecomposition& sd, const Vector& x) {
  if (x.size() != sd.eigenvectors.rows()) throw InvalidInput("signal length does not match graph size");
  return spectrum_from_coefficients(sd.eigenvectors.transpose() * x, x.norm());
}

/// Frequency distribution per distinct eigenvalue; probabilities of tied
/// eigenvalues (within `tie_tol`) are summed.
inline std::vector<std::pair<double, double>> frequency_distribution(const SpectralDecomposition& sd,
                                                                     const Spectrum& spec,
                                                                     double tie_tol = 1e-9) {
  Vector p = spec.probabilities();
  std::vector<std::pair<double, double>> out;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double lam = sd.eigenvalues(i);
    if (!out.empty() && lam - out.back().first <= tie_tol)
      out.back().second += p(i);
    else
      out.emplace_back(lam, p(i));
  }
  return out;
}

/// mu_g(x) = sum g(l_i) a_i^2 / (sum g(l_i) * sum a_i^2).
inline double response_efficiency(const PolynomialFilter& g, const Spectrum& spec,
                                  const SpectralDecomposition& sd) {
  if (spec.zero()) throw Degenerate("response efficiency of a zero signal is undefined");
  Vector resp = g.responses(sd.eigenvalues);
  double total = resp.sum();
  if (total == 0.0) throw Degenerate("filter response sums to zero; efficiency undefined");
  return resp.dot(spec.coefficients.array().square().matrix()) / (total * spec.energy);
}

/// I(delta) = -sum over the support of log(delta_i^2 / sum delta^2), natural log.
inline double information_content(const Spectrum& spec) {
  if (spec.zero()) throw Degenerate("information content of a zero signal is undefined");
  double acc = 0.0;
  for (auto i : spec.support) acc -= std::log(spec.coefficients(i) * spec.coefficients(i) / spec.energy);
  return acc;
}

struct MomentCheck {
  double lhs = 0.0;  // mu_g(y_l) * sum g(lambda_i) for g = lambda^m, i.e. E[f_l^m]
  double rhs = 0.0;  // (R^-1/2 Y^T L~^m Y R^-1/2)_ll
  double gap = 0.0;
  double mean = 0.0;               // E[f_l]
  double mean_identity = 0.0;      // 1 - pi~_l^1
  double variance = 0.0;           // Var(f_l) from the spectrum
  double variance_identity = 0.0;  // pi~_l^2 - (pi~_l^1)^2
};

/// Checks that the m-th moment of label l's frequency equals the diagonal of
/// the projected m-th Laplacian power.
inline MomentCheck label_moment_identity_check(const SpectralGraph& sg, int l, int m) {
  if (m < 1 || m > 4) throw InvalidInput("moment order must be in 1..4");
  if (l < 0 || static_cast<std::size_t>(l) >= sg.graph.num_classes()) throw InvalidInput("class id out of range");
  LabelMatrix lm = label_matrix(sg.graph);
  Vector y = lm.Y.col(l);
  Spectrum spec = signal_spectrum(sg.spectrum, y);
  std::vector<double> mono(static_cast<std::size_t>(m) + 1, 0.0);
  mono.back() = 1.0;
  PolynomialFilter power(mono, "monomial");

  MomentCheck mc;
  Vector resp = power.responses(sg.spectrum.eigenvalues);
  mc.lhs = response_efficiency(power, spec, sg.spectrum) * resp.sum();
  Matrix t = transformed_interaction(power, sg);
  mc.rhs = t(l, l);
  mc.gap = std::abs(mc.lhs - mc.rhs);

  Vector p = spec.probabilities();
  mc.mean = p.dot(sg.spectrum.eigenvalues);
  double second = p.dot(sg.spectrum.eigenvalues.array().square().matrix());
  mc.variance = second - mc.mean * mc.mean;
  auto series = interaction_series(sg.graph, sg.ops, 2);
  double pi1 = series[0].pi_tilde(l, l);
  double pi2 = series[1].pi_tilde(l, l);
  mc.mean_identity = 1.0 - pi1;
  mc.variance_identity = pi2 - pi1 * pi1;
  return mc;
}

// ---------------------------------------------------------------------------
// Aggregate report.

struct LabelDifference {
  int a = 0;
  int b = 1;
  std::vector<std::pair<double, double>> distribution;  // (eigenvalue, probability)
  double information_content = 0.0;
};

struct IndicatorReport {
  std::vector<InteractionMatrices> interaction;  // k = 1..max_k
  std::vector<HomophilyReport> homophily;
  std::vector<LabelDifference> label_frequency;
};

inline Vector label_difference(const LabeledGraph& g, int a, int b) {
  Vector d = Vector::Zero(static_cast<Eigen::Index>(g.n()));
  for (std::size_t i = 0; i < g.n(); ++i) {
    if (g.labels()[i] == a) d(static_cast<Eigen::Index>(i)) = 1.0;
    if (g.labels()[i] == b) d(static_cast<Eigen::Index>(i)) = -1.0;
  }
  return d;
}

inline IndicatorReport indicator_report(const SpectralGraph& sg, int max_k = 2) {
  IndicatorReport rep;
  rep.interaction = interaction_series(sg.graph, sg.ops, max_k);
  Vector r = label_matrix(sg.graph).R;
  for (const auto& im : rep.interaction) rep.homophily.push_back(homophily_degree(im, r));
  const int kc = static_cast<int>(sg.graph.num_classes());
  for (int a = 0; a < kc; ++a)
    for (int b = a + 1; b < kc; ++b) {
      LabelDifference ld;
      ld.a = a;
      ld.b = b;
      Spectrum spec = signal_spectrum(sg.spectrum, label_difference(sg.graph, a, b));
      ld.distribution = frequency_distribution(sg.spectrum, spec);
      ld.information_content = information_content(spec);
      rep.label_frequency.push_back(std::move(ld));
    }
  return rep;
}

}  // namespace gfa
