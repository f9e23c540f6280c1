#pragma once

// Prediction error of a softmax-on-filter classifier and its lower bounds in
// the spatial domain (clamped first-order expansion), the spectral domain
// (response efficiency / information content) and via the transformed
// homophily degree.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gfa/errors.hpp"
#include "gfa/filters.hpp"
#include "gfa/graph.hpp"
#include "gfa/indicators.hpp"

namespace gfa {

constexpr double kRelaxedCoefficient = 167.0 / 800.0;

inline double clamp_unit(double x) { return std::min(std::max(x, -1.0), 1.0); }

/// Row-wise softmax.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double mx = logits.row(i).maxCoeff();
    auto e = (logits.row(i).array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

/// Er(X, Y) = |softmax(g(L~) X) - Y|_F^2.
inline double prediction_error(const PolynomialFilter& g, const SpectralDecomposition& sd, const Matrix& x,
                               const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw InvalidInput("input and label shapes differ");
  return (softmax_rows(apply(g, sd, x)) - y).squaredNorm();
}

/// Binary problem: label indicators, an input pair and the filtered
/// input difference z = g(L~)(x1 - x0).
struct BinaryInstance {
  Vector y0, y1;
  Vector x0, x1;
  Vector z;

  std::size_t n() const { return static_cast<std::size_t>(y0.size()); }
  Vector label_difference() const { return y0 - y1; }
  Vector input_difference() const { return x0 - x1; }
};

inline BinaryInstance make_binary_instance(const PolynomialFilter& g, const SpectralGraph& sg, Vector x0,
                                           Vector x1) {
  if (sg.graph.num_classes() != 2) throw Unsupported("binary instance needs K = 2 (use reduce_to_binary)");
  if (x0.size() != static_cast<Eigen::Index>(sg.n()) || x1.size() != x0.size())
    throw InvalidInput("input length does not match graph size");
  LabelMatrix lm = label_matrix(sg.graph);
  BinaryInstance inst;
  inst.y0 = lm.Y.col(0);
  inst.y1 = lm.Y.col(1);
  inst.x0 = std::move(x0);
  inst.x1 = std::move(x1);
  inst.z = apply(g, sg.spectrum, inst.x1 - inst.x0);
  return inst;
}

/// Er(x0, y0) = sum_i (1 / (1 + e^{z_i}) - y0_i)^2.
inline double binary_error(const BinaryInstance& inst) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < inst.z.size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(inst.z(i)));
    acc += (s - inst.y0(i)) * (s - inst.y0(i));
  }
  return acc;
}

struct ErrorBounds {
  double tight = 0.0;
  double relaxed = 0.0;
  double alignment = 0.0;  // (y1 - y0)^T psi(z)
  double psi_norm2_sq = 0.0;
  double psi_norm3_cube = 0.0;
  double psi_norm4_quad = 0.0;
  std::size_t saturated = 0;  // C = |S_{y,z}|
};

inline ErrorBounds error_bounds(const BinaryInstance& inst) {
  ErrorBounds b;
  const double e1sq = (1.0 + std::exp(1.0)) * (1.0 + std::exp(1.0));
  for (Eigen::Index i = 0; i < inst.z.size(); ++i) {
    double z = inst.z(i);
    double p = clamp_unit(z);
    double a = std::abs(p);
    b.alignment += (inst.y1(i) - inst.y0(i)) * p;
    b.psi_norm2_sq += a * a;
    b.psi_norm3_cube += a * a * a;
    b.psi_norm4_quad += a * a * a * a;
    if ((z < -1.0 && inst.y0(i) == 1.0) || (z > 1.0 && inst.y0(i) == 0.0)) ++b.saturated;
  }
  const double n = static_cast<double>(inst.n());
  b.tight = n / 4.0 - b.alignment / 4.0 + b.psi_norm2_sq / 16.0 - b.psi_norm3_cube / 48.0 -
            b.psi_norm4_quad / 96.0 - static_cast<double>(b.saturated) / e1sq;
  // psi(dy_i * (g dx)_i) = (y1 - y0)_i psi(z_i) since dy_i is +-1.
  b.relaxed = kRelaxedCoefficient * n - b.alignment / 4.0;
  return b;
}

struct PointwiseBound {
  double lhs;
  double rhs;
};

/// (1/(1+e^x) - y)^2 against its clamped polynomial lower bound.
inline PointwiseBound sigmoid_pointwise_bound(double x, int y) {
  double s = 1.0 / (1.0 + std::exp(x));
  double p = clamp_unit(x);
  double a = std::abs(p);
  bool in_s = (x < -1.0 && y == 1) || (x > 1.0 && y == 0);
  double e1sq = (1.0 + std::exp(1.0)) * (1.0 + std::exp(1.0));
  double rhs = 0.25 - (1.0 - 2.0 * y) * p / 4.0 + p * p / 16.0 - a * a * a / 48.0 - a * a * a * a / 96.0 -
               (in_s ? 1.0 / e1sq : 0.0);
  return {(s - y) * (s - y), rhs};
}

// ---------------------------------------------------------------------------
// Spectral constants.

struct EfficiencyTerms {
  double info = 0.0;        // I(.)
  double mu = 0.0;          // mu_g(.)
  double c = 0.0;           // c(g, .)
  double product = 0.0;     // (1 + c) mu = weighted mean of p over I_{g,.}
  double support_sum = 0.0; // sum of g over I_{g,.}
  double m = std::numeric_limits<double>::infinity();  // M(g, .)
  bool degenerate = true;
};

namespace detail {

inline std::vector<char> filter_support(const Vector& resp) {
  std::vector<char> s(static_cast<std::size_t>(resp.size()));
  for (Eigen::Index i = 0; i < resp.size(); ++i) s[i] = std::abs(resp(i)) > kSupportThreshold;
  return s;
}

inline EfficiencyTerms efficiency_terms(const Vector& resp, const std::vector<char>& g_support,
                                        const Spectrum& spec) {
  EfficiencyTerms t;
  if (spec.zero()) return t;
  auto mask = spec.support_mask();
  Vector p = spec.probabilities();
  double in_both = 0.0, g_only = 0.0, weighted = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < resp.size(); ++i) {
    if (!g_support[i]) continue;
    if (mask[i]) {
      in_both += resp(i);
      weighted += resp(i) * p(i);
      ++count;
    } else {
      g_only += resp(i);
    }
  }
  t.info = information_content(spec);
  t.support_sum = in_both;
  if (count == 0 || in_both <= 0.0) return t;
  t.c = g_only / in_both;
  t.mu = weighted / (in_both + g_only);
  t.product = weighted / in_both;
  if (!(t.product < 1.0 - 1e-15) || !(t.product > 0.0)) return t;
  t.m = -t.info / std::log(t.product);
  t.degenerate = false;
  return t;
}

}  // namespace detail

struct SpectralConstants {
  EfficiencyTerms delta;      // on the label difference spectrum
  EfficiencyTerms eta_tilde;  // on the clamped input difference spectrum
  double m_g_joint = 0.0;     // min g over I_{g,delta,eta~}
  double m_g_label = 0.0;     // min g over I_{g,delta}
  double psi_sum = 0.0;       // sum_i psi(eta_i g_i delta_i)
  double rhs = 0.0;           // (1/m_g_joint) min{M(g,delta), M(g,eta~)}
};

/// Constants of the spectral bound for label-difference spectrum `delta` and
/// input-difference spectrum `eta`.
inline SpectralConstants spectral_constants(const PolynomialFilter& g, const SpectralDecomposition& sd,
                                            const Spectrum& delta, const Spectrum& eta) {
  SpectralConstants sc;
  Vector resp = g.responses(sd.eigenvalues);
  auto gs = detail::filter_support(resp);
  sc.delta = detail::efficiency_terms(resp, gs, delta);
  if (sc.delta.degenerate)
    throw Degenerate("label difference is concentrated on a single filtered component; bound is 0/0");

  const auto& d = delta.coefficients;
  const auto& e = eta.coefficients;
  Vector eta_t = e;
  auto dmask = delta.support_mask();
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    sc.psi_sum += clamp_unit(e(i) * resp(i) * d(i));
    if (gs[i] && dmask[i]) {
      double b = 1.0 / std::abs(resp(i) * d(i));
      eta_t(i) = std::clamp(e(i), -b, b);
    }
  }
  Spectrum eta_spec = spectrum_from_coefficients(eta_t);
  sc.eta_tilde = detail::efficiency_terms(resp, gs, eta_spec);

  auto emask = eta_spec.support_mask();
  double m_joint = std::numeric_limits<double>::infinity();
  double m_label = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < resp.size(); ++i) {
    if (!gs[i] || !dmask[i]) continue;
    m_label = std::min(m_label, resp(i));
    if (emask[i]) m_joint = std::min(m_joint, resp(i));
  }
  sc.m_g_label = m_label;
  sc.m_g_joint = std::isfinite(m_joint) ? m_joint : m_label;
  sc.rhs = std::min(sc.delta.m, sc.eta_tilde.m) / sc.m_g_joint;
  return sc;
}

/// Input-independent spectral bound on Er(x0, y0), m_g over I_{g,delta}:
/// 167n/800 + I(delta) / (4 m_g log((1+c) mu_g(delta))).
/// The quarter comes from the relaxed spatial bound and makes twice this value
/// coincide with the homophily form of the bound on Er(X, Y).
inline double spectral_lower_bound(const SpectralConstants& sc, std::size_t n) {
  return kRelaxedCoefficient * static_cast<double>(n) +
         sc.delta.info / (4.0 * sc.m_g_label * std::log(sc.delta.product));
}

/// The same bound without the quarter on the second term. Weaker (the term is
/// negative) but still valid; reported for comparison.
inline double spectral_lower_bound_unscaled(const SpectralConstants& sc, std::size_t n) {
  return kRelaxedCoefficient * static_cast<double>(n) +
         sc.delta.info / (sc.m_g_label * std::log(sc.delta.product));
}

struct SpatialBound {
  double value = 0.0;            // bound on Er(X, Y) with the I_{g,delta} denominator
  double value_statement = 0.0;  // same with sum over all eigenvalues in the denominator
  double filter_homophily = 0.0; // H_1(g~(I - Pi~) | G_n)
  double ratio = 0.0;            // H_1(g~) / sum_{I_{g,delta}} g
};

/// Bound on Er(X, Y) = 2 Er(x0, y0) through the transformed homophily degree.
inline SpatialBound spatial_lower_bound(const PolynomialFilter& g, const SpectralGraph& sg) {
  if (sg.graph.num_classes() != 2) throw Unsupported("spatial bound needs K = 2");
  Spectrum delta = signal_spectrum(sg.spectrum, label_difference(sg.graph, 0, 1));
  Vector resp = g.responses(sg.spectrum.eigenvalues);
  auto gs = detail::filter_support(resp);
  EfficiencyTerms t = detail::efficiency_terms(resp, gs, delta);
  if (t.degenerate) throw Degenerate("label difference degenerate for this filter; bound is 0/0");
  SpatialBound sb;
  sb.filter_homophily = filter_homophily(g, sg);
  if (!(sb.filter_homophily > 0.0))
    throw Degenerate("transformed homophily is zero: label difference lies in the filter kernel");
  double m_label = std::numeric_limits<double>::infinity();
  auto mask = delta.support_mask();
  for (Eigen::Index i = 0; i < resp.size(); ++i)
    if (gs[i] && mask[i]) m_label = std::min(m_label, resp(i));
  const double n = static_cast<double>(sg.n());
  sb.ratio = sb.filter_homophily / t.support_sum;
  sb.value = 2.0 * kRelaxedCoefficient * n + t.info / (2.0 * m_label * std::log(sb.ratio));
  sb.value_statement =
      2.0 * kRelaxedCoefficient * n + t.info / (2.0 * m_label * std::log(sb.filter_homophily / resp.sum()));
  return sb;
}

// ---------------------------------------------------------------------------

struct BoundReport {
  std::size_t n = 0;
  std::string filter;
  bool in_Sg = false;
  bool connected = true;
  double er = 0.0;        // Er(x0, y0)
  double er_total = 0.0;  // Er(X, Y)
  ErrorBounds chain;
  std::optional<SpectralConstants> constants;
  std::optional<double> spectral_bound;
  std::optional<double> spectral_bound_unscaled;
  std::optional<SpatialBound> spatial;
  std::string note;  // why optional parts are missing
};

/// Everything for one filter and one binary input pair.
inline BoundReport bound_report(const PolynomialFilter& g, const SpectralGraph& sg, const Vector& x0,
                                const Vector& x1) {
  BoundReport rep;
  rep.n = sg.n();
  rep.filter = g.describe();
  rep.connected = sg.graph.connected();
  BinaryInstance inst = make_binary_instance(g, sg, x0, x1);
  rep.er = binary_error(inst);
  Matrix x(x0.size(), 2);
  x << x0, x1;
  rep.er_total = prediction_error(g, sg.spectrum, x, label_matrix(sg.graph).Y);
  rep.chain = error_bounds(inst);
  rep.in_Sg = family_check(g, sg.spectrum).in_Sg;
  if (!rep.in_Sg) {
    rep.note = "filter is not in S_g (range [0,1] on [0,2] and response sum > 1); spectral bounds skipped";
    return rep;
  }
  try {
    Spectrum delta = signal_spectrum(sg.spectrum, inst.label_difference());
    Spectrum eta = signal_spectrum(sg.spectrum, inst.input_difference());
    rep.constants = spectral_constants(g, sg.spectrum, delta, eta);
    rep.spectral_bound = spectral_lower_bound(*rep.constants, sg.n());
    rep.spectral_bound_unscaled = spectral_lower_bound_unscaled(*rep.constants, sg.n());
    rep.spatial = spatial_lower_bound(g, sg);
  } catch (const Degenerate& e) {
    rep.note = e.what();
  }
  return rep;
}

}  // namespace gfa
