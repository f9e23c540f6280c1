#pragma once

// Polynomial graph filters g(L~) = sum_j c_j L~^j, written in the eigenvalue
// variable of the normalized Laplacian.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gfa/errors.hpp"
#include "gfa/graph.hpp"

namespace gfa {

class PolynomialFilter {
 public:
  PolynomialFilter() : coeffs_{0.0} {}

  explicit PolynomialFilter(std::vector<double> coeffs, std::string name = "poly",
                            bool approximate = false)
      : coeffs_(std::move(coeffs)), name_(std::move(name)), approximate_(approximate) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
    for (double c : coeffs_)
      if (!std::isfinite(c)) throw InvalidInput("filter coefficients must be finite");
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
  }

  const std::vector<double>& coefficients() const { return coeffs_; }
  double coefficient(std::size_t j) const { return j < coeffs_.size() ? coeffs_[j] : 0.0; }
  std::size_t degree() const { return coeffs_.size() - 1; }
  const std::string& name() const { return name_; }
  /// True when the polynomial truncates a non-polynomial response (ARMA).
  bool approximate() const { return approximate_; }

  double operator()(double lambda) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * lambda + *it;
    return acc;
  }

  PolynomialFilter derivative() const {
    std::vector<double> d;
    for (std::size_t j = 1; j < coeffs_.size(); ++j) d.push_back(coeffs_[j] * static_cast<double>(j));
    return PolynomialFilter(std::move(d), name_ + "'");
  }

  /// Responses g(lambda_i) on a spectrum.
  Vector responses(const Vector& eigenvalues) const {
    return eigenvalues.unaryExpr([this](double l) { return (*this)(l); });
  }

  /// Exact definite integral over [0, 2].
  double integral_0_2() const {
    double acc = 0.0;
    double p = 2.0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j, p *= 2.0)
      acc += coeffs_[j] * p / static_cast<double>(j + 1);
    return acc;
  }

  friend PolynomialFilter operator*(double s, const PolynomialFilter& f) {
    std::vector<double> c = f.coeffs_;
    for (double& x : c) x *= s;
    return PolynomialFilter(std::move(c), f.name_, f.approximate_);
  }

  friend PolynomialFilter operator+(const PolynomialFilter& a, const PolynomialFilter& b) {
    std::vector<double> c(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = a.coefficient(j) + b.coefficient(j);
    return PolynomialFilter(std::move(c), "sum", a.approximate_ || b.approximate_);
  }

  friend PolynomialFilter operator*(const PolynomialFilter& a, const PolynomialFilter& b) {
    std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return PolynomialFilter(std::move(c), "product", a.approximate_ || b.approximate_);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << name_ << "[";
    for (std::size_t j = 0; j < coeffs_.size(); ++j) os << (j ? "," : "") << coeffs_[j];
    os << "]";
    return os.str();
  }

 private:
  std::vector<double> coeffs_;
  std::string name_ = "poly";
  bool approximate_ = false;
};

// ---------------------------------------------------------------------------
// Constructors for the standard filter forms.

inline PolynomialFilter constant_filter(double c) { return PolynomialFilter({c}, "const"); }

/// eps1 + eps2 * lambda.
inline PolynomialFilter first_order(double eps1, double eps2) {
  return PolynomialFilter({eps1, eps2}, "first-order");
}

/// e1 + e2 * lambda + e3 * lambda^2.
inline PolynomialFilter second_order(double e1, double e2, double e3) {
  return PolynomialFilter({e1, e2, e3}, "second-order");
}

/// Second-order filter centred at lambda = 1:
/// g(lambda) = value + slope (lambda - 1) - curvature (lambda - 1)^2.
inline PolynomialFilter centred_second_order(double value, double slope, double curvature) {
  return PolynomialFilter({value - slope - curvature, slope + 2.0 * curvature, -curvature},
                          "second-order");
}

/// GCN propagation I - L~ (= A~), unnormalized.
inline PolynomialFilter gcn_filter() { return PolynomialFilter({1.0, -1.0}, "gcn"); }

/// GCN filter rescaled into [0, 1]: I - L~/2.
inline PolynomialFilter gcn_normalized_filter() { return PolynomialFilter({1.0, -0.5}, "gcn-normalized"); }

/// GIN aggregation (1 + eps) I + A~ = (2 + eps) I - L~.
inline PolynomialFilter gin_filter(double eps) { return PolynomialFilter({2.0 + eps, -1.0}, "gin"); }

/// Chebyshev term T_k(2 lambda / lambda_max - 1).
inline PolynomialFilter chebyshev_filter(int k, double lambda_max = 2.0) {
  if (k < 0) throw InvalidInput("chebyshev order must be non-negative");
  if (!(lambda_max > 0.0)) throw InvalidInput("lambda_max must be positive");
  PolynomialFilter x({-1.0, 2.0 / lambda_max});
  PolynomialFilter prev({1.0});
  if (k == 0) return PolynomialFilter(prev.coefficients(), "cheb");
  PolynomialFilter cur = x;
  for (int s = 2; s <= k; ++s) {
    PolynomialFilter next = (2.0 * x) * cur + (-1.0) * prev;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return PolynomialFilter(cur.coefficients(), "cheb");
}

/// ARMA response (1 + sum_k q_k L^k)^-1 (sum_k p_k L^k), expanded as a power
/// series in lambda and truncated at `degree`. Flagged approximate.
inline PolynomialFilter arma_filter(const std::vector<double>& p, const std::vector<double>& q,
                                    std::size_t degree) {
  // Series inverse of den = 1 + q_1 x + q_2 x^2 + ...
  std::vector<double> inv(degree + 1, 0.0);
  inv[0] = 1.0;
  for (std::size_t m = 1; m <= degree; ++m) {
    double s = 0.0;
    for (std::size_t k = 1; k <= std::min(m, q.size()); ++k) s += q[k - 1] * inv[m - k];
    inv[m] = -s;
  }
  std::vector<double> out(degree + 1, 0.0);
  for (std::size_t i = 0; i <= degree; ++i)
    for (std::size_t j = 0; j < p.size() && i + j <= degree; ++j) out[i + j] += inv[i] * p[j];
  return PolynomialFilter(std::move(out), "arma", true);
}

/// Normalized second-order filter g_eps(lambda) = 1 - ((1-eps) - lambda)^2 / (1+|eps|)^2,
/// eps in (-1, 1). Its peak value 1 sits at lambda = 1 - eps.
struct NormalizedSecondOrderFilter {
  double epsilon = 0.0;

  explicit NormalizedSecondOrderFilter(double eps) : epsilon(eps) {
    if (!(eps > -1.0 && eps < 1.0)) throw InvalidInput("g_eps needs eps in (-1, 1)");
  }

  double scale() const { return (1.0 + std::abs(epsilon)) * (1.0 + std::abs(epsilon)); }

  double operator()(double lambda) const {
    double a = (1.0 - epsilon) - lambda;
    return 1.0 - a * a / scale();
  }

  /// d g / d eps; uses sign(0) = 0 at the |eps| kink.
  double d_epsilon(double lambda) const {
    double s = 1.0 + std::abs(epsilon);
    double sgn = epsilon > 0 ? 1.0 : (epsilon < 0 ? -1.0 : 0.0);
    double a = (1.0 - epsilon) - lambda;
    return 2.0 * a * (s + a * sgn) / (s * s * s);
  }

  // Expansion g = e1 + e2 lambda + e3 lambda^2.
  double e1() const { return (scale() - (1.0 - epsilon) * (1.0 - epsilon)) / scale(); }
  double e2() const { return 2.0 * (1.0 - epsilon) / scale(); }
  double e3() const { return -1.0 / scale(); }

  PolynomialFilter polynomial() const { return PolynomialFilter({e1(), e2(), e3()}, "geps"); }

  /// Factors of the low/high-pass product form:
  /// ((2+|eps|-eps) - lambda) and ((|eps|+eps) + lambda), divided by scale().
  std::pair<PolynomialFilter, PolynomialFilter> factors() const {
    double ae = std::abs(epsilon);
    return {PolynomialFilter({2.0 + ae - epsilon, -1.0}, "low"),
            PolynomialFilter({ae + epsilon, 1.0}, "high")};
  }
};

inline PolynomialFilter geps_filter(double eps) { return NormalizedSecondOrderFilter(eps).polynomial(); }

/// Parses "poly:c0,c1,...", "geps:<eps>", "gcn", "gcn-norm", "gin:<eps>", "cheb:<k>".
inline PolynomialFilter parse_filter(const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw InvalidInput("bad number '" + s + "' in filter spec '" + spec + "'");
    }
    if (used != s.size()) throw InvalidInput("bad number '" + s + "' in filter spec '" + spec + "'");
    return v;
  };
  if (kind == "gcn" && arg.empty()) return gcn_filter();
  if (kind == "gcn-norm" && arg.empty()) return gcn_normalized_filter();
  if (kind == "geps") return geps_filter(number(arg));
  if (kind == "gin") return gin_filter(arg.empty() ? 0.0 : number(arg));
  if (kind == "cheb") {
    double k = number(arg);
    if (k != std::floor(k)) throw InvalidInput("cheb order must be an integer");
    return chebyshev_filter(static_cast<int>(k));
  }
  if (kind == "poly") {
    std::vector<double> c;
    std::stringstream ss(arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) c.push_back(number(tok));
    if (c.empty()) throw InvalidInput("poly filter needs at least one coefficient");
    return PolynomialFilter(std::move(c));
  }
  throw InvalidInput("unknown filter spec '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Family membership.

enum class PassKind { low, high, neither };

inline const char* to_string(PassKind k) {
  switch (k) {
    case PassKind::low: return "low";
    case PassKind::high: return "high";
    default: return "neither";
  }
}

struct RangeExtent {
  double min;
  double max;
};

/// min / max of g over [0, 2]. Exact for degree <= 2; for higher degree a
/// 2049-point grid refined by bisection on sign changes of g'.
inline RangeExtent range_on_0_2(const PolynomialFilter& g) {
  std::vector<double> candidates{0.0, 2.0};
  if (g.degree() == 2) {
    double vertex = -g.coefficient(1) / (2.0 * g.coefficient(2));
    if (vertex > 0.0 && vertex < 2.0) candidates.push_back(vertex);
  } else if (g.degree() > 2) {
    constexpr int kGrid = 2049;
    const PolynomialFilter dg = g.derivative();
    double prev_x = 0.0;
    double prev_d = dg(0.0);
    for (int i = 1; i < kGrid; ++i) {
      double x = 2.0 * i / (kGrid - 1);
      double d = dg(x);
      candidates.push_back(x);
      if ((prev_d < 0) != (d < 0)) {
        double lo = prev_x, hi = x, dlo = prev_d;
        for (int it = 0; it < 80; ++it) {
          double mid = 0.5 * (lo + hi);
          double dm = dg(mid);
          if ((dm < 0) == (dlo < 0)) {
            lo = mid;
            dlo = dm;
          } else {
            hi = mid;
          }
        }
        candidates.push_back(0.5 * (lo + hi));
      }
      prev_x = x;
      prev_d = d;
    }
  }
  RangeExtent r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double x : candidates) {
    double v = g(x);
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  return r;
}

struct FilterFamilyCheck {
  RangeExtent range{0.0, 0.0};
  double response_sum = 0.0;  // sum_i g(lambda_i)
  bool range_ok = false;      // g([0,2]) within [0,1]
  bool in_Sg = false;
  bool in_Sg1 = false;
  bool in_Sg2 = false;
  PassKind pass_kind = PassKind::neither;
};

constexpr double kRangeTolerance = 1e-12;

/// First order: low iff eps2 < 0. Second order (e3 < 0): low iff e2 + 2 e3 < 0,
/// i.e. the peak -e2 / (2 e3) lies left of lambda = 1.
inline PassKind pass_kind(const PolynomialFilter& g) {
  if (g.degree() == 1) return g.coefficient(1) < 0 ? PassKind::low : PassKind::high;
  if (g.degree() == 2 && g.coefficient(2) < 0) {
    double s = g.coefficient(1) + 2.0 * g.coefficient(2);
    if (s < 0) return PassKind::low;
    if (s > 0) return PassKind::high;
  }
  return PassKind::neither;
}

inline FilterFamilyCheck family_check(const PolynomialFilter& g, const Vector& eigenvalues) {
  FilterFamilyCheck out;
  out.range = range_on_0_2(g);
  out.response_sum = g.responses(eigenvalues).sum();
  out.range_ok = out.range.min >= -kRangeTolerance && out.range.max <= 1.0 + kRangeTolerance;
  out.in_Sg = out.range_ok && out.response_sum > 1.0;
  out.in_Sg1 = out.in_Sg && g.degree() == 1;
  out.in_Sg2 = out.in_Sg && g.degree() == 2 && g.coefficient(2) < 0;
  out.pass_kind = pass_kind(g);
  return out;
}

inline FilterFamilyCheck family_check(const PolynomialFilter& g, const SpectralDecomposition& sd) {
  return family_check(g, sd.eigenvalues);
}

// ---------------------------------------------------------------------------
// Application.

/// g(L~) X through the eigenbasis: U g(Lambda) U^T X.
inline Matrix apply(const PolynomialFilter& g, const SpectralDecomposition& sd, const Matrix& x,
                    int power = 1) {
  if (x.rows() != sd.eigenvectors.rows()) throw InvalidInput("signal rows do not match graph size");
  Vector resp = g.responses(sd.eigenvalues).array().pow(power);
  return sd.eigenvectors * (resp.asDiagonal() * (sd.eigenvectors.transpose() * x));
}

/// g(L~) X by Horner's rule on the matrix L~ itself (no eigenbasis).
inline Matrix apply_polynomial(const PolynomialFilter& g, const Matrix& laplacian, const Matrix& x) {
  if (x.rows() != laplacian.rows()) throw InvalidInput("signal rows do not match graph size");
  const auto& c = g.coefficients();
  Matrix acc = c.back() * x;
  for (std::size_t j = c.size() - 1; j-- > 0;) acc = (laplacian * acc + c[j] * x).eval();
  return acc;
}

/// Dense g(L~) = U g(Lambda) U^T.
inline Matrix filter_matrix(const PolynomialFilter& g, const SpectralDecomposition& sd) {
  return sd.eigenvectors * g.responses(sd.eigenvalues).asDiagonal() * sd.eigenvectors.transpose();
}

/// Transformed interaction g~(I - Pi~) = R^-1/2 Y^T g(L~) Y R^-1/2, i.e. the
/// filter applied to the n x n Laplacian and then projected onto classes.
inline Matrix transformed_interaction(const PolynomialFilter& g, const LabeledGraph& graph,
                                      const NormalizedOperators& ops) {
  LabelMatrix lm = label_matrix(graph);
  Vector r_inv_sqrt = lm.R.array().rsqrt();
  Matrix gy = apply_polynomial(g, ops.laplacian, lm.Y);
  Matrix t = r_inv_sqrt.asDiagonal() * (lm.Y.transpose() * gy) * r_inv_sqrt.asDiagonal();
  return 0.5 * (t + t.transpose());
}

inline Matrix transformed_interaction(const PolynomialFilter& g, const SpectralGraph& sg) {
  return transformed_interaction(g, sg.graph, sg.ops);
}

/// Binary homophily degree of a K=2 class-level matrix M:
/// (R0 M00 + R1 M11 - 2 sqrt(R0 R1) M01) / n.
inline double binary_homophily(const Matrix& m, double r0, double r1) {
  return (r0 * m(0, 0) + r1 * m(1, 1) - 2.0 * std::sqrt(r0 * r1) * m(0, 1)) / (r0 + r1);
}

/// H_1(g~(I - Pi~) | G_n) for binary labels.
inline double filter_homophily(const PolynomialFilter& g, const SpectralGraph& sg) {
  if (sg.graph.num_classes() != 2)
    throw Unsupported("filter homophily is defined for binary labels (K = 2)");
  const auto& r = sg.graph.class_sizes();
  return binary_homophily(transformed_interaction(g, sg), static_cast<double>(r[0]),
                          static_cast<double>(r[1]));
}

/// Exact closed form of H_1(g~(I - Pi~)) for filters of degree <= 2 in terms of
/// the graph's 1- and 2-homophily degrees. Expanding g in powers of
/// A~ = I - L~ gives g(L~) = g(1) I - g'(1) A~ + (g''(1)/2) A~^2, and the
/// binary homophily of the projected identity is exactly 1.
inline double closed_form_filter_homophily(const PolynomialFilter& g, double h1, double h2) {
  if (g.degree() > 2) throw Unsupported("closed form exists for degree <= 2 only");
  double e1 = g.coefficient(0), e2 = g.coefficient(1), e3 = g.coefficient(2);
  return (e1 + e2 + e3) - (e2 + 2.0 * e3) * h1 + e3 * h2;
}

/// The same quantity with the constant term the original derivation uses,
/// (sqrt(R0) - sqrt(R1))^2 / n in place of 1. Kept for reporting only.
inline double closed_form_filter_homophily_as_published(const PolynomialFilter& g, double h1, double h2,
                                                        double r0, double r1) {
  double a = std::pow(std::sqrt(r0) - std::sqrt(r1), 2) / (r0 + r1);
  double e1 = g.coefficient(0), e2 = g.coefficient(1), e3 = g.coefficient(2);
  return (e1 + e2 + e3) * a - (e2 + 2.0 * e3) * h1 + e3 * h2;
}

}  // namespace gfa
