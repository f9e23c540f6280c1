#pragma once

// Randomized checks of the indicator inequalities, error bounds and filter
// family claims over SBM ensembles. Every trial instance is serialized before
// it is checked and the check runs on the serialized form, so re-running a
// stored instance reproduces its margin bit for bit.
//
// Margin convention: a check passes iff margin > 0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gfa/bounds.hpp"
#include "gfa/filters.hpp"
#include "gfa/graph.hpp"
#include "gfa/indicators.hpp"
#include "gfa/report.hpp"
#include "gfa/synth.hpp"

namespace gfa {

struct TrialConfig {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t n_min = 8;
  std::size_t n_max = 64;
  std::vector<std::size_t> classes{2, 3, 4};
  double p_min = 0.02;
  double p_max = 0.6;
  double tolerance = 1e-10;
  double min_homophily = 0.05;        // low/high-pass trials with |H_1| below this are skipped
  std::size_t filters_per_graph = 5;  // filter-bank: random g1 per graph
  std::size_t max_attempts_factor = 20;
};

struct CheckOutcome {
  bool skipped = false;
  double margin = 0.0;
  json detail = json::object();
};

constexpr std::size_t kMaxOffending = 5;

struct TheoremVerdict {
  TheoremVerdict() = default;
  explicit TheoremVerdict(std::string name) : id(std::move(name)) {}

  std::string id;
  std::size_t trials = 0;  // evaluated, not skipped
  std::size_t skipped = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  json worst_instance = nullptr;
  std::vector<json> offending;
  json diagnostics = json::object();

  bool passed() const { return violations == 0; }

  void record(const json& instance, const CheckOutcome& o) {
    if (o.skipped) {
      ++skipped;
      return;
    }
    ++trials;
    if (o.margin < worst_margin || worst_instance.is_null()) {
      worst_margin = o.margin;
      worst_instance = instance;
    }
    if (!(o.margin > 0.0)) {
      ++violations;
      if (offending.size() < kMaxOffending) offending.push_back({{"instance", instance}, {"margin", num(o.margin)}});
    }
  }
};

inline json verdict_json(const TheoremVerdict& v) {
  json off = json::array();
  for (const auto& o : v.offending) off.push_back(o);
  return {{"id", v.id},
          {"trials", v.trials},
          {"skipped", v.skipped},
          {"violations", v.violations},
          {"worst_margin", v.trials ? num(v.worst_margin) : json(nullptr)},
          {"worst_instance", v.worst_instance},
          {"offending", off},
          {"diagnostics", v.diagnostics},
          {"passed", v.passed()}};
}

// ---------------------------------------------------------------------------
// Instance generation.

namespace detail {

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline LabeledGraph random_graph(const TrialConfig& cfg, std::mt19937_64& rng, std::size_t classes) {
  SbmSpec s;
  s.classes = classes;
  s.n = pick(rng, std::max(cfg.n_min, classes), std::max(cfg.n_max, classes));
  s.p_in = uniform(rng, cfg.p_min, cfg.p_max);
  s.p_out = uniform(rng, cfg.p_min, cfg.p_max);
  for (std::size_t k = 0; k < classes; ++k) s.proportions.push_back(uniform(rng, 0.15, 1.0));
  s.seed = rng();
  return generate_sbm(s).graph;
}

inline std::size_t random_classes(const TrialConfig& cfg, std::mt19937_64& rng) {
  if (cfg.classes.empty()) throw InvalidInput("class list is empty");
  return cfg.classes[pick(rng, 0, cfg.classes.size() - 1)];
}

// Random degree-<=2 polynomial with normal coefficients.
inline std::vector<double> random_quadratic(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t deg = pick(rng, 0, 2);
  std::vector<double> c(deg + 1);
  for (auto& x : c) x = normal(rng);
  return c;
}

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline std::vector<double> poly_add(std::vector<double> a, const std::vector<double>& b) {
  if (b.size() > a.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

/// a^2 + lambda (2 - lambda) b^2: nonnegative on [0,2], degree <= 4.
inline PolynomialFilter random_nonnegative(std::mt19937_64& rng, double floor) {
  auto a = random_quadratic(rng);
  auto b = random_quadratic(rng);
  auto g = poly_add(poly_mul(a, a), poly_mul({0.0, 2.0, -1.0}, poly_mul(b, b)));
  PolynomialFilter raw(g);
  double mx = range_on_0_2(raw).max;
  if (!(mx > 0.0)) return constant_filter(std::max(floor, 0.5));
  for (auto& x : g) x *= (1.0 - floor) / mx;
  g[0] += floor;
  return PolynomialFilter(g, "sos");
}

inline PolynomialFilter random_first_order(std::mt19937_64& rng) {
  for (;;) {
    double e1 = uniform(rng, 0.05, 1.0);
    bool high = rng() & 1U;
    double bound = high ? (1.0 - e1) / 2.0 : e1 / 2.0;
    if (bound < 0.01) continue;
    double e2 = uniform(rng, 0.01, bound);
    return first_order(e1, high ? e2 : -e2);
  }
}

/// A random member of S_g on this spectrum, from one of four shapes.
inline PolynomialFilter random_family_filter(std::mt19937_64& rng, const Vector& eigenvalues) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    PolynomialFilter g;
    switch (pick(rng, 0, 3)) {
      case 0:
        g = random_first_order(rng);
        break;
      case 1:
        g = geps_filter(uniform(rng, -0.95, 0.95));
        break;
      case 2: {
        double c = uniform(rng, 0.01, 0.5);
        double q = uniform(rng, -0.5, 0.5);
        double lo = std::abs(q) + c;
        double hi = std::abs(q) <= 2.0 * c ? 1.0 - q * q / (4.0 * c) : 1.0 - std::abs(q) + c;
        if (lo > hi) continue;
        g = centred_second_order(uniform(rng, lo, hi), q, c);
        break;
      }
      default:
        g = random_nonnegative(rng, 0.0);
    }
    if (family_check(g, eigenvalues).in_Sg) return g;
  }
  return gcn_normalized_filter();
}

inline Vector random_input(std::mt19937_64& rng, std::size_t n) {
  Vector x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform(rng, -5.0, 5.0);
  return x;
}

inline double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// H_1(g~) is linear in the coefficients: precompute it for each monomial
// through the direct (Horner + projection) route.
inline std::vector<double> monomial_homophily(const SpectralGraph& sg, std::size_t degree) {
  std::vector<double> h;
  for (std::size_t j = 0; j <= degree; ++j) {
    std::vector<double> c(j + 1, 0.0);
    c[j] = 1.0;
    h.push_back(filter_homophily(PolynomialFilter(c), sg));
  }
  return h;
}

inline double linear_homophily(const PolynomialFilter& g, const std::vector<double>& h) {
  double acc = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) acc += g.coefficient(j) * h[j];
  return acc;
}

struct BinaryIndicators {
  double h1 = 0.0;
  double h2 = 0.0;
  double r0 = 0.0;
  double r1 = 0.0;
};

inline BinaryIndicators binary_indicators(const SpectralGraph& sg) {
  auto series = interaction_series(sg.graph, sg.ops, 2);
  BinaryIndicators b;
  b.r0 = static_cast<double>(sg.graph.class_sizes()[0]);
  b.r1 = static_cast<double>(sg.graph.class_sizes()[1]);
  b.h1 = binary_homophily(series[0].pi_tilde, b.r0, b.r1);
  b.h2 = binary_homophily(series[1].pi_tilde, b.r0, b.r1);
  return b;
}

/// The first-order grid: eps1 = 0.05 i, eps2 = +-0.025 j inside the family
/// region (eps2 <= (1 - eps1)/2 for high-pass, eps2 >= -eps1/2 for low-pass).
inline std::vector<PolynomialFilter> first_order_grid() {
  std::vector<PolynomialFilter> out;
  for (int i = 1; i <= 20; ++i) {
    double e1 = 0.05 * i;
    for (int j = 1; j <= 20 - i; ++j) out.push_back(first_order(e1, 0.025 * j));
    for (int j = 1; j <= i; ++j) out.push_back(first_order(e1, -0.025 * j));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Checks on serialized instances.

inline CheckOutcome check_interaction(const json& inst, double tol) {
  LabeledGraph g = graph_from_json(inst.at("graph"));
  auto series = interaction_series(g, normalize(g), 8);
  Vector r = label_matrix(g).R;
  const auto kc = r.size();
  double slack = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 4; ++k) {
    const auto& im = series[k - 1];
    const auto& im2 = series[2 * k - 1];
    for (Eigen::Index l = 0; l < kc; ++l) {
      double pt = im.pi_tilde(l, l);
      slack = std::min(slack, im2.pi_tilde(l, l) - pt * pt);
      slack = std::min(slack, im.pi(l, l) - pt);
      for (Eigen::Index m = 0; m < kc; ++m)
        slack = std::min(slack, r(l) * im.pi(l, m) + r(m) * im.pi(m, l) -
                                    2.0 * std::sqrt(r(l) * r(m)) * im.pi_tilde(l, m));
    }
  }
  CheckOutcome o;
  o.margin = slack + tol;
  o.detail["min_slack"] = slack;
  o.detail["power_gap"] = (series[0].pi_tilde * series[0].pi_tilde - series[1].pi_tilde).cwiseAbs().maxCoeff();
  return o;
}

constexpr double kIdentityTolerance = 1e-9;

inline CheckOutcome check_moments(const json& inst) {
  auto sg = SpectralGraph::analyze(graph_from_json(inst.at("graph")));
  double worst = 0.0;
  for (int l = 0; l < static_cast<int>(sg.graph.num_classes()); ++l)
    for (int m = 1; m <= 4; ++m) {
      auto mc = label_moment_identity_check(sg, l, m);
      worst = std::max({worst, mc.gap, std::abs(mc.mean - mc.mean_identity),
                        std::abs(mc.variance - mc.variance_identity)});
    }
  CheckOutcome o;
  o.margin = kIdentityTolerance - worst;
  o.detail["max_gap"] = worst;
  return o;
}

constexpr double kBoundSlack = 1e-9;
constexpr double kEqualityTolerance = 1e-12;

struct BoundOutcomes {
  CheckOutcome chain;
  CheckOutcome spectral;
};

inline BoundOutcomes check_bound_instance(const json& inst) {
  auto sg = SpectralGraph::analyze(graph_from_json(inst.at("graph")));
  PolynomialFilter g = filter_from_json(inst.at("filter"));
  Vector x0 = vector_from_json(inst.at("x0"));
  Vector x1 = vector_from_json(inst.at("x1"));
  BoundReport rep = bound_report(g, sg, x0, x1);
  BoundReport eq = bound_report(g, sg, x0, x0);
  const double quarter = static_cast<double>(sg.n()) / 4.0;

  BoundOutcomes out;
  auto& c = out.chain;
  c.margin = std::min({rep.er - rep.chain.tight + kBoundSlack, rep.er - rep.chain.relaxed + kBoundSlack,
                       kEqualityTolerance - std::abs(eq.er - quarter),
                       kEqualityTolerance - std::abs(eq.chain.tight - quarter)});
  c.detail = {{"er", rep.er}, {"tight", rep.chain.tight}, {"relaxed", rep.chain.relaxed}};

  auto& s = out.spectral;
  if (!rep.constants || !rep.spectral_bound || !rep.spatial) {
    s.skipped = true;
    s.detail["reason"] = rep.note;
    return out;
  }
  const auto& k = *rep.constants;
  double spectral = *rep.spectral_bound;
  double spatial = rep.spatial->value;
  double agree = std::abs(spatial - 2.0 * spectral) / std::max(1.0, std::abs(spatial));
  double identity = std::abs(k.delta.product - rep.spatial->ratio);
  s.margin = std::min({rep.er - spectral + kBoundSlack, rep.er - *rep.spectral_bound_unscaled + kBoundSlack, k.rhs - k.psi_sum + kBoundSlack, 1.0 - k.delta.product,
                       rep.er_total - spatial + kBoundSlack, kIdentityTolerance - agree,
                       kIdentityTolerance - identity});
  s.detail = {{"er", rep.er},           {"spectral", spectral},      {"spatial", spatial},
              {"clamped_sum", k.psi_sum}, {"clamped_bound", num(k.rhs)}, {"product", k.delta.product},
              {"agreement_gap", agree},   {"identity_gap", identity}};
  return out;
}

inline CheckOutcome check_sigmoid_point(const json& inst) {
  auto b = sigmoid_pointwise_bound(inst.at("x").get<double>(), inst.at("y").get<int>());
  CheckOutcome o;
  o.margin = b.lhs - b.rhs + kEqualityTolerance;
  o.detail = {{"lhs", b.lhs}, {"rhs", b.rhs}};
  return o;
}

/// Grid argmax of the transformed homophily over both families; the pass
/// kind of each argmax must follow the sign of H_1.
inline CheckOutcome check_lowhigh(const json& inst, double min_homophily) {
  auto sg = SpectralGraph::analyze(graph_from_json(inst.at("graph")));
  auto ind = detail::binary_indicators(sg);
  CheckOutcome o;
  double a_pub = std::pow(std::sqrt(ind.r0) - std::sqrt(ind.r1), 2);
  double n = ind.r0 + ind.r1;
  double b = n * ind.h1;
  o.detail = {{"H1", ind.h1},
              {"H2", ind.h2},
              {"A", a_pub},
              {"B", b},
              {"C", a_pub > 0 ? num((a_pub - b) / a_pub) : json(nullptr)},
              {"lambda_bar", sg.spectrum.eigenvalues.mean()}};
  if (std::abs(ind.h1) < min_homophily) {
    o.skipped = true;
    return o;
  }
  auto h = detail::monomial_homophily(sg, 2);
  const double sgn = detail::sign_of(ind.h1);

  // First order.
  double best = -std::numeric_limits<double>::infinity();
  double best_low = best, best_high = best;
  PolynomialFilter arg1;
  for (const auto& g : detail::first_order_grid()) {
    if (!family_check(g, sg.spectrum).in_Sg1) continue;
    double v = detail::linear_homophily(g, h);
    double& side = g.coefficient(1) < 0 ? best_low : best_high;
    side = std::max(side, v);
    if (v > best) {
      best = v;
      arg1 = g;
    }
  }
  double margin1 = sgn * (best_low - best_high);
  // Value at the argmax: (1/2) int_0^2 g + |eps2 H_1|, with unit constant.
  double formula = 0.5 * arg1.integral_0_2() + std::abs(arg1.coefficient(1) * ind.h1);
  double formula_pub = 0.5 * (a_pub / n) * arg1.integral_0_2() + std::abs(arg1.coefficient(1) * ind.h1);
  double formula_gap = std::abs(formula - best);

  // Second order, centred form p + q (l - 1) - c (l - 1)^2.
  double best2 = -std::numeric_limits<double>::infinity();
  double best2_low = best2, best2_high = best2;
  PolynomialFilter arg2;
  for (int ip = 1; ip <= 20; ++ip)
    for (int iq = -20; iq <= 20; ++iq) {
      if (iq == 0) continue;
      for (int ic = 1; ic <= 20; ++ic) {
        auto g = centred_second_order(0.05 * ip, 0.025 * iq, 0.025 * ic);
        if (!family_check(g, sg.spectrum).in_Sg2) continue;
        double v = detail::linear_homophily(g, h);
        double& side = iq < 0 ? best2_low : best2_high;
        side = std::max(side, v);
        if (v > best2) {
          best2 = v;
          arg2 = g;
        }
      }
    }
  double margin2 = sgn * (best2_low - best2_high);

  double closed_gap = 0.0;
  for (const auto* g : {&arg1, &arg2}) {
    double direct = filter_homophily(*g, sg);
    closed_gap = std::max(closed_gap, std::abs(direct - closed_form_filter_homophily(*g, ind.h1, ind.h2)));
  }
  const bool kinds_ok = pass_kind(arg1) == (sgn > 0 ? PassKind::low : PassKind::high) &&
                        pass_kind(arg2) == (sgn > 0 ? PassKind::low : PassKind::high);
  o.margin = std::min({margin1, margin2, kIdentityTolerance - formula_gap, kIdentityTolerance - closed_gap});
  if (!kinds_ok) o.margin = std::min(o.margin, 0.0);
  o.detail["first_order_argmax"] = arg1.coefficients();
  o.detail["first_order_kind"] = to_string(pass_kind(arg1));
  o.detail["second_order_argmax"] = arg2.coefficients();
  o.detail["second_order_kind"] = to_string(pass_kind(arg2));
  o.detail["formula_gap"] = formula_gap;
  o.detail["formula_gap_published_constant"] = std::abs(formula_pub - best);
  o.detail["closed_form_gap"] = closed_gap;
  return o;
}

/// Extremal first-order filter against the second-order construction.
inline CheckOutcome check_firstsecond(const json& inst) {
  auto sg = SpectralGraph::analyze(graph_from_json(inst.at("graph")));
  auto ind = detail::binary_indicators(sg);
  const double n = ind.r0 + ind.r1;
  const double a = 2.0 * std::pow(std::sqrt(ind.r0) - std::sqrt(ind.r1), 2) / (3.0 * n);
  const double s = ind.h1 >= 0 ? -1.0 : 1.0;  // slope sign opposite to H_1
  PolynomialFilter g1 = ind.h1 >= 0 ? first_order(1.0, -0.5) : first_order(0.0, 0.5);
  double v1 = filter_homophily(g1, sg);

  const double c = 0.125;
  PolynomialFilter g2 = centred_second_order(0.5 + c, 0.5 * s, c);
  double diff = filter_homophily(g2, sg) - v1;

  CheckOutcome o;
  o.detail = {{"H1", ind.h1}, {"H2", ind.h2}, {"a", a}, {"g1", g1.coefficients()}};
  bool g2_ok = family_check(g2, sg.spectrum).in_Sg2;
  if (ind.h2 <= a) {
    o.detail["case"] = 1;
    o.detail["g2"] = g2.coefficients();
    o.detail["difference"] = diff;
    o.margin = g2_ok ? diff : -1.0;
    return o;
  }
  o.detail["case"] = 2;
  double proof_margin = c * ind.h2 / 3.0 - std::abs(diff);
  o.detail["constructed_margin"] = proof_margin;
  if (g2_ok && proof_margin > 0) {
    o.detail["g2"] = g2.coefficients();
    o.margin = proof_margin;
    return o;
  }
  // Witness: keep the curvature small and shrink the slope until the two
  // homophily values coincide.
  const double cw = 0.1;
  double qw = 0.5 - cw * (1.0 - ind.h2) / (1.0 + std::abs(ind.h1));
  PolynomialFilter w = centred_second_order(qw + cw, s * qw, cw);
  double dw = filter_homophily(w, sg) - v1;
  o.detail["g2"] = w.coefficients();
  o.detail["witness"] = true;
  o.detail["difference"] = dw;
  o.margin = family_check(w, sg.spectrum).in_Sg2 ? cw * ind.h2 / 3.0 - std::abs(dw) : -1.0;
  return o;
}

struct FilterBankResult {
  bool found = false;
  PolynomialFilter g2;
  double l1 = 0.0;
  double margin = -std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
};

namespace detail {

struct BankTerms {
  double log_ratio;
  double m;
};

inline std::optional<BankTerms> bank_terms(const PolynomialFilter& g, const Vector& eigs, const std::vector<double>& h) {
  Vector resp = g.responses(eigs);
  double hom = linear_homophily(g, h);
  double sum = resp.sum();
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < resp.size(); ++i)
    if (std::abs(resp(i)) > kSupportThreshold) m = std::min(m, resp(i));
  if (!(hom > 0) || !(sum > 0) || !(m > 0) || !std::isfinite(m)) return std::nullopt;
  return BankTerms{std::log(hom / sum), m};
}

}  // namespace detail

inline const std::vector<double>& filter_bank_weights() {
  static const std::vector<double> w = [] {
    std::vector<double> v;
    for (int i = 1; i <= 19; ++i) v.push_back(0.05 * i);
    v.push_back(0.99);
    v.push_back(0.999);
    return v;
  }();
  return w;
}

/// Searches g2 over the first-order grid and l1 over filter_bank_weights()
/// for g = l1 g1 + (1 - l1) g2 in S_g with
/// (m_g1 / m_g) log(H_1(g~) / sum g) > log(H_1(g~1) / sum g1).
/// Budget: |grid| x |weights| candidates; the best margin is returned.
inline FilterBankResult search_filter_bank(const PolynomialFilter& g1, const SpectralGraph& sg) {
  if (g1.degree() != 1) throw InvalidInput("filter bank search needs a first-order g1");
  const Vector& eigs = sg.spectrum.eigenvalues;
  auto h = detail::monomial_homophily(sg, 1);
  auto base = detail::bank_terms(g1, eigs, h);
  if (!base) throw Degenerate("g1 has non-positive transformed homophily or response sum");
  FilterBankResult best;
  for (const auto& g2 : detail::first_order_grid())
    for (double l1 : filter_bank_weights()) {
      PolynomialFilter g({l1 * g1.coefficient(0) + (1 - l1) * g2.coefficient(0),
                          l1 * g1.coefficient(1) + (1 - l1) * g2.coefficient(1)},
                         "bank");
      ++best.evaluated;
      if (!family_check(g, eigs).in_Sg) continue;
      auto t = detail::bank_terms(g, eigs, h);
      if (!t) continue;
      double margin = (base->m / t->m) * t->log_ratio - base->log_ratio;
      if (margin > best.margin) {
        best.margin = margin;
        best.g2 = g2;
        best.l1 = l1;
      }
    }
  best.found = best.margin > 0;
  return best;
}

inline CheckOutcome check_filterbank(const json& inst) {
  auto sg = SpectralGraph::analyze(graph_from_json(inst.at("graph")));
  PolynomialFilter g1 = filter_from_json(inst.at("g1"));
  CheckOutcome o;
  if (!family_check(g1, sg.spectrum).in_Sg1) {
    o.skipped = true;
    return o;
  }
  auto r = search_filter_bank(g1, sg);
  o.margin = r.margin;
  o.detail = {{"found", r.found},
              {"g2", r.g2.coefficients()},
              {"l1", r.l1},
              {"margin", num(r.margin)},
              {"evaluated", r.evaluated}};
  return o;
}

inline CheckOutcome check_positivity(const json& inst) {
  auto sg = SpectralGraph::analyze(graph_from_json(inst.at("graph")));
  PolynomialFilter g = filter_from_json(inst.at("filter"));
  bool strict = inst.at("strict").get<bool>();
  double v = filter_homophily(g, sg);
  Vector dy = label_difference(sg.graph, 0, 1);
  double q = dy.dot(filter_matrix(g, sg.spectrum) * dy) / static_cast<double>(sg.n());
  CheckOutcome o;
  o.margin = std::min(v + 1e-10, 1e-10 - std::abs(v - q));
  if (strict) o.margin = std::min(o.margin, v);
  o.detail = {{"value", v}, {"quadratic_form", q}};
  return o;
}

/// Re-runs the check named in a serialized instance.
inline CheckOutcome recheck(const json& inst, const TrialConfig& cfg = {}) {
  const auto check = inst.at("check").get<std::string>();
  if (check == "interaction-inequalities") return check_interaction(inst, cfg.tolerance);
  if (check == "moment-identities") return check_moments(inst);
  if (check == "error-bounds") return check_bound_instance(inst).chain;
  if (check == "spectral-bounds") return check_bound_instance(inst).spectral;
  if (check == "sigmoid-clamp") return check_sigmoid_point(inst);
  if (check == "low-high-pass") return check_lowhigh(inst, cfg.min_homophily);
  if (check == "first-second-order") return check_firstsecond(inst);
  if (check == "filter-bank") return check_filterbank(inst);
  if (check == "positivity") return check_positivity(inst);
  throw InvalidInput("unknown check '" + check + "'");
}

// ---------------------------------------------------------------------------
// Suites.

namespace detail {

// Runs trials until `cfg.trials` are evaluated or the attempt budget is spent.
inline void drive(TheoremVerdict& v, const TrialConfig& cfg, std::uint64_t salt,
                  const std::function<json(std::mt19937_64&)>& make,
                  const std::function<CheckOutcome(const json&)>& check) {
  const std::size_t budget = cfg.trials * cfg.max_attempts_factor;
  for (std::size_t t = 0; v.trials < cfg.trials && t < budget; ++t) {
    std::mt19937_64 rng(mix_seed(cfg.seed ^ salt, t));
    json inst = make(rng);
    inst["check"] = v.id;
    inst = json::parse(inst.dump());
    v.record(inst, check(inst));
  }
  v.diagnostics["attempt_budget"] = budget;
}

}  // namespace detail

inline TheoremVerdict validate_interaction(const TrialConfig& cfg) {
  TheoremVerdict v{"interaction-inequalities"};
  std::size_t witnesses = 0;
  detail::drive(
      v, cfg, 0x11,
      [&](std::mt19937_64& rng) { return json{{"graph", graph_json(detail::random_graph(cfg, rng, detail::random_classes(cfg, rng)))}}; },
      [&](const json& inst) {
        auto o = check_interaction(inst, cfg.tolerance);
        if (o.detail["power_gap"].get<double>() > 1e-6) ++witnesses;
        return o;
      });
  v.diagnostics["noncommuting_power_witnesses"] = witnesses;
  return v;
}

inline TheoremVerdict validate_moments(const TrialConfig& cfg) {
  TheoremVerdict v{"moment-identities"};
  double worst = 0.0;
  detail::drive(
      v, cfg, 0x11,  // same ensemble as the interaction suite
      [&](std::mt19937_64& rng) { return json{{"graph", graph_json(detail::random_graph(cfg, rng, detail::random_classes(cfg, rng)))}}; },
      [&](const json& inst) {
        auto o = check_moments(inst);
        worst = std::max(worst, o.detail["max_gap"].get<double>());
        return o;
      });
  v.diagnostics["max_gap"] = worst;
  return v;
}

/// Error-bound chain, spectral/spatial bounds and the pointwise sigmoid grid.
inline std::vector<TheoremVerdict> validate_bounds(const TrialConfig& cfg) {
  TheoremVerdict chain{"error-bounds"};
  TheoremVerdict spectral{"spectral-bounds"};
  const std::size_t budget = cfg.trials * cfg.max_attempts_factor;
  for (std::size_t t = 0; (spectral.trials < cfg.trials || chain.trials < cfg.trials) && t < budget; ++t) {
    std::mt19937_64 rng(mix_seed(cfg.seed ^ 0x33, t));
    auto sg = SpectralGraph::analyze(detail::random_graph(cfg, rng, 2));
    auto g = detail::random_family_filter(rng, sg.spectrum.eigenvalues);
    json inst = {{"graph", graph_json(sg.graph)},
                 {"filter", filter_json(g)},
                 {"x0", vector_json(detail::random_input(rng, sg.n()))},
                 {"x1", vector_json(detail::random_input(rng, sg.n()))}};
    inst = json::parse(inst.dump());
    auto out = check_bound_instance(inst);
    json a = inst, b = inst;
    a["check"] = chain.id;
    b["check"] = spectral.id;
    if (chain.trials < cfg.trials) chain.record(a, out.chain);
    if (spectral.trials < cfg.trials) spectral.record(b, out.spectral);
  }
  chain.diagnostics["attempt_budget"] = budget;
  spectral.diagnostics["attempt_budget"] = budget;

  TheoremVerdict point{"sigmoid-clamp"};
  constexpr int kGrid = 5000;
  for (int i = 0; i < kGrid; ++i)
    for (int y = 0; y <= 1; ++y) {
      json inst = {{"check", point.id}, {"x", -6.0 + 12.0 * i / (kGrid - 1)}, {"y", y}};
      point.record(inst, check_sigmoid_point(inst));
    }
  return {chain, spectral, point};
}

inline TheoremVerdict validate_lowhigh(const TrialConfig& cfg) {
  TheoremVerdict v{"low-high-pass"};
  json rows = json::array();
  double published_gap = 0.0;
  detail::drive(
      v, cfg, 0x44, [&](std::mt19937_64& rng) { return json{{"graph", graph_json(detail::random_graph(cfg, rng, 2))}}; },
      [&](const json& inst) {
        auto o = check_lowhigh(inst, cfg.min_homophily);
        if (!o.skipped) {
          rows.push_back({{"H1", o.detail["H1"]}, {"A", o.detail["A"]}, {"B", o.detail["B"]},
                          {"C", o.detail["C"]}, {"lambda_bar", o.detail["lambda_bar"]}});
          published_gap = std::max(published_gap, o.detail["formula_gap_published_constant"].get<double>());
        }
        return o;
      });
  v.diagnostics["per_trial"] = rows;
  v.diagnostics["max_formula_gap_published_constant"] = published_gap;
  return v;
}

inline TheoremVerdict validate_firstsecond(const TrialConfig& cfg) {
  TheoremVerdict v{"first-second-order"};
  std::size_t case1 = 0, case2 = 0, witness = 0;
  detail::drive(
      v, cfg, 0x55, [&](std::mt19937_64& rng) { return json{{"graph", graph_json(detail::random_graph(cfg, rng, 2))}}; },
      [&](const json& inst) {
        auto o = check_firstsecond(inst);
        (o.detail["case"].get<int>() == 1 ? case1 : case2)++;
        if (o.detail.contains("witness")) ++witness;
        return o;
      });
  v.diagnostics["case1_trials"] = case1;
  v.diagnostics["case2_trials"] = case2;
  v.diagnostics["case2_constructed_filter_failed"] = witness;
  return v;
}

/// `cfg.trials` graphs, `cfg.filters_per_graph` random g1 each.
inline TheoremVerdict validate_filterbank(const TrialConfig& cfg) {
  TheoremVerdict v{"filter-bank"};
  std::size_t not_found = 0;
  const std::size_t budget = cfg.trials * cfg.max_attempts_factor;
  std::size_t graphs = 0;
  for (std::size_t t = 0; graphs < cfg.trials && t < budget; ++t) {
    std::mt19937_64 rng(mix_seed(cfg.seed ^ 0x66, t));
    auto sg = SpectralGraph::analyze(detail::random_graph(cfg, rng, 2));
    ++graphs;
    for (std::size_t f = 0; f < cfg.filters_per_graph; ++f) {
      PolynomialFilter g1 = detail::random_first_order(rng);
      for (int a = 0; a < 100 && !family_check(g1, sg.spectrum).in_Sg1; ++a) g1 = detail::random_first_order(rng);
      json inst = {{"check", v.id}, {"graph", graph_json(sg.graph)}, {"g1", filter_json(g1)}};
      inst = json::parse(inst.dump());
      auto o = check_filterbank(inst);
      if (!o.skipped && !o.detail["found"].get<bool>()) ++not_found;
      v.record(inst, o);
    }
  }
  v.diagnostics["graphs"] = graphs;
  v.diagnostics["not_found"] = not_found;
  v.diagnostics["search_budget_per_g1"] = detail::first_order_grid().size() * filter_bank_weights().size();
  return v;
}

inline TheoremVerdict validate_positivity(const TrialConfig& cfg) {
  TheoremVerdict v{"positivity"};
  detail::drive(
      v, cfg, 0x77,
      [&](std::mt19937_64& rng) {
        auto g = detail::random_graph(cfg, rng, 2);
        bool strict = rng() & 1U;
        auto f = detail::random_nonnegative(rng, strict ? 0.01 : 0.0);
        return json{{"graph", graph_json(g)}, {"filter", filter_json(f)}, {"strict", strict}};
      },
      check_positivity);
  return v;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"interaction", "moments",    "bounds",     "lowhigh",
                                              "firstsecond", "filterbank", "positivity", "all"};
  return names;
}

inline std::vector<TheoremVerdict> run_suite(const std::string& suite, const TrialConfig& cfg) {
  if (cfg.trials < 1) throw InvalidInput("trials must be >= 1");
  std::vector<TheoremVerdict> out;
  bool all = suite == "all";
  if (all || suite == "interaction") out.push_back(validate_interaction(cfg));
  if (all || suite == "moments") out.push_back(validate_moments(cfg));
  if (all || suite == "bounds")
    for (auto& v : validate_bounds(cfg)) out.push_back(std::move(v));
  if (all || suite == "lowhigh") out.push_back(validate_lowhigh(cfg));
  if (all || suite == "firstsecond") out.push_back(validate_firstsecond(cfg));
  if (all || suite == "filterbank") out.push_back(validate_filterbank(cfg));
  if (all || suite == "positivity") out.push_back(validate_positivity(cfg));
  if (out.empty()) throw InvalidInput("unknown suite '" + suite + "'");
  return out;
}

inline json validation_report(const std::string& suite, const TrialConfig& cfg,
                              const std::vector<TheoremVerdict>& verdicts) {
  json vs = json::array();
  bool passed = true;
  for (const auto& v : verdicts) {
    vs.push_back(verdict_json(v));
    passed = passed && v.passed();
  }
  return {{"suite", suite},
          {"tool_version", kToolVersion},
          {"config",
           {{"trials", cfg.trials},
            {"seed", cfg.seed},
            {"n_min", cfg.n_min},
            {"n_max", cfg.n_max},
            {"classes", cfg.classes},
            {"p_min", cfg.p_min},
            {"p_max", cfg.p_max},
            {"tolerance", cfg.tolerance},
            {"min_homophily", cfg.min_homophily},
            {"filters_per_graph", cfg.filters_per_graph}}},
          {"verdicts", vs},
          {"passed", passed}};
}

}  // namespace gfa
