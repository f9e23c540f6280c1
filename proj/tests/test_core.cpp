// Graph construction, normalized operators, spectra, indicators and filters,
// checked against the naive oracles in support/oracle.hpp and against values
// frozen from an independent numpy computation on the 3-node path.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gfa/filters.hpp"
#include "gfa/graph.hpp"
#include "gfa/indicators.hpp"
#include "gfa/io.hpp"
#include "gfa/synth.hpp"
#include "support/oracle.hpp"
#include "support/toy.hpp"

using namespace gfa;

namespace {

const std::string kFixtures = GFA_TEST_FIXTURES;

std::vector<std::pair<int, int>> pairs(const LabeledGraph& g) {
  std::vector<std::pair<int, int>> out;
  for (auto [u, v] : g.edges()) out.emplace_back(static_cast<int>(u), static_cast<int>(v));
  return out;
}

// A spread of SBM graphs: sizes 8..40, K in {2,3,4}, both regimes.
std::vector<LabeledGraph> ensemble(std::size_t count, std::uint64_t seed, std::size_t fixed_k = 0) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledGraph> out;
  for (std::size_t t = 0; t < count; ++t) {
    SbmSpec s;
    s.n = 8 + rng() % 33;
    s.classes = fixed_k ? fixed_k : 2 + rng() % 3;
    s.p_in = std::uniform_real_distribution<double>(0.02, 0.6)(rng);
    s.p_out = std::uniform_real_distribution<double>(0.02, 0.6)(rng);
    s.seed = rng();
    out.push_back(generate_sbm(s).graph);
  }
  return out;
}

Matrix complete_adjacency(int m) { return Matrix::Ones(m, m); }

}  // namespace

// ---------------------------------------------------------------------------
// graph_core

TEST(BuildGraph, PathWithSelfLoops) {
  auto g = toy::p3();
  EXPECT_EQ(g.n(), 3u);
  EXPECT_EQ(g.num_classes(), 2u);
  EXPECT_EQ(g.class_sizes(), (std::vector<std::size_t>{1, 2}));
  Matrix expect(3, 3);
  expect << 1, 1, 0, 1, 1, 1, 0, 1, 1;
  EXPECT_EQ(g.adjacency(), expect);
}

TEST(BuildGraph, SingleNode) {
  auto g = build_graph({}, {0});
  EXPECT_EQ(g.adjacency(), Matrix::Ones(1, 1));
  auto ops = normalize(g);
  EXPECT_DOUBLE_EQ(ops.adjacency(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ops.laplacian(0, 0), 0.0);
}

TEST(BuildGraph, SymmetrizationIsIdempotent) {
  auto a = build_graph({{0, 1}}, {0, 1});
  auto b = build_graph({{0, 1}, {1, 0}}, {0, 1});
  EXPECT_EQ(a.adjacency(), b.adjacency());
  EXPECT_EQ(b.num_edges(), 1u);
}

TEST(BuildGraph, RejectsBadInput) {
  EXPECT_THROW(build_graph({{0, 3}}, {0, 1, 1}), InvalidInput);
  EXPECT_THROW(build_graph({}, {0, 2}), InvalidInput);  // class 1 missing
  EXPECT_THROW(build_graph({}, {}), InvalidInput);
  EXPECT_THROW(build_graph({}, {-1}), InvalidInput);
  Matrix w = Matrix::Ones(2, 2);
  w(0, 1) = w(1, 0) = 0.5;
  EXPECT_THROW(graph_from_adjacency(w, {0, 1}), InvalidInput);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  EXPECT_THROW(graph_from_adjacency(asym, {0, 1}), InvalidInput);
}

TEST(BuildGraph, StructuralInvariants) {
  for (const auto& g : ensemble(40, 1)) {
    const Matrix& a = g.adjacency();
    EXPECT_EQ(a, a.transpose());
    EXPECT_TRUE((a.diagonal().array() == 1.0).all());
    auto lm = label_matrix(g);
    EXPECT_TRUE((lm.Y.rowwise().sum().array() == 1.0).all());
    EXPECT_EQ(Matrix(lm.Y.transpose() * lm.Y), Matrix(lm.R.asDiagonal()));
    EXPECT_DOUBLE_EQ(lm.R.sum(), static_cast<double>(g.n()));
    for (std::size_t k = 0; k < g.num_classes(); ++k) EXPECT_GT(g.class_sizes()[k], 0u);
  }
}

TEST(BuildGraph, BinaryReduction) {
  auto sample = toy::learner_graph();
  auto b = reduce_to_binary(sample.graph, 2);
  EXPECT_EQ(b.num_classes(), 2u);
  EXPECT_EQ(b.adjacency(), sample.graph.adjacency());
  for (std::size_t i = 0; i < b.n(); ++i) EXPECT_EQ(b.labels()[i], sample.graph.labels()[i] == 2 ? 0 : 1);
  EXPECT_THROW(reduce_to_binary(sample.graph, 3), InvalidInput);
}

TEST(Normalize, PathRandomWalkRows) {
  auto ops = normalize(toy::p3());
  EXPECT_NEAR(ops.random_walk(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(ops.random_walk(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(ops.random_walk(0, 2), 0.0, 1e-15);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(ops.random_walk(1, j), 1.0 / 3.0, 1e-15);
}

TEST(Normalize, MatchesDenseOracle) {
  for (const auto& g : ensemble(30, 2)) {
    auto ops = normalize(g);
    auto o = oracle::ops(oracle::adjacency(g.n(), pairs(g)));
    EXPECT_LE((ops.adjacency - o.at).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((ops.laplacian - o.l).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((ops.random_walk - o.p).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(ops.adjacency, ops.adjacency.transpose());
    EXPECT_LE((ops.random_walk.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(Normalize, CompleteGraph) {
  for (int m : {2, 5, 9}) {
    std::vector<int> labels(m, 0);
    auto g = graph_from_adjacency(complete_adjacency(m), labels);
    auto ops = normalize(g);
    EXPECT_LE((ops.adjacency - Matrix::Constant(m, m, 1.0 / m)).cwiseAbs().maxCoeff(), 1e-15);
    auto sd = eigendecompose(ops);
    EXPECT_NEAR(sd.eigenvalues(0), 0.0, 1e-12);
    for (int i = 1; i < m; ++i) EXPECT_NEAR(sd.eigenvalues(i), 1.0, 1e-12);
  }
}

TEST(Eigendecompose, TwoNodeAnalytic) {
  auto sd = eigendecompose(normalize(build_graph({{0, 1}}, {0, 1})));
  // L~ = [[1/2, -1/2], [-1/2, 1/2]].
  EXPECT_NEAR(sd.eigenvalues(0), 0.0, 1e-15);
  EXPECT_NEAR(sd.eigenvalues(1), 1.0, 1e-15);
}

TEST(Eigendecompose, DisconnectedComponentsGiveRepeatedZero) {
  auto g = build_graph({{0, 1}, {2, 3}}, {0, 0, 1, 1});
  auto sd = eigendecompose(normalize(g));
  EXPECT_EQ(sd.zero_multiplicity(), 2u);
  EXPECT_EQ(g.num_components(), 2u);
  EXPECT_FALSE(g.connected());
}

TEST(Eigendecompose, MatchesJacobiOracle) {
  for (const auto& g : ensemble(30, 3)) {
    auto ops = normalize(g);
    auto sd = eigendecompose(ops);
    auto [w, u] = oracle::jacobi(ops.laplacian);
    const double n = static_cast<double>(g.n());
    EXPECT_LE((sd.eigenvalues - w).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((sd.eigenvectors.transpose() * sd.eigenvectors - Matrix::Identity(g.n(), g.n())).cwiseAbs().maxCoeff(),
              1e-8);
    EXPECT_LE((sd.reconstruct() - ops.laplacian).norm(), 1e-7 * n);
    EXPECT_EQ(sd.clamp_violations, 0u);
    EXPECT_GE(sd.eigenvalues.minCoeff(), 0.0);
    EXPECT_LE(sd.eigenvalues.maxCoeff(), 2.0);
    EXPECT_NEAR(sd.eigenvalues(0), 0.0, 1e-8);
    EXPECT_EQ(sd.zero_multiplicity(), g.num_components());
  }
}

TEST(Eigendecompose, SignConventionIsDeterministic) {
  auto g = toy::learner_graph().graph;
  auto a = eigendecompose(normalize(g));
  auto b = eigendecompose(normalize(g));
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
  for (Eigen::Index i = 0; i < a.eigenvectors.cols(); ++i) {
    auto col = a.eigenvectors.col(i);
    for (Eigen::Index r = 0; r < col.size(); ++r)
      if (std::abs(col(r)) > 1e-10) {
        EXPECT_GT(col(r), 0.0);
        break;
      }
  }
}

// ---------------------------------------------------------------------------
// indicators

TEST(Interaction, PathValues) {
  auto g = io::read_graph(kFixtures + "/p3.edges", kFixtures + "/p3.labels.csv");
  auto s = interaction_series(g, normalize(g), 2);
  Matrix pi1(2, 2), pt1(2, 2), pt2(2, 2);
  pi1 << 0.5, 0.5, 1.0 / 6.0, 5.0 / 6.0;
  pt1 << 0.5, 0.28867513459481290, 0.28867513459481290, 0.82491495713052990;
  pt2 << 0.41666666666666668, 0.35841374236010204, 0.35841374236010204, 0.77076246427544160;
  EXPECT_LE((s[0].pi - pi1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((s[0].pi_tilde - pt1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((s[1].pi_tilde - pt2).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(s[0].pi_tilde(1, 1), 5.0 / 12.0 + 1.0 / std::sqrt(6.0), 1e-14);
  EXPECT_GE(s[0].pi(1, 1), s[0].pi_tilde(1, 1));
}

TEST(Interaction, DisconnectedCliquesAreIdentity) {
  Matrix a = Matrix::Zero(6, 6);
  a.topLeftCorner(3, 3).setOnes();
  a.bottomRightCorner(3, 3).setOnes();
  auto g = graph_from_adjacency(a, {0, 0, 0, 1, 1, 1});
  auto im = interaction_probability(g, 1);
  EXPECT_LE((im.pi - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((im.pi_tilde - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  auto h = homophily_degree(im, g);
  EXPECT_NEAR(h.graph, 1.0, 1e-15);
}

TEST(Interaction, MatchesExplicitPowers) {
  for (const auto& g : ensemble(25, 4)) {
    auto o = oracle::ops(oracle::adjacency(g.n(), pairs(g)));
    auto lm = label_matrix(g);
    Vector rs = lm.R.array().rsqrt();
    auto series = interaction_series(g, normalize(g), 4);
    for (int k = 1; k <= 4; ++k) {
      Matrix pi = lm.R.cwiseInverse().asDiagonal() * oracle::matmul(lm.Y.transpose(), oracle::matmul(oracle::power(o.p, k), lm.Y));
      Matrix pt = rs.asDiagonal() * oracle::matmul(lm.Y.transpose(), oracle::matmul(oracle::power(o.at, k), lm.Y)) * rs.asDiagonal();
      const auto& im = series[k - 1];
      EXPECT_LE((im.pi - pi).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((im.pi_tilde - pt).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((im.pi.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
      EXPECT_LE((im.pi_tilde - im.pi_tilde.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GE(im.pi.minCoeff(), 0.0);
      EXPECT_LE(im.pi.maxCoeff(), 1.0 + 1e-15);
    }
  }
}

TEST(Interaction, InequalitiesHoldOnEnsemble) {
  for (const auto& g : ensemble(60, 5)) {
    auto series = interaction_series(g, normalize(g), 8);
    Vector r = label_matrix(g).R;
    for (int k = 1; k <= 4; ++k) {
      const auto& im = series[k - 1];
      const auto& im2 = series[2 * k - 1];
      for (Eigen::Index l = 0; l < r.size(); ++l) {
        EXPECT_GE(im2.pi_tilde(l, l), im.pi_tilde(l, l) * im.pi_tilde(l, l) - 1e-10);
        EXPECT_GE(im.pi(l, l), im.pi_tilde(l, l) - 1e-10);
        for (Eigen::Index m = 0; m < r.size(); ++m)
          EXPECT_GE(r(l) * im.pi(l, m) + r(m) * im.pi(m, l), 2.0 * std::sqrt(r(l) * r(m)) * im.pi_tilde(l, m) - 1e-10);
      }
    }
  }
}

TEST(Interaction, PoweringDoesNotCommuteWithTheIndicator) {
  double worst = 0.0;
  for (const auto& g : ensemble(20, 6)) {
    auto s = interaction_series(g, normalize(g), 2);
    worst = std::max(worst, (s[0].pi_tilde * s[0].pi_tilde - s[1].pi_tilde).cwiseAbs().maxCoeff());
  }
  EXPECT_GT(worst, 1e-6);
}

TEST(Homophily, PathValues) {
  auto g = toy::p3();
  auto s = interaction_series(g, normalize(g), 2);
  auto h1 = homophily_degree(s[0], g);
  auto h2 = homophily_degree(s[1], g);
  EXPECT_NEAR(h1.per_class[0], 0.052972874199297054, 1e-14);
  EXPECT_NEAR(h1.per_class[1], 0.5068735753865528, 1e-14);
  EXPECT_NEAR(h1.graph, 4.0 / 9.0, 1e-14);
  EXPECT_NEAR(h2.per_class[0], -0.05208098303219008, 1e-14);
  EXPECT_NEAR(h2.per_class[1], 0.42239464615546063, 1e-14);
  EXPECT_NEAR(h2.graph, 17.0 / 54.0, 1e-14);
}

TEST(Homophily, SingleClassCompleteGraph) {
  auto g = graph_from_adjacency(complete_adjacency(5), {0, 0, 0, 0, 0});
  EXPECT_NEAR(homophily_degree(interaction_probability(g, 1), g).graph, 1.0, 1e-14);
}

TEST(Homophily, RangeAndAggregation) {
  for (const auto& g : ensemble(40, 7)) {
    auto series = interaction_series(g, normalize(g), 3);
    Vector w = (label_matrix(g).R / static_cast<double>(g.n())).cwiseSqrt();
    for (const auto& im : series) {
      auto h = homophily_degree(im, g);
      double agg = 0.0;
      for (std::size_t l = 0; l < h.per_class.size(); ++l) {
        EXPECT_GE(h.per_class[l], -1.0);
        EXPECT_LE(h.per_class[l], 1.0);
        agg += w(static_cast<Eigen::Index>(l)) * h.per_class[l];
      }
      EXPECT_NEAR(h.graph, agg, 1e-12);
      EXPECT_GE(h.graph, -1.0);
      EXPECT_LE(h.graph, 1.0);
    }
  }
}

TEST(Spectrum, EigenvectorSignals) {
  auto sd = eigendecompose(normalize(toy::learner_graph().graph));
  auto one = signal_spectrum(sd, sd.eigenvectors.col(3));
  Vector p = one.probabilities();
  EXPECT_NEAR(p(3), 1.0, 1e-12);
  EXPECT_NEAR(p.sum() - p(3), 0.0, 1e-12);
  EXPECT_NEAR(information_content(one), 0.0, 1e-12);
  auto mix = signal_spectrum(sd, (sd.eigenvectors.col(0) + sd.eigenvectors.col(1)) / std::sqrt(2.0));
  EXPECT_NEAR(mix.probabilities()(0), 0.5, 1e-12);
  EXPECT_NEAR(mix.probabilities()(1), 0.5, 1e-12);
  EXPECT_EQ(mix.support.size(), 2u);
}

TEST(Spectrum, UniformCoefficients) {
  for (int n : {3, 7}) {
    auto s = spectrum_from_coefficients(Vector::Constant(n, 0.3));
    EXPECT_NEAR(information_content(s), n * std::log(n), 1e-12);
  }
  EXPECT_THROW(information_content(spectrum_from_coefficients(Vector::Zero(3))), Degenerate);
}

TEST(Spectrum, PathLabelDifference) {
  auto sg = SpectralGraph::analyze(toy::p3());
  auto spec = signal_spectrum(sg.spectrum, label_difference(sg.graph, 0, 1));
  Vector p = spec.probabilities();
  EXPECT_NEAR(sg.spectrum.eigenvalues(1), 0.5, 1e-14);
  EXPECT_NEAR(sg.spectrum.eigenvalues(2), 7.0 / 6.0, 1e-14);
  EXPECT_NEAR(p(0), 1.0 / 7.0, 1e-14);
  EXPECT_NEAR(p(1), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(p(2), 4.0 / 21.0, 1e-14);
  EXPECT_NEAR(information_content(spec), 4.009603333767011, 1e-12);
  EXPECT_NEAR(response_efficiency(PolynomialFilter({0.0, 1.0}), spec, sg.spectrum), 1.0 / 3.0, 1e-14);
}

TEST(Spectrum, ParsevalAndNormalization) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (const auto& g : ensemble(20, 8)) {
    auto sd = eigendecompose(normalize(g));
    Vector x(g.n());
    for (auto& v : x) v = nd(rng);
    auto s = signal_spectrum(sd, x);
    EXPECT_NEAR(s.energy, x.squaredNorm(), 1e-8 * x.squaredNorm());
    EXPECT_NEAR(s.probabilities().sum(), 1.0, 1e-10);
    double tied = 0.0;
    for (auto [lam, pr] : frequency_distribution(sd, s)) tied += pr;
    EXPECT_NEAR(tied, 1.0, 1e-10);
  }
}

TEST(Spectrum, ResponseEfficiencySpecialCases) {
  auto sd = eigendecompose(normalize(toy::learner_graph().graph));
  Vector x = Vector::LinSpaced(24, -1.0, 2.0);
  auto spec = signal_spectrum(sd, x);
  EXPECT_NEAR(response_efficiency(constant_filter(0.7), spec, sd), 1.0 / 24.0, 1e-14);
  // On the path: 1 at lambda = 7/6, 0 at lambda = 0 and 1/2.
  auto p3 = eigendecompose(normalize(toy::p3()));
  PolynomialFilter g({0.0, -0.5 / (7.0 / 6.0 * (7.0 / 6.0 - 0.5)), 1.0 / (7.0 / 6.0 * (7.0 / 6.0 - 0.5))});
  EXPECT_NEAR(g(7.0 / 6.0), 1.0, 1e-15);
  EXPECT_NEAR(response_efficiency(g, signal_spectrum(p3, p3.eigenvectors.col(2)), p3), 1.0, 1e-12);
}

TEST(Spectrum, SignInvariance) {
  auto sg = SpectralGraph::analyze(toy::learner_graph().graph);
  auto flipped = sg.spectrum;
  for (Eigen::Index i = 0; i < flipped.eigenvectors.cols(); i += 2) flipped.eigenvectors.col(i) *= -1.0;
  Vector dy = label_difference(sg.graph, 0, 1);
  auto a = signal_spectrum(sg.spectrum, dy);
  auto b = signal_spectrum(flipped, dy);
  EXPECT_LE((a.probabilities() - b.probabilities()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(information_content(a), information_content(b), 1e-12);
  auto g = geps_filter(0.3);
  EXPECT_NEAR(response_efficiency(g, a, sg.spectrum), response_efficiency(g, b, flipped), 1e-12);
  EXPECT_LE((filter_matrix(g, sg.spectrum) - filter_matrix(g, flipped)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Moments, PathIdentity) {
  auto sg = SpectralGraph::analyze(toy::p3());
  auto mc = label_moment_identity_check(sg, 1, 2);
  EXPECT_NEAR(mc.lhs, 0.12093255001438207, 1e-12);
  EXPECT_NEAR(mc.rhs, 0.12093255001438207, 1e-12);
  EXPECT_LE(mc.gap, 1e-9);
}

TEST(Moments, EnsembleIdentities) {
  for (const auto& g : ensemble(40, 9)) {
    auto sg = SpectralGraph::analyze(g);
    for (int l = 0; l < static_cast<int>(g.num_classes()); ++l)
      for (int m = 1; m <= 4; ++m) {
        auto mc = label_moment_identity_check(sg, l, m);
        EXPECT_LE(mc.gap, 1e-9);
        EXPECT_NEAR(mc.mean, mc.mean_identity, 1e-9);
        EXPECT_NEAR(mc.variance, mc.variance_identity, 1e-9);
      }
  }
  EXPECT_THROW(label_moment_identity_check(SpectralGraph::analyze(toy::p3()), 0, 5), InvalidInput);
}

TEST(Moments, DisconnectedCliquesHaveZeroFrequency) {
  Matrix a = Matrix::Zero(6, 6);
  a.topLeftCorner(3, 3).setOnes();
  a.bottomRightCorner(3, 3).setOnes();
  auto sg = SpectralGraph::analyze(graph_from_adjacency(a, {0, 0, 0, 1, 1, 1}));
  auto mc = label_moment_identity_check(sg, 0, 1);
  EXPECT_NEAR(mc.mean, 0.0, 1e-12);
  EXPECT_NEAR(mc.variance, 0.0, 1e-12);
}

// ---------------------------------------------------------------------------
// filters

TEST(Filter, Evaluation) {
  auto g = gcn_normalized_filter();
  EXPECT_DOUBLE_EQ(g(0.0), 1.0);
  EXPECT_DOUBLE_EQ(g(2.0), 0.0);
  EXPECT_DOUBLE_EQ(NormalizedSecondOrderFilter(0.0)(1.0), 1.0);
  EXPECT_DOUBLE_EQ(gcn_filter()(2.0), -1.0);
  EXPECT_FALSE(family_check(gcn_filter(), Vector::LinSpaced(5, 0, 2)).in_Sg);
}

TEST(Filter, FamilyMembershipAndPassKind) {
  auto sd = eigendecompose(normalize(toy::p3()));
  auto low = family_check(gcn_normalized_filter(), sd);
  EXPECT_TRUE(low.in_Sg);
  EXPECT_TRUE(low.in_Sg1);
  EXPECT_EQ(low.pass_kind, PassKind::low);
  // On the path the responses of l/2 sum to 5/6, below the S_g threshold.
  EXPECT_FALSE(family_check(PolynomialFilter({0.0, 0.5}), sd).in_Sg);
  auto high = family_check(PolynomialFilter({0.0, 0.5}), eigendecompose(normalize(toy::learner_graph().graph)));
  EXPECT_TRUE(high.in_Sg1);
  EXPECT_EQ(high.pass_kind, PassKind::high);
  NormalizedSecondOrderFilter ge(0.5);
  auto second = family_check(ge.polynomial(), sd);
  EXPECT_TRUE(second.in_Sg2);
  EXPECT_NEAR(ge.e2() + 2.0 * ge.e3(), -2.0 * 0.5 / 2.25, 1e-15);
  EXPECT_EQ(second.pass_kind, PassKind::low);
  EXPECT_EQ(pass_kind(geps_filter(-0.5)), PassKind::high);
  EXPECT_FALSE(family_check(constant_filter(0.9), sd).in_Sg1);  // no slope term
}

TEST(Filter, GepsShapeAndExpansion) {
  for (double e : {-0.9, -0.4, 0.0, 0.3, 0.75}) {
    NormalizedSecondOrderFilter g(e);
    EXPECT_NEAR(g(1.0 - e), 1.0, 1e-15);
    auto r = range_on_0_2(g.polynomial());
    EXPECT_GE(r.min, -1e-12);
    EXPECT_LE(r.max, 1.0 + 1e-12);
    double s = (1.0 + std::abs(e)) * (1.0 + std::abs(e));
    EXPECT_NEAR(g.e1(), (s - (1.0 - e) * (1.0 - e)) / s, 1e-15);
    EXPECT_NEAR(g.e2(), 2.0 * (1.0 - e) / s, 1e-15);
    EXPECT_NEAR(g.e3(), -1.0 / s, 1e-15);
    for (double lam = 0.0; lam <= 2.0; lam += 0.125) EXPECT_NEAR(g.polynomial()(lam), g(lam), 1e-14);
  }
  EXPECT_THROW(NormalizedSecondOrderFilter(1.0), InvalidInput);
}

TEST(Filter, GepsEpsilonDerivative) {
  for (double e : {-0.7, -0.2, 0.1, 0.6})
    for (double lam : {0.0, 0.4, 1.3, 2.0}) {
      const double h = 1e-6;
      double fd = (NormalizedSecondOrderFilter(e + h)(lam) - NormalizedSecondOrderFilter(e - h)(lam)) / (2 * h);
      EXPECT_NEAR(NormalizedSecondOrderFilter(e).d_epsilon(lam), fd, 1e-8);
    }
}

TEST(Filter, GepsLowHighFactorization) {
  auto sg = SpectralGraph::analyze(toy::learner_graph().graph);
  const Matrix& l = sg.ops.laplacian;
  const auto n = l.rows();
  for (double e : {-0.6, 0.0, 0.45}) {
    NormalizedSecondOrderFilter g(e);
    double ae = std::abs(e);
    Matrix low = (2.0 + ae - e) * Matrix::Identity(n, n) - l;
    Matrix high = (ae + e) * Matrix::Identity(n, n) + l;
    Matrix prod = low * high / g.scale();
    EXPECT_LE((prod - filter_matrix(g.polynomial(), sg.spectrum)).norm(), 1e-9);
    auto [f1, f2] = g.factors();
    EXPECT_LE((apply_polynomial(f1 * f2, l, Matrix::Identity(n, n)) / g.scale() - prod).norm(), 1e-12);
  }
}

TEST(Filter, ApplyAgreesAcrossMethods) {
  auto sg = SpectralGraph::analyze(toy::learner_graph().graph);
  auto o = oracle::ops(oracle::adjacency(sg.n(), pairs(sg.graph)));
  Matrix x = Matrix::Random(24, 3);
  auto g = PolynomialFilter({0.3, -0.2, 0.15, 0.01});
  Matrix direct = 0.3 * x - 0.2 * oracle::matmul(o.l, x) + 0.15 * oracle::matmul(oracle::power(o.l, 2), x) +
                  0.01 * oracle::matmul(oracle::power(o.l, 3), x);
  EXPECT_LE((apply(g, sg.spectrum, x) - direct).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((apply_polynomial(g, sg.ops.laplacian, x) - direct).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((apply(constant_filter(1.0), sg.spectrum, x) - x).cwiseAbs().maxCoeff(), 1e-12);
  Vector u = sg.spectrum.eigenvectors.col(5);
  EXPECT_LE((apply(PolynomialFilter({0.0, 1.0}), sg.spectrum, u) - sg.spectrum.eigenvalues(5) * u).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_THROW(apply(g, sg.spectrum, Matrix::Zero(3, 1)), InvalidInput);
}

TEST(Filter, PathApplication) {
  auto sg = SpectralGraph::analyze(toy::p3());
  Matrix y0 = label_matrix(sg.graph).Y.col(0);
  Matrix out = apply(gcn_normalized_filter(), sg.spectrum, y0);
  EXPECT_NEAR(out(0), 0.75, 1e-14);
  EXPECT_NEAR(out(1), 0.20412414523193134, 1e-14);
  EXPECT_NEAR(out(2), 0.0, 1e-14);
}

TEST(Filter, TransformedInteractionIdentities) {
  for (const auto& g : ensemble(15, 10)) {
    auto sg = SpectralGraph::analyze(g);
    auto s = interaction_series(g, sg.ops, 2);
    const auto k = static_cast<Eigen::Index>(g.num_classes());
    Matrix id = Matrix::Identity(k, k);
    EXPECT_LE((transformed_interaction(PolynomialFilter({0.0, 1.0}), sg) - (id - s[0].pi_tilde)).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_LE((transformed_interaction(PolynomialFilter({0.0, 0.0, 1.0}), sg) -
               (id - 2.0 * s[0].pi_tilde + s[1].pi_tilde))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
  auto sg = SpectralGraph::analyze(toy::p3());
  Matrix t2(2, 2);
  t2 << 0.41666666666666667, -0.21893653, -0.21893653, 0.12093255001438207;
  EXPECT_LE((transformed_interaction(PolynomialFilter({0.0, 0.0, 1.0}), sg) - t2).cwiseAbs().maxCoeff(), 1e-8);
  auto single = SpectralGraph::analyze(graph_from_adjacency(complete_adjacency(4), {0, 0, 0, 0}));
  EXPECT_NEAR(transformed_interaction(PolynomialFilter({0.0, 0.7, -0.2}), single)(0, 0), 0.0, 1e-14);
}

TEST(FilterHomophily, SpecialCases) {
  auto sg = SpectralGraph::analyze(toy::p3());
  EXPECT_NEAR(filter_homophily(constant_filter(1.0), sg), 1.0, 1e-14);
  EXPECT_NEAR(filter_homophily(gcn_normalized_filter(), sg), 13.0 / 18.0, 1e-14);
  Matrix a = Matrix::Zero(6, 6);
  a.topLeftCorner(3, 3).setOnes();
  a.bottomRightCorner(3, 3).setOnes();
  auto cliques = SpectralGraph::analyze(graph_from_adjacency(a, {0, 0, 0, 1, 1, 1}));
  EXPECT_NEAR(filter_homophily(PolynomialFilter({0.0, 1.0}), cliques), 0.0, 1e-14);
  EXPECT_THROW(filter_homophily(gcn_filter(), SpectralGraph::analyze(toy::learner_graph().graph)), Unsupported);
}

TEST(FilterHomophily, QuadraticFormAndClosedForm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& g : ensemble(40, 12, 2)) {
    auto sg = SpectralGraph::analyze(g);
    auto s = interaction_series(g, sg.ops, 2);
    auto lm = label_matrix(g);
    double h1 = homophily_degree(s[0], lm.R).graph;
    double h2 = homophily_degree(s[1], lm.R).graph;
    auto o = oracle::ops(oracle::adjacency(g.n(), pairs(g)));
    Vector dy = label_difference(g, 0, 1);
    for (int t = 0; t < 4; ++t) {
      PolynomialFilter f({u(rng), u(rng), u(rng)});
      Matrix gl = f.coefficient(0) * Matrix::Identity(g.n(), g.n()) + f.coefficient(1) * o.l +
                  f.coefficient(2) * oracle::matmul(o.l, o.l);
      double quad = dy.dot(gl * dy) / static_cast<double>(g.n());
      double direct = filter_homophily(f, sg);
      EXPECT_NEAR(direct, quad, 1e-10);
      EXPECT_NEAR(closed_form_filter_homophily(f, h1, h2), direct, 1e-9);
    }
  }
}

TEST(FilterHomophily, PublishedConstantDiffersFromDirectValue) {
  // The constant-term coefficient (sqrt R0 - sqrt R1)^2 / n from the GCN
  // derivation does not reproduce the quadratic form; the closed form uses 1.
  auto sg = SpectralGraph::analyze(toy::p3());
  double h1 = 4.0 / 9.0, h2 = 17.0 / 54.0;
  auto g = gcn_normalized_filter();
  EXPECT_NEAR(closed_form_filter_homophily(g, h1, h2), 0.5 + 0.5 * h1, 1e-15);
  EXPECT_NEAR(closed_form_filter_homophily(g, h1, h2), filter_homophily(g, sg), 1e-14);
  double pub = closed_form_filter_homophily_as_published(g, h1, h2, 1.0, 2.0);
  EXPECT_NEAR(pub, 0.5 * std::pow(1.0 - std::sqrt(2.0), 2) / 3.0 + 0.5 * h1, 1e-15);
  EXPECT_GT(std::abs(pub - filter_homophily(g, sg)), 0.4);
  for (double e : {-0.5, 0.3}) {
    double s = (1.0 + std::abs(e)) * (1.0 + std::abs(e));
    double expect = (1.0 + 2.0 * std::abs(e)) / s + (2.0 * e * h1 - h2) / s;
    EXPECT_NEAR(closed_form_filter_homophily(geps_filter(e), h1, h2), expect, 1e-14);
    EXPECT_NEAR(filter_homophily(geps_filter(e), sg), expect, 1e-12);
  }
}

TEST(FilterHomophily, NonnegativeFiltersGiveNonnegativeValues) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (const auto& g : ensemble(60, 14, 2)) {
    auto sg = SpectralGraph::analyze(g);
    // (a + b l)^2 + c l (2 - l) is nonnegative on [0, 2].
    double a = u(rng), b = -u(rng) / 2, c = u(rng) / 4;
    PolynomialFilter f({a * a + 0.01, 2 * a * b + 2 * c, b * b - c});
    ASSERT_GE(range_on_0_2(f).min, 0.0);
    EXPECT_GT(filter_homophily(f, sg), 0.0);
  }
}

TEST(Filter, ParseSpecs) {
  EXPECT_EQ(parse_filter("gcn").coefficients(), (std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(parse_filter("gcn-norm").coefficients(), (std::vector<double>{1.0, -0.5}));
  EXPECT_EQ(parse_filter("poly:0.5,0,0.25").coefficients(), (std::vector<double>{0.5, 0.0, 0.25}));
  EXPECT_EQ(parse_filter("gin:0.5").coefficients(), (std::vector<double>{2.5, -1.0}));
  EXPECT_NEAR(parse_filter("geps:0.2")(0.8), 1.0, 1e-15);
  auto t2 = parse_filter("cheb:2");  // T_2(l - 1) = 2 (l - 1)^2 - 1
  for (double l : {0.0, 0.7, 2.0}) EXPECT_NEAR(t2(l), 2 * (l - 1) * (l - 1) - 1, 1e-14);
  for (const char* bad : {"poly:", "poly:1,x", "geps:1.0", "cheb:1.5", "lowpass", "gcn:2"})
    EXPECT_THROW(parse_filter(bad), InvalidInput) << bad;
  EXPECT_THROW(PolynomialFilter({std::nan("")}), InvalidInput);
}

TEST(Filter, ApproximateArmaAndRangeSearch) {
  auto arma = arma_filter({1.0}, {0.5}, 4);  // 1 / (1 + l/2), truncated
  EXPECT_TRUE(arma.approximate());
  EXPECT_NEAR(arma(0.2), 1 - 0.1 + 0.01 - 0.001 + 0.0001, 1e-15);
  auto cubic = PolynomialFilter({0.1, 1.2, -1.5, 0.5});
  auto r = range_on_0_2(cubic);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i <= 200000; ++i) {
    double v = cubic(2.0 * i / 200000);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_NEAR(r.min, lo, 1e-9);
  EXPECT_NEAR(r.max, hi, 1e-9);
}
