#pragma once

// JSON encoding of graphs, filters and reports. Doubles are written with
// round-trip precision, non-finite values as null.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gfa/bounds.hpp"
#include "gfa/demuf.hpp"
#include "gfa/filters.hpp"
#include "gfa/graph.hpp"
#include "gfa/indicators.hpp"

namespace gfa {

using json = nlohmann::json;

constexpr const char* kToolVersion = "0.3.0";

inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline double num_from(const json& j, double missing = std::numeric_limits<double>::infinity()) {
  return j.is_null() ? missing : j.get<double>();
}

inline json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

inline Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num_from(j[i]);
  return v;
}

inline json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

inline Matrix matrix_from_json(const json& j) {
  if (j.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i]).transpose();
  return m;
}

inline json graph_json(const LabeledGraph& g) {
  json edges = json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  return {{"n", g.n()}, {"labels", g.labels()}, {"edges", edges}};
}

inline LabeledGraph graph_from_json(const json& j) {
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.emplace_back(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
  return build_graph(edges, j.at("labels").get<std::vector<int>>());
}

inline json filter_json(const PolynomialFilter& f) {
  return {{"name", f.name()}, {"coefficients", f.coefficients()}, {"approximate", f.approximate()}};
}

inline PolynomialFilter filter_from_json(const json& j) {
  return PolynomialFilter(j.at("coefficients").get<std::vector<double>>(), j.value("name", "poly"),
                          j.value("approximate", false));
}

// ---------------------------------------------------------------------------
// Indicators.

inline json indicator_json(const IndicatorReport& r) {
  json inter = json::array(), sym = json::array(), hom = json::array(), freq = json::array(),
       info = json::array();
  for (const auto& im : r.interaction) {
    inter.push_back({{"k", im.k}, {"matrix", matrix_json(im.pi)}});
    sym.push_back({{"k", im.k}, {"matrix", matrix_json(im.pi_tilde)}});
  }
  for (const auto& h : r.homophily) hom.push_back({{"k", h.k}, {"per_class", h.per_class}, {"graph", h.graph}});
  for (const auto& ld : r.label_frequency) {
    json ev = json::array(), pr = json::array();
    for (const auto& [l, p] : ld.distribution) {
      ev.push_back(l);
      pr.push_back(p);
    }
    freq.push_back({{"pair", {ld.a, ld.b}}, {"eigenvalue", ev}, {"probability", pr}});
    info.push_back({{"pair", {ld.a, ld.b}}, {"value", ld.information_content}});
  }
  return {{"interaction", inter},
          {"interaction_symmetric", sym},
          {"homophily", hom},
          {"label_frequency", freq},
          {"information_content", info}};
}

inline IndicatorReport indicator_from_json(const json& j) {
  IndicatorReport r;
  const auto& inter = j.at("interaction");
  const auto& sym = j.at("interaction_symmetric");
  for (std::size_t i = 0; i < inter.size(); ++i) {
    InteractionMatrices im;
    im.k = inter[i].at("k").get<int>();
    im.pi = matrix_from_json(inter[i].at("matrix"));
    im.pi_tilde = matrix_from_json(sym[i].at("matrix"));
    r.interaction.push_back(std::move(im));
  }
  for (const auto& h : j.at("homophily"))
    r.homophily.push_back({h.at("k").get<int>(), h.at("per_class").get<std::vector<double>>(),
                           h.at("graph").get<double>()});
  const auto& freq = j.at("label_frequency");
  const auto& info = j.at("information_content");
  for (std::size_t i = 0; i < freq.size(); ++i) {
    LabelDifference ld;
    ld.a = freq[i].at("pair")[0].get<int>();
    ld.b = freq[i].at("pair")[1].get<int>();
    auto ev = freq[i].at("eigenvalue").get<std::vector<double>>();
    auto pr = freq[i].at("probability").get<std::vector<double>>();
    for (std::size_t t = 0; t < ev.size(); ++t) ld.distribution.emplace_back(ev[t], pr[t]);
    ld.information_content = info[i].at("value").get<double>();
    r.label_frequency.push_back(std::move(ld));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bounds.

inline json efficiency_json(const EfficiencyTerms& t) {
  return {{"information_content", num(t.info)}, {"response_efficiency", num(t.mu)},
          {"c", num(t.c)},                      {"efficiency_product", num(t.product)},
          {"support_response_sum", num(t.support_sum)}, {"M", num(t.m)},
          {"degenerate", t.degenerate}};
}

inline EfficiencyTerms efficiency_from_json(const json& j) {
  EfficiencyTerms t;
  t.info = num_from(j.at("information_content"));
  t.mu = num_from(j.at("response_efficiency"));
  t.c = num_from(j.at("c"));
  t.product = num_from(j.at("efficiency_product"));
  t.support_sum = num_from(j.at("support_response_sum"));
  t.m = num_from(j.at("M"));
  t.degenerate = j.at("degenerate").get<bool>();
  return t;
}

inline json bound_json(const BoundReport& r) {
  const auto& t = r.chain;
  json comps = {{"alignment", t.alignment},
                {"psi_norm2_sq", t.psi_norm2_sq},
                {"psi_norm3_cube", t.psi_norm3_cube},
                {"psi_norm4_quad", t.psi_norm4_quad},
                {"saturated_count", t.saturated}};
  json constants = nullptr;
  if (r.constants) {
    const auto& c = *r.constants;
    constants = {{"label_difference", efficiency_json(c.delta)},
                 {"input_difference_clamped", efficiency_json(c.eta_tilde)},
                 {"m_g_joint_support", num(c.m_g_joint)},
                 {"m_g_label_support", num(c.m_g_label)},
                 {"clamped_sum", num(c.psi_sum)},
                 {"clamped_sum_bound", num(c.rhs)}};
  }
  json spatial = nullptr;
  if (r.spatial)
    spatial = {{"value", num(r.spatial->value)},
               {"value_full_denominator", num(r.spatial->value_statement)},
               {"filter_homophily", num(r.spatial->filter_homophily)},
               {"ratio", num(r.spatial->ratio)}};
  return {{"n", r.n},
          {"filter", r.filter},
          {"in_Sg", r.in_Sg},
          {"connected", r.connected},
          {"er", r.er},
          {"er_total", r.er_total},
          {"tight_bound", t.tight},
          {"relaxed_bound", t.relaxed},
          {"spectral_bound", r.spectral_bound ? num(*r.spectral_bound) : json(nullptr)},
          {"spectral_bound_unscaled", r.spectral_bound_unscaled ? num(*r.spectral_bound_unscaled) : json(nullptr)},
          {"spatial_bound", spatial},
          {"components", comps},
          {"spectral_constants", constants},
          {"note", r.note}};
}

inline BoundReport bound_from_json(const json& j) {
  BoundReport r;
  r.n = j.at("n").get<std::size_t>();
  r.filter = j.at("filter").get<std::string>();
  r.in_Sg = j.at("in_Sg").get<bool>();
  r.connected = j.at("connected").get<bool>();
  r.er = j.at("er").get<double>();
  r.er_total = j.at("er_total").get<double>();
  r.chain.tight = j.at("tight_bound").get<double>();
  r.chain.relaxed = j.at("relaxed_bound").get<double>();
  const auto& comps = j.at("components");
  r.chain.alignment = comps.at("alignment").get<double>();
  r.chain.psi_norm2_sq = comps.at("psi_norm2_sq").get<double>();
  r.chain.psi_norm3_cube = comps.at("psi_norm3_cube").get<double>();
  r.chain.psi_norm4_quad = comps.at("psi_norm4_quad").get<double>();
  r.chain.saturated = comps.at("saturated_count").get<std::size_t>();
  if (!j.at("spectral_bound").is_null()) r.spectral_bound = j.at("spectral_bound").get<double>();
  if (!j.at("spectral_bound_unscaled").is_null())
    r.spectral_bound_unscaled = j.at("spectral_bound_unscaled").get<double>();
  if (const auto& s = j.at("spatial_bound"); !s.is_null())
    r.spatial = SpatialBound{num_from(s.at("value")), num_from(s.at("value_full_denominator")),
                             num_from(s.at("filter_homophily")), num_from(s.at("ratio"))};
  if (const auto& c = j.at("spectral_constants"); !c.is_null()) {
    SpectralConstants sc;
    sc.delta = efficiency_from_json(c.at("label_difference"));
    sc.eta_tilde = efficiency_from_json(c.at("input_difference_clamped"));
    sc.m_g_joint = num_from(c.at("m_g_joint_support"));
    sc.m_g_label = num_from(c.at("m_g_label_support"));
    sc.psi_sum = num_from(c.at("clamped_sum"));
    sc.rhs = num_from(c.at("clamped_sum_bound"));
    r.constants = sc;
  }
  r.note = j.at("note").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Analysis report.

struct GraphSummary {
  std::size_t n = 0;
  std::size_t edges = 0;
  std::size_t classes = 0;
  std::size_t components = 0;
  std::vector<std::size_t> class_sizes;
};

inline GraphSummary summarize(const LabeledGraph& g) {
  return {g.n(), g.num_edges(), g.num_classes(), g.num_components(), g.class_sizes()};
}

struct Provenance {
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_sha256;
  std::string preprocessing =
      "edges symmetrized, duplicates collapsed, self-loop forced on every node; no component extraction; "
      "features unnormalized";
};

struct AnalysisReport {
  GraphSummary graph;
  IndicatorReport indicators;
  std::vector<BoundReport> bounds;
  json verdicts = json::array();
  std::vector<std::string> notices;
  Provenance provenance;
};

inline json analysis_json(const AnalysisReport& r) {
  json bounds = json::array();
  for (const auto& b : r.bounds) bounds.push_back(bound_json(b));
  return {{"graph",
           {{"n", r.graph.n},
            {"edges", r.graph.edges},
            {"classes", r.graph.classes},
            {"components", r.graph.components},
            {"connected", r.graph.components == 1},
            {"class_sizes", r.graph.class_sizes}}},
          {"indicators", indicator_json(r.indicators)},
          {"bounds", bounds},
          {"verdicts", r.verdicts},
          {"notices", r.notices},
          {"provenance",
           {{"tool_version", r.provenance.tool_version},
            {"seed", r.provenance.seed},
            {"input_sha256", r.provenance.input_sha256},
            {"preprocessing", r.provenance.preprocessing}}}};
}

inline AnalysisReport analysis_from_json(const json& j) {
  AnalysisReport r;
  const auto& g = j.at("graph");
  r.graph = {g.at("n").get<std::size_t>(), g.at("edges").get<std::size_t>(), g.at("classes").get<std::size_t>(),
             g.at("components").get<std::size_t>(), g.at("class_sizes").get<std::vector<std::size_t>>()};
  r.indicators = indicator_from_json(j.at("indicators"));
  for (const auto& b : j.at("bounds")) r.bounds.push_back(bound_from_json(b));
  r.verdicts = j.at("verdicts");
  r.notices = j.at("notices").get<std::vector<std::string>>();
  const auto& p = j.at("provenance");
  r.provenance.tool_version = p.at("tool_version").get<std::string>();
  r.provenance.seed = p.at("seed").get<std::uint64_t>();
  r.provenance.input_sha256 = p.at("input_sha256").get<std::map<std::string, std::string>>();
  r.provenance.preprocessing = p.at("preprocessing").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Training metrics.

inline json model_config_json(const demuf::ModelConfig& c) {
  return {{"model", demuf::to_string(c.variant)},
          {"filters", c.filters},
          {"depths", c.depths},
          {"hidden", c.hidden},
          {"mlp_layers", c.mlp_layers},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"constraint_weight", c.constraint_weight},
          {"tau_start", c.tau_start},
          {"tau_end", c.tau_end},
          {"masking", c.masking},
          {"seed", c.seed},
          {"split", {c.train_fraction, c.val_fraction, c.test_fraction}}};
}

inline json metrics_json(const demuf::TrainResult& r, const demuf::ModelConfig& c) {
  json hist = json::array();
  for (const auto& m : r.history)
    hist.push_back({{"epoch", m.epoch},
                    {"loss", num(m.loss)},
                    {"constraint", num(m.constraint)},
                    {"tau", m.tau},
                    {"train_acc", m.train_acc},
                    {"val_acc", m.val_acc},
                    {"test_acc", m.test_acc}});
  return {{"config", model_config_json(c)},
          {"history", hist},
          {"best_epoch", r.best_epoch},
          {"best_val_acc", r.best_val_acc},
          {"train_acc", r.train_acc},
          {"test_acc", r.test_acc},
          {"epsilons", r.epsilons},
          {"mask_densities", r.mask_densities},
          {"response_range", {r.min_response, r.max_response}},
          {"tool_version", kToolVersion}};
}

}  // namespace gfa
