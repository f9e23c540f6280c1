#pragma once

// Labeled undirected graphs, their normalized operators and the dense
// eigendecomposition of the symmetric normalized Laplacian.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <sstream>
#include <utility>
#include <vector>

#include "gfa/errors.hpp"

namespace gfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Edge = std::pair<std::int64_t, std::int64_t>;

/// Undirected, unweighted graph with a self-loop on every node and one class
/// label per node. Classes are 0..K-1 and every class is non-empty.
class LabeledGraph {
 public:
  std::size_t n() const { return labels_.size(); }
  std::size_t num_classes() const { return class_sizes_.size(); }
  const Matrix& adjacency() const { return adjacency_; }
  const std::vector<int>& labels() const { return labels_; }
  /// R_k = |C_k|.
  const std::vector<std::size_t>& class_sizes() const { return class_sizes_; }

  /// Undirected edges u < v, excluding the forced self-loops.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Eigen::Index i = 0; i < adjacency_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < adjacency_.cols(); ++j)
        if (adjacency_(i, j) != 0.0) out.emplace_back(i, j);
    return out;
  }

  std::size_t num_edges() const { return edges().size(); }

  std::size_t num_components() const {
    const auto size = static_cast<Eigen::Index>(n());
    std::vector<int> seen(n(), 0);
    std::size_t count = 0;
    for (Eigen::Index s = 0; s < size; ++s) {
      if (seen[s]) continue;
      ++count;
      std::queue<Eigen::Index> q;
      q.push(s);
      seen[s] = 1;
      while (!q.empty()) {
        auto u = q.front();
        q.pop();
        for (Eigen::Index v = 0; v < size; ++v)
          if (adjacency_(u, v) != 0.0 && !seen[v]) {
            seen[v] = 1;
            q.push(v);
          }
      }
    }
    return count;
  }

  bool connected() const { return num_components() == 1; }

  friend LabeledGraph build_graph(const std::vector<Edge>&, const std::vector<int>&);
  friend LabeledGraph graph_from_adjacency(const Matrix&, const std::vector<int>&);

 private:
  LabeledGraph(Matrix adjacency, std::vector<int> labels)
      : adjacency_(std::move(adjacency)), labels_(std::move(labels)) {
    int k = *std::max_element(labels_.begin(), labels_.end()) + 1;
    class_sizes_.assign(static_cast<std::size_t>(k), 0);
    for (int l : labels_) ++class_sizes_[static_cast<std::size_t>(l)];
  }

  Matrix adjacency_;
  std::vector<int> labels_;
  std::vector<std::size_t> class_sizes_;
};

namespace detail {

inline void check_labels(const std::vector<int>& labels) {
  if (labels.empty()) throw InvalidInput("empty graph: no labels given");
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw InvalidInput("negative class id " + std::to_string(l));
    max_label = std::max(max_label, l);
  }
  std::vector<int> present(static_cast<std::size_t>(max_label) + 1, 0);
  for (int l : labels) present[static_cast<std::size_t>(l)] = 1;
  for (std::size_t k = 0; k < present.size(); ++k)
    if (!present[k])
      throw InvalidInput("class id gap: class " + std::to_string(k) + " has no members");
}

}  // namespace detail

/// Builds a labeled graph on labels.size() nodes. Edges are symmetrized,
/// duplicates collapse, and the diagonal is forced to 1.
inline LabeledGraph build_graph(const std::vector<Edge>& edges, const std::vector<int>& labels) {
  detail::check_labels(labels);
  const auto n = static_cast<std::int64_t>(labels.size());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) {
      std::ostringstream os;
      os << "edge (" << u << "," << v << ") has a node id outside [0," << n << ")";
      throw InvalidInput(os.str());
    }
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  a.diagonal().setOnes();
  return LabeledGraph(std::move(a), labels);
}

/// Same as build_graph but from a dense 0/1 adjacency matrix. Weighted or
/// asymmetric input is rejected.
inline LabeledGraph graph_from_adjacency(const Matrix& adjacency, const std::vector<int>& labels) {
  detail::check_labels(labels);
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (adjacency.rows() != n || adjacency.cols() != n)
    throw InvalidInput("adjacency shape does not match label count");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double w = adjacency(i, j);
      if (w != 0.0 && w != 1.0) throw InvalidInput("weighted entries are not supported");
      if (w != adjacency(j, i)) throw InvalidInput("adjacency is not symmetric");
    }
  Matrix a = adjacency;
  a.diagonal().setOnes();
  return LabeledGraph(std::move(a), labels);
}

/// One-vs-rest relabeling: class `cls` becomes 0, every other class 1.
inline LabeledGraph reduce_to_binary(const LabeledGraph& g, int cls) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= g.num_classes())
    throw InvalidInput("reduction class " + std::to_string(cls) + " out of range");
  if (g.num_classes() < 2) throw Unsupported("binary reduction needs at least two classes");
  std::vector<int> labels(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) labels[i] = g.labels()[i] == cls ? 0 : 1;
  return graph_from_adjacency(g.adjacency(), labels);
}

/// Y (n x K class indicators) and R (class sizes).
struct LabelMatrix {
  Matrix Y;
  Vector R;

  Vector column(int k) const { return Y.col(k); }
};

inline LabelMatrix label_matrix(const LabeledGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.n());
  const auto k = static_cast<Eigen::Index>(g.num_classes());
  LabelMatrix lm{Matrix::Zero(n, k), Vector::Zero(k)};
  for (Eigen::Index i = 0; i < n; ++i) lm.Y(i, g.labels()[static_cast<std::size_t>(i)]) = 1.0;
  for (Eigen::Index c = 0; c < k; ++c) lm.R(c) = static_cast<double>(g.class_sizes()[c]);
  return lm;
}

struct NormalizedOperators {
  Vector degree;       // D, row sums of A
  Matrix adjacency;    // A~ = D^-1/2 A D^-1/2
  Matrix laplacian;    // L~ = I - A~
  Matrix random_walk;  // P = D^-1 A
};

inline NormalizedOperators normalize(const LabeledGraph& g) {
  const Matrix& a = g.adjacency();
  NormalizedOperators ops;
  ops.degree = a.rowwise().sum();
  Vector inv_sqrt = ops.degree.array().rsqrt();
  ops.adjacency = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  // Exact symmetry regardless of rounding order.
  ops.adjacency = 0.5 * (ops.adjacency + ops.adjacency.transpose()).eval();
  ops.laplacian = Matrix::Identity(a.rows(), a.cols()) - ops.adjacency;
  ops.random_walk = ops.degree.cwiseInverse().asDiagonal() * a;
  return ops;
}

/// Eigenpairs of L~, eigenvalues ascending and clamped to [0, 2].
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;  // columns u_i
  std::size_t clamp_violations = 0;  // pre-clamp excursions beyond 1e-6

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }

  /// Number of eigenvalues within `tol` of zero (connected components).
  std::size_t zero_multiplicity(double tol = 1e-8) const {
    return static_cast<std::size_t>((eigenvalues.array().abs() <= tol).count());
  }
};

/// Full dense symmetric eigendecomposition (Householder tridiagonalization
/// followed by implicit QR). The first component of each eigenvector whose
/// magnitude exceeds 1e-10 is made positive.
inline SpectralDecomposition eigendecompose(const NormalizedOperators& ops) {
  const Matrix& l = ops.laplacian;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(l);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "symmetric eigensolver did not converge (n=" << l.rows()
       << ", |L|_F=" << l.norm() << ", asymmetry=" << (l - l.transpose()).norm()
       << ", finite=" << l.allFinite() << ")";
    throw ConvergenceError(os.str());
  }
  SpectralDecomposition sd;
  sd.eigenvalues = solver.eigenvalues();
  sd.eigenvectors = solver.eigenvectors();
  for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i) {
    double& lam = sd.eigenvalues(i);
    if (lam < -1e-6 || lam > 2.0 + 1e-6) ++sd.clamp_violations;
    lam = std::clamp(lam, 0.0, 2.0);
    auto col = sd.eigenvectors.col(i);
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (std::abs(col(r)) > 1e-10) {
        if (col(r) < 0) col *= -1.0;
        break;
      }
    }
  }
  return sd;
}

/// A graph together with its operators and spectrum, computed once.
struct SpectralGraph {
  LabeledGraph graph;
  NormalizedOperators ops;
  SpectralDecomposition spectrum;

  static SpectralGraph analyze(LabeledGraph g) {
    auto ops = normalize(g);
    auto sd = eigendecompose(ops);
    return SpectralGraph{std::move(g), std::move(ops), std::move(sd)};
  }

  std::size_t n() const { return graph.n(); }
};

}  // namespace gfa
