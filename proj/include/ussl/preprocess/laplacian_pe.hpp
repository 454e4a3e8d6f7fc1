#pragma once

#include "ussl/preprocess/adjacency.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace ussl {

struct LaplacianPE {
  MatD vectors;                     // num_nodes x pe_dim, unit columns
  std::vector<double> eigenvalues;  // ascending, trivial kernel skipped
};

struct PeOptions {
  NodeId dense_limit = 3000;  // larger graphs use Lanczos on the sparse operator
  int max_krylov = 1200;
  double residual_tol = 1e-7;
};

/// Flip the column so its largest-magnitude entry is positive; near-ties go to the lowest index.
inline void fix_eigenvector_sign(Eigen::Ref<Eigen::VectorXd> v) {
  if (v.size() == 0) return;
  const double peak = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= peak * (1.0 - 1e-9)) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

namespace pe_detail {

// Orthonormal basis of the kernel of L = I - Â: one D~^{1/2} indicator per component.
inline MatD kernel_basis(const GraphDataset& g, const NormalizedAdjacency& adj, int& components) {
  auto comp = connected_components(g.num_nodes, g.edges, &components);
  MatD basis = MatD::Zero(g.num_nodes, components);
  for (NodeId v = 0; v < g.num_nodes; ++v) basis(v, comp[v]) = std::sqrt(adj.degrees[v]);
  for (int c = 0; c < components; ++c) basis.col(c).normalize();
  return basis;
}

inline LaplacianPE dense_pe(const GraphDataset& g, const NormalizedAdjacency& adj, int pe_dim, int components) {
  const NodeId n = g.num_nodes;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd(adj.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success)
    throw NumericalError("graph '" + g.graph_id + "': Laplacian eigensolver did not converge");
  LaplacianPE out;
  out.vectors.resize(n, pe_dim);
  for (int j = 0; j < pe_dim; ++j) {
    out.eigenvalues.push_back(solver.eigenvalues()[components + j]);
    out.vectors.col(j) = solver.eigenvectors().col(components + j);
  }
  return out;
}

// Lanczos with full reorthogonalization against the Krylov basis and the known kernel.
inline LaplacianPE lanczos_pe(const GraphDataset& g, const NormalizedAdjacency& adj, int pe_dim,
                              const MatD& kernel, const PeOptions& opt) {
  const NodeId n = g.num_nodes;
  const int limit = static_cast<int>(std::min<long>(opt.max_krylov, n - kernel.cols()));
  auto apply_lap = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - adj.matrix * x; };
  auto deflate = [&](Eigen::VectorXd& x) {
    for (Eigen::Index c = 0; c < kernel.cols(); ++c) x -= kernel.col(c).dot(x) * kernel.col(c);
  };

  std::mt19937_64 rng(derive_seed(0x1a91ace, g.graph_id));
  std::normal_distribution<double> normal;
  Eigen::VectorXd q(n);
  for (NodeId i = 0; i < n; ++i) q[i] = normal(rng);
  deflate(q);
  q.normalize();

  int steps = std::min(limit, std::max(8 * pe_dim, 120));
  Eigen::MatrixXd basis(n, limit);
  std::vector<double> alpha, beta;
  int built = 0;
  while (true) {
    for (; built < steps; ++built) {
      basis.col(built) = q;
      Eigen::VectorXd w = apply_lap(q);
      alpha.push_back(q.dot(w));
      for (int pass = 0; pass < 2; ++pass) {
        deflate(w);
        w -= basis.leftCols(built + 1) * (basis.leftCols(built + 1).transpose() * w);
      }
      const double b = w.norm();
      if (b < 1e-12) {
        // invariant subspace reached; restart with a fresh orthogonal direction
        Eigen::VectorXd r(n);
        for (NodeId i = 0; i < n; ++i) r[i] = normal(rng);
        deflate(r);
        r -= basis.leftCols(built + 1) * (basis.leftCols(built + 1).transpose() * r);
        beta.push_back(0.0);
        q = r.normalized();
      } else {
        beta.push_back(b);
        q = w / b;
      }
    }
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(built, built);
    for (int i = 0; i < built; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < built) tri(i, i + 1) = tri(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(tri);
    bool converged = small.info() == Eigen::Success && built >= pe_dim;
    LaplacianPE out;
    out.vectors.resize(n, pe_dim);
    for (int j = 0; converged && j < pe_dim; ++j) {
      Eigen::VectorXd v = basis.leftCols(built) * small.eigenvectors().col(j);
      v.normalize();
      const double lambda = small.eigenvalues()[j];
      if ((apply_lap(v) - lambda * v).norm() > opt.residual_tol) converged = false;
      out.eigenvalues.push_back(lambda);
      out.vectors.col(j) = v;
    }
    if (converged) return out;
    if (steps >= limit)
      throw NumericalError("graph '" + g.graph_id + "': Laplacian eigensolver did not converge after " +
                           std::to_string(built) + " Lanczos steps");
    steps = std::min(limit, steps * 2);
  }
}

}  // namespace pe_detail

/// Eigenvectors of L = I - Â for the `pe_dim` smallest eigenvalues above the kernel
/// (one zero eigenvalue per connected component is skipped).
inline LaplacianPE laplacian_pe(const GraphDataset& g, const NormalizedAdjacency& adj, int pe_dim,
                                const PeOptions& opt = {}) {
  if (pe_dim < 0) throw ValidationError("pe_dim must be non-negative");
  if (pe_dim >= g.num_nodes)
    throw ValidationError("graph '" + g.graph_id + "': pe_dim " + std::to_string(pe_dim) +
                          " must be smaller than num_nodes " + std::to_string(g.num_nodes));
  LaplacianPE out;
  if (pe_dim == 0) {
    out.vectors.resize(g.num_nodes, 0);
    return out;
  }
  int components = 0;
  MatD kernel = pe_detail::kernel_basis(g, adj, components);
  if (pe_dim > g.num_nodes - components)
    throw ValidationError("graph '" + g.graph_id + "': only " + std::to_string(g.num_nodes - components) +
                          " non-trivial eigenvectors available for pe_dim " + std::to_string(pe_dim));
  out = g.num_nodes <= opt.dense_limit ? pe_detail::dense_pe(g, adj, pe_dim, components)
                                       : pe_detail::lanczos_pe(g, adj, pe_dim, kernel, opt);
  for (int j = 0; j < pe_dim; ++j) {
    Eigen::VectorXd col = out.vectors.col(j);
    col.normalize();
    fix_eigenvector_sign(col);
    out.vectors.col(j) = col;
  }
  return out;
}

inline LaplacianPE laplacian_pe(const GraphDataset& g, int pe_dim, const PeOptions& opt = {}) {
  return laplacian_pe(g, normalize_adjacency(g), pe_dim, opt);
}

}  // namespace ussl
