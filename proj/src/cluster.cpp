#include "fhsc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fhsc/error.hpp"

namespace fhsc {

void ExternalCovariates::validate(int m) const {
  if (x_star.rows() != m) throw_validation("covariate rows do not match area count");
  if (alpha.size() != x_star.cols()) throw_validation("alpha length must match covariate count");
  if ((alpha.array() < 0.0).any()) throw_validation("alpha weights must be nonnegative");
  if (std::abs(alpha.sum() - 1.0) > 1e-8) throw_validation("alpha weights must sum to 1");
  if (!(sigma2_s > 0.0)) throw_validation("kernel bandwidth sigma2_s must be positive");
  if (!x_star.allFinite()) throw_validation("covariates contain non-finite values");
}

void Clustering::validate() const {
  const int m = num_areas();
  const int c = num_clusters();
  if (c == 0 || m == 0) throw_validation("empty clustering");
  int total = 0;
  for (int nc : sizes) {
    if (nc <= 0) throw_validation("clustering contains an empty cluster");
    total += nc;
  }
  if (total != m) throw_validation("cluster sizes do not sum to the number of areas");
  for (int a : assignment)
    if (a < 1 || a > c) throw_validation("cluster id out of range");
}

Clustering Clustering::from_assignment(const std::vector<int>& labels) {
  Clustering out;
  const int m = static_cast<int>(labels.size());
  out.assignment.resize(m);
  std::vector<int> relabel;  // raw label -> 1..C by first occurrence
  std::vector<int> seen;
  for (int i = 0; i < m; ++i) {
    const int raw = labels[i];
    auto it = std::find(seen.begin(), seen.end(), raw);
    int id;
    if (it == seen.end()) {
      seen.push_back(raw);
      id = static_cast<int>(seen.size());
      out.sizes.push_back(0);
      out.members.emplace_back();
    } else {
      id = static_cast<int>(it - seen.begin()) + 1;
    }
    out.assignment[i] = id;
    out.sizes[id - 1] += 1;
    out.members[id - 1].push_back(i);
  }
  return out;
}

std::vector<Matrix> similarity_matrices(const Vector& y, const ExternalCovariates& cov) {
  const int m = static_cast<int>(y.size());
  cov.validate(m);
  if (!y.allFinite()) throw_validation("direct estimates contain non-finite values");
  std::vector<Matrix> sims;
  sims.reserve(cov.x_star.cols());
  for (int k = 0; k < cov.x_star.cols(); ++k) {
    Matrix s(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double d = y[j] - cov.x_star(i, k);
        s(i, j) = std::exp(-d * d / (2.0 * cov.sigma2_s));
      }
    sims.push_back(std::move(s));
  }
  return sims;
}

SimilarityGraph knn_graph(const std::vector<Matrix>& sims, const ExternalCovariates& cov,
                          int k_neighbors) {
  if (sims.empty()) throw_validation("knn_graph: no similarity matrices");
  const int m = static_cast<int>(sims[0].rows());
  if (k_neighbors < 1 || k_neighbors >= m)
    throw_validation("k_neighbors must be in [1, m-1]");

  // Combined similarity, symmetrized; the kernel itself is asymmetric in (i,j).
  Matrix eta = Matrix::Zero(m, m);
  for (size_t k = 0; k < sims.size(); ++k) eta += cov.alpha[static_cast<int>(k)] * sims[k];
  Matrix sym = 0.5 * (eta + eta.transpose());
  sym.diagonal().setZero();

  // Nearest neighbours by combined similarity, index as tiebreak.
  std::vector<std::vector<int>> nbrs(m);
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) {
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (sym(i, a) != sym(i, b)) return sym(i, a) > sym(i, b);
      return a < b;
    });
    nbrs[i].assign(order.begin(), order.begin() + k_neighbors);
    order.insert(order.begin() + i, i);
  }

  SimilarityGraph g;
  g.adjacency = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j : nbrs[i]) {
      g.adjacency(i, j) = sym(i, j);
      g.adjacency(j, i) = sym(i, j);
    }
  g.degrees = g.adjacency.rowwise().sum();
  for (int i = 0; i < m; ++i)
    if (g.degrees[i] <= 0.0)
      log_warning("knn_graph: vertex " + std::to_string(i) + " has zero degree");
  g.laplacian = Matrix(g.degrees.asDiagonal()) - g.adjacency;
  return g;
}

namespace {

// Eigenvectors of the C smallest eigenvalues, sign-fixed (first nonzero
// component positive) and, within numerically equal eigenvalues, ordered by a
// lexicographic key so the embedding is deterministic.
Matrix spectral_embedding(const Matrix& laplacian, int c) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian);
  if (es.info() != Eigen::Success) throw_numeric("eigendecomposition of the Laplacian failed");
  const int m = static_cast<int>(laplacian.rows());
  Matrix vecs = es.eigenvectors();
  Vector vals = es.eigenvalues();

  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      if (std::abs(vecs(i, j)) > 1e-12) {
        if (vecs(i, j) < 0.0) vecs.col(j) = -vecs.col(j);
        break;
      }
    }
  }

  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  const double tol = 1e-9 * (1.0 + vals.cwiseAbs().maxCoeff());
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (std::abs(vals[a] - vals[b]) > tol) return vals[a] < vals[b];
    for (int i = 0; i < m; ++i) {
      if (std::abs(vecs(i, a) - vecs(i, b)) > 1e-12) return vecs(i, a) < vecs(i, b);
    }
    return a < b;
  });

  Matrix emb(m, c);
  for (int j = 0; j < c; ++j) emb.col(j) = vecs.col(idx[j]);
  return emb;
}

struct KmeansResult {
  std::vector<int> labels;
  double wss = 0.0;
  bool valid = false;
};

KmeansResult lloyd_once(const Matrix& points, int k, Rng& rng, int max_iters) {
  const int n = static_cast<int>(points.rows());
  KmeansResult res;
  res.labels.assign(n, 0);

  // k-means++ seeding
  Matrix centers(k, points.cols());
  std::vector<double> dist2(n, 0.0);
  const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  centers.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = (points.row(i) - centers.row(0)).squaredNorm();
      for (int cc = 1; cc < c; ++cc)
        best = std::min(best, (points.row(i) - centers.row(cc)).squaredNorm());
      dist2[i] = best;
      total += best;
    }
    int pick = n - 1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dist2[i];
        if (u <= acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = points.row(pick);
  }

  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bestd = (points.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < bestd) {
          bestd = d;
          best = c;
        }
      }
      if (res.labels[i] != best) {
        res.labels[i] = best;
        changed = true;
      }
    }
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) counts[res.labels[i]]++;
    if (std::find(counts.begin(), counts.end(), 0) != counts.end()) return res;  // invalid
    centers.setZero();
    for (int i = 0; i < n; ++i) centers.row(res.labels[i]) += points.row(i);
    for (int c = 0; c < k; ++c) centers.row(c) /= counts[c];
    if (!changed && iter > 0) break;
  }

  res.wss = 0.0;
  for (int i = 0; i < n; ++i) res.wss += (points.row(i) - centers.row(res.labels[i])).squaredNorm();
  res.valid = true;
  return res;
}

std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed) {
  constexpr int kRestarts = 10;
  constexpr int kRetryCap = 20;
  constexpr int kMaxIters = 300;
  KmeansResult best;
  int valid_runs = 0;
  for (int r = 0; r < kRestarts + kRetryCap && valid_runs < kRestarts; ++r) {
    Rng rng(seed, stream_id(0x6B6D65616E73ULL, static_cast<std::uint64_t>(r)));
    KmeansResult res = lloyd_once(points, k, rng, kMaxIters);
    if (!res.valid) continue;  // empty cluster: retry with a fresh initialization
    ++valid_runs;
    if (!best.valid || res.wss < best.wss) best = std::move(res);
  }
  if (!best.valid) throw_numeric("k-means produced an empty cluster in every restart");
  return best.labels;
}

}  // namespace

Clustering spectral_assign(const SimilarityGraph& graph, int clusters, std::uint64_t seed) {
  const int m = static_cast<int>(graph.laplacian.rows());
  if (clusters < 1 || clusters > m) throw_validation("cluster count must be in [1, m]");
  std::vector<int> labels(m);
  if (clusters == 1) {
    std::fill(labels.begin(), labels.end(), 0);
  } else if (clusters == m) {
    std::iota(labels.begin(), labels.end(), 0);
  } else {
    const Matrix emb = spectral_embedding(graph.laplacian, clusters);
    labels = kmeans(emb, clusters, seed);
  }
  return Clustering::from_assignment(labels);
}

Matrix block_laplacian(const Clustering& clustering) {
  clustering.validate();
  const int m = clustering.num_areas();
  Matrix l = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int c = clustering.assignment[i] - 1;
    const int nc = clustering.sizes[c];
    l(i, i) = nc - 1.0;
    for (int j : clustering.members[c])
      if (j != i) l(i, j) = -1.0;
  }
  return l;
}

double total_wss(const Vector& y, const Clustering& clustering) {
  clustering.validate();
  if (y.size() != clustering.num_areas()) throw_validation("total_wss: length mismatch");
  double wss = 0.0;
  for (const auto& members : clustering.members) {
    double mean = 0.0;
    for (int j : members) mean += y[j];
    mean /= members.size();
    for (int j : members) wss += (y[j] - mean) * (y[j] - mean);
  }
  return wss;
}

Clustering spectral_cluster(const Vector& y, const ExternalCovariates& cov, int clusters,
                            int k_neighbors, std::uint64_t seed) {
  const auto sims = similarity_matrices(y, cov);
  const auto graph = knn_graph(sims, cov, k_neighbors);
  Clustering out = spectral_assign(graph, clusters, seed);
  out.total_wss = total_wss(y, out);
  return out;
}

std::vector<SweepRow> sweep_clusters(const Vector& y, const ExternalCovariates& cov,
                                     const std::vector<int>& c_grid,
                                     const std::vector<std::vector<int>>& subsets,
                                     int k_neighbors, std::uint64_t seed) {
  if (c_grid.empty() || subsets.empty()) throw_validation("sweep_clusters: empty grid");
  std::vector<SweepRow> rows;
  for (const auto& subset : subsets) {
    if (subset.empty()) throw_validation("sweep_clusters: empty covariate subset");
    ExternalCovariates sub;
    sub.sigma2_s = cov.sigma2_s;
    sub.x_star.resize(cov.x_star.rows(), static_cast<int>(subset.size()));
    for (size_t k = 0; k < subset.size(); ++k) {
      if (subset[k] < 0 || subset[k] >= cov.x_star.cols())
        throw_validation("sweep_clusters: covariate index out of range");
      sub.x_star.col(static_cast<int>(k)) = cov.x_star.col(subset[k]);
    }
    sub.alpha = Vector::Constant(static_cast<int>(subset.size()), 1.0 / subset.size());
    for (int c : c_grid) {
      const int k_n = k_neighbors > 0 ? k_neighbors : c;
      Clustering cl = spectral_cluster(y, sub, c, k_n, seed);
      rows.push_back({subset, c, cl.total_wss});
    }
  }
  return rows;
}

}  // namespace fhsc
