#pragma once

#include <cstdint>
#include <vector>

#include "fhsc/linalg.hpp"

namespace fhsc {

// Covariates driving the spectral clustering: one column per external
// covariate, mixing weights alpha (nonnegative, summing to 1), kernel
// bandwidth sigma2_s.
struct ExternalCovariates {
  Matrix x_star;
  Vector alpha;
  double sigma2_s = 1.0;

  void validate(int m) const;
};

struct SimilarityGraph {
  Matrix adjacency;  // symmetric, zero diagonal
  Vector degrees;
  Matrix laplacian;  // D_u - W_A
};

struct Clustering {
  std::vector<int> assignment;           // 1..C per area, original area order
  std::vector<int> sizes;                // n_c per cluster
  std::vector<std::vector<int>> members; // 0-based area indices per cluster
  double total_wss = 0.0;

  int num_clusters() const { return static_cast<int>(sizes.size()); }
  int num_areas() const { return static_cast<int>(assignment.size()); }
  void validate() const;
  // Rebuilds sizes/members from assignment (ids relabelled 1..C by first occurrence).
  static Clustering from_assignment(const std::vector<int>& labels);
};

// Radial-kernel similarity per covariate: s^k(i,j) = exp(-(y_j - x*_{i,k})^2 / (2 sigma2_s)).
std::vector<Matrix> similarity_matrices(const Vector& y, const ExternalCovariates& cov);

// Symmetric k-nearest graph on the combined similarity eta_ij = sum_k alpha_k s^k_ij,
// symmetrized as (eta_ij + eta_ji)/2; edge kept when i is among j's k nearest or
// vice versa. Zero-degree vertices trigger a warning only.
SimilarityGraph knn_graph(const std::vector<Matrix>& sims, const ExternalCovariates& cov,
                          int k_neighbors);

// Rows of the eigenvector matrix for the C smallest eigenvalues of L_u,
// clustered with seeded k-means (k-means++ init, 10 restarts). Deterministic
// for a fixed seed. total_wss is left at 0 (it depends on y).
Clustering spectral_assign(const SimilarityGraph& graph, int clusters, std::uint64_t seed);

// Block Laplacian in original area order: n_c - 1 on the diagonal, -1 within a
// cluster, 0 across clusters.
Matrix block_laplacian(const Clustering& clustering);

double total_wss(const Vector& y, const Clustering& clustering);

// Full pipeline: similarity -> graph -> assignment, with total_wss filled in.
Clustering spectral_cluster(const Vector& y, const ExternalCovariates& cov, int clusters,
                            int k_neighbors, std::uint64_t seed);

struct SweepRow {
  std::vector<int> subset;  // covariate column indices
  int clusters = 0;
  double wss = 0.0;
};

// One row per (covariate subset, cluster count) combination; k_neighbors <= 0
// means "use the cluster count", matching the single-parameter reading.
std::vector<SweepRow> sweep_clusters(const Vector& y, const ExternalCovariates& cov,
                                     const std::vector<int>& c_grid,
                                     const std::vector<std::vector<int>>& subsets,
                                     int k_neighbors, std::uint64_t seed);

}  // namespace fhsc
