#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "invspec/geometry.hpp"

namespace invspec {

/// Potential q on the grid together with its declared normalization bound C0.
/// Loading enforces C0^{-1} <= q <= C0 and a grid Lipschitz seminorm <= C0
/// (nearest-neighbour difference quotients).
struct PotentialField {
  std::vector<double> values;
  double bound = 2.0;  // C0 > 1
};

void validate_potential(const DiscreteManifold& man, const PotentialField& q);

/// Full-grid eigenbasis of -Delta_h + diag(q); the forward oracle.
/// Columns are scaled so that sum phi^2 h^n = 1 and ordered by ascending
/// eigenvalue with a deterministic in-cluster convention.
struct ForwardSolution {
  int dim = 0;
  int resolution = 0;
  std::vector<double> eigenvalues;
  Eigen::MatrixXd modes;  // point_count x J
  double ortho_residual = 0.0;

  int mode_count() const { return int(eigenvalues.size()); }
};

ForwardSolution solve_forward(const DiscreteManifold& man, const PotentialField& q, int J);

// |sum_x (|D+ phi_j|^2 + q phi_j^2) h^n - lambda_j| with forward differences,
// the discrete min-max identity; zero up to eigensolver tolerance.
double rayleigh_residual(const DiscreteManifold& man, const PotentialField& q,
                         const ForwardSolution& fs, int j);

// max_{j,k} |sum phi_j phi_k h^n - delta_jk|
double orthonormality_residual(const DiscreteManifold& man, const ForwardSolution& fs);

// Test hook for the basis ambiguity inside eigenvalue clusters: replaces the
// eigenvectors of each degenerate cluster by a random orthogonal mix.
void apply_cluster_rotations(ForwardSolution& fs, std::uint64_t seed,
                             double tie_tol = 1e-8);

/// Index set of the data window U (grid indices, ascending).
struct Subdomain {
  std::vector<int> indices;
  std::vector<int> local;  // grid index -> position in `indices`, -1 outside

  int size() const { return int(indices.size()); }
  bool contains(int grid_index) const { return local[grid_index] >= 0; }
};

Subdomain make_ball_window(const DiscreteManifold& man, int center, double radius);

/// Eigenvalues and eigenfunction restrictions on U, plus tangential gradients
/// (centered differences). `delta` > 0 marks a perturbed data set.
struct SpectralData {
  int J = 0;
  std::vector<double> eigenvalues;
  std::shared_ptr<const Subdomain> window;
  Eigen::MatrixXd values;                  // |U| x J
  std::vector<Eigen::MatrixXd> gradients;  // per axis, |U| x J
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string noise_model;  // empty for exact data
  double ortho_residual = 0.0;

  double value_at(int local_index, int j) const { return values(local_index, j); }
};

SpectralData restrict_to_window(const DiscreteManifold& man, const ForwardSolution& fs,
                                std::shared_ptr<const Subdomain> window);

/// delta-perturbation: lambda_j^a = lambda_j + eta_j with |eta_j| < delta and
/// phi_j^a = phi_j + delta * psi_j with psi_j a seeded smooth field of
/// C^{0,1} norm < 1, applied for all j <= 1/delta. delta = 0 returns the
/// input unchanged, bit for bit.
SpectralData perturb(const DiscreteManifold& man, const SpectralData& data, double delta,
                     std::uint64_t seed);

// Certified lower bound for phi_1 on U: min over the window of phi_1^a minus
// delta. Throws when the result is not positive.
double estimate_c1(const SpectralData& data);

}  // namespace invspec
