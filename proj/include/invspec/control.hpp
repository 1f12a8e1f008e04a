#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "invspec/spectra.hpp"

namespace invspec {

/// Sparse multi-radius: (cell id, radius) pairs with radius > 0, ascending
/// cell order. Canonical key for memoized domain-mass values.
struct SparseAlpha {
  std::vector<std::pair<int, double>> entries;

  bool operator==(const SparseAlpha& o) const { return entries == o.entries; }
  bool empty() const { return entries.empty(); }
  static SparseAlpha from_dense(std::span<const double> alpha);
};

struct SparseAlphaHash {
  std::size_t operator()(const SparseAlpha& a) const;
};

/// Constraint data for the admissible set: centered ellipsoid caps
/// v'v <= l2_cap, sum lambda_j^a v_j^2 <= energy_cap, v'A_k v <= wave_cap_k.
struct AdmissibleSetSpec {
  int J = 0;
  double energy_bound = 0.0;  // E
  double slack = 0.0;         // eps1
  std::vector<double> alpha;  // dense, one entry per cell (0 = inactive)

  double l2_cap = 1.0;
  double energy_cap = 0.0;                 // E^2 + delta
  std::vector<double> energy_weights;      // lambda_j^a clamped at 0
  std::vector<double> wave_cap;            // (eps1 + J lambda_J^{1/2} delta)^2
  std::vector<std::shared_ptr<const Eigen::MatrixXd>> gram;  // null when inactive

  int clamped_modes = 0;  // eigenvalues clamped to 0 during assembly
};

// min eigenvalue over all active Gram blocks (PSD check; test helper)
double min_gram_eigenvalue(const AdmissibleSetSpec& spec);

/// W(v)(x,t) = sum_j v_j cos(sqrt(lambda_j^a) t) phi_j^a(x); negative
/// perturbed eigenvalues are clamped to zero.
double wave_eval(const SpectralData& data, const Eigen::VectorXd& v, int local_index,
                 double t);

/// H^1(U_k x [-alpha,alpha]) Gram matrix of the truncated wave solutions:
/// (A_k)_{jl} = sum_{x in cell} h^n [ (phi_j phi_l + grad phi_j . grad phi_l) Icc_{jl}
///                                    + w_j w_l phi_j phi_l Iss_{jl} ],
/// time integrals Icc, Iss in closed form.
Eigen::MatrixXd assemble_gram(const DiscreteManifold& man, const SpectralData& data,
                              std::span<const int> cell, double alpha_k);

AdmissibleSetSpec make_admissible_spec(const DiscreteManifold& man, const SpectralData& data,
                                       const std::vector<std::vector<int>>& cells,
                                       std::span<const double> alpha, double energy_bound,
                                       double slack);

struct MinimizeOptions {
  enum class Method { DualNewton, Dykstra };
  Method method = Method::DualNewton;
  double kkt_tol = 1e-8;
  int max_iterations = 50000;
};

struct MinimizeResult {
  Eigen::VectorXd w;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

class MinimizeError : public std::runtime_error {
 public:
  MinimizeError(std::string what, MinimizeResult best)
      : std::runtime_error(std::move(what)), best_iterate(std::move(best)) {}
  MinimizeResult best_iterate;
};

/// argmin ||v - u||^2 over the admissible set. Deterministic; throws
/// MinimizeError with the best iterate when the iteration cap is hit.
MinimizeResult minimize_over_admissible(const AdmissibleSetSpec& spec,
                                        const Eigen::VectorXd& u,
                                        const MinimizeOptions& opt = {});

// Projection of u onto a single centered ellipsoid { v : v'Qv <= cap } by
// safeguarded Newton on the Lagrange multiplier (also used by Dykstra).
Eigen::VectorXd project_ellipsoid(const Eigen::MatrixXd& q, double cap,
                                  const Eigen::VectorXd& u, double tol = 1e-12,
                                  int max_iter = 200);

struct CutoffCoefficients {
  Eigen::VectorXd b;
  std::vector<double> alpha;
  double sigma_target = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// b = u - w*; realizes the cutoff-coefficient recovery. The contract that
/// sum b_j phi_j approximates the masked target is verified against the
/// oracle in tests, never assumed.
CutoffCoefficients recover_cutoff(const AdmissibleSetSpec& spec, const Eigen::VectorXd& u,
                                  const MinimizeOptions& opt = {});

/// Provider of the domain-mass values L^a(M_alpha).
class MassFunctional {
 public:
  virtual ~MassFunctional() = default;
  virtual double domain_mass(const SparseAlpha& alpha) = 0;
  virtual std::string mode() const = 0;
};

/// Exact route: sum of phi_1^2 h^n over the grid points of M_alpha, bypassing
/// the minimization. Works from precomputed distance-to-cell fields.
class OracleMass : public MassFunctional {
 public:
  OracleMass(std::vector<std::vector<double>> cell_distance, std::vector<double> mass_weight);
  double domain_mass(const SparseAlpha& alpha) override;
  std::string mode() const override { return "oracle"; }

 private:
  std::vector<std::vector<double>> cell_distance_;  // per cell, per grid point
  std::vector<double> weight_;                      // phi_1(x)^2 h^n
};

/// Minimization route: L^a(M_alpha) = sum b_j^2 with b from recover_cutoff.
/// Gram matrices are cached per (cell, radius).
class CutoffMass : public MassFunctional {
 public:
  CutoffMass(const DiscreteManifold& man, SpectralData data,
             std::vector<std::vector<int>> cells, Eigen::VectorXd u_coeffs,
             double energy_bound, double slack, MinimizeOptions opt = {});
  double domain_mass(const SparseAlpha& alpha) override;
  std::string mode() const override { return "blind"; }

  AdmissibleSetSpec build_spec(const SparseAlpha& alpha);
  const SpectralData& data() const { return data_; }

 private:
  std::shared_ptr<const Eigen::MatrixXd> gram_for(int cell, double radius);

  const DiscreteManifold& man_;
  SpectralData data_;
  std::vector<std::vector<int>> cells_;
  Eigen::VectorXd u_;
  double energy_bound_;
  double slack_;
  MinimizeOptions opt_;
  std::mutex mutex_;
  std::map<std::pair<int, std::uint64_t>, std::shared_ptr<const Eigen::MatrixXd>> gram_cache_;
};

/// Memoizing decorator, safe for concurrent insert-or-get. Values are
/// deterministic, so racing computations of the same key agree.
class MemoMass : public MassFunctional {
 public:
  explicit MemoMass(MassFunctional& inner) : inner_(inner) {}
  double domain_mass(const SparseAlpha& alpha) override;
  std::string mode() const override { return inner_.mode(); }

  std::size_t size() const;
  void for_each(const std::function<void(const SparseAlpha&, double)>& fn) const;

  // binary persistence, keyed by a scenario hash
  void save(const std::string& path, std::uint64_t scenario_hash) const;
  bool load(const std::string& path, std::uint64_t scenario_hash);

 private:
  MassFunctional& inner_;
  mutable std::mutex mutex_;
  std::unordered_map<SparseAlpha, double, SparseAlphaHash> table_;
};

}  // namespace invspec
