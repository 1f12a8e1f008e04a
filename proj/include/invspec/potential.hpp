#pragma once

#include <string>
#include <vector>

#include "invspec/control.hpp"
#include "invspec/metric_space.hpp"
#include "invspec/slicing.hpp"
#include "invspec/spectra.hpp"

namespace invspec {

struct PotentialParams {
  double eps = 0.0;
  double rho1 = 0.0;     // eps^{1/16}
  double rho2 = 0.0;     // eps^{1/64n}
  double rho = 0.0;      // Laplacian radius; defaults to rho2
  double lambda1 = 0.0;  // lambda_1^a
  double c1 = 0.0;
  double c7_pad = 0.0;   // measured max |dhat - d|
  double r0 = 0.0;
  int dim = 0;
};

PotentialParams make_potential_params(int dim, double eps, double r0, double lambda1,
                                      double c1, double c7_pad, double rho_override = 0.0);

struct SliceEstimate {
  int entry = -1;  // metric-space index
  std::vector<int> tau;
  double dhat0 = 0.0;
  double slice_mass = 0.0;  // integral of phi_1^2 over V_i
  double phi_hat = 0.0;
  double vol_a = 0.0;
  double vol_a_ball = 0.0;
  double laplacian = 0.0;
  double qhat = 0.0;
  bool has_phi = false;
  bool has_ball = false;
  bool gated = false;  // carries a q estimate
  int ball_missing = 0;  // in-ball neighbours without a defined phi_hat
  std::string drop_reason;
};

struct PotentialEstimate {
  PotentialParams params;
  std::vector<SliceEstimate> slices;
  std::vector<int> near_points;     // grid indices in B(p, 2 r0)
  std::vector<double> near_qhat;
  std::vector<std::string> warnings;
};

/// Far-field pipeline: slice masses -> phi_hat -> vol^a -> graph Laplacian ->
/// q estimates on the gated slices.
PotentialEstimate recover_potential(MassFunctional& mass, const DiscreteManifold& man,
                                    const CellPartition& part, const SliceCatalog& cat,
                                    const FiniteMetricSpace& ms, const PotentialParams& prm,
                                    int threads = 1);

/// vol^a(B(x_i, rho)) = sum of vol^a(V_j) over dhat_ij < rho; throws when the
/// paper's lower-bound guard nu_n rho^n / 4 trips for rho >= rho1.
double vol_a_ball(const PotentialEstimate& est, const FiniteMetricSpace& ms, int slice,
                  double rho);

/// Test hook: the graph Laplacian applied to an injected node field in place
/// of phi_hat. Returns one value per slice; entries without the full
/// ingredient set are NaN.
std::vector<double> graph_laplacian_field(const PotentialEstimate& est,
                                          const FiniteMetricSpace& ms,
                                          const std::vector<double>& node_values,
                                          double rho);

/// Near-field recovery on B(p, 2 r0) from the data window itself; ball
/// averages use the given (exact) geometry of U.
void add_near_field(PotentialEstimate& est, const DiscreteManifold& man,
                    const SpectralData& data, int base_point, double r0, double rho_near);

struct PsiMap {
  std::vector<int> assignment;  // per grid point of manifold 1: net index
  double distortion = 0.0;      // sup |d2(psi x, psi x') - d1(x, x')|
};

/// Voronoi correspondence between two reconstructions with paired nets.
/// Throws on label mismatch.
PsiMap build_psi(const DiscreteManifold& man1, const std::vector<std::string>& labels1,
                 const std::vector<int>& net1, const DiscreteManifold& man2,
                 const std::vector<std::string>& labels2, const std::vector<int>& net2);

}  // namespace invspec
