#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

#include "invspec/control.hpp"
#include "invspec/metric_space.hpp"
#include "invspec/potential.hpp"
#include "invspec/slicing.hpp"
#include "invspec/spectra.hpp"

namespace invspec {

/// Oracle-side error tables. The reconstruction never reads these; the
/// choice-xi gate constant is the one number fed back (documented).
struct EvaluationTables {
  // corresponding point per metric entry (grid index, -1 when none exists)
  std::vector<int> entry_points;
  int empty_eps_flags = 0;

  bool coverage_exact = false;  // every far grid point in exactly one V_i
  double c3_eps = 0.0;          // max_i max_{y in V_i} d(x_i, y)
  double c3 = 0.0;              // c3_eps / eps

  Eigen::MatrixXd dist_error;  // |dhat - d| per entry pair (-1 rows/cols excluded as 0)
  double c7_pad = 0.0;         // max |dhat - d|
  double c7 = 0.0;             // c7_pad / eps^{1/8}

  struct QRow {
    int slice = -1;
    int point = -1;
    double dhat0 = 0.0;
    double phi_hat = 0.0;
    double vol_a = 0.0;
    double laplacian = 0.0;
    double qhat = 0.0;
    double q_true = 0.0;
    double abs_err = 0.0;
  };
  std::vector<QRow> far_rows;  // gated slices only
  double far_sup_err = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> near_q_true;  // aligned with potential.near_points
  double near_sup_err = std::numeric_limits<double>::quiet_NaN();

  double covering_radius_far = std::numeric_limits<double>::quiet_NaN();

  // near/far agreement on the overlap annulus
  bool overlap_ok = true;
  double overlap_worst_excess = 0.0;  // max over points of gap - allowance

  // phi_hat and volume diagnostics over slices with oracle points
  double phi_hat_sup_err = std::numeric_limits<double>::quiet_NaN();
  double vol_ratio_sup_dev = std::numeric_limits<double>::quiet_NaN();

  struct SigmaRow {
    SparseAlpha alpha;
    double blind_value = 0.0;
    double oracle_value = 0.0;
    double sigma_cut = 0.0;  // || u^a - chi u ||_{L2}
    double bound = 0.0;      // sigma_cut * (||u^a|| + ||chi u||)
  };
  std::vector<SigmaRow> sigma_rows;
  double sigma_bound_max = 0.0;
  bool sigma_consistent = true;  // |blind - oracle| <= bound on every sampled key
};

// first grid point (ascending index) of the eps-variant of rep_beta<l>,
// over l in ascending order; -1 when all are empty
int corresponding_point(const DiscreteManifold& man, const CellPartition& part,
                        const SliceCatalog& cat, int outer_index);

EvaluationTables evaluate_run(const DiscreteManifold& man, const PotentialField& q_true,
                              const ForwardSolution& forward, const CellPartition& part,
                              const SliceCatalog& cat, const FiniteMetricSpace& ms,
                              const PotentialEstimate& est);

// metric-only part (corresponding points, coverage, C3, C7); cheap enough to
// run before the potential stage, which needs the C7 padding
EvaluationTables evaluate_metric(const DiscreteManifold& man, const CellPartition& part,
                                 const SliceCatalog& cat, const FiniteMetricSpace& ms);

/// Blind-run audit: re-derives cutoff vectors on a deterministic sample of
/// memoized keys and checks |L_blind - L_oracle| against the Cauchy-Schwarz
/// bound sigma_cut (||u^a|| + ||chi u||).
void audit_sigma(EvaluationTables& tables, const DiscreteManifold& man,
                 const ForwardSolution& forward, CutoffMass& cutoff, MemoMass& memo,
                 OracleMass& oracle, const CellPartition& part, int max_samples = 400,
                 int threads = 1);

}  // namespace invspec
