#include "invspec/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "invspec/parallel.hpp"

namespace invspec {

int corresponding_point(const DiscreteManifold& man, const CellPartition& part,
                        const SliceCatalog& cat, int outer_index) {
  const OuterEntry& e = cat.outer[std::size_t(outer_index)];
  const int L = cat.anchor_count;
  const int N = cat.cell_count;
  std::vector<int> beta(N, 0);
  for (int k = 0; k < L; ++k) beta[k] = e.tau[k];
  for (int l = L; l < N; ++l) {
    beta[l] = e.rep_beta[l];
    for (int x = 0; x < man.point_count(); ++x)
      if (slice_membership(part, beta, SliceVariant::Eps, x)) return x;
    beta[l] = 0;
  }
  return -1;
}

EvaluationTables evaluate_metric(const DiscreteManifold& man, const CellPartition& part,
                                 const SliceCatalog& cat, const FiniteMetricSpace& ms) {
  EvaluationTables t;
  const int M = ms.size();
  t.entry_points.assign(M, -1);
  for (int i = 0; i < M; ++i) {
    if (ms.kind[i] == 0)
      t.entry_points[i] = cat.inner[std::size_t(ms.ref[i])];
    else {
      t.entry_points[i] = corresponding_point(man, part, cat, ms.ref[i]);
      if (t.entry_points[i] < 0) ++t.empty_eps_flags;
    }
  }

  // coverage and proximity of the star slices
  std::vector<int> hits(man.point_count(), 0);
  double c3_eps = 0.0;
  for (int i = 0; i < int(cat.outer.size()); ++i) {
    std::vector<int> beta = cat.tau_dense(i);
    int xi = t.entry_points[ms.inner_count + i];
    for (int y : slice_points(part, beta, SliceVariant::Star)) {
      ++hits[y];
      if (xi >= 0) c3_eps = std::max(c3_eps, man.distance(xi, y));
    }
  }
  t.coverage_exact = true;
  for (int y = 0; y < man.point_count(); ++y) {
    if (man.distance(y, part.base_point) < part.r0) continue;
    if (hits[y] != 1) t.coverage_exact = false;
  }
  t.c3_eps = c3_eps;
  t.c3 = c3_eps / part.eps;

  t.dist_error = Eigen::MatrixXd::Zero(M, M);
  for (int i = 0; i < M; ++i)
    for (int k = i + 1; k < M; ++k) {
      if (t.entry_points[i] < 0 || t.entry_points[k] < 0) continue;
      double err = std::fabs(ms.dhat(i, k) - man.distance(t.entry_points[i], t.entry_points[k]));
      t.dist_error(i, k) = t.dist_error(k, i) = err;
      t.c7_pad = std::max(t.c7_pad, err);
    }
  t.c7 = t.c7_pad / std::pow(part.eps, 0.125);
  return t;
}

EvaluationTables evaluate_run(const DiscreteManifold& man, const PotentialField& q_true,
                              const ForwardSolution& forward, const CellPartition& part,
                              const SliceCatalog& cat, const FiniteMetricSpace& ms,
                              const PotentialEstimate& est) {
  EvaluationTables t = evaluate_metric(man, part, cat, ms);

  // phi_hat / volume diagnostics and the q table
  double phi_err = -1.0, vol_dev = -1.0;
  for (int i = 0; i < int(est.slices.size()); ++i) {
    const SliceEstimate& s = est.slices[std::size_t(i)];
    int xi = t.entry_points[s.entry];
    if (!s.has_phi || xi < 0) continue;
    phi_err = std::max(phi_err, std::fabs(s.phi_hat - forward.modes(xi, 0)));
    std::vector<int> beta = cat.tau_dense(i);
    double vol = double(slice_points(part, beta, SliceVariant::Star).size()) * man.cell_measure();
    if (vol > 0.0) vol_dev = std::max(vol_dev, std::fabs(s.vol_a / vol - 1.0));
    if (s.gated) {
      EvaluationTables::QRow row;
      row.slice = i;
      row.point = xi;
      row.dhat0 = s.dhat0;
      row.phi_hat = s.phi_hat;
      row.vol_a = s.vol_a;
      row.laplacian = s.laplacian;
      row.qhat = s.qhat;
      row.q_true = q_true.values[std::size_t(xi)];
      row.abs_err = std::fabs(row.qhat - row.q_true);
      t.far_rows.push_back(row);
    }
  }
  if (phi_err >= 0.0) t.phi_hat_sup_err = phi_err;
  if (vol_dev >= 0.0) t.vol_ratio_sup_dev = vol_dev;
  if (!t.far_rows.empty()) {
    t.far_sup_err = 0.0;
    for (const auto& r : t.far_rows) t.far_sup_err = std::max(t.far_sup_err, r.abs_err);
  }

  if (!est.near_points.empty()) {
    t.near_q_true.resize(est.near_points.size());
    t.near_sup_err = 0.0;
    for (std::size_t i = 0; i < est.near_points.size(); ++i) {
      t.near_q_true[i] = q_true.values[std::size_t(est.near_points[i])];
      t.near_sup_err =
          std::max(t.near_sup_err, std::fabs(est.near_qhat[i] - t.near_q_true[i]));
    }
  }

  // covering radius of the gated slice points over the far region
  if (!t.far_rows.empty()) {
    double worst = 0.0;
    for (int y = 0; y < man.point_count(); ++y) {
      if (man.distance(y, part.base_point) < 1.5 * part.r0) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : t.far_rows) best = std::min(best, man.distance(y, r.point));
      worst = std::max(worst, best);
    }
    t.covering_radius_far = worst;
  }

  // near/far agreement: compare against each field's own target, allowing for
  // the true variation of q between the two evaluation points
  if (!t.far_rows.empty() && !est.near_points.empty() && !std::isnan(t.near_sup_err)) {
    double allowance_base = t.near_sup_err + t.far_sup_err;
    for (std::size_t i = 0; i < est.near_points.size(); ++i) {
      int x = est.near_points[i];
      double dxp = man.distance(x, part.base_point);
      if (dxp <= 1.5 * part.r0) continue;  // overlap annulus only
      double best = std::numeric_limits<double>::infinity();
      const EvaluationTables::QRow* nearest = nullptr;
      for (const auto& r : t.far_rows) {
        double d = man.distance(x, r.point);
        if (d < best) {
          best = d;
          nearest = &r;
        }
      }
      double gap = std::fabs(est.near_qhat[i] - nearest->qhat);
      double allowance =
          allowance_base + std::fabs(t.near_q_true[i] - nearest->q_true) + 1e-12;
      if (gap > allowance) {
        t.overlap_ok = false;
        t.overlap_worst_excess = std::max(t.overlap_worst_excess, gap - allowance);
      }
    }
  }
  return t;
}

void audit_sigma(EvaluationTables& tables, const DiscreteManifold& man,
                 const ForwardSolution& forward, CutoffMass& cutoff, MemoMass& memo,
                 OracleMass& oracle, const CellPartition& part, int max_samples,
                 int threads) {
  std::vector<std::pair<SparseAlpha, double>> keys;
  memo.for_each([&](const SparseAlpha& a, double v) { keys.emplace_back(a, v); });
  std::sort(keys.begin(), keys.end(),
            [](const auto& a, const auto& b) { return a.first.entries < b.first.entries; });
  std::size_t stride = std::max<std::size_t>(1, keys.size() / std::size_t(max_samples));
  std::vector<std::pair<SparseAlpha, double>> sample;
  for (std::size_t i = 0; i < keys.size(); i += stride) sample.push_back(keys[i]);

  const int J = cutoff.data().J;
  const double w = man.cell_measure();
  tables.sigma_rows.assign(sample.size(), {});
  parallel_for(int(sample.size()), threads, [&](int s) {
    const auto& [alpha, blind_value] = sample[std::size_t(s)];
    EvaluationTables::SigmaRow row;
    row.alpha = alpha;
    row.blind_value = blind_value;
    row.oracle_value = oracle.domain_mass(alpha);

    AdmissibleSetSpec spec = cutoff.build_spec(alpha);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(J);
    u[0] = 1.0;
    CutoffCoefficients cut = recover_cutoff(spec, u);

    // || sum b_j phi_j - chi_{M_alpha} phi_1 ||_{L2} via the forward basis
    std::vector<char> inside(man.point_count(), 0);
    for (int x = 0; x < man.point_count(); ++x)
      for (const auto& [cell, radius] : alpha.entries)
        if (part.cell_distance[cell][x] < radius) {
          inside[x] = 1;
          break;
        }
    Eigen::VectorXd c(J);  // Fourier coefficients of chi phi_1
    for (int j = 0; j < J; ++j) {
      double acc = 0.0;
      for (int x = 0; x < man.point_count(); ++x)
        if (inside[x]) acc += forward.modes(x, 0) * forward.modes(x, j);
      c[j] = acc * w;
    }
    double chi_norm2 = row.oracle_value;
    double cross = cut.b.dot(c);
    double resid2 = cut.b.squaredNorm() - 2.0 * cross + chi_norm2;
    row.sigma_cut = std::sqrt(std::max(0.0, resid2));
    row.bound = row.sigma_cut * (cut.b.norm() + std::sqrt(std::max(0.0, chi_norm2)));
    tables.sigma_rows[std::size_t(s)] = row;
  });

  tables.sigma_bound_max = 0.0;
  tables.sigma_consistent = true;
  for (const auto& r : tables.sigma_rows) {
    tables.sigma_bound_max = std::max(tables.sigma_bound_max, r.bound);
    if (std::fabs(r.blind_value - r.oracle_value) > r.bound + 1e-12)
      tables.sigma_consistent = false;
  }
}

}  // namespace invspec
