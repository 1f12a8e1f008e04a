#include "invspec/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "invspec/parallel.hpp"

namespace invspec {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

PotentialParams make_potential_params(int dim, double eps, double r0, double lambda1,
                                      double c1, double c7_pad, double rho_override) {
  PotentialParams p;
  p.dim = dim;
  p.eps = eps;
  p.r0 = r0;
  p.rho1 = std::pow(eps, 1.0 / 16.0);
  p.rho2 = std::pow(eps, 1.0 / (64.0 * dim));
  p.rho = rho_override > 0.0 ? rho_override : p.rho2;
  p.lambda1 = lambda1;
  p.c1 = c1;
  p.c7_pad = c7_pad;
  return p;
}

PotentialEstimate recover_potential(MassFunctional& mass, const DiscreteManifold& man,
                                    const CellPartition& part, const SliceCatalog& cat,
                                    const FiniteMetricSpace& ms, const PotentialParams& prm,
                                    int threads) {
  if (prm.rho >= 0.5 * man.injectivity_radius())
    throw std::invalid_argument("recover_potential: rho reaches half the injectivity radius");

  PotentialEstimate est;
  est.params = prm;
  const double nu_n = unit_ball_volume(prm.dim);
  const int n_out = int(cat.outer.size());
  est.slices.resize(n_out);

  // slice masses: L^a over the star slices V_i = M_tau^*
  parallel_for(n_out, threads, [&](int i) {
    SliceEstimate& s = est.slices[std::size_t(i)];
    s.tau = cat.outer[std::size_t(i)].tau;
    s.entry = ms.inner_count + i;
    s.dhat0 = ms.dhat(0, s.entry);
    std::vector<int> beta = cat.tau_dense(i);
    s.slice_mass = slice_functional(mass, part, beta, SliceVariant::Star);
    if (s.slice_mass < 0.0) s.slice_mass = 0.0;  // minimization route can dip below zero
  });

  // phi_hat where the slice is far enough from the base point
  const double phi_gate = prm.r0 + prm.rho1 + prm.c7_pad;
  for (int i = 0; i < n_out; ++i) {
    SliceEstimate& s = est.slices[std::size_t(i)];
    if (s.dhat0 < phi_gate) {
      s.drop_reason = "dhat0 below r0+rho1 band";
      continue;
    }
    double acc = 0.0;
    for (int j = 0; j < n_out; ++j)
      if (ms.dhat(s.entry, ms.inner_count + j) < prm.rho1)
        acc += est.slices[std::size_t(j)].slice_mass;
    double rad = acc / (nu_n * std::pow(prm.rho1, prm.dim));
    if (rad < 0.0) {
      s.drop_reason = "negative radicand";
      continue;
    }
    s.phi_hat = std::sqrt(rad);
    if (s.phi_hat < 0.5 * prm.c1) {
      s.drop_reason = "phi_hat below c1/2";
      est.warnings.push_back("slice " + std::to_string(i) + " dropped: phi_hat below c1/2");
      s.phi_hat = 0.0;
      continue;
    }
    s.has_phi = true;
    s.vol_a = s.slice_mass > 0.0 ? s.slice_mass / (s.phi_hat * s.phi_hat) : 0.0;
  }

  // ball volumes, graph Laplacian and the q estimate on the gated slices
  const double ball_gate = prm.r0 + std::max(3.0 * prm.rho, 2.0 * prm.rho + prm.rho1) + prm.c7_pad;
  const double coeff = 2.0 * (prm.dim + 2) / (prm.rho * prm.rho);
  for (int i = 0; i < n_out; ++i) {
    SliceEstimate& s = est.slices[std::size_t(i)];
    if (!s.has_phi || s.dhat0 < ball_gate) continue;
    double volb = 0.0, flow = 0.0;
    for (int j = 0; j < n_out; ++j) {
      if (ms.dhat(s.entry, ms.inner_count + j) >= prm.rho) continue;
      const SliceEstimate& t = est.slices[std::size_t(j)];
      if (!t.has_phi) {
        ++s.ball_missing;
        continue;
      }
      volb += t.vol_a;
      flow += t.vol_a * t.phi_hat;  // = phi_hat^{-1} * slice_mass
    }
    s.vol_a_ball = volb;
    if (prm.rho >= prm.rho1 && volb < 0.25 * nu_n * std::pow(prm.rho, prm.dim)) {
      s.drop_reason = "vol^a ball below nu_n rho^n / 4";
      est.warnings.push_back("slice " + std::to_string(i) + " dropped: ball volume guard");
      continue;
    }
    s.has_ball = true;
    s.laplacian = coeff * (flow / volb - s.phi_hat);
    s.gated = true;
    s.qhat = prm.lambda1 + s.laplacian / s.phi_hat;
  }
  return est;
}

double vol_a_ball(const PotentialEstimate& est, const FiniteMetricSpace& ms, int slice,
                  double rho) {
  const SliceEstimate& s = est.slices[std::size_t(slice)];
  if (!s.has_phi) throw std::invalid_argument("vol_a_ball: phi_hat undefined for this slice");
  double volb = 0.0;
  for (int j = 0; j < int(est.slices.size()); ++j)
    if (ms.dhat(s.entry, ms.inner_count + j) < rho) volb += est.slices[std::size_t(j)].vol_a;
  const double nu_n = unit_ball_volume(est.params.dim);
  if (rho >= est.params.rho1 && volb < 0.25 * nu_n * std::pow(rho, est.params.dim))
    throw std::runtime_error("vol_a_ball: lower-bound guard tripped");
  return volb;
}

std::vector<double> graph_laplacian_field(const PotentialEstimate& est,
                                          const FiniteMetricSpace& ms,
                                          const std::vector<double>& node_values,
                                          double rho) {
  const int n_out = int(est.slices.size());
  if (int(node_values.size()) != n_out)
    throw std::invalid_argument("graph_laplacian_field: one value per slice required");
  const double coeff = 2.0 * (est.params.dim + 2) / (rho * rho);
  std::vector<double> out(n_out, kNaN);
  for (int i = 0; i < n_out; ++i) {
    const SliceEstimate& s = est.slices[std::size_t(i)];
    if (!s.has_phi) continue;
    double volb = 0.0, flow = 0.0;
    for (int j = 0; j < n_out; ++j) {
      if (ms.dhat(s.entry, ms.inner_count + j) >= rho) continue;
      const SliceEstimate& t = est.slices[std::size_t(j)];
      if (!t.has_phi) continue;
      volb += t.vol_a;
      flow += t.vol_a * node_values[std::size_t(j)];
    }
    if (volb > 0.0) out[std::size_t(i)] = coeff * (flow / volb - node_values[std::size_t(i)]);
  }
  return out;
}

void add_near_field(PotentialEstimate& est, const DiscreteManifold& man,
                    const SpectralData& data, int base_point, double r0, double rho_near) {
  if (!(data.delta < 0.5 * est.params.c1))
    throw std::invalid_argument("add_near_field: need delta < c1/2 so phi_1^a stays positive");
  const int dim = man.dimension();
  const double coeff = 2.0 * (dim + 2) / (rho_near * rho_near);

  est.near_points = man.ball_points(base_point, 2.0 * r0);
  est.near_qhat.assign(est.near_points.size(), 0.0);
  for (std::size_t idx = 0; idx < est.near_points.size(); ++idx) {
    int x = est.near_points[idx];
    int xloc = data.window->local[x];
    if (xloc < 0) throw std::runtime_error("add_near_field: point outside the data window");
    double phix = data.values(xloc, 0);
    double acc = 0.0;
    double vol = 0.0;
    for (int y : man.ball_points(x, rho_near)) {
      int yloc = data.window->local[y];
      if (yloc < 0)
        throw std::runtime_error("add_near_field: averaging ball exits the data window");
      acc += (data.values(yloc, 0) - phix) * man.cell_measure();
      vol += man.cell_measure();
    }
    double lrho = coeff * acc / vol;
    est.near_qhat[idx] = est.params.lambda1 + lrho / phix;
  }
}

PsiMap build_psi(const DiscreteManifold& man1, const std::vector<std::string>& labels1,
                 const std::vector<int>& net1, const DiscreteManifold& man2,
                 const std::vector<std::string>& labels2, const std::vector<int>& net2) {
  if (labels1 != labels2)
    throw std::invalid_argument("build_psi: reconstructions do not share a labeling");
  if (net1.size() != net2.size() || net1.size() != labels1.size())
    throw std::invalid_argument("build_psi: one net point per label required");

  PsiMap psi;
  psi.assignment.resize(man1.point_count());
  for (int x = 0; x < man1.point_count(); ++x) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < int(net1.size()); ++i) {
      double d = man1.distance(x, net1[std::size_t(i)]);
      if (d < bd - 1e-15) {
        bd = d;
        best = i;
      }
    }
    psi.assignment[std::size_t(x)] = best;
  }

  double worst = 0.0;
  for (int x = 0; x < man1.point_count(); ++x)
    for (int y = x; y < man1.point_count(); ++y) {
      int ax = psi.assignment[std::size_t(x)], ay = psi.assignment[std::size_t(y)];
      double d2 = man2.distance(net2[std::size_t(ax)], net2[std::size_t(ay)]);
      worst = std::max(worst, std::fabs(d2 - man1.distance(x, y)));
    }
  psi.distortion = worst;
  return psi;
}

}  // namespace invspec
