#include "invspec/control.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace invspec {

namespace {

// sin(w a) / w, continuous through w = 0
double sin_over(double w, double a) {
  double wa = w * a;
  if (std::fabs(wa) < 1e-6) return a * (1.0 - wa * wa / 6.0);
  return std::sin(wa) / w;
}

double clamp0(double x) { return x > 0.0 ? x : 0.0; }

struct Constraint {
  const Eigen::MatrixXd* q = nullptr;  // null: diagonal constraint
  Eigen::VectorXd diag;                // used when q == nullptr
  double cap = 0.0;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (q) return (*q) * v;
    return diag.cwiseProduct(v);
  }
  double quad(const Eigen::VectorXd& v) const { return v.dot(apply(v)); }
};

std::vector<Constraint> collect_constraints(const AdmissibleSetSpec& spec) {
  std::vector<Constraint> cs;
  Constraint ball;
  ball.diag = Eigen::VectorXd::Ones(spec.J);
  ball.cap = spec.l2_cap;
  cs.push_back(std::move(ball));
  Constraint energy;
  energy.diag = Eigen::Map<const Eigen::VectorXd>(spec.energy_weights.data(), spec.J);
  energy.cap = spec.energy_cap;
  cs.push_back(std::move(energy));
  for (std::size_t k = 0; k < spec.gram.size(); ++k) {
    if (!spec.gram[k]) continue;
    Constraint w;
    w.q = spec.gram[k].get();
    w.cap = spec.wave_cap[k];
    cs.push_back(std::move(w));
  }
  return cs;
}

double kkt_residual(const std::vector<Constraint>& cs, const Eigen::VectorXd& mu,
                    const Eigen::VectorXd& v) {
  double r = 0.0;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    double s = std::max(cs[k].cap, 1e-30);
    double g = (cs[k].quad(v) - cs[k].cap) / s;
    r = std::max(r, std::fabs(std::min(mu[int(k)], -g)));
  }
  return r;
}

// pull the iterate onto the feasible side; the caps are centered, so a
// uniform shrink never increases any constraint
void polish_feasible(const std::vector<Constraint>& cs, Eigen::VectorXd& v) {
  double t = 1.0;
  for (const Constraint& c : cs) {
    double q = c.quad(v);
    if (q > c.cap) {
      if (c.cap <= 0.0 || q <= 0.0)
        t = 0.0;
      else
        t = std::min(t, std::sqrt(c.cap / q));
    }
  }
  if (t < 1.0) v *= t;
}

MinimizeResult solve_dual_newton(const std::vector<Constraint>& cs, const Eigen::VectorXd& u,
                                 const MinimizeOptions& opt) {
  const int K = int(cs.size());
  const int J = int(u.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(K);

  auto state = [&](const Eigen::VectorXd& m, Eigen::VectorXd& v, Eigen::VectorXd& g,
                   Eigen::LLT<Eigen::MatrixXd>& llt) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(J, J);
    for (int k = 0; k < K; ++k) {
      if (m[k] == 0.0) continue;
      if (cs[k].q)
        s.noalias() += m[k] * (*cs[k].q);
      else
        s.diagonal() += m[k] * cs[k].diag;
    }
    llt.compute(s);
    v = llt.solve(u);
    g.resize(K);
    for (int k = 0; k < K; ++k) g[k] = cs[k].quad(v) - cs[k].cap;
  };

  auto theta = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& m,
                   const Eigen::VectorXd& g) {
    return (v - u).squaredNorm() + m.dot(g);
  };

  Eigen::VectorXd v, g;
  Eigen::LLT<Eigen::MatrixXd> llt;
  state(mu, v, g, llt);

  MinimizeResult best;
  best.w = v;
  best.kkt_residual = kkt_residual(cs, mu, v);

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    double res = kkt_residual(cs, mu, v);
    if (res < best.kkt_residual) {
      best.kkt_residual = res;
      best.w = v;
    }
    if (res <= opt.kkt_tol) {
      polish_feasible(cs, v);
      return {v, it, res, true};
    }

    std::vector<int> free;
    for (int k = 0; k < K; ++k)
      if (mu[k] > 0.0 || g[k] > 0.0) free.push_back(k);
    if (free.empty()) {
      polish_feasible(cs, v);
      return {v, it, res, true};
    }

    const int F = int(free.size());
    std::vector<Eigen::VectorXd> qv(F), siqv(F);
    for (int a = 0; a < F; ++a) {
      qv[a] = cs[free[a]].apply(v);
      siqv[a] = llt.solve(qv[a]);
    }
    Eigen::MatrixXd m(F, F);
    for (int a = 0; a < F; ++a)
      for (int b = a; b < F; ++b) m(a, b) = m(b, a) = 2.0 * qv[a].dot(siqv[b]);
    m.diagonal().array() += 1e-14 * (1.0 + m.diagonal().maxCoeff());
    Eigen::VectorXd gf(F);
    for (int a = 0; a < F; ++a) gf[a] = g[free[a]];
    Eigen::VectorXd step = m.ldlt().solve(gf);

    double th0 = theta(v, mu, g);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd trial = mu;
      for (int a = 0; a < F; ++a) trial[free[a]] = clamp0(mu[free[a]] + t * step[a]);
      if ((trial - mu).lpNorm<Eigen::Infinity>() == 0.0) break;
      Eigen::VectorXd vt, gt;
      Eigen::LLT<Eigen::MatrixXd> lt;
      state(trial, vt, gt, lt);
      if (theta(vt, trial, gt) > th0 - 1e-18) {
        mu = trial;
        v = vt;
        g = gt;
        llt = lt;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // dual ascent stalled: fall back to a small gradient step
      bool any = false;
      Eigen::VectorXd trial = mu;
      for (int k = 0; k < K; ++k) {
        double nk = clamp0(mu[k] + 1e-3 * g[k] / std::max(cs[k].cap, 1e-30));
        if (nk != mu[k]) any = true;
        trial[k] = nk;
      }
      if (!any) break;
      mu = trial;
      state(mu, v, g, llt);
    }
  }

  double res = kkt_residual(cs, mu, v);
  if (res <= opt.kkt_tol) {
    polish_feasible(cs, v);
    return {v, it, res, true};
  }
  polish_feasible(cs, best.w);
  best.iterations = it;
  best.converged = false;
  throw MinimizeError("minimize_over_admissible: iteration cap before KKT target", best);
}

struct EllipsoidEig {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

EllipsoidEig decompose(const Constraint& c, int J) {
  EllipsoidEig e;
  if (c.q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*c.q);
    e.vectors = es.eigenvectors();
    e.values = es.eigenvalues().cwiseMax(0.0);
  } else {
    e.vectors = Eigen::MatrixXd::Identity(J, J);
    e.values = c.diag.cwiseMax(0.0);
  }
  return e;
}

Eigen::VectorXd project_decomposed(const EllipsoidEig& e, double cap,
                                   const Eigen::VectorXd& u, double tol, int max_iter) {
  Eigen::VectorXd ut = e.vectors.transpose() * u;
  auto value = [&](double m) {
    double s = 0.0;
    for (int i = 0; i < ut.size(); ++i) {
      double f = 1.0 + m * e.values[i];
      s += e.values[i] * ut[i] * ut[i] / (f * f);
    }
    return s;
  };
  if (value(0.0) <= cap) return u;

  if (cap < 1e-30) {  // degenerate cap: keep only the null directions
    Eigen::VectorXd vt = ut;
    double dmax = e.values.maxCoeff();
    for (int i = 0; i < vt.size(); ++i)
      if (e.values[i] > 1e-14 * std::max(1.0, dmax)) vt[i] = 0.0;
    return e.vectors * vt;
  }

  double lo = 0.0, hi = 1.0;
  while (value(hi) > cap) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  double m = hi;
  for (int it = 0; it < max_iter; ++it) {
    double f = value(m) - cap;
    if (std::fabs(f) <= tol * std::max(1.0, cap)) break;
    if (f > 0.0)
      lo = m;
    else
      hi = m;
    double df = 0.0;
    for (int i = 0; i < ut.size(); ++i) {
      double d = e.values[i];
      double fac = 1.0 + m * d;
      df += -2.0 * d * d * ut[i] * ut[i] / (fac * fac * fac);
    }
    double next = df != 0.0 ? m - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    m = next;
  }
  Eigen::VectorXd vt(ut.size());
  for (int i = 0; i < ut.size(); ++i) vt[i] = ut[i] / (1.0 + m * e.values[i]);
  return e.vectors * vt;
}

MinimizeResult solve_dykstra(const std::vector<Constraint>& cs, const Eigen::VectorXd& u,
                             const MinimizeOptions& opt) {
  const int K = int(cs.size());
  const int J = int(u.size());
  std::vector<EllipsoidEig> eig(K);
  for (int k = 0; k < K; ++k) eig[k] = decompose(cs[k], J);

  Eigen::VectorXd x = u;
  std::vector<Eigen::VectorXd> p(K, Eigen::VectorXd::Zero(J));
  int sweep = 0;
  for (; sweep < opt.max_iterations; ++sweep) {
    double move = 0.0;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd z = x + p[k];
      Eigen::VectorXd y = project_decomposed(eig[k], cs[k].cap, z, 1e-12, 200);
      p[k] = z - y;
      move = std::max(move, (x - y).lpNorm<Eigen::Infinity>());
      x = y;
    }
    if (move <= 1e-13 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
  }

  // fit multipliers to the normal-cone vectors and score the KKT system
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd qx = cs[k].apply(x);
    double nn = qx.squaredNorm();
    if (nn > 0.0) mu[k] = clamp0(p[k].dot(qx) / nn);
  }
  double res = kkt_residual(cs, mu, x);
  Eigen::VectorXd slack = x - u;
  for (int k = 0; k < K; ++k) slack += mu[k] * cs[k].apply(x);
  res = std::max(res, slack.lpNorm<Eigen::Infinity>());

  polish_feasible(cs, x);
  if (res <= opt.kkt_tol) return {x, sweep, res, true};
  if (sweep >= opt.max_iterations)
    throw MinimizeError("minimize_over_admissible: Dykstra sweep cap before KKT target",
                        {x, sweep, res, false});
  return {x, sweep, res, true};
}

}  // namespace

SparseAlpha SparseAlpha::from_dense(std::span<const double> alpha) {
  SparseAlpha a;
  for (int k = 0; k < int(alpha.size()); ++k)
    if (alpha[k] > 0.0) a.entries.emplace_back(k, alpha[k]);
  return a;
}

std::size_t SparseAlphaHash::operator()(const SparseAlpha& a) const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (const auto& [cell, radius] : a.entries) {
    mix(std::uint64_t(cell));
    mix(std::bit_cast<std::uint64_t>(radius));
  }
  return std::size_t(h);
}

double min_gram_eigenvalue(const AdmissibleSetSpec& spec) {
  double m = 0.0;
  for (const auto& g : spec.gram) {
    if (!g) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*g, Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues().minCoeff());
  }
  return m;
}

double wave_eval(const SpectralData& data, const Eigen::VectorXd& v, int local_index,
                 double t) {
  double s = 0.0;
  for (int j = 0; j < data.J && j < v.size(); ++j) {
    if (v[j] == 0.0) continue;
    double om = std::sqrt(clamp0(data.eigenvalues[j]));
    s += v[j] * std::cos(om * t) * data.values(local_index, j);
  }
  return s;
}

Eigen::MatrixXd assemble_gram(const DiscreteManifold& man, const SpectralData& data,
                              std::span<const int> cell, double alpha_k) {
  if (alpha_k < 0.0) throw std::invalid_argument("assemble_gram: alpha must be >= 0");
  const int J = data.J;
  if (alpha_k == 0.0) return Eigen::MatrixXd::Zero(J, J);

  const int nc = int(cell.size());
  Eigen::MatrixXd p(nc, J);
  std::vector<Eigen::MatrixXd> grads(man.dimension(), Eigen::MatrixXd(nc, J));
  for (int r = 0; r < nc; ++r) {
    int loc = data.window->local[cell[r]];
    if (loc < 0) throw std::invalid_argument("assemble_gram: cell leaves the data window");
    p.row(r) = data.values.row(loc);
    for (int a = 0; a < man.dimension(); ++a) grads[a].row(r) = data.gradients[a].row(loc);
  }
  Eigen::MatrixXd c0 = p.transpose() * p;
  Eigen::MatrixXd c1 = c0;
  for (const auto& g : grads) c1.noalias() += g.transpose() * g;

  Eigen::VectorXd omega(J);
  for (int j = 0; j < J; ++j) omega[j] = std::sqrt(clamp0(data.eigenvalues[j]));

  Eigen::MatrixXd a(J, J);
  const double w = man.cell_measure();
  for (int j = 0; j < J; ++j)
    for (int l = j; l < J; ++l) {
      double icc = sin_over(omega[j] - omega[l], alpha_k) + sin_over(omega[j] + omega[l], alpha_k);
      double iss = sin_over(omega[j] - omega[l], alpha_k) - sin_over(omega[j] + omega[l], alpha_k);
      double val = w * (c1(j, l) * icc + omega[j] * omega[l] * c0(j, l) * iss);
      a(j, l) = a(l, j) = val;
    }
  return a;
}

AdmissibleSetSpec make_admissible_spec(const DiscreteManifold& man, const SpectralData& data,
                                       const std::vector<std::vector<int>>& cells,
                                       std::span<const double> alpha, double energy_bound,
                                       double slack) {
  if (alpha.size() != cells.size())
    throw std::invalid_argument("make_admissible_spec: one radius per cell required");
  AdmissibleSetSpec spec;
  spec.J = data.J;
  spec.energy_bound = energy_bound;
  spec.slack = slack;
  spec.alpha.assign(alpha.begin(), alpha.end());
  spec.l2_cap = 1.0;
  spec.energy_cap = energy_bound * energy_bound + data.delta;

  spec.energy_weights.resize(data.J);
  double lam_max = 0.0;
  for (int j = 0; j < data.J; ++j) {
    if (data.eigenvalues[j] < 0.0) ++spec.clamped_modes;
    spec.energy_weights[j] = clamp0(data.eigenvalues[j]);
    lam_max = std::max(lam_max, spec.energy_weights[j]);
  }
  double wave = slack + data.J * std::sqrt(lam_max) * data.delta;
  spec.wave_cap.assign(cells.size(), wave * wave);
  spec.gram.resize(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k)
    if (alpha[k] > 0.0)
      spec.gram[k] = std::make_shared<Eigen::MatrixXd>(
          assemble_gram(man, data, cells[k], alpha[k]));
  return spec;
}

MinimizeResult minimize_over_admissible(const AdmissibleSetSpec& spec,
                                        const Eigen::VectorXd& u,
                                        const MinimizeOptions& opt) {
  if (spec.l2_cap < 0.0 || spec.energy_cap < 0.0)
    throw std::invalid_argument("minimize_over_admissible: caps must be >= 0");
  for (double c : spec.wave_cap)
    if (c < 0.0) throw std::invalid_argument("minimize_over_admissible: caps must be >= 0");

  std::vector<Constraint> cs = collect_constraints(spec);
  bool feasible = true;
  for (const Constraint& c : cs)
    if (c.quad(u) > c.cap) {
      feasible = false;
      break;
    }
  if (feasible) return {u, 0, 0.0, true};

  if (opt.method == MinimizeOptions::Method::Dykstra) return solve_dykstra(cs, u, opt);
  return solve_dual_newton(cs, u, opt);
}

Eigen::VectorXd project_ellipsoid(const Eigen::MatrixXd& q, double cap,
                                  const Eigen::VectorXd& u, double tol, int max_iter) {
  Constraint c;
  c.q = &q;
  c.cap = cap;
  EllipsoidEig e = decompose(c, int(u.size()));
  return project_decomposed(e, cap, u, tol, max_iter);
}

CutoffCoefficients recover_cutoff(const AdmissibleSetSpec& spec, const Eigen::VectorXd& u,
                                  const MinimizeOptions& opt) {
  MinimizeResult r = minimize_over_admissible(spec, u, opt);
  CutoffCoefficients c;
  c.b = u - r.w;
  c.alpha = spec.alpha;
  c.sigma_target = spec.slack;
  c.iterations = r.iterations;
  c.residual = r.kkt_residual;
  return c;
}

OracleMass::OracleMass(std::vector<std::vector<double>> cell_distance,
                       std::vector<double> mass_weight)
    : cell_distance_(std::move(cell_distance)), weight_(std::move(mass_weight)) {}

double OracleMass::domain_mass(const SparseAlpha& alpha) {
  if (alpha.empty()) return 0.0;
  double s = 0.0;
  const int n = int(weight_.size());
  for (int x = 0; x < n; ++x) {
    for (const auto& [cell, radius] : alpha.entries) {
      if (cell_distance_[cell][x] < radius) {
        s += weight_[x];
        break;
      }
    }
  }
  return s;
}

CutoffMass::CutoffMass(const DiscreteManifold& man, SpectralData data,
                       std::vector<std::vector<int>> cells, Eigen::VectorXd u_coeffs,
                       double energy_bound, double slack, MinimizeOptions opt)
    : man_(man),
      data_(std::move(data)),
      cells_(std::move(cells)),
      u_(std::move(u_coeffs)),
      energy_bound_(energy_bound),
      slack_(slack),
      opt_(opt) {}

std::shared_ptr<const Eigen::MatrixXd> CutoffMass::gram_for(int cell, double radius) {
  auto key = std::make_pair(cell, std::bit_cast<std::uint64_t>(radius));
  {
    std::lock_guard lock(mutex_);
    auto it = gram_cache_.find(key);
    if (it != gram_cache_.end()) return it->second;
  }
  auto g = std::make_shared<Eigen::MatrixXd>(
      assemble_gram(man_, data_, cells_[std::size_t(cell)], radius));
  std::lock_guard lock(mutex_);
  return gram_cache_.emplace(key, std::move(g)).first->second;
}

AdmissibleSetSpec CutoffMass::build_spec(const SparseAlpha& alpha) {
  std::vector<double> dense(cells_.size(), 0.0);
  for (const auto& [cell, radius] : alpha.entries) dense[std::size_t(cell)] = radius;
  AdmissibleSetSpec spec;
  spec.J = data_.J;
  spec.energy_bound = energy_bound_;
  spec.slack = slack_;
  spec.alpha = dense;
  spec.l2_cap = 1.0;
  spec.energy_cap = energy_bound_ * energy_bound_ + data_.delta;
  spec.energy_weights.resize(data_.J);
  double lam_max = 0.0;
  for (int j = 0; j < data_.J; ++j) {
    spec.energy_weights[j] = clamp0(data_.eigenvalues[j]);
    lam_max = std::max(lam_max, spec.energy_weights[j]);
  }
  double wave = slack_ + data_.J * std::sqrt(lam_max) * data_.delta;
  spec.wave_cap.assign(cells_.size(), wave * wave);
  spec.gram.resize(cells_.size());
  for (const auto& [cell, radius] : alpha.entries) spec.gram[cell] = gram_for(cell, radius);
  return spec;
}

double CutoffMass::domain_mass(const SparseAlpha& alpha) {
  AdmissibleSetSpec spec = build_spec(alpha);
  MinimizeResult r = minimize_over_admissible(spec, u_, opt_);
  return (u_ - r.w).squaredNorm();
}

double MemoMass::domain_mass(const SparseAlpha& alpha) {
  {
    std::lock_guard lock(mutex_);
    auto it = table_.find(alpha);
    if (it != table_.end()) return it->second;
  }
  double v = inner_.domain_mass(alpha);
  std::lock_guard lock(mutex_);
  return table_.emplace(alpha, v).first->second;
}

std::size_t MemoMass::size() const {
  std::lock_guard lock(mutex_);
  return table_.size();
}

void MemoMass::for_each(const std::function<void(const SparseAlpha&, double)>& fn) const {
  std::lock_guard lock(mutex_);
  for (const auto& [k, v] : table_) fn(k, v);
}

void MemoMass::save(const std::string& path, std::uint64_t scenario_hash) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("MemoMass::save: cannot open " + path);
  const char magic[8] = {'I', 'V', 'S', 'M', 'E', 'M', 'O', '1'};
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&scenario_hash), 8);
  std::lock_guard lock(mutex_);
  std::uint64_t count = table_.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& [key, value] : table_) {
    std::uint32_t n = std::uint32_t(key.entries.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    for (const auto& [cell, radius] : key.entries) {
      std::int32_t c = cell;
      out.write(reinterpret_cast<const char*>(&c), 4);
      out.write(reinterpret_cast<const char*>(&radius), 8);
    }
    out.write(reinterpret_cast<const char*>(&value), 8);
  }
}

bool MemoMass::load(const std::string& path, std::uint64_t scenario_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "IVSMEMO1", 8) != 0) return false;
  std::uint64_t hash = 0, count = 0;
  in.read(reinterpret_cast<char*>(&hash), 8);
  if (!in || hash != scenario_hash) return false;
  in.read(reinterpret_cast<char*>(&count), 8);
  std::lock_guard lock(mutex_);
  for (std::uint64_t i = 0; i < count && in; ++i) {
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    SparseAlpha key;
    key.entries.resize(n);
    for (std::uint32_t e = 0; e < n; ++e) {
      std::int32_t c = 0;
      double r = 0.0;
      in.read(reinterpret_cast<char*>(&c), 4);
      in.read(reinterpret_cast<char*>(&r), 8);
      key.entries[e] = {c, r};
    }
    double v = 0.0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (in) table_.emplace(std::move(key), v);
  }
  return true;
}

}  // namespace invspec
