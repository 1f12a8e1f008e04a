#include "invspec/spectra.hpp"

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace invspec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// uniform in [0,1) from raw engine output; avoids distribution objects so
// streams are identical across standard library implementations
double next_unit(std::mt19937_64& eng) {
  return double(eng() >> 11) * 0x1.0p-53;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

int axis_neighbor(const DiscreteManifold& man, int index, int axis, int step) {
  auto l = man.lattice(index);
  l[axis] += step;
  return man.index_of(l[0], l[1]);
}

struct Cluster {
  int begin;
  int end;  // one past
};

std::vector<Cluster> find_clusters(const std::vector<double>& lam, double tol) {
  std::vector<Cluster> out;
  int J = int(lam.size());
  int b = 0;
  for (int j = 1; j <= J; ++j) {
    if (j == J || lam[j] - lam[j - 1] > tol * std::max(1.0, std::fabs(lam[j]))) {
      out.push_back({b, j});
      b = j;
    }
  }
  return out;
}

// sign fix and deterministic ordering inside one eigenvalue cluster: each
// column gets its largest-magnitude entry (first index on ties) made
// positive, then columns are ordered by that pivot index. Eigenvalues keep
// their sorted positions; cluster members are interchangeable.
void canonicalize_cluster(Eigen::MatrixXd& modes, int begin, int end) {
  const double rel = 1.0 - 1e-10;
  std::vector<int> pivot(end - begin);
  for (int c = begin; c < end; ++c) {
    auto col = modes.col(c);
    double mx = col.cwiseAbs().maxCoeff();
    int piv = 0;
    for (int r = 0; r < col.size(); ++r)
      if (std::fabs(col(r)) >= rel * mx) {
        piv = r;
        break;
      }
    if (col(piv) < 0.0) modes.col(c) = -col;
    pivot[c - begin] = piv;
  }
  std::vector<int> order(end - begin);
  for (int i = 0; i < end - begin; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pivot[a] < pivot[b]; });
  Eigen::MatrixXd block = modes.middleCols(begin, end - begin);
  for (int i = 0; i < end - begin; ++i) modes.col(begin + i) = block.col(order[i]);
}

}  // namespace

void validate_potential(const DiscreteManifold& man, const PotentialField& q) {
  if (int(q.values.size()) != man.point_count())
    throw std::invalid_argument("potential: one value per grid point required");
  if (!(q.bound > 1.0)) throw std::invalid_argument("potential: bound C0 must exceed 1");
  const double lo = 1.0 / q.bound, hi = q.bound;
  for (double v : q.values)
    if (!(v >= lo && v <= hi))
      throw std::invalid_argument("potential: values leave [1/C0, C0]");
  // grid Lipschitz seminorm via nearest-neighbour quotients
  const double h = man.spacing();
  for (int x = 0; x < man.point_count(); ++x)
    for (int a = 0; a < man.dimension(); ++a) {
      int y = axis_neighbor(man, x, a, 1);
      if (std::fabs(q.values[x] - q.values[y]) > q.bound * h * (1.0 + 1e-12))
        throw std::invalid_argument("potential: grid Lipschitz seminorm exceeds C0");
    }
}

ForwardSolution solve_forward(const DiscreteManifold& man, const PotentialField& q, int J) {
  validate_potential(man, q);
  const int n = man.point_count();
  if (J < 1 || J > n) throw std::invalid_argument("solve_forward: need 1 <= J <= grid size");

  const double h = man.spacing();
  const double ih2 = 1.0 / (h * h);
  const int dim = man.dimension();

  std::vector<double> A(std::size_t(n) * n, 0.0);
  for (int x = 0; x < n; ++x) {
    A[std::size_t(x) * n + x] = 2.0 * dim * ih2 + q.values[x];
    for (int a = 0; a < dim; ++a) {
      A[std::size_t(x) * n + axis_neighbor(man, x, a, 1)] -= ih2;
      A[std::size_t(x) * n + axis_neighbor(man, x, a, -1)] -= ih2;
    }
  }

  std::vector<double> w(n);
  Eigen::MatrixXd z(n, J);
  std::vector<lapack_int> isuppz(std::size_t(2) * std::max(1, J));
  lapack_int found = 0;
  lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, A.data(), n, 0.0,
                                   0.0, 1, J, 0.0, &found, w.data(), z.data(), n,
                                   isuppz.data());
  if (info != 0 || found != J)
    throw std::runtime_error("solve_forward: eigensolver failed, info=" + std::to_string(info));

  ForwardSolution fs;
  fs.dim = dim;
  fs.resolution = man.resolution();
  fs.eigenvalues.assign(w.begin(), w.begin() + J);
  // LAPACK returns unit 2-norm vectors; rescale so sum phi^2 h^n = 1
  fs.modes = z * std::pow(man.cell_measure(), -0.5);

  for (const Cluster& c : find_clusters(fs.eigenvalues, 1e-9))
    canonicalize_cluster(fs.modes, c.begin, c.end);

  // first eigenfunction positive everywhere (simple eigenvalue, Perron mode)
  if (fs.modes.col(0).sum() < 0.0) fs.modes.col(0) = -fs.modes.col(0);
  if (fs.modes.col(0).minCoeff() <= 0.0)
    throw std::runtime_error("solve_forward: first eigenfunction changes sign");

  fs.ortho_residual = orthonormality_residual(man, fs);
  return fs;
}

double rayleigh_residual(const DiscreteManifold& man, const PotentialField& q,
                         const ForwardSolution& fs, int j) {
  const double h = man.spacing();
  double acc = 0.0;
  for (int x = 0; x < man.point_count(); ++x) {
    double g2 = 0.0;
    for (int a = 0; a < man.dimension(); ++a) {
      double d = (fs.modes(axis_neighbor(man, x, a, 1), j) - fs.modes(x, j)) / h;
      g2 += d * d;
    }
    double phi = fs.modes(x, j);
    acc += (g2 + q.values[x] * phi * phi) * man.cell_measure();
  }
  return std::fabs(acc - fs.eigenvalues[j]);
}

double orthonormality_residual(const DiscreteManifold& man, const ForwardSolution& fs) {
  Eigen::MatrixXd g = fs.modes.transpose() * fs.modes * man.cell_measure();
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

void apply_cluster_rotations(ForwardSolution& fs, std::uint64_t seed, double tie_tol) {
  for (const Cluster& c : find_clusters(fs.eigenvalues, tie_tol)) {
    int sz = c.end - c.begin;
    if (sz < 2) continue;
    std::mt19937_64 eng(mix_seed(seed, std::uint64_t(c.begin)));
    Eigen::MatrixXd g(sz, sz);
    for (int i = 0; i < sz; ++i)
      for (int j = 0; j < sz; ++j) {
        double u1 = std::max(next_unit(eng), 1e-300), u2 = next_unit(eng);
        g(i, j) = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
      }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd qmat = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < sz; ++i)
      if (r(i, i) < 0.0) qmat.col(i) = -qmat.col(i);
    fs.modes.middleCols(c.begin, sz) = fs.modes.middleCols(c.begin, sz) * qmat;
  }
}

Subdomain make_ball_window(const DiscreteManifold& man, int center, double radius) {
  Subdomain w;
  w.indices = man.ball_points(center, radius);
  w.local.assign(man.point_count(), -1);
  for (int u = 0; u < int(w.indices.size()); ++u) w.local[w.indices[u]] = u;
  return w;
}

SpectralData restrict_to_window(const DiscreteManifold& man, const ForwardSolution& fs,
                                std::shared_ptr<const Subdomain> window) {
  SpectralData d;
  d.J = fs.mode_count();
  d.eigenvalues = fs.eigenvalues;
  d.window = std::move(window);
  d.ortho_residual = fs.ortho_residual;
  const int nu = d.window->size();
  const double inv2h = 1.0 / (2.0 * man.spacing());
  d.values.resize(nu, d.J);
  d.gradients.assign(man.dimension(), Eigen::MatrixXd(nu, d.J));
  for (int u = 0; u < nu; ++u) {
    int x = d.window->indices[u];
    for (int j = 0; j < d.J; ++j) d.values(u, j) = fs.modes(x, j);
    for (int a = 0; a < man.dimension(); ++a) {
      int xp = axis_neighbor(man, x, a, 1), xm = axis_neighbor(man, x, a, -1);
      for (int j = 0; j < d.J; ++j)
        d.gradients[a](u, j) = (fs.modes(xp, j) - fs.modes(xm, j)) * inv2h;
    }
  }
  return d;
}

SpectralData perturb(const DiscreteManifold& man, const SpectralData& data, double delta,
                     std::uint64_t seed) {
  if (delta < 0.0) throw std::invalid_argument("perturb: delta must be >= 0");
  if (delta == 0.0) return data;

  SpectralData out = data;
  out.delta = delta;
  out.seed = seed;
  out.noise_model = "cosine-product";

  const int nu = data.window->size();
  const double h = man.spacing();
  const int last = std::min<double>(data.J, std::floor(1.0 / delta));
  for (int j = 0; j < last; ++j) {
    std::mt19937_64 eng(mix_seed(seed, std::uint64_t(j)));
    out.eigenvalues[j] += delta * 0.99 * (2.0 * next_unit(eng) - 1.0);

    // smooth field psi with sup + Lip <= 0.9 < 1
    int k[2] = {0, 0};
    do {
      for (int a = 0; a < man.dimension(); ++a) k[a] = int(eng() % 3);
    } while (k[0] == 0 && (man.dimension() == 1 || k[1] == 0));
    double theta[2] = {kTwoPi * next_unit(eng), kTwoPi * next_unit(eng)};
    double knorm = std::sqrt(double(k[0] * k[0] + k[1] * k[1]));
    double amp = 0.9 / (1.0 + knorm);
    auto psi = [&](const Point& p) {
      double v = amp;
      for (int a = 0; a < man.dimension(); ++a) v *= std::cos(k[a] * p.x[a] + theta[a]);
      return v;
    };
    for (int u = 0; u < nu; ++u) {
      int x = data.window->indices[u];
      out.values(u, j) += delta * psi(man.coords(x));
      for (int a = 0; a < man.dimension(); ++a) {
        Point pp = man.coords(axis_neighbor(man, x, a, 1));
        Point pm = man.coords(axis_neighbor(man, x, a, -1));
        out.gradients[a](u, j) += delta * (psi(pp) - psi(pm)) / (2.0 * h);
      }
    }
  }
  return out;
}

double estimate_c1(const SpectralData& data) {
  if (data.J < 1) throw std::invalid_argument("estimate_c1: no modes present");
  double c1 = data.values.col(0).minCoeff() - data.delta;
  if (!(c1 > 0.0))
    throw std::runtime_error("estimate_c1: lower bound for phi_1 is not positive");
  return c1;
}

}  // namespace invspec
