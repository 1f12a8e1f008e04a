#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "invspec/control.hpp"
#include "invspec/parallel.hpp"

using namespace invspec;

namespace {
constexpr double kPi = std::numbers::pi;

struct SmallSetup {
  DiscreteManifold man{2, 16};
  ForwardSolution fs;
  std::shared_ptr<Subdomain> window;
  SpectralData data;

  explicit SmallSetup(double amp = 0.0, int J = 24) {
    PotentialField q;
    q.bound = 2.0;
    q.values.resize(std::size_t(man.point_count()));
    for (int x = 0; x < man.point_count(); ++x)
      q.values[std::size_t(x)] = 1.0 + amp * std::cos(man.coords(x).x[0]);
    fs = solve_forward(man, q, J);
    window = std::make_shared<Subdomain>(make_ball_window(man, 0, 3.0));
    data = restrict_to_window(man, fs, window);
  }
};

double random_unit(std::mt19937_64& eng) { return double(eng() >> 11) * 0x1.0p-53; }
}  // namespace

TEST_CASE("wave_eval: single constant mode oscillates as cos t") {
  SmallSetup s;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s.data.J);
  v[0] = 1.0;
  for (double t : {0.0, 0.3, 1.0, 2.5})
    CHECK(wave_eval(s.data, v, 0, t) ==
          doctest::Approx(std::cos(t) / (2.0 * kPi)).epsilon(1e-9));

  // t = 0 reduces to the plain sum, v = 0 to zero
  Eigen::VectorXd w = Eigen::VectorXd::Zero(s.data.J);
  w[0] = 0.4;
  w[3] = -1.1;
  double direct = 0.4 * s.data.values(5, 0) - 1.1 * s.data.values(5, 3);
  CHECK(wave_eval(s.data, w, 5, 0.0) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(wave_eval(s.data, Eigen::VectorXd::Zero(s.data.J), 3, 1.0) == 0.0);
}

TEST_CASE("gram matrix: constant-mode closed form and zero interval") {
  SmallSetup s;
  std::vector<int> cell = s.man.ball_points(0, 0.35);
  double cell_measure = double(cell.size()) * s.man.cell_measure();
  double alpha = 0.8;

  Eigen::MatrixXd a = assemble_gram(s.man, s.data, cell, alpha);
  CHECK(a.rows() == s.data.J);
  // first mode: c^2 + s^2 integrates to 2 alpha, gradient vanishes
  CHECK(a(0, 0) ==
        doctest::Approx(cell_measure / (4.0 * kPi * kPi) * 2.0 * alpha).epsilon(1e-10));

  Eigen::MatrixXd z = assemble_gram(s.man, s.data, cell, 0.0);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(assemble_gram(s.man, s.data, cell, -0.1));
}

TEST_CASE("gram matrix matches a brute-force trapezoid quadrature") {
  SmallSetup s(0.3, 6);
  std::vector<int> cell = s.man.ball_points(s.man.snap(Point{{0.5, 0.2}}), 0.3);
  double alpha = 0.7;
  Eigen::MatrixXd a = assemble_gram(s.man, s.data, cell, alpha);

  // time integral by trapezoid rule with 10^4 steps
  const int steps = 10000;
  double dt = 2.0 * alpha / steps;
  Eigen::MatrixXd brute = Eigen::MatrixXd::Zero(s.data.J, s.data.J);
  for (int step = 0; step <= steps; ++step) {
    double t = -alpha + dt * step;
    double wgt = (step == 0 || step == steps) ? 0.5 : 1.0;
    for (int j = 0; j < s.data.J; ++j)
      for (int l = j; l < s.data.J; ++l) {
        double wj = std::sqrt(std::max(0.0, s.data.eigenvalues[std::size_t(j)]));
        double wl = std::sqrt(std::max(0.0, s.data.eigenvalues[std::size_t(l)]));
        double acc = 0.0;
        for (int x : cell) {
          int u = s.data.window->local[x];
          double cc = std::cos(wj * t) * std::cos(wl * t);
          double ss = std::sin(wj * t) * std::sin(wl * t);
          double grad = s.data.gradients[0](u, j) * s.data.gradients[0](u, l) +
                        s.data.gradients[1](u, j) * s.data.gradients[1](u, l);
          acc += (s.data.values(u, j) * s.data.values(u, l) + grad) * cc +
                 wj * wl * s.data.values(u, j) * s.data.values(u, l) * ss;
        }
        brute(j, l) += wgt * dt * acc * s.man.cell_measure();
      }
  }
  brute = brute.selfadjointView<Eigen::Upper>();
  CHECK((a - brute).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gram matrices are positive semidefinite") {
  SmallSetup s(0.3, 16);
  std::vector<std::vector<int>> cells = {s.man.ball_points(0, 0.3),
                                         s.man.ball_points(s.man.index_of(4, 4), 0.3)};
  std::vector<double> alpha = {0.9, 1.7};
  AdmissibleSetSpec spec = make_admissible_spec(s.man, s.data, cells, alpha, 3.0, 1e-3);
  CHECK(min_gram_eigenvalue(spec) >= -1e-10);
  CHECK(spec.wave_cap[0] == doctest::Approx(1e-6).epsilon(1e-12));  // (eps1)^2 at delta=0
}

TEST_CASE("ellipsoid projection closed forms") {
  // ball projection: u = 2 e1 -> e1
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
  u[0] = 2.0;
  Eigen::VectorXd w = project_ellipsoid(q, 1.0, u);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w.tail(3).norm() < 1e-12);

  // 2 v1^2 + v2^2 <= 1, u = (2,0) -> (1/sqrt(2), 0)
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(2, 2);
  e(0, 0) = 2.0;
  e(1, 1) = 1.0;
  Eigen::VectorXd u2(2);
  u2 << 2.0, 0.0;
  Eigen::VectorXd w2 = project_ellipsoid(e, 1.0, u2);
  CHECK(w2[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
  CHECK(std::fabs(w2[1]) < 1e-12);

  // cross-check against a one-dimensional Lagrange root find
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 0) = 0.5;
  g(1, 1) = 2.5;
  g(2, 2) = 1.0;
  Eigen::VectorXd u3(3);
  u3 << 1.3, -0.8, 0.4;
  double cap = 0.2;
  double lo = 0.0, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    double mu = 0.5 * (lo + hi);
    double val = 0.0;
    for (int i = 0; i < 3; ++i) {
      double d = g(i, i);
      val += d * u3[i] * u3[i] / ((1.0 + mu * d) * (1.0 + mu * d));
    }
    (val > cap ? lo : hi) = mu;
  }
  double mu = 0.5 * (lo + hi);
  Eigen::VectorXd w3 = project_ellipsoid(g, cap, u3);
  for (int i = 0; i < 3; ++i)
    CHECK(w3[i] == doctest::Approx(u3[i] / (1.0 + mu * g(i, i))).epsilon(1e-8));
}

namespace {

AdmissibleSetSpec random_spec(std::mt19937_64& eng, int J, int cells) {
  AdmissibleSetSpec spec;
  spec.J = J;
  spec.l2_cap = 1.0;
  spec.energy_cap = 4.0;
  spec.energy_weights.resize(std::size_t(J));
  for (int j = 0; j < J; ++j) spec.energy_weights[std::size_t(j)] = 0.5 + 3.0 * random_unit(eng);
  spec.alpha.assign(std::size_t(cells), 1.0);
  for (int k = 0; k < cells; ++k) {
    Eigen::MatrixXd g(J, J);
    for (int a = 0; a < J; ++a)
      for (int b = 0; b < J; ++b) g(a, b) = 2.0 * random_unit(eng) - 1.0;
    Eigen::MatrixXd psd = g * g.transpose() / J;
    spec.gram.push_back(std::make_shared<Eigen::MatrixXd>(std::move(psd)));
    spec.wave_cap.push_back(0.05 + 0.2 * random_unit(eng));
  }
  return spec;
}

Eigen::VectorXd random_feasible(std::mt19937_64& eng, const AdmissibleSetSpec& spec) {
  Eigen::VectorXd v(spec.J);
  for (int j = 0; j < spec.J; ++j) v[j] = 2.0 * random_unit(eng) - 1.0;
  double scale = 1.0;
  double q = v.squaredNorm();
  if (q > spec.l2_cap) scale = std::min(scale, std::sqrt(spec.l2_cap / q));
  q = 0.0;
  for (int j = 0; j < spec.J; ++j) q += spec.energy_weights[std::size_t(j)] * v[j] * v[j];
  if (q > spec.energy_cap) scale = std::min(scale, std::sqrt(spec.energy_cap / q));
  for (std::size_t k = 0; k < spec.gram.size(); ++k) {
    q = v.dot(*spec.gram[k] * v);
    if (q > spec.wave_cap[k]) scale = std::min(scale, std::sqrt(spec.wave_cap[k] / q));
  }
  return scale * 0.999 * v;
}

double max_violation(const AdmissibleSetSpec& spec, const Eigen::VectorXd& v) {
  double worst = (v.squaredNorm() - spec.l2_cap) / std::max(1e-30, spec.l2_cap);
  double q = 0.0;
  for (int j = 0; j < spec.J; ++j) q += spec.energy_weights[std::size_t(j)] * v[j] * v[j];
  worst = std::max(worst, (q - spec.energy_cap) / std::max(1e-30, spec.energy_cap));
  for (std::size_t k = 0; k < spec.gram.size(); ++k)
    worst = std::max(worst, (v.dot(*spec.gram[k] * v) - spec.wave_cap[k]) /
                                std::max(1e-30, spec.wave_cap[k]));
  return worst;
}

}  // namespace

TEST_CASE("minimizer: feasible input is returned unchanged") {
  std::mt19937_64 eng(5);
  AdmissibleSetSpec spec = random_spec(eng, 12, 2);
  Eigen::VectorXd u = random_feasible(eng, spec);
  MinimizeResult r = minimize_over_admissible(spec, u);
  CHECK((r.w - u).norm() == 0.0);
}

TEST_CASE("minimizer beats 100 random feasible points and stays feasible") {
  std::mt19937_64 eng(11);
  for (int instance = 0; instance < 4; ++instance) {
    AdmissibleSetSpec spec = random_spec(eng, 20, 3);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(20);
    u[0] = 1.0;
    u[1] = 0.5;
    MinimizeResult r = minimize_over_admissible(spec, u);
    CHECK(r.converged);
    CHECK(max_violation(spec, r.w) <= 1e-8);
    double best = (r.w - u).squaredNorm();
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd v = random_feasible(eng, spec);
      CHECK(best <= (v - u).squaredNorm() + 1e-8);
    }
  }
}

TEST_CASE("dual Newton and Dykstra agree") {
  std::mt19937_64 eng(23);
  for (int instance = 0; instance < 3; ++instance) {
    AdmissibleSetSpec spec = random_spec(eng, 14, 2);
    Eigen::VectorXd u(14);
    for (int j = 0; j < 14; ++j) u[j] = 2.0 * random_unit(eng) - 1.0;
    u *= 2.0;
    MinimizeOptions newton, dykstra;
    dykstra.method = MinimizeOptions::Method::Dykstra;
    MinimizeResult a = minimize_over_admissible(spec, u, newton);
    MinimizeResult b = minimize_over_admissible(spec, u, dykstra);
    CHECK((a.w - b.w).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("iteration cap raises an error carrying the best iterate") {
  std::mt19937_64 eng(31);
  AdmissibleSetSpec spec = random_spec(eng, 16, 3);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(16, 0.7);
  MinimizeOptions opt;
  opt.max_iterations = 1;
  opt.kkt_tol = 1e-14;
  try {
    minimize_over_admissible(spec, u, opt);
    FAIL("expected MinimizeError");
  } catch (const MinimizeError& e) {
    CHECK(e.best_iterate.w.size() == 16);
    CHECK(max_violation(spec, e.best_iterate.w) <= 1e-8);
  }
}

TEST_CASE("objective never decreases when a constraint is added") {
  std::mt19937_64 eng(47);
  AdmissibleSetSpec spec = random_spec(eng, 18, 3);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(18);
  u[0] = 1.0;
  AdmissibleSetSpec fewer = spec;
  fewer.gram.pop_back();
  fewer.wave_cap.pop_back();
  fewer.alpha.pop_back();
  double with_all = (minimize_over_admissible(spec, u).w - u).squaredNorm();
  double with_fewer = (minimize_over_admissible(fewer, u).w - u).squaredNorm();
  CHECK(with_all >= with_fewer - 1e-10);
}

TEST_CASE("oracle mass: grid sums over domains of influence") {
  SmallSetup s;
  std::vector<std::vector<int>> cells = {s.man.ball_points(0, 0.3),
                                         s.man.ball_points(100, 0.3)};
  std::vector<std::vector<double>> fields;
  for (const auto& cell : cells) {
    std::vector<double> f(std::size_t(s.man.point_count()));
    for (int x = 0; x < s.man.point_count(); ++x)
      f[std::size_t(x)] = s.man.distance_to_cell(x, cell);
    fields.push_back(std::move(f));
  }
  std::vector<double> w(std::size_t(s.man.point_count()));
  for (int x = 0; x < s.man.point_count(); ++x) {
    double phi = s.fs.modes(x, 0);
    w[std::size_t(x)] = phi * phi * s.man.cell_measure();
  }
  OracleMass mass(fields, w);

  CHECK(mass.domain_mass(SparseAlpha{}) == 0.0);

  // full manifold: the normalization gives exactly 1
  SparseAlpha full;
  full.entries = {{0, s.man.diameter() + 1.0}};
  CHECK(mass.domain_mass(full) == doctest::Approx(1.0).epsilon(1e-10));

  // constant phi_1: mass of a region is vol / (4 pi^2)
  SparseAlpha ball;
  ball.entries = {{1, 0.8}};
  double vol = 0.0;
  for (int x = 0; x < s.man.point_count(); ++x)
    if (fields[1][std::size_t(x)] < 0.8) vol += s.man.cell_measure();
  CHECK(mass.domain_mass(ball) == doctest::Approx(vol / (4.0 * kPi * kPi)).epsilon(1e-10));
}

TEST_CASE("memo mass caches and persists") {
  SmallSetup s;
  std::vector<std::vector<double>> fields(1);
  fields[0].resize(std::size_t(s.man.point_count()));
  for (int x = 0; x < s.man.point_count(); ++x)
    fields[0][std::size_t(x)] = s.man.distance(x, 0);
  std::vector<double> w(std::size_t(s.man.point_count()), s.man.cell_measure());
  OracleMass inner(fields, w);
  MemoMass memo(inner);

  SparseAlpha a;
  a.entries = {{0, 1.0}};
  double v1 = memo.domain_mass(a);
  CHECK(memo.size() == 1);
  // concurrent hammering on the same keys stays consistent
  parallel_for(64, 4, [&](int i) {
    SparseAlpha k;
    k.entries = {{0, 1.0 + (i % 8) * 0.1}};
    memo.domain_mass(k);
  });
  CHECK(memo.size() == 8);
  CHECK(memo.domain_mass(a) == v1);

  std::string path = "/tmp/invspec_memo_test.bin";
  memo.save(path, 1234);
  OracleMass inner2(fields, w);
  MemoMass memo2(inner2);
  CHECK(!memo2.load(path, 999));  // wrong scenario hash
  CHECK(memo2.load(path, 1234));
  CHECK(memo2.size() == 8);
  CHECK(memo2.domain_mass(a) == v1);
}

TEST_CASE("cutoff mass: unconstrained target passes through, masses stay bounded") {
  SmallSetup s(0.0, 20);
  std::vector<std::vector<int>> cells = {s.man.ball_points(0, 0.3)};
  Eigen::VectorXd u = Eigen::VectorXd::Zero(20);
  u[0] = 1.0;
  CutoffMass mass(s.man, s.data, cells, u, 3.0, 1e-3);

  // alpha empty: no wave constraint, e1 is feasible, so b = 0
  CHECK(mass.domain_mass(SparseAlpha{}) == 0.0);

  SparseAlpha a;
  a.entries = {{0, 2.0}};
  double v = mass.domain_mass(a);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0 + 1e-9);
}
