#include <doctest.h>

#include <cmath>
#include <numbers>

#include "invspec/spectra.hpp"

using namespace invspec;

namespace {
constexpr double kPi = std::numbers::pi;

PotentialField constant_q(const DiscreteManifold& man, double value, double bound = 2.0) {
  PotentialField q;
  q.values.assign(std::size_t(man.point_count()), value);
  q.bound = bound;
  return q;
}

PotentialField cosine_q(const DiscreteManifold& man, double amp) {
  PotentialField q;
  q.bound = 2.0;
  q.values.resize(std::size_t(man.point_count()));
  for (int x = 0; x < man.point_count(); ++x)
    q.values[std::size_t(x)] = 1.0 + amp * std::cos(man.coords(x).x[0]);
  return q;
}
}  // namespace

TEST_CASE("potential validation enforces the normalization") {
  DiscreteManifold man(2, 16);
  CHECK_NOTHROW(validate_potential(man, cosine_q(man, 0.3)));

  PotentialField low = constant_q(man, 0.4);  // below 1/C0
  CHECK_THROWS(validate_potential(man, low));

  PotentialField steep;  // Lipschitz seminorm above C0
  steep.bound = 2.0;
  steep.values.assign(std::size_t(man.point_count()), 1.0);
  steep.values[0] = 1.9;
  CHECK_THROWS(validate_potential(man, steep));
}

TEST_CASE("constant potential: exact ground state and stencil eigenvalue") {
  DiscreteManifold man(2, 24);
  ForwardSolution fs = solve_forward(man, constant_q(man, 1.0), 12);

  CHECK(fs.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-11));
  for (int x = 0; x < man.point_count(); x += 5)
    CHECK(fs.modes(x, 0) == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-10));

  double h = man.spacing();
  double stencil = 1.0 + (2.0 - 2.0 * std::cos(h)) / (h * h);
  CHECK(fs.eigenvalues[1] == doctest::Approx(stencil).epsilon(1e-12));

  // modes cos x1, sin x1, cos x2, sin x2 share the eigenvalue
  CHECK(fs.eigenvalues[4] == doctest::Approx(stencil).epsilon(1e-12));
  CHECK(fs.eigenvalues[5] > stencil + 1e-6);
}

TEST_CASE("one-dimensional model") {
  DiscreteManifold man(1, 40);
  ForwardSolution fs = solve_forward(man, constant_q(man, 1.0), 5);
  CHECK(fs.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(fs.modes(3, 0) == doctest::Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-10));
}

TEST_CASE("orthonormality, Rayleigh identity, Weyl trend") {
  DiscreteManifold man(2, 20);
  PotentialField q = cosine_q(man, 0.3);
  ForwardSolution fs = solve_forward(man, q, 60);

  CHECK(fs.ortho_residual <= 1e-9);
  for (int j = 0; j < fs.mode_count(); ++j) CHECK(rayleigh_residual(man, q, fs, j) <= 1e-8);
  for (int j = 1; j < fs.mode_count(); ++j) CHECK(fs.eigenvalues[j] >= fs.eigenvalues[j - 1]);
  CHECK(fs.eigenvalues[59] > fs.eigenvalues[9]);
  CHECK(fs.modes.col(0).minCoeff() > 0.0);
}

TEST_CASE("window restriction carries values and centered gradients") {
  DiscreteManifold man(2, 24);
  ForwardSolution fs = solve_forward(man, constant_q(man, 1.0), 6);
  auto window = std::make_shared<Subdomain>(make_ball_window(man, 0, 2.0));
  SpectralData data = restrict_to_window(man, fs, window);

  CHECK(data.J == 6);
  CHECK(data.window->size() > 10);
  for (int u = 0; u < data.window->size(); u += 3) {
    CHECK(data.values(u, 0) == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-10));
    CHECK(data.gradients[0](u, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("perturbation honors the closeness contract") {
  DiscreteManifold man(2, 20);
  ForwardSolution fs = solve_forward(man, cosine_q(man, 0.3), 30);
  auto window = std::make_shared<Subdomain>(make_ball_window(man, 0, 2.5));
  SpectralData exact = restrict_to_window(man, fs, window);

  SUBCASE("delta = 0 returns the input bit for bit") {
    SpectralData same = perturb(man, exact, 0.0, 99);
    CHECK(same.values == exact.values);
    CHECK(same.eigenvalues == exact.eigenvalues);
    CHECK(same.delta == 0.0);
  }

  SUBCASE("per-mode residuals stay below delta") {
    for (double delta : {1e-4, 1e-3, 1e-2}) {
      SpectralData noisy = perturb(man, exact, delta, 42);
      int last = std::min<double>(exact.J, std::floor(1.0 / delta));
      for (int j = 0; j < last; ++j) {
        CHECK(std::fabs(noisy.eigenvalues[j] - exact.eigenvalues[j]) < delta);
        // C^{0,1} norm of the difference on the window
        double sup = 0.0, lip = 0.0;
        for (int u = 0; u < exact.window->size(); ++u)
          sup = std::max(sup, std::fabs(noisy.values(u, j) - exact.values(u, j)));
        for (int u = 0; u < exact.window->size(); ++u) {
          int x = exact.window->indices[std::size_t(u)];
          for (int v = u + 1; v < exact.window->size(); ++v) {
            int y = exact.window->indices[std::size_t(v)];
            double d = man.distance(x, y);
            if (d > 1.5 * man.spacing()) continue;
            double jump = std::fabs((noisy.values(u, j) - exact.values(u, j)) -
                                    (noisy.values(v, j) - exact.values(v, j)));
            lip = std::max(lip, jump / d);
          }
        }
        CHECK(sup + lip < delta);
      }
    }
  }

  SUBCASE("same seed gives identical output") {
    SpectralData a = perturb(man, exact, 1e-3, 31);
    SpectralData b = perturb(man, exact, 1e-3, 31);
    CHECK(a.values == b.values);
    CHECK(a.eigenvalues == b.eigenvalues);
    SpectralData c = perturb(man, exact, 1e-3, 32);
    CHECK(c.values != a.values);
  }
}

TEST_CASE("c1 estimate") {
  DiscreteManifold man(2, 20);
  ForwardSolution fs = solve_forward(man, constant_q(man, 1.0), 4);
  auto window = std::make_shared<Subdomain>(make_ball_window(man, 0, 2.0));
  SpectralData data = restrict_to_window(man, fs, window);

  CHECK(estimate_c1(data) == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-10));

  SpectralData degenerate = data;
  degenerate.delta = 1.0;  // delta >= min phi_1
  CHECK_THROWS(estimate_c1(degenerate));
}

TEST_CASE("cluster rotations keep the basis orthonormal") {
  DiscreteManifold man(2, 20);
  ForwardSolution fs = solve_forward(man, constant_q(man, 1.0), 10);
  ForwardSolution rotated = fs;
  apply_cluster_rotations(rotated, 17);

  CHECK(orthonormality_residual(man, rotated) <= 1e-9);
  // the simple ground mode is untouched
  CHECK(rotated.modes.col(0) == fs.modes.col(0));
  // degenerate block actually mixed
  CHECK((rotated.modes.col(1) - fs.modes.col(1)).norm() > 1e-6);
  PotentialField q = constant_q(man, 1.0);
  for (int j = 0; j < 10; ++j) CHECK(rayleigh_residual(man, q, rotated, j) <= 1e-8);
}
