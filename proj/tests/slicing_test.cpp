#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "invspec/control.hpp"
#include "invspec/slicing.hpp"
#include "invspec/spectra.hpp"

using namespace invspec;

namespace {
constexpr double kPi = std::numbers::pi;

struct SliceSetup {
  DiscreteManifold man{2, 32};
  ForwardSolution fs;
  CellPartition part;
  std::vector<double> weights;  // phi_1^2 h^n

  explicit SliceSetup(double amp = 0.0, double r0 = 0.6, double eps = 0.3, double r_l = 0.3) {
    PotentialField q;
    q.bound = 2.0;
    q.values.resize(std::size_t(man.point_count()));
    for (int x = 0; x < man.point_count(); ++x)
      q.values[std::size_t(x)] = 1.0 + amp * std::cos(man.coords(x).x[0]);
    fs = solve_forward(man, q, 8);
    part = build_partition(man, 0, r0, eps, r_l);
    weights.resize(std::size_t(man.point_count()));
    for (int x = 0; x < man.point_count(); ++x) {
      double phi = fs.modes(x, 0);
      weights[std::size_t(x)] = phi * phi * man.cell_measure();
    }
  }

  OracleMass oracle() const { return OracleMass(part.cell_distance, weights); }

  double direct_sum(std::span<const int> beta, SliceVariant v) const {
    double s = 0.0;
    for (int x = 0; x < man.point_count(); ++x)
      if (slice_membership(part, beta, v, x)) s += weights[std::size_t(x)];
    return s;
  }
};
}  // namespace

TEST_CASE("partition: nets, cells and covering on the baseline geometry") {
  DiscreteManifold man(2, 64);
  CellPartition part = build_partition(man, 0, 0.6, 0.3, 0.3);

  CHECK(part.anchor_count >= 1);
  CHECK(part.anchor_count <= 6);
  CHECK(part.cell_count() > part.anchor_count);

  // anchors r_l-separated, net eps/2-separated, all in B(p, r0/2)
  for (int a = 0; a < part.cell_count(); ++a) {
    CHECK(man.distance(part.net[std::size_t(a)], 0) < 0.3);
    for (int b = a + 1; b < part.cell_count(); ++b) {
      double d = man.distance(part.net[std::size_t(a)], part.net[std::size_t(b)]);
      CHECK(d >= 0.15 - 1e-12);
      if (b < part.anchor_count) CHECK(d >= 0.3 - 1e-12);
    }
  }

  // cells: disjoint, diameter <= eps, inside B(p, 3 r0/4), covering B(p, r0/2)
  std::vector<int> owner(std::size_t(man.point_count()), -1);
  for (int k = 0; k < part.cell_count(); ++k)
    for (int x : part.cells[std::size_t(k)]) {
      CHECK(owner[std::size_t(x)] == -1);
      owner[std::size_t(x)] = k;
      CHECK(man.distance(x, 0) < 0.45 + 1e-12);
    }
  for (int k = 0; k < part.cell_count(); ++k)
    for (int x : part.cells[std::size_t(k)])
      for (int y : part.cells[std::size_t(k)]) CHECK(man.distance(x, y) <= 0.3 + 1e-12);
  for (int x = 0; x < man.point_count(); ++x)
    if (man.distance(x, 0) < 0.3) CHECK(owner[std::size_t(x)] >= 0);

  // each cell holds the eps/4 ball around its net point
  for (int k = 0; k < part.cell_count(); ++k)
    for (int y : man.ball_points(part.net[std::size_t(k)], 0.075))
      CHECK(owner[std::size_t(y)] == k);

  // inner net: contains p first, eps-separated, covers B(p, r0)
  CHECK(part.inner_net[0] == 0);
  for (std::size_t a = 0; a < part.inner_net.size(); ++a)
    for (std::size_t b = a + 1; b < part.inner_net.size(); ++b)
      CHECK(man.distance(part.inner_net[a], part.inner_net[b]) >= 0.3 - 1e-12);
  for (int x : man.ball_points(0, 0.6)) {
    double best = 1e9;
    for (int z : part.inner_net) best = std::min(best, man.distance(x, z));
    CHECK(best < 0.3 + 1e-12);
  }

  // determinism
  CellPartition again = build_partition(man, 0, 0.6, 0.3, 0.3);
  CHECK(again.net == part.net);
  CHECK(again.cells == part.cells);
  CHECK(again.inner_net == part.inner_net);
}

TEST_CASE("partition rejects degenerate inputs") {
  DiscreteManifold man(2, 32);
  CHECK_THROWS(build_partition(man, 0, 0.6, 1.2, 0.6));   // eps >= r0
  CHECK_THROWS(build_partition(man, 0, 0.6, 0.3, 0.1));   // r_l < eps/2
  CHECK_THROWS(build_partition(man, 0, 0.6, 0.3, 0.16, PartitionLimits{1}));  // anchor cap
}

TEST_CASE("slice membership windows") {
  SliceSetup s;
  const int N = s.part.cell_count();

  // beta from the distance profile is a member of its own star slice
  std::mt19937_64 eng(3);
  for (int trial = 0; trial < 50; ++trial) {
    int x = int(eng() % std::uint64_t(s.man.point_count()));
    if (s.man.distance(x, 0) < 0.6) continue;
    std::vector<int> beta(N);
    for (int k = 0; k < N; ++k)
      beta[std::size_t(k)] = beta_of(s.part.cell_distance[std::size_t(k)][std::size_t(x)], 0.3);
    CHECK(slice_membership(s.part, beta, SliceVariant::Star, x));
    CHECK(slice_membership(s.part, beta, SliceVariant::Eps, x));  // star subset of eps

    // star slices for beta differing in one coordinate are disjoint
    std::vector<int> other = beta;
    other[0] += 1;
    CHECK(!slice_membership(s.part, other, SliceVariant::Star, x));
  }

  // explicit containment: every star point is an eps point
  std::vector<int> beta(N, 0);
  beta[0] = 4;
  beta[1] = 4;
  auto star = slice_points(s.part, beta, SliceVariant::Star);
  for (int x : star) CHECK(slice_membership(s.part, beta, SliceVariant::Eps, x));
}

TEST_CASE("slice functional equals the direct grid sum through the expansion") {
  SliceSetup s(0.3);
  OracleMass oracle = s.oracle();
  MemoMass memo(oracle);
  const int N = s.part.cell_count();

  // single active cell: annulus difference of two domains of influence
  {
    std::vector<int> beta(N, 0);
    beta[2] = 5;
    double lo = slice_lo(5, 0.3, SliceVariant::Star), hi = slice_hi(5, 0.3, SliceVariant::Star);
    SparseAlpha a, b;
    a.entries = {{2, lo}};
    b.entries = {{2, hi}};
    double expanded = slice_functional(memo, s.part, beta, SliceVariant::Star);
    CHECK(expanded ==
          doctest::Approx(memo.domain_mass(b) - memo.domain_mass(a)).epsilon(1e-12));
    CHECK(expanded == doctest::Approx(s.direct_sum(beta, SliceVariant::Star)).epsilon(1e-10));
  }

  // random multi-indices, both variants, against the brute-force oracle
  std::mt19937_64 eng(17);
  int nontrivial = 0;
  for (int trial = 0; trial < 40; ++trial) {
    int x = int(eng() % std::uint64_t(s.man.point_count()));
    std::vector<int> beta(N, 0);
    int active = 1 + int(eng() % 4ull);
    for (int pick = 0; pick < active; ++pick) {
      int k = int(eng() % std::uint64_t(N));
      beta[std::size_t(k)] = beta_of(s.part.cell_distance[std::size_t(k)][std::size_t(x)], 0.3);
    }
    bool any = false;
    for (int v : beta) any = any || v > 0;
    if (!any) continue;
    for (SliceVariant v : {SliceVariant::Star, SliceVariant::Eps}) {
      double direct = s.direct_sum(beta, v);
      double expanded = slice_functional(memo, s.part, beta, v);
      CHECK(std::fabs(expanded - direct) < 1e-11);
      if (direct > 1e-6) ++nontrivial;
    }
  }
  CHECK(nontrivial > 10);

  // all radii far beyond the diameter: the slice covers everything,
  // so for constant phi_1 the value is vol / (4 pi^2) of the whole torus = 1
  SliceSetup flat;
  OracleMass oracle2 = flat.oracle();
  std::vector<int> huge(std::size_t(flat.part.cell_count()), 0);
  huge[0] = int(flat.man.diameter() / 0.3) + 3;
  double big = slice_lo(huge[0], 0.3, SliceVariant::Star);
  CHECK(big > flat.man.diameter());
  // an annulus entirely beyond the diameter is empty
  MemoMass memo2(oracle2);
  CHECK(slice_functional(memo2, flat.part, huge, SliceVariant::Star) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("catalog on the oracle route: coverage, proximity inputs, determinism") {
  SliceSetup s;  // q = 1, m = 32, r0 = 0.6, eps = 0.3
  OracleMass oracle = s.oracle();
  MemoMass memo(oracle);
  CatalogConfig cfg;
  cfg.c1 = 1.0 / (2.0 * kPi);
  cfg.threads = 2;
  SliceCatalog cat = build_catalog(memo, s.man, s.part, cfg);

  CHECK(cat.outer.size() > 10);
  CHECK(cat.inner.size() >= 1);
  CHECK(cat.inner[0] == 0);
  CHECK(cat.threshold == doctest::Approx(0.5 * cfg.c1 * cfg.c1 * (kPi / 4.0) *
                                         std::pow(0.3, 4)));

  // tau classes are pairwise distinct and their star slices partition the far set
  std::set<std::vector<int>> taus;
  for (const auto& e : cat.outer) CHECK(taus.insert(e.tau).second);

  std::vector<int> hits(std::size_t(s.man.point_count()), 0);
  for (int i = 0; i < int(cat.outer.size()); ++i) {
    std::vector<int> beta = cat.tau_dense(i);
    for (int y : slice_points(s.part, beta, SliceVariant::Star)) ++hits[std::size_t(y)];
  }
  for (int y = 0; y < s.man.point_count(); ++y) {
    if (s.man.distance(y, 0) < 0.6) continue;
    CHECK(hits[std::size_t(y)] == 1);
  }

  // every grid point's full profile is accepted: tau present and each
  // beta_l(y) among the accepted extensions
  const int L = cat.anchor_count, N = cat.cell_count;
  for (int y = 0; y < s.man.point_count(); ++y) {
    if (s.man.distance(y, 0) < 0.6) continue;
    std::vector<int> tau(L);
    for (int k = 0; k < L; ++k)
      tau[std::size_t(k)] = beta_of(s.part.cell_distance[std::size_t(k)][std::size_t(y)], 0.3);
    auto it = std::find_if(cat.outer.begin(), cat.outer.end(),
                           [&](const OuterEntry& e) { return e.tau == tau; });
    REQUIRE(it != cat.outer.end());
    for (int l = L; l < N; ++l) {
      int bl = beta_of(s.part.cell_distance[std::size_t(l)][std::size_t(y)], 0.3);
      const auto& ext = it->extensions[std::size_t(l - L)];
      CHECK(std::find(ext.begin(), ext.end(), bl) != ext.end());
    }
  }

  // I_L bound from the far-field count
  double bound = std::pow(s.man.diameter() / 0.3, L);
  CHECK(double(cat.outer.size()) <= bound);

  // determinism under a different thread count
  CatalogConfig cfg1 = cfg;
  cfg1.threads = 1;
  MemoMass memo1(oracle);
  SliceCatalog cat1 = build_catalog(memo1, s.man, s.part, cfg1);
  REQUIRE(cat1.outer.size() == cat.outer.size());
  for (std::size_t i = 0; i < cat.outer.size(); ++i) {
    CHECK(cat1.outer[i].tau == cat.outer[i].tau);
    CHECK(cat1.outer[i].rep_beta == cat.outer[i].rep_beta);
  }
}

TEST_CASE("blind enumeration finds the oracle catalog when fed oracle masses") {
  SliceSetup s;
  OracleMass oracle = s.oracle();
  CatalogConfig cfg;
  cfg.c1 = 1.0 / (2.0 * kPi);
  cfg.threads = 2;

  MemoMass memo_a(oracle);
  SliceCatalog profiles = build_catalog(memo_a, s.man, s.part, cfg);

  cfg.blind_enumeration = true;
  MemoMass memo_b(oracle);
  SliceCatalog blind = build_catalog(memo_b, s.man, s.part, cfg);

  // the blind DFS must find every tau the profile route accepts
  std::set<std::vector<int>> blind_taus;
  for (const auto& e : blind.outer) blind_taus.insert(e.tau);
  for (const auto& e : profiles.outer) CHECK(blind_taus.count(e.tau) == 1);
}
