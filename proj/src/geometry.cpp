#include "invspec/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace invspec {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_delta(double d) {
  // reduce a coordinate difference to [0, pi]
  d = std::fmod(std::fabs(d), kTwoPi);
  return std::min(d, kTwoPi - d);
}
}  // namespace

DiscreteManifold::DiscreteManifold(int dimension, int resolution)
    : dim_(dimension), m_(resolution) {
  if (dim_ < 1 || dim_ > 2)
    throw std::invalid_argument("DiscreteManifold: dimension must be 1 or 2");
  if (m_ < 3) throw std::invalid_argument("DiscreteManifold: resolution must be >= 3");
  h_ = kTwoPi / m_;
  weight_ = std::pow(h_, dim_);
  count_ = 1;
  for (int a = 0; a < dim_; ++a) count_ *= m_;
}

double DiscreteManifold::total_measure() const { return std::pow(kTwoPi, dim_); }

double DiscreteManifold::diameter() const { return std::numbers::pi * std::sqrt(double(dim_)); }

double DiscreteManifold::injectivity_radius() const { return std::numbers::pi; }

Point DiscreteManifold::coords(int index) const {
  Point p;
  p.x[0] = (index % m_) * h_;
  if (dim_ == 2) p.x[1] = (index / m_) * h_;
  return p;
}

std::array<int, 2> DiscreteManifold::lattice(int index) const {
  return {index % m_, dim_ == 2 ? index / m_ : 0};
}

int DiscreteManifold::index_of(int i0, int i1) const {
  auto wrap = [this](int i) { return ((i % m_) + m_) % m_; };
  return wrap(i0) + (dim_ == 2 ? m_ * wrap(i1) : 0);
}

int DiscreteManifold::snap(const Point& p) const {
  int idx[2] = {0, 0};
  for (int a = 0; a < dim_; ++a) {
    double u = p.x[a] / h_;
    int i = int(std::lround(u));
    idx[a] = ((i % m_) + m_) % m_;
  }
  return index_of(idx[0], idx[1]);
}

double DiscreteManifold::distance(int a, int b) const {
  auto la = lattice(a), lb = lattice(b);
  double s = 0.0;
  for (int ax = 0; ax < dim_; ++ax) {
    int d = std::abs(la[ax] - lb[ax]);
    d = std::min(d, m_ - d);
    s += double(d) * double(d);
  }
  return h_ * std::sqrt(s);
}

double DiscreteManifold::distance(const Point& a, const Point& b) const {
  double s = 0.0;
  for (int ax = 0; ax < dim_; ++ax) {
    double d = wrap_delta(a.x[ax] - b.x[ax]);
    s += d * d;
  }
  return std::sqrt(s);
}

double DiscreteManifold::distance_to_cell(int x, std::span<const int> cell) const {
  double best = std::numeric_limits<double>::infinity();
  for (int y : cell) best = std::min(best, distance(x, y));
  return best;
}

double DiscreteManifold::measure_within(int center, double radius) const {
  if (radius <= 0.0) return 0.0;
  auto lc = lattice(center);
  double r2 = radius * radius;
  const double h2 = h_ * h_;
  long hits = 0;
  if (dim_ == 1) {
    for (int i = 0; i < m_; ++i) {
      int d = std::abs(i - lc[0]);
      d = std::min(d, m_ - d);
      if (h2 * d * d < r2) ++hits;
    }
  } else {
    for (int j = 0; j < m_; ++j) {
      int dj = std::abs(j - lc[1]);
      dj = std::min(dj, m_ - dj);
      for (int i = 0; i < m_; ++i) {
        int di = std::abs(i - lc[0]);
        di = std::min(di, m_ - di);
        if (h2 * (double(di) * di + double(dj) * dj) < r2) ++hits;
      }
    }
  }
  return double(hits) * weight_;
}

double DiscreteManifold::ball_measure(int center, double radius) const {
  if (radius <= 0.0) throw std::invalid_argument("ball_measure: radius must be positive");
  if (radius >= injectivity_radius())
    throw std::invalid_argument("ball_measure: radius reaches the injectivity radius");
  return measure_within(center, radius);
}

std::vector<int> DiscreteManifold::ball_points(int center, double radius) const {
  std::vector<int> out;
  for (int x = 0; x < count_; ++x)
    if (distance(x, center) < radius) out.push_back(x);
  return out;
}

RegionSpec RegionSpec::ball(int center, double radius) {
  RegionSpec s;
  s.kind = Kind::Ball;
  s.center = center;
  s.radius = radius;
  return s;
}

RegionSpec RegionSpec::influence(std::vector<std::vector<int>> cells,
                                 std::vector<double> alpha) {
  if (cells.size() != alpha.size())
    throw std::invalid_argument("RegionSpec: one radius per cell required");
  RegionSpec s;
  s.kind = Kind::DomainOfInfluence;
  s.cells = std::move(cells);
  s.alpha = std::move(alpha);
  return s;
}

bool region_indicator(const DiscreteManifold& man, const RegionSpec& spec, int x) {
  if (spec.kind == RegionSpec::Kind::Ball) return man.distance(x, spec.center) < spec.radius;
  for (std::size_t k = 0; k < spec.cells.size(); ++k) {
    if (spec.alpha[k] <= 0.0) continue;
    if (man.distance_to_cell(x, spec.cells[k]) < spec.alpha[k]) return true;
  }
  return false;
}

double unit_ball_volume(int n) {
  // pi^{n/2} / Gamma(n/2 + 1)
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

}  // namespace invspec
