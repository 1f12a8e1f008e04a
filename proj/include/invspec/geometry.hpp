#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace invspec {

// Point on the flat torus (R/2piZ)^n; only the first n coordinates are used.
struct Point {
  std::array<double, 2> x{0.0, 0.0};
};

/// Grid model of the flat square torus (R/2piZ)^n, n in {1,2}.
///
/// Grid points sit at integer multiples of the spacing h = 2pi/m and carry
/// measure weight h^n (midpoint rule). Distances and ball volumes are exact
/// for the model, which makes the class usable as ground truth for every
/// later reconstruction stage.
class DiscreteManifold {
public:
  DiscreteManifold(int dimension, int resolution);

  int dimension() const { return dim_; }
  int resolution() const { return m_; }
  double spacing() const { return h_; }
  double cell_measure() const { return weight_; }
  int point_count() const { return count_; }
  double total_measure() const;
  double diameter() const;            // pi * sqrt(n)
  double injectivity_radius() const;  // pi

  Point coords(int index) const;
  std::array<int, 2> lattice(int index) const;
  int index_of(int i0, int i1 = 0) const;
  int snap(const Point& p) const;  // nearest grid point, ties toward lower index

  // Exact torus distance between grid points: h * sqrt(sum min(|di|, m-|di|)^2).
  double distance(int a, int b) const;
  double distance(const Point& a, const Point& b) const;

  // min over the cell's grid points of the point distance
  double distance_to_cell(int x, std::span<const int> cell) const;

  // Measure of the open ball B(x,r) as a grid sum. Throws when r >= the
  // injectivity radius, where comparison with nu_n r^n stops making sense.
  double ball_measure(int center, double radius) const;
  // Same sum without the injectivity guard (r may exceed the diameter).
  double measure_within(int center, double radius) const;

  // Grid points x with d(x,center) < radius, ascending index order.
  std::vector<int> ball_points(int center, double radius) const;

private:
  int dim_;
  int m_;
  double h_;
  double weight_;
  int count_;
};

/// Membership test domain: a metric ball or a domain of influence
/// M_alpha = union over cells of { x : d(x, U_k) < alpha_k }.
struct RegionSpec {
  enum class Kind { Ball, DomainOfInfluence };
  Kind kind = Kind::Ball;

  int center = 0;       // ball only
  double radius = 0.0;  // ball only

  std::vector<std::vector<int>> cells;  // domain of influence only
  std::vector<double> alpha;            // alpha_k = 0 deactivates cell k

  static RegionSpec ball(int center, double radius);
  static RegionSpec influence(std::vector<std::vector<int>> cells,
                              std::vector<double> alpha);
};

bool region_indicator(const DiscreteManifold& man, const RegionSpec& spec, int x);

// volume of the unit ball in R^n
double unit_ball_volume(int n);

}  // namespace invspec
