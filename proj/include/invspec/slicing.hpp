#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "invspec/control.hpp"
#include "invspec/geometry.hpp"

namespace invspec {

/// Net points and the cell partition of the data ball: z_1..z_N is a maximal
/// eps/2-separated set in B(p, r0/2) whose first L points form a maximal
/// r_l-separated set; cells are Voronoi regions of the net inside
/// B(p, 3r0/4), trimmed to diameter <= eps. Also carries the inner eps-net
/// Gamma_eps of B(p, r0) with the base point first.
struct CellPartition {
  int base_point = 0;
  double r0 = 0.0;
  double eps = 0.0;
  double r_l = 0.0;
  std::vector<int> net;                  // grid indices, anchors first
  int anchor_count = 0;                  // L
  std::vector<std::vector<int>> cells;   // U_k grid indices
  std::vector<std::vector<double>> cell_distance;  // d(x, U_k) per cell
  std::vector<int> inner_net;            // Gamma_eps, [0] = base point
  std::vector<std::string> warnings;

  int cell_count() const { return int(cells.size()); }
};

struct PartitionLimits {
  int max_anchors = 6;  // inclusion-exclusion term count grows as 4^(L+1)
};

CellPartition build_partition(const DiscreteManifold& man, int base_point, double r0,
                              double eps, double r_l, const PartitionLimits& lim = {});

enum class SliceVariant { Star, Eps };

// half-open distance windows of the slicing; shared by membership tests and
// the functional expansion so memo keys stay bit-identical
double slice_lo(int beta_k, double eps, SliceVariant v);
double slice_hi(int beta_k, double eps, SliceVariant v);
int beta_of(double distance, double eps);  // floor(d/eps) + 1

/// beta is dense over cells, entry 0 meaning inactive.
bool slice_membership(const CellPartition& part, std::span<const int> beta, SliceVariant v,
                      int x);
std::vector<int> slice_points(const CellPartition& part, std::span<const int> beta,
                              SliceVariant v);

/// L^a of a slice through the double inclusion-exclusion over domains of
/// influence; every union is one M_alpha handed to the mass functional.
double slice_functional(MassFunctional& mass, const CellPartition& part,
                        std::span<const int> beta, SliceVariant v);

struct OuterEntry {
  std::vector<int> tau;                    // anchor coordinates (length L)
  std::vector<int> rep_beta;               // representative full multi-index
  std::vector<std::vector<int>> extensions;  // accepted beta_l per non-anchor cell
  std::vector<double> acceptance;            // criterion value of rep per non-anchor cell
};

struct SliceCatalog {
  int anchor_count = 0;
  int cell_count = 0;
  double eps = 0.0;
  double c1 = 0.0;
  double c_star = 0.0;
  double threshold = 0.0;  // c_star * eps^(2n)
  std::string mode;
  std::vector<OuterEntry> outer;
  std::vector<int> inner;  // grid indices, [0] = base point
  std::int64_t evaluations = 0;

  // dense multi-index of entry i reduced to tau (anchors only)
  std::vector<int> tau_dense(int i) const;
};

struct CatalogConfig {
  double c1 = 0.0;          // certified lower bound for phi_1
  double sigma = 0.0;       // informational; 0 in oracle mode
  bool blind_enumeration = false;  // false: grid-profile candidates (oracle-assisted)
  int threads = 1;
  std::int64_t evaluation_budget = 40'000'000;
};

SliceCatalog build_catalog(MassFunctional& mass, const DiscreteManifold& man,
                           const CellPartition& part, const CatalogConfig& cfg);

}  // namespace invspec
