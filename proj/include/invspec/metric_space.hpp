#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "invspec/geometry.hpp"
#include "invspec/slicing.hpp"

namespace invspec {

/// Catalog entries with the reconstructed distance matrix. Entry 0 is the
/// base point; the inner net comes first, then one entry per accepted
/// tau-class. Provenance letters: 'e' exact inner pair, 'a' anchor edge,
/// 'l' local edge, 'p' multi-hop path, '0' diagonal.
struct FiniteMetricSpace {
  std::vector<std::string> labels;
  std::vector<int> kind;  // 0 inner, 1 outer
  std::vector<int> ref;   // inner: index into catalog.inner; outer: into catalog.outer
  Eigen::MatrixXd dhat;
  std::vector<std::vector<char>> provenance;

  int size() const { return int(labels.size()); }
  int inner_count = 0;
};

struct MetricConfig {
  double local_gate = 0.0;   // R; 0 selects the default eps^{1/8}
  double anchor_pad = -1.0;  // < 0 selects the default eps/2
  double local_pad = -1.0;   // < 0 selects the default eps
};

/// Coordinate vector of a catalog entry: beta_k * eps for outer entries,
/// exact d(xi, z_k) on the given metric for inner ones.
std::vector<double> distance_coordinates(const DiscreteManifold& man,
                                         const CellPartition& part,
                                         const SliceCatalog& cat, int kind, int ref);

/// Anchored path-metric estimator: exact inner-pair distances, anchor edges
/// through the inner net, local edges between coordinate-close entries, then
/// all-pairs shortest path. Throws when the graph is disconnected.
FiniteMetricSpace build_metric(const DiscreteManifold& man, const CellPartition& part,
                               const SliceCatalog& cat, const MetricConfig& cfg = {});

}  // namespace invspec
