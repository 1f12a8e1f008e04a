#include "invspec/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace invspec {

std::vector<double> distance_coordinates(const DiscreteManifold& man,
                                         const CellPartition& part,
                                         const SliceCatalog& cat, int kind, int ref) {
  const int N = part.cell_count();
  std::vector<double> coords(N);
  if (kind == 0) {
    int xi = cat.inner[std::size_t(ref)];
    for (int k = 0; k < N; ++k) coords[k] = man.distance(xi, part.net[k]);
  } else {
    const OuterEntry& e = cat.outer[std::size_t(ref)];
    for (int k = 0; k < N; ++k) coords[k] = double(e.rep_beta[k]) * part.eps;
  }
  return coords;
}

FiniteMetricSpace build_metric(const DiscreteManifold& man, const CellPartition& part,
                               const SliceCatalog& cat, const MetricConfig& cfg) {
  if (cat.inner.empty()) throw std::invalid_argument("build_metric: catalog has no inner net");
  const double eps = part.eps;
  const double gate = cfg.local_gate > 0.0 ? cfg.local_gate : std::pow(eps, 0.125);
  const double anchor_pad = cfg.anchor_pad >= 0.0 ? cfg.anchor_pad : 0.5 * eps;
  const double local_pad = cfg.local_pad >= 0.0 ? cfg.local_pad : eps;

  FiniteMetricSpace ms;
  ms.inner_count = int(cat.inner.size());
  for (int i = 0; i < ms.inner_count; ++i) {
    ms.labels.push_back(i == 0 ? "p" : "in:" + std::to_string(i));
    ms.kind.push_back(0);
    ms.ref.push_back(i);
  }
  for (int i = 0; i < int(cat.outer.size()); ++i) {
    std::ostringstream os;
    os << "out:";
    for (std::size_t k = 0; k < cat.outer[i].tau.size(); ++k)
      os << (k ? "." : "") << cat.outer[i].tau[k];
    ms.labels.push_back(os.str());
    ms.kind.push_back(1);
    ms.ref.push_back(i);
  }

  const int M = ms.size();
  std::vector<std::vector<double>> coords(M);
  for (int i = 0; i < M; ++i)
    coords[i] = distance_coordinates(man, part, cat, ms.kind[i], ms.ref[i]);

  // nearest cell per inner-net point
  std::vector<int> nearest_cell(ms.inner_count);
  for (int i = 0; i < ms.inner_count; ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < part.cell_count(); ++k) {
      double d = man.distance(cat.inner[std::size_t(i)], part.net[k]);
      if (d < bd - 1e-15) {
        bd = d;
        best = k;
      }
    }
    nearest_cell[i] = best;
  }

  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(M, M, inf);
  ms.provenance.assign(M, std::vector<char>(M, '-'));
  auto set_edge = [&](int a, int b, double weight, char tag) {
    if (weight < w(a, b)) {
      w(a, b) = w(b, a) = weight;
      ms.provenance[a][b] = ms.provenance[b][a] = tag;
    }
  };
  for (int i = 0; i < M; ++i) {
    w(i, i) = 0.0;
    ms.provenance[i][i] = '0';
  }

  // exact pairs inside the data ball (the metric is given there)
  for (int a = 0; a < ms.inner_count; ++a)
    for (int b = a + 1; b < ms.inner_count; ++b)
      set_edge(a, b, man.distance(cat.inner[a], cat.inner[b]), 'e');

  // anchor edges: any entry to an inner point, through that point's cell
  for (int i = 0; i < M; ++i)
    for (int b = 0; b < ms.inner_count; ++b) {
      if (i == b) continue;
      set_edge(i, b, coords[i][nearest_cell[b]] + anchor_pad, 'a');
    }

  // local edges between coordinate-close entries
  for (int a = 0; a < M; ++a)
    for (int b = a + 1; b < M; ++b) {
      double gap = 0.0;
      for (int k = 0; k < part.cell_count(); ++k)
        gap = std::max(gap, std::fabs(coords[a][k] - coords[b][k]));
      if (gap <= gate) set_edge(a, b, gap + local_pad, 'l');
    }

  // all-pairs shortest path closes the triangle inequality
  for (int k = 0; k < M; ++k)
    for (int i = 0; i < M; ++i) {
      double wik = w(i, k);
      if (wik == inf) continue;
      for (int j = 0; j < M; ++j) {
        double cand = wik + w(k, j);
        if (cand < w(i, j)) {
          w(i, j) = cand;
          ms.provenance[i][j] = 'p';
        }
      }
    }

  std::vector<int> isolated;
  for (int i = 0; i < M; ++i)
    if (w(0, i) == inf) isolated.push_back(i);
  if (!isolated.empty()) {
    std::ostringstream os;
    os << "build_metric: disconnected graph; isolated entries:";
    for (int i : isolated) os << ' ' << ms.labels[i];
    throw std::runtime_error(os.str());
  }

  ms.dhat = std::move(w);
  return ms;
}

}  // namespace invspec
