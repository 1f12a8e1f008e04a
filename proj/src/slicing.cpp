#include "invspec/slicing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>

#include "invspec/parallel.hpp"

namespace invspec {

namespace {

// greedy maximal separated subset of `candidates` (ascending grid order),
// optionally continuing from an existing prefix
void greedy_separated(const DiscreteManifold& man, const std::vector<int>& candidates,
                      double separation, std::vector<int>& net) {
  for (int x : candidates) {
    bool ok = true;
    for (int z : net)
      if (man.distance(x, z) < separation) {
        ok = false;
        break;
      }
    if (ok) net.push_back(x);
  }
}

}  // namespace

CellPartition build_partition(const DiscreteManifold& man, int base_point, double r0,
                              double eps, double r_l, const PartitionLimits& lim) {
  if (!(r0 > 0.0) || !(eps > 0.0) || !(r_l > 0.0))
    throw std::invalid_argument("build_partition: r0, eps, r_l must be positive");
  if (eps >= r0) throw std::invalid_argument("build_partition: eps must be below r0");
  if (r_l < 0.5 * eps)
    throw std::invalid_argument("build_partition: nets nest only for r_l >= eps/2");
  if (3.0 * r0 / 4.0 >= man.injectivity_radius())
    throw std::invalid_argument("build_partition: data ball reaches the injectivity radius");

  CellPartition part;
  part.base_point = base_point;
  part.r0 = r0;
  part.eps = eps;
  part.r_l = r_l;
  if (eps >= r0 / 64.0)
    part.warnings.push_back("eps >= r0/64: outside the smallness regime, errors are tracked empirically");
  if (r_l >= r0 / 32.0)
    part.warnings.push_back("r_l >= r0/32: outside the smallness regime");

  std::vector<int> half_ball = man.ball_points(base_point, 0.5 * r0);
  greedy_separated(man, half_ball, r_l, part.net);
  part.anchor_count = int(part.net.size());
  if (part.anchor_count == 0) throw std::runtime_error("build_partition: empty anchor net");
  if (part.anchor_count > lim.max_anchors)
    throw std::runtime_error(
        "build_partition: anchor count " + std::to_string(part.anchor_count) +
        " exceeds the limit " + std::to_string(lim.max_anchors) + "; raise r_l");
  greedy_separated(man, half_ball, 0.5 * eps, part.net);

  const int N = int(part.net.size());
  part.cells.assign(N, {});
  for (int x : man.ball_points(base_point, 0.75 * r0)) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < N; ++k) {
      double d = man.distance(x, part.net[k]);
      if (d < bd - 1e-15) {
        bd = d;
        best = k;
      }
    }
    if (bd <= 0.5 * eps) part.cells[best].push_back(x);
  }
  for (int k = 0; k < N; ++k)
    if (part.cells[k].empty())
      throw std::runtime_error("build_partition: empty cell (net point lost its region)");

  // covering check against the distance oracle
  for (int x : half_ball) {
    bool covered = false;
    for (int k = 0; k < N && !covered; ++k)
      covered = man.distance(x, part.net[k]) <= 0.5 * eps;
    if (!covered)
      throw std::runtime_error("build_partition: B(p, r0/2) not covered by the cells");
  }

  part.cell_distance.assign(N, std::vector<double>(man.point_count()));
  for (int k = 0; k < N; ++k)
    for (int x = 0; x < man.point_count(); ++x)
      part.cell_distance[k][x] = man.distance_to_cell(x, part.cells[k]);

  // inner net of B(p, r0) containing the base point
  part.inner_net.push_back(base_point);
  greedy_separated(man, man.ball_points(base_point, r0), eps, part.inner_net);

  return part;
}

double slice_lo(int beta_k, double eps, SliceVariant v) {
  if (v == SliceVariant::Star) return double(beta_k) * eps - eps;
  return double(beta_k) * eps - eps - eps * eps;
}

double slice_hi(int beta_k, double eps, SliceVariant v) {
  if (v == SliceVariant::Star) return double(beta_k) * eps;
  return double(beta_k) * eps + eps * eps;
}

int beta_of(double distance, double eps) { return int(std::floor(distance / eps)) + 1; }

bool slice_membership(const CellPartition& part, std::span<const int> beta, SliceVariant v,
                      int x) {
  for (int k = 0; k < int(beta.size()); ++k) {
    if (beta[k] <= 0) continue;
    double d = part.cell_distance[k][x];
    if (!(d >= slice_lo(beta[k], part.eps, v) && d < slice_hi(beta[k], part.eps, v)))
      return false;
  }
  return true;
}

std::vector<int> slice_points(const CellPartition& part, std::span<const int> beta,
                              SliceVariant v) {
  std::vector<int> out;
  const int n = int(part.cell_distance.empty() ? 0 : part.cell_distance[0].size());
  for (int x = 0; x < n; ++x)
    if (slice_membership(part, beta, v, x)) out.push_back(x);
  return out;
}

double slice_functional(MassFunctional& mass, const CellPartition& part,
                        std::span<const int> beta, SliceVariant v) {
  struct Active {
    int cell;
    double lo;
    double hi;
  };
  std::vector<Active> two_sided, one_sided;  // lo > 0 vs lo <= 0
  for (int k = 0; k < int(beta.size()); ++k) {
    if (beta[k] <= 0) continue;
    Active a{k, slice_lo(beta[k], part.eps, v), slice_hi(beta[k], part.eps, v)};
    (a.lo > 0.0 ? two_sided : one_sided).push_back(a);
  }
  const int k1 = int(two_sided.size()), k0 = int(one_sided.size());
  if (k1 + k0 == 0) throw std::invalid_argument("slice_functional: no active coordinate");

  // Expanding prod_k (chi_A - chi_B) and reducing every intersection to
  // unions leaves only unions that touch all two-sided cells: the free-cell
  // patterns of the remaining terms cancel in pairs.
  double total = 0.0;
  for (std::uint32_t rho = 0; rho < (1u << k1); ++rho) {
    int inner_bits = __builtin_popcount(rho);
    for (std::uint32_t t = 0; t < (1u << k0); ++t) {
      if (k1 == 0 && t == 0) continue;
      int extra = __builtin_popcount(t);
      double coeff = ((inner_bits + k1 + extra + 1) % 2 == 0) ? 1.0 : -1.0;
      SparseAlpha alpha;
      for (int i = 0; i < k1; ++i)
        alpha.entries.emplace_back(two_sided[i].cell,
                                   (rho >> i) & 1u ? two_sided[i].lo : two_sided[i].hi);
      for (int i = 0; i < k0; ++i)
        if ((t >> i) & 1u) alpha.entries.emplace_back(one_sided[i].cell, one_sided[i].hi);
      std::sort(alpha.entries.begin(), alpha.entries.end());
      total += coeff * mass.domain_mass(alpha);
    }
  }
  return total;
}

std::vector<int> SliceCatalog::tau_dense(int i) const {
  std::vector<int> beta(cell_count, 0);
  for (int k = 0; k < anchor_count; ++k) beta[k] = outer[std::size_t(i)].tau[k];
  return beta;
}

namespace {

struct CatalogContext {
  const DiscreteManifold& man;
  const CellPartition& part;
  MassFunctional& mass;
  double threshold;
  int max_beta;
  int min_beta;  // smallest with beta*eps >= r0/8
  std::int64_t budget;
  std::atomic<std::int64_t> evaluations{0};

  double criterion(std::span<const int> beta) {
    if (evaluations.fetch_add(1) >= budget)
      throw std::runtime_error("build_catalog: evaluation budget exceeded");
    return slice_functional(mass, part, beta, SliceVariant::Eps);
  }
};

// integer range of beta_l compatible with the anchor coordinates through the
// triangle inequality, with slack for cell diameters and the eps-variant pads
std::pair<int, int> feasible_range(const CatalogContext& ctx, std::span<const int> tau,
                                   int depth, int l) {
  const double eps = ctx.part.eps;
  const double slack = 2.0 * eps + 2.0 * eps * eps;
  double lo = ctx.min_beta * eps;
  double hi = ctx.max_beta * eps;
  for (int k = 0; k < depth; ++k) {
    double dlk = ctx.man.distance(ctx.part.net[l], ctx.part.net[k]);
    double tk = double(tau[k]) * eps;
    lo = std::max(lo, std::max(tk - dlk, dlk - tk) - slack);
    hi = std::min(hi, tk + dlk + slack);
  }
  int blo = std::max(ctx.min_beta, int(std::ceil(lo / eps - 1e-12)));
  int bhi = std::min(ctx.max_beta, int(std::floor(hi / eps + 1e-12)));
  return {blo, bhi};
}

std::optional<OuterEntry> process_tau(CatalogContext& ctx, const std::vector<int>& tau) {
  const int L = ctx.part.anchor_count;
  const int N = ctx.part.cell_count();
  OuterEntry entry;
  entry.tau = tau;
  entry.rep_beta.assign(N, 0);
  for (int k = 0; k < L; ++k) entry.rep_beta[k] = tau[k];
  entry.extensions.resize(N - L);
  entry.acceptance.assign(N - L, 0.0);

  std::vector<int> beta(N, 0);
  for (int k = 0; k < L; ++k) beta[k] = tau[k];
  for (int l = L; l < N; ++l) {
    auto [blo, bhi] = feasible_range(ctx, tau, L, l);
    double best_val = -1.0;
    int best_beta = 0;
    for (int b = blo; b <= bhi; ++b) {
      beta[l] = b;
      double val = ctx.criterion(beta);
      if (val >= ctx.threshold) {
        entry.extensions[l - L].push_back(b);
        if (val > best_val) {
          best_val = val;
          best_beta = b;
        }
      }
    }
    beta[l] = 0;
    if (entry.extensions[l - L].empty()) return std::nullopt;  // criterion fails at this l
    entry.rep_beta[l] = best_beta;
    entry.acceptance[l - L] = best_val;
  }
  return entry;
}

std::vector<std::vector<int>> profile_candidates(const CatalogContext& ctx) {
  const int L = ctx.part.anchor_count;
  std::set<std::vector<int>> taus;
  const int n = int(ctx.part.cell_distance[0].size());
  for (int y = 0; y < n; ++y) {
    if (ctx.man.distance(y, ctx.part.base_point) < ctx.part.r0) continue;
    std::vector<int> tau(L);
    bool ok = true;
    for (int k = 0; k < L; ++k) {
      tau[k] = beta_of(ctx.part.cell_distance[k][y], ctx.part.eps);
      if (tau[k] < ctx.min_beta || tau[k] > ctx.max_beta) ok = false;
    }
    if (ok) taus.insert(std::move(tau));
  }
  // single-coordinate neighbours widen the candidate set; the criterion
  // decides membership
  std::set<std::vector<int>> wiggles;
  for (const auto& tau : taus)
    for (int k = 0; k < L; ++k)
      for (int d : {-1, 1}) {
        std::vector<int> t = tau;
        t[k] += d;
        if (t[k] >= ctx.min_beta && t[k] <= ctx.max_beta) wiggles.insert(std::move(t));
      }
  taus.merge(wiggles);
  return {taus.begin(), taus.end()};
}

std::vector<std::vector<int>> blind_candidates(CatalogContext& ctx) {
  const int L = ctx.part.anchor_count;
  std::vector<std::vector<int>> out;
  std::vector<int> tau(L, 0);
  std::vector<int> beta(ctx.part.cell_count(), 0);
  auto dfs = [&](auto&& self, int depth) -> void {
    if (depth == L) {
      out.push_back(tau);
      return;
    }
    auto [blo, bhi] = feasible_range(ctx, tau, depth, depth);
    for (int b = blo; b <= bhi; ++b) {
      tau[depth] = b;
      beta[depth] = b;
      if (ctx.criterion(std::span<const int>(beta.data(), depth + 1)) >= ctx.threshold)
        self(self, depth + 1);
      beta[depth] = 0;
    }
    tau[depth] = 0;
  };
  dfs(dfs, 0);
  return out;
}

}  // namespace

SliceCatalog build_catalog(MassFunctional& mass, const DiscreteManifold& man,
                           const CellPartition& part, const CatalogConfig& cfg) {
  if (!(cfg.c1 > 0.0)) throw std::invalid_argument("build_catalog: c1 must be positive");
  const int n = man.dimension();
  SliceCatalog cat;
  cat.anchor_count = part.anchor_count;
  cat.cell_count = part.cell_count();
  cat.eps = part.eps;
  cat.c1 = cfg.c1;
  cat.c_star = 0.5 * cfg.c1 * cfg.c1 * unit_ball_volume(n) / std::pow(2.0, n);
  cat.threshold = cat.c_star * std::pow(part.eps, 2 * n);
  cat.mode = mass.mode();
  cat.inner = part.inner_net;

  if (part.cell_count() <= part.anchor_count)
    throw std::invalid_argument("build_catalog: no non-anchor cells, criterion is vacuous");

  CatalogContext ctx{man, part, mass, cat.threshold,
                     int(std::floor(1.0 + man.diameter() / part.eps)),
                     std::max(1, int(std::ceil(part.r0 / (8.0 * part.eps) - 1e-12))),
                     cfg.evaluation_budget};

  std::vector<std::vector<int>> candidates =
      cfg.blind_enumeration ? blind_candidates(ctx) : profile_candidates(ctx);
  std::sort(candidates.begin(), candidates.end());

  std::vector<std::optional<OuterEntry>> results(candidates.size());
  parallel_for(int(candidates.size()), cfg.threads,
               [&](int i) { results[i] = process_tau(ctx, candidates[std::size_t(i)]); });
  for (auto& r : results)
    if (r) cat.outer.push_back(std::move(*r));
  cat.evaluations = ctx.evaluations.load();
  return cat;
}

}  // namespace invspec
