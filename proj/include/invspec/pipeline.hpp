#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "invspec/control.hpp"
#include "invspec/evaluation.hpp"
#include "invspec/metric_space.hpp"
#include "invspec/potential.hpp"
#include "invspec/scenario.hpp"
#include "invspec/slicing.hpp"
#include "invspec/spectra.hpp"

namespace invspec {

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_id(std::move(stage)) {}
  std::string stage_id;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// Everything one run produces, oracle side included.
struct RunArtifacts {
  Scenario scenario;  // effective configuration
  std::unique_ptr<DiscreteManifold> man;
  PotentialField q;
  std::shared_ptr<const ForwardSolution> forward;
  SpectralData data;  // windowed, possibly perturbed
  double c1 = 0.0;
  double energy_bound = 0.0;  // effective E
  double slack = 0.0;         // effective eps1
  double sigma = 0.0;         // 2^-L eps^{4L}
  CellPartition part;
  SliceCatalog catalog;
  FiniteMetricSpace metric;
  PotentialEstimate potential;
  EvaluationTables eval;
  std::vector<StageTiming> timings;
  std::unique_ptr<MemoMass> memo;           // blind runs
  std::unique_ptr<CutoffMass> cutoff_mass;  // blind runs
  std::unique_ptr<OracleMass> oracle_mass;
};

struct RunOptions {
  int threads = 1;
  bool evaluate = true;        // oracle evaluation tables
  bool write_outputs = true;   // honor scenario.out
  bool reuse_forward = true;   // in-process forward-solve cache
};

RunArtifacts run_pipeline(const Scenario& scenario, const RunOptions& opt = {});

// forward solve with the in-process cache used by run_pipeline
std::shared_ptr<const ForwardSolution> cached_forward(const DiscreteManifold& man,
                                                      const PotentialField& q, int J);

}  // namespace invspec
