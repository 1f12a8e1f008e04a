#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "invspec/geometry.hpp"
#include "invspec/spectra.hpp"

namespace invspec {

/// Run configuration. Parsed from flat key=value text with a strict schema:
/// unknown keys are rejected. Zero-valued optional parameters select the
/// documented defaults at run time.
struct Scenario {
  std::string model = "flat-torus";
  int n = 2;
  int m = 64;
  double r0 = 0.6;
  std::array<double, 2> base_point{0.0, 0.0};

  std::string potential_kind = "constant";  // constant | cosine | bumps
  double potential_base = 1.0;
  std::vector<std::array<double, 4>> potential_terms;
  double potential_bound = 2.0;  // C0

  double eps = 0.3;
  double delta = 0.0;
  std::uint64_t seed = 1;
  int J = 0;            // 0 -> min(400, m^n)
  double E = 0.0;       // 0 -> 2 sqrt(C0) max(1, lambda_1^a)
  double eps1 = 0.0;    // 0 -> sigma/10
  double r_l = 0.0;     // 0 -> r0/32
  std::string mode = "oracle";  // oracle | blind
  std::string out;

  double local_gate = 0.0;     // R; 0 -> eps^{1/8}
  double rho = 0.0;            // 0 -> rho2
  double rho_near = 0.0;       // 0 -> eps^{1/4}
  double window_radius = 0.0;  // 0 -> 5 r0

  // admissible-class parameters, recorded for provenance only
  double K = 0.0;
  double K2 = 0.0;
  double v0 = 0.0;

  std::uint64_t rotate_clusters = 0;  // basis-ambiguity hook; 0 = off

  std::vector<std::string> warnings;
};

Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario(const std::string& path);

// Fills defaults that do not need run-time data and checks the invariants.
void validate_scenario(Scenario& s);

// deterministic JSON of the effective configuration
std::string scenario_json(const Scenario& s);
std::uint64_t scenario_hash(const Scenario& s);

PotentialField build_potential(const DiscreteManifold& man, const Scenario& s);

}  // namespace invspec
