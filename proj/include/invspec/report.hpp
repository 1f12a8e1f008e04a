#pragma once

#include <string>

#include "invspec/pipeline.hpp"

namespace invspec {

// SpectralData archive: fixed header (n, m, J, delta, seed), window indices,
// then per-mode records as little-endian 64-bit floats.
void save_spectral(const SpectralData& data, int n, int m, const std::string& path);
SpectralData load_spectral(const std::string& path, int& n_out, int& m_out);

std::string summary_json(const RunArtifacts& run);

/// Writes config.json, summary.json, catalog.csv, dhat.csv, potential.csv,
/// near.csv, eigenvalues.csv, spectral.bin, sigma.csv (blind), memo.bin
/// (blind) and timings.json under `dir`. Every file except timings.json is
/// byte-deterministic for a fixed scenario and seed.
void write_run_outputs(const RunArtifacts& run, const std::string& dir);

}  // namespace invspec
