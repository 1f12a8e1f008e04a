#include "invspec/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace invspec {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? std::string(1, sep) : "") << v[i];
  return os.str();
}

}  // namespace

void save_spectral(const SpectralData& data, int n, int m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_spectral: cannot open " + path);
  out.write("IVSPDAT1", 8);
  put(out, std::int32_t(n));
  put(out, std::int32_t(m));
  put(out, std::int32_t(data.J));
  put(out, data.delta);
  put(out, data.seed);
  put(out, std::int32_t(data.window->size()));
  for (int idx : data.window->indices) put(out, std::int32_t(idx));
  for (int j = 0; j < data.J; ++j) {
    put(out, data.eigenvalues[std::size_t(j)]);
    for (int u = 0; u < data.window->size(); ++u) put(out, data.values(u, j));
    for (int a = 0; a < n; ++a)
      for (int u = 0; u < data.window->size(); ++u) put(out, data.gradients[std::size_t(a)](u, j));
  }
}

SpectralData load_spectral(const std::string& path, int& n_out, int& m_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_spectral: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "IVSPDAT1")
    throw std::runtime_error("load_spectral: bad header in " + path);
  std::int32_t n = 0, m = 0, J = 0, nu = 0;
  SpectralData data;
  get(in, n);
  get(in, m);
  get(in, J);
  get(in, data.delta);
  get(in, data.seed);
  get(in, nu);
  n_out = n;
  m_out = m;
  data.J = J;
  auto window = std::make_shared<Subdomain>();
  window->indices.resize(std::size_t(nu));
  int count = 1;
  for (int a = 0; a < n; ++a) count *= m;
  window->local.assign(std::size_t(count), -1);
  for (int u = 0; u < nu; ++u) {
    std::int32_t idx = 0;
    get(in, idx);
    window->indices[std::size_t(u)] = idx;
    window->local[std::size_t(idx)] = u;
  }
  data.window = window;
  data.eigenvalues.resize(std::size_t(J));
  data.values.resize(nu, J);
  data.gradients.assign(std::size_t(n), Eigen::MatrixXd(nu, J));
  for (int j = 0; j < J; ++j) {
    get(in, data.eigenvalues[std::size_t(j)]);
    for (int u = 0; u < nu; ++u) get(in, data.values(u, j));
    for (int a = 0; a < n; ++a)
      for (int u = 0; u < nu; ++u) get(in, data.gradients[std::size_t(a)](u, j));
  }
  if (!in) throw std::runtime_error("load_spectral: truncated file " + path);
  return data;
}

std::string summary_json(const RunArtifacts& run) {
  const EvaluationTables& ev = run.eval;
  std::ostringstream os;
  os << "{\n";
  os << "  \"scenario_hash\": " << scenario_hash(run.scenario) << ",\n";
  os << "  \"mode\": \"" << run.scenario.mode << "\",\n";
  os << "  \"mass_mode\": \"" << (run.memo ? run.memo->mode() : "none") << "\",\n";
  os << "  \"c1\": " << fmt(run.c1) << ",\n";
  os << "  \"sigma_budget\": " << fmt(run.sigma) << ",\n";
  os << "  \"energy_bound\": " << fmt(run.energy_bound) << ",\n";
  os << "  \"slack\": " << fmt(run.slack) << ",\n";
  os << "  \"lambda1\": " << fmt(run.data.eigenvalues.empty() ? 0.0 : run.data.eigenvalues[0])
     << ",\n";
  os << "  \"net_size\": " << run.part.cell_count() << ",\n";
  os << "  \"anchors\": " << run.part.anchor_count << ",\n";
  os << "  \"inner_entries\": " << run.catalog.inner.size() << ",\n";
  os << "  \"outer_entries\": " << run.catalog.outer.size() << ",\n";
  os << "  \"catalog_threshold\": " << fmt(run.catalog.threshold) << ",\n";
  os << "  \"catalog_evaluations\": " << run.catalog.evaluations << ",\n";
  os << "  \"memo_entries\": " << (run.memo ? run.memo->size() : 0) << ",\n";
  os << "  \"params\": {\"eps\": " << fmt(run.potential.params.eps)
     << ", \"rho1\": " << fmt(run.potential.params.rho1)
     << ", \"rho2\": " << fmt(run.potential.params.rho2)
     << ", \"rho\": " << fmt(run.potential.params.rho)
     << ", \"c7_pad\": " << fmt(run.potential.params.c7_pad) << "},\n";
  os << "  \"coverage_exact\": " << (ev.coverage_exact ? "true" : "false") << ",\n";
  os << "  \"empty_eps_flags\": " << ev.empty_eps_flags << ",\n";
  os << "  \"c3\": " << fmt(ev.c3) << ",\n  \"c3_eps\": " << fmt(ev.c3_eps) << ",\n";
  os << "  \"c7\": " << fmt(ev.c7) << ",\n  \"c7_pad\": " << fmt(ev.c7_pad) << ",\n";
  os << "  \"gated_slices\": " << ev.far_rows.size() << ",\n";
  os << "  \"far_sup_err\": " << fmt(ev.far_sup_err) << ",\n";
  os << "  \"near_points\": " << run.potential.near_points.size() << ",\n";
  os << "  \"near_sup_err\": " << fmt(ev.near_sup_err) << ",\n";
  os << "  \"phi_hat_sup_err\": " << fmt(ev.phi_hat_sup_err) << ",\n";
  os << "  \"vol_ratio_sup_dev\": " << fmt(ev.vol_ratio_sup_dev) << ",\n";
  os << "  \"covering_radius_far\": " << fmt(ev.covering_radius_far) << ",\n";
  os << "  \"overlap_ok\": " << (ev.overlap_ok ? "true" : "false") << ",\n";
  os << "  \"overlap_worst_excess\": " << fmt(ev.overlap_worst_excess) << ",\n";
  os << "  \"sigma_samples\": " << ev.sigma_rows.size() << ",\n";
  os << "  \"sigma_bound_max\": " << fmt(ev.sigma_bound_max) << ",\n";
  os << "  \"sigma_consistent\": " << (ev.sigma_consistent ? "true" : "false") << ",\n";
  os << "  \"warnings\": [";
  bool first = true;
  for (const auto& w : run.scenario.warnings) {
    os << (first ? "" : ", ") << "\"" << w << "\"";
    first = false;
  }
  for (const auto& w : run.part.warnings) {
    os << (first ? "" : ", ") << "\"" << w << "\"";
    first = false;
  }
  for (const auto& w : run.potential.warnings) {
    os << (first ? "" : ", ") << "\"" << w << "\"";
    first = false;
  }
  os << "]\n}\n";
  return os.str();
}

void write_run_outputs(const RunArtifacts& run, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto path = [&dir](const std::string& name) { return dir + "/" + name; };

  write_file(path("config.json"), scenario_json(run.scenario));
  write_file(path("summary.json"), summary_json(run));

  {
    std::ostringstream os;
    os << "j,lambda\n";
    for (std::size_t j = 0; j < run.data.eigenvalues.size(); ++j)
      os << (j + 1) << "," << fmt(run.data.eigenvalues[j]) << "\n";
    write_file(path("eigenvalues.csv"), os.str());
  }

  save_spectral(run.data, run.scenario.n, run.scenario.m, path("spectral.bin"));

  {
    std::ostringstream os;
    os << "kind,entry,tau,beta_or_xi,acceptance\n";
    for (std::size_t i = 0; i < run.catalog.inner.size(); ++i)
      os << "inner," << i << ",," << run.catalog.inner[i] << ",\n";
    for (std::size_t i = 0; i < run.catalog.outer.size(); ++i) {
      const OuterEntry& e = run.catalog.outer[i];
      os << "outer," << (run.catalog.inner.size() + i) << "," << join_ints(e.tau, '.') << ","
         << join_ints(e.rep_beta, '.') << ",";
      for (std::size_t l = 0; l < e.acceptance.size(); ++l)
        os << (l ? ";" : "") << fmt(e.acceptance[l]);
      os << "\n";
    }
    write_file(path("catalog.csv"), os.str());
  }

  {
    std::ostringstream os;
    os << "label";
    for (const auto& l : run.metric.labels) os << "," << l;
    os << "\n";
    for (int i = 0; i < run.metric.size(); ++i) {
      os << run.metric.labels[std::size_t(i)];
      for (int k = 0; k < run.metric.size(); ++k) os << "," << fmt(run.metric.dhat(i, k));
      os << "\n";
    }
    write_file(path("dhat.csv"), os.str());
  }

  {
    std::ostringstream os;
    os << "slice,dhat0,phi_hat,vol_a,lap,qhat,oracle_q,abs_err\n";
    for (const auto& r : run.eval.far_rows)
      os << r.slice << "," << fmt(r.dhat0) << "," << fmt(r.phi_hat) << "," << fmt(r.vol_a)
         << "," << fmt(r.laplacian) << "," << fmt(r.qhat) << "," << fmt(r.q_true) << ","
         << fmt(r.abs_err) << "\n";
    write_file(path("potential.csv"), os.str());
  }

  {
    std::ostringstream os;
    os << "point,qhat,oracle_q,abs_err\n";
    for (std::size_t i = 0; i < run.potential.near_points.size(); ++i) {
      double qt = i < run.eval.near_q_true.size()
                      ? run.eval.near_q_true[i]
                      : std::numeric_limits<double>::quiet_NaN();
      os << run.potential.near_points[i] << "," << fmt(run.potential.near_qhat[i]) << ","
         << fmt(qt) << "," << fmt(std::fabs(run.potential.near_qhat[i] - qt)) << "\n";
    }
    write_file(path("near.csv"), os.str());
  }

  if (!run.eval.sigma_rows.empty()) {
    std::ostringstream os;
    os << "alpha,blind,oracle,sigma_cut,bound\n";
    for (const auto& r : run.eval.sigma_rows) {
      for (std::size_t e = 0; e < r.alpha.entries.size(); ++e)
        os << (e ? ";" : "") << r.alpha.entries[e].first << ":"
           << fmt(r.alpha.entries[e].second);
      os << "," << fmt(r.blind_value) << "," << fmt(r.oracle_value) << ","
         << fmt(r.sigma_cut) << "," << fmt(r.bound) << "\n";
    }
    write_file(path("sigma.csv"), os.str());
  }

  if (run.memo && run.scenario.mode == "blind")
    run.memo->save(path("memo.bin"), scenario_hash(run.scenario));

  {
    std::ostringstream os;
    os << "{\n";
    for (std::size_t i = 0; i < run.timings.size(); ++i)
      os << "  \"" << run.timings[i].stage << "\": " << fmt(run.timings[i].seconds)
         << (i + 1 < run.timings.size() ? ",\n" : "\n");
    os << "}\n";
    write_file(path("timings.json"), os.str());
  }
}

}  // namespace invspec
