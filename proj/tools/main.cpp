#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "invspec/pipeline.hpp"
#include "invspec/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 2;
constexpr int kExitConfigError = 3;

struct CommonArgs {
  std::string scenario_path;
  std::string mode;
  std::string out;
  std::int64_t seed = -1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "scenario file (key = value)")->required();
  cmd->add_option("--mode", args.mode, "oracle | blind (overrides the scenario)");
  cmd->add_option("--out", args.out, "output directory (overrides the scenario)");
  cmd->add_option("--seed", args.seed, "seed (overrides the scenario)");
  cmd->add_option("--threads", args.threads, "worker threads");
}

invspec::Scenario load_with_overrides(const CommonArgs& args) {
  invspec::Scenario s = invspec::load_scenario(args.scenario_path);
  if (!args.mode.empty()) s.mode = args.mode;
  if (!args.out.empty()) s.out = args.out;
  if (args.seed >= 0) s.seed = std::uint64_t(args.seed);
  invspec::validate_scenario(s);
  return s;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

void write_failure(const std::string& dir, const std::string& stage, const std::string& what) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(dir + "/failure.json");
  out << "{ \"stage\": \"" << stage << "\", \"error\": \"" << what << "\" }\n";
}

int run_forward(const CommonArgs& args) {
  invspec::Scenario s = load_with_overrides(args);
  invspec::DiscreteManifold man(s.n, s.m);
  invspec::PotentialField q = invspec::build_potential(man, s);
  int J = s.J > 0 ? s.J : std::min(400, man.point_count());
  auto fs = invspec::cached_forward(man, q, J);
  auto window = std::make_shared<invspec::Subdomain>(
      invspec::make_ball_window(man, man.snap(invspec::Point{s.base_point}), s.window_radius));
  invspec::SpectralData data = invspec::restrict_to_window(man, *fs, window);
  data = invspec::perturb(man, data, s.delta, s.seed);
  std::printf("forward: J=%d lambda1=%.12g ortho_residual=%.3g window=%d\n", data.J,
              data.eigenvalues[0], data.ortho_residual, data.window->size());
  if (!s.out.empty()) {
    std::filesystem::create_directories(s.out);
    invspec::save_spectral(data, s.n, s.m, s.out + "/spectral.bin");
    std::ofstream ev(s.out + "/eigenvalues.csv");
    ev << "j,lambda\n";
    for (std::size_t j = 0; j < data.eigenvalues.size(); ++j)
      ev << (j + 1) << "," << data.eigenvalues[j] << "\n";
    std::printf("forward: wrote %s/spectral.bin\n", s.out.c_str());
  }
  return kExitOk;
}

int run_reconstruct(const CommonArgs& args, bool print_tables) {
  invspec::Scenario s = load_with_overrides(args);
  invspec::RunOptions opt;
  opt.threads = args.threads;
  try {
    invspec::RunArtifacts run = invspec::run_pipeline(s, opt);
    std::printf("reconstruct: outer=%zu gated=%zu far_sup=%.6g near_sup=%.6g c3=%.4g c7=%.4g\n",
                run.catalog.outer.size(), run.eval.far_rows.size(), run.eval.far_sup_err,
                run.eval.near_sup_err, run.eval.c3, run.eval.c7);
    if (print_tables) std::fputs(invspec::summary_json(run).c_str(), stdout);
    return kExitOk;
  } catch (const invspec::StageError& e) {
    std::fprintf(stderr, "stage failure [%s]: %s\n", e.stage_id.c_str(), e.what());
    write_failure(s.out, e.stage_id, e.what());
    return kExitStageFailure;
  }
}

int run_scan(const CommonArgs& args, const std::string& eps_list, const std::string& delta_list,
             const std::string& gate_list) {
  invspec::Scenario base = load_with_overrides(args);
  std::vector<double> epss = eps_list.empty() ? std::vector<double>{base.eps} : parse_list(eps_list);
  std::vector<double> deltas =
      delta_list.empty() ? std::vector<double>{base.delta} : parse_list(delta_list);
  std::vector<double> gates =
      gate_list.empty() ? std::vector<double>{base.local_gate} : parse_list(gate_list);

  std::string dir = base.out.empty() ? "scan-out" : base.out;
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir + "/scan.csv");
  csv << "eps,delta,R,outer,gated,far_sup_err,near_sup_err,c3,c7,coverage\n";
  for (double eps : epss)
    for (double delta : deltas)
      for (double gate : gates) {
        invspec::Scenario s = base;
        s.eps = eps;
        s.delta = delta;
        s.local_gate = gate;
        s.out.clear();  // per-combo artifacts stay off; the table is the product
        invspec::validate_scenario(s);
        invspec::RunOptions opt;
        opt.threads = args.threads;
        try {
          invspec::RunArtifacts run = invspec::run_pipeline(s, opt);
          csv << eps << "," << delta << "," << gate << "," << run.catalog.outer.size() << ","
              << run.eval.far_rows.size() << "," << run.eval.far_sup_err << ","
              << run.eval.near_sup_err << "," << run.eval.c3 << "," << run.eval.c7 << ","
              << (run.eval.coverage_exact ? 1 : 0) << "\n";
          csv.flush();
          std::printf("scan eps=%g delta=%g R=%g done\n", eps, delta, gate);
        } catch (const invspec::StageError& e) {
          std::fprintf(stderr, "scan eps=%g delta=%g R=%g failed [%s]: %s\n", eps, delta, gate,
                       e.stage_id.c_str(), e.what());
          return kExitStageFailure;
        }
      }
  std::printf("scan: wrote %s/scan.csv\n", dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interior spectral data -> finite metric space + potential reconstruction"};
  app.require_subcommand(1);

  CommonArgs fwd_args, rec_args, eval_args, scan_args;
  std::string scan_eps, scan_delta, scan_gate;

  add_common(app.add_subcommand("forward", "forward solve and data export"), fwd_args);
  add_common(app.add_subcommand("reconstruct", "full reconstruction pipeline"), rec_args);
  add_common(app.add_subcommand("evaluate", "reconstruct and print the error summary"),
             eval_args);
  CLI::App* scan = app.add_subcommand("scan", "parameter sweep over eps, delta, R");
  add_common(scan, scan_args);
  scan->add_option("--eps", scan_eps, "comma-separated eps values");
  scan->add_option("--delta", scan_delta, "comma-separated delta values");
  scan->add_option("--R", scan_gate, "comma-separated local-gate values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (app.got_subcommand("forward")) return run_forward(fwd_args);
    if (app.got_subcommand("reconstruct")) return run_reconstruct(rec_args, false);
    if (app.got_subcommand("evaluate")) return run_reconstruct(eval_args, true);
    if (app.got_subcommand("scan")) return run_scan(scan_args, scan_eps, scan_delta, scan_gate);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStageFailure;
  }
  return kExitConfigError;
}
