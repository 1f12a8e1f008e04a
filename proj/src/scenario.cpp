#include "invspec/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace invspec {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& s, char sep) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("scenario: bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  Scenario s;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("scenario line " + std::to_string(line_no) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));

    auto as_int = [&] { return int(std::llround(std::stod(val))); };
    auto as_u64 = [&] { return std::uint64_t(std::stoull(val)); };
    auto as_dbl = [&] { return std::stod(val); };

    if (key == "model") s.model = val;
    else if (key == "n") s.n = as_int();
    else if (key == "m") s.m = as_int();
    else if (key == "r0") s.r0 = as_dbl();
    else if (key == "base_point") {
      auto v = parse_numbers(val, ',');
      if (v.empty() || v.size() > 2)
        throw std::invalid_argument("scenario: base_point needs 1 or 2 coordinates");
      s.base_point = {v[0], v.size() > 1 ? v[1] : 0.0};
    } else if (key == "potential") s.potential_kind = val;
    else if (key == "potential_base") s.potential_base = as_dbl();
    else if (key == "potential_terms") {
      s.potential_terms.clear();
      std::stringstream groups(val);
      std::string g;
      while (std::getline(groups, g, ';')) {
        g = trim(g);
        if (g.empty()) continue;
        auto v = parse_numbers(g, ',');
        if (v.size() != 4)
          throw std::invalid_argument("scenario: each potential term needs 4 numbers");
        s.potential_terms.push_back({v[0], v[1], v[2], v[3]});
      }
    } else if (key == "potential_bound") s.potential_bound = as_dbl();
    else if (key == "eps") s.eps = as_dbl();
    else if (key == "delta") s.delta = as_dbl();
    else if (key == "seed") s.seed = as_u64();
    else if (key == "J") s.J = as_int();
    else if (key == "E") s.E = as_dbl();
    else if (key == "eps1") s.eps1 = as_dbl();
    else if (key == "r_l") s.r_l = as_dbl();
    else if (key == "mode") s.mode = val;
    else if (key == "out") s.out = val;
    else if (key == "R") s.local_gate = as_dbl();
    else if (key == "rho") s.rho = as_dbl();
    else if (key == "rho_near") s.rho_near = as_dbl();
    else if (key == "window_radius") s.window_radius = as_dbl();
    else if (key == "K") s.K = as_dbl();
    else if (key == "K2") s.K2 = as_dbl();
    else if (key == "v0") s.v0 = as_dbl();
    else if (key == "rotate_clusters") s.rotate_clusters = as_u64();
    else
      throw std::invalid_argument("scenario: unknown key '" + key + "'");
  }
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("scenario: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

void validate_scenario(Scenario& s) {
  if (s.model != "flat-torus")
    throw std::invalid_argument("scenario: unknown model '" + s.model + "'");
  if (s.n < 1 || s.n > 2) throw std::invalid_argument("scenario: n must be 1 or 2");
  if (s.m < 8 || s.m > 96) throw std::invalid_argument("scenario: m must lie in [8, 96]");
  if (!(s.r0 > 0.0)) throw std::invalid_argument("scenario: r0 must be positive");
  if (!(s.eps > 0.0 && s.eps < s.r0))
    throw std::invalid_argument("scenario: need 0 < eps < r0");
  if (s.delta < 0.0) throw std::invalid_argument("scenario: delta must be >= 0");
  if (s.mode != "oracle" && s.mode != "blind")
    throw std::invalid_argument("scenario: mode must be oracle or blind");
  if (!(s.potential_bound > 1.0))
    throw std::invalid_argument("scenario: potential_bound must exceed 1");
  if (s.potential_kind != "constant" && s.potential_kind != "cosine" &&
      s.potential_kind != "bumps")
    throw std::invalid_argument("scenario: potential must be constant, cosine or bumps");

  if (s.window_radius == 0.0) s.window_radius = 5.0 * s.r0;
  if (s.r_l == 0.0) s.r_l = s.r0 / 32.0;
  if (s.window_radius < 2.0 * s.r0)
    throw std::invalid_argument("scenario: data window must contain B(p, 2 r0)");
  double pi = 3.14159265358979323846;
  if (s.window_radius >= pi)
    throw std::invalid_argument("scenario: data window reaches the injectivity radius");
  if (s.eps >= s.r0 / 64.0)
    s.warnings.push_back("eps >= r0/64: outside the smallness regime, thresholds come from measured baselines");
}

std::string scenario_json(const Scenario& s) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"model\": \"" << s.model << "\",\n";
  os << "  \"n\": " << s.n << ",\n  \"m\": " << s.m << ",\n";
  os << "  \"r0\": " << fmt(s.r0) << ",\n";
  os << "  \"base_point\": [" << fmt(s.base_point[0]) << ", " << fmt(s.base_point[1]) << "],\n";
  os << "  \"potential\": \"" << s.potential_kind << "\",\n";
  os << "  \"potential_base\": " << fmt(s.potential_base) << ",\n";
  os << "  \"potential_terms\": [";
  for (std::size_t i = 0; i < s.potential_terms.size(); ++i) {
    const auto& t = s.potential_terms[i];
    os << (i ? ", " : "") << "[" << fmt(t[0]) << ", " << fmt(t[1]) << ", " << fmt(t[2])
       << ", " << fmt(t[3]) << "]";
  }
  os << "],\n";
  os << "  \"potential_bound\": " << fmt(s.potential_bound) << ",\n";
  os << "  \"eps\": " << fmt(s.eps) << ",\n  \"delta\": " << fmt(s.delta) << ",\n";
  os << "  \"seed\": " << s.seed << ",\n  \"J\": " << s.J << ",\n";
  os << "  \"E\": " << fmt(s.E) << ",\n  \"eps1\": " << fmt(s.eps1) << ",\n";
  os << "  \"r_l\": " << fmt(s.r_l) << ",\n";
  os << "  \"mode\": \"" << s.mode << "\",\n";
  os << "  \"R\": " << fmt(s.local_gate) << ",\n  \"rho\": " << fmt(s.rho) << ",\n";
  os << "  \"rho_near\": " << fmt(s.rho_near) << ",\n";
  os << "  \"window_radius\": " << fmt(s.window_radius) << ",\n";
  os << "  \"K\": " << fmt(s.K) << ",\n  \"K2\": " << fmt(s.K2) << ",\n  \"v0\": "
     << fmt(s.v0) << ",\n";
  os << "  \"rotate_clusters\": " << s.rotate_clusters << "\n";
  os << "}\n";
  return os.str();
}

std::uint64_t scenario_hash(const Scenario& s) {
  std::string j = scenario_json(s);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : j) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

PotentialField build_potential(const DiscreteManifold& man, const Scenario& s) {
  PotentialField q;
  q.bound = s.potential_bound;
  q.values.resize(man.point_count());
  for (int x = 0; x < man.point_count(); ++x) {
    Point p = man.coords(x);
    double v = s.potential_base;
    for (const auto& t : s.potential_terms) {
      if (s.potential_kind == "cosine") {
        double phase = t[1] * p.x[0] + (man.dimension() == 2 ? t[2] * p.x[1] : 0.0) + t[3];
        v += t[0] * std::cos(phase);
      } else if (s.potential_kind == "bumps") {
        Point c{t[1], t[2]};
        double d = man.distance(p, c);
        v += t[0] * std::exp(-0.5 * d * d / (t[3] * t[3]));
      }
    }
    q.values[x] = v;
  }
  validate_potential(man, q);
  return q;
}

}  // namespace invspec
