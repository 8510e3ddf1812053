#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <variant>

#include "uavplan/errors.hpp"
#include "uavplan/scenario_io.hpp"

namespace uavplan {

using nlohmann::json;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

namespace {

using PathItem = std::variant<std::string, int>;
using Path = std::vector<PathItem>;

std::string path_text(const Path& path) {
  std::string s;
  for (const auto& item : path) {
    if (const auto* key = std::get_if<std::string>(&item)) {
      if (!s.empty()) s += '.';
      s += *key;
    } else {
      s += "[" + std::to_string(std::get<int>(item)) + "]";
    }
  }
  return s;
}

int line_at(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Best-effort location of a key path in the raw text.
int locate(const std::string& text, const Path& path) {
  std::size_t pos = 0;
  bool found_any = false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (const auto* key = std::get_if<std::string>(&path[i])) {
      const std::size_t p = text.find("\"" + *key + "\"", pos);
      if (p == std::string::npos) break;
      pos = p;
      found_any = true;
    } else {
      const int idx = std::get<int>(path[i]);
      const auto* next = i + 1 < path.size() ? std::get_if<std::string>(&path[i + 1]) : nullptr;
      std::size_t p = pos;
      if (next) {
        for (int c = 0; c <= idx && p != std::string::npos; ++c) {
          p = text.find("\"" + *next + "\"", c == 0 ? p : p + 1);
        }
        if (p == std::string::npos) break;
        pos = p;
        ++i;
      } else {
        p = text.find('[', pos);
        for (int c = 0; c <= idx && p != std::string::npos; ++c) p = text.find_first_of("[{", p + 1);
        if (p == std::string::npos) break;
        pos = p;
      }
    }
  }
  return found_any ? line_at(text, pos) : 0;
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const Path& path, const std::string& msg) const {
    const int line = locate(text_, path);
    std::string where = source_;
    if (line > 0) where += ":" + std::to_string(line);
    throw ScenarioError(where + ": " + (path.empty() ? "" : path_text(path) + ": ") + msg);
  }

  const json& member(const json& obj, const Path& path, const std::string& key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, "missing required key \"" + key + "\"");
    return *it;
  }

  double number(const json& v, const Path& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  double number_or(const json& obj, const Path& path, const std::string& key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    Path p = path;
    p.emplace_back(key);
    return number(obj.at(key), p);
  }

  int integer(const json& v, const Path& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  Vec3 point(const json& v, const Path& path, bool allow_2d) const {
    if (!v.is_array() || !(v.size() == 3 || (allow_2d && v.size() == 2))) {
      fail(path, allow_2d ? "expected [x, y] or [x, y, z]" : "expected [x, y, z]");
    }
    Vec3 p = Vec3::Zero();
    for (std::size_t i = 0; i < v.size(); ++i) {
      Path pi = path;
      pi.emplace_back(static_cast<int>(i));
      p[static_cast<Eigen::Index>(i)] = number(v[i], pi);
    }
    return p;
  }

 private:
  const std::string& text_;
  std::string source_;
};

void check_keys(const Reader& rd, const json& obj, const Path& path, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      Path p = path;
      p.emplace_back(it.key());
      rd.fail(p, "unknown key");
    }
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(source + ":" + std::to_string(line_at(text, e.byte)) + ": malformed JSON: " + e.what());
  }
  const Reader rd(text, source);
  if (!doc.is_object()) rd.fail({}, "top level must be an object");
  check_keys(rd, doc, {}, {"gns", "buildings", "uav", "channel", "solver", "name", "note"});

  Scenario scn;
  const json& gns = rd.member(doc, {}, "gns");
  if (!gns.is_array() || gns.empty()) rd.fail({"gns"}, "expected a non-empty list of points");
  for (std::size_t k = 0; k < gns.size(); ++k) scn.gns.push_back(rd.point(gns[k], {"gns", static_cast<int>(k)}, true));

  if (doc.contains("buildings")) {
    const json& bs = doc["buildings"];
    if (!bs.is_array()) rd.fail({"buildings"}, "expected a list");
    for (std::size_t l = 0; l < bs.size(); ++l) {
      const Path p{"buildings", static_cast<int>(l)};
      const json& b = bs[l];
      if (!b.is_object()) rd.fail(p, "expected an object");
      check_keys(rd, b, p, {"center", "width", "length", "height"});
      const json& c = rd.member(b, p, "center");
      Path pc = p;
      pc.emplace_back("center");
      const Vec3 center = rd.point(c, pc, true);
      auto dim = [&](const char* key) {
        Path pk = p;
        pk.emplace_back(key);
        return rd.number(rd.member(b, p, key), pk);
      };
      const double w = dim("width"), len = dim("length"), h = dim("height");
      if (c.size() == 3 && center.z() != 0.0) rd.fail(pc, "buildings are grounded; center z must be 0");
      try {
        scn.buildings.emplace_back(center.x(), center.y(), w, len, h);
      } catch (const DomainError& e) {
        rd.fail(p, e.what());
      }
    }
  }

  const json& uav = rd.member(doc, {}, "uav");
  if (!uav.is_object()) rd.fail({"uav"}, "expected an object");
  check_keys(rd, uav, {"uav"}, {"qI", "qF", "T", "N", "Vmax", "Vz", "Hmin", "Hmax"});
  scn.uav.q_initial = rd.point(rd.member(uav, {"uav"}, "qI"), {"uav", "qI"}, false);
  scn.uav.q_final = rd.point(rd.member(uav, {"uav"}, "qF"), {"uav", "qF"}, false);
  scn.uav.T = rd.number(rd.member(uav, {"uav"}, "T"), {"uav", "T"});
  scn.uav.N = rd.integer(rd.member(uav, {"uav"}, "N"), {"uav", "N"});
  scn.uav.v_max = rd.number_or(uav, {"uav"}, "Vmax", 10.0);
  scn.uav.v_z = rd.number_or(uav, {"uav"}, "Vz", 5.0);
  scn.uav.h_min = rd.number_or(uav, {"uav"}, "Hmin", 30.0);
  scn.uav.h_max = rd.number_or(uav, {"uav"}, "Hmax", 200.0);

  if (doc.contains("channel")) {
    const json& ch = doc["channel"];
    if (!ch.is_object()) rd.fail({"channel"}, "expected an object");
    check_keys(rd, ch, {"channel"}, {"beta0_dB", "mu_dB", "alphaL", "alphaN", "sigma2_dBm", "pk_dBm"});
    scn.channel.beta0 = db_to_linear(rd.number_or(ch, {"channel"}, "beta0_dB", 0.0));
    scn.channel.mu = db_to_linear(rd.number_or(ch, {"channel"}, "mu_dB", -30.0));
    scn.channel.alpha_L = rd.number_or(ch, {"channel"}, "alphaL", 2.0);
    scn.channel.alpha_N = rd.number_or(ch, {"channel"}, "alphaN", 2.7);
    scn.channel.sigma2 = dbm_to_watts(rd.number_or(ch, {"channel"}, "sigma2_dBm", -70.0));
    scn.channel.pk = dbm_to_watts(rd.number_or(ch, {"channel"}, "pk_dBm", 30.0));
  }

  if (doc.contains("solver")) {
    const json& so = doc["solver"];
    if (!so.is_object()) rd.fail({"solver"}, "expected an object");
    check_keys(rd, so, {"solver"}, {"U", "M", "a0", "eps_growth", "eps_conv", "Rmax", "seed"});
    if (so.contains("U")) scn.algo.U = rd.integer(so["U"], {"solver", "U"});
    scn.algo.M = rd.number_or(so, {"solver"}, "M", scn.algo.M);
    scn.algo.a0 = rd.number_or(so, {"solver"}, "a0", scn.algo.a0);
    scn.algo.eps_growth = rd.number_or(so, {"solver"}, "eps_growth", scn.algo.eps_growth);
    if (so.contains("eps_conv")) {
      const json& e = so["eps_conv"];
      if (e.is_string() && (e == "inf" || e == "infinity")) {
        scn.algo.eps_conv = kInf;
      } else {
        scn.algo.eps_conv = rd.number(e, {"solver", "eps_conv"});
      }
    }
    if (so.contains("Rmax")) scn.algo.R_max = rd.integer(so["Rmax"], {"solver", "Rmax"});
    if (so.contains("seed")) {
      if (!so["seed"].is_number_unsigned()) rd.fail({"solver", "seed"}, "expected a non-negative integer");
      scn.algo.seed = so["seed"].get<std::uint64_t>();
    }
  }

  try {
    scn.validate();
  } catch (const ScenarioError& e) {
    // Point at the section named by the message prefix when possible.
    const std::string msg = e.what();
    Path p;
    for (const char* sec : {"uav", "gns", "buildings", "channel", "solver"}) {
      if (msg.rfind(sec, 0) == 0) {
        p.emplace_back(std::string(sec));
        break;
      }
    }
    rd.fail(p, msg);
  }
  return scn;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

json scenario_to_json(const Scenario& scn) {
  json doc;
  for (const Vec3& w : scn.gns) doc["gns"].push_back({w.x(), w.y(), w.z()});
  doc["buildings"] = json::array();
  for (const Building& b : scn.buildings) {
    doc["buildings"].push_back(
        {{"center", {b.center.x(), b.center.y()}}, {"width", b.width}, {"length", b.length}, {"height", b.height}});
  }
  const auto& u = scn.uav;
  doc["uav"] = {{"qI", {u.q_initial.x(), u.q_initial.y(), u.q_initial.z()}},
                {"qF", {u.q_final.x(), u.q_final.y(), u.q_final.z()}},
                {"T", u.T},
                {"N", u.N},
                {"Vmax", u.v_max},
                {"Vz", u.v_z},
                {"Hmin", u.h_min},
                {"Hmax", u.h_max}};
  const auto& c = scn.channel;
  doc["channel"] = {{"beta0_dB", 10.0 * std::log10(c.beta0)},       {"mu_dB", 10.0 * std::log10(c.mu)},
                    {"alphaL", c.alpha_L},                          {"alphaN", c.alpha_N},
                    {"sigma2_dBm", 10.0 * std::log10(c.sigma2) + 30.0}, {"pk_dBm", 10.0 * std::log10(c.pk) + 30.0}};
  const auto& a = scn.algo;
  doc["solver"] = {{"U", a.U}, {"M", a.M}, {"a0", a.a0}, {"eps_growth", a.eps_growth}, {"Rmax", a.R_max},
                   {"seed", a.seed}};
  if (std::isfinite(a.eps_conv)) {
    doc["solver"]["eps_conv"] = a.eps_conv;
  } else {
    doc["solver"]["eps_conv"] = "inf";
  }
  return doc;
}

SolverConfig solver_config_from_env() {
  SolverConfig cfg;
  auto num = [](const char* name, double& field) {
    if (const char* v = std::getenv(name)) {
      char* end = nullptr;
      const double d = std::strtod(v, &end);
      if (end == v || *end != '\0') throw ScenarioError(std::string("environment variable ") + name + " is not a number");
      field = d;
    }
  };
  auto integer = [&](const char* name, int& field) {
    double d = field;
    num(name, d);
    field = static_cast<int>(d);
  };
  num("UAVPLAN_TOL_FEAS", cfg.tol_feas);
  num("UAVPLAN_INNER_TOL", cfg.inner_tol);
  num("UAVPLAN_GAP_TOL", cfg.gap_tol);
  num("UAVPLAN_BARRIER_T0", cfg.t0);
  num("UAVPLAN_BARRIER_GROWTH", cfg.growth);
  integer("UAVPLAN_MAX_OUTER", cfg.max_outer);
  integer("UAVPLAN_MAX_INNER", cfg.max_inner);
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ScenarioError(std::string("solver environment overrides: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------- schemes ---

PlanReport run_scheme(const Scenario& scn, const std::string& scheme, const SolverConfig& cfg) {
  PlannerOptions opts;
  opts.solver = cfg;
  if (scheme == "proposed") return bcd_solve(scn, opts);
  if (scheme == "los") return plan_los_based(scn, LosAvoidance::Safe, opts);
  if (scheme == "los-faithful") return plan_los_based(scn, LosAvoidance::RawBuildings, opts);
  if (scheme == "fixed-alt") return plan_fixed_altitude(scn, opts);
  if (scheme == "fixed-traj") {
    FixedTrajectoryOptions fo;
    fo.solver = cfg;
    return plan_fixed_trajectory(scn, fo);
  }
  throw DomainError("unknown scheme \"" + scheme + "\"");
}

Scenario verification_scenario(const Scenario& scn, const std::string& scheme) {
  return scheme == "fixed-alt" ? fixed_altitude_scenario(scn) : scn;
}

Scenario apply_sweep(const Scenario& scn, const std::string& key, double value) {
  Scenario out = scn;
  if (key == "T") {
    out.uav.T = value;
  } else if (key == "pk") {
    out.channel.pk = dbm_to_watts(value);
  } else if (key == "alphaN") {
    out.channel.alpha_N = value;
  } else {
    throw DomainError("unknown sweep key \"" + key + "\" (expected T, pk or alphaN)");
  }
  out.validate();
  return out;
}

// ------------------------------------------------------------------ files ---

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p, const std::string& header) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ScenarioError(p.string() + ":1: expected header \"" + header + "\"");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_cell(const std::string& s, const std::filesystem::path& p, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ScenarioError(p.string() + ":" + std::to_string(row + 2) + ": \"" + s + "\" is not a number");
  }
  return v;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& p, const Trajectory& traj) {
  auto out = open_out(p);
  out << "n,x,y,z\n";
  for (std::size_t n = 0; n < traj.q.size(); ++n) {
    const Vec3& q = traj.q[n];
    out << n << ',' << format_number(q.x()) << ',' << format_number(q.y()) << ',' << format_number(q.z()) << '\n';
  }
}

void write_schedule_csv(const std::filesystem::path& p, const Schedule& sched) {
  auto out = open_out(p);
  out << "n,k\n";
  for (Eigen::Index j = 0; j < sched.cols(); ++j) {
    int k = -1;
    for (Eigen::Index r = 0; r < sched.rows(); ++r) {
      if (sched(r, j) >= 0.5) {
        k = static_cast<int>(r) + 1;
        break;
      }
    }
    out << j + 1 << ',' << k << '\n';
  }
}

void write_states_csv(const std::filesystem::path& p, const Grid& los) {
  auto out = open_out(p);
  out << "n,k,los\n";
  for (Eigen::Index j = 0; j < los.cols(); ++j) {
    for (Eigen::Index k = 0; k < los.rows(); ++k) {
      out << j + 1 << ',' << k + 1 << ',' << (los(k, j) >= 0.5 ? 1 : 0) << '\n';
    }
  }
}

void write_trace_csv(const std::filesystem::path& p, const std::vector<double>& trace) {
  auto out = open_out(p);
  out << "r,f\n";
  for (std::size_t r = 0; r < trace.size(); ++r) out << r + 1 << ',' << format_number(trace[r]) << '\n';
}

json report_to_json(const PlanReport& rep) {
  // Numbers go through the 12-digit formatter so the file is reproducible.
  auto num = [](double v) { return std::stod(format_number(v)); };
  json j;
  j["scheme"] = rep.scheme;
  j["rates"] = json::array();
  for (double r : rep.rates) j["rates"].push_back(num(r));
  j["min_rate"] = num(rep.min_rate);
  j["initial_value"] = num(rep.initial_value);
  j["trace"] = json::array();
  for (double f : rep.trace) j["trace"].push_back(num(f));
  j["lp_value"] = num(rep.lp_value);
  j["surrogate_value"] = num(rep.surrogate_value);
  j["iterations"] = rep.iterations;
  j["polish_iterations"] = rep.polish_iterations;
  j["newton_steps"] = rep.newton_steps;
  j["fallbacks"] = rep.fallbacks;
  j["failed_subproblems"] = rep.failed_subproblems;
  j["converged"] = rep.converged;
  j["failed"] = rep.failed;
  j["message"] = rep.message;
  j["diagnostics"] = {{"soundness_violations", rep.soundness_violations},
                      {"nlos_cbar_violations", rep.nlos_cbar_violations},
                      {"los_cbar_shortfalls", rep.los_cbar_shortfalls}};
  j["trajectory"] = json::array();
  for (const Vec3& q : rep.traj.q) j["trajectory"].push_back({num(q.x()), num(q.y()), num(q.z())});
  j["schedule"] = json::array();
  for (Eigen::Index n = 0; n < rep.schedule.cols(); ++n) {
    int k = -1;
    for (Eigen::Index r = 0; r < rep.schedule.rows(); ++r) {
      if (rep.schedule(r, n) >= 0.5) k = static_cast<int>(r) + 1;
    }
    j["schedule"].push_back(k);
  }
  j["states"] = json::array();
  for (Eigen::Index k = 0; k < rep.los.rows(); ++k) {
    json row = json::array();
    for (Eigen::Index n = 0; n < rep.los.cols(); ++n) row.push_back(rep.los(k, n) >= 0.5 ? 1 : 0);
    j["states"].push_back(row);
  }
  j["certificate"] = json::array();
  for (const auto& c : rep.certificate.checks) {
    j["certificate"].push_back({{"check", c.name}, {"passed", c.passed}, {"slot", c.slot}, {"detail", c.detail}});
  }
  return j;
}

void write_run(const std::filesystem::path& dir, const PlanReport& rep) {
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir / "trajectory.csv", rep.traj);
  write_schedule_csv(dir / "schedule.csv", rep.schedule);
  write_states_csv(dir / "states.csv", rep.los);
  write_trace_csv(dir / "trace.csv", rep.trace);
  auto out = open_out(dir / "report.json");
  out << report_to_json(rep).dump(2) << '\n';
}

Trajectory read_trajectory_csv(const std::filesystem::path& p) {
  const auto rows = read_csv(p, "n,x,y,z");
  Trajectory traj;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw ScenarioError(p.string() + ":" + std::to_string(i + 2) + ": expected 4 columns");
    if (static_cast<std::size_t>(parse_cell(rows[i][0], p, i)) != i) {
      throw ScenarioError(p.string() + ":" + std::to_string(i + 2) + ": slot index out of sequence");
    }
    traj.q.emplace_back(parse_cell(rows[i][1], p, i), parse_cell(rows[i][2], p, i), parse_cell(rows[i][3], p, i));
  }
  return traj;
}

Schedule read_schedule_csv(const std::filesystem::path& p, int K) {
  const auto rows = read_csv(p, "n,k");
  Schedule s = Schedule::Zero(K, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw ScenarioError(p.string() + ":" + std::to_string(i + 2) + ": expected 2 columns");
    if (static_cast<std::size_t>(parse_cell(rows[i][0], p, i)) != i + 1) {
      throw ScenarioError(p.string() + ":" + std::to_string(i + 2) + ": slot index out of sequence");
    }
    const int k = static_cast<int>(parse_cell(rows[i][1], p, i));
    if (k == -1) continue;
    if (k < 1 || k > K) throw ScenarioError(p.string() + ":" + std::to_string(i + 2) + ": GN index out of range");
    s(k - 1, static_cast<Eigen::Index>(i)) = 1.0;
  }
  return s;
}

}  // namespace uavplan
