#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gectl/errors.hpp"
#include "gectl/estimation.hpp"
#include "gectl/groundfx.hpp"
#include "gectl/harness.hpp"
#include "gectl_oracles/oracles.hpp"

namespace fs = std::filesystem;
using namespace gectl;

namespace {

std::mutex g_print;

void Say(const std::string& s) {
  std::lock_guard<std::mutex> lock(g_print);
  std::cout << s << std::flush;
}

std::string Summary(const MetricsReport& m, int code) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << m.name << ": rmse xoy " << m.rmse_xoy << " z " << m.rmse_z << " all " << m.rmse_all
     << " cm, max " << m.max_error << " cm, attitude " << m.attitude_rmse << " deg, status "
     << m.status << " (exit " << code << ")\n";
  return os.str();
}

// Runs tasks on `jobs` worker slots; returns the exit codes in task order.
std::vector<int> RunParallel(const std::vector<std::function<int()>>& tasks, int jobs) {
  std::vector<int> codes(tasks.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) codes[i] = tasks[i]();
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return codes;
}

int FirstFailure(const std::vector<int>& codes) {
  for (int c : codes) {
    if (c != kExitOk) return c;
  }
  return kExitOk;
}

void WriteProfile(const fs::path& dir, const MetricsReport& m) {
  if (m.profile.empty()) return;
  std::ofstream f(dir / "profile.csv");
  f << "h,error_rad,samples\n";
  for (const ProfileBin& b : m.profile) {
    f << FormatDouble(b.h) << ',' << FormatDouble(b.error) << ',' << b.samples << "\n";
  }
}

int RunOne(const KeyValueConfig& cfg, const fs::path& dir) {
  const Scenario s = ScenarioFromConfig(cfg);
  const RunResult r = RunToDirectory(s, dir);
  WriteProfile(dir, r.metrics);
  Say(Summary(r.metrics, r.exit_code));
  if (!r.error.empty()) Say("  " + r.error + "\n");
  return r.exit_code;
}

// Minimal header-addressed numeric CSV.
class NumericCsv {
 public:
  explicit NumericCsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty csv '" + path.string() + "'");
    header_ = Split(line);
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto cells = Split(line);
      if (cells.size() != header_.size()) {
        throw InputError("csv line " + std::to_string(lineno) + ": expected " +
                         std::to_string(header_.size()) + " fields");
      }
      std::vector<double> row;
      for (const auto& c : cells) {
        double v = 0.0;
        const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
        if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
          throw InputError("csv line " + std::to_string(lineno) + ": bad number '" + c + "'");
        }
        row.push_back(v);
      }
      rows_.push_back(std::move(row));
    }
  }

  std::vector<double> Column(const std::string& name) const {
    const auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) throw InputError("csv has no column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - header_.begin());
    std::vector<double> out;
    for (const auto& r : rows_) out.push_back(r[k]);
    return out;
  }
  bool Has(const std::string& name) const {
    return std::find(header_.begin(), header_.end(), name) != header_.end();
  }

 private:
  static std::vector<std::string> Split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      out.push_back(cell);
    }
    return out;
  }
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

void Emit(const std::string& text, const std::string& out_file) {
  std::cout << text;
  if (!out_file.empty()) {
    if (fs::path(out_file).has_parent_path()) fs::create_directories(fs::path(out_file).parent_path());
    std::ofstream(out_file) << text;
  }
}

int Identify(const std::string& op, const fs::path& input, const std::string& out,
             double mass, double k_inf, double bin) {
  const NumericCsv csv(input);
  if (op == "fg") {
    std::vector<FgSample> s;
    const auto h = csv.Column("h");
    const auto fg = csv.Column("fg");
    for (std::size_t i = 0; i < h.size(); ++i) s.push_back({h[i], fg[i]});
    const FitReport r = FitFg(s);
    std::cout << r.ToText();
    if (!out.empty()) std::ofstream(out) << r.ToJson();
  } else if (op == "mg") {
    std::vector<MgSample> s;
    const auto h = csv.Column("h"), tilt = csv.Column("tilt"), t = csv.Column("thrust"),
               tau = csv.Column("torque");
    for (std::size_t i = 0; i < h.size(); ++i) s.push_back({h[i], tilt[i], t[i], tau[i]});
    const FitReport r = FitMg(s);
    std::cout << r.ToText();
    if (!out.empty()) std::ofstream(out) << r.ToJson();
  } else if (op == "drag") {
    std::vector<DragObservation> obs;
    const auto h = csv.Column("h"), vx = csv.Column("vx"), vy = csv.Column("vy"),
               vz = csv.Column("vz"), ax = csv.Column("ax"), ay = csv.Column("ay"),
               az = csv.Column("az");
    for (std::size_t i = 0; i < h.size(); ++i) {
      obs.push_back({h[i], Vec3(vx[i], vy[i], vz[i]), Vec3(ax[i], ay[i], az[i])});
    }
    const auto fits = FitDragByAltitude(obs, mass, bin);
    if (fits.empty()) throw FitFailure("no altitude bin had enough excited samples");
    std::ostringstream os;
    os << "h,dx,dy,dx_se,dy_se,max_speed,samples\n";
    for (const DragFit& f : fits) {
      os << FormatDouble(f.h) << ',' << FormatDouble(f.dx) << ',' << FormatDouble(f.dy) << ','
         << FormatDouble(f.dx_se) << ',' << FormatDouble(f.dy_se) << ','
         << FormatDouble(f.max_speed) << ',' << f.samples << "\n";
    }
    Emit(os.str(), out);
  } else if (op == "normalize") {
    std::vector<CoeffSample> s;
    const auto h = csv.Column("h"), k = csv.Column("k");
    for (std::size_t i = 0; i < h.size(); ++i) s.push_back({h[i], k[i]});
    const auto norm =
        NormalizeCoeff(s, k_inf > 0.0 ? std::optional<double>(k_inf) : std::nullopt);
    std::ostringstream os;
    os << "h,k_rel\n";
    for (const CoeffSample& c : norm) os << FormatDouble(c.h) << ',' << FormatDouble(c.k) << "\n";
    Emit(os.str(), out);
  } else if (op == "spearman") {
    const double r = Spearman(csv.Column("x"), csv.Column("y"));
    Emit("r_s = " + FormatDouble(r) + "\n", out);
  } else {
    throw InputError("unknown identify op '" + op + "' (fg|mg|drag|normalize|spearman)");
  }
  return kExitOk;
}

int Oracle(const std::string& name, const std::string& out) {
  std::vector<std::string> names;
  if (name == "all") {
    names = oracles::OracleNames();
  } else {
    names = {name};
  }
  bool ok = true;
  for (const auto& n : names) {
    const oracles::OracleResult r = oracles::RunOracle(n);
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  if (!out.empty()) {
    fs::create_directories(out);
    const auto e = oracles::RunEquivalence(VehicleParams{}, GroundEffectParams{});
    std::ofstream f(fs::path(out) / "equivalence.csv");
    f << "t,tilt_explicit_rad,tilt_inertia_rad\n";
    for (std::size_t i = 0; i < e.time.size(); ++i) {
      f << FormatDouble(e.time[i]) << ',' << FormatDouble(e.tilt_explicit[i]) << ','
        << FormatDouble(e.tilt_inertia[i]) << "\n";
    }
    const VehicleParams v;
    const GroundEffectParams ge;
    const double t = v.mass * 9.80665;
    std::ofstream g(fs::path(out) / "ground_model.csv");
    g << "h,fg,mg,tau_closed_5deg,tau_quadrature_5deg,dx,dy\n";
    for (int i = 0; i <= 200; ++i) {
      const double h = 0.1 + 0.01 * i;
      const double d = 5.0 * kPi / 180.0;
      const Mat3 dm = DragCoefficients(h, ge);
      g << FormatDouble(h) << ',' << FormatDouble(Fg(h, ge)) << ',' << FormatDouble(Mg(h, ge))
        << ',' << FormatDouble(Mg(h, ge) * t * std::sin(d)) << ','
        << FormatDouble(oracles::QuadratureLevelingTorque(h, d, t, ge, v.wheelbase)) << ','
        << FormatDouble(dm(0, 0)) << ',' << FormatDouble(dm(1, 1)) << "\n";
    }
  }
  return ok ? kExitOk : kExitOracleFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-effect multicopter simulation, control and identification toolkit"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  app.add_option("--out", out, "output directory (or file for identify)");
  auto* seed_opt = app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--jobs", jobs, "parallel worker slots")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "run one or more scenario files");
  std::vector<std::string> run_files;
  run->add_option("scenario", run_files)->required();

  auto* sweep = app.add_subcommand("sweep", "run a scenario over values of one key");
  std::string sweep_file, sweep_param;
  std::vector<std::string> sweep_values;
  sweep->add_option("scenario", sweep_file)->required();
  sweep->add_option("--param", sweep_param)->required();
  sweep->add_option("--values", sweep_values, "space-separated values (vectors as \"x, y, z\")")->required();

  auto* identify = app.add_subcommand("identify", "fit model parameters from a csv");
  std::string id_op, id_file;
  double mass = 1.0, k_inf = 0.0, bin = 0.05;
  identify->add_option("op", id_op, "fg|mg|drag|normalize|spearman")->required();
  identify->add_option("input", id_file)->required();
  identify->add_option("--mass", mass, "vehicle mass for drag fits (kg)");
  identify->add_option("--k-inf", k_inf, "reference coefficient for normalize");
  identify->add_option("--bin", bin, "altitude bin width for drag fits (m)");

  auto* compare = app.add_subcommand("compare", "tabulate metrics.json files");
  std::vector<std::string> cmp_files;
  std::string baseline;
  compare->add_option("metrics", cmp_files)->required();
  compare->add_option("--baseline", baseline, "name of the baseline report");

  auto* oracle = app.add_subcommand("oracle", "run an oracle check standalone");
  std::string oracle_name;
  oracle->add_option("check", oracle_name,
                     "all|torque-model|derivative-identity|equivalence|lemniscate|"
                     "reference-rates|spearman")
      ->required();

  for (auto* sub : {run, sweep, identify, compare, oracle}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  seed_set = seed_opt->count() > 0;

  try {
    if (*run) {
      std::vector<KeyValueConfig> cfgs;
      for (const auto& f : run_files) {
        KeyValueConfig c = LoadScenarioConfig(f);
        if (seed_set) c.Set("seed", std::to_string(seed));
        ScenarioFromConfig(c);  // validate before anything runs
        cfgs.push_back(std::move(c));
      }
      std::vector<std::function<int()>> tasks;
      for (const auto& c : cfgs) {
        const std::string name = c.GetString("name", "unnamed");
        fs::path dir = out.empty() ? fs::path("runs") / name : fs::path(out);
        if (cfgs.size() > 1) dir = (out.empty() ? fs::path("runs") : fs::path(out)) / name;
        tasks.push_back([c, dir] { return RunOne(c, dir); });
      }
      return FirstFailure(RunParallel(tasks, jobs));
    }
    if (*sweep) {
      const KeyValueConfig base = LoadScenarioConfig(sweep_file);
      if (ScenarioKeys().count(sweep_param) == 0) {
        throw ConfigError("unknown key", sweep_param);
      }
      const fs::path root = out.empty() ? fs::path("runs") / "sweep" : fs::path(out);
      std::vector<KeyValueConfig> cfgs;
      std::vector<fs::path> dirs;
      for (const auto& v : sweep_values) {
        KeyValueConfig c = base;
        c.Set(sweep_param, v);
        if (seed_set) c.Set("seed", std::to_string(seed));
        const std::string tag = sweep_param + "=" + v;
        c.Set("name", base.GetString("name", "unnamed") + "[" + tag + "]");
        ScenarioFromConfig(c);
        cfgs.push_back(c);
        std::string dir = tag;
        dir.erase(std::remove(dir.begin(), dir.end(), ' '), dir.end());
        std::replace(dir.begin(), dir.end(), ',', '_');
        dirs.push_back(root / dir);
      }
      std::vector<std::function<int()>> tasks;
      for (std::size_t i = 0; i < cfgs.size(); ++i) {
        tasks.push_back([&, i] { return RunOne(cfgs[i], dirs[i]); });
      }
      const auto codes = RunParallel(tasks, jobs);
      std::vector<MetricsReport> reports;
      for (const auto& d : dirs) {
        std::ifstream f(d / "metrics.json");
        std::stringstream ss;
        ss << f.rdbuf();
        reports.push_back(MetricsReport::FromJson(ss.str()));
      }
      const auto rows = Compare(reports);
      std::ofstream(root / "summary.csv") << ComparisonCsv(rows);
      std::cout << ComparisonText(rows);
      return FirstFailure(codes);
    }
    if (*identify) return Identify(id_op, id_file, out, mass, k_inf, bin);
    if (*compare) {
      std::vector<MetricsReport> reports;
      for (const auto& f : cmp_files) {
        std::ifstream in(f);
        if (!in) throw InputError("cannot open '" + f + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        reports.push_back(MetricsReport::FromJson(ss.str()));
      }
      const auto rows = Compare(reports, baseline);
      std::cout << ComparisonText(rows);
      if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(fs::path(out) / "comparison.csv") << ComparisonCsv(rows);
        std::ofstream(fs::path(out) / "comparison.txt") << ComparisonText(rows);
      }
      return kExitOk;
    }
    if (*oracle) return Oracle(oracle_name, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FitFailure& e) {
    std::cerr << "fit failure: " << e.what();
    if (e.residual_rms() >= 0.0) std::cerr << " (residual rms " << e.residual_rms() << ")";
    std::cerr << "\n";
    return kExitFitFailure;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
