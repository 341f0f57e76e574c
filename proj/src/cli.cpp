#include "lzd/cli.hpp"

#include "lzd/limits.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace lzd::cli {

namespace {

constexpr double kConservationRtol = 1e-11;
constexpr double kConservationAtol = 1e-14;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::optional<double> to_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

double parse_number(std::string_view s, const std::string& what) {
  const auto v = to_double(s);
  if (!v || !std::isfinite(*v)) throw InvalidInput(what + ": expected a finite number, got '" + std::string(s) + "'");
  return *v;
}

std::vector<std::pair<double, double>> parse_nodes(const std::string& text, const std::string& what) {
  std::vector<std::pair<double, double>> nodes;
  for (const auto& item : split(text, ',')) {
    const auto tw = split(item, ':');
    if (tw.size() != 2) throw InvalidInput(what + ": nodes must look like 't:w, t:w'");
    nodes.emplace_back(parse_number(tw[0], what), parse_number(tw[1], what));
  }
  return nodes;
}

std::vector<std::pair<double, double>> read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read bias table '" + path.string() + "'");
  std::vector<std::pair<double, double>> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    const auto a = cols.size() == 2 ? to_double(cols[0]) : std::nullopt;
    const auto b = cols.size() == 2 ? to_double(cols[1]) : std::nullopt;
    if (!a || !b) {
      if (samples.empty() && lineno == 1) continue;  // header
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected 't,w'");
    }
    samples.emplace_back(*a, *b);
  }
  return samples;
}

Method parse_method(const std::string& s) {
  if (s == "auto") return Method::Auto;
  if (s == "dopri5") return Method::DormandPrince;
  if (s == "radau5") return Method::Radau;
  throw InvalidInput("method must be auto, dopri5 or radau5");
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  for (const auto& c : cells) {
    if (!row.empty()) row += ',';
    row += c;
  }
  row += '\n';
  return row;
}

const LinearSweep& require_linear(const RunConfig& cfg, const std::string& command) {
  if (!is_linear(cfg.bias)) throw InvalidInput(command + " requires bias.kind = linear");
  return std::get<LinearSweep>(cfg.bias);
}

std::optional<InitialCondition> reduced_init(const RunConfig& cfg) {
  if (!cfg.t_start) return std::nullopt;
  return InitialCondition{ReducedState{}, *cfg.t_start};
}

std::optional<FullInitialCondition> full_init(const RunConfig& cfg) {
  if (!cfg.t_start) return std::nullopt;
  return FullInitialCondition{FullState{}, *cfg.t_start};
}

// Maps library exceptions onto exit codes; anything else propagates.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Unidentifiable& e) {
    err << "error: " << e.what() << '\n';
    return kUnidentifiable;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const InstabilityError& e) {
    err << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

std::pair<double, double> parse_bounds(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() != 2) throw InvalidInput("bounds must look like lo:hi");
  return {parse_number(parts[0], "bounds"), parse_number(parts[1], "bounds")};
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  static const std::set<std::string> kKeys = {
      "delta1", "delta1_imag", "gamma_d", "gamma_e", "bias.kind", "bias.v", "bias.nodes",
      "bias.amplitude", "bias.omega", "bias.phase", "bias.file", "rtol", "atol",
      "window_factor", "seed", "t_start", "t_end", "max_steps", "method"};

  std::map<std::string, std::pair<std::string, int>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (!kKeys.contains(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (entries.contains(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    }
    entries[key] = {value, lineno};
  }

  auto where = [&](const std::string& key) {
    return "line " + std::to_string(entries.at(key).second) + ": key '" + key + "'";
  };
  auto number = [&](const std::string& key) -> std::optional<double> {
    if (!entries.contains(key)) return std::nullopt;
    const auto v = to_double(entries.at(key).first);
    if (!v || !std::isfinite(*v)) throw ConfigError(where(key) + " needs a finite number");
    return *v;
  };
  auto text = [&](const std::string& key) -> std::optional<std::string> {
    if (!entries.contains(key)) return std::nullopt;
    return entries.at(key).first;
  };
  auto integer = [&](const std::string& key) -> std::optional<long long> {
    const auto v = number(key);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || std::abs(*v) > 9e15) {
      throw ConfigError(where(key) + " needs an integer");
    }
    return static_cast<long long>(*v);
  };

  RunConfig cfg;
  cfg.params.gamma_d = 0.1;
  try {
    if (auto v = number("delta1")) cfg.params.delta1_r = *v;
    if (auto v = number("delta1_imag")) cfg.params.delta1_i = *v;
    if (auto v = number("gamma_d")) cfg.params.gamma_d = *v;
    if (auto v = number("gamma_e")) cfg.params.gamma_e = *v;
    if (auto v = number("rtol")) cfg.sim.rtol = *v;
    if (auto v = number("atol")) cfg.sim.atol = *v;
    if (auto v = number("window_factor")) cfg.sim.window_factor = *v;
    if (auto v = number("t_start")) cfg.t_start = *v;
    if (auto v = number("t_end")) cfg.sim.t_end = *v;
    if (auto v = integer("max_steps")) cfg.sim.max_steps = static_cast<long>(*v);
    if (auto v = integer("seed")) {
      if (*v < 0) throw ConfigError(where("seed") + " must be >= 0");
      cfg.seed = static_cast<unsigned long long>(*v);
    }
    if (auto m = text("method")) {
      try {
        cfg.sim.method = parse_method(*m);
      } catch (const InvalidInput& e) {
        throw ConfigError(where("method") + ": " + e.what());
      }
    }

    const std::string kind = text("bias.kind").value_or("linear");
    const std::map<std::string, std::set<std::string>> allowed = {
        {"linear", {"bias.v"}},
        {"piecewise", {"bias.nodes"}},
        {"sinusoidal", {"bias.amplitude", "bias.omega", "bias.phase"}},
        {"tabulated", {"bias.file"}},
    };
    if (!allowed.contains(kind)) {
      throw ConfigError(where("bias.kind") + " must be linear, piecewise, sinusoidal or tabulated");
    }
    for (const auto& [key, entry] : entries) {
      if (key.starts_with("bias.") && key != "bias.kind" && !allowed.at(kind).contains(key)) {
        throw ConfigError(where(key) + " does not apply to bias.kind = " + kind);
      }
    }
    if (kind == "linear") {
      cfg.bias = LinearSweep{number("bias.v").value_or(1.0)};
      if (cfg.sim.t_end) throw ConfigError(where("t_end") + ": the linear sweep window is automatic");
    } else if (kind == "piecewise") {
      if (!entries.contains("bias.nodes")) throw ConfigError("piecewise bias needs bias.nodes");
      try {
        cfg.bias = PiecewiseLinear{parse_nodes(*text("bias.nodes"), where("bias.nodes"))};
      } catch (const ConfigError&) {
        throw;
      } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
      }
    } else if (kind == "sinusoidal") {
      cfg.bias = Sinusoidal{number("bias.amplitude").value_or(1.0), number("bias.omega").value_or(1.0),
                            number("bias.phase").value_or(0.0)};
    } else {
      if (!entries.contains("bias.file")) throw ConfigError("tabulated bias needs bias.file");
      std::filesystem::path file = *text("bias.file");
      if (file.is_relative()) file = base_dir / file;
      cfg.bias = Tabulated{read_table(file)};
    }
    validate(cfg.params);
    validate(cfg.bias);
    validate(cfg.sim);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  try {
    return parse_config(in, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<double> parse_grid(const std::string& spec) {
  const std::string s = trim(spec);
  if (s.find(':') == std::string::npos) {
    std::vector<double> values;
    for (const auto& item : split(s, ',')) values.push_back(parse_number(item, "grid value"));
    return values;
  }
  const auto parts = split(s, ':');
  if (parts.size() != 4) throw InvalidInput("grid must look like lo:hi:n:lin|log");
  const double lo = parse_number(parts[0], "grid lo");
  const double hi = parse_number(parts[1], "grid hi");
  const auto n_value = to_double(parts[2]);
  if (!n_value || *n_value < 1 || *n_value != std::floor(*n_value) || *n_value > 1e6) {
    throw InvalidInput("grid point count must be a positive integer");
  }
  const auto n = static_cast<std::size_t>(*n_value);
  const std::string& scale = parts[3];
  if (scale != "lin" && scale != "log") throw InvalidInput("grid scale must be lin or log");
  if (scale == "log" && !(lo > 0.0 && hi > 0.0)) throw InvalidInput("log grids need lo, hi > 0");
  if (n == 1) return {lo};
  std::vector<double> values(n);
  const double a = scale == "log" ? std::log10(lo) : lo;
  const double b = scale == "log" ? std::log10(hi) : hi;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    values[k] = scale == "log" ? std::pow(10.0, u) : u;
  }
  values.front() = lo;
  values.back() = hi;
  return values;
}

std::string format_short(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  std::string s = buf;
  if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string format_full(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InvalidInput("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InvalidInput("cannot move output into '" + path.string() + "': " + ec.message());
  }
}

std::vector<FitSample> read_fit_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read data '" + path.string() + "'");
  std::vector<FitSample> samples;
  std::string line;
  int lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    const bool header = first && !to_double(cols.front());
    first = false;
    if (header) continue;
    const std::string loc = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 2 && cols.size() != 3) throw InvalidInput(loc + ": expected v,x_inf[,weight]");
    FitSample s;
    s.v = parse_number(cols[0], loc + " v");
    s.x_inf = parse_number(cols[1], loc + " x_inf");
    if (cols.size() == 3) s.weight = parse_number(cols[2], loc + " weight");
    samples.push_back(s);
  }
  return samples;
}

std::string sweep_csv(const SweepTable& table) {
  std::string csv = "v,gamma_d,x_inf,x_inf_unc,lz_xinf,incoherent_xinf,n_steps\n";
  for (const auto& r : table.rows) {
    csv += csv_row({format_full(r.v), format_full(r.gamma_d), r.ok ? format_full(r.x_inf) : "nan",
                    r.ok ? format_full(r.x_inf_uncertainty) : "nan", format_full(r.lz_xinf),
                    format_full(r.incoherent_xinf), std::to_string(r.n_steps)});
  }
  return csv;
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_config(opts.config);
    cfg.sim.emit_trajectory = opts.trajectory.has_value();
    TransitionResult r;
    try {
      r = opts.full ? integrate_full(cfg.params, cfg.bias, full_init(cfg), cfg.sim)
                    : integrate(cfg.params, cfg.bias, reduced_init(cfg), cfg.sim);
    } catch (const NonConvergence& e) {
      const auto& p = e.partial();
      err << "error: " << e.what() << '\n';
      out << "x_end=" << format_short(p.x_end) << '\n' << "n_steps=" << p.n_steps << '\n';
      return static_cast<int>(kNonConvergence);
    }
    out << "x_inf=" << format_short(r.x_inf) << '\n';
    out << "x_inf_unc=" << format_short(r.x_inf_uncertainty) << '\n';
    out << "n_steps=" << r.n_steps << '\n';
    out << "final_norm=" << format_short(r.final_norm) << '\n';
    if (opts.full) out << "X1_end=" << format_short(r.x_end) << '\n';
    out << "method=" << method_name(r.method) << '\n';
    out << "t_start=" << format_short(r.t_window.first) << '\n';
    out << "t_end=" << format_short(r.t_window.second) << '\n';
    if (opts.trajectory) {
      std::string csv = opts.full ? "t,X1,rho_r,rho_i\n" : "t,x,p_r,p_i\n";
      for (const auto& s : r.trajectory) {
        csv += csv_row({format_full(s.t), format_full(s.x), format_full(s.p_r), format_full(s.p_i)});
      }
      write_file_atomic(*opts.trajectory, csv);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(opts.config);
    const LinearSweep& lin = require_linear(cfg, "sweep");
    if (cfg.params.delta1_i != 0.0) throw InvalidInput("sweep uses a real gap; set delta1_imag = 0");
    if (cfg.t_start) throw InvalidInput("sweep integrates over the automatic window; remove t_start");
    SweepGrid grid;
    grid.v_values = opts.v_grid ? parse_grid(*opts.v_grid) : std::vector<double>{lin.v};
    grid.gamma_d_values =
        opts.gamma_grid ? parse_grid(*opts.gamma_grid) : std::vector<double>{cfg.params.gamma_d};
    grid.delta1 = cfg.params.delta1();
    grid.gamma_e = cfg.params.gamma_e;
    const SweepTable table = sweep(grid, cfg.sim, opts.threads);
    const std::string csv = sweep_csv(table);
    if (opts.out) {
      write_file_atomic(*opts.out, csv);
    } else {
      out << csv;
    }
    for (const auto& r : table.rows) {
      if (!r.ok) err << "point v=" << format_full(r.v) << " gamma_d=" << format_full(r.gamma_d)
                     << " failed: " << r.error << '\n';
    }
    return static_cast<int>(table.all_ok() ? kOk : kPartialSweep);
  });
}

int cmd_limits(const LimitsOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!std::isfinite(opts.delta1) || !std::isfinite(opts.gamma_d)) {
      throw InvalidInput("delta1 and gamma_d must be finite");
    }
    const double lz = landau_zener_xinf(opts.delta1, opts.v);
    const double kp = kayanuma_paper_xinf(opts.delta1, opts.v);
    const double inc = incoherent_xinf(opts.delta1, opts.v);
    std::optional<double> traj;
    if (opts.t) traj = incoherent_trajectory(opts.delta1, opts.v, opts.gamma_d, *opts.t);
    out << "lz=" << format_short(lz) << '\n';
    out << "kayanuma_paper=" << format_short(kp) << '\n';
    out << "incoherent_derived=" << format_short(inc) << '\n';
    if (traj) out << "incoherent_trajectory=" << format_short(*traj) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_fit(const FitOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(opts.config);
    if (cfg.params.delta1_i != 0.0) throw InvalidInput("fit uses a real gap; set delta1_imag = 0");
    if (!(opts.noise >= 0.0) || !std::isfinite(opts.noise)) throw InvalidInput("noise must be >= 0");
    FitProblem problem;
    problem.samples = read_fit_data(opts.data);
    problem.delta1 = cfg.params.delta1();
    problem.gamma_e = cfg.params.gamma_e;
    if (opts.alpha) problem.alpha = *opts.alpha;
    if (opts.bounds) problem.gamma_d_bounds = parse_bounds(*opts.bounds);
    if (opts.noise > 0.0) {
      std::mt19937_64 rng(cfg.seed.value_or(0));
      std::normal_distribution<double> gauss(0.0, opts.noise);
      for (auto& s : problem.samples) s.x_inf += gauss(rng);
    }
    const FitResult fit = fit_gamma_d(problem, cfg.sim);

    out << "gamma_d_hat=" << format_short(fit.gamma_d_hat) << '\n';
    out << "weighted_rss=" << format_short(fit.weighted_rss) << '\n';
    out << "curvature_stderr=" << format_short(fit.curvature_stderr) << '\n';
    out << "at_bound=" << (fit.at_bound ? "true" : "false") << '\n';
    out << "n_model_evals=" << fit.n_model_evals << '\n';

    auto finite_or_null = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
    nlohmann::ordered_json report;
    report["gamma_d_hat"] = fit.gamma_d_hat;
    report["weighted_rss"] = fit.weighted_rss;
    report["curvature_stderr"] = finite_or_null(fit.curvature_stderr);
    report["curvature_stderr_units"] = "log10(gamma_d)";
    report["at_bound"] = fit.at_bound;
    report["n_model_evals"] = fit.n_model_evals;
    report["delta1"] = problem.delta1;
    report["gamma_e"] = problem.gamma_e;
    report["alpha"] = problem.alpha;
    report["gamma_d_bounds"] = {problem.gamma_d_bounds.first, problem.gamma_d_bounds.second};
    report["noise"] = opts.noise;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < problem.samples.size(); ++i) {
      nlohmann::ordered_json row;
      row["v"] = problem.samples[i].v;
      row["x_inf"] = problem.samples[i].x_inf;
      row["weight"] = fit.weights[i];
      row["model_x_inf"] = fit.model_xinf[i];
      row["residual"] = fit.residuals[i];
      rows.push_back(row);
    }
    report["samples"] = rows;

    std::filesystem::path report_path;
    if (opts.report) {
      report_path = *opts.report;
    } else {
      report_path = opts.data;
      report_path.replace_extension(".fit.json");
    }
    write_file_atomic(report_path, report.dump(2) + "\n");
    out << "report=" << report_path.string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(opts.config);
    const LinearSweep& lin = require_linear(cfg, "check");
    if (cfg.t_start) throw InvalidInput("check integrates over the automatic window; remove t_start");
    const ModelParams& params = cfg.params;
    const double delta = params.delta1();
    bool all_pass = true;
    auto report = [&](const std::string& name, bool pass, const std::string& detail) {
      out << name << '=' << (pass ? "pass" : "fail") << ' ' << detail << '\n';
      all_pass = all_pass && pass;
    };

    // Norm: conserved without decoherence, otherwise non-increasing per step.
    // Conservation is only exact up to accumulated truncation error, so that
    // variant runs at tight tolerances.
    {
      SimConfig sim = cfg.sim;
      sim.window_doubling = false;
      sim.check_norm_monotone = params.gamma_d > 0.0;
      if (params.gamma_d == 0.0) {
        sim.rtol = std::min(sim.rtol, kConservationRtol);
        sim.atol = std::min(sim.atol, kConservationAtol);
      }
      const ModelParams reduced{delta, 0.0, params.gamma_d, 0.0};
      try {
        const TransitionResult r = integrate(reduced, lin, std::nullopt, sim);
        const double drift = std::abs(r.final_norm - r.initial_norm);
        if (params.gamma_d == 0.0) {
          report("norm_conservation", drift < 1e-8, "|dN|=" + format_short(drift));
        } else {
          report("norm_contraction", r.final_norm <= r.initial_norm,
                 "N0=" + format_short(r.initial_norm) + " N1=" + format_short(r.final_norm));
        }
      } catch (const InstabilityError& e) {
        report(params.gamma_d == 0.0 ? "norm_conservation" : "norm_contraction", false, e.what());
      }
    }

    // Scale invariance: (Δ₁, v, γ_d) against (cΔ₁, c²v, cγ_d).
    {
      constexpr double c = 2.0;
      const ModelParams base{delta, 0.0, params.gamma_d, 0.0};
      const ModelParams scaled{c * delta, 0.0, c * params.gamma_d, 0.0};
      SimConfig sim = cfg.sim;
      sim.window_doubling = false;
      const double x1 = integrate(base, lin, std::nullopt, sim).x_inf;
      const double x2 = integrate(scaled, LinearSweep{c * c * lin.v}, std::nullopt, sim).x_inf;
      report("scale_invariance", std::abs(x1 - x2) < 1e-6, "|dx|=" + format_short(std::abs(x1 - x2)));
    }

    // Phase invariance of the full system at fixed |Δ₁|.
    {
      SimConfig sim = cfg.sim;
      sim.window_doubling = false;
      const ModelParams base{delta, 0.0, params.gamma_d, params.gamma_e};
      const auto [t0, t1] = auto_window(base, lin, sim);
      for (int k = 0; k <= 200; ++k) sim.sample_times.push_back(t0 + (t1 - t0) * k / 200.0);
      std::vector<std::vector<TrajectorySample>> runs;
      for (double phi : {0.0, std::numbers::pi / 4.0, std::numbers::pi / 2.0}) {
        const ModelParams p{delta * std::cos(phi), delta * std::sin(phi), params.gamma_d, params.gamma_e};
        runs.push_back(integrate_full(p, lin, std::nullopt, sim).trajectory);
      }
      double worst = 0.0;
      bool same_shape = true;
      for (const auto& run : runs) {
        same_shape = same_shape && run.size() == runs.front().size();
        for (std::size_t i = 0; same_shape && i < run.size(); ++i) {
          worst = std::max(worst, std::abs(run[i].x - runs.front()[i].x));
        }
      }
      report("phase_invariance", same_shape && worst <= 10.0 * cfg.sim.rtol,
             "max|dX1|=" + format_short(worst));
    }

    // Third-order equation residual along a dense trajectory.
    {
      SimConfig sim = cfg.sim;
      sim.window_doubling = false;
      const ModelParams reduced{delta, 0.0, params.gamma_d, 0.0};
      const auto [t0, t1] = auto_window(reduced, lin, sim);
      sim.sample_times = residual_grid(reduced, lin.v, t0, t1);
      const TransitionResult r = integrate(reduced, lin, std::nullopt, sim);
      const auto residuals = third_order_residual(r.trajectory, reduced, lin.v);
      double worst = 0.0;
      for (const auto& s : residuals) worst = std::max(worst, s.scaled());
      report("third_order_residual", !residuals.empty() && worst < 1e-6,
             "max_scaled=" + format_short(worst));
    }

    return static_cast<int>(all_pass ? kOk : kCheckFailed);
  });
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dissipative Landau-Zener transitions: simulation, limits and decoherence fits", "lzd"};
  app.require_subcommand(1);

  SimulateOptions sim_opts;
  std::string sim_traj;
  auto* simulate = app.add_subcommand("simulate", "Integrate one configured point");
  simulate->add_option("config", sim_opts.config, "Run configuration file")->required();
  simulate->add_option("--trajectory", sim_traj, "Write the trajectory to this CSV file");
  simulate->add_flag("--full", sim_opts.full, "Integrate the full system (complex gap, relaxation)");

  SweepOptions sweep_opts;
  std::string v_grid;
  std::string gamma_grid;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Tabulate x(+inf) over a (v, gamma_d) grid");
  sweep_cmd->add_option("config", sweep_opts.config, "Run configuration file")->required();
  sweep_cmd->add_option("--v-grid", v_grid, "lo:hi:n:lin|log or a comma list");
  sweep_cmd->add_option("--gamma-grid", gamma_grid, "lo:hi:n:lin|log or a comma list");
  sweep_cmd->add_option("--out", sweep_out, "Output CSV (stdout when omitted)");
  sweep_cmd->add_option("--threads", sweep_opts.threads, "Worker threads (0 = all cores)");

  LimitsOptions limit_opts;
  double limit_t = 0.0;
  auto* limits = app.add_subcommand("limits", "Closed-form limits of x(+inf)");
  limits->add_option("--delta1", limit_opts.delta1, "Tunneling gap")->required();
  limits->add_option("--v", limit_opts.v, "Sweep velocity")->required();
  limits->add_option("--gamma-d", limit_opts.gamma_d, "Decoherence rate (for the trajectory)");
  auto* t_opt = limits->add_option("--t", limit_t, "Evaluate the incoherent trajectory at this time");

  FitOptions fit_opts;
  std::string fit_bounds;
  std::string fit_report;
  double fit_alpha = 1.0;
  auto* fit = app.add_subcommand("fit", "Estimate gamma_d from measured x(+inf)");
  fit->add_option("data", fit_opts.data, "CSV with v,x_inf[,weight]")->required();
  fit->add_option("config", fit_opts.config, "Run configuration file")->required();
  auto* alpha_opt = fit->add_option("--alpha", fit_alpha, "Weight exponent, w = v^-alpha");
  fit->add_option("--bounds", fit_bounds, "gamma_d search bounds lo:hi");
  fit->add_option("--report", fit_report, "JSON report path (default <data>.fit.json)");
  fit->add_option("--noise", fit_opts.noise, "Add Gaussian noise of this sigma (seeded by 'seed')");

  CheckOptions check_opts;
  auto* check = app.add_subcommand("check", "Self-consistency checks at the configured point");
  check->add_option("config", check_opts.config, "Run configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kInputError);
  }

  if (simulate->parsed()) {
    if (!sim_traj.empty()) sim_opts.trajectory = sim_traj;
    return cmd_simulate(sim_opts, out, err);
  }
  if (sweep_cmd->parsed()) {
    if (!v_grid.empty()) sweep_opts.v_grid = v_grid;
    if (!gamma_grid.empty()) sweep_opts.gamma_grid = gamma_grid;
    if (!sweep_out.empty()) sweep_opts.out = sweep_out;
    return cmd_sweep(sweep_opts, out, err);
  }
  if (limits->parsed()) {
    if (t_opt->count() > 0) limit_opts.t = limit_t;
    return cmd_limits(limit_opts, out, err);
  }
  if (fit->parsed()) {
    if (alpha_opt->count() > 0) fit_opts.alpha = fit_alpha;
    if (!fit_bounds.empty()) fit_opts.bounds = fit_bounds;
    if (!fit_report.empty()) fit_opts.report = fit_report;
    return cmd_fit(fit_opts, out, err);
  }
  return cmd_check(check_opts, out, err);
}

}  // namespace lzd::cli
