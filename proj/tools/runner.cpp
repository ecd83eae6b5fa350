#include "runner.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "homwave/analysis.hpp"
#include "homwave/array_file.hpp"
#include "homwave/csv.hpp"
#include "homwave/error.hpp"
#include "homwave/expression.hpp"
#include "homwave/hum.hpp"
#include "homwave/kernels.hpp"

#ifndef HOMWAVE_VERSION
#define HOMWAVE_VERSION "0.0.0"
#endif

namespace homwave::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kCommands{"cell", "correctors", "rate", "l2rate", "observe", "traces", "control",
                                         "rellich"};

struct ConfigError : std::runtime_error {
  ConfigError(int line, const std::string& what) : std::runtime_error(what), line(line) {}
  int line;
};

int line_at(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

/// Parsed config plus its text, so that errors can point at the line of a key.
class Source {
 public:
  Source(std::string text) : text_(std::move(text)) {
    try {
      root_ = json::parse(text_);
    } catch (const json::parse_error& e) {
      // byte is one past the offending character
      const std::size_t b = e.byte > 0 ? e.byte - 1 : 0;
      std::string msg = e.what();
      const auto p = msg.find("syntax error");
      throw ConfigError(line_at(text_, b), "malformed JSON: " + (p == std::string::npos ? msg : msg.substr(p)));
    }
    if (!root_.is_object()) throw ConfigError(1, "config must be a JSON object");
  }
  const json& root() const { return root_; }

  /// Line of the last key of a dotted path, found by scanning for each key in turn.
  int line_of(const std::string& path) const {
    std::size_t pos = 0;
    std::size_t found = std::string::npos;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
      const auto p = text_.find('"' + part + '"', pos);
      if (p == std::string::npos) break;
      found = p;
      pos = p + part.size() + 2;
    }
    return found == std::string::npos ? 1 : line_at(text_, found);
  }

 private:
  std::string text_;
  json root_;
};

class Section {
 public:
  Section(const Source& src, const json& node, std::string path) : src_(&src), node_(&node), path_(std::move(path)) {}

  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  [[noreturn]] void fail(const std::string& k, const std::string& msg) const {
    throw ConfigError(src_->line_of(key_path(k)), key_path(k) + ": " + msg);
  }
  bool has(const std::string& k) const { return node_->contains(k); }

  template <class T>
  T get(const std::string& k, T fallback) const {
    if (!has(k)) return fallback;
    return convert<T>(k);
  }
  template <class T>
  T need(const std::string& k) const {
    if (!has(k)) throw ConfigError(src_->line_of(path_), "missing required key '" + key_path(k) + "'");
    return convert<T>(k);
  }

  Section sub(const std::string& k) const {
    static const json empty = json::object();
    if (!has(k)) return Section(*src_, empty, key_path(k));
    if (!(*node_)[k].is_object()) fail(k, "expected an object");
    return Section(*src_, (*node_)[k], key_path(k));
  }

  void allow(const std::set<std::string>& keys) const {
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!keys.count(it.key())) fail(it.key(), "unknown key");
  }

  const json& node() const { return *node_; }

 private:
  template <class T>
  T convert(const std::string& k) const {
    const json& v = (*node_)[k];
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) fail(k, "expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) fail(k, "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            fail(k, "expected a nonnegative integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(k, "expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(k, "expected a string");
      } else {
        if (!v.is_array()) fail(k, "expected an array");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      fail(k, std::string("wrong type (") + e.what() + ")");
    }
  }

  const Source* src_;
  const json* node_;
  std::string path_;
};

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json versions() {
  json v;
  v["homwave"] = HOMWAVE_VERSION;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#ifdef __VERSION__
  v["compiler"] = __VERSION__;
#endif
  v["cplusplus"] = __cplusplus;
#ifdef _OPENMP
  v["openmp"] = _OPENMP;
#endif
  return v;
}

/// Everything a command needs, parsed and validated up front.
struct Experiment {
  std::string command;
  Scenario scenario;
  std::vector<double> eps;
  double T = 1.0;
  double C0 = 1.0;
  int trials = 8;
  std::uint64_t seed = 1;
};

struct Outcome {
  json results = json::object();
  std::vector<std::string> files;
  bool complete = true;
  std::string failure;
};

class Runner {
 public:
  Runner(const Source& src, const Experiment& ex, fs::path out) : src_(src), ex_(ex), out_(std::move(out)) {}

  Outcome run() {
    const Section opts = Section(src_, src_.root(), "").sub("options");
    const std::string& c = ex_.command;
    if (c == "cell") cell(opts);
    else if (c == "correctors") correctors(opts);
    else if (c == "rate" || c == "l2rate") rate(opts, c == "l2rate");
    else if (c == "observe") observe(opts);
    else if (c == "traces") traces(opts);
    else if (c == "control") control(opts);
    else rellich(opts);
    return std::move(outcome_);
  }

 private:
  std::string file(const std::string& name) {
    outcome_.files.push_back(name);
    return (out_ / name).string();
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream f(file(name));
    if (!f) throw InvalidArgument("cannot write " + (out_ / name).string());
    f << std::setw(2) << j << '\n';
  }
  void need_eps(const Section&, const char* what) const {
    if (ex_.eps.empty())
      throw ConfigError(src_.line_of(src_.root().contains("eps") ? "eps" : "command"),
                        std::string("eps: the ") + what + " command needs a non-empty eps list");
  }
  Grid cell_grid(const Section& opts) const {
    const int res = opts.get<int>("resolution", 256);
    if (res < 8) opts.fail("resolution", "cell resolution must be at least 8");
    return Grid::cell(ex_.scenario.field.dim(), res);
  }
  HomogenizedTensor effective(const Section& opts, CorrectorSet* keep = nullptr) const {
    const auto cs = solve_correctors(ex_.scenario.field, cell_grid(opts), ex_.scenario.tol);
    const auto ahat = homogenize(ex_.scenario.field, cs);
    if (keep) *keep = cs;
    return ahat;
  }

  void cell(const Section& opts) {
    opts.allow({"resolution"});
    CorrectorSet cs;
    const HomogenizedTensor ahat = effective(opts, &cs);
    const int d = ahat.dim;
    CsvWriter w(file("ahat.csv"), {"i", "j", "value"});
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) w.row({CsvWriter::integer(i + 1), CsvWriter::integer(j + 1), CsvWriter::number(ahat.a[i][j])});
    json j;
    j["dim"] = d;
    j["resolution"] = cs.grid.cells(0);
    json m = json::array();
    for (int i = 0; i < d; ++i) {
      json row = json::array();
      for (int k = 0; k < d; ++k) row.push_back(ahat.a[i][k]);
      m.push_back(row);
    }
    j["ahat"] = m;
    const auto ev = ahat.eigenvalues();
    j["eigenvalues"] = d == 1 ? json::array({ev[0]}) : json::array({ev[0], ev[1]});
    j["mu"] = ex_.scenario.field.mu();
    j["spectrum_in_bounds"] = ev[0] >= ex_.scenario.field.mu() * (1 - 1e-12) &&
                              ev[1] <= (1 / ex_.scenario.field.mu()) * (1 + 1e-12);
    j["chi_sup"] = d == 1 ? json::array({cs.sup_norm[0]}) : json::array({cs.sup_norm[0], cs.sup_norm[1]});
    j["residual"] = cs.residual;
    j["iterations"] = cs.iterations;
    write_json("cell.json", j);
    outcome_.results = j;
  }

  void correctors(const Section& opts) {
    opts.allow({"resolution", "refinements"});
    need_eps(opts, "correctors");
    const auto& field = ex_.scenario.field;
    const int d = field.dim();
    const auto refinements = opts.get<std::vector<int>>("refinements", {32, 64, 128});
    for (int r : refinements)
      if (r < 8) opts.fail("refinements", "cell resolutions must be at least 8");

    // cell identities under refinement
    CsvWriter ci(file("cell_identities.csv"), {"resolution", "divergence_residual", "b_mean", "antisymmetry_defect",
                                                "reconstruction_residual", "relative_residual"});
    std::vector<double> recon;
    for (int r : refinements) {
      const Grid g = Grid::cell(d, r);
      const auto cs = solve_correctors(field, g, ex_.scenario.tol);
      const auto b = flux_field(field, cs);
      const auto phi = flux_corrector(b, ex_.scenario.tol);
      double mean = 0.0;
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
          double s = 0.0;
          for (double v : b.b[i][k]) s += v;
          mean = std::max(mean, std::fabs(s / static_cast<double>(b.b[i][k].size())));
        }
      recon.push_back(phi.reconstruction_residual);
      ci.row({CsvWriter::integer(r), CsvWriter::number(b.divergence_residual), CsvWriter::number(mean),
              CsvWriter::number(phi.antisymmetry_defect), CsvWriter::number(phi.reconstruction_residual),
              CsvWriter::number(phi.relative_residual)});
    }
    json orders = json::array();
    // a vanishing flux (laminates) leaves only roundoff, which has no order
    for (std::size_t i = 1; i < recon.size(); ++i)
      if (recon[i] > 1e-12 && recon[i - 1] > 1e-12) orders.push_back(std::log2(recon[i - 1] / recon[i]));
      else orders.push_back(nullptr);
    outcome_.results["reconstruction_orders"] = orders;

    // Dirichlet correctors per eps
    CorrectorSet cs;
    effective(opts, &cs);
    const double chi = std::max(cs.sup_norm[0], cs.sup_norm[1]);
    CsvWriter dc(file("dirichlet.csv"),
                 {"epsilon", "h", "deviation_1", "deviation_2", "bound", "min_abs_det", "min_det", "residual"});
    bool within = true;
    for (double eps : ex_.eps) {
      const Grid g = Grid::for_epsilon(ex_.scenario.domain, eps, ex_.scenario.nodes_per_eps, ex_.scenario.min_cells);
      const auto dcor = dirichlet_correctors(field, eps, g, ex_.scenario.tol, ex_.scenario.solver);
      const double bound = 2 * eps * chi + 1e-6;
      within = within && dcor.deviation[0] <= bound && dcor.deviation[1] <= bound;
      dc.row({CsvWriter::number(eps), CsvWriter::number(g.min_spacing()), CsvWriter::number(dcor.deviation[0]),
              CsvWriter::number(dcor.deviation[1]), CsvWriter::number(bound), CsvWriter::number(dcor.min_abs_det),
              CsvWriter::number(dcor.min_det), CsvWriter::number(dcor.residual)});
    }
    outcome_.results["chi_sup"] = chi;
    outcome_.results["deviation_within_bound"] = within;
  }

  std::function<double(const Point&)> expression_data(const Section& s, const std::string& k) const {
    if (!s.has(k)) return {};
    Expression e;
    try {
      e = Expression::parse(s.need<std::string>(k));
    } catch (const InvalidArgument& err) {
      s.fail(k, err.what());
    }
    return [e](const Point& x) { return e(x[0], x[1]); };
  }

  void rate(const Section& opts, bool l2) {
    opts.allow({"filtered", "a", "b", "phi0", "phi1", "samples", "floor", "cross_check", "doubling"});
    need_eps(opts, "rate");
    RateData data;
    data.filtered = opts.get<bool>("filtered", true);
    data.a = opts.get<std::vector<double>>("a", data.a);
    data.b = opts.get<std::vector<double>>("b", data.b);
    data.phi0 = expression_data(opts, "phi0");
    data.phi1 = expression_data(opts, "phi1");
    if (!data.filtered && !data.phi0) opts.fail("phi0", "smooth data needs a phi0 expression in x1, x2");
    if (!data.phi1) data.phi1 = [](const Point&) { return 0.0; };
    RateOptions ro;
    ro.samples = opts.get<int>("samples", ro.samples);
    if (ro.samples < 2) opts.fail("samples", "need at least two time samples");
    ro.floor = opts.get<double>("floor", ro.floor);
    ro.cross_check = opts.get<bool>("cross_check", ro.cross_check);
    ro.doubling = opts.get<bool>("doubling", ro.doubling);

    const RateTable t = l2 ? l2_rate(ex_.scenario, ex_.eps, data, ex_.T, ro) : rate_sweep(ex_.scenario, ex_.eps, data, ex_.T, ro);
    write_rate_csv(file(l2 ? "l2_rates.csv" : "rates.csv"), t);
    json fits = json::array();
    json floors = json::array();
    for (const auto& f : t.fits) {
      fits.push_back({{"metric", f.metric},
                      {"slope", f.slope},
                      {"intercept", f.intercept},
                      {"r2", f.r2},
                      {"floor", f.floor},
                      {"points", f.points}});
      if (f.floor) floors.push_back(f.metric);
    }
    json j{{"fits", fits}, {"floor_metrics", floors}, {"extras", t.extras}, {"complete", t.complete}};
    if (!t.complete) j["failure"] = t.failure;
    write_json("fits.json", j);
    outcome_.results = j;
    if (!t.complete) {
      outcome_.complete = false;
      outcome_.failure = t.failure;
    }
  }

  void observe(const Section& opts) {
    opts.allow({"baseline", "high_mode", "gamma_faces", "t_sweep"});
    need_eps(opts, "observe");
    ObservabilityOptions o;
    o.C0 = ex_.C0;
    o.T = Section(src_, src_.root(), "").get<double>("T", 0.0);
    o.trials = ex_.trials;
    o.seed = ex_.seed;
    o.baseline = opts.get<bool>("baseline", o.baseline);
    o.high_mode = opts.get<bool>("high_mode", o.high_mode);
    o.gamma_faces = opts.get<std::vector<int>>("gamma_faces", o.gamma_faces);
    for (int f : o.gamma_faces)
      if (f < 0 || f >= ex_.scenario.domain.face_count()) opts.fail("gamma_faces", "face index out of range");
    o.t_sweep = opts.get<std::vector<double>>("t_sweep", o.t_sweep);
    const auto rep = observability_ratios(ex_.scenario, ex_.eps, o);
    write_observability_csv(file("observability.csv"), rep);
    CsvWriter w(file("observability_eps.csv"),
                {"epsilon", "N", "modes", "max_upper", "min_upper", "max_lower", "min_lower", "min_gamma_upper",
                 "hom_max_upper", "hom_min_upper", "high_mode_upper", "high_mode_eps_lambda"});
    for (const auto& s : rep.per_eps)
      w.row({CsvWriter::number(s.eps), CsvWriter::number(s.N), CsvWriter::integer(static_cast<long>(s.modes)),
             CsvWriter::number(s.max_upper), CsvWriter::number(s.min_upper), CsvWriter::number(s.max_lower),
             CsvWriter::number(s.min_lower), CsvWriter::number(s.min_gamma_upper), CsvWriter::number(s.hom_max_upper),
             CsvWriter::number(s.hom_min_upper), CsvWriter::number(s.high_mode_upper),
             CsvWriter::number(s.high_mode_eps_lambda)});
    json ts = json::array();
    for (const auto& [T, v] : rep.t_sweep) ts.push_back({T, v});
    json j{{"T", rep.T},
           {"r0", rep.r0},
           {"T_ge_C0_r0", rep.T_ge_C0_r0},
           {"upper_variation", rep.upper_variation},
           {"lower_variation", rep.lower_variation},
           {"t_sweep", ts},
           {"t_sweep_slope", rep.t_sweep_slope},
           {"t_sweep_intercept", rep.t_sweep_intercept}};
    write_json("observability.json", j);
    outcome_.results = j;
  }

  void traces(const Section& opts) {
    opts.allow({"coefficient", "max_modes", "resolution"});
    need_eps(opts, "traces");
    const std::string coef = opts.get<std::string>("coefficient", "epsilon");
    if (coef != "epsilon" && coef != "homogenized") opts.fail("coefficient", "expected 'epsilon' or 'homogenized'");
    const int max_modes = opts.get<int>("max_modes", 400);
    if (max_modes < 1) opts.fail("max_modes", "must be positive");
    CsvWriter w(file("traces.csv"), {"epsilon", "k", "lambda", "trace", "ratio", "in_range"});
    CsvWriter s(file("trace_summary.csv"), {"epsilon", "modes", "in_range_modes", "max_ratio", "min_ratio", "spread"});
    json rows = json::array();
    for (double eps : ex_.eps) {
      const EpsilonSetup setup = prepare(ex_.scenario, eps);
      EigenRequest req;
      req.threshold = 1.0 / (eps * eps);
      const auto& a = coef == "epsilon" ? setup.a_eps : setup.a_hom;
      EigenBasis basis;
      {
        // cap the request; the threshold count may exceed the cap on fine 2D grids
        EigenRequest probe;
        const std::size_t interior = a.grid.interior_nodes().size();
        probe.count = static_cast<int>(std::min<std::size_t>(max_modes, std::max<std::size_t>(1, interior / 4)));
        basis = eigenpairs(a, probe);
        if (basis.lambda.back() > req.threshold) basis = eigenpairs(a, req);
      }
      const TraceTable t = eigen_trace_table(basis, eps);
      std::size_t in_range = 0;
      for (const auto& r : t.rows) {
        in_range += r.in_range;
        w.row({CsvWriter::number(eps), CsvWriter::integer(r.k), CsvWriter::number(r.lambda), CsvWriter::number(r.trace),
               CsvWriter::number(r.ratio), r.in_range ? "1" : "0"});
      }
      const double spread = t.min_ratio > 0 ? t.max_ratio / t.min_ratio : 0.0;
      s.row({CsvWriter::number(eps), CsvWriter::integer(static_cast<long>(t.rows.size())),
             CsvWriter::integer(static_cast<long>(in_range)), CsvWriter::number(t.max_ratio),
             CsvWriter::number(t.min_ratio), CsvWriter::number(spread)});
      rows.push_back({{"epsilon", eps}, {"in_range_modes", in_range}, {"spread", spread}});
    }
    outcome_.results["tables"] = rows;
  }

  void control(const Section& opts) {
    opts.allow({"mode", "coefficient", "cells", "resolution", "modes", "theta0", "theta1", "random", "method",
                "conormal"});
    const std::string conormal = opts.get<std::string>("conormal", "recovered");
    if (conormal != "recovered" && conormal != "variational") opts.fail("conormal", "expected 'recovered' or 'variational'");
    const ConormalRule rule = conormal == "recovered" ? ConormalRule::recovered : ConormalRule::variational;
    const std::string mode = opts.get<std::string>("mode", "single");
    if (mode == "sweep") {
      need_eps(opts, "control sweep");
      const auto sw = control_sweep(ex_.scenario, ex_.eps, ex_.T, ex_.C0, ex_.trials, ex_.seed, rule);
      CsvWriter w(file("control_sweep.csv"), {"epsilon", "N", "modes", "c_obs", "C_obs", "max_normal_residual",
                                               "max_verify_residual", "max_duality", "condition"});
      for (const auto& r : sw.rows)
        w.row({CsvWriter::number(r.eps), CsvWriter::number(r.N), CsvWriter::integer(static_cast<long>(r.modes)),
               CsvWriter::number(r.c_obs), CsvWriter::number(r.C_obs), CsvWriter::number(r.max_normal_residual),
               CsvWriter::number(r.max_verify_residual), CsvWriter::number(r.max_duality), CsvWriter::number(r.condition)});
      json j{{"T", sw.T}, {"c_variation", sw.c_variation}, {"C_variation", sw.C_variation}};
      write_json("control_sweep.json", j);
      outcome_.results = j;
      return;
    }
    if (mode != "single") opts.fail("mode", "expected 'single' or 'sweep'");

    const std::string coef = opts.get<std::string>("coefficient", "homogenized");
    if (coef != "epsilon" && coef != "homogenized") opts.fail("coefficient", "expected 'epsilon' or 'homogenized'");
    const auto& domain = ex_.scenario.domain;
    ControlProblem p;
    double eps = ex_.eps.empty() ? 0.0 : ex_.eps.front();
    if (coef == "homogenized") {
      std::vector<int> cells = opts.get<std::vector<int>>("cells", {});
      if (cells.empty()) cells.assign(domain.dim(), 64);
      if (static_cast<int>(cells.size()) != domain.dim()) opts.fail("cells", "need one cell count per axis");
      for (int c : cells)
        if (c < 4) opts.fail("cells", "need at least 4 cells per axis");
      const Grid g = Grid::on(domain, {cells[0], domain.dim() == 2 ? cells[1] : 1});
      p.a = homogenized_field(effective(opts), g);
    } else {
      need_eps(opts, "control");
      p.a = prepare(ex_.scenario, eps).a_eps;
    }
    const int modes = opts.get<int>("modes", 0);
    EigenRequest req;
    if (modes > 0) {
      req.count = modes + 1;
    } else {
      if (eps <= 0.0) opts.fail("modes", "give a mode count or an eps for the frequency threshold");
      req.threshold = frequency_threshold(eps, ex_.T, ex_.C0);
      p.regime_threshold = req.threshold;
    }
    p.basis = std::make_shared<EigenBasis>(eigenpairs(p.a, req));
    const auto& lam = p.basis->lambda;
    if (modes > 0) {
      if (lam.size() < static_cast<std::size_t>(modes) + 1) opts.fail("modes", "eigensolver returned too few modes");
      p.N = 0.5 * (lam[modes - 1] + lam[modes]);
    } else {
      p.N = req.threshold;
    }
    p.T = ex_.T;
    p.cfl = ex_.scenario.cfl;
    p.conormal = rule;
    const std::size_t K = p.basis->count_at_most(p.N);
    if (K == 0) opts.fail("modes", "no eigenvalue lies below the threshold");
    if (opts.get<bool>("random", false)) {
      // unit targets: |P_N theta0| + |P_N theta1|_H^-1 = 1
      std::mt19937_64 rng(ex_.seed);
      std::normal_distribution<double> normal;
      std::vector<double> c0(K), c1(K);
      double d0 = 0.0, d1 = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        c0[k] = normal(rng);
        c1[k] = normal(rng);
        d0 += c0[k] * c0[k];
        d1 += c1[k] * c1[k] / p.basis->lambda[k];
      }
      const double scale = std::sqrt(d0) + std::sqrt(d1);
      for (std::size_t k = 0; k < K; ++k) {
        c0[k] /= scale;
        c1[k] /= scale;
      }
      p.theta0 = combine(*p.basis, c0);
      p.theta1 = combine(*p.basis, c1);
    } else {
      auto coeffs = [&](const char* k) {
        auto c = opts.get<std::vector<double>>(k, {});
        if (c.size() > K) opts.fail(k, "more coefficients than filtered modes (" + std::to_string(K) + ")");
        c.resize(K, 0.0);
        return combine(*p.basis, c);
      };
      if (!opts.has("theta0") && !opts.has("theta1")) opts.fail("theta0", "give theta0/theta1 coefficients or random");
      p.theta0 = coeffs("theta0");
      p.theta1 = coeffs("theta1");
    }
    const std::string method = opts.get<std::string>("method", "dense");
    if (method != "dense" && method != "cg") opts.fail("method", "expected 'dense' or 'cg'");
    ControlResult r = solve_control(p, method == "dense" ? ControlMethod::dense : ControlMethod::cg);
    const auto v = verify_control(r, p);
    const auto dual = duality_check(r, p, ex_.seed);
    write_control_csv(file("control.csv"), r);
    write_control_summary(file("control.json"), r);
    outcome_.results = {{"modes", r.K},
                        {"N", p.N},
                        {"normal_residual", r.normal_residual},
                        {"residual_position", v[0]},
                        {"residual_velocity", v[1]},
                        {"duality_defect", dual.defect},
                        {"duality_relative", dual.relative},
                        {"control_norm", r.control_norm},
                        {"condition", r.condition},
                        {"in_regime", r.in_regime}};
  }

  void rellich(const Section& opts) {
    opts.allow({"mode", "refinements", "x0", "mode_index", "resolution"});
    const std::string mode = opts.get<std::string>("mode", "homogenized");
    if (mode != "homogenized" && mode != "full") opts.fail("mode", "expected 'homogenized' or 'full'");
    const auto& sc = ex_.scenario;
    const auto& domain = sc.domain;
    const auto refinements = opts.get<std::vector<int>>("refinements", {16, 32, 64});
    if (refinements.empty()) opts.fail("refinements", "need at least one refinement level");
    const int idx = opts.get<int>("mode_index", 0);
    if (idx < 0) opts.fail("mode_index", "must be nonnegative");
    const auto x0v = opts.get<std::vector<double>>("x0", {0.0, 0.0});
    if (x0v.size() != 2) opts.fail("x0", "expected two coordinates");
    const Point x0{x0v[0], x0v[1]};
    double eps = 0.0;
    HomogenizedTensor ahat;
    if (mode == "full") {
      need_eps(opts, "rellich");
      eps = ex_.eps.front();
      for (int n : refinements)
        if (n < 8) opts.fail("refinements", "nodes per eps must be at least 8");
    } else {
      ahat = effective(opts);
      for (int n : refinements)
        if (n < 4) opts.fail("refinements", "need at least 4 cells per unit length");
    }
    CsvWriter w(file("rellich.csv"), {"refinement", "h", "lhs", "rhs", "residual", "divergence_term", "coefficient_term",
                                      "energy_term", "time_term"});
    std::vector<double> res;
    for (int n : refinements) {
      Grid g;
      TensorField a;
      std::vector<std::array<Mat2, 2>> da;
      std::vector<Mat2> bt;
      if (mode == "full") {
        g = Grid::for_epsilon(domain, eps, n, sc.min_cells);
        a = sample_epsilon(sc.field, eps, g);
        da = coefficient_gradient(sc.field, eps, g);
        std::vector<Point> pts;
        for (const auto& q : boundary_quadrature(g)) pts.push_back(g.node_coord(q.node));
        bt = sample_points(sc.field, eps, pts);
      } else {
        std::array<int, 2> cells{1, 1};
        for (int k = 0; k < domain.dim(); ++k)
          cells[k] = std::max(4, static_cast<int>(std::lround(n * domain.extent(k))));
        g = Grid::on(domain, cells);
        a = homogenized_field(ahat, g);
      }
      EigenRequest req;
      req.count = idx + 1;
      const auto basis = eigenpairs(a, req);
      WaveOptions o;
      o.T = ex_.T;
      o.cfl = sc.cfl;
      const WaveState s{0.0, basis.psi[idx], std::vector<double>(g.node_count(), 0.0)};
      const auto r = rellich_residual(a, da, s, o, x0, mode == "full" ? RellichMode::full : RellichMode::homogenized, bt);
      res.push_back(r.residual);
      w.row({CsvWriter::integer(n), CsvWriter::number(g.min_spacing()), CsvWriter::number(r.lhs), CsvWriter::number(r.rhs),
             CsvWriter::number(r.residual), CsvWriter::number(r.divergence_term), CsvWriter::number(r.coefficient_term),
             CsvWriter::number(r.energy_term), CsvWriter::number(r.time_term)});
    }
    json orders = json::array();
    for (std::size_t i = 1; i < res.size(); ++i)
      orders.push_back(res[i] > 0 && res[i - 1] > 0 ? std::log2(res[i - 1] / res[i]) : 0.0);
    json j{{"mode", mode}, {"residuals", res}, {"orders", orders}};
    write_json("rellich.json", j);
    outcome_.results = j;
  }

  const Source& src_;
  const Experiment& ex_;
  fs::path out_;
  Outcome outcome_;
};

double default_mu(const std::string& preset, const CoefficientSpec& spec, const Section& s) {
  if (preset == "constant") return std::min(spec.value, 1.0 / spec.value);
  if (preset == "checkerboard2d") return std::min({1.0, spec.contrast, 1.0 / spec.contrast});
  if (preset == "expression" || preset == "gridded") s.fail("preset", "expression and gridded presets need an explicit mu");
  return 1.0 / 3.0;
}

CoefficientSpec gridded_spec(const Section& s, int dim, const std::string& base_dir) {
  CoefficientSpec spec;
  spec.preset = "gridded";
  spec.dim = dim;
  fs::path p = s.need<std::string>("file");
  if (p.is_relative()) p = fs::path(base_dir) / p;
  ArrayData data;
  try {
    data = read_array_file(p.string());
  } catch (const Error& e) {
    s.fail("file", e.what());
  }
  if (data.dim != dim) s.fail("file", "array file dimension differs from scenario.dim");
  const int d = dim;
  if (data.components != 1 && data.components != d * d) s.fail("file", "expected 1 or d*d components per node");
  spec.resolution = {data.resolution[0], d == 2 ? data.resolution[1] : 1};
  const std::size_t n = static_cast<std::size_t>(spec.resolution[0]) * spec.resolution[1];
  if (data.values.size() != n * data.components) s.fail("file", "value count does not match the header");
  spec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Mat2 m{};
    if (data.components == 1) {
      m = identity_tensor(data.values[i]);
    } else {
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) m[r][c] = data.values[i * data.components + r * d + c];
    }
    if (d == 1) m[1][1] = 0.0;
    spec.samples[i] = m;
  }
  return spec;
}

Experiment parse_experiment(const Source& src, const std::string& config_path, std::optional<std::uint64_t> seed) {
  const Section top(src, src.root(), "");
  top.allow({"command", "scenario", "eps", "grid", "T", "cfl", "C0", "trials", "seed", "tol", "out", "options"});
  struct {
    std::string command;
    std::vector<double> eps;
    double T = 1.0, C0 = 1.0;
    int trials = 8;
    std::uint64_t seed = 1;
  } ex;
  ex.command = top.need<std::string>("command");
  if (std::find(kCommands.begin(), kCommands.end(), ex.command) == kCommands.end())
    top.fail("command", "unknown command '" + ex.command + "'");

  const Section sc = top.sub("scenario");
  sc.allow({"preset", "dim", "value", "contrast", "entries", "file", "mu", "lipschitz", "domain"});
  CoefficientSpec spec;
  spec.preset = sc.get<std::string>("preset", "constant");
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), spec.preset) == names.end())
    sc.fail("preset", "unknown preset '" + spec.preset + "'");
  int dim = sc.get<int>("dim", spec.preset == "laminate2d" || spec.preset == "smooth_checker2d" ||
                                        spec.preset == "checkerboard2d"
                                    ? 2
                                    : 1);
  if (dim != 1 && dim != 2) sc.fail("dim", "dimension must be 1 or 2");
  if ((spec.preset == "cosine1d" && dim != 1) ||
      ((spec.preset == "laminate2d" || spec.preset == "smooth_checker2d" || spec.preset == "checkerboard2d") && dim != 2))
    sc.fail("dim", "dimension does not match preset '" + spec.preset + "'");
  spec.dim = dim;
  spec.value = sc.get<double>("value", spec.value);
  if (!(spec.value > 0.0)) sc.fail("value", "must be positive");
  spec.contrast = sc.get<double>("contrast", spec.contrast);
  if (!(spec.contrast > 0.0)) sc.fail("contrast", "must be positive");
  if (spec.preset == "expression") {
    const auto e = sc.need<std::vector<std::string>>("entries");
    if (e.size() != (dim == 1 ? 1u : 4u)) sc.fail("entries", dim == 1 ? "expected one entry" : "expected four entries");
    for (std::size_t k = 0; k < e.size(); ++k) spec.entries[k] = e[k];
  }
  if (spec.preset == "gridded") {
    const std::string base = fs::path(config_path).has_parent_path() ? fs::path(config_path).parent_path().string() : ".";
    spec = gridded_spec(sc, dim, base);
  }
  const double mu = sc.has("mu") ? sc.get<double>("mu", 0.0) : default_mu(spec.preset, spec, sc);
  const double lipschitz = sc.get<double>("lipschitz", 0.0);
  std::vector<double> ext = sc.get<std::vector<double>>("domain", std::vector<double>(dim, 1.0));
  if (static_cast<int>(ext.size()) != dim) sc.fail("domain", "need one extent per dimension");
  for (double e : ext)
    if (!(e > 0.0)) sc.fail("domain", "extents must be positive");

  PeriodicCoefficientField field = [&] {
    try {
      return build_field(spec, mu, lipschitz);
    } catch (const InvalidArgument& e) {
      sc.fail(sc.has("mu") ? "mu" : "preset", e.what());
    }
  }();
  const Domain domain = dim == 1 ? Domain::interval(ext[0]) : Domain::rectangle(ext[0], ext[1]);

  const Section grid = top.sub("grid");
  grid.allow({"nodes_per_eps", "min_cells"});
  const int n_per = grid.get<int>("nodes_per_eps", 8);
  if (n_per < 8) grid.fail("nodes_per_eps", "grid rule needs h <= eps/8, i.e. nodes_per_eps >= 8");
  const int min_cells = grid.get<int>("min_cells", 16);
  if (min_cells < 2) grid.fail("min_cells", "must be at least 2");

  ex.eps = top.get<std::vector<double>>("eps", {});
  for (double e : ex.eps) {
    if (!(e > 0.0) || e > 1.0) top.fail("eps", "each eps must lie in (0, 1]");
    for (int k = 0; k < dim; ++k) {
      const int cells = std::max(min_cells, static_cast<int>(std::lround(ext[k] / e * n_per)));
      if (ext[k] / cells > e / 8.0 * (1 + 1e-12)) top.fail("eps", "grid rule gives h > eps/8 for eps=" + std::to_string(e));
    }
  }
  ex.T = top.get<double>("T", 1.0);
  if (!(ex.T > 0.0) && ex.command != "observe") top.fail("T", "must be positive");
  if (ex.T < 0.0) top.fail("T", "must be nonnegative");
  const double cfl = top.get<double>("cfl", 0.5);
  if (!(cfl > 0.0) || cfl > 1.0) top.fail("cfl", "must lie in (0, 1]");
  ex.C0 = top.get<double>("C0", 1.0);
  if (!(ex.C0 > 0.0)) top.fail("C0", "must be positive");
  ex.trials = top.get<int>("trials", 8);
  if (ex.trials < 1) top.fail("trials", "must be positive");
  ex.seed = seed ? *seed : top.get<std::uint64_t>("seed", 1);
  const double tol = top.get<double>("tol", 1e-10);
  if (!(tol > 0.0) || tol >= 1.0) top.fail("tol", "must lie in (0, 1)");

  return Experiment{ex.command, Scenario{spec.preset, field, domain, n_per, min_cells, cfl, tol, SolverKind::direct},
                    ex.eps, ex.T, ex.C0, ex.trials, ex.seed};
}

}  // namespace

int run(const RunRequest& req, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = timestamp_utc();
  std::unique_ptr<Source> src;
  std::optional<Experiment> exo;
  fs::path out;
  try {
    src = std::make_unique<Source>(req.config_text);
    exo.emplace(parse_experiment(*src, req.config_path, req.seed));
    const Section top(*src, src->root(), "");
    out = req.out.empty() ? fs::path(top.get<std::string>("out", "results")) : fs::path(req.out);
    fs::create_directories(out);
  } catch (const ConfigError& e) {
    err << req.config_path << ":" << e.line << ": " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    err << req.config_path << ":1: " << e.what() << '\n';
    return config_error;
  }
  if (req.threads > 0) kernels::set_threads(req.threads);
  const Experiment& ex = *exo;

  Outcome outcome;
  int code = ok;
  std::string where;
  try {
    Runner runner(*src, ex, out);
    outcome = runner.run();
    if (!outcome.complete) code = numerical_failure;
  } catch (const ConfigError& e) {
    err << req.config_path << ":" << e.line << ": " << e.what() << '\n';
    return config_error;
  } catch (const NumericalFailure& e) {
    code = numerical_failure;
    outcome.complete = false;
    outcome.failure = e.what();
  } catch (const InvalidArgument& e) {
    code = config_error;
    outcome.complete = false;
    outcome.failure = e.what();
    where = ":" + std::to_string(src->line_of("command"));
  }
  // files written before a failure stay on disk and are listed
  if (code != ok) {
    for (const auto& entry : fs::directory_iterator(out)) {
      const std::string name = entry.path().filename().string();
      if (name != "manifest.json" && std::find(outcome.files.begin(), outcome.files.end(), name) == outcome.files.end())
        outcome.files.push_back(name);
    }
    err << req.config_path << where << ": " << (code == numerical_failure ? "numerical failure: " : "invalid input: ")
        << outcome.failure << '\n';
  }
  std::sort(outcome.files.begin(), outcome.files.end());

  json m;
  m["command"] = ex.command;
  m["config"] = src->root();
  m["config_path"] = req.config_path;
  m["seed"] = ex.seed;
  m["threads"] = kernels::threads();
  m["versions"] = versions();
  m["started"] = started;
  m["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m["files"] = outcome.files;
  m["complete"] = outcome.complete;
  m["partial"] = !outcome.complete;
  if (!outcome.failure.empty()) m["failure"] = outcome.failure;
  m["exit_code"] = code;
  m["results"] = outcome.results;
  m["domain_note"] = "rectangular domain with corners; the theory assumes a smooth boundary";
  std::ofstream f(out / "manifest.json");
  f << std::setw(2) << m << '\n';
  if (!f) {
    err << "cannot write " << (out / "manifest.json").string() << '\n';
    return code == ok ? numerical_failure : code;
  }
  return code;
}

int run_file(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed, int threads,
             std::ostream& err) {
  std::ifstream f(path);
  if (!f) {
    err << path << ":1: cannot open config file\n";
    return config_error;
  }
  std::stringstream ss;
  ss << f.rdbuf();
  RunRequest r;
  r.config_text = ss.str();
  r.config_path = path;
  r.out = out;
  r.seed = seed;
  r.threads = threads;
  return run(r, err);
}

}  // namespace homwave::cli
