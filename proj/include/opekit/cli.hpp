#pragma once

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opekit/acceptance.hpp"
#include "opekit/bounds.hpp"
#include "opekit/coefficients.hpp"
#include "opekit/hochschild.hpp"
#include "opekit/parser.hpp"
#include "opekit/recursion.hpp"

namespace opekit::cli {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string command;
  std::string ops = "phi,phi";
  std::string target = "1";
  std::vector<Point4> points;
  double mass = 1.0;
  int order = 0;
  std::optional<std::size_t> reference;  // 0-based; default last point
  std::size_t split = 1;
  int d_min = 0;
  int d_max = 10;
  double scale = 0.0;    // L for massless and gamma
  double K = 1.0;        // bound constants
  double c = 1.0;
  std::string cochain = "identity";  // hochschild: identity | free | cocycle
  std::string suite = "all";
  std::size_t samples = QuadratureConfig{}.samples_per_region;
  std::uint64_t seed = QuadratureConfig{}.seed;
  double r_cut = 0.0;
  unsigned workers = 0;
  std::size_t batch_size = QuadratureConfig{}.batch_size;
  std::string output;    // empty: stdout
  std::string format = "csv";

  bool operator==(const RunConfig&) const = default;

  QuadratureConfig quadrature() const {
    QuadratureConfig q;
    q.samples_per_region = samples;
    q.seed = seed;
    q.r_cut = r_cut;
    q.workers = workers;
    q.batch_size = batch_size;
    return q;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"command", c.command}, {"ops", c.ops},       {"target", c.target},   {"points", c.points},
                     {"mass", c.mass},       {"order", c.order},   {"split", c.split},     {"d_min", c.d_min},
                     {"d_max", c.d_max},     {"scale", c.scale},   {"K", c.K},             {"c", c.c},
                     {"cochain", c.cochain}, {"suite", c.suite},   {"samples", c.samples}, {"seed", c.seed},
                     {"r_cut", c.r_cut},     {"workers", c.workers}, {"batch_size", c.batch_size},
                     {"output", c.output},   {"format", c.format}};
  j["reference"] = c.reference ? nlohmann::json(*c.reference) : nlohmann::json(nullptr);
}

// Missing keys keep their defaults, so partial config files are accepted.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("command", c.command);
  get("ops", c.ops);
  get("target", c.target);
  get("points", c.points);
  get("mass", c.mass);
  get("order", c.order);
  get("split", c.split);
  get("d_min", c.d_min);
  get("d_max", c.d_max);
  get("scale", c.scale);
  get("K", c.K);
  get("c", c.c);
  get("cochain", c.cochain);
  get("suite", c.suite);
  get("samples", c.samples);
  get("seed", c.seed);
  get("r_cut", c.r_cut);
  get("workers", c.workers);
  get("batch_size", c.batch_size);
  get("output", c.output);
  get("format", c.format);
  if (j.contains("reference") && !j.at("reference").is_null()) c.reference = j.at("reference").get<std::size_t>();
}

// Shortest decimal that parses back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::vector<Point4> parse_points_inline(const std::string& s) {
  std::vector<Point4> pts;
  std::stringstream rows(s);
  std::string row;
  while (std::getline(rows, row, ';')) {
    std::stringstream cols(row);
    std::string cell;
    Point4 p{};
    int k = 0;
    while (std::getline(cols, cell, ',')) {
      if (k >= 4) throw std::invalid_argument("point '" + row + "' has more than four coordinates");
      double v = 0.0;
      const char* b = cell.data();
      while (b < cell.data() + cell.size() && *b == ' ') ++b;
      const auto r = std::from_chars(b, cell.data() + cell.size(), v);
      if (r.ec != std::errc{} || r.ptr != cell.data() + cell.size())
        throw std::invalid_argument("bad coordinate '" + cell + "'");
      p[static_cast<std::size_t>(k++)] = v;
    }
    if (k != 4) throw std::invalid_argument("point '" + row + "' needs four coordinates");
    pts.push_back(p);
  }
  return pts;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

// "x,y,z,w;x,y,z,w" or "@file" holding a JSON array of points or an object with "points".
inline std::vector<Point4> parse_points(const std::string& s) {
  if (s.empty() || s[0] != '@') return parse_points_inline(s);
  const auto j = read_json_file(s.substr(1));
  try {
    return (j.is_object() ? j.at("points") : j).get<std::vector<Point4>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(s.substr(1) + ": " + e.what());
  }
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline void write_table(std::ostream& out, const RunConfig& cfg, const Table& t) {
  const nlohmann::json conf = cfg;
  if (cfg.format == "json") {
    nlohmann::json j{{"version", kVersion}, {"config", conf}, {"columns", t.columns}, {"rows", t.rows}};
    out << j.dump(2) << "\n";
    return;
  }
  out << "# opekit " << kVersion << "\n# config " << conf.dump() << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << shortest(r[i]);
    out << "\n";
  }
}

inline CoeffRequest request_of(const RunConfig& c) {
  CoeffRequest r;
  r.ops = parse_op_list(c.ops);
  r.target = parse_op(c.target);
  r.points = c.points;
  r.reference = c.reference;
  r.order = c.order;
  r.mass = {c.mass};
  return r;
}

inline Table run_coeff(const RunConfig& c) {
  const CoeffValue v = ope_coefficient(request_of(c), c.quadrature());
  return {{"value", "error"}, {{v.value, v.error}}};
}

inline Table run_remainder(const RunConfig& c) {
  const CoeffRequest req = request_of(c);
  if (c.d_min < 0 || c.d_max < c.d_min) throw std::invalid_argument("need 0 <= dmin <= dmax");
  const auto series = remainder_series(req, c.split, c.d_max, c.quadrature());
  std::vector<int> dims;
  for (const auto& op : req.ops) dims.push_back(op.dimension());
  Table t{{"D", "R", "abs_R", "bound"}, {}};
  if (req.order > 0) t.columns.push_back("error");
  for (int d = c.d_min; d <= c.d_max; ++d) {
    const CoeffValue& r = series[static_cast<std::size_t>(d)];
    std::vector<double> row{static_cast<double>(d), r.value, std::abs(r.value),
                            bound_theorem1(dims, req.target.dimension(), d, req.points, c.split, c.K, c.c, req.mass)};
    if (req.order > 0) row.push_back(r.error);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table run_bounds(const RunConfig& c) {
  const CoeffRequest req = request_of(c);
  validate(req);
  std::vector<int> dims;
  int total = req.target.dimension();
  for (const auto& op : req.ops) {
    dims.push_back(op.dimension());
    total += op.dimension();
  }
  const double xi = separation_ratio(req.points, c.split);
  Table t{{"D", "xi", "bound", "dsum_tail"}, {}};
  for (int d = c.d_min; d <= c.d_max; ++d)
    t.rows.push_back({static_cast<double>(d), xi,
                      bound_theorem1(dims, req.target.dimension(), d, req.points, c.split, c.K, c.c, req.mass),
                      dsum_tail_bound(xi, c.order, total, d)});
  return t;
}

inline Table run_first_order(RunConfig c) {
  c.order = 1;
  const CoeffRequest req = request_of(c);
  validate(req);
  const Estimate e = first_order_coeff(req.ops, req.target, req.points, req.ref(), req.mass, c.quadrature());
  return {{"value", "error", "tail"}, {{e.value, e.error, e.tail}}};
}

inline Table run_massless(const RunConfig& c) {
  const CoeffRequest req = request_of(c);
  const Estimate e = massless_first_order(req.ops, req.target, req.points, req.ref(), c.scale, c.quadrature());
  return {{"L", "value", "error"}, {{c.scale, e.value, e.error}}};
}

inline Table run_gamma(const RunConfig& c) {
  const auto ops = parse_op_list(c.ops);
  if (ops.size() != 1) throw std::invalid_argument("gamma takes exactly one operator in --ops");
  return {{"L", "m", "value"}, {{c.scale, c.mass, gamma_mixing(ops[0], parse_op(c.target), c.scale, {c.mass})}}};
}

inline Table run_hochschild(const RunConfig& c) {
  const auto ops = parse_op_list(c.ops);
  const CompositeOp out = parse_op(c.target);
  const MassParam m{c.mass};
  if (c.d_min < 0 || c.d_max < c.d_min) throw std::invalid_argument("need 0 <= dmin <= dmax");
  if (c.cochain == "cocycle") {
    Table t{{"D", "value", "error", "tail", "scale"}, {}};
    for (int d = c.d_min; d <= c.d_max; ++d) {
      const CocycleResult r = cocycle_residual_C1(c.points, ops, out, d, m, c.quadrature());
      t.rows.push_back({static_cast<double>(d), r.value, r.error, r.tail, r.scale});
    }
    return t;
  }
  TruncatedCochain f;
  if (c.cochain == "identity") f = identity_cochain();
  else if (c.cochain == "free") f = free_cochain(m);
  else throw std::invalid_argument("unknown cochain '" + c.cochain + "' (identity, free, cocycle)");
  Table t{{"D", "b2_residual"}, {}};
  for (int d = c.d_min; d <= c.d_max; ++d)
    t.rows.push_back({static_cast<double>(d), b_squared_residual(f, c.points, ops, out, d, m)});
  return t;
}

inline std::vector<int> suite_ids(const std::string& s) {
  if (s == "all") return {};
  std::vector<int> ids;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc{} || r.ptr != item.data() + item.size() || v < 1 || v > 10)
      throw std::invalid_argument("suite must be 'all' or a comma list of criteria 1..10");
    ids.push_back(v);
  }
  return ids;
}

// Returns true when every selected criterion passed.
inline bool run_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto ids = suite_ids(c.suite);
  acceptance::Options o;
  o.seed = c.seed;
  const auto results = acceptance::run(ids, o, [&](const acceptance::Outcome& r) {
    err << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.name << ")\n";
  });
  nlohmann::json rows = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
    all = all && r.pass;
  }
  out << nlohmann::json{{"version", kVersion}, {"config", nlohmann::json(c)}, {"passed", all}, {"results", rows}}.dump(2)
      << "\n";
  return all;
}

// Exit codes: 0 success, 1 failed verification or unexpected error, 2 validation error, 3 numeric diagnostic.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Perturbative OPE coefficients of Euclidean phi^4 theory"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path, points_arg;
  bool emit_config = false;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"coeff", "OPE coefficient at order 0 or 1"},
      {"remainder", "truncation remainders over a D range with the remainder bound"},
      {"bounds", "remainder bound and degree-sum tail over a D range"},
      {"first-order", "massive first-order coefficient by quadrature"},
      {"massless", "massless first-order coefficient in a ball of radius --L"},
      {"gamma", "mixing entry for --ops A --target B at radius --L"},
      {"hochschild", "b^2 residual (identity/free cochain) or first-order cocycle"},
      {"verify", "run the acceptance suite and emit a JSON report"}};

  // Flags are recorded first and applied over the config file afterwards.
  RunConfig flags;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file (fields mirror the run config)");
    sub->add_option("--ops", flags.ops, "comma-separated operators, e.g. \"phi,d[1,0,0,0]phi*phi\"");
    sub->add_option("--target", flags.target, "target operator");
    sub->add_option("--points", points_arg, "\"x,y,z,w;...\" or @file.json");
    sub->add_option("--mass", flags.mass, "mass m >= 0");
    sub->add_option("--order", flags.order, "perturbative order (0 or 1)");
    sub->add_option("--ref", flags.reference, "0-based reference point (default: last)");
    sub->add_option("--split", flags.split, "split index M (1-based)");
    sub->add_option("--dmin", flags.d_min, "smallest truncation D");
    sub->add_option("--dmax", flags.d_max, "largest truncation D");
    sub->add_option("--L", flags.scale, "ball radius / mixing radius");
    sub->add_option("--K", flags.K, "bound prefactor");
    sub->add_option("--c", flags.c, "bound exponent constant");
    sub->add_option("--cochain", flags.cochain, "identity | free | cocycle");
    sub->add_option("--suite", flags.suite, "all or comma list of criteria");
    sub->add_option("--samples", flags.samples, "Monte Carlo samples per region");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--rcut", flags.r_cut, "outer radius of the exponential shell (0: automatic)");
    sub->add_option("--workers", flags.workers, "worker threads (0: OPE_KIT_THREADS or all cores)");
    sub->add_option("--batch", flags.batch_size, "samples per batch");
    sub->add_option("--output", flags.output, "output file (default stdout)");
    sub->add_option("--format", flags.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--emit-config", emit_config, "print the resolved config as JSON and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) cfg = read_json_file(config_path).get<RunConfig>();
    auto given = [&](const char* opt) { return sub->count(opt) > 0; };
    if (given("--ops")) cfg.ops = flags.ops;
    if (given("--target")) cfg.target = flags.target;
    if (given("--points")) cfg.points = parse_points(points_arg);
    if (given("--mass")) cfg.mass = flags.mass;
    if (given("--order")) cfg.order = flags.order;
    if (given("--ref")) cfg.reference = flags.reference;
    if (given("--split")) cfg.split = flags.split;
    if (given("--dmin")) cfg.d_min = flags.d_min;
    if (given("--dmax")) cfg.d_max = flags.d_max;
    if (given("--L")) cfg.scale = flags.scale;
    if (given("--K")) cfg.K = flags.K;
    if (given("--c")) cfg.c = flags.c;
    if (given("--cochain")) cfg.cochain = flags.cochain;
    if (given("--suite")) cfg.suite = flags.suite;
    if (given("--samples")) cfg.samples = flags.samples;
    if (given("--seed")) cfg.seed = flags.seed;
    if (given("--rcut")) cfg.r_cut = flags.r_cut;
    if (given("--workers")) cfg.workers = flags.workers;
    if (given("--batch")) cfg.batch_size = flags.batch_size;
    if (given("--output")) cfg.output = flags.output;
    if (given("--format")) cfg.format = flags.format;
    cfg.command = sub->get_name();
    if (cfg.format != "csv" && cfg.format != "json") throw std::invalid_argument("format must be csv or json");

    std::ofstream file;
    if (!cfg.output.empty()) {
      file.open(cfg.output);
      if (!file) throw std::invalid_argument("cannot write " + cfg.output);
    }
    std::ostream& dst = cfg.output.empty() ? out : file;
    if (emit_config) {
      dst << nlohmann::json(cfg).dump(2) << "\n";
      return 0;
    }
    const std::string& cmd = cfg.command;
    if (cmd == "verify") return run_verify(cfg, dst, err) ? 0 : 1;
    Table t;
    if (cmd == "coeff") t = run_coeff(cfg);
    else if (cmd == "remainder") t = run_remainder(cfg);
    else if (cmd == "bounds") t = run_bounds(cfg);
    else if (cmd == "first-order") t = run_first_order(cfg);
    else if (cmd == "massless") t = run_massless(cfg);
    else if (cmd == "gamma") t = run_gamma(cfg);
    else t = run_hochschild(cfg);
    write_table(dst, cfg, t);
    return 0;
  } catch (const NumericDiagnostic& e) {
    err << "numeric diagnostic: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace opekit::cli
