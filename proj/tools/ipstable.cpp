// Command-line front end: audit, solve, bench, gen.
//
// Exit codes: 0 when the produced or audited clustering is IP-stable, 2 when
// it is not (approximate solvers and baselines), 1 on any error.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ipstable/ipstable.hpp"

using json = nlohmann::ordered_json;
using namespace ipstable;

namespace {

struct InputOptions {
  std::string path;
  std::string metric = "euclidean";
  std::vector<std::string> columns;
  bool standardize = false;
  bool minmax = false;
};

struct Dataset {
  DistanceOracle oracle;
  std::optional<FeatureMatrix> features;
  std::optional<WeightedTree> tree;
};

Dataset load(const InputOptions& in) {
  const MetricKind kind = parse_metric(in.metric);
  if (kind == MetricKind::tree) {
    auto t = io::read_tree(in.path);
    Dataset d{t.oracle(), std::nullopt, std::nullopt};
    d.tree = std::move(t);
    return d;
  }
  if (kind == MetricKind::matrix) return {io::read_matrix(in.path), std::nullopt, std::nullopt};
  const io::Table table = io::read_csv(in.path);
  FeatureMatrix f = table.values;
  if (!in.columns.empty()) {
    std::vector<std::size_t> cols;
    for (const auto& c : in.columns) cols.push_back(table.column_index(c));
    f = table.select(cols);
  }
  if (in.standardize) f = io::standardize(std::move(f));
  if (in.minmax) f = io::min_max_normalize(std::move(f));
  auto oracle = DistanceOracle::from_features(f, kind);
  return {std::move(oracle), std::move(f), std::nullopt};
}

void add_input_options(CLI::App* app, InputOptions& in) {
  app->add_option("--input,-i", in.path, "points CSV, distance matrix CSV or tree edge list")->required();
  app->add_option("--metric", in.metric, "euclidean | manhattan | chebyshev | matrix | tree");
  app->add_option("--column", in.columns, "column name or 0-based index to use (repeatable)");
  app->add_flag("--standardize", in.standardize, "zero mean, unit variance per column");
  app->add_flag("--minmax", in.minmax, "map each column onto [0, 1]");
}

json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double parse_p(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInfNorm;
  const auto v = io::parse_double(s);
  if (!v) throw std::invalid_argument("--p must be a number or 'inf'");
  return *v;
}

std::vector<double> parse_targets(const std::string& spec, std::size_t n, std::size_t k) {
  if (spec == "uniform") return uniform_targets(n, k);
  std::vector<double> t;
  for (const auto& field : io::split(spec)) {
    const auto v = io::parse_double(field);
    if (!v) throw std::invalid_argument("bad target '" + field + "'");
    t.push_back(*v);
  }
  return t;
}

json report_json(const StabilityReport& r, bool per_point) {
  json j;
  j["num_unstable"] = r.num_unstable;
  j["max_violation"] = number(r.max_violation);
  j["mean_violation"] = number(r.mean_violation);
  j["cost"] = number(r.cost);
  j["obj"] = r.obj ? number(*r.obj) : json(nullptr);
  if (per_point) {
    json vi = json::array();
    for (double v : r.vi) vi.push_back(number(v));
    j["vi"] = std::move(vi);
  }
  return j;
}

void emit(const json& j, const std::string& format, std::ostream& out) {
  if (format == "json") {
    out << j.dump(2) << '\n';
    return;
  }
  if (format != "csv") throw std::invalid_argument("--format must be json or csv");
  out << "key,value\n";
  for (const auto& [key, value] : j.items()) {
    if (value.is_array()) continue;
    out << key << ',' << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

/// Audits only the points whose label is not excluded.
StabilityReport audit_labels(const DistanceOracle& oracle, const std::vector<std::size_t>& labels,
                             std::optional<std::span<const double>> targets, double p) {
  if (labels.size() != oracle.size())
    throw std::domain_error("assignment has " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(oracle.size()) + " points");
  std::vector<std::size_t> keep, kept_labels;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != io::kExcluded) {
      keep.push_back(i);
      kept_labels.push_back(labels[i]);
    }
  const Clustering c(kept_labels);
  if (keep.size() == labels.size()) return audit(oracle, c, targets, p);
  return audit(oracle.subset(keep), c, targets, p);
}

// ---------------------------------------------------------------------------
// audit

struct AuditOptions {
  InputOptions in;
  std::string assign;
  std::string targets;
  std::string p = "inf";
  std::string out;
  std::string format = "json";
  bool per_point = false;
};

int cmd_audit(const AuditOptions& o) {
  const Dataset d = load(o.in);
  const auto labels = io::read_assignment(o.assign);
  std::size_t k = 0;
  for (std::size_t l : labels)
    if (l != io::kExcluded) k = std::max(k, l + 1);
  std::vector<double> targets;
  if (!o.targets.empty()) targets = parse_targets(o.targets, d.oracle.size(), k);
  const auto r = audit_labels(d.oracle, labels,
                              targets.empty() ? std::nullopt : std::optional<std::span<const double>>(targets),
                              parse_p(o.p));
  json j = report_json(r, o.per_point);
  if (o.out.empty()) {
    emit(j, o.format, std::cout);
  } else {
    auto f = open_out(o.out);
    emit(j, o.format, f);
  }
  return r.num_unstable == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// solve

struct SolveOptions {
  InputOptions in;
  std::string algo;
  std::size_t k = 2;
  std::string targets;
  std::string p = "inf";
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double gamma = kMinGamma;
  double epsilon = 0.0;
  std::string measure = "max-violation";
  std::string linkage = "average";
  std::string out;
  std::string format = "json";
  bool per_point = false;
};

std::vector<double> column_values(const Dataset& d) {
  if (!d.features || d.features->dim != 1)
    throw std::domain_error("this algorithm needs one numeric column (use --column)");
  return d.features->data;
}

const FeatureMatrix& need_features(const Dataset& d) {
  if (!d.features) throw std::domain_error("this algorithm needs point coordinates, not a matrix or tree");
  return *d.features;
}

struct Solved {
  std::vector<std::size_t> labels;  // io::kExcluded for dropped points
  json extra = json::object();
};

Solved run_algorithm(const Dataset& d, const SolveOptions& o, const std::vector<double>& targets, double p) {
  const std::size_t n = d.oracle.size();
  Solved s;
  const std::string& a = o.algo;
  if (a == "line1d") {
    s.labels = solve_1d(column_values(d), o.k).clustering.assignment();
  } else if (a == "dp") {
    const auto inst = LineInstance::from_unsorted(column_values(d));
    if (dp_table_cells(n, targets.size()) > kDpCellWarnThreshold)
      std::cerr << "warning: the DP table has " << dp_table_cells(n, targets.size()) << " cells\n";
    if (std::isfinite(p) && p >= kDpLargePWarn)
      std::cerr << "warning: p = " << p << " may overflow; consider --p inf\n";
    const auto sol = solve_dp(inst, targets, p);
    s.labels = sol.clustering.assignment();
    s.extra["sizes"] = sol.sizes;
  } else if (a == "tree2") {
    if (!d.tree) throw std::domain_error("tree2 needs --metric tree");
    if (o.k != 2) throw std::domain_error("tree2 computes 2-clusterings only");
    const auto sol = solve_tree2(*d.tree);
    s.labels = sol.clustering.assignment();
    s.extra["boundary"] = {sol.boundary.u, sol.boundary.v};
    s.extra["rotations"] = sol.rotations;
  } else if (a == "hst") {
    const auto r = cluster_via_embedding(d.oracle, o.k, o.epsilon, o.seed);
    s.labels.assign(n, io::kExcluded);
    for (std::size_t i = 0; i < r.retained.size(); ++i) s.labels[r.retained[i]] = r.clustering[i];
    s.extra["stretch"] = number(r.stretch);
    s.extra["excluded"] = r.excluded;
  } else if (a == "exact-enum") {
    s.labels = exact_enumerate(d.oracle, o.k, o.alpha).assignment();
  } else if (a == "pipeline") {
    const auto r = pipeline(d.oracle, o.k, o.alpha, o.gamma, o.seed);
    s.labels = r.clustering.assignment();
    s.extra["superclusters"] = r.superclusters.size();
    s.extra["certificate"] = number(r.certificate);
    s.extra["rep_stretch"] = number(r.rep_stretch);
    s.extra["uniformity"] = number(r.uniformity);
  } else if (a == "kmeans++") {
    const auto r = kmeans_pp(need_features(d), o.k, o.seed);
    s.labels = r.clustering.assignment();
    s.extra["iterations"] = r.iterations;
  } else if (a == "kcenter") {
    const std::size_t first = std::mt19937_64(o.seed)() % n;
    const auto r = kcenter_greedy(d.oracle, o.k, first);
    s.labels = r.clustering.assignment();
    s.extra["centers"] = r.centers;
  } else if (a == "single" || a == "average" || a == "complete") {
    s.labels = cut_dendrogram(linkage(d.oracle, parse_linkage(a)), o.k).assignment();
  } else if (a == "prune") {
    const auto dg = linkage(d.oracle, parse_linkage(o.linkage));
    s.labels = greedy_prune(dg, d.oracle, o.k, parse_measure(o.measure)).clustering.assignment();
  } else if (a == "random") {
    s.labels = random_assignment(n, o.k, o.seed).assignment();
  } else {
    throw std::invalid_argument("unknown algorithm '" + a + "'");
  }
  return s;
}

int cmd_solve(const SolveOptions& o) {
  const Dataset d = load(o.in);
  const double p = parse_p(o.p);
  std::vector<double> targets;
  if (!o.targets.empty()) targets = parse_targets(o.targets, d.oracle.size(), o.k);
  if (o.algo == "dp" && targets.empty()) throw std::invalid_argument("dp needs --targets");
  const Solved s = run_algorithm(d, o, targets, p);
  const auto r = audit_labels(d.oracle, s.labels,
                              targets.empty() ? std::nullopt : std::optional<std::span<const double>>(targets), p);

  json j;
  j["algorithm"] = o.algo;
  j["n"] = d.oracle.size();
  j["k"] = o.k;
  const json rep = report_json(r, o.per_point);
  for (const auto& [key, value] : rep.items()) j[key] = value;
  for (const auto& [key, value] : s.extra.items()) j[key] = value;

  if (o.out.empty()) {
    emit(j, o.format, std::cout);
  } else {
    auto af = open_out(o.out + ".assign.txt");
    io::write_assignment(af, s.labels);
    auto rf = open_out(o.out + ".report." + o.format);
    emit(j, o.format, rf);
  }
  return r.num_unstable == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  InputOptions in;
  std::string algos = "kmeans++,kcenter,single,average,complete,random";
  std::string ks = "2,5,10";
  std::size_t repeat = 1;
  std::uint64_t seed = 0;
  std::string measure = "max-violation";
  std::string out;
  bool no_timing = false;
};

bool randomized(const std::string& algo) {
  return algo == "kmeans++" || algo == "kcenter" || algo == "random" || algo == "hst" || algo == "pipeline";
}

int cmd_bench(const BenchOptions& o) {
  const Dataset d = load(o.in);
  std::vector<std::size_t> ks;
  for (const auto& f : io::split(o.ks)) {
    const auto v = io::parse_double(f);
    if (!v || *v < 1 || std::floor(*v) != *v) throw std::invalid_argument("bad k '" + f + "'");
    ks.push_back(static_cast<std::size_t>(*v));
  }
  std::ostringstream csv;
  csv << "algorithm,k,num_unstable,max_violation,mean_violation,cost,wall_time\n";
  for (const auto& algo : io::split(o.algos)) {
    for (std::size_t k : ks) {
      const std::size_t runs = randomized(algo) ? std::max<std::size_t>(o.repeat, 1) : 1;
      double uns = 0, maxvi = 0, meanvi = 0, cost = 0, seconds = 0;
      for (std::size_t r = 0; r < runs; ++r) {
        SolveOptions so;
        so.algo = algo;
        so.k = k;
        so.seed = o.seed + r;
        so.measure = o.measure;
        const auto start = std::chrono::steady_clock::now();
        const Solved s = run_algorithm(d, so, {}, kInfNorm);
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const auto rep = audit_labels(d.oracle, s.labels, std::nullopt, kInfNorm);
        uns += static_cast<double>(rep.num_unstable);
        maxvi += rep.max_violation;
        meanvi += rep.mean_violation;
        cost += rep.cost;
      }
      const double m = static_cast<double>(runs);
      csv << algo << ',' << k << ',' << io::format_double(uns / m) << ',' << io::format_double(maxvi / m) << ','
          << io::format_double(meanvi / m) << ',' << io::format_double(cost / m) << ','
          << io::format_double(o.no_timing ? 0.0 : seconds / m) << '\n';
    }
  }
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    auto f = open_out(o.out);
    f << csv.str();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::string family;
  std::size_t n = 16;
  std::size_t blocks = 1;
  double alpha = 3.0;
  double r = 1.0;
  double spacing = 0.0;
  double epsilon = 0.0;
  std::string out;
};

int cmd_gen(const GenOptions& o) {
  HardInstance inst;
  const std::string& f = o.family;
  if (f == "kmeanspp") {
    inst = gen_kmeanspp_hard(o.alpha, o.blocks, o.r, o.spacing);
  } else if (f == "kcenter") {
    inst = gen_kcenter_hard(o.n, o.epsilon > 0 ? o.epsilon : 1.0 / (2.0 * static_cast<double>(o.n)));
  } else if (f == "single-linkage") {
    inst = gen_single_linkage_hard(o.n, o.epsilon > 0 ? o.epsilon : 0.5);
  } else if (f == "fig1") {
    inst = fixture_no_stable();
  } else if (f == "fig2") {
    inst = fixture_two_stable();
  } else if (f == "line4") {
    inst = fixture_unique_stable();
  } else {
    throw std::invalid_argument("unknown family '" + f + "'");
  }

  json meta;
  meta["family"] = inst.family;
  meta["n"] = inst.size();
  meta["format"] = inst.is_matrix() ? "matrix" : "points";
  json params = json::object();
  for (const auto& [key, v] : inst.params) params[key] = number(v);
  meta["params"] = params;
  json named = json::object();
  for (const auto& [key, idx] : inst.named_points) named[key] = idx;
  meta["named_points"] = named;
  if (inst.clustering) {
    meta["clustering"] = inst.clustering->assignment();
    const auto rep = audit(inst.oracle(), *inst.clustering);
    meta["num_unstable"] = rep.num_unstable;
    meta["max_violation"] = number(rep.max_violation);
  } else {
    meta["clustering"] = nullptr;
  }
  if (inst.witness < inst.size()) {
    meta["witness"] = inst.witness;
    meta["witness_violation"] = number(inst.witness_violation);
  }

  if (o.out.empty()) {
    if (inst.is_matrix())
      io::write_matrix(std::cout, inst.matrix, inst.matrix_n);
    else
      io::write_points(std::cout, inst.features);
    std::cerr << meta.dump(2) << '\n';
    return 0;
  }
  auto data = open_out(o.out + ".csv");
  if (inst.is_matrix())
    io::write_matrix(data, inst.matrix, inst.matrix_n);
  else
    io::write_points(data, inst.features);
  auto mf = open_out(o.out + ".meta.json");
  mf << meta.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IP-stable clustering: audit, solve, bench, gen"};
  app.require_subcommand(1);

  AuditOptions ao;
  auto* audit_cmd = app.add_subcommand("audit", "audit an assignment for IP-stability");
  add_input_options(audit_cmd, ao.in);
  audit_cmd->add_option("--assign,-a", ao.assign, "assignment file, one label per line (-1 = excluded)")->required();
  audit_cmd->add_option("--targets", ao.targets, "comma-separated target sizes or 'uniform'");
  audit_cmd->add_option("--p", ao.p, "norm for the size objective (number or inf)");
  audit_cmd->add_option("--out,-o", ao.out, "report path (default: stdout)");
  audit_cmd->add_option("--format", ao.format, "json | csv");
  audit_cmd->add_flag("--per-point", ao.per_point, "include the per-point violations");

  SolveOptions so;
  auto* solve_cmd = app.add_subcommand("solve", "compute a clustering and audit it");
  add_input_options(solve_cmd, so.in);
  solve_cmd
      ->add_option("--algo", so.algo,
                   "line1d | dp | tree2 | hst | exact-enum | pipeline | kmeans++ | kcenter | single | average | "
                   "complete | prune | random")
      ->required();
  solve_cmd->add_option("--k,-k", so.k, "number of clusters");
  solve_cmd->add_option("--targets", so.targets, "comma-separated target sizes or 'uniform' (dp)");
  solve_cmd->add_option("--p", so.p, "norm for the size objective (number or inf)");
  solve_cmd->add_option("--seed", so.seed, "random seed");
  solve_cmd->add_option("--alpha", so.alpha, "minimum cluster fraction (exact-enum, pipeline)");
  solve_cmd->add_option("--gamma", so.gamma, "separation factor (pipeline)");
  solve_cmd->add_option("--epsilon", so.epsilon, "fraction of points the embedding may drop (hst)");
  solve_cmd->add_option("--measure", so.measure, "num-unstable | max-violation (prune)");
  solve_cmd->add_option("--linkage", so.linkage, "dendrogram for prune: single | average | complete");
  solve_cmd->add_option("--out,-o", so.out, "output prefix: writes PREFIX.assign.txt and PREFIX.report.<format>");
  solve_cmd->add_option("--format", so.format, "json | csv");
  solve_cmd->add_flag("--per-point", so.per_point, "include the per-point violations");

  BenchOptions bo;
  auto* bench_cmd = app.add_subcommand("bench", "metric table over algorithms and k values");
  add_input_options(bench_cmd, bo.in);
  bench_cmd->add_option("--algo", bo.algos, "comma-separated algorithms");
  bench_cmd->add_option("--k,-k", bo.ks, "comma-separated k values");
  bench_cmd->add_option("--repeat", bo.repeat, "seeded repeats averaged for randomized algorithms");
  bench_cmd->add_option("--seed", bo.seed, "first seed");
  bench_cmd->add_option("--measure", bo.measure, "measure for prune");
  bench_cmd->add_option("--out,-o", bo.out, "CSV path (default: stdout)");
  bench_cmd->add_flag("--no-timing", bo.no_timing, "write 0 in the wall_time column");

  GenOptions go;
  auto* gen_cmd = app.add_subcommand("gen", "emit a hard instance or fixture");
  gen_cmd->add_option("--family", go.family, "kmeanspp | kcenter | single-linkage | fig1 | fig2 | line4")->required();
  gen_cmd->add_option("--n", go.n, "points per circle (kcenter) or path length (single-linkage)");
  gen_cmd->add_option("--blocks", go.blocks, "number of blocks (kmeanspp)");
  gen_cmd->add_option("--alpha", go.alpha, "violation factor (kmeanspp)");
  gen_cmd->add_option("--r", go.r, "block radius (kmeanspp)");
  gen_cmd->add_option("--spacing", go.spacing, "block spacing, 0 = smallest admissible (kmeanspp)");
  gen_cmd->add_option("--epsilon", go.epsilon, "ball radius (kcenter) or gap (single-linkage)");
  gen_cmd->add_option("--out,-o", go.out, "output prefix: writes PREFIX.csv and PREFIX.meta.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*audit_cmd) return cmd_audit(ao);
    if (*solve_cmd) return cmd_solve(so);
    if (*bench_cmd) return cmd_bench(bo);
    if (*gen_cmd) return cmd_gen(go);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
