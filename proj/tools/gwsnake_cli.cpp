#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gwsnake/gwsnake.hpp"

namespace {

using nlohmann::json;

int exit_code_for(const std::string& code) {
  static const std::set<std::string> usage{
      "invalid_args",        "parse_error",      "unsupported_size",
      "insufficient_replicates", "missing_arity", "invalid_distribution",
      "not_centered",        "io_error",         "invalid_window",
      "cap_exceeded"};
  return usage.count(code) ? 2 : 1;
}

int fail(const std::string& code, const std::string& message) {
  json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return exit_code_for(code);
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used])))
        ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (...) {
      throw gwsnake::ParseError("bad " + what + " entry '" + tok + "'");
    }
  }
  if (out.empty()) throw gwsnake::ParseError("empty " + what + " list");
  return out;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gwsnake::IoError("cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw gwsnake::ParseError("bad JSON in " + path);
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gwsnake::IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw gwsnake::IoError("short write to " + path);
}

// Flag > config-file > default.  `opt` reports whether the flag was given.
template <typename T>
void merge(const CLI::Option* opt, const json& cfg, const char* key, T& slot) {
  if (opt != nullptr && opt->count() > 0) return;
  if (cfg.contains(key)) slot = cfg.at(key).get<T>();
}

gwsnake::OffspringDistribution checked_mu(const std::string& spec) {
  auto mu = gwsnake::OffspringDistribution::from_string(spec);
  auto report = mu.validate_h1();
  if (!report.passes) {
    std::string detail;
    for (const auto& issue : report.issues) {
      if (!detail.empty()) detail += "; ";
      detail += issue;
    }
    throw gwsnake::InvalidDistribution("offspring law rejected: " + detail);
  }
  return mu;
}

gwsnake::DisplacementFamily checked_family(
    const std::string& path, const gwsnake::OffspringDistribution& mu) {
  auto family = gwsnake::DisplacementFamily::from_json(load_json_file(path));
  auto report = gwsnake::validate_h2(family, mu);
  if (!report.passes) {
    std::string detail;
    for (const auto& issue : report.issues) {
      if (!detail.empty()) detail += "; ";
      detail += issue;
    }
    throw gwsnake::NotCentered("displacement family rejected: " + detail);
  }
  return family;
}

struct SampleArgs {
  std::string mu = "1/2,0,1/2";
  std::string nu;
  long long n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sample(const SampleArgs& a) {
  auto mu = checked_mu(a.mu);
  gwsnake::RandomStream rng(a.seed, 0);
  auto tree = gwsnake::sample_conditioned(mu, static_cast<std::size_t>(a.n),
                                          rng);
  json config{{"command", "sample"}, {"mu", a.mu},
              {"n", a.n},            {"seed", a.seed},
              {"nu", a.nu.empty() ? json(nullptr) : json(a.nu)}};
  json payload;
  if (!a.nu.empty()) {
    auto family = checked_family(a.nu, mu);
    auto lt = gwsnake::assign_labels(tree, family, rng);
    payload = lt.to_json();
    config["nu_spec"] = family.to_json();
  } else {
    payload = tree.to_json();
  }
  json doc{{"config", config}, {"tree", payload}};
  std::string text = doc.dump(2) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text_file(a.out, text);
  return 0;
}

struct VerifyArgs {
  std::string mu = "1/2,0,1/2";
  int max_n = 6;
  std::string out;
};

int run_verify(const VerifyArgs& a) {
  auto mu = checked_mu(a.mu);
  if (!mu.is_exact())
    throw gwsnake::InvalidDistribution(
        "exact verification needs rational probabilities");
  auto report = gwsnake::verify_identities(mu, a.max_n);
  json doc = report.to_json();
  doc["config"] = json{{"command", "verify-exact"}, {"mu", a.mu},
                       {"max_n", a.max_n}};
  std::string text = doc.dump(2) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text_file(a.out, text);
  return report.all_pass() ? 0 : 1;
}

struct McArgs {
  std::string experiment = "g-cov";
  std::string mu = "1/2,0,1/2";
  std::string nu;
  long long n = 0;
  long long reps = 0;
  std::string grid = "0.25,0.5,0.75";
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  std::string lambda;
  long long limit_grid = 2048;
  double cov_tol = 0.05;
  double ks_threshold = 0.03;
  double corr_threshold = 0.05;
};

void require_reps(const gwsnake::ExperimentConfig& cfg) {
  long long need = 0;
  switch (cfg.kind) {
    case gwsnake::ExperimentKind::Ks:
      need = 5000;
      break;
    case gwsnake::ExperimentKind::GCov:
    case gwsnake::ExperimentKind::SnakeCov:
    case gwsnake::ExperimentKind::Combo:
    case gwsnake::ExperimentKind::Independence:
      need = 1000;
      break;
    case gwsnake::ExperimentKind::PathStats:
      need = 1;
      break;
  }
  if (cfg.reps < need)
    throw gwsnake::InsufficientReplicates(
        "experiment " + experiment_name(cfg.kind) + " needs at least " +
        std::to_string(need) + " replicates, got " + std::to_string(cfg.reps));
}

int run_mc(const McArgs& a) {
  gwsnake::ExperimentConfig cfg;
  cfg.kind = gwsnake::parse_experiment(a.experiment);
  cfg.mu_spec = a.mu;
  cfg.mu = checked_mu(a.mu);
  if (!a.nu.empty()) cfg.family = checked_family(a.nu, cfg.mu);
  cfg.n = a.n;
  cfg.reps = a.reps;
  cfg.grid = parse_double_list(a.grid, "grid");
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  if (!a.lambda.empty()) cfg.lambda = parse_double_list(a.lambda, "lambda");
  cfg.limit_grid = a.limit_grid;
  cfg.cov_tol = a.cov_tol;
  cfg.ks_threshold = a.ks_threshold;
  cfg.corr_threshold = a.corr_threshold;

  require_reps(cfg);
  auto table = gwsnake::run_experiment(cfg);
  std::ostringstream csv;
  gwsnake::write_result_csv(table, csv);
  if (!a.out.empty()) write_text_file(a.out, csv.str());

  auto reports = gwsnake::gating_reports(table, cfg);
  json out = json::array();
  bool all_pass = true;
  for (const auto& rep : reports) {
    out.push_back(rep.to_json());
    all_pass = all_pass && rep.pass;
  }
  std::cout << out.dump(2) << "\n";
  return all_pass ? 0 : 1;
}

struct LimitArgs {
  long long grid = 2048;
  long long reps = 0;
  std::string kernel = "excursion";
  std::uint64_t seed = 0;
  std::string out;
  std::string mu = "1/2,0,1/2";
  std::string points = "0.25,0.5,0.75";
  double beta2 = 1.0;
};

int run_limit_sample(const LimitArgs& a) {
  if (a.grid < 2) throw gwsnake::InvalidArgs("need a grid of at least 2 steps");
  if (a.reps < 1) throw gwsnake::InvalidArgs("need at least one replicate");
  if (a.kernel != "excursion" && a.kernel != "field" && a.kernel != "snake")
    throw gwsnake::InvalidArgs("unknown kernel '" + a.kernel + "'");
  auto mu = checked_mu(a.mu);
  auto points = parse_double_list(a.points, "points");
  for (double s : points)
    if (s < 0.0 || s > 1.0)
      throw gwsnake::InvalidArgs("evaluation points must be in [0,1]");
  double sigma = std::sqrt(mu.variance());

  gwsnake::ResultTable table;
  table.n = a.grid;
  table.reps = a.reps;
  json config{{"command", "limit-sample"}, {"kernel", a.kernel},
              {"grid", a.grid},            {"reps", a.reps},
              {"seed", a.seed},            {"mu", a.mu}};
  if (a.kernel != "excursion") config["points"] = points;
  if (a.kernel == "snake") config["beta2"] = a.beta2;
  table.config = config;

  for (long long rep = 0; rep < a.reps; ++rep) {
    gwsnake::RandomStream rng(a.seed, static_cast<std::uint64_t>(rep));
    auto e = gwsnake::sample_excursion(static_cast<std::size_t>(a.grid), rng);
    if (a.kernel == "excursion") {
      for (std::size_t i = 0; i <= static_cast<std::size_t>(a.grid); ++i)
        table.rows.push_back({rep,
                              static_cast<double>(i) / static_cast<double>(a.grid),
                              static_cast<double>(i) / static_cast<double>(a.grid),
                              gwsnake::Stat::Excursion, 0, 0, e.at_index(i)});
      continue;
    }
    auto h = gwsnake::lifetime_from_excursion(e, sigma);
    gwsnake::ConditionalGaussianSpec spec;
    spec.grid = points;
    if (a.kernel == "field") {
      spec.kind = gwsnake::KernelKind::LineageField;
      spec.ik.emplace(mu);
    } else {
      spec.kind = gwsnake::KernelKind::SnakeHead;
      spec.beta2 = a.beta2;
    }
    auto x = gwsnake::sample_conditional_field(spec, h, rng);
    if (a.kernel == "field") {
      for (std::size_t p = 0; p < points.size(); ++p)
        for (std::size_t i = 0; i < spec.ik->size(); ++i) {
          auto [k, j] = spec.ik->cell(i);
          table.rows.push_back({rep, points[p], points[p],
                                gwsnake::Stat::GLimit, k, j,
                                x[p * spec.ik->size() + i]});
        }
    } else {
      for (std::size_t p = 0; p < points.size(); ++p)
        table.rows.push_back({rep, points[p], points[p],
                              gwsnake::Stat::RLimit, 0, 0, x[p]});
    }
  }
  std::ostringstream csv;
  gwsnake::write_result_csv(table, csv);
  if (a.out.empty())
    std::cout << csv.str();
  else
    write_text_file(a.out, csv.str());
  return 0;
}

struct ReportArgs {
  std::string in;
  std::string plot;
};

int run_report(const ReportArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw gwsnake::IoError("cannot open " + a.in);
  auto table = gwsnake::read_result_csv(in);

  struct Summary {
    long long count = 0;
    double sum = 0.0, sum2 = 0.0;
    double min = 0.0, max = 0.0;
  };
  std::map<std::tuple<int, int, int, double, double>, Summary> groups;
  for (const auto& r : table.rows) {
    auto& g = groups[{static_cast<int>(r.stat), r.k, r.j, r.s, r.t}];
    if (g.count == 0) {
      g.min = g.max = r.value;
    } else {
      g.min = std::min(g.min, r.value);
      g.max = std::max(g.max, r.value);
    }
    ++g.count;
    g.sum += r.value;
    g.sum2 += r.value * r.value;
  }
  json stats = json::array();
  for (const auto& [key, g] : groups) {
    auto [stat, k, j, s, t] = key;
    double mean = g.sum / static_cast<double>(g.count);
    double var = g.sum2 / static_cast<double>(g.count) - mean * mean;
    stats.push_back(json{
        {"stat", gwsnake::stat_name(static_cast<gwsnake::Stat>(stat))},
        {"k", k},
        {"j", j},
        {"s", s},
        {"t", t},
        {"count", g.count},
        {"mean", mean},
        {"sd", std::sqrt(std::max(0.0, var))},
        {"min", g.min},
        {"max", g.max}});
  }
  json doc{{"config", table.config}, {"n", table.n}, {"stats", stats}};
  std::cout << doc.dump(2) << "\n";

  if (!a.plot.empty()) {
    std::map<std::string, gwsnake::PlotSeries> series;
    for (const auto& [key, g] : groups) {
      auto [stat_int, k, j, s, t] = key;
      auto stat = static_cast<gwsnake::Stat>(stat_int);
      if (s != t) continue;
      bool plottable = stat == gwsnake::Stat::Height ||
                       stat == gwsnake::Stat::G ||
                       stat == gwsnake::Stat::R ||
                       stat == gwsnake::Stat::R1 ||
                       stat == gwsnake::Stat::R2 ||
                       stat == gwsnake::Stat::GLimit ||
                       stat == gwsnake::Stat::RLimit ||
                       stat == gwsnake::Stat::Excursion;
      if (!plottable) continue;
      std::string label = gwsnake::stat_name(stat);
      if (stat == gwsnake::Stat::G || stat == gwsnake::Stat::GLimit)
        label += "(" + std::to_string(k) + "," + std::to_string(j) + ")";
      auto& ser = series[label];
      ser.label = label;
      ser.x.push_back(s);
      ser.y.push_back(g.sum / static_cast<double>(g.count));
    }
    std::vector<gwsnake::PlotSeries> ordered;
    ordered.reserve(series.size());
    for (auto& [label, ser] : series) ordered.push_back(std::move(ser));
    std::ostringstream svg;
    gwsnake::write_svg_plot(svg, "mean value by position", ordered);
    write_text_file(a.plot, svg.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"size-conditioned tree simulation and verification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON file with defaults; explicit flags win");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "draw one conditioned tree");
  auto* sa_mu = sample->add_option("--mu", sa.mu, "offspring probabilities");
  auto* sa_nu = sample->add_option("--nu", sa.nu, "displacement family JSON");
  auto* sa_n = sample->add_option("--n", sa.n, "edge count")->required();
  auto* sa_seed = sample->add_option("--seed", sa.seed, "master seed");
  auto* sa_out = sample->add_option("--out", sa.out, "output path");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify-exact",
                                    "exact finite-size identity checks");
  auto* va_mu = verify->add_option("--mu", va.mu, "rational offspring law");
  auto* va_max = verify->add_option("--max-n", va.max_n, "largest edge count");
  auto* va_out = verify->add_option("--out", va.out, "report path");

  McArgs ma;
  auto* mc = app.add_subcommand("mc", "Monte-Carlo experiment with gating");
  auto* ma_exp = mc->add_option("--experiment", ma.experiment,
                                "g-cov|snake-cov|combo|ks|independence|path-stats");
  auto* ma_mu = mc->add_option("--mu", ma.mu, "offspring probabilities");
  auto* ma_nu = mc->add_option("--nu", ma.nu, "displacement family JSON");
  auto* ma_n = mc->add_option("--n", ma.n, "edge count")->required();
  auto* ma_reps = mc->add_option("--reps", ma.reps, "replicates")->required();
  auto* ma_grid = mc->add_option("--grid", ma.grid, "evaluation points");
  auto* ma_seed = mc->add_option("--seed", ma.seed, "master seed");
  auto* ma_out = mc->add_option("--out", ma.out, "CSV path");
  auto* ma_threads = mc->add_option("--threads", ma.threads, "worker cap");
  auto* ma_lambda = mc->add_option("--lambda", ma.lambda,
                                   "combination coefficients");
  auto* ma_limit = mc->add_option("--limit-grid", ma.limit_grid,
                                  "excursion grid for the ks experiment");
  auto* ma_cov = mc->add_option("--cov-tol", ma.cov_tol,
                                "covariance ratio tolerance");
  auto* ma_ks = mc->add_option("--ks-threshold", ma.ks_threshold,
                               "ks statistic bound");
  auto* ma_corr = mc->add_option("--corr-threshold", ma.corr_threshold,
                                 "independence correlation bound");

  LimitArgs la;
  auto* limit = app.add_subcommand("limit-sample",
                                   "draw from the limit objects");
  auto* la_grid = limit->add_option("--grid", la.grid, "excursion grid steps");
  auto* la_reps = limit->add_option("--reps", la.reps, "replicates")
                      ->required();
  auto* la_kernel = limit->add_option("--kernel", la.kernel,
                                      "excursion|field|snake");
  auto* la_seed = limit->add_option("--seed", la.seed, "master seed");
  auto* la_out = limit->add_option("--out", la.out, "CSV path");
  auto* la_mu = limit->add_option("--mu", la.mu, "offspring probabilities");
  auto* la_points = limit->add_option("--points", la.points,
                                      "field evaluation points");
  auto* la_beta2 = limit->add_option("--beta2", la.beta2,
                                     "snake kernel variance scale");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "summarize a result table");
  auto* ra_in = report->add_option("--in", ra.in, "CSV path")->required();
  auto* ra_plot = report->add_option("--plot", ra.plot, "SVG output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("invalid_args", e.what());
  }

  try {
    json cfg = json::object();
    if (!config_path.empty()) cfg = load_json_file(config_path);

    if (sample->parsed()) {
      merge(sa_mu, cfg, "mu", sa.mu);
      merge(sa_nu, cfg, "nu", sa.nu);
      merge(sa_n, cfg, "n", sa.n);
      merge(sa_seed, cfg, "seed", sa.seed);
      merge(sa_out, cfg, "out", sa.out);
      return run_sample(sa);
    }
    if (verify->parsed()) {
      merge(va_mu, cfg, "mu", va.mu);
      merge(va_max, cfg, "max_n", va.max_n);
      merge(va_out, cfg, "out", va.out);
      return run_verify(va);
    }
    if (mc->parsed()) {
      merge(ma_exp, cfg, "experiment", ma.experiment);
      merge(ma_mu, cfg, "mu", ma.mu);
      merge(ma_nu, cfg, "nu", ma.nu);
      merge(ma_n, cfg, "n", ma.n);
      merge(ma_reps, cfg, "reps", ma.reps);
      merge(ma_grid, cfg, "grid", ma.grid);
      merge(ma_seed, cfg, "seed", ma.seed);
      merge(ma_out, cfg, "out", ma.out);
      merge(ma_threads, cfg, "threads", ma.threads);
      merge(ma_lambda, cfg, "lambda", ma.lambda);
      merge(ma_limit, cfg, "limit_grid", ma.limit_grid);
      merge(ma_cov, cfg, "cov_tol", ma.cov_tol);
      merge(ma_ks, cfg, "ks_threshold", ma.ks_threshold);
      merge(ma_corr, cfg, "corr_threshold", ma.corr_threshold);
      return run_mc(ma);
    }
    if (limit->parsed()) {
      merge(la_grid, cfg, "grid", la.grid);
      merge(la_reps, cfg, "reps", la.reps);
      merge(la_kernel, cfg, "kernel", la.kernel);
      merge(la_seed, cfg, "seed", la.seed);
      merge(la_out, cfg, "out", la.out);
      merge(la_mu, cfg, "mu", la.mu);
      merge(la_points, cfg, "points", la.points);
      merge(la_beta2, cfg, "beta2", la.beta2);
      return run_limit_sample(la);
    }
    if (report->parsed()) {
      merge(ra_in, cfg, "in", ra.in);
      merge(ra_plot, cfg, "plot", ra.plot);
      return run_report(ra);
    }
  } catch (const gwsnake::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal_error", e.what());
  }
  return fail("invalid_args", "no subcommand selected");
}
