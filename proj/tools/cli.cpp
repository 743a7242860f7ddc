#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpe/parallel.hpp"
#include "cpe/rearrangement.hpp"

#ifndef CPE_VERSION
#define CPE_VERSION "0.0.0"
#endif

namespace cpe::cli {

namespace {

using nlohmann::ordered_json;

struct Context {
  const RunConfig& cfg;
  std::filesystem::path out_dir;
  bool quiet = false;
  std::ostream& out;
  std::ostream& err;

  std::filesystem::path write(const std::string& name, const std::string& body) const {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PreconditionError(fmt::format("cannot write '{}'", path.string()));
    f << body;
    if (!quiet) err << "wrote " << path.string() << '\n';
    return path;
  }

  ordered_json provenance() const {
    ordered_json j;
    j["config_sha256"] = cfg.sha256;
    j["seed"] = cfg.seed;
    j["version"] = CPE_VERSION;
    return j;
  }
};

template <class T>
const T& need(const std::optional<T>& block, const char* name) {
  if (!block) throw ConfigError(fmt::format("the configuration has no '{}' block", name), 0);
  return *block;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

int cmd_eig(const Context& ctx) {
  const EigBlock& b = need(ctx.cfg.eig, "eig");
  const ProcessSpec& spec = ctx.cfg.process(b.process);
  const Domain& d = ctx.cfg.domain(b.domain);
  const auto waiver = b.waive_condition ? ConditionWaiver::waived : ConditionWaiver::none;
  const EigenvalueResult e = principal_eigenvalue(spec, d, b.quadrature, waiver);

  std::optional<double> closed;
  if (const auto* u = std::get_if<jump::UniformOnSet>(&spec.jump.kind())) {
    closed = closed_form_uniform(spec.rate, d, u->support);
  }
  ordered_json j;
  j["lambda1"] = closed.value_or(e.lambda1);
  j["alpha"] = e.alpha;
  j["method"] = closed ? "closed-form" : e.method;
  j["error_estimate"] = closed ? 0.0 : e.error;
  j["r"] = spec.rate;
  j["domain"] = d.describe();
  j["jump"] = spec.jump.describe();
  j["seed"] = ctx.cfg.seed;
  j["quadrature_lambda1"] = e.lambda1;
  j["quadrature_method"] = e.method;
  j["quadrature_error"] = e.error;
  j["closed_form"] = closed ? ordered_json(*closed) : ordered_json(nullptr);
  j["condition_waived"] = e.waived;
  j["saturated"] = e.saturated;
  if (!e.interpretation.empty()) j["interpretation"] = e.interpretation;
  j["config_sha256"] = ctx.cfg.sha256;
  const std::string body = dump(j);
  ctx.write("eig.json", body);
  ctx.out << body;
  if (closed && std::abs(*closed - e.lambda1) > e.error + 1e-9) {
    ctx.err << fmt::format("closed form {} and quadrature {} differ by more than the quadrature error {}\n", *closed,
                           e.lambda1, e.error);
    return kAssertionFailure;
  }
  return kSuccess;
}

int cmd_shc(const Context& ctx) {
  const ShcBlock& b = need(ctx.cfg.shc, "shc");
  const ProcessSpec& spec = ctx.cfg.process(b.process);
  const Domain& d = ctx.cfg.domain(b.domain);
  const ShcCurve c = estimate_Q(spec, d, b.times, b.n_paths, ctx.cfg.seed);
  std::string body = header_line(ctx.cfg) + "\n";
  body += fmt::format("# volume={} process={} domain={}\n", num(c.volume), c.process, c.domain);
  body += "t,q_mean,q_stderr,n_paths,method\n";
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    body += fmt::format("{},{},{},{},{}\n", num(c.times[i]), num(c.estimates[i].mean), num(c.estimates[i].std_error),
                        c.estimates[i].n_samples, c.method);
  }
  ctx.write("shc.csv", body);
  return kSuccess;
}

int cmd_lambda_fit(const Context& ctx) {
  const LambdaFitBlock& b = need(ctx.cfg.lambda_fit, "lambda_fit");
  const ShcCurve c = read_shc_csv(b.input);
  const LambdaFit fit = lambda_from_shc(c, b.ci_window);
  ordered_json j;
  j["lambda"] = fit.lambda;
  j["lambda_stderr"] = fit.lambda_stderr;
  j["intercept"] = fit.intercept;
  j["chi2"] = fit.chi2;
  j["points_used"] = fit.points_used;
  j["ci_window"] = fit.max_rel_ci_width;
  j["weighted"] = fit.weighted;
  j["times_used"] = fit.times_used;
  j["residuals"] = fit.residuals;
  j["input"] = b.input;
  j.update(ctx.provenance());
  const std::string body = dump(j);
  ctx.write("lambda_fit.json", body);
  ctx.out << body;
  return kSuccess;
}

int cmd_riesz(const Context& ctx) {
  const RieszBlock& b = need(ctx.cfg.riesz, "riesz");
  std::string body = header_line(ctx.cfg) + "\ncase,lhs,rhs,margin,tolerance,holds\n";
  bool all = true;
  auto row = [&](const std::string& name, const RieszCheck& r) {
    all = all && r.holds();
    body += fmt::format("{},{},{},{},{},{}\n", name, num(r.lhs), num(r.rhs), num(r.margin), num(r.tolerance),
                        r.holds() ? 1 : 0);
  };
  if (b.files) {
    row("files", check_riesz(load_grid_field((*b.files)[0]), load_grid_field((*b.files)[1]),
                             load_grid_field((*b.files)[2])));
  }
  for (std::size_t k = 0; k < b.random_triples; ++k) {
    Engine eng = make_stream(ctx.cfg.seed, StreamSalt::riesz_suite, k);
    const int dim = 1 + static_cast<int>(k % 2);
    const int cells = dim == 1 ? 64 : 24;
    const GridField f = random_indicator(dim, b.h, cells, eng);
    const GridField g = random_indicator(dim, b.h, cells, eng);
    const GridField h = random_indicator(dim, b.h, cells, eng);
    row(fmt::format("random-{}", k), check_riesz(f, g, h));
  }
  ctx.write("riesz.csv", body);
  if (!all) {
    ctx.err << "Riesz inequality violated beyond the grid tolerance\n";
    return kAssertionFailure;
  }
  return kSuccess;
}

int cmd_lemmas(const Context& ctx) {
  const LemmasBlock& b = need(ctx.cfg.lemmas, "lemmas");
  const auto rows = lemma_report(ctx.cfg.jump(b.jump), ctx.cfg.domain(b.domain), b.plan, ctx.cfg.seed);
  // target is the real part; target_im and deviation follow the standard columns.
  std::string body = header_line(ctx.cfg) +
                     "\nlemma,n,xi,estimate_re,estimate_im,stderr,target,acceptance_rate,target_im,deviation\n";
  for (const auto& r : rows) {
    body += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.lemma, r.n, r.xi ? num(*r.xi) : std::string(),
                        num(r.estimate_re), num(r.estimate_im), num(r.std_error), num(r.target_re),
                        num(r.acceptance_rate), num(r.target_im), num(r.deviation));
  }
  ctx.write("lemmas.csv", body);
  return kSuccess;
}

struct ExperimentOutput {
  std::string csv;
  bool passed = false;
  ordered_json parameters;
};

ExperimentOutput run_experiment(const Context& ctx, const ExperimentBlock& block) {
  const RunConfig& cfg = ctx.cfg;
  ExperimentOutput o;
  o.csv = header_line(cfg) + "\n";
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, FkSweepBlock>) {
          std::vector<Domain> shapes;
          for (const auto& s : b.shapes) shapes.push_back(cfg.domain(s));
          const auto rows = fk_sweep(cfg.process(b.process), shapes, b.quadrature);
          o.csv += "domain,lambda,lambda_symmetrized,gap,error,consistent,strict\n";
          o.passed = true;
          for (const auto& r : rows) {
            o.passed = o.passed && r.consistent;
            o.csv += fmt::format("{},{},{},{},{},{},{}\n", b.shapes[r.input_index], num(r.lambda),
                                 num(r.lambda_symmetrized), num(r.gap), num(r.error), r.consistent ? 1 : 0,
                                 r.strict ? 1 : 0);
          }
          o.parameters = {{"type", "fk-sweep"}, {"process", cfg.process(b.process).describe()},
                          {"shapes", b.shapes}, {"quadrature", b.quadrature.method_name()},
                          {"resolution", b.quadrature.resolution}};
        } else if constexpr (std::is_same_v<B, EqualityBlock>) {
          const auto rep = equality_case_check(b.spec, b.rate, b.times, b.n_paths, cfg.seed);
          o.csv += "t,q_original,se_original,q_symmetrized,se_symmetrized,gap,sigma,closed_form,passed\n";
          for (const auto& r : rep.rows) {
            o.csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", num(r.t), num(r.original.mean),
                                 num(r.original.std_error), num(r.symmetrized.mean), num(r.symmetrized.std_error),
                                 num(r.gap), num(r.sigma), r.closed_form ? num(*r.closed_form) : std::string(),
                                 r.passed ? 1 : 0);
          }
          o.passed = rep.passed;
          o.parameters = {{"type", "equality-case"}, {"regime", regime_name(b.spec.regime)},
                          {"domain", b.spec.d.describe()}, {"support", b.spec.a.describe()},
                          {"rate", b.rate}, {"times", b.times}, {"n_paths", b.n_paths},
                          {"summary", rep.summary}};
        } else if constexpr (std::is_same_v<B, NonuniquenessBlock>) {
          const auto rep = nonuniqueness_counterexample(b.rate, cfg.domain(b.support), cfg.domain(b.first),
                                                        cfg.domain(b.second), cfg.seed, b.options);
          o.csv += "domain,closed_form,lambda_fit,lambda_stderr,relative_error,points_used\n";
          for (const auto* s : {&rep.first, &rep.second}) {
            o.csv += fmt::format("{},{},{},{},{},{}\n", s->domain, num(s->closed_form), num(s->fit.lambda),
                                 num(s->fit.lambda_stderr), num(s->relative_error), s->fit.points_used);
          }
          o.passed = rep.passed;
          o.parameters = {{"type", "nonuniqueness"}, {"rate", b.rate},
                          {"support", cfg.domain(b.support).describe()},
                          {"domains", {b.first, b.second}}, {"times", b.options.times},
                          {"n_paths", b.options.n_paths}, {"tolerance", b.options.tolerance},
                          {"closed_forms_equal", rep.closed_forms_equal}};
        } else {
          o.csv += "n,original,original_stderr,symmetrized,symmetrized_stderr,gap,error,holds\n";
          o.passed = true;
          for (std::size_t n : b.steps) {
            const auto g = stay_integral_symmetrization_gap(cfg.domain(b.domain), cfg.jump(b.jump), n, b.quadrature);
            o.passed = o.passed && g.holds();
            o.csv += fmt::format("{},{},{},{},{},{},{},{}\n", n, num(g.original.mean), num(g.original.std_error),
                                 num(g.symmetrized.mean), num(g.symmetrized.std_error), num(g.gap), num(g.error),
                                 g.holds() ? 1 : 0);
          }
          o.parameters = {{"type", "stay-gap"}, {"domain", cfg.domain(b.domain).describe()},
                          {"jump", cfg.jump(b.jump).describe()}, {"steps", b.steps},
                          {"samples", b.quadrature.resolution}};
        }
      },
      block);
  return o;
}

int cmd_experiment(const Context& ctx, const std::string& name) {
  const auto it = ctx.cfg.experiments.find(name);
  if (it == ctx.cfg.experiments.end()) {
    throw ConfigError(fmt::format("no experiment named '{}' in the configuration", name), 0);
  }
  const ExperimentOutput o = run_experiment(ctx, it->second);
  ctx.write(name + ".csv", o.csv);
  ordered_json manifest;
  manifest["experiment"] = name;
  manifest.update(ctx.provenance());
  manifest["passed"] = o.passed;
  manifest["csv"] = name + ".csv";
  manifest["parameters"] = o.parameters;
  manifest["config"] = ctx.cfg.text;
  ctx.write(name + ".json", dump(manifest));
  if (!o.passed) {
    ctx.err << fmt::format("experiment '{}' failed its assertion\n", name);
    return kAssertionFailure;
  }
  return kSuccess;
}

}  // namespace

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string header_line(const RunConfig& cfg) {
  return fmt::format("# config_sha256={} seed={}", cfg.sha256, cfg.seed);
}

ShcCurve read_shc_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError(fmt::format("cannot open '{}'", path));
  ShcCurve c;
  c.volume = 0.0;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#", 0) == 0) {
      const auto pos = line.find("volume=");
      if (pos != std::string::npos) {
        std::istringstream vs(line.substr(pos + 7));
        vs.imbue(std::locale::classic());
        vs >> c.volume;
      }
      continue;
    }
    if (!header) {
      if (line != "t,q_mean,q_stderr,n_paths,method") {
        throw PreconditionError(fmt::format("{}:{}: expected the shc CSV header", path, lineno));
      }
      header = true;
      continue;
    }
    std::istringstream row(line);
    row.imbue(std::locale::classic());
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw PreconditionError(fmt::format("{}:{}: expected 5 columns", path, lineno));
    try {
      c.times.push_back(std::stod(cells[0]));
      c.estimates.push_back(EstimateCI{std::stod(cells[1]), std::stod(cells[2]), std::stoull(cells[3]), 0});
    } catch (const std::exception&) {
      throw PreconditionError(fmt::format("{}:{}: malformed number", path, lineno));
    }
    c.method = cells[4];
  }
  if (!(c.volume > 0.0)) throw PreconditionError(fmt::format("{}: missing '# volume=' header line", path));
  return c;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Principal eigenvalues and heat content of killed compound Poisson processes", "cpe"};
  std::string config_path;
  std::string out_dir;
  unsigned workers = 1;
  bool quiet = false;
  app.add_option("--config", config_path, "run configuration (YAML)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 1024u));
  app.add_flag("--quiet", quiet, "suppress progress messages");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_subcommand("eig", "principal eigenvalue (JSON)");
  app.add_subcommand("shc", "spectral heat content curve (CSV)");
  app.add_subcommand("lambda-fit", "decay rate of an shc CSV (JSON)");
  app.add_subcommand("riesz", "Riesz rearrangement inequality checks (CSV)");
  app.add_subcommand("lemmas", "conditional chain statistics (CSV)");
  std::string experiment;
  app.add_subcommand("experiment", "registered experiment (CSV plus JSON manifest)")
      ->add_option("name", experiment, "experiment name from the configuration")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kPreconditionFailure;
  }

  try {
    const RunConfig cfg = load_config(config_path);
    set_worker_count(workers);
    const std::string dir = !out_dir.empty() ? out_dir : cfg.output.value_or(".");
    const Context ctx{cfg, dir, quiet, out, err};
    const auto* sub = app.get_subcommands().front();
    const std::string& name = sub->get_name();
    if (name == "eig") return cmd_eig(ctx);
    if (name == "shc") return cmd_shc(ctx);
    if (name == "lambda-fit") return cmd_lambda_fit(ctx);
    if (name == "riesz") return cmd_riesz(ctx);
    if (name == "lemmas") return cmd_lemmas(ctx);
    return cmd_experiment(ctx, experiment);
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kPreconditionFailure;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kPreconditionFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kPreconditionFailure;
  }
}

}  // namespace cpe::cli
