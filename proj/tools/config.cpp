#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

namespace cpe::cli {

namespace {

int line_of(const YAML::Node& node) { return node.IsDefined() && node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) { throw ConfigError(what, line_of(node)); }

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) fail(node, fmt::format("{} must be a mapping", where));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) fail(kv.first, fmt::format("unknown key '{}' in {}", key, where));
  }
}

YAML::Node require(const YAML::Node& node, const std::string& key, const std::string& where) {
  const YAML::Node child = node[key];
  if (!child.IsDefined() || child.IsNull()) fail(node, fmt::format("{} is missing required key '{}'", where, key));
  return child;
}

template <class T>
T scalar(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, fmt::format("{} has the wrong type", what));
  }
}

double positive(const YAML::Node& node, const std::string& what) {
  const double v = scalar<double>(node, what);
  if (!(v > 0.0) || !std::isfinite(v)) fail(node, fmt::format("{} must be positive", what));
  return v;
}

std::size_t count(const YAML::Node& node, const std::string& what, std::size_t minimum) {
  const auto v = scalar<long long>(node, what);
  if (v < static_cast<long long>(minimum)) fail(node, fmt::format("{} must be at least {}", what, minimum));
  return static_cast<std::size_t>(v);
}

Vec vec(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() == 0 || node.size() > static_cast<std::size_t>(kMaxDim)) {
    fail(node, fmt::format("{} must be a list of 1 to {} numbers", what, kMaxDim));
  }
  Vec v(static_cast<int>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v[static_cast<int>(i)] = scalar<double>(node[i], what);
  return v;
}

Mat mat(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() == 0 || node.size() > static_cast<std::size_t>(kMaxDim)) {
    fail(node, fmt::format("{} must be a square list of rows", what));
  }
  const int n = static_cast<int>(node.size());
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec row = vec(node[i], what);
    if (row.size() != n) fail(node[i], fmt::format("{} must be square", what));
    m.row(i) = row.transpose();
  }
  return m;
}

std::vector<double> times(const YAML::Node& node) {
  if (!node.IsSequence() || node.size() == 0) fail(node, "times must be a nonempty list");
  std::vector<double> out;
  for (const auto& t : node) {
    const double v = scalar<double>(t, "time");
    if (!(v >= 0.0) || !std::isfinite(v)) fail(t, "times must be finite and nonnegative");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> steps(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() == 0) fail(node, fmt::format("{} must be a nonempty list", what));
  std::vector<std::size_t> out;
  for (const auto& s : node) out.push_back(count(s, what, 0));
  return out;
}

/// Runs fn and attaches the node's line to library precondition failures.
template <class Fn>
auto at_line(const YAML::Node& node, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    fail(node, e.what());
  }
}

class Parser {
 public:
  Parser(const YAML::Node& root, std::string base_dir, RunConfig& cfg)
      : root_(root), base_dir_(std::move(base_dir)), cfg_(cfg) {}

  void run() {
    check_keys(root_, {"seed", "output", "domains", "jumps", "processes", "eig", "shc", "lambda_fit", "riesz",
                       "lemmas", "experiments"},
               "the configuration");
    const YAML::Node seed = root_["seed"];
    if (!seed.IsDefined() || seed.IsNull()) throw ConfigError("seed required", 0);
    cfg_.seed = scalar<std::uint64_t>(seed, "seed");
    if (root_["output"]) cfg_.output = resolve_path(scalar<std::string>(root_["output"], "output"));

    if (const auto d = root_["domains"]) {
      check_map(d, "domains");
      for (const auto& kv : d) domain(kv.first.as<std::string>(), kv.first);
    }
    if (const auto j = root_["jumps"]) {
      check_map(j, "jumps");
      for (const auto& kv : j) jump(kv.first.as<std::string>(), kv.first);
    }
    if (const auto p = root_["processes"]) {
      check_map(p, "processes");
      for (const auto& kv : p) process_def(kv.first.as<std::string>(), kv.second);
    }
    if (const auto n = root_["eig"]) cfg_.eig = eig(n);
    if (const auto n = root_["shc"]) cfg_.shc = shc(n);
    if (const auto n = root_["lambda_fit"]) cfg_.lambda_fit = lambda_fit(n);
    if (const auto n = root_["riesz"]) cfg_.riesz = riesz(n);
    if (const auto n = root_["lemmas"]) cfg_.lemmas = lemmas(n);
    if (const auto n = root_["experiments"]) {
      check_map(n, "experiments");
      for (const auto& kv : n) cfg_.experiments.emplace(kv.first.as<std::string>(), experiment(kv.first, kv.second));
    }
  }

 private:
  static void check_map(const YAML::Node& node, const std::string& where) {
    if (!node.IsMap()) fail(node, fmt::format("{} must be a mapping of names", where));
  }

  std::string resolve_path(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (std::filesystem::path(base_dir_) / path).string();
  }

  const Domain& domain_ref(const YAML::Node& ref) {
    const auto name = scalar<std::string>(ref, "domain reference");
    if (!root_["domains"] || !root_["domains"][name]) fail(ref, fmt::format("undefined domain '{}'", name));
    return domain(name, ref);
  }

  const Domain& domain(const std::string& name, const YAML::Node& where) {
    if (auto it = cfg_.domains.find(name); it != cfg_.domains.end()) return it->second;
    if (resolving_.contains(name)) fail(where, fmt::format("domain '{}' refers to itself", name));
    resolving_.insert(name);
    const YAML::Node n = root_["domains"][name];
    const std::string ctx = fmt::format("domain '{}'", name);
    const auto kind = scalar<std::string>(require(n, "shape", ctx), "shape");
    Domain d = at_line(n, [&]() -> Domain {
      if (kind == "interval") {
        check_keys(n, {"shape", "lo", "hi"}, ctx);
        return Domain::interval(scalar<double>(require(n, "lo", ctx), "lo"), scalar<double>(require(n, "hi", ctx), "hi"));
      }
      if (kind == "box") {
        check_keys(n, {"shape", "lo", "hi"}, ctx);
        return Domain::box(vec(require(n, "lo", ctx), "lo"), vec(require(n, "hi", ctx), "hi"));
      }
      if (kind == "ball") {
        check_keys(n, {"shape", "center", "radius"}, ctx);
        return Domain::ball(vec(require(n, "center", ctx), "center"), positive(require(n, "radius", ctx), "radius"));
      }
      if (kind == "ellipsoid") {
        check_keys(n, {"shape", "center", "form"}, ctx);
        return Domain::ellipsoid(vec(require(n, "center", ctx), "center"), mat(require(n, "form", ctx), "form"));
      }
      if (kind == "translate") {
        check_keys(n, {"shape", "base", "shift"}, ctx);
        return Domain::translate(domain_ref(require(n, "base", ctx)), vec(require(n, "shift", ctx), "shift"));
      }
      if (kind == "linear") {
        check_keys(n, {"shape", "base", "map"}, ctx);
        return apply_linear(domain_ref(require(n, "base", ctx)), mat(require(n, "map", ctx), "map"));
      }
      if (kind == "grid") {
        check_keys(n, {"shape", "file"}, ctx);
        return load_grid_mask(resolve_path(scalar<std::string>(require(n, "file", ctx), "file")));
      }
      fail(n["shape"], fmt::format("unknown shape '{}'", kind));
    });
    resolving_.erase(name);
    return cfg_.domains.emplace(name, std::move(d)).first->second;
  }

  const JumpDensity& jump_ref(const YAML::Node& ref) {
    const auto name = scalar<std::string>(ref, "jump reference");
    if (!root_["jumps"] || !root_["jumps"][name]) fail(ref, fmt::format("undefined jump '{}'", name));
    return jump(name, ref);
  }

  const JumpDensity& jump(const std::string& name, const YAML::Node&) {
    if (auto it = cfg_.jumps.find(name); it != cfg_.jumps.end()) return it->second;
    const YAML::Node n = root_["jumps"][name];
    const std::string ctx = fmt::format("jump '{}'", name);
    const auto kind = scalar<std::string>(require(n, "kind", ctx), "kind");
    JumpDensity j = at_line(n, [&]() -> JumpDensity {
      if (kind == "uniform") {
        check_keys(n, {"kind", "support"}, ctx);
        return JumpDensity::uniform_on(domain_ref(require(n, "support", ctx)));
      }
      auto dim = [&] {
        const auto d = count(require(n, "dim", ctx), "dim", 1);
        if (d > static_cast<std::size_t>(kMaxDim)) fail(n["dim"], fmt::format("dim must be at most {}", kMaxDim));
        return static_cast<int>(d);
      };
      if (kind == "gaussian") {
        check_keys(n, {"kind", "dim", "sigma"}, ctx);
        return JumpDensity::gaussian(dim(), positive(require(n, "sigma", ctx), "sigma"));
      }
      if (kind == "exponential") {
        check_keys(n, {"kind", "dim", "scale"}, ctx);
        return JumpDensity::radial(
            jump::RadialDecreasing::exponential(dim(), positive(require(n, "scale", ctx), "scale")));
      }
      if (kind == "cone") {
        check_keys(n, {"kind", "dim", "radius"}, ctx);
        return JumpDensity::radial(jump::RadialDecreasing::cone(dim(), positive(require(n, "radius", ctx), "radius")));
      }
      fail(n["kind"], fmt::format("unknown jump kind '{}'", kind));
    });
    return cfg_.jumps.emplace(name, std::move(j)).first->second;
  }

  void process_def(const std::string& name, const YAML::Node& n) {
    const std::string ctx = fmt::format("process '{}'", name);
    check_keys(n, {"rate", "jump"}, ctx);
    const double rate = positive(require(n, "rate", ctx), "rate");
    const JumpDensity& j = jump_ref(require(n, "jump", ctx));
    cfg_.processes.emplace(name, ProcessSpec(rate, j));
  }

  std::string process_ref(const YAML::Node& ref) {
    const auto name = scalar<std::string>(ref, "process reference");
    if (!cfg_.processes.contains(name)) fail(ref, fmt::format("undefined process '{}'", name));
    return name;
  }

  std::string domain_name(const YAML::Node& ref) {
    domain_ref(ref);
    return ref.as<std::string>();
  }

  std::string jump_name(const YAML::Node& ref) {
    jump_ref(ref);
    return ref.as<std::string>();
  }

  QuadratureSpec quadrature(const YAML::Node& n, const std::string& ctx) {
    const std::string where = ctx + " quadrature";
    const auto method = scalar<std::string>(require(n, "method", where), "method");
    QuadratureSpec q;
    if (method == "grid") {
      check_keys(n, {"method", "cells", "coverage_subsamples", "kernel_subsamples"}, where);
      q = QuadratureSpec::grid(count(require(n, "cells", where), "cells", QuadratureSpec::kMinGridCells));
      if (n["coverage_subsamples"]) q.coverage_subsamples = static_cast<int>(count(n["coverage_subsamples"], "coverage_subsamples", 1));
      if (n["kernel_subsamples"]) q.kernel_subsamples = static_cast<int>(count(n["kernel_subsamples"], "kernel_subsamples", 1));
    } else if (method == "monte-carlo") {
      check_keys(n, {"method", "samples"}, where);
      q = QuadratureSpec::monte_carlo(count(require(n, "samples", where), "samples", QuadratureSpec::kMinSamples),
                                      cfg_.seed);
    } else {
      fail(n["method"], fmt::format("unknown quadrature method '{}' (grid or monte-carlo)", method));
    }
    return q;
  }

  EigBlock eig(const YAML::Node& n) {
    check_keys(n, {"process", "domain", "quadrature", "waive_condition"}, "eig");
    EigBlock b;
    b.process = process_ref(require(n, "process", "eig"));
    b.domain = domain_name(require(n, "domain", "eig"));
    b.quadrature = quadrature(require(n, "quadrature", "eig"), "eig");
    if (n["waive_condition"]) b.waive_condition = scalar<bool>(n["waive_condition"], "waive_condition");
    dims_match(n, cfg_.process(b.process).jump.dim(), cfg_.domain(b.domain).dim());
    return b;
  }

  ShcBlock shc(const YAML::Node& n) {
    check_keys(n, {"process", "domain", "times", "n_paths"}, "shc");
    ShcBlock b;
    b.process = process_ref(require(n, "process", "shc"));
    b.domain = domain_name(require(n, "domain", "shc"));
    b.times = times(require(n, "times", "shc"));
    b.n_paths = count(require(n, "n_paths", "shc"), "n_paths", kMinPaths);
    dims_match(n, cfg_.process(b.process).jump.dim(), cfg_.domain(b.domain).dim());
    return b;
  }

  LambdaFitBlock lambda_fit(const YAML::Node& n) {
    check_keys(n, {"input", "ci_window"}, "lambda_fit");
    LambdaFitBlock b;
    b.input = resolve_path(scalar<std::string>(require(n, "input", "lambda_fit"), "input"));
    if (n["ci_window"]) b.ci_window = positive(n["ci_window"], "ci_window");
    return b;
  }

  RieszBlock riesz(const YAML::Node& n) {
    check_keys(n, {"f", "g", "h", "random_triples", "cell_size"}, "riesz");
    RieszBlock b;
    if (n["f"] || n["g"] || n["h"]) {
      b.files = std::array<std::string, 3>{
          resolve_path(scalar<std::string>(require(n, "f", "riesz"), "f")),
          resolve_path(scalar<std::string>(require(n, "g", "riesz"), "g")),
          resolve_path(scalar<std::string>(require(n, "h", "riesz"), "h")),
      };
    }
    if (n["random_triples"]) b.random_triples = count(n["random_triples"], "random_triples", 1);
    if (n["cell_size"]) b.h = positive(n["cell_size"], "cell_size");
    if (!b.files && b.random_triples == 0) fail(n, "riesz needs field files f, g, h or random_triples");
    return b;
  }

  LemmasBlock lemmas(const YAML::Node& n) {
    check_keys(n, {"jump", "domain", "charfun_steps", "frequencies", "containment_steps", "n_accepted", "max_steps"},
               "lemmas");
    LemmasBlock b;
    b.jump = jump_name(require(n, "jump", "lemmas"));
    b.domain = domain_name(require(n, "domain", "lemmas"));
    dims_match(n, cfg_.jump(b.jump).dim(), cfg_.domain(b.domain).dim());
    if (n["charfun_steps"]) b.plan.charfun_steps = steps(n["charfun_steps"], "charfun_steps");
    if (n["containment_steps"]) b.plan.containment_steps = steps(n["containment_steps"], "containment_steps");
    if (n["frequencies"]) {
      b.plan.frequencies.clear();
      for (const auto& f : n["frequencies"]) b.plan.frequencies.push_back(scalar<double>(f, "frequency"));
    }
    if (n["n_accepted"]) b.plan.n_accepted = count(n["n_accepted"], "n_accepted", 100);
    if (n["max_steps"]) b.plan.max_steps = count(n["max_steps"], "max_steps", 1);
    for (const auto& list : {b.plan.charfun_steps, b.plan.containment_steps}) {
      for (std::size_t s : list) {
        if (s > b.plan.max_steps) fail(n, fmt::format("step {} exceeds max_steps {}", s, b.plan.max_steps));
      }
    }
    return b;
  }

  ExperimentBlock experiment(const YAML::Node& key, const YAML::Node& n) {
    const std::string ctx = fmt::format("experiment '{}'", key.as<std::string>());
    const auto type = scalar<std::string>(require(n, "type", ctx), "type");
    if (type == "fk-sweep") {
      check_keys(n, {"type", "process", "shapes", "quadrature"}, ctx);
      FkSweepBlock b;
      b.process = process_ref(require(n, "process", ctx));
      for (const auto& s : require(n, "shapes", ctx)) b.shapes.push_back(domain_name(s));
      if (b.shapes.empty()) fail(n["shapes"], "shapes must be a nonempty list");
      b.quadrature = quadrature(require(n, "quadrature", ctx), ctx);
      return b;
    }
    if (type == "equality-case") {
      check_keys(n, {"type", "regime", "domain", "support", "ellipsoid", "rate", "times", "n_paths"}, ctx);
      const auto regime = at_line(n["regime"], [&] { return parse_regime(scalar<std::string>(require(n, "regime", ctx), "regime")); });
      const double rate = positive(require(n, "rate", ctx), "rate");
      std::vector<double> ts = times(require(n, "times", ctx));
      const std::size_t paths = count(require(n, "n_paths", ctx), "n_paths", kMinPaths);
      EqualityCaseSpec spec = at_line(n, [&]() -> EqualityCaseSpec {
        if (regime == EqualityRegime::ellipsoid_congruent) {
          const YAML::Node e = require(n, "ellipsoid", ctx);
          check_keys(e, {"form", "shift", "d_scale", "a_scale"}, ctx + " ellipsoid");
          return EqualityCaseSpec::ellipsoid(mat(require(e, "form", ctx), "form"), vec(require(e, "shift", ctx), "shift"),
                                             positive(require(e, "d_scale", ctx), "d_scale"),
                                             positive(require(e, "a_scale", ctx), "a_scale"));
        }
        if (n["ellipsoid"]) fail(n["ellipsoid"], "ellipsoid parameters only apply to the ellipsoid-congruent regime");
        const Domain& d = domain_ref(require(n, "domain", ctx));
        const Domain& a = domain_ref(require(n, "support", ctx));
        return regime == EqualityRegime::large_support ? EqualityCaseSpec::large_support(d, a)
                                                       : EqualityCaseSpec::control(d, a);
      });
      return EqualityBlock{std::move(spec), rate, std::move(ts), paths};
    }
    if (type == "nonuniqueness") {
      check_keys(n, {"type", "rate", "support", "domains", "times", "n_paths", "tolerance"}, ctx);
      NonuniquenessBlock b;
      b.rate = positive(require(n, "rate", ctx), "rate");
      b.support = domain_name(require(n, "support", ctx));
      const YAML::Node ds = require(n, "domains", ctx);
      if (!ds.IsSequence() || ds.size() != 2) fail(ds, "domains must list exactly two domains");
      b.first = domain_name(ds[0]);
      b.second = domain_name(ds[1]);
      if (n["times"]) b.options.times = times(n["times"]);
      if (n["n_paths"]) b.options.n_paths = count(n["n_paths"], "n_paths", kMinPaths);
      if (n["tolerance"]) b.options.tolerance = positive(n["tolerance"], "tolerance");
      return b;
    }
    if (type == "stay-gap") {
      check_keys(n, {"type", "domain", "jump", "steps", "quadrature"}, ctx);
      StayGapBlock b;
      b.domain = domain_name(require(n, "domain", ctx));
      b.jump = jump_name(require(n, "jump", ctx));
      b.steps = steps(require(n, "steps", ctx), "steps");
      for (std::size_t s : b.steps) {
        if (s > kMaxSymmetrizationSteps) fail(n["steps"], fmt::format("steps are capped at {}", kMaxSymmetrizationSteps));
      }
      b.quadrature = quadrature(require(n, "quadrature", ctx), ctx);
      return b;
    }
    fail(n["type"], fmt::format("unknown experiment type '{}' (fk-sweep, equality-case, nonuniqueness, stay-gap)", type));
  }

  static void dims_match(const YAML::Node& n, int a, int b) {
    if (a != b) fail(n, fmt::format("dimension mismatch: jump has d = {}, domain has d = {}", a, b));
  }

  const YAML::Node& root_;
  std::string base_dir_;
  RunConfig& cfg_;
  std::set<std::string> resolving_;
};

}  // namespace

ConfigError::ConfigError(const std::string& what, int line)
    : PreconditionError(line > 0 ? fmt::format("config line {}: {}", line, what) : fmt::format("config: {}", what)),
      line_(line) {}

const Domain& RunConfig::domain(const std::string& name) const {
  const auto it = domains.find(name);
  if (it == domains.end()) throw ConfigError(fmt::format("undefined domain '{}'", name), 0);
  return it->second;
}

const JumpDensity& RunConfig::jump(const std::string& name) const {
  const auto it = jumps.find(name);
  if (it == jumps.end()) throw ConfigError(fmt::format("undefined jump '{}'", name), 0);
  return it->second;
}

const ProcessSpec& RunConfig::process(const std::string& name) const {
  const auto it = processes.find(name);
  if (it == processes.end()) throw ConfigError(fmt::format("undefined process '{}'", name), 0);
  return it->second;
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("the configuration must be a mapping", 1);
  RunConfig cfg;
  cfg.text = text;
  cfg.sha256 = sha256_hex(text);
  Parser(root, base_dir, cfg).run();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path), 0);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(buf.str(), dir.empty() ? "." : dir.string());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 digest failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

}  // namespace cpe::cli
