#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cpe/asymptotics.hpp"
#include "cpe/eigenvalue.hpp"
#include "cpe/error.hpp"
#include "cpe/experiments.hpp"
#include "cpe/geometry.hpp"
#include "cpe/jump_models.hpp"
#include "cpe/rearrangement.hpp"

namespace cpe::cli {

/// A configuration problem, with the 1-based line it was found on (0 if unknown).
class ConfigError : public PreconditionError {
 public:
  ConfigError(const std::string& what, int line);
  int line() const { return line_; }

 private:
  int line_;
};

struct EigBlock {
  std::string process;
  std::string domain;
  QuadratureSpec quadrature;
  bool waive_condition = false;
};

struct ShcBlock {
  std::string process;
  std::string domain;
  std::vector<double> times;
  std::size_t n_paths = 0;
};

struct LambdaFitBlock {
  std::string input;
  double ci_window = kDefaultCiWindow;
};

struct RieszBlock {
  /// Either three field files or a random suite.
  std::optional<std::array<std::string, 3>> files;
  std::size_t random_triples = 0;
  double h = 1.0 / 64.0;
};

struct LemmasBlock {
  std::string jump;
  std::string domain;
  LemmaPlan plan;
};

struct FkSweepBlock {
  std::string process;
  std::vector<std::string> shapes;
  QuadratureSpec quadrature;
};

struct EqualityBlock {
  EqualityCaseSpec spec;
  double rate = 1.0;
  std::vector<double> times;
  std::size_t n_paths = 0;
};

struct NonuniquenessBlock {
  double rate = 1.0;
  std::string support;
  std::string first;
  std::string second;
  NonuniquenessOptions options;
};

struct StayGapBlock {
  std::string domain;
  std::string jump;
  std::vector<std::size_t> steps;
  QuadratureSpec quadrature;
};

using ExperimentBlock = std::variant<FkSweepBlock, EqualityBlock, NonuniquenessBlock, StayGapBlock>;

struct RunConfig {
  std::string text;
  std::string sha256;
  std::uint64_t seed = 0;
  std::optional<std::string> output;

  std::map<std::string, Domain> domains;
  std::map<std::string, JumpDensity> jumps;
  std::map<std::string, ProcessSpec> processes;

  std::optional<EigBlock> eig;
  std::optional<ShcBlock> shc;
  std::optional<LambdaFitBlock> lambda_fit;
  std::optional<RieszBlock> riesz;
  std::optional<LemmasBlock> lemmas;
  std::map<std::string, ExperimentBlock> experiments;

  const Domain& domain(const std::string& name) const;
  const JumpDensity& jump(const std::string& name) const;
  const ProcessSpec& process(const std::string& name) const;
};

/// Parses and validates a YAML run configuration. Relative file paths are
/// resolved against base_dir.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

std::string sha256_hex(const std::string& data);

}  // namespace cpe::cli
