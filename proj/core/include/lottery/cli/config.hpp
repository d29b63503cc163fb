#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lottery/experiments/drivers.hpp"
#include "lottery/experiments/stats.hpp"
#include "lottery/experiments/suite.hpp"
#include "lottery/numerics/tensor.hpp"

namespace lottery {

// Text of configs/ltlab.schema.json as compiled into the library.
const std::string& config_schema_text();

// Checks a JSON document against a JSON schema. Supports the keywords the
// shipped schema uses: type, enum, properties, required, additionalProperties
// (false), items, minItems, uniqueItems, minLength, minimum, maximum,
// exclusiveMinimum, exclusiveMaximum and local $ref. Throws SchemaError with
// the JSON pointer of the first violation.
void validate_json(const std::string& document, const std::string& schema);

struct ClaimsSection {
  std::vector<std::string> tasks;  // default: every suite task
  std::vector<double> sparsities = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> variants = kClaimVariants;
  RandomScheme scheme = RandomScheme::global;
  bool universality = true;
  std::string mlm_task = "mlm";
};

struct ImpSection {
  std::string task = "dominant-state";
  double target = 0.6;
  std::vector<std::string> variants = kClaimVariants;
  std::vector<double> rewind_fractions = {0.0};
};

struct StandardPruneSection {
  std::string task = "dominant-state";
  double target = 0.6;
};

struct RewindSweepSection {
  std::string task = "dominant-state";
  double sparsity = 0.6;
  std::vector<double> fractions = kRewindFractions;
};

struct RewoundSourceSection {
  std::string task;
  std::vector<double> fractions = kRewindFractions;
};

struct TransferSection {
  std::vector<std::string> sources;  // default: every suite task
  std::vector<std::string> targets;  // default: every suite task
  double sparsity = 0.6;
  bool direct_row = true;
  bool overlap = false;  // also record the sources' pairwise mask overlap
  std::optional<RewoundSourceSection> rewound_source;
};

struct OverlapSection {
  std::vector<std::string> tasks;
  double sparsity = 0.6;
};

struct MultitaskSection {
  std::vector<std::string> tasks;
  std::vector<std::string> targets;
  double sparsity = 0.6;
};

struct DataSizeSection {
  std::string source = "mlm";
  std::vector<std::size_t> sizes = {64, 128, 256, 512};
  std::vector<std::string> targets;
  double sparsity = 0.6;
};

struct ReportSection {
  std::vector<std::string> kinds;  // default: every kind with records
  std::vector<std::string> formats = {"csv", "svg", "text"};
  std::optional<double> sparsity;
  std::optional<Criterion> criterion;  // default: the top-level criterion
};

/// A resolved ltlab config: preset suite with overrides applied, every
/// section filled with defaults.
struct LabConfig {
  std::optional<std::string> experiment;
  std::string suite_name = "toy";
  SuiteConfig suite;
  std::filesystem::path out = "runs/toy";
  Dtype dtype = Dtype::f32;
  std::size_t workers = 0;  // 0 selects the number of hardware threads
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  Criterion criterion = Criterion::one_stddev;

  ClaimsSection claims;
  ImpSection imp;
  StandardPruneSection standard_prune;
  RewindSweepSection rewind_sweep;
  TransferSection transfer;
  OverlapSection overlap;
  MultitaskSection multitask;
  DataSizeSection datasize;
  ReportSection report;

  std::string document;  // the validated JSON after overrides, pretty-printed

  std::size_t effective_workers() const;
};

// Applies `path=value` overrides to a JSON document. Path segments are object
// keys or array indices separated by dots; a value that does not parse as JSON
// is taken as a string. Missing objects along the path are created.
std::string apply_overrides(const std::string& document, const std::vector<std::string>& overrides);

// Validates `document` against the schema, then resolves it. Semantic
// problems (unknown task ids, an invalid suite) throw ConfigError.
LabConfig parse_config(const std::string& document);
LabConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace lottery
