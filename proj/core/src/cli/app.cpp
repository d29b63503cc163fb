#include "lottery/cli/app.hpp"

#include <openssl/crypto.h>

#include <Eigen/Core>
#include <chrono>
#include <ctime>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lottery/cli/config.hpp"
#include "lottery/cli/report.hpp"
#include "lottery/errors.hpp"
#include "lottery/experiments/drivers.hpp"
#include "lottery/experiments/lab.hpp"
#include "lottery/io/binary.hpp"
#include "lottery/io/fingerprint.hpp"
#include "lottery/masking/pruning.hpp"
#include "lottery/training/checkpoint.hpp"

#ifndef LOTTERY_VERSION
#define LOTTERY_VERSION "0.0.0"
#endif

namespace lottery {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string dtype;
  bool trace = false;
  std::vector<std::string> sets;
  std::string inspect_path;
};

LabConfig resolve(const Globals& g) {
  std::vector<std::string> overrides = g.sets;
  if (!g.out.empty()) overrides.push_back("out=" + json(g.out).dump());
  if (g.seed) overrides.push_back("seed=" + std::to_string(*g.seed));
  if (g.workers) overrides.push_back("workers=" + std::to_string(*g.workers));
  if (!g.dtype.empty()) overrides.push_back("dtype=" + json(g.dtype).dump());
  if (g.config.empty()) {
    return parse_config(apply_overrides("{}", overrides));
  }
  return load_config(g.config, overrides);
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json versions() {
  return {{"ltlab", LOTTERY_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"openssl", OpenSSL_version(OPENSSL_VERSION)},
          {"compiler", __VERSION__}};
}

void write_manifest(const LabConfig& c, const std::string& command, const std::string& started, double seconds,
                    const std::string& status, const std::string& error, std::size_t records) {
  json m;
  m["command"] = command;
  m["config"] = json::parse(c.document);
  m["config_fingerprint"] = hex_digest(c.document);
  m["suite_fingerprint"] = suite_fingerprint(c.suite, c.dtype);
  m["versions"] = versions();
  m["started"] = started;
  m["wall_seconds"] = seconds;
  m["status"] = status;
  m["records"] = records;
  if (!error.empty()) {
    m["error"] = error;
  }
  fs::create_directories(c.out);
  io::write_file_atomic(c.out / ("manifest-" + command + ".json"), m.dump(2) + "\n");
}

std::vector<std::string> without(std::vector<std::string> ids, const std::string& id) {
  std::erase(ids, id);
  return ids;
}

template <typename T>
std::vector<RunRecord> run_experiment(const std::string& command, const LabConfig& c, std::ostream& out) {
  Lab<T> lab(c.suite, c.out, c.effective_workers());
  std::vector<RunRecord> records;
  auto add = [&](std::vector<RunRecord> more) { records.insert(records.end(), more.begin(), more.end()); };
  if (command == "pretrain") {
    const auto& pre = lab.pretrained();
    out << "pretrain: mlm accuracy " << pre.mlm_accuracy << " after " << c.suite.pretrain.steps << " steps\n";
  } else if (command == "imp") {
    add(imp_runs(lab, c.imp.task, c.imp.target, c.seeds, c.imp.variants, c.imp.rewind_fractions));
  } else if (command == "standard-prune") {
    add(standard_prune(lab, c.standard_prune.task, c.standard_prune.target, c.seeds));
  } else if (command == "claims") {
    ClaimsSpec spec{c.claims.tasks, c.claims.sparsities, c.seeds, c.claims.variants, c.claims.scheme};
    add(claim_suite(lab, spec));
    if (c.claims.universality) {
      const auto targets = without(c.claims.tasks, c.claims.mlm_task);
      if (!targets.empty()) {
        add(universality_check(lab, c.claims.mlm_task, targets, c.seeds, c.criterion));
      }
    }
  } else if (command == "rewind-sweep") {
    add(rewind_sweep(lab, c.rewind_sweep.task, c.rewind_sweep.sparsity, c.rewind_sweep.fractions, c.seeds));
  } else if (command == "transfer") {
    TransferSpec spec{c.transfer.sources, c.transfer.targets, c.transfer.sparsity, c.seeds, c.transfer.direct_row};
    add(transfer_matrix(lab, spec));
    if (c.transfer.rewound_source) {
      add(rewound_source_transfer(lab, c.transfer.rewound_source->task, c.transfer.rewound_source->fractions,
                                  c.transfer.targets, c.transfer.sparsity, c.seeds));
    }
    if (c.transfer.overlap) {
      add(overlap_experiment(lab, c.transfer.sources, c.transfer.sparsity, c.seeds));
    }
  } else if (command == "overlap") {
    add(overlap_experiment(lab, c.overlap.tasks, c.overlap.sparsity, c.seeds));
  } else if (command == "multitask") {
    add(multitask_transfer(lab, MultitaskSpec{c.multitask.tasks, c.multitask.targets, c.multitask.sparsity, c.seeds}));
  } else if (command == "datasize") {
    add(dataset_size_study(
        lab, DataSizeSpec{c.datasize.source, c.datasize.sizes, c.datasize.targets, c.datasize.sparsity, c.seeds}));
  } else {
    throw ArgumentError("unknown command '" + command + "'");
  }
  if (!records.empty()) {
    out << command << ": " << records.size() << " records in " << lab.log().path().string() << "\n";
  }
  return records;
}

std::size_t gen_data(const LabConfig& c, std::ostream& out) {
  const HmmFamily family = build_family(c.suite.generator);
  const fs::path dir = c.out / "data";
  fs::create_directories(dir);
  std::vector<TaskSpec> specs = {c.suite.pretrain_task};
  specs.insert(specs.end(), c.suite.tasks.begin(), c.suite.tasks.end());
  for (const auto& spec : specs) {
    const Task task = make_task(family, spec);
    save_dataset(dir / (spec.id + ".tsv"), task);
    out << "gen-data: " << (dir / (spec.id + ".tsv")).string() << " (" << task.train.size() << " train, "
        << task.eval.size() << " eval)\n";
  }
  return specs.size();
}

std::size_t report(const LabConfig& c, bool trace, std::ostream& out) {
  const fs::path log = c.out / "records.jsonl";
  if (!fs::exists(log)) {
    throw StateError("no records at " + log.string());
  }
  const auto records = read_records(log);
  check_records(records, suite_fingerprint(c.suite, c.dtype));
  check_mask_provenance(records, c.out);

  ReportOptions options;
  options.criterion = c.report.criterion.value_or(c.criterion);
  options.sparsity = c.report.sparsity;
  const bool explicit_kinds = !c.report.kinds.empty();
  std::vector<std::string> kinds = c.report.kinds;
  if (!explicit_kinds) {
    for (auto k : {ReportKind::table2, ReportKind::table3, ReportKind::table4, ReportKind::fig1, ReportKind::fig2,
                   ReportKind::fig3, ReportKind::fig4, ReportKind::overlap_heatmap, ReportKind::datasize}) {
      kinds.push_back(to_string(k));
    }
  }
  const fs::path dir = c.out / "reports";
  fs::create_directories(dir);
  std::size_t written = 0;
  for (const auto& name : kinds) {
    Report r;
    try {
      r = build_report(parse_report_kind(name), records, options);
    } catch (const StateError& e) {
      if (explicit_kinds) {
        throw;
      }
      out << "report " << name << ": skipped (" << e.what() << ")\n";
      continue;
    }
    for (const auto& fmt : c.report.formats) {
      const ReportFormat f = parse_report_format(fmt);
      std::string text;
      std::string ext = fmt;
      if (f == ReportFormat::csv) {
        text = to_csv(r, trace);
      } else if (f == ReportFormat::svg) {
        text = to_svg(r);
      } else {
        text = to_text(r);
        ext = "txt";
      }
      io::write_file_atomic(dir / (name + "." + ext), text);
      ++written;
    }
    out << "report " << name << ": " << r.rows.size() << "x" << r.cols.size() << " -> "
        << (dir / name).string() << ".*\n";
    if (trace) {
      for (const auto& cell : r.cells) {
        out << "  " << name << " [" << cell.row << ", " << cell.col << "]:";
        for (const auto& id : cell.ids) {
          out << " " << id;
        }
        out << "\n";
      }
    }
  }
  return written;
}

std::string tensor_shape(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += (i ? "x" : "") + std::to_string(shape[i]);
  }
  return s + "]";
}

void inspect(const fs::path& path, std::ostream& out) {
  if (!fs::is_regular_file(path)) {
    throw ArgumentError("no artifact at " + path.string());
  }
  const std::string bytes = io::read_file(path);
  const std::string magic = bytes.substr(0, 4);
  if (magic == "LTCK") {
    const CheckpointInfo info = inspect_checkpoint(bytes);
    out << "checkpoint: " << path.filename().string() << "\n"
        << "version: " << info.version << "\n"
        << "fingerprint: " << to_hex(info.fingerprint) << "\n"
        << "step: " << info.step << "\n"
        << "tensors: " << info.tensors.size() << "\n";
    for (const auto& t : info.tensors) {
      out << "  " << t.name << " " << tensor_shape(t.shape) << " " << to_string(t.dtype) << "\n";
    }
    for (const auto& label : info.rng_labels) {
      out << "rng: " << label << "\n";
    }
  } else if (magic == "LTMK") {
    const Mask m = decode_mask(bytes);
    char sp[32];
    std::snprintf(sp, sizeof sp, "%.6f", m.sparsity());
    out << "mask: " << path.filename().string() << "\n"
        << "name: " << path.stem().string() << "\n"
        << "method: " << m.meta.method << "\n"
        << "producer: " << m.meta.producer << "\n"
        << "source_task: " << m.meta.source_task << "\n"
        << "spec_hash: " << m.meta.spec_hash << "\n"
        << "round: " << m.meta.round << "\n"
        << "sparsity: " << sp << "\n"
        << "entries: " << m.total() << "\n"
        << "pruned: " << m.zeros() << "\n";
    for (const auto& [name, bits] : m.tensors()) {
      std::size_t ones = 0;
      for (auto b : bits) {
        ones += b;
      }
      out << "  " << name << " " << bits.size() << " kept " << ones << "\n";
    }
  } else if (path.extension() == ".jsonl") {
    const auto records = read_records(path);
    std::map<std::string, std::size_t> by_experiment;
    for (const auto& r : records) {
      ++by_experiment[r.experiment];
    }
    out << "records: " << records.size() << "\n";
    for (const auto& [e, n] : by_experiment) {
      out << "  " << e << " " << n << "\n";
    }
  } else {
    throw LoadError("unrecognized artifact " + path.string(), 0);
  }
}

const std::vector<std::string> kExperimentCommands = {"pretrain", "imp",       "standard-prune", "claims",
                                                      "rewind-sweep", "transfer", "overlap", "multitask",
                                                      "datasize"};

int dispatch(const std::string& command, const Globals& g, std::ostream& out) {
  if (command == "inspect") {
    inspect(g.inspect_path, out);
    return kExitOk;
  }
  LabConfig c = resolve(g);
  if (command == "validate") {
    out << (g.config.empty() ? std::string("(defaults)") : g.config) << ": ok (suite " << c.suite_name
        << ", fingerprint " << suite_fingerprint(c.suite, c.dtype).substr(0, 12) << ")\n";
    return kExitOk;
  }
  std::string effective = command;
  if (command == "run") {
    if (!c.experiment) {
      throw SchemaError("/experiment", "required by the run command");
    }
    effective = *c.experiment;
  }

  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  std::size_t count = 0;
  try {
    if (effective == "gen-data") {
      count = gen_data(c, out);
    } else if (effective == "report") {
      count = report(c, g.trace, out);
    } else if (c.dtype == Dtype::f64) {
      count = run_experiment<double>(effective, c, out).size();
    } else {
      count = run_experiment<float>(effective, c, out).size();
    }
  } catch (const std::exception& e) {
    write_manifest(c, effective, started, seconds(), "failed", e.what(), count);
    throw;
  }
  write_manifest(c, effective, started, seconds(), "ok", "", count);
  return kExitOk;
}

}  // namespace

int exit_status(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) {
    return kExitConfig;
  }
  if (dynamic_cast<const PartialFailure*>(&e)) {
    return kExitPartial;
  }
  if (dynamic_cast<const LoadError*>(&e) || dynamic_cast<const StaleRecordError*>(&e)) {
    return kExitCorrupt;
  }
  return kExitFailure;
}

int run_ltlab(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lottery-ticket lab: IMP, baselines, transfer and reports on a synthetic suite", "ltlab"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config (configs/*.json)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "master seed: generator and pre-training init");
  app.add_option("--workers", g.workers, "worker threads (default: hardware threads)");
  app.add_option("--dtype", g.dtype, "floating-point width")->check(CLI::IsMember({"f32", "f64"}));
  app.add_flag("--trace", g.trace, "print the record ids behind every report cell");
  app.add_option("--set", g.sets, "override a config key: dotted.path=value")->take_all();

  app.add_subcommand("gen-data", "write the suite's datasets under out/data");
  for (const auto& name : kExperimentCommands) {
    app.add_subcommand(name, "run the " + name + " stage");
  }
  app.add_subcommand("report", "rebuild reports from out/records.jsonl");
  app.add_subcommand("run", "run the config's experiment");
  app.add_subcommand("validate", "check a config against the schema");
  auto* insp = app.add_subcommand("inspect", "print the header of a checkpoint, mask or record log");
  insp->add_option("path", g.inspect_path, "artifact")->required();

  std::vector<const char*> argv = {"ltlab"};
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, g, out);
  } catch (const std::exception& e) {
    err << "ltlab " << command << ": " << e.what() << "\n";
    return exit_status(e);
  }
}

}  // namespace lottery
