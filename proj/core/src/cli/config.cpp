#include "lottery/cli/config.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "json.hpp"
#include "lottery/errors.hpp"
#include "lottery/io/binary.hpp"

namespace lottery {

namespace {

#include "ltlab_schema.inc"

using nlohmann::json;

std::string child(const std::string& path, const std::string& key) {
  // JSON pointer escaping of '~' and '/'
  std::string escaped;
  for (char c : key) {
    if (c == '~') {
      escaped += "~0";
    } else if (c == '/') {
      escaped += "~1";
    } else {
      escaped += c;
    }
  }
  return path + "/" + escaped;
}

std::string shown(const std::string& path) { return path.empty() ? "/" : path; }

class SchemaValidator {
 public:
  explicit SchemaValidator(const json& root) : root_(root) {}

  void check(const json& value, const json& schema, const std::string& path) const {
    const json& s = resolve(schema);
    if (s.contains("type") && !type_matches(value, s["type"])) {
      fail(path, "expected " + s["type"].dump() + ", got " + type_name(value));
    }
    if (s.contains("enum")) {
      const auto& options = s["enum"];
      if (std::find(options.begin(), options.end(), value) == options.end()) {
        fail(path, "value " + value.dump() + " is not one of " + options.dump());
      }
    }
    if (value.is_number()) {
      check_bounds(value.get<double>(), s, path);
    }
    if (value.is_string() && s.contains("minLength") &&
        value.get_ref<const std::string&>().size() < s["minLength"].get<std::size_t>()) {
      fail(path, "string shorter than " + s["minLength"].dump());
    }
    if (value.is_array()) {
      check_array(value, s, path);
    }
    if (value.is_object()) {
      check_object(value, s, path);
    }
  }

 private:
  const json& resolve(const json& schema) const {
    const json* s = &schema;
    for (int depth = 0; s->is_object() && s->contains("$ref"); ++depth) {
      const auto& ref = (*s)["$ref"].get_ref<const std::string&>();
      if (depth > 16 || ref.rfind("#/", 0) != 0) {
        throw ConfigError("unsupported schema reference " + ref);
      }
      s = &root_.at(json::json_pointer(ref.substr(1)));
    }
    return *s;
  }

  static std::string type_name(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
  }

  static bool type_is(const json& v, const std::string& type) {
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    return type_name(v) == type;
  }

  static bool type_matches(const json& v, const json& type) {
    if (type.is_string()) {
      return type_is(v, type.get<std::string>());
    }
    return std::any_of(type.begin(), type.end(), [&](const json& t) { return type_is(v, t.get<std::string>()); });
  }

  static void check_bounds(double x, const json& s, const std::string& path) {
    if (s.contains("minimum") && x < s["minimum"].get<double>()) {
      fail(path, "value below minimum " + s["minimum"].dump());
    }
    if (s.contains("maximum") && x > s["maximum"].get<double>()) {
      fail(path, "value above maximum " + s["maximum"].dump());
    }
    if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>()) {
      fail(path, "value must exceed " + s["exclusiveMinimum"].dump());
    }
    if (s.contains("exclusiveMaximum") && x >= s["exclusiveMaximum"].get<double>()) {
      fail(path, "value must be below " + s["exclusiveMaximum"].dump());
    }
  }

  void check_array(const json& value, const json& s, const std::string& path) const {
    if (s.contains("minItems") && value.size() < s["minItems"].get<std::size_t>()) {
      fail(path, "expected at least " + s["minItems"].dump() + " items");
    }
    if (s.value("uniqueItems", false)) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          if (value[i] == value[j]) {
            fail(child(path, std::to_string(i)), "duplicate item " + value[i].dump());
          }
        }
      }
    }
    if (s.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        check(value[i], s["items"], child(path, std::to_string(i)));
      }
    }
  }

  void check_object(const json& value, const json& s, const std::string& path) const {
    if (s.contains("required")) {
      for (const auto& key : s["required"]) {
        if (!value.contains(key.get<std::string>())) {
          fail(child(path, key.get<std::string>()), "required key missing");
        }
      }
    }
    const json empty = json::object();
    const json& props = s.contains("properties") ? s["properties"] : empty;
    const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
    for (const auto& [key, item] : value.items()) {
      if (props.contains(key)) {
        check(item, props[key], child(path, key));
      } else if (closed) {
        fail(child(path, key), "unknown key");
      }
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& message) {
    throw SchemaError(shown(path), message);
  }

  const json& root_;
};

template <typename Out>
void take(const json& obj, const char* key, Out& out) {
  if (obj.contains(key)) {
    out = obj[key].get<Out>();
  }
}

void apply_model(const json& j, ModelConfig& m) {
  take(j, "num_blocks", m.num_blocks);
  take(j, "hidden", m.hidden);
  take(j, "heads", m.heads);
  take(j, "ffn", m.ffn);
  take(j, "vocab", m.vocab);
  take(j, "max_seq_len", m.max_seq_len);
  take(j, "norm_eps", m.norm_eps);
}

void apply_generator(const json& j, GeneratorSpec& g) {
  take(j, "states", g.states);
  take(j, "vocab", g.vocab);
  take(j, "chains", g.chains);
  take(j, "shared_emissions", g.shared_emissions);
  take(j, "min_length", g.min_length);
  take(j, "max_length", g.max_length);
  take(j, "transition_concentration", g.transition_concentration);
  take(j, "emission_concentration", g.emission_concentration);
  take(j, "self_transition", g.self_transition);
  take(j, "seed", g.seed);
}

void apply_train(const json& j, TrainConfig& t) {
  take(j, "lr", t.lr);
  take(j, "steps", t.steps);
  take(j, "batch_size", t.batch_size);
  take(j, "weight_decay", t.weight_decay);
  take(j, "beta1", t.beta1);
  take(j, "beta2", t.beta2);
  take(j, "eps", t.eps);
  take(j, "eval_interval", t.eval_interval);
  take(j, "reset_optimizer_on_rewind", t.reset_optimizer_on_rewind);
}

void apply_task(const json& j, TaskSpec& t) {
  take(j, "id", t.id);
  if (j.contains("rule")) {
    t.rule = parse_rule(j["rule"].get<std::string>());
  }
  take(j, "train_size", t.train_size);
  take(j, "eval_size", t.eval_size);
  take(j, "max_seq_len", t.max_seq_len);
  if (j.contains("metric")) {
    t.metric = parse_metric(j["metric"].get<std::string>());
  }
  take(j, "designated_state", t.designated_state);
  take(j, "mask_rate", t.mask_rate);
  take(j, "seed", t.seed);
}

class TaskCheck {
 public:
  explicit TaskCheck(const SuiteConfig& suite) {
    for (const auto& id : suite.task_ids()) {
      ids_.insert(id);
    }
  }
  void one(const std::string& id, const std::string& path) const {
    if (ids_.count(id) == 0) {
      throw SchemaError(path, "unknown task '" + id + "'");
    }
  }
  void list(const std::vector<std::string>& ids, const std::string& path) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      one(ids[i], path + "/" + std::to_string(i));
    }
  }

 private:
  std::set<std::string> ids_;
};

std::vector<std::string> or_all(std::vector<std::string> ids, const SuiteConfig& suite) {
  return ids.empty() ? suite.task_ids() : ids;
}

}  // namespace

const std::string& config_schema_text() {
  static const std::string text = kSchemaText;
  return text;
}

void validate_json(const std::string& document, const std::string& schema) {
  const json root = json::parse(schema);
  json value;
  try {
    value = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("invalid JSON: ") + e.what());
  }
  SchemaValidator(root).check(value, root, "");
}

std::size_t LabConfig::effective_workers() const {
  if (workers > 0) {
    return workers;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string apply_overrides(const std::string& document, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("invalid JSON: ") + e.what());
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ArgumentError("override '" + item + "' is not of the form path=value");
    }
    const std::string path = item.substr(0, eq);
    json value = json::parse(item.substr(eq + 1), nullptr, false);
    if (value.is_discarded()) {
      value = item.substr(eq + 1);
    }
    std::vector<std::string> segments;
    for (std::size_t start = 0;;) {
      const auto dot = path.find('.', start);
      segments.push_back(path.substr(start, dot - start));
      if (dot == std::string::npos) {
        break;
      }
      start = dot + 1;
    }
    json* node = &doc;
    for (const auto& seg : segments) {
      if (seg.empty()) {
        throw ArgumentError("override '" + item + "' has an empty path segment");
      }
      if (node->is_array()) {
        const bool numeric = std::all_of(seg.begin(), seg.end(), [](char c) { return c >= '0' && c <= '9'; });
        const std::size_t index = numeric ? std::stoul(seg) : node->size();
        if (index >= node->size()) {
          throw ArgumentError("override '" + item + "': no element " + seg);
        }
        node = &(*node)[index];
      } else {
        if (!node->is_object() && !node->is_null()) {
          throw ArgumentError("override '" + item + "': '" + seg + "' is inside a scalar");
        }
        node = &(*node)[seg];
      }
    }
    *node = std::move(value);
  }
  return doc.dump(2);
}

LabConfig parse_config(const std::string& document) {
  validate_json(document, config_schema_text());
  const json j = json::parse(document);

  LabConfig c;
  c.document = j.dump(2);
  if (j.contains("experiment")) {
    c.experiment = j["experiment"].get<std::string>();
  }
  take(j, "suite", c.suite_name);
  c.suite = c.suite_name == "ci" ? ci_suite() : toy_suite();
  c.out = j.value("out", c.suite_name == "ci" ? std::string("runs/ci") : std::string("runs/toy"));
  if (j.contains("dtype")) {
    c.dtype = parse_dtype(j["dtype"].get<std::string>());
  }
  take(j, "workers", c.workers);
  take(j, "seeds", c.seeds);
  if (j.contains("criterion")) {
    c.criterion = parse_criterion(j["criterion"].get<std::string>());
  }

  SuiteConfig& s = c.suite;
  if (j.contains("seed")) {
    s.generator.seed = j["seed"].get<std::uint64_t>();
    s.init_seed = s.generator.seed;
  }
  if (j.contains("model")) apply_model(j["model"], s.model);
  if (j.contains("generator")) apply_generator(j["generator"], s.generator);
  if (j.contains("pretrain")) apply_train(j["pretrain"], s.pretrain);
  if (j.contains("finetune")) apply_train(j["finetune"], s.finetune);
  if (j.contains("pretrain_task")) apply_task(j["pretrain_task"], s.pretrain_task);
  if (j.contains("tasks")) {
    s.tasks.clear();
    for (const auto& t : j["tasks"]) {
      TaskSpec spec;
      apply_task(t, spec);
      s.tasks.push_back(spec);
    }
  }
  s.validate();
  const TaskCheck known(s);

  if (j.contains("claims")) {
    const auto& k = j["claims"];
    take(k, "tasks", c.claims.tasks);
    take(k, "sparsities", c.claims.sparsities);
    take(k, "variants", c.claims.variants);
    if (k.contains("scheme")) {
      c.claims.scheme = k["scheme"] == "layerwise" ? RandomScheme::layerwise_matched : RandomScheme::global;
    }
    take(k, "universality", c.claims.universality);
    take(k, "mlm_task", c.claims.mlm_task);
  }
  c.claims.tasks = or_all(c.claims.tasks, s);
  known.list(c.claims.tasks, "/claims/tasks");
  if (c.claims.universality) {
    known.one(c.claims.mlm_task, "/claims/mlm_task");
  }

  if (j.contains("imp")) {
    const auto& k = j["imp"];
    take(k, "task", c.imp.task);
    take(k, "target", c.imp.target);
    take(k, "variants", c.imp.variants);
    take(k, "rewind_fractions", c.imp.rewind_fractions);
  }
  known.one(c.imp.task, "/imp/task");

  if (j.contains("standard_prune")) {
    take(j["standard_prune"], "task", c.standard_prune.task);
    take(j["standard_prune"], "target", c.standard_prune.target);
  }
  known.one(c.standard_prune.task, "/standard_prune/task");

  if (j.contains("rewind_sweep")) {
    const auto& k = j["rewind_sweep"];
    take(k, "task", c.rewind_sweep.task);
    take(k, "sparsity", c.rewind_sweep.sparsity);
    take(k, "fractions", c.rewind_sweep.fractions);
  }
  known.one(c.rewind_sweep.task, "/rewind_sweep/task");

  if (j.contains("transfer")) {
    const auto& k = j["transfer"];
    take(k, "sources", c.transfer.sources);
    take(k, "targets", c.transfer.targets);
    take(k, "sparsity", c.transfer.sparsity);
    take(k, "direct_row", c.transfer.direct_row);
    take(k, "overlap", c.transfer.overlap);
    if (k.contains("rewound_source")) {
      RewoundSourceSection r;
      take(k["rewound_source"], "task", r.task);
      take(k["rewound_source"], "fractions", r.fractions);
      known.one(r.task, "/transfer/rewound_source/task");
      c.transfer.rewound_source = r;
    }
  }
  c.transfer.sources = or_all(c.transfer.sources, s);
  c.transfer.targets = or_all(c.transfer.targets, s);
  known.list(c.transfer.sources, "/transfer/sources");
  known.list(c.transfer.targets, "/transfer/targets");

  if (j.contains("overlap")) {
    take(j["overlap"], "tasks", c.overlap.tasks);
    take(j["overlap"], "sparsity", c.overlap.sparsity);
  }
  c.overlap.tasks = or_all(c.overlap.tasks, s);
  known.list(c.overlap.tasks, "/overlap/tasks");

  if (j.contains("multitask")) {
    const auto& k = j["multitask"];
    take(k, "tasks", c.multitask.tasks);
    take(k, "targets", c.multitask.targets);
    take(k, "sparsity", c.multitask.sparsity);
  }
  c.multitask.tasks = or_all(c.multitask.tasks, s);
  c.multitask.targets = or_all(c.multitask.targets, s);
  known.list(c.multitask.tasks, "/multitask/tasks");
  known.list(c.multitask.targets, "/multitask/targets");

  if (j.contains("datasize")) {
    const auto& k = j["datasize"];
    take(k, "source", c.datasize.source);
    take(k, "sizes", c.datasize.sizes);
    take(k, "targets", c.datasize.targets);
    take(k, "sparsity", c.datasize.sparsity);
  }
  c.datasize.targets = or_all(c.datasize.targets, s);
  known.one(c.datasize.source, "/datasize/source");
  known.list(c.datasize.targets, "/datasize/targets");

  if (j.contains("report")) {
    const auto& k = j["report"];
    take(k, "kinds", c.report.kinds);
    take(k, "formats", c.report.formats);
    if (k.contains("sparsity")) {
      c.report.sparsity = k["sparsity"].get<double>();
    }
    if (k.contains("criterion")) {
      c.report.criterion = parse_criterion(k["criterion"].get<std::string>());
    }
  }
  return c;
}

LabConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("config file " + path.string() + " not found");
  }
  return parse_config(apply_overrides(io::read_file(path), overrides));
}

}  // namespace lottery
