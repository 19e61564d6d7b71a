#include "dfr/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "dfr/analysis.hpp"
#include "dfr/embedding_io.hpp"
#include "dfr/mlp.hpp"
#include "dfr/pipeline.hpp"
#include "dfr/synth.hpp"
#include "dfr/verification.hpp"

namespace dfr::cmd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config error at " + path + ": " + what);
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& path) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) config_error(path + "/" + it.key(), "unknown key");
  }
}

const json* find(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double require_num(const json& j, const std::string& key, const std::string& path) {
  const json* v = find(j, key);
  if (!v) config_error(path + "/" + key, "missing required key");
  if (!v->is_number()) config_error(path + "/" + key, "expected a number");
  return v->get<double>();
}

double optional_num(const json& j, const std::string& key, double fallback,
                    const std::string& path) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number()) config_error(path + "/" + key, "expected a number");
  return v->get<double>();
}

long optional_int(const json& j, const std::string& key, long fallback,
                  const std::string& path) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) config_error(path + "/" + key, "expected an integer");
  return v->get<long>();
}

long require_int(const json& j, const std::string& key, const std::string& path) {
  const json* v = find(j, key);
  if (!v) config_error(path + "/" + key, "missing required key");
  if (!v->is_number_integer()) config_error(path + "/" + key, "expected an integer");
  return v->get<long>();
}

std::string require_str(const json& j, const std::string& key,
                        const std::string& path) {
  const json* v = find(j, key);
  if (!v) config_error(path + "/" + key, "missing required key");
  if (!v->is_string()) config_error(path + "/" + key, "expected a string");
  return v->get<std::string>();
}

std::string optional_str(const json& j, const std::string& key,
                         const std::string& fallback, const std::string& path) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_string()) config_error(path + "/" + key, "expected a string");
  return v->get<std::string>();
}

std::vector<double> optional_num_array(const json& j, const std::string& key,
                                       std::vector<double> fallback,
                                       const std::string& path) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_array()) config_error(path + "/" + key, "expected an array");
  std::vector<double> out;
  for (size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number())
      config_error(path + "/" + key + "[" + std::to_string(i) + "]",
                   "expected a number");
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

uint64_t master_seed(const json& j, const std::string& path) {
  // DFR_SEED is the one environment override (CI convenience).
  if (const char* env = std::getenv("DFR_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::invalid_argument("DFR_SEED must be an unsigned integer");
    return static_cast<uint64_t>(v);
  }
  return static_cast<uint64_t>(optional_int(j, "seed", 0, path));
}

SpuriousSpec parse_spurious_spec(const json& j, const std::string& path) {
  reject_unknown_keys(j, {"n_classes", "n_attributes", "d_core", "d_spurious",
                          "core_margin", "spurious_margin", "core_noise_sigma",
                          "spurious_noise_sigma", "p_corr", "n_train", "n_val",
                          "n_test", "core_structure", "class_priors"},
                      path);
  SpuriousSpec s;
  s.n_classes = static_cast<int>(optional_int(j, "n_classes", 2, path));
  s.n_attributes = static_cast<int>(optional_int(j, "n_attributes", 0, path));
  s.d_core = static_cast<int>(require_int(j, "d_core", path));
  s.d_spurious = static_cast<int>(require_int(j, "d_spurious", path));
  s.core_margin = optional_num(j, "core_margin", 1.0, path);
  s.spurious_margin = optional_num(j, "spurious_margin", 1.0, path);
  s.core_noise_sigma = require_num(j, "core_noise_sigma", path);
  s.spurious_noise_sigma = require_num(j, "spurious_noise_sigma", path);
  s.p_corr = require_num(j, "p_corr", path);
  s.n_train = require_int(j, "n_train", path);
  s.n_val = require_int(j, "n_val", path);
  s.n_test = require_int(j, "n_test", path);
  const std::string structure =
      optional_str(j, "core_structure", "gaussian", path);
  if (structure == "gaussian")
    s.core = CoreStructure::gaussian;
  else if (structure == "xor")
    s.core = CoreStructure::xor_sign;
  else
    config_error(path + "/core_structure", "expected 'gaussian' or 'xor'");
  s.class_priors = optional_num_array(j, "class_priors", {}, path);
  return s;
}

TrainConfig parse_train_config(const json& j, const std::string& path) {
  reject_unknown_keys(j, {"hidden", "epochs", "batch_size", "learning_rate",
                          "weight_decay", "schedule", "seed"},
                      path);
  TrainConfig c;
  if (const json* v = find(j, "hidden")) {
    if (!v->is_array()) config_error(path + "/hidden", "expected an array");
    c.hidden.clear();
    for (const auto& h : *v) {
      if (!h.is_number_integer()) config_error(path + "/hidden", "expected integers");
      c.hidden.push_back(h.get<int>());
    }
  }
  c.epochs = static_cast<int>(optional_int(j, "epochs", c.epochs, path));
  c.batch_size = static_cast<int>(optional_int(j, "batch_size", c.batch_size, path));
  c.learning_rate = optional_num(j, "learning_rate", c.learning_rate, path);
  c.weight_decay = optional_num(j, "weight_decay", c.weight_decay, path);
  const std::string sched = optional_str(j, "schedule", "cosine", path);
  if (sched == "cosine")
    c.schedule = LrSchedule::cosine;
  else if (sched == "constant")
    c.schedule = LrSchedule::constant;
  else
    config_error(path + "/schedule", "expected 'cosine' or 'constant'");
  c.seed = static_cast<uint64_t>(optional_int(j, "seed", 0, path));
  return c;
}

DfrConfig parse_dfr_config(const json& j, const std::string& path) {
  reject_unknown_keys(j, {"variant", "n_retrains", "c_grid", "class_weight_grid",
                          "tuning_split_fraction", "penalty", "seed",
                          "solver_max_iters", "solver_tolerance"},
                      path);
  DfrConfig c;
  c.variant = variant_from_name(optional_str(j, "variant", "val_tr", path));
  c.n_retrains = static_cast<int>(optional_int(j, "n_retrains", c.n_retrains, path));
  c.c_grid = optional_num_array(j, "c_grid", c.c_grid, path);
  c.class_weight_grid =
      optional_num_array(j, "class_weight_grid", c.class_weight_grid, path);
  c.tuning_split_fraction =
      optional_num(j, "tuning_split_fraction", c.tuning_split_fraction, path);
  c.penalty = penalty_from_name(optional_str(j, "penalty", "l1", path));
  c.seed = static_cast<uint64_t>(optional_int(j, "seed", 0, path));
  c.solver_max_iters =
      static_cast<int>(optional_int(j, "solver_max_iters", c.solver_max_iters, path));
  c.solver_tolerance =
      optional_num(j, "solver_tolerance", c.solver_tolerance, path);
  return c;
}

fs::path prepare_out_dir(const json& j, const std::string& path) {
  const std::string out = require_str(j, "out_dir", path);
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error(p.string() + ": cannot open for writing");
  os << text;
  if (!os) throw std::runtime_error(p.string() + ": write failed");
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Manifest: config, input/output content hashes, seeds and version. The
// timestamp lives here and only here; all other artifacts are byte-stable.
json write_manifest(const fs::path& out_dir, const std::string& command,
                    const json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["tool_version"] = kToolVersion;
  m["created_utc"] = utc_now();
  m["inputs"] = json::object();
  for (const auto& p : inputs) m["inputs"][p] = file_hash_hex(p);
  m["outputs"] = json::object();
  for (const auto& name : outputs)
    m["outputs"][name] = file_hash_hex((out_dir / name).string());
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

GroupSchema schema_from_counts(const EmbeddingDataset& ds,
                               const std::vector<double>& override_counts) {
  if (!override_counts.empty() &&
      override_counts.size() != static_cast<size_t>(ds.n_groups))
    throw std::invalid_argument("train_counts length must equal the number of groups");
  GroupSchema schema;
  schema.n_classes = ds.n_classes;
  schema.n_groups = ds.n_groups;
  const auto counts = ds.group_counts();
  // Each group maps to one class; recover it from the data where possible.
  std::vector<int> group_class(static_cast<size_t>(ds.n_groups), 0);
  for (size_t i = 0; i < ds.groups.size(); ++i)
    group_class[static_cast<size_t>(ds.groups[i])] = ds.labels[i];
  schema.entries.resize(static_cast<size_t>(ds.n_groups));
  for (int g = 0; g < ds.n_groups; ++g) {
    long c = counts[static_cast<size_t>(g)];
    if (!override_counts.empty())
      c = static_cast<long>(override_counts[static_cast<size_t>(g)]);
    schema.entries[static_cast<size_t>(g)] = {g, group_class[static_cast<size_t>(g)],
                                              g, c};
  }
  return schema;
}

json schema_to_json(const GroupSchema& schema) {
  json out = json::array();
  for (const auto& e : schema.entries)
    out.push_back({{"group", e.group_id},
                   {"class", e.class_label},
                   {"attribute", e.attribute},
                   {"train_count", e.train_count}});
  return out;
}

EmbeddingFormat parse_format(const json& j, const std::string& path) {
  const std::string f = optional_str(j, "format", "binary", path);
  if (f == "binary") return EmbeddingFormat::binary;
  if (f == "csv") return EmbeddingFormat::csv;
  config_error(path + "/format", "expected 'binary' or 'csv'");
}

}  // namespace

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open for hashing");
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string bytes = ss.str();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

json cmd_generate(json config) {
  reject_unknown_keys(config, {"synth", "seed", "out_dir", "format"}, "");
  const json* synth = find(config, "synth");
  if (!synth) config_error("/synth", "missing required key");
  const SpuriousSpec spec = parse_spurious_spec(*synth, "/synth");
  const uint64_t seed = master_seed(config, "");
  const auto out_dir = prepare_out_dir(config, "");
  const auto format = parse_format(config, "");
  const std::string ext = format == EmbeddingFormat::csv ? ".csv" : ".dfre";

  const auto bundle = generate(spec, seed);
  std::vector<std::string> outputs;
  const std::pair<const char*, const RawDataset*> parts[] = {
      {"train", &bundle.train}, {"val", &bundle.val}, {"test", &bundle.test}};
  for (const auto& [name, part] : parts) {
    const std::string fname = std::string(name) + ext;
    save_embeddings(part->as_embeddings(), (out_dir / fname).string(), format);
    outputs.push_back(fname);
  }
  json meta;
  meta["d_core"] = spec.d_core;
  meta["d_spurious"] = spec.d_spurious;
  meta["n_classes"] = spec.n_classes;
  meta["n_attributes"] = spec.attributes();
  meta["schema"] = schema_to_json(bundle.schema);
  write_text(out_dir / "meta.json", meta.dump(2) + "\n");
  outputs.push_back("meta.json");

  const json manifest = write_manifest(out_dir, "generate", config, {}, outputs);
  json summary;
  summary["out_dir"] = out_dir.string();
  summary["n_train"] = bundle.train.n();
  summary["n_val"] = bundle.val.n();
  summary["n_test"] = bundle.test.n();
  summary["outputs"] = manifest["outputs"];
  return summary;
}

json cmd_train_erm(json config) {
  reject_unknown_keys(config, {"data", "train", "seed", "out_dir"}, "");
  const std::string data_path = require_str(config, "data", "");
  TrainConfig train_cfg =
      find(config, "train") ? parse_train_config(*find(config, "train"), "/train")
                            : TrainConfig{};
  if (std::getenv("DFR_SEED") || find(config, "seed"))
    train_cfg.seed = master_seed(config, "");
  const auto out_dir = prepare_out_dir(config, "");

  const auto data = load_embeddings(data_path, format_from_path(data_path));
  const auto result =
      train_erm(data.features, data.labels, data.n_classes, train_cfg);
  save_model(result.model, (out_dir / "model.dfrm").string());

  json log;
  log["epoch_loss"] = result.epoch_loss;
  log["final_loss"] = result.final_loss;
  log["layer_sizes"] = result.model.layer_sizes();
  write_text(out_dir / "train_log.json", log.dump(2) + "\n");

  const json manifest = write_manifest(out_dir, "train-erm", config, {data_path},
                                       {"model.dfrm", "train_log.json"});
  json summary;
  summary["out_dir"] = out_dir.string();
  summary["final_loss"] = result.final_loss;
  summary["outputs"] = manifest["outputs"];
  return summary;
}

json cmd_extract(json config) {
  reject_unknown_keys(config, {"model", "inputs", "out_dir", "format"}, "");
  const std::string model_path = require_str(config, "model", "");
  const json* inputs = find(config, "inputs");
  if (!inputs || !inputs->is_object() || inputs->empty())
    config_error("/inputs", "expected a non-empty object of name -> path");
  const auto out_dir = prepare_out_dir(config, "");
  const auto format = parse_format(config, "");
  const std::string ext = format == EmbeddingFormat::csv ? ".csv" : ".dfre";

  const MlpModel model = load_model(model_path);
  std::vector<std::string> in_paths{model_path};
  std::vector<std::string> outputs;
  for (auto it = inputs->begin(); it != inputs->end(); ++it) {
    if (!it.value().is_string())
      config_error("/inputs/" + it.key(), "expected a string path");
    const std::string path = it.value().get<std::string>();
    const auto data = load_embeddings(path, format_from_path(path));
    const auto features = extract_features(model, data.features, data.labels,
                                           data.groups, data.n_classes, data.n_groups);
    const std::string fname = "features_" + it.key() + ext;
    save_embeddings(features, (out_dir / fname).string(), format);
    in_paths.push_back(path);
    outputs.push_back(fname);
  }
  const json manifest = write_manifest(out_dir, "extract", config, in_paths, outputs);
  json summary;
  summary["out_dir"] = out_dir.string();
  summary["outputs"] = manifest["outputs"];
  return summary;
}

json cmd_dfr(json config) {
  reject_unknown_keys(config,
                      {"train", "reweight", "test", "dfr", "train_counts",
                       "seed", "out_dir"},
                      "");
  const std::string train_path = require_str(config, "train", "");
  const std::string reweight_path = require_str(config, "reweight", "");
  const std::string test_path = require_str(config, "test", "");
  DfrConfig dfr_cfg =
      find(config, "dfr") ? parse_dfr_config(*find(config, "dfr"), "/dfr")
                          : DfrConfig{};
  if (std::getenv("DFR_SEED") || find(config, "seed"))
    dfr_cfg.seed = master_seed(config, "");
  const auto out_dir = prepare_out_dir(config, "");

  const auto train = load_embeddings(train_path, format_from_path(train_path));
  const auto reweight =
      load_embeddings(reweight_path, format_from_path(reweight_path));
  const auto test = load_embeddings(test_path, format_from_path(test_path));
  const auto counts = optional_num_array(config, "train_counts", {}, "");
  if (!counts.empty() && counts.size() != static_cast<size_t>(train.n_groups))
    config_error("/train_counts", "length must equal the number of groups");
  const GroupSchema schema = schema_from_counts(train, counts);

  const DfrResult result = run_dfr(train, reweight, test, schema, dfr_cfg);
  save_head(result.head, (out_dir / "head.dfrh").string());
  write_text(out_dir / "result.json", result.to_json() + "\n");

  const json manifest =
      write_manifest(out_dir, "dfr", config,
                     {train_path, reweight_path, test_path},
                     {"head.dfrh", "result.json"});
  json summary;
  summary["out_dir"] = out_dir.string();
  summary["chosen_c"] = result.chosen_c;
  summary["worst_group_accuracy"] = result.test_metrics.worst_group_accuracy;
  summary["outputs"] = manifest["outputs"];
  return summary;
}

json cmd_evaluate(json config) {
  reject_unknown_keys(config, {"head", "data", "train_counts", "out_dir"}, "");
  const std::string head_path = require_str(config, "head", "");
  const std::string data_path = require_str(config, "data", "");
  const auto out_dir = prepare_out_dir(config, "");

  const LinearHead head = load_head(head_path);
  const auto data = load_embeddings(data_path, format_from_path(data_path));
  const auto counts = optional_num_array(config, "train_counts", {}, "");
  if (!counts.empty() && counts.size() != static_cast<size_t>(data.n_groups))
    config_error("/train_counts", "length must equal the number of groups");
  const GroupSchema schema = schema_from_counts(data, counts);

  const auto preds = predict_labels(head, data.features);
  const GroupMetrics metrics = evaluate_groups(
      preds, data.labels, data.groups, data.n_groups, schema.train_counts());
  write_text(out_dir / "metrics.json", metrics.to_json() + "\n");

  const json manifest = write_manifest(out_dir, "evaluate", config,
                                       {head_path, data_path}, {"metrics.json"});
  json summary;
  summary["out_dir"] = out_dir.string();
  summary["worst_group_accuracy"] = metrics.worst_group_accuracy;
  summary["outputs"] = manifest["outputs"];
  return summary;
}

json cmd_sweep(json config) {
  reject_unknown_keys(config,
                      {"sweep", "synth", "erm", "dfr", "p_corr", "n_outer_seeds",
                       "n_seeds", "k_grid", "train", "reweight", "test",
                       "train_counts", "seed", "out_dir"},
                      "");
  const std::string kind = require_str(config, "sweep", "");
  const auto out_dir = prepare_out_dir(config, "");
  const uint64_t seed = master_seed(config, "");
  std::vector<std::string> in_paths;
  std::vector<std::string> outputs;
  json summary;
  summary["sweep"] = kind;

  if (kind == "pcorr") {
    ExperimentGrid grid;
    if (!find(config, "synth")) config_error("/synth", "missing required key");
    grid.spec = parse_spurious_spec(*find(config, "synth"), "/synth");
    if (find(config, "erm")) grid.erm = parse_train_config(*find(config, "erm"), "/erm");
    if (find(config, "dfr")) grid.dfr = parse_dfr_config(*find(config, "dfr"), "/dfr");
    grid.p_corr = optional_num_array(config, "p_corr", grid.p_corr, "");
    grid.n_outer_seeds =
        static_cast<int>(optional_int(config, "n_outer_seeds", 5, ""));
    grid.seed = seed;
    const PcorrReport report = pcorr_sweep(grid);
    write_text(out_dir / "pcorr_report.json", report.to_json() + "\n");
    write_text(out_dir / "pcorr_report.csv", report.to_csv());
    outputs = {"pcorr_report.json", "pcorr_report.csv"};
    summary["oracle_mean"] = report.oracle_mean;
  } else if (kind == "retrains") {
    const std::string train_path = require_str(config, "train", "");
    const std::string reweight_path = require_str(config, "reweight", "");
    const std::string test_path = require_str(config, "test", "");
    const auto train = load_embeddings(train_path, format_from_path(train_path));
    const auto reweight =
        load_embeddings(reweight_path, format_from_path(reweight_path));
    const auto test = load_embeddings(test_path, format_from_path(test_path));
    const auto counts = optional_num_array(config, "train_counts", {}, "");
    const GroupSchema schema = schema_from_counts(train, counts);
    DfrConfig dfr_cfg =
        find(config, "dfr") ? parse_dfr_config(*find(config, "dfr"), "/dfr")
                            : DfrConfig{};
    dfr_cfg.seed = seed;
    std::vector<int> k_grid{1, 3, 5, 10, 20};
    if (const json* kg = find(config, "k_grid")) {
      k_grid.clear();
      for (const auto& k : *kg) k_grid.push_back(k.get<int>());
    }
    const int n_outer =
        static_cast<int>(optional_int(config, "n_outer_seeds", 20, ""));
    const auto cells =
        ablation_retrains(train, reweight, test, schema, dfr_cfg, k_grid, n_outer);
    json rows = json::array();
    for (const auto& c : cells)
      rows.push_back({{"n_retrains", c.n_retrains},
                      {"mean_wga", c.mean_wga},
                      {"std_wga", c.std_wga},
                      {"wga", c.wga}});
    json report;
    report["cells"] = rows;
    write_text(out_dir / "retrains_report.json", report.dump(2) + "\n");
    in_paths = {train_path, reweight_path, test_path};
    outputs = {"retrains_report.json"};
  } else if (kind == "l1") {
    if (!find(config, "synth")) config_error("/synth", "missing required key");
    const SpuriousSpec spec = parse_spurious_spec(*find(config, "synth"), "/synth");
    DfrConfig dfr_cfg =
        find(config, "dfr") ? parse_dfr_config(*find(config, "dfr"), "/dfr")
                            : DfrConfig{};
    const int n_seeds = static_cast<int>(optional_int(config, "n_seeds", 20, ""));
    const auto rep = ablation_l1(spec, dfr_cfg, n_seeds, seed);
    json report;
    report["wga_l1"] = rep.wga_l1;
    report["wga_none"] = rep.wga_none;
    report["median_l1"] = rep.median_l1;
    report["median_none"] = rep.median_none;
    write_text(out_dir / "l1_report.json", report.dump(2) + "\n");
    outputs = {"l1_report.json"};
    summary["median_l1"] = rep.median_l1;
    summary["median_none"] = rep.median_none;
  } else {
    config_error("/sweep", "expected 'pcorr', 'retrains' or 'l1'");
  }

  const json manifest = write_manifest(out_dir, "sweep", config, in_paths, outputs);
  summary["out_dir"] = out_dir.string();
  summary["outputs"] = manifest["outputs"];
  return summary;
}

json cmd_verify(json config, std::ostream& log) {
  reject_unknown_keys(config, {"out_dir"}, "");
  const auto out_dir = prepare_out_dir(config, "");
  const auto results = run_verification(out_dir.string(), log);
  json rows = json::array();
  bool all_ok = true;
  for (const auto& r : results) {
    rows.push_back({{"name", r.name},
                    {"status", r.status},
                    {"hard", r.hard},
                    {"detail", r.detail},
                    {"seconds", r.seconds}});
    all_ok = all_ok && r.status != "FAIL";
  }
  json report;
  report["checks"] = rows;
  report["ok"] = all_ok;
  write_text(out_dir / "verification.json", report.dump(2) + "\n");
  return report;
}

json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open config");
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  return j;
}

int run_command(const std::string& name, const json& config, std::ostream& out,
                std::ostream& err) {
  try {
    json summary;
    if (name == "generate") summary = cmd_generate(config);
    else if (name == "train-erm") summary = cmd_train_erm(config);
    else if (name == "extract") summary = cmd_extract(config);
    else if (name == "dfr") summary = cmd_dfr(config);
    else if (name == "evaluate") summary = cmd_evaluate(config);
    else if (name == "sweep") summary = cmd_sweep(config);
    else if (name == "verify") {
      summary = cmd_verify(config, out);
      out << summary.dump(2) << "\n";
      return summary["ok"].get<bool>() ? 0 : 1;
    } else {
      throw std::invalid_argument("unknown command '" + name + "'");
    }
    out << summary.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    json error;
    error["error"] = {{"command", name}, {"message", e.what()}};
    err << error.dump() << "\n";
    return 1;
  }
}

}  // namespace dfr::cmd
