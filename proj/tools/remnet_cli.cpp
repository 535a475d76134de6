// Copyright 2026 The REMNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line front end for the whole pipeline.
//
// stdout carries the machine-readable result (JSON), stderr carries logs.
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "remnet/common.hpp"
#include "remnet/data/dataset.hpp"
#include "remnet/data/pca.hpp"
#include "remnet/data/synthetic.hpp"
#include "remnet/eval/evaluation.hpp"
#include "remnet/loc/trilateration.hpp"
#include "remnet/model/checkpoint.hpp"
#include "remnet/quant/int8_engine.hpp"
#include "remnet/quant/qat.hpp"
#include "remnet/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace remnet::cli {
namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;

// Raised for bad flag combinations detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string config;
};

struct DataArgs {
  std::string path;
  std::string split = "all";
  std::string part = "train";
};

// --- helpers ----------------------------------------------------------------

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& text, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw UsageError(detail::concat(what, ": '", item, "' is not a number"));
    }
  }
  return out;
}

// all | paper_default | stratified[:fraction] | environment:<name> | obstacle:<name>
std::optional<data::SplitPolicy> parse_split(const std::string& text, std::uint64_t seed) {
  if (text == "all") return std::nullopt;
  if (text == "paper_default") return data::SplitPolicy::paper_default();
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "stratified") return data::SplitPolicy::stratified(arg.empty() ? 0.8 : std::stod(arg), seed);
  if (head == "environment" && !arg.empty()) return data::SplitPolicy::by_environment(data::parse_environment(arg));
  if (head == "obstacle" && !arg.empty()) return data::SplitPolicy::by_obstacle(data::parse_obstacle(arg));
  throw UsageError("unknown --split '" + text + "' (all, paper_default, stratified[:f], environment:<name>, obstacle:<name>)");
}

std::vector<data::CirSample> load_samples(const std::string& path) {
  if (path.empty()) throw UsageError("--data is required");
  auto result = data::import_csv(fs::path(path));
  if (!result.errors.empty()) {
    std::cerr << result.report();
    raise<DataError>(path, ": ", result.errors.size(), " invalid rows (run `import` to clean the file)");
  }
  if (result.samples.empty()) raise<DataError>(path, ": no samples");
  return std::move(result.samples);
}

std::vector<data::CirSample> select(const DataArgs& args, std::uint64_t seed) {
  auto samples = load_samples(args.path);
  const auto policy = parse_split(args.split, seed);
  if (!policy) return samples;
  auto parts = data::split(samples, *policy);
  if (args.part == "train") return std::move(parts.train);
  if (args.part == "test") return std::move(parts.test);
  throw UsageError("--part must be train or test");
}

std::pair<data::DatasetSplit, std::string> train_test(const DataArgs& args, std::uint64_t seed) {
  auto samples = load_samples(args.path);
  const auto policy = parse_split(args.split == "all" ? "stratified" : args.split, seed);
  auto parts = data::split(samples, *policy);
  if (parts.train.empty() || parts.test.empty()) raise<DataError>("split '", args.split, "' leaves an empty part");
  return {std::move(parts), policy->describe()};
}

enum class ModelKind { float_checkpoint, quantized };

ModelKind sniff(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise<DataError>("cannot open model file ", path);
  char magic[4] = {};
  in.read(magic, 4);
  if (std::string(magic, 4) == "REMN") return ModelKind::float_checkpoint;
  if (std::string(magic, 4) == "REMQ") return ModelKind::quantized;
  raise<FormatError>(path, ": bad magic");
}

// Inference on a 157-sample window for either model kind.
struct LoadedModel {
  ModelKind kind = ModelKind::float_checkpoint;
  Checkpoint checkpoint;
  quant::QuantizedModel quantized;

  const RemnetConfig& config() const { return kind == ModelKind::quantized ? quantized.config : checkpoint.config; }
  std::size_t k() const { return std::min<std::size_t>(config().input_length, data::kWindowLength); }

  std::vector<double> fit_window(std::span<const double> cir) const {
    std::vector<double> x(config().input_length, 0.0);
    std::copy_n(cir.begin(), std::min(cir.size(), k()), x.begin());
    return x;
  }

  double predict(std::span<const double> cir) const {
    const auto x = fit_window(cir);
    if (kind == ModelKind::quantized) return quant::predict_int8(quantized, x);
    Rng unused;
    return forward(checkpoint.config, checkpoint.weights, x, Mode::infer, unused);
  }
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw UsageError("--model is required");
  LoadedModel m;
  m.kind = sniff(path);
  if (m.kind == ModelKind::quantized) {
    m.quantized = quant::load_quantized(path);
  } else {
    m.checkpoint = load_checkpoint(path);
  }
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise<DataError>("cannot write ", path);
  out << text;
}

template <typename F>
void write_stream(const std::string& path, F&& fn) {
  std::ostringstream os;
  fn(os);
  write_text(path, os.str());
}


// --- manifest -----------------------------------------------------------------

struct Run {
  CLI::App* sub = nullptr;
  CLI::App* app = nullptr;
  std::vector<std::string> argv;
  Globals globals;
};

json option_values(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name == "--help" || name == "-h" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

void write_manifest(const Run& run, const std::string& primary_output, const json& extra = json::object()) {
  json m;
  m["tool"] = "remnet";
  m["version"] = kVersion;
  m["compiler"] = __VERSION__;
  m["subcommand"] = run.sub->get_name();
  m["argv"] = run.argv;
  m["seed"] = run.globals.seed;
  m["threads"] = run.globals.threads;
  m["config_file"] = run.globals.config;
  m["options"] = option_values(run.sub);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text(primary_output + ".manifest.json", m.dump(2) + "\n");
}

// --- config file ----------------------------------------------------------------

// Flat key=value lines; '#' starts a comment. Keys are long option names
// without the dashes. Flags on the command line win over the file.
std::vector<std::string> apply_config(const std::vector<std::string>& argv, CLI::App& app) {
  std::string path;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
    if (argv[i].rfind("--config=", 0) == 0) path = argv[i].substr(9);
  }
  if (path.empty()) return argv;

  CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < argv.size() && !sub; ++i) sub = app.get_subcommand_no_throw(argv[i]);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);

  auto present = [&](const std::string& flag) {
    return std::any_of(argv.begin() + 1, argv.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };

  std::vector<std::string> out = argv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(detail::concat(path, ":", lineno, ": expected key=value"));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (key == "config") continue;
    const CLI::Option* opt = sub ? sub->get_option_no_throw(flag) : nullptr;
    if (!opt) opt = app.get_option_no_throw(flag);
    if (!opt) throw UsageError(detail::concat(path, ":", lineno, ": unknown key '", key, "'"));
    if (present(flag)) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1") out.push_back(flag);
    } else {
      out.push_back(flag);
      out.push_back(value);
    }
  }
  return out;
}

// --- subcommands ------------------------------------------------------------------

struct ImportArgs {
  std::string input;
  std::string out;
  data::ColumnMap map;
  bool strict = false;
};

int run_import(const Run& run, const ImportArgs& a) {
  auto result = data::import_csv(fs::path(a.input), a.map);
  std::cerr << result.report();
  if (result.samples.empty()) raise<DataError>(a.input, ": no valid rows");
  if (a.strict && !result.errors.empty()) raise<DataError>(a.input, ": ", result.errors.size(), " rows rejected");
  data::write_csv(fs::path(a.out), result.samples);
  write_manifest(run, a.out);
  json j;
  j["rows_read"] = result.rows_read;
  j["accepted"] = result.samples.size();
  j["rejected"] = result.errors.size();
  j["out"] = a.out;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int run_synth(const Run& run, std::size_t count, const std::string& out) {
  data::SyntheticOptions o;
  o.count = count;
  o.seed = run.globals.seed;
  const auto samples = data::generate_synthetic(o);
  data::write_csv(fs::path(out), samples);
  write_manifest(run, out);
  std::size_t los = 0;
  for (const auto& s : samples) los += s.los ? 1 : 0;
  json j;
  j["samples"] = samples.size();
  j["los"] = los;
  j["nlos"] = samples.size() - los;
  j["out"] = out;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

struct ModelArgs {
  RemnetConfig config;
  TrainPlan plan;
  std::size_t k = 128;
};

int run_train(const Run& run, const DataArgs& d, ModelArgs m, const std::string& out, const std::string& log_path) {
  const auto samples = select(d, run.globals.seed);
  if (m.k > data::kWindowLength) throw UsageError("--k must be at most 157");
  m.config.input_length = static_cast<std::uint32_t>(eval::padded_length(m.k, m.config.modules));
  m.config.validate();
  m.plan.threads = run.globals.threads;
  m.plan.shuffle_seed = derive_seed(run.globals.seed, 1);
  const auto set = data::prepare(samples, m.k, m.config.input_length);
  const auto examples = set.examples();

  Rng rng(derive_seed(run.globals.seed, 0));
  ModelWeights w = build(m.config, rng);
  RemnetObjective objective(m.config);
  FitCallbacks cb;
  cb.on_epoch = [&](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch + 1 << "/" << m.plan.epochs << " train_mae " << e.train_mae << " (" << e.wall_ms
              << " ms)\n";
  };
  const auto result = fit(objective, w, examples, m.plan, rng, cb);
  save_checkpoint(w, m.config, out);
  if (!log_path.empty()) write_stream(log_path, [&](std::ostream& os) { write_training_log(os, result.log); });
  write_manifest(run, out, {{"train_samples", samples.size()}, {"input_length", m.config.input_length}});
  json j;
  j["out"] = out;
  j["samples"] = samples.size();
  j["parameters"] = w.total_params();
  j["final_train_mae"] = result.loss_history.empty() ? 0.0 : result.loss_history.back();
  j["train_mae_infer"] = mean_abs_error(objective, w, examples);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int run_eval(const Run& run, const DataArgs& d, const std::string& model_path, const std::string& report_csv,
             const std::string& hist_csv) {
  const auto model = load_model(model_path);
  const auto samples = select(d, run.globals.seed);
  const auto set = data::prepare(samples, model.k(), model.config().input_length);
  const auto report = model.kind == ModelKind::quantized
                          ? eval::evaluate(model.quantized, set, run.globals.threads)
                          : eval::evaluate(model.checkpoint.config, model.checkpoint.weights, set, run.globals.threads);
  if (!report_csv.empty()) {
    write_stream(report_csv, [&](std::ostream& os) { report.write_csv(os); });
    write_manifest(run, report_csv);
  }
  if (!hist_csv.empty()) write_stream(hist_csv, [&](std::ostream& os) { report.write_histogram_csv(os); });
  std::cout << report.to_json() << "\n";
  return kOk;
}

struct QuantArgs {
  std::string mode;
  std::string model;
  std::string out;
  std::size_t calib = 500;
  TrainPlan plan;
};

int run_quantize(const Run& run, const DataArgs& d, QuantArgs q) {
  const auto model = load_model(q.model);
  if (model.kind != ModelKind::float_checkpoint) throw UsageError("quantize expects a float checkpoint (REMN)");
  const RemnetConfig& config = model.checkpoint.config;
  json j;
  j["mode"] = q.mode;
  j["out"] = q.out;

  if (q.mode == "fp16") {
    save_checkpoint(round_to_float16(model.checkpoint.weights), config, q.out);
    write_manifest(run, q.out);
    std::cout << j.dump(2) << "\n";
    return kOk;
  }

  const auto samples = select(d, run.globals.seed);
  const std::size_t k = model.k();
  const auto set = data::prepare(samples, k, config.input_length);
  quant::QuantizedModel qm;
  if (q.mode == "ptq") {
    const auto idx = data::sample_indices(set.size(), q.calib, derive_seed(run.globals.seed, 2));
    std::vector<std::span<const double>> calib;
    for (auto i : idx) calib.push_back(set.inputs[i]);
    qm = quant::calibrate_ptq(config, model.checkpoint.weights, calib);
    j["calibration_samples"] = calib.size();
  } else if (q.mode == "qat") {
    ModelWeights w = model.checkpoint.weights;
    q.plan.threads = run.globals.threads;
    q.plan.shuffle_seed = derive_seed(run.globals.seed, 3);
    Rng rng(derive_seed(run.globals.seed, 4));
    quant::QatOptions opts;
    opts.init_samples = q.calib;
    FitCallbacks cb;
    cb.on_epoch = [&](const EpochLog& e) {
      std::cerr << "qat epoch " << e.epoch + 1 << "/" << q.plan.epochs << " train_mae " << e.train_mae << "\n";
    };
    const auto examples = set.examples();
    auto result = quant::train_qat(config, w, examples, q.plan, rng, opts, cb);
    qm = std::move(result.model);
    j["qat_epochs"] = q.plan.epochs;
  } else {
    throw UsageError("quantize mode must be ptq, qat or fp16");
  }
  quant::save_quantized(q.out, qm);
  write_manifest(run, q.out);
  j["bytes"] = fs::file_size(q.out);
  j["float_bytes"] = fs::file_size(q.model);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int run_sweep(const Run& run, const DataArgs& d, ModelArgs m, const std::string& ks, std::size_t repeats,
              const std::string& out) {
  auto [parts, desc] = train_test(d, run.globals.seed);
  eval::KSweepOptions o;
  o.k_values = parse_numbers<std::size_t>(ks, "--k-values");
  for (auto k : o.k_values) {
    if (k == 0 || k > data::kWindowLength) throw UsageError("--k-values entries must be in [1, 157]");
  }
  o.repeats = repeats;
  o.base = m.config;
  o.plan = m.plan;
  o.plan.threads = run.globals.threads;
  o.seed = run.globals.seed;
  const auto rows = eval::k_sweep(parts.train, parts.test, o);
  if (!out.empty()) {
    write_stream(out, [&](std::ostream& os) { eval::write_k_sweep_csv(os, rows); });
    write_manifest(run, out, {{"split", desc}});
  }
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"k", r.k}, {"input_length", r.input_length}, {"mean_mae", r.mean_mae}, {"std_mae", r.std_mae},
                 {"test_mae", r.test_mae}});
  }
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int run_transfer(const Run& run, const DataArgs& d, const std::string& axis, TrainPlan plan, MlpConfig mlp,
                 const std::string& out) {
  const auto samples = select(d, run.globals.seed);
  eval::TransferOptions o;
  if (axis == "environment") {
    o.axis = eval::TransferAxis::environment;
  } else if (axis == "obstacle") {
    o.axis = eval::TransferAxis::obstacle;
  } else {
    throw UsageError("--axis must be environment or obstacle");
  }
  o.mlp = mlp;
  o.plan = plan;
  o.plan.threads = run.globals.threads;
  o.seed = run.globals.seed;
  const auto m = eval::transfer_matrix(samples, o);
  if (!out.empty()) {
    write_stream(out, [&](std::ostream& os) { eval::write_transfer_csv(os, m); });
    write_manifest(run, out);
  }
  json j;
  j["axis"] = axis;
  j["classes"] = m.classes;
  json mae = json::array(), raw = json::array();
  for (const auto& row : m.cells) {
    json a = json::array(), b = json::array();
    for (const auto& c : row) {
      a.push_back(c.mae);
      b.push_back(c.raw_mae);
    }
    mae.push_back(a);
    raw.push_back(b);
  }
  j["mae"] = mae;
  j["raw_mae"] = raw;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

struct LocateArgs {
  std::string scenario;
  std::string cirs;
  std::string model;
  std::string out;
  std::string write_scenario;
  std::string nlos_anchors = "0,1";
  std::string room = "10,8,3";
  std::size_t epochs = 200;
};

int run_locate(const Run& run, const DataArgs& d, const LocateArgs& a) {
  loc::Scenario scenario;
  if (!a.scenario.empty()) {
    scenario = loc::read_scenario(a.scenario, a.cirs.empty() ? std::nullopt : std::optional<fs::path>(a.cirs));
  } else {
    const auto samples = select(d, run.globals.seed);
    std::vector<data::CirSample> los, nlos;
    for (const auto& s : samples) (s.los ? los : nlos).push_back(s);
    if (los.empty() || nlos.empty()) raise<DataError>("locate: --data needs both LoS and NLoS samples");
    const auto room = parse_numbers<double>(a.room, "--room");
    if (room.size() != 3) throw UsageError("--room takes x,y,z");
    loc::ScenarioOptions o;
    o.epochs = a.epochs;
    o.room = {room[0], room[1], room[2]};
    o.nlos_anchors = parse_numbers<std::size_t>(a.nlos_anchors, "--nlos-anchors");
    o.seed = run.globals.seed;
    scenario = loc::make_scenario(loc::default_anchors(o.room), los, nlos, o);
    if (!a.write_scenario.empty()) {
      loc::write_scenario(a.write_scenario, scenario, fs::path(a.write_scenario + ".cirs.csv"));
    }
  }

  loc::Mitigator mitigator;
  std::optional<LoadedModel> model;
  if (!a.model.empty()) {
    const bool has_cirs = std::all_of(scenario.epochs.begin(), scenario.epochs.end(),
                                      [&](const loc::Epoch& e) { return e.cirs.size() == scenario.anchors.size(); });
    if (!has_cirs) throw UsageError("--model needs CIRs: pass --cirs with the scenario");
    model = load_model(a.model);
    mitigator = [&](std::span<const double> cir) { return model->predict(cir); };
  }
  const auto result = loc::position_experiment(scenario, mitigator, {}, run.globals.threads);
  if (!a.out.empty()) {
    loc::write_results_csv(a.out, scenario, result);
    write_manifest(run, a.out);
  }
  json j;
  j["epochs"] = scenario.epochs.size();
  j["anchors"] = scenario.anchors.size();
  j["raw_position_mae"] = result.raw_position_mae;
  j["mitigated_position_mae"] = result.mitigated_position_mae;
  j["raw_range_mae"] = result.raw_range_mae;
  j["mitigated_range_mae"] = result.mitigated_range_mae;
  j["unconverged"] = result.unconverged;
  j["mitigated"] = model.has_value();
  std::cout << j.dump(2) << "\n";
  return kOk;
}

struct BenchArgs {
  std::string model;
  std::string qmodel;
  std::string variants = "float32,int8";
  eval::BenchOptions options;
  std::string out;
};

int run_bench(const Run& run, const DataArgs& d, BenchArgs b) {
  const auto model = load_model(b.model);
  if (model.kind != ModelKind::float_checkpoint) throw UsageError("bench --model expects a float checkpoint (REMN)");
  quant::QuantizedModel qm;
  if (!b.qmodel.empty()) {
    qm = quant::load_quantized(b.qmodel);
    if (!(qm.config == model.checkpoint.config)) raise<DataError>("--qmodel config differs from --model");
  } else {
    // Calibrate on --data when given, else on the benchmark inputs themselves.
    std::vector<std::vector<double>> calib;
    if (!d.path.empty()) {
      const auto samples = select(d, run.globals.seed);
      calib = data::prepare(samples, model.k(), model.config().input_length).inputs;
      if (calib.size() > 500) calib.resize(500);
    } else {
      Rng rng(derive_seed(run.globals.seed, 5));
      calib.assign(64, std::vector<double>(model.config().input_length));
      for (auto& x : calib) {
        for (double& v : x) v = rng.uniform();
      }
    }
    std::vector<std::span<const double>> spans(calib.begin(), calib.end());
    qm = quant::calibrate_ptq(model.checkpoint.config, model.checkpoint.weights, spans);
  }
  b.options.seed = run.globals.seed;
  json j = json::array();
  for (const auto& name : split_list(b.variants)) {
    const auto r = eval::bench_latency(qm, model.checkpoint.weights, eval::parse_variant(name), b.options);
    std::cerr << name << ": median " << r.median_ms << " ms, p95 " << r.p95_ms << " ms\n";
    j.push_back({{"variant", std::string(eval::to_string(r.variant))},
                 {"iterations", r.iterations},
                 {"median_ms", r.median_ms},
                 {"p95_ms", r.p95_ms},
                 {"mean_ms", r.mean_ms},
                 {"model_bytes", r.model_bytes}});
  }
  if (!b.out.empty()) {
    write_text(b.out, j.dump(2) + "\n");
    write_manifest(run, b.out);
  }
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int run_pca(const Run& run, const DataArgs& d, std::size_t dims, const std::string& out) {
  const auto samples = select(d, run.globals.seed);
  data::PcaOptions o;
  o.dims = dims;
  const auto pca = data::pca_project(samples, o);
  if (!out.empty()) {
    data::write_pca_csv(out, pca, samples);
    write_manifest(run, out);
  }
  json j;
  j["samples"] = samples.size();
  j["eigenvalues"] = pca.eigenvalues;
  j["explained_variance"] = pca.explained_variance;
  j["converged"] = pca.converged;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

// --- option wiring --------------------------------------------------------------

void add_data_options(CLI::App* sub, DataArgs& d, bool required = true) {
  auto* opt = sub->add_option("--data", d.path, "canonical dataset CSV");
  if (required) opt->required();
  sub->add_option("--split", d.split,
                  "all | paper_default | stratified[:fraction] | environment:<name> | obstacle:<name>");
  sub->add_option("--part", d.part, "part of the split to use")->check(CLI::IsMember({"train", "test"}));
}

void add_model_options(CLI::App* sub, ModelArgs& m) {
  sub->add_option("--k", m.k, "CIR samples kept after the window start (K)");
  sub->add_option("--filters", m.config.filters, "F");
  sub->add_option("--modules", m.config.modules, "N");
  sub->add_option("--reduction", m.config.se_reduction, "r");
  sub->add_option("--first-kernel", m.config.first_kernel);
  sub->add_option("--body-kernel", m.config.body_kernel);
  sub->add_option("--branch2-kernel", m.config.branch2_kernel);
  sub->add_option("--dropout", m.config.dropout_rate);
  sub->add_option("--epochs", m.plan.epochs);
  sub->add_option("--batch", m.plan.batch_size);
  sub->add_option("--lr", m.plan.learning_rate);
}

int main_impl(int argc, char** argv) {
  CLI::App app{"REMNet UWB range-error mitigation pipeline", "remnet"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "seed for every random stream");
  app.add_option("--threads", g.threads, "worker threads (results do not depend on it)");
  app.add_option("--config", g.config, "flat key=value file; flags override it");
  app.set_version_flag("--version", kVersion);

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->option_defaults()->always_capture_default();
    return s;
  };

  ImportArgs imp;
  auto* c_import = sub("import", "validate and window a CSV into the canonical format");
  c_import->add_option("--data", imp.input, "input CSV")->required();
  c_import->add_option("--out", imp.out, "canonical CSV")->required();
  c_import->add_option("--col-measured", imp.map.measured_range);
  c_import->add_option("--col-true", imp.map.true_range);
  c_import->add_option("--col-env", imp.map.environment);
  c_import->add_option("--col-obstacle", imp.map.obstacle);
  c_import->add_option("--col-los", imp.map.los);
  c_import->add_option("--cir-prefix", imp.map.cir_prefix);
  c_import->add_flag("--raw", imp.map.force_raw, "window the CIR columns even when there are exactly 157");
  c_import->add_option("--peak-fraction", imp.map.peak_fraction);
  c_import->add_flag("--strict", imp.strict, "fail when any row is rejected");

  std::size_t synth_count = 4000;
  std::string synth_out;
  auto* c_synth = sub("synth", "generate the synthetic multipath dataset");
  c_synth->add_option("--count", synth_count);
  c_synth->add_option("--out", synth_out)->required();

  DataArgs train_data;
  ModelArgs train_model;
  std::string train_out, train_log;
  auto* c_train = sub("train", "train a float model");
  add_data_options(c_train, train_data);
  add_model_options(c_train, train_model);
  c_train->add_option("--out", train_out, "checkpoint (.remn)")->required();
  c_train->add_option("--log", train_log, "per-epoch CSV log");

  DataArgs eval_data;
  eval_data.part = "test";
  std::string eval_model, eval_csv, eval_hist;
  auto* c_eval = sub("eval", "evaluate a float or int8 model; JSON report on stdout");
  add_data_options(c_eval, eval_data);
  c_eval->add_option("--model", eval_model, ".remn or .remq")->required();
  c_eval->add_option("--report-csv", eval_csv);
  c_eval->add_option("--hist-csv", eval_hist);

  DataArgs quant_data;
  QuantArgs quant;
  quant.plan.epochs = 5;
  auto* c_quant = sub("quantize", "ptq | qat | fp16");
  c_quant->add_option("mode", quant.mode)->required()->check(CLI::IsMember({"ptq", "qat", "fp16"}));
  add_data_options(c_quant, quant_data, false);
  c_quant->add_option("--model", quant.model, "float checkpoint")->required();
  c_quant->add_option("--out", quant.out)->required();
  c_quant->add_option("--calib", quant.calib, "calibration samples (PTQ) or range-init samples (QAT)");
  c_quant->add_option("--epochs", quant.plan.epochs, "QAT fine-tuning epochs");
  c_quant->add_option("--batch", quant.plan.batch_size);
  c_quant->add_option("--lr", quant.plan.learning_rate);

  DataArgs sweep_data;
  ModelArgs sweep_model;
  std::string sweep_ks = "8,16,32,64,128,157", sweep_out;
  std::size_t sweep_repeats = 10;
  auto* c_sweep = sub("sweep-k", "retrain for each K and report the test MAE");
  add_data_options(c_sweep, sweep_data);
  add_model_options(c_sweep, sweep_model);
  c_sweep->add_option("--k-values", sweep_ks);
  c_sweep->add_option("--repeats", sweep_repeats);
  c_sweep->add_option("--out", sweep_out, "CSV table");

  DataArgs transfer_data;
  std::string transfer_axis = "environment", transfer_out;
  TrainPlan transfer_plan;
  MlpConfig transfer_mlp;
  auto* c_transfer = sub("transfer", "MLP trained on one class, tested on every class");
  add_data_options(c_transfer, transfer_data);
  c_transfer->add_option("--axis", transfer_axis)->check(CLI::IsMember({"environment", "obstacle"}));
  c_transfer->add_option("--epochs", transfer_plan.epochs);
  c_transfer->add_option("--batch", transfer_plan.batch_size);
  c_transfer->add_option("--lr", transfer_plan.learning_rate);
  c_transfer->add_option("--hidden", transfer_mlp.hidden);
  c_transfer->add_option("--layers", transfer_mlp.layers);
  c_transfer->add_option("--out", transfer_out, "CSV grid");

  DataArgs locate_data;
  locate_data.part = "test";
  LocateArgs locate;
  auto* c_locate = sub("locate", "trilaterate raw and mitigated ranges");
  add_data_options(c_locate, locate_data, false);
  c_locate->add_option("--scenario", locate.scenario, "scenario CSV");
  c_locate->add_option("--cirs", locate.cirs, "companion CIR CSV");
  c_locate->add_option("--model", locate.model, "mitigation model (.remn or .remq)");
  c_locate->add_option("--out", locate.out, "per-epoch results CSV");
  c_locate->add_option("--write-scenario", locate.write_scenario, "save the generated scenario");
  c_locate->add_option("--nlos-anchors", locate.nlos_anchors);
  c_locate->add_option("--room", locate.room);
  c_locate->add_option("--epochs", locate.epochs);

  DataArgs bench_data;
  BenchArgs bench;
  auto* c_bench = sub("bench", "single-threaded latency per variant");
  add_data_options(c_bench, bench_data, false);
  c_bench->add_option("--model", bench.model, "float checkpoint")->required();
  c_bench->add_option("--qmodel", bench.qmodel, "int8 model; PTQ-calibrated when omitted");
  c_bench->add_option("--variants", bench.variants, "float64,float32,int8");
  c_bench->add_option("--iters", bench.options.iterations);
  c_bench->add_option("--warmup", bench.options.warmup);
  c_bench->add_option("--batch", bench.options.batch);
  c_bench->add_option("--out", bench.out, "JSON file");

  DataArgs pca_data;
  std::size_t pca_dims = 3;
  std::string pca_out;
  auto* c_pca = sub("pca", "project CIRs onto the leading principal components");
  add_data_options(c_pca, pca_data);
  c_pca->add_option("--dims", pca_dims);
  c_pca->add_option("--out", pca_out, "CSV of projections");

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = apply_config(args, app);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  Run run;
  run.app = &app;
  run.argv = args;
  run.globals = g;
  if (g.threads == 0) {
    std::cerr << "error: --threads must be positive\n";
    return kUsage;
  }

  try {
    if ((run.sub = c_import)->parsed()) return run_import(run, imp);
    if ((run.sub = c_synth)->parsed()) return run_synth(run, synth_count, synth_out);
    if ((run.sub = c_train)->parsed()) return run_train(run, train_data, train_model, train_out, train_log);
    if ((run.sub = c_eval)->parsed()) return run_eval(run, eval_data, eval_model, eval_csv, eval_hist);
    if ((run.sub = c_quant)->parsed()) return run_quantize(run, quant_data, quant);
    if ((run.sub = c_sweep)->parsed()) return run_sweep(run, sweep_data, sweep_model, sweep_ks, sweep_repeats, sweep_out);
    if ((run.sub = c_transfer)->parsed()) {
      return run_transfer(run, transfer_data, transfer_axis, transfer_plan, transfer_mlp, transfer_out);
    }
    if ((run.sub = c_locate)->parsed()) return run_locate(run, locate_data, locate);
    if ((run.sub = c_bench)->parsed()) return run_bench(run, bench_data, bench);
    if ((run.sub = c_pca)->parsed()) return run_pca(run, pca_data, pca_dims, pca_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace
}  // namespace remnet::cli

int main(int argc, char** argv) { return remnet::cli::main_impl(argc, argv); }
