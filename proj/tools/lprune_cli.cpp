// Copyright (c) 2026 The lprune Authors. All Rights Reserved.
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

// Command-line front end: train, prune, fold, pipeline, eval, bench, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lprune.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using lprune::ModelGraph;

namespace {

struct Options {
  std::string data_dir = "data/cifar-10-batches-bin";
  std::string ckpt;
  std::string baseline;
  std::string out;
  std::string config;
  std::string model = "desk";
  std::string fold_method = "composed";
  std::string beta_mode = "discard";
  std::string csv;
  std::vector<double> ratio;
  std::vector<std::string> reports;
  double lambda = 1e-4;
  double lr = 0.1;
  double weight_decay = 1e-4;
  double abort_floor = 0.0;
  std::size_t epochs = 20;
  std::size_t epochs_per_stage = 10;
  std::size_t batch_size = 64;
  std::size_t subset_n = 5000;
  std::size_t test_n = 0;
  std::size_t reps = 7;
  std::size_t timing_batch = 64;
  std::uint64_t seed = 0;
  int threads = 1;
  bool paper_literal_1x1 = false;
  bool no_augment = false;
};

template <typename V>
void override_from(const json& j, const char* key, V& dst) {
  std::string alt = key;
  for (char& c : alt) c = c == '_' ? '-' : c;
  if (j.contains(key)) {
    dst = j.at(key).get<V>();
  } else if (j.contains(alt)) {
    dst = j.at(alt).get<V>();
  }
}

// Values in the --config file win over command-line flags.
void apply_config(Options& o) {
  if (o.config.empty()) return;
  std::ifstream in(o.config);
  if (!in) throw lprune::MissingFileError("config file not found: " + o.config);
  const json j = json::parse(in);
  if (!j.is_object()) throw lprune::InvalidArgument("config must be a JSON object");
  override_from(j, "data_dir", o.data_dir);
  override_from(j, "ckpt", o.ckpt);
  override_from(j, "baseline", o.baseline);
  override_from(j, "out", o.out);
  override_from(j, "model", o.model);
  override_from(j, "fold_method", o.fold_method);
  override_from(j, "beta_mode", o.beta_mode);
  override_from(j, "lambda", o.lambda);
  override_from(j, "lr", o.lr);
  override_from(j, "weight_decay", o.weight_decay);
  override_from(j, "abort_floor", o.abort_floor);
  override_from(j, "epochs", o.epochs);
  override_from(j, "epochs_per_stage", o.epochs_per_stage);
  override_from(j, "batch_size", o.batch_size);
  override_from(j, "subset_n", o.subset_n);
  override_from(j, "test_n", o.test_n);
  override_from(j, "reps", o.reps);
  override_from(j, "timing_batch", o.timing_batch);
  override_from(j, "no_augment", o.no_augment);
  override_from(j, "seed", o.seed);
  override_from(j, "threads", o.threads);
  override_from(j, "paper_literal_1x1", o.paper_literal_1x1);
  if (j.contains("ratio")) {
    const auto& r = j.at("ratio");
    o.ratio = r.is_array() ? r.get<std::vector<double>>() : std::vector<double>{r.get<double>()};
  }
}

ModelGraph<float> build_model(const Options& o) {
  lprune::InitOptions init;
  init.seed = o.seed;
  if (o.model == "desk") return lprune::build_desk_resnet<float>(10, init);
  if (o.model == "resnet164") return lprune::build_resnet164<float>(10, init);
  throw lprune::InvalidArgument("unknown model '" + o.model + "' (expected desk|resnet164)");
}

ModelGraph<float> model_from(const Options& o) {
  return o.ckpt.empty() ? build_model(o) : lprune::load_checkpoint(o.ckpt);
}

const std::string& need(const std::string& v, const char* flag) {
  if (v.empty()) throw lprune::InvalidArgument(std::string(flag) + " is required");
  return v;
}

lprune::TrainConfig train_config(const Options& o) {
  lprune::TrainConfig tc;
  tc.lambda = o.lambda;
  tc.lr = o.lr;
  tc.weight_decay = o.weight_decay;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.seed = o.seed;
  tc.augment = !o.no_augment;
  return tc;
}

struct Splits {
  lprune::data::Dataset train, holdout, test;
};

Splits load_splits(const Options& o) {
  auto [train, test] = lprune::data::load_cifar10(o.data_dir);
  if (o.subset_n) train = lprune::data::subset(train, o.subset_n, o.seed);
  if (o.test_n) test = lprune::data::subset(test, o.test_n, o.seed);
  auto [fit, held] = lprune::data::split_holdout(train, 0.1, o.seed);
  return {std::move(fit), std::move(held), std::move(test)};
}

lprune::data::Dataset load_test(const Options& o) {
  lprune::data::Dataset test;
  test.split = lprune::data::Split::test;
  lprune::data::read_batch_file(fs::path(o.data_dir) / lprune::data::kTestFile, test);
  if (o.test_n) test = lprune::data::subset(test, o.test_n, o.seed);
  return test;
}

lprune::TimingOptions timing(const Options& o) {
  lprune::TimingOptions t;
  t.batch = o.timing_batch;
  t.reps = o.reps;
  t.threads = o.threads;
  t.seed = o.seed;
  return t;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw lprune::Error("cannot write " + p.string());
}

std::string out_or(const Options& o, const char* fallback) { return o.out.empty() ? fallback : o.out; }

int cmd_train(const Options& o) {
  auto g = model_from(o);
  const Splits s = load_splits(o);
  lprune::Trainer<float> trainer(g, train_config(o));
  for (std::size_t e = 0; e < o.epochs; ++e) {
    std::cout << trainer.train_epoch(s.train, s.holdout, e).to_json().dump() << std::endl;
  }
  g.drop_grads();
  const std::string path = out_or(o, "model.lprn");
  lprune::save_checkpoint(g, path);
  std::cout << json{{"checkpoint", path}, {"parameters", g.count_params()}}.dump() << '\n';
  return 0;
}

int cmd_prune(const Options& o) {
  const auto g = lprune::load_checkpoint(need(o.ckpt, "--ckpt"));
  if (o.ratio.size() != 1) throw lprune::InvalidArgument("prune takes exactly one --ratio");
  const double t = lprune::select_threshold(g, o.ratio.front());
  const auto plan = lprune::plan_prune(g, t, o.beta_mode == "absorb" ? lprune::BetaMode::absorb : lprune::BetaMode::discard);
  const auto pruned = lprune::apply_prune(g, plan);
  const std::string path = out_or(o, "pruned.lprn");
  lprune::save_checkpoint(pruned, path);
  auto report = lprune::surgery_report(g, plan, pruned, {});
  report["checkpoint"] = path;
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_fold(const Options& o) {
  const auto g = lprune::load_checkpoint(need(o.ckpt, "--ckpt"));
  lprune::ComposeOptions co;
  co.paper_literal_1x1 = o.paper_literal_1x1;
  auto [folded, records] = lprune::fold_all(g, lprune::fold_method_from_string(o.fold_method), co);
  const std::string path = out_or(o, "folded.lprn");
  lprune::save_checkpoint(folded, path);
  json recs = json::array();
  for (const auto& r : records) recs.push_back(r.to_json());
  std::cout << json{{"checkpoint", path},
                    {"folds", recs},
                    {"params_before", g.count_params()},
                    {"params_after", folded.count_params()}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_pipeline(Options o) {
  if (o.ratio.empty()) o.ratio = {0.4};
  const fs::path dir = out_or(o, "pipeline-out");
  fs::create_directories(dir);
  auto g = model_from(o);
  const Splits s = load_splits(o);

  lprune::PipelineConfig pc;
  pc.ratios = o.ratio;
  pc.initial_epochs = o.epochs;
  pc.epochs_per_stage = o.epochs_per_stage;
  pc.train = train_config(o);
  pc.fold_method = lprune::fold_method_from_string(o.fold_method);
  pc.compose.paper_literal_1x1 = o.paper_literal_1x1;
  pc.beta_mode = o.beta_mode == "absorb" ? lprune::BetaMode::absorb : lprune::BetaMode::discard;
  pc.abort_floor = o.abort_floor;
  pc.timing = timing(o);

  std::ofstream epochs(dir / "epochs.jsonl");
  std::string stage;
  lprune::PipelineHooks hooks;
  hooks.on_stage_start = [&](const std::string& name) { stage = name; };
  hooks.on_epoch = [&](const lprune::EpochStats& e) {
    json j = e.to_json();
    j["stage"] = stage;
    epochs << j.dump() << std::endl;
    std::cout << j.dump() << std::endl;
  };
  std::size_t index = 0;
  auto on_stage = [&](const lprune::StageResult<float>& st) {
    char stem[64];
    std::snprintf(stem, sizeof stem, "stage-%02zu", index++);
    const fs::path ckpt = dir / (std::string(stem) + ".lprn");
    lprune::save_checkpoint(*st.graph, ckpt);
    lprune::MetricsReport r = st.report;
    r.model_size_bytes = static_cast<std::size_t>(fs::file_size(ckpt));
    json j = r.to_json();
    j["checkpoint"] = ckpt.filename().string();
    write_text(dir / (std::string(stem) + ".report.json"), j.dump(2) + "\n");
    if (!st.surgery.is_null()) write_text(dir / (std::string(stem) + ".surgery.json"), st.surgery.dump(2) + "\n");
  };
  const auto res = lprune::iterate_pipeline(std::move(g), {s.train, s.holdout, s.test}, pc, hooks, on_stage);
  write_text(dir / "table.txt", lprune::render_table(res.reports));
  write_text(dir / "table.csv", lprune::render_csv(res.reports));
  std::cout << lprune::render_table(res.reports);
  if (res.aborted) std::cerr << "aborted: " << res.abort_reason << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  const auto& path = need(o.ckpt, "--ckpt");
  const auto g = lprune::load_checkpoint(path);
  const auto test = load_test(o);
  const auto ev = lprune::evaluate(g, test, lprune::data::kCifar10Stats);
  std::cout << json{{"top1", ev.top1},
                    {"correct", ev.correct},
                    {"total", ev.total},
                    {"parameters", g.count_params()},
                    {"model_size_bytes", fs::file_size(path)}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_bench(const Options& o) {
  const auto g = lprune::load_checkpoint(need(o.ckpt, "--ckpt"));
  const auto t = lprune::time_inference(g, timing(o));
  json j{{"seconds_per_batch", t.seconds}, {"samples", t.samples},  {"batch", o.timing_batch},
         {"threads", o.threads},          {"reps", o.reps},         {"parameters", g.count_params()}};
  if (!o.baseline.empty()) {
    const auto base = lprune::load_checkpoint(o.baseline);
    const auto tb = lprune::time_inference(base, timing(o));
    j["baseline_seconds_per_batch"] = tb.seconds;
    j["inference_ratio"] = tb.seconds / t.seconds;
  }
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_report(const Options& o) {
  if (o.reports.empty()) throw lprune::InvalidArgument("report needs at least one report file");
  std::vector<lprune::MetricsReport> rows;
  for (const auto& p : o.reports) {
    std::ifstream in(p);
    if (!in) throw lprune::MissingFileError("report not found: " + p);
    rows.push_back(lprune::MetricsReport::from_json(json::parse(in)));
  }
  std::cout << lprune::render_table(rows);
  if (!o.csv.empty()) write_text(o.csv, lprune::render_csv(rows));
  return 0;
}

int cmd_fixture(const Options& o) {
  const fs::path dir = out_or(o, "fixture");
  lprune::data::write_fixture(dir, o.seed);
  std::cout << json{{"fixture", dir.string()}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lprune: sparsity training, channel pruning and layer folding"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  app.add_option("--data-dir", o.data_dir, "directory holding the CIFAR-10 binary batches");
  app.add_option("--ckpt", o.ckpt, "input checkpoint");
  app.add_option("--baseline", o.baseline, "baseline checkpoint for bench");
  app.add_option("--out", o.out, "output checkpoint, directory or file");
  app.add_option("--config", o.config, "JSON file whose keys override flags");
  app.add_option("--model", o.model, "architecture when no checkpoint is given (desk|resnet164)");
  app.add_option("--lambda", o.lambda, "L1 weight on BN scaling factors");
  app.add_option("--lr", o.lr, "initial learning rate");
  app.add_option("--weight-decay", o.weight_decay, "weight decay on conv and fc tensors");
  app.add_option("--ratio", o.ratio, "prune ratio; pipeline accepts an increasing list")->delimiter(',');
  app.add_option("--epochs", o.epochs, "training epochs (pipeline: before the first cut)");
  app.add_option("--epochs-per-stage", o.epochs_per_stage, "finetune epochs after each cut");
  app.add_option("--batch-size", o.batch_size, "minibatch size");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--subset-n", o.subset_n, "stratified training subset size (0 = all)");
  app.add_option("--test-n", o.test_n, "stratified test subset size (0 = all)");
  app.add_option("--fold-method", o.fold_method, "zero|composed")->check(CLI::IsMember({"zero", "composed"}));
  app.add_option("--beta-mode", o.beta_mode, "discard|absorb")->check(CLI::IsMember({"discard", "absorb"}));
  app.add_flag("--paper-literal-1x1", o.paper_literal_1x1, "fold to the composed kernel's center tap only");
  app.add_option("--abort-floor", o.abort_floor, "pipeline stops when a stage's top1 falls below this");
  app.add_option("--threads", o.threads, "BLAS threads for compute and timing");
  app.add_option("--reps", o.reps, "timed repetitions for bench");
  app.add_option("--timing-batch", o.timing_batch, "batch size for inference timing");
  app.add_flag("--no-augment", o.no_augment, "disable crop and flip augmentation");

  auto* train = app.add_subcommand("train", "penalized sparsity training");
  auto* prune = app.add_subcommand("prune", "global threshold and channel surgery");
  auto* fold = app.add_subcommand("fold", "fold single-channel sandwiches");
  auto* pipeline = app.add_subcommand("pipeline", "iterative sparsify, prune, fold and finetune");
  auto* eval = app.add_subcommand("eval", "test-set top1 of a checkpoint");
  auto* bench = app.add_subcommand("bench", "inference timing");
  auto* report = app.add_subcommand("report", "render a comparison table from stage reports");
  report->add_option("reports", o.reports, "report JSON files")->check(CLI::ExistingFile);
  report->add_option("--csv", o.csv, "also write the table as CSV");
  auto* fixture = app.add_subcommand("fixture", "write a synthetic dataset in CIFAR-10 binary layout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    apply_config(o);
    lprune::blas::set_num_threads(o.threads);
    if (*train) return cmd_train(o);
    if (*prune) return cmd_prune(o);
    if (*fold) return cmd_fold(o);
    if (*pipeline) return cmd_pipeline(o);
    if (*eval) return cmd_eval(o);
    if (*bench) return cmd_bench(o);
    if (*report) return cmd_report(o);
    if (*fixture) return cmd_fixture(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
