// Copyright 2026 The Projnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "projnet/cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "projnet/data.h"
#include "projnet/errors.h"
#include "projnet/experiment.h"
#include "projnet/model.h"
#include "projnet/projection.h"
#include "projnet/serialize.h"
#include "projnet/verification.h"

namespace projnet {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw Error("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string audit_table(const ParamAudit& audit) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-6s %-10s %6s %12s %12s\n", "layer", "kind",
                "nodes", "trainable", "frozen");
  os << buf;
  for (const ParamAuditRow& r : audit.rows) {
    std::snprintf(buf, sizeof buf, "%-6zu %-10s %6zu %12zu %12zu\n", r.layer,
                  r.kind.c_str(), r.nodes, r.trainable, r.frozen);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s %-10s %6s %12zu %12zu\n", "total", "", "",
                audit.trainable, audit.frozen);
  os << buf;
  return os.str();
}

/// Data options shared by pretrain and transfer.
struct DataOptions {
  std::string source = "synthetic";
  std::string images, labels, test_images, labels_test;
  std::size_t n_train = 0;
  std::size_t n_test = 1000;
};

void add_data_options(CLI::App* cmd, DataOptions& d, std::size_t default_train) {
  d.n_train = default_train;
  cmd->add_option("--data", d.source, "Data source")
      ->check(CLI::IsMember({"synthetic", "idx"}))
      ->capture_default_str();
  cmd->add_option("--images", d.images, "IDX training images (with --data idx)");
  cmd->add_option("--labels", d.labels, "IDX training labels (with --data idx)");
  cmd->add_option("--test-images", d.test_images, "IDX test images (with --data idx)");
  cmd->add_option("--test-labels", d.labels_test, "IDX test labels (with --data idx)");
  cmd->add_option("--n-train", d.n_train, "Synthetic training samples")
      ->capture_default_str();
  cmd->add_option("--n-test", d.n_test, "Synthetic test samples")->capture_default_str();
}

/// Synthetic data follows the transfer study: task A for pretraining, the
/// shifted task B for transfer, with the same seed derivation.
std::pair<Dataset, Dataset> load_data(const DataOptions& d, std::uint64_t seed,
                                      bool pretraining) {
  if (d.source == "idx") {
    if (d.images.empty() || d.labels.empty() || d.test_images.empty() ||
        d.labels_test.empty()) {
      throw ConfigError(
          "--data idx needs --images, --labels, --test-images and --test-labels");
    }
    return {load_idx(d.images, d.labels, pretraining ? "pretrain" : "train"),
            load_idx(d.test_images, d.labels_test, "test")};
  }
  StudyConfig sc;
  sc.seed = seed;
  if (pretraining) {
    sc.n_pretrain = d.n_train;
    sc.n_pretrain_test = d.n_test;
    sc.n_train = sc.n_test = 2 * kSyntheticClasses;
  } else {
    sc.n_train = d.n_train;
    sc.n_test = d.n_test;
    sc.n_pretrain = sc.n_pretrain_test = 2 * kSyntheticClasses;
  }
  StudyData data = study_data(sc);
  if (pretraining) return {std::move(data.pretrain), std::move(data.pretrain_test)};
  return {std::move(data.train), std::move(data.test)};
}

void print_log(std::ostream& out, const MetricsLog& log) {
  char buf[160];
  for (const MetricsRow& r : log.rows) {
    std::snprintf(buf, sizeof buf,
                  "epoch %3zu  %-10s stage %zu  loss %.6f  acc %.4f  trainable %zu  %.0f ms\n",
                  r.epoch, r.regime.c_str(), r.stage, r.train_loss, r.test_acc,
                  r.trainable_params, r.wall_ms);
    out << buf;
  }
}

void write_metrics(const std::string& path, const MetricsLog& log,
                   const TrainConfig& config) {
  write_text(path, log.to_csv());
  nlohmann::ordered_json meta;
  meta["schedule"] = config.name();
  meta["seed"] = config.seed;
  meta["shuffle"] = config.shuffle;
  meta["hflip"] = config.hflip;
  meta["batch_size"] = config.batch_size;
  meta["epochs"] = config.total_epochs();
  meta["reset_head"] = config.reset_head;
  write_text(path + ".json", meta.dump(2) + "\n");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Generalized FFN/CNN nodes, model projection and transfer regimes",
               "projnet"};
  app.require_subcommand(1);

  // verify
  std::uint64_t verify_seed = 7;
  std::string verify_out;
  std::size_t verify_n = 200;
  auto* verify = app.add_subcommand("verify", "Run every numerical certificate");
  verify->add_option("--seed", verify_seed, "Seed")->capture_default_str();
  verify->add_option("--out", verify_out, "Write the JSON report here");
  verify->add_option("--instances", verify_n, "Random instances per check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // params
  std::string params_model, params_csv, params_regime;
  std::uint64_t params_seed = 0;
  auto* params = app.add_subcommand("params", "Trainable/frozen parameter audit");
  params->add_option("--model", params_model, "Model file")->required();
  params->add_option("--csv", params_csv, "Write the audit as CSV");
  params->add_option("--regime", params_regime,
                     "Apply a regime's freeze flags (projection projects first)")
      ->check(CLI::IsMember({"lr", "ft", "projection"}));
  params->add_option("--seed", params_seed, "Seed (unused; accepted everywhere)");

  // pretrain
  std::string pre_arch, pre_out, pre_metrics;
  std::optional<std::uint64_t> pre_seed;
  std::size_t pre_epochs = 20, pre_batch = 64;
  bool pre_no_shuffle = false;
  DataOptions pre_data;
  auto* pretrain = app.add_subcommand("pretrain", "Build a backbone and train it");
  pretrain->add_option("--arch", pre_arch, "Architecture JSON file")->required();
  pretrain->add_option("--out", pre_out, "Output model file")->required();
  pretrain->add_option("--metrics", pre_metrics, "Write per-epoch metrics CSV");
  pretrain->add_option("--seed", pre_seed, "Seed (defaults to the seed in the architecture file)");
  pretrain->add_option("--epochs", pre_epochs, "Epochs of Adam")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pretrain->add_option("--batch", pre_batch, "Batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pretrain->add_flag("--no-shuffle", pre_no_shuffle, "Keep the data order fixed");
  add_data_options(pretrain, pre_data, 10000);

  // transfer
  std::string tr_model, tr_regime, tr_two_stage, tr_metrics, tr_out;
  std::uint64_t tr_seed = 0;
  std::size_t tr_epochs = 20, tr_batch = 64;
  bool tr_no_shuffle = false, tr_hflip = false, tr_reset_head = false;
  DataOptions tr_data;
  auto* transfer = app.add_subcommand("transfer", "Transfer a backbone to new data");
  transfer->add_option("--model", tr_model, "Pretrained model file")->required();
  transfer->add_option("--regime", tr_regime, "Single-stage regime")
      ->check(CLI::IsMember({"lr", "ft", "projection"}));
  transfer->add_option("--two-stage", tr_two_stage, "Two-stage schedule")
      ->check(CLI::IsMember({"lr+ft", "proj+ft", "proj+proj"}));
  transfer->add_option("--metrics", tr_metrics, "Per-epoch metrics CSV")->required();
  transfer->add_option("--out", tr_out, "Write the trained model here");
  transfer->add_option("--seed", tr_seed, "Seed")->capture_default_str();
  transfer->add_option("--epochs", tr_epochs, "Epochs for single-stage schedules")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  transfer->add_option("--batch", tr_batch, "Batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  transfer->add_flag("--no-shuffle", tr_no_shuffle, "Keep the data order fixed");
  transfer->add_flag("--hflip", tr_hflip, "Horizontal flip augmentation, p = 0.5");
  transfer->add_flag("--reset-head", tr_reset_head,
                     "Start from a fresh head (always done when the class count differs)");
  add_data_options(transfer, tr_data, 2000);

  // project
  std::string pj_in, pj_out;
  std::uint64_t pj_seed = 0;
  auto* project = app.add_subcommand("project", "Project every GCNN node of a model");
  project->add_option("--model", pj_in, "Input model file")->required();
  project->add_option("--out", pj_out, "Output model file")->required();
  project->add_option("--seed", pj_seed, "Seed (unused; accepted everywhere)");

  // study
  std::uint64_t st_seed = 0;
  std::string st_dir = ".";
  std::vector<std::string> st_regimes{"lr", "ft", "projection", "proj+ft"};
  auto* study = app.add_subcommand(
      "study", "Pretrain on synthetic task A, transfer to task B under several regimes");
  study->add_option("--seed", st_seed, "Seed")->capture_default_str();
  study->add_option("--out-dir", st_dir, "Directory for the metrics CSVs")
      ->capture_default_str();
  study->add_option("--regimes", st_regimes, "Schedules to run")
      ->check(CLI::IsMember({"lr", "ft", "projection", "lr+ft", "proj+ft", "proj+proj"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (transfer->parsed()) {
      if (tr_regime.empty() && tr_two_stage.empty()) {
        throw CLI::ValidationError("transfer needs --regime or --two-stage");
      }
      if (!tr_regime.empty() && !tr_two_stage.empty() &&
          (tr_regime == "projection") != (tr_two_stage.rfind("proj", 0) == 0)) {
        throw CLI::ValidationError("--regime disagrees with the first --two-stage stage");
      }
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) {
      const VerificationReport report = run_full_suite(verify_seed, verify_n);
      char buf[200];
      for (const CheckRow& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%-4s %-36s n=%-5zu max_dev=%.3e tol=%.1e%s\n",
                      r.pass ? "PASS" : "FAIL", r.check.c_str(), r.instances,
                      r.max_deviation, r.tolerance,
                      r.expected_within ? "" : "  (negative control)");
        out << buf;
      }
      out << (report.overall_pass ? "overall: PASS\n" : "overall: FAIL\n");
      if (!verify_out.empty()) write_text(verify_out, report.to_json());
      return report.overall_pass ? kExitOk : kExitFailure;
    }

    if (params->parsed()) {
      Model model = load_model(params_model);
      if (!params_regime.empty()) prepare_regime(model, regime_from_string(params_regime));
      const ParamAudit audit = count_params(model);
      out << audit_table(audit);
      if (!params_csv.empty()) write_text(params_csv, audit.to_csv());
      return kExitOk;
    }

    if (pretrain->parsed()) {
      ArchSpec spec = parse_arch_spec(read_text(pre_arch));
      if (pre_seed) spec.seed = *pre_seed;
      const auto [train, test] = load_data(pre_data, spec.seed, true);
      TrainConfig config;
      config.stage1 = Regime::kFt;
      config.single_epochs = pre_epochs;
      config.batch_size = pre_batch;
      config.seed = spec.seed;
      config.shuffle = !pre_no_shuffle;
      config.reset_head = false;
      Model model = build_backbone(spec);
      if (model.has_head() && model.head().classes() != train.classes) {
        reset_head(model, train.classes, spec.seed);
      }
      const ExperimentResult r = run_experiment(config, std::move(model), train, test);
      print_log(out, r.log);
      if (!pre_metrics.empty()) write_metrics(pre_metrics, r.log, config);
      save_model(r.model, pre_out);
      return kExitOk;
    }

    if (transfer->parsed()) {
      TrainConfig config;
      set_combination(config, tr_two_stage.empty() ? tr_regime : tr_two_stage);
      config.single_epochs = tr_epochs;
      config.batch_size = tr_batch;
      config.seed = tr_seed;
      config.shuffle = !tr_no_shuffle;
      config.hflip = tr_hflip;
      Model model = load_model(tr_model);
      const auto [train, test] = load_data(tr_data, tr_seed, false);
      config.reset_head = tr_reset_head || !model.has_head() ||
                          model.head().classes() != train.classes;
      const ExperimentResult r = run_experiment(config, std::move(model), train, test);
      print_log(out, r.log);
      write_metrics(tr_metrics, r.log, config);
      if (!tr_out.empty()) save_model(r.model, tr_out);
      return kExitOk;
    }

    if (project->parsed()) {
      const Model model = load_model(pj_in);
      const Model projected = project_model(model);
      out << "before\n" << audit_table(count_params(model));
      out << "after\n" << audit_table(count_params(projected));
      save_model(projected, pj_out);
      return kExitOk;
    }

    if (study->parsed()) {
      StudyConfig sc;
      sc.seed = st_seed;
      sc.regimes = st_regimes;
      const StudyResult r = run_transfer_study(sc);
      const std::string prefix = st_dir + "/seed" + std::to_string(st_seed) + "_";
      write_text(prefix + "pretrain.csv", r.pretrain.to_csv());
      out << "pretrain final test_acc " << r.pretrain.final_row().test_acc << "\n";
      for (const auto& [name, log] : r.transfer) {
        write_text(prefix + name + ".csv", log.to_csv());
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-10s epoch1 %.4f  final %.4f  trainable %zu\n",
                      name.c_str(), log.epoch(1).test_acc, log.final_row().test_acc,
                      log.final_row().trainable_params);
        out << buf;
      }
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace projnet
