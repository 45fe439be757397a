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

// Transfer-learning regimes:
//
//   lr          backbone frozen, only the head trains
//   ft          every parameter trains
//   projection  project_model, then gates, node biases and the head train
//
// A schedule is either a single stage (20 epochs of Adam) or two stages
// (7 epochs of Adam, then 13 epochs of SGD with lr 1e-4 and momentum 0.9),
// each stage with its own regime. Allowed combinations: lr, ft, projection,
// lr+ft, proj+ft, proj+proj.

#ifndef PROJNET_EXPERIMENT_H_
#define PROJNET_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "projnet/autodiff.h"
#include "projnet/data.h"
#include "projnet/model.h"
#include "projnet/optimizer.h"

namespace projnet {

enum class Regime { kLr, kFt, kProjection };

const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Marks the parameters `regime` trains. Projection regimes must be applied
/// to an already projected model (see prepare_regime).
void apply_regime(Model& model, Regime regime);

/// Projects the model when entering a projection regime, then applies the
/// regime's freeze flags.
void prepare_regime(Model& model, Regime regime);

struct TrainConfig {
  Regime stage1 = Regime::kFt;
  std::optional<Regime> stage2;  // set for two-stage schedules
  std::size_t single_epochs = 20;
  std::size_t stage1_epochs = 7;
  std::size_t stage2_epochs = 13;
  AdamConfig adam;
  SgdConfig sgd{1e-4, 0.9};
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool hflip = false;    // horizontal flip with p = 0.5
  bool shuffle = true;   // seeded per-epoch permutation
  bool reset_head = false;  // fresh Glorot head instead of the backbone's
  LossKind loss = LossKind::kCrossEntropy;

  /// "lr", "ft", "projection", "lr+ft", "proj+ft" or "proj+proj".
  std::string name() const;
  std::size_t total_epochs() const;
  /// Throws ConfigError for anything outside the six combinations.
  void validate() const;
};

/// Parses one of the six combination names into `config`'s regimes.
void set_combination(TrainConfig& config, const std::string& name);

struct MetricsRow {
  std::size_t epoch = 0;
  std::string regime;
  std::size_t stage = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
  std::size_t trainable_params = 0;
  double wall_ms = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// Columns: epoch,regime,stage,train_loss,test_acc,trainable_params,wall_ms.
  /// Reals are printed with 17 significant digits.
  std::string to_csv(bool include_wall = true) const;
  const MetricsRow& final_row() const { return rows.back(); }
  const MetricsRow& epoch(std::size_t e) const;
};

struct ExperimentResult {
  Model model;
  MetricsLog log;
};

double evaluate_accuracy(const Model& model, const Dataset& data);
double evaluate_dataset_loss(const Model& model, const Dataset& data,
                             LossKind loss);

/// Row 0 evaluates the starting model (after regime preparation and the head
/// reset); rows 1..N follow each epoch.
ExperimentResult run_experiment(const TrainConfig& config, Model backbone,
                                const Dataset& train, const Dataset& test);

/// The desk-scale transfer study: pretrain on task A, then transfer to the
/// shifted task B under several regimes from the same pretrained model. Both
/// tasks share their labels, so the pretrained head is kept.
struct StudyConfig {
  std::uint64_t seed = 0;
  std::size_t n_pretrain = 10000;
  std::size_t n_pretrain_test = 1000;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t batch_size = 64;
  std::vector<std::string> regimes{"lr", "ft", "projection", "proj+ft"};
};

struct StudyResult {
  MetricsLog pretrain;
  std::vector<std::pair<std::string, MetricsLog>> transfer;

  const MetricsLog& regime(const std::string& name) const;
};

/// 2x16x16 input -> conv(8, 3x3) -> conv(16, 3x3) -> gap -> dropout(0.5)
/// -> head(8).
ArchSpec default_arch(std::uint64_t seed);

struct StudyData {
  Dataset pretrain, pretrain_test, train, test;
};
StudyData study_data(const StudyConfig& config);

StudyResult run_transfer_study(const StudyConfig& config);

}  // namespace projnet

#endif  // PROJNET_EXPERIMENT_H_
