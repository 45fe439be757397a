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

#include "projnet/experiment.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

#include "projnet/errors.h"
#include "projnet/projection.h"
#include "projnet/random.h"

namespace projnet {

namespace {

struct Stage {
  Regime regime;
  std::size_t epochs;
  bool adam;
};

std::vector<Stage> stages_of(const TrainConfig& c) {
  if (!c.stage2) return {{c.stage1, c.single_epochs, true}};
  return {{c.stage1, c.stage1_epochs, true}, {*c.stage2, c.stage2_epochs, false}};
}

std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

const char* to_string(Regime r) {
  switch (r) {
    case Regime::kLr: return "lr";
    case Regime::kFt: return "ft";
    case Regime::kProjection: return "projection";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  if (s == "lr") return Regime::kLr;
  if (s == "ft") return Regime::kFt;
  if (s == "projection" || s == "proj") return Regime::kProjection;
  throw ConfigError("unknown regime '" + s + "' (expected lr, ft or projection)");
}

void apply_regime(Model& model, Regime regime) {
  switch (regime) {
    case Regime::kFt:
      set_all_trainable(model, true);
      return;
    case Regime::kLr:
      for (ParamBlock& b : param_blocks(model)) {
        b.trainable.set(b.cls == ParamClass::kHeadWeight ||
                        b.cls == ParamClass::kHeadBias);
      }
      return;
    case Regime::kProjection:
      for (ParamBlock& b : param_blocks(model)) {
        b.trainable.set(b.cls == ParamClass::kGate || b.cls == ParamClass::kBias ||
                        b.cls == ParamClass::kHeadWeight ||
                        b.cls == ParamClass::kHeadBias);
      }
      return;
  }
}

void prepare_regime(Model& model, Regime regime) {
  if (regime == Regime::kProjection) model = project_model(std::move(model));
  apply_regime(model, regime);
}

std::string TrainConfig::name() const {
  if (!stage2) return to_string(stage1);
  const std::string first = stage1 == Regime::kProjection ? "proj" : to_string(stage1);
  const std::string second = *stage2 == Regime::kProjection ? "proj" : to_string(*stage2);
  return first + "+" + second;
}

std::size_t TrainConfig::total_epochs() const {
  return stage2 ? stage1_epochs + stage2_epochs : single_epochs;
}

void TrainConfig::validate() const {
  if (stage2) {
    const bool ok = (stage1 == Regime::kLr && *stage2 == Regime::kFt) ||
                    (stage1 == Regime::kProjection && *stage2 == Regime::kFt) ||
                    (stage1 == Regime::kProjection && *stage2 == Regime::kProjection);
    if (!ok) {
      throw ConfigError("two-stage schedule '" + name() +
                        "' is not one of lr+ft, proj+ft, proj+proj");
    }
    if (stage1_epochs == 0 || stage2_epochs == 0) {
      throw ConfigError("every stage needs at least one epoch");
    }
  } else if (single_epochs == 0) {
    throw ConfigError("epochs must be at least 1");
  }
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
}

void set_combination(TrainConfig& config, const std::string& name) {
  if (name == "lr+ft") {
    config.stage1 = Regime::kLr;
    config.stage2 = Regime::kFt;
  } else if (name == "proj+ft" || name == "projection+ft") {
    config.stage1 = Regime::kProjection;
    config.stage2 = Regime::kFt;
  } else if (name == "proj+proj" || name == "projection+projection") {
    config.stage1 = Regime::kProjection;
    config.stage2 = Regime::kProjection;
  } else {
    config.stage1 = regime_from_string(name);
    config.stage2.reset();
  }
}

std::string MetricsLog::to_csv(bool include_wall) const {
  std::string out = "epoch,regime,stage,train_loss,test_acc,trainable_params";
  out += include_wall ? ",wall_ms\n" : "\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.epoch) + "," + r.regime + "," + std::to_string(r.stage) +
           "," + fmt("%.17g", r.train_loss) + "," + fmt("%.17g", r.test_acc) + "," +
           std::to_string(r.trainable_params);
    if (include_wall) out += "," + fmt("%.3f", r.wall_ms);
    out += "\n";
  }
  return out;
}

const MetricsRow& MetricsLog::epoch(std::size_t e) const {
  for (const MetricsRow& r : rows) {
    if (r.epoch == e) return r;
  }
  throw ConfigError("no metrics row for epoch " + std::to_string(e));
}

double evaluate_accuracy(const Model& model, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor out = forward_sample(model, data.images[i], {}, i);
    correct += static_cast<int>(argmax(out)) == data.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_dataset_loss(const Model& model, const Dataset& data,
                             LossKind loss) {
  Batch batch;
  batch.inputs = data.images;
  batch.labels = data.labels;
  return evaluate_loss(model, batch, loss);
}

ExperimentResult run_experiment(const TrainConfig& config, Model backbone,
                                const Dataset& train, const Dataset& test) {
  config.validate();
  train.validate();
  test.validate();
  using Clock = std::chrono::steady_clock;

  Model model = std::move(backbone);
  if (config.reset_head) {
    reset_head(model, train.classes, config.seed);
  } else if (!model.has_head() || model.head().classes() != train.classes) {
    throw ConfigError("model head does not match the dataset's class count");
  }
  const std::vector<Stage> stages = stages_of(config);
  prepare_regime(model, stages.front().regime);

  ExperimentResult result;
  result.log.seed = config.seed;
  result.log.shuffle = config.shuffle;
  const std::string label = config.name();
  {
    const auto t0 = Clock::now();
    MetricsRow row;
    row.epoch = 0;
    row.regime = label;
    row.stage = 1;
    row.train_loss = evaluate_dataset_loss(model, train, config.loss);
    row.test_acc = evaluate_accuracy(model, test);
    row.trainable_params = count_params(model).trainable;
    row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    result.log.rows.push_back(row);
  }

  std::vector<std::size_t> order(train.size());
  std::size_t epoch = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const Stage& stage = stages[s];
    if (s > 0) prepare_regime(model, stage.regime);
    Optimizer opt = stage.adam ? Optimizer(config.adam) : Optimizer(config.sgd);
    const std::size_t trainable = count_params(model).trainable;

    for (std::size_t e = 0; e < stage.epochs; ++e) {
      ++epoch;
      const auto t0 = Clock::now();
      std::iota(order.begin(), order.end(), std::size_t{0});
      if (config.shuffle) {
        Rng rng(derive_seed(config.seed, {0x5f1e, epoch}));
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[rng.below(i)]);
        }
      }
      double loss_sum = 0.0;
      std::size_t batch_index = 0;
      for (std::size_t start = 0; start < order.size();
           start += config.batch_size, ++batch_index) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        Batch batch;
        for (std::size_t i = start; i < end; ++i) {
          const std::size_t idx = order[i];
          if (config.hflip &&
              Rng(derive_seed(config.seed, {0xf11b, epoch, idx})).bernoulli(0.5)) {
            batch.inputs.push_back(hflip(train.images[idx]));
          } else {
            batch.inputs.push_back(train.images[idx]);
          }
          batch.labels.push_back(train.labels[idx]);
        }
        const ForwardOptions options{
            true, derive_seed(config.seed, {0xd509, epoch, batch_index})};
        BackwardResult br = backward(model, batch, config.loss, options);
        opt.step(model, br.tape);
        loss_sum += br.loss * static_cast<double>(end - start);
      }

      MetricsRow row;
      row.epoch = epoch;
      row.regime = label;
      row.stage = s + 1;
      row.train_loss = loss_sum / static_cast<double>(train.size());
      row.test_acc = evaluate_accuracy(model, test);
      row.trainable_params = trainable;
      row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      result.log.rows.push_back(row);
    }
  }
  result.model = std::move(model);
  return result;
}

const MetricsLog& StudyResult::regime(const std::string& name) const {
  for (const auto& [n, log] : transfer) {
    if (n == name) return log;
  }
  throw ConfigError("study has no regime '" + name + "'");
}

ArchSpec default_arch(std::uint64_t seed) {
  ArchSpec spec;
  spec.input_channels = 2;
  spec.input_shape = {kSyntheticSide, kSyntheticSide};
  spec.seed = seed;
  spec.layers = {LayerSpec::conv(8, {3, 3}), LayerSpec::conv(16, {3, 3}),
                 LayerSpec::gap(), LayerSpec::dropout(0.5),
                 LayerSpec::head(kSyntheticClasses)};
  return spec;
}

StudyData study_data(const StudyConfig& c) {
  StudyData d;
  d.pretrain = gen_synthetic(SyntheticTask::kA, c.n_pretrain,
                             derive_seed(c.seed, {0xa1}), "pretrain");
  d.pretrain_test = gen_synthetic(SyntheticTask::kA, c.n_pretrain_test,
                                  derive_seed(c.seed, {0xa2}), "test");
  d.train = gen_synthetic(SyntheticTask::kB, c.n_train, derive_seed(c.seed, {0xb1}),
                          "train");
  d.test = gen_synthetic(SyntheticTask::kB, c.n_test, derive_seed(c.seed, {0xb2}),
                         "test");
  return d;
}

StudyResult run_transfer_study(const StudyConfig& c) {
  const StudyData data = study_data(c);
  StudyResult result;

  TrainConfig pre;
  pre.stage1 = Regime::kFt;
  pre.seed = derive_seed(c.seed, {0x9e7});
  pre.batch_size = c.batch_size;
  pre.reset_head = false;
  ExperimentResult pretrained = run_experiment(
      pre, build_backbone(default_arch(derive_seed(c.seed, {0xbac}))),
      data.pretrain, data.pretrain_test);
  result.pretrain = std::move(pretrained.log);

  for (const std::string& name : c.regimes) {
    TrainConfig tc;
    set_combination(tc, name);
    tc.seed = derive_seed(c.seed, {0x7a5});
    tc.batch_size = c.batch_size;
    ExperimentResult r = run_experiment(tc, pretrained.model, data.train, data.test);
    result.transfer.emplace_back(name, std::move(r.log));
  }
  return result;
}

}  // namespace projnet
