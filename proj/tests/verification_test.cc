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


#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "projnet/errors.h"
#include "projnet/verification.h"

namespace projnet {
namespace {

TEST(Verification, PositiveChecksPass) {
  for (const CheckRow& row :
       {check_theorem1(50, 7), check_theorem2(50, 7), check_separability(50, 7),
        check_gamma_placement(50, 7), check_projection_identity(20, 7),
        check_projection_idempotence(7), check_inherited_training(20, 7)}) {
    EXPECT_TRUE(row.pass) << row.check;
    EXPECT_TRUE(row.within_tolerance) << row.check;
    EXPECT_GE(row.max_deviation, 0.0);
  }
}

TEST(Verification, NegativeControlsExceedTolerance) {
  const CheckRow sep = check_separability_control(20, 7);
  EXPECT_FALSE(sep.within_tolerance);
  EXPECT_FALSE(sep.expected_within);
  EXPECT_TRUE(sep.pass);
  const CheckRow grad = check_gradient_control(12, 7);
  EXPECT_FALSE(grad.within_tolerance);
  EXPECT_TRUE(grad.pass);
}

TEST(Verification, GradientsWithinTolerance) {
  const CheckRow row = check_gradients(60, 3);
  EXPECT_EQ(row.instances, 60u);
  EXPECT_LE(row.max_deviation, kGradientTolerance);
  EXPECT_TRUE(row.pass);
}

TEST(Verification, BijectionReportsStrictnessWitness) {
  const CheckRow row = check_theorem1(10, 1);
  bool witness = false;
  for (const auto& [key, value] : row.details) witness |= key.find("witness") != std::string::npos;
  EXPECT_TRUE(witness);
}

TEST(Verification, ZeroInstancesRejected) {
  EXPECT_THROW(check_theorem1(0, 1), ConfigError);
  EXPECT_THROW(check_theorem2(0, 1), ConfigError);
  EXPECT_THROW(check_separability(0, 1), ConfigError);
  EXPECT_THROW(check_gamma_placement(0, 1), ConfigError);
  EXPECT_THROW(check_gradients(0, 1), ConfigError);
}

TEST(Verification, RowPassSemantics) {
  CheckRow row;
  row.within_tolerance = true;
  row.finish();
  EXPECT_TRUE(row.pass);
  row.expected_within = false;
  row.finish();
  EXPECT_FALSE(row.pass);
}

TEST(Verification, SuiteIsDeterministicAndConjunctive) {
  const VerificationReport a = run_full_suite(11, 30, 60);
  const VerificationReport b = run_full_suite(11, 30, 60);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_TRUE(a.overall_pass);
  EXPECT_EQ(a.rows.size(), 10u);

  const auto j = nlohmann::json::parse(a.to_json());
  EXPECT_EQ(j["seed"], 11);
  EXPECT_EQ(j["overall_pass"], true);
  EXPECT_EQ(j["rows"].size(), 10u);

  VerificationReport broken = a;
  broken.rows[3].pass = false;
  bool all = true;
  for (const CheckRow& r : broken.rows) all = all && r.pass;
  EXPECT_FALSE(all);
  EXPECT_NO_THROW(a.row("gradient_fd"));
  EXPECT_THROW(a.row("nope"), ConfigError);
}

}  // namespace
}  // namespace projnet
