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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "projnet/cli.h"
#include "projnet/model.h"
#include "projnet/serialize.h"

namespace projnet {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("projnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "arch.json")
        << R"({"input_channels": 2, "input_shape": [16, 16], "seed": 4,
              "layers": [{"type": "conv", "filters": 2, "kernel": [3, 3]},
                         {"type": "gap"}, {"type": "head", "classes": 8}]})";
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const char* name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"verify", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"params"}).code, kExitUsage);
  EXPECT_EQ(run({"transfer", "--model", "m", "--metrics", "x.csv"}).code, kExitUsage);
  EXPECT_EQ(run({"transfer", "--model", "m", "--metrics", "x.csv", "--regime", "bitfit"}).code,
            kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(Cli, RuntimeFailuresExitOne) {
  const Result r = run({"params", "--model", path("missing.pnet")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  std::ofstream(path("bad.pnet")) << "PNETnonsense";
  EXPECT_EQ(run({"project", "--model", path("bad.pnet"), "--out", path("o.pnet")}).code,
            kExitFailure);
  EXPECT_FALSE(fs::exists(path("o.pnet")));
}

TEST_F(Cli, VerifyWritesReport) {
  const Result r = run({"verify", "--seed", "7", "--instances", "20", "--out", path("r.json")});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("overall: PASS"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(j["overall_pass"], true);
  EXPECT_EQ(j["seed"], 7);
}

TEST_F(Cli, ParamsPrintsProjectedAudit) {
  ArchSpec spec;
  spec.input_channels = 32;
  spec.input_shape = {4, 4};
  spec.layers = {LayerSpec::conv(64, {3, 3})};
  save_model(build_backbone(spec), path("wide.pnet"));
  const Result ft = run({"params", "--model", path("wide.pnet")});
  EXPECT_EQ(ft.code, kExitOk);
  EXPECT_NE(ft.out.find("18496"), std::string::npos) << ft.out;
  const Result pj = run({"params", "--model", path("wide.pnet"), "--regime", "projection",
                         "--csv", path("audit.csv"), "--seed", "1"});
  EXPECT_EQ(pj.code, kExitOk);
  EXPECT_NE(pj.out.find("2112"), std::string::npos) << pj.out;
  EXPECT_EQ(slurp(path("audit.csv")), "layer,nodes,trainable,frozen\n0,64,2112,18432\n");
}

TEST_F(Cli, PretrainProjectTransfer) {
  ASSERT_EQ(run({"pretrain", "--arch", path("arch.json"), "--data", "synthetic", "--n-train",
                 "32", "--n-test", "16", "--epochs", "1", "--out", path("m.pnet"),
                 "--metrics", path("pre.csv")})
                .code,
            kExitOk);
  const Result pj = run({"project", "--model", path("m.pnet"), "--out", path("p.pnet")});
  ASSERT_EQ(pj.code, kExitOk);
  EXPECT_NE(pj.out.find("before"), std::string::npos);
  const Model projected = load_model(path("p.pnet"));
  EXPECT_TRUE(std::holds_alternative<ProjectedNode>(
      std::get<NodeLayer>(projected.layers[0]).nodes[0]));

  const Result tr = run({"transfer", "--model", path("m.pnet"), "--regime", "projection",
                         "--data", "synthetic", "--n-train", "16", "--n-test", "16",
                         "--metrics", path("t.csv"), "--seed", "3"});
  ASSERT_EQ(tr.code, kExitOk) << tr.err;
  const std::string csv = slurp(path("t.csv"));
  EXPECT_EQ(csv.rfind("epoch,regime,stage,train_loss,test_acc,trainable_params,wall_ms\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 21);
  const auto meta = nlohmann::json::parse(slurp(path("t.csv.json")));
  EXPECT_EQ(meta["shuffle"], true);
  EXPECT_EQ(meta["epochs"], 20);
  EXPECT_EQ(meta["reset_head"], false);

  const Result two = run({"transfer", "--model", path("m.pnet"), "--two-stage", "proj+ft",
                          "--data", "synthetic", "--n-train", "16", "--n-test", "16",
                          "--metrics", path("t2.csv"), "--no-shuffle", "--reset-head", "--out",
                          path("t2.pnet")});
  ASSERT_EQ(two.code, kExitOk) << two.err;
  EXPECT_NE(slurp(path("t2.csv")).find("20,proj+ft,2,"), std::string::npos);
  const auto meta2 = nlohmann::json::parse(slurp(path("t2.csv.json")));
  EXPECT_EQ(meta2["shuffle"], false);
  EXPECT_EQ(meta2["reset_head"], true);
  EXPECT_TRUE(fs::exists(path("t2.pnet")));
}

TEST_F(Cli, TransferIsReproducible) {
  ASSERT_EQ(run({"pretrain", "--arch", path("arch.json"), "--n-train", "16", "--n-test",
                 "16", "--epochs", "1", "--out", path("m.pnet")})
                .code,
            kExitOk);
  for (const char* name : {"a.csv", "b.csv"}) {
    ASSERT_EQ(run({"transfer", "--model", path("m.pnet"), "--regime", "ft", "--epochs", "2",
                   "--n-train", "16", "--n-test", "16", "--hflip", "--metrics", path(name)})
                  .code,
              kExitOk);
  }
  auto strip = [](const std::string& csv) {
    std::string out;
    std::istringstream is(csv);
    for (std::string line; std::getline(is, line);) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  EXPECT_EQ(strip(slurp(path("a.csv"))), strip(slurp(path("b.csv"))));
}

}  // namespace
}  // namespace projnet
