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

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / ("remnet_cli_" + std::to_string(::getpid())));
    fs::create_directories(*dir_);
    ASSERT_EQ(run("synth --count 400 --seed 5 --out " + path("d.csv")).code, 0);
    ASSERT_EQ(run("train --data " + path("d.csv") + " --split paper_default --epochs 2 --seed 3 --out " +
                  path("m.remn"))
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }

  // stdout is captured; stderr is discarded.
  static Result run(const std::string& args) {
    const std::string cmd = std::string(REMNET_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("train --help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("train --data " + path("d.csv") + " --out " + path("x.remn") + " --no-such-flag").code, 1);
  EXPECT_EQ(run("eval --data " + path("d.csv") + " --model " + path("m.remn") + " --split sideways").code, 1);
  EXPECT_EQ(run("--threads 0 eval --data " + path("d.csv") + " --model " + path("m.remn")).code, 1);
  EXPECT_EQ(run("train --data " + path("d.csv") + " --out " + path("x.remn") + " --filters 6 --reduction 4").code, 1);
  EXPECT_EQ(run("eval --data " + path("missing.csv") + " --model " + path("m.remn")).code, 2);

  std::ofstream(path("junk.bin")) << "not a model";
  EXPECT_EQ(run("eval --data " + path("d.csv") + " --model " + path("junk.bin")).code, 2);
  std::ofstream(path("broken.csv")) << "measured_range,true_range\n1.0,abc\n";
  EXPECT_EQ(run("eval --data " + path("broken.csv") + " --model " + path("m.remn")).code, 2);
}

TEST_F(Cli, TrainIsByteReproducible) {
  const std::string base = "train --data " + path("d.csv") + " --split paper_default --epochs 2 --out ";
  ASSERT_EQ(run(base + path("again.remn") + " --seed 3").code, 0);
  ASSERT_EQ(run("--threads 2 " + base + path("threads.remn") + " --seed 3").code, 0);
  EXPECT_EQ(slurp(path("m.remn")), slurp(path("again.remn")));
  EXPECT_EQ(slurp(path("m.remn")), slurp(path("threads.remn")));
  ASSERT_EQ(run(base + path("other.remn") + " --seed 4").code, 0);
  EXPECT_NE(slurp(path("m.remn")), slurp(path("other.remn")));
}

TEST_F(Cli, ManifestWritten) {
  const json m = json::parse(slurp(path("m.remn.manifest.json")));
  EXPECT_EQ(m["subcommand"], "train");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["threads"], 1);
  EXPECT_EQ(m["options"]["--epochs"], "2");
  EXPECT_EQ(m["options"]["--split"], "paper_default");
  EXPECT_FALSE(m["version"].get<std::string>().empty());
  EXPECT_FALSE(m["argv"].empty());
}

TEST_F(Cli, EvalPrintsJsonReport) {
  const auto r = run("eval --data " + path("d.csv") + " --split paper_default --model " + path("m.remn") +
                     " --report-csv " + path("r.csv") + " --hist-csv " + path("h.csv"));
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_GT(j["count_nlos"].get<int>() + j["count_los"].get<int>(), 0);
  EXPECT_LT(j["mae_nlos"].get<double>(), 1.0);
  EXPECT_EQ(slurp(path("r.csv")).rfind("metric,value\n", 0), 0u);
  EXPECT_EQ(slurp(path("h.csv")).rfind("bin_left,count\n", 0), 0u);
  EXPECT_TRUE(fs::exists(path("r.csv.manifest.json")));
}

TEST_F(Cli, QatThenEvalTracksFloat) {
  ASSERT_EQ(run("quantize qat --data " + path("d.csv") + " --split paper_default --model " + path("m.remn") +
                " --epochs 1 --out " + path("m.remq"))
                .code,
            0);
  const std::string data = " --data " + path("d.csv") + " --split paper_default --model ";
  const auto f = run("eval" + data + path("m.remn"));
  const auto q = run("eval" + data + path("m.remq"));
  ASSERT_EQ(f.code, 0);
  ASSERT_EQ(q.code, 0);
  const double mf = json::parse(f.out)["mae_all"];
  const double mq = json::parse(q.out)["mae_all"];
  EXPECT_NEAR(mq, mf, 0.02);
  EXPECT_LE(fs::file_size(path("m.remq")), fs::file_size(path("m.remn")) * 35 / 100);

  ASSERT_EQ(run("quantize fp16 --model " + path("m.remn") + " --out " + path("h.remn")).code, 0);
  const auto h = run("eval" + data + path("h.remn"));
  ASSERT_EQ(h.code, 0);
  EXPECT_NEAR(json::parse(h.out)["mae_all"].get<double>(), mf, 1e-3);
}

TEST_F(Cli, InputsAreNotModified) {
  const std::string before_data = slurp(path("d.csv"));
  const std::string before_model = slurp(path("m.remn"));
  ASSERT_EQ(run("eval --data " + path("d.csv") + " --model " + path("m.remn")).code, 0);
  ASSERT_EQ(run("pca --data " + path("d.csv") + " --out " + path("p.csv")).code, 0);
  ASSERT_EQ(run("import --data " + path("d.csv") + " --out " + path("copy.csv")).code, 0);
  EXPECT_EQ(slurp(path("d.csv")), before_data);
  EXPECT_EQ(slurp(path("m.remn")), before_model);
  EXPECT_EQ(slurp(path("copy.csv")), before_data);
}

TEST_F(Cli, ConfigFileYieldsToFlags) {
  std::ofstream(path("run.cfg")) << "# defaults\nepochs = 1\nsplit=paper_default\nseed=3\n";
  ASSERT_EQ(run("--config " + path("run.cfg") + " train --data " + path("d.csv") + " --epochs 2 --out " +
                path("cfg.remn"))
                .code,
            0);
  EXPECT_EQ(slurp(path("cfg.remn")), slurp(path("m.remn")));
  const json m = json::parse(slurp(path("cfg.remn.manifest.json")));
  EXPECT_EQ(m["options"]["--epochs"], "2");

  std::ofstream(path("bad.cfg")) << "epochz = 1\n";
  EXPECT_EQ(run("--config " + path("bad.cfg") + " train --data " + path("d.csv") + " --out " + path("y.remn")).code,
            1);
}

TEST_F(Cli, LocateAndBench) {
  const auto l = run("locate --data " + path("d.csv") + " --model " + path("m.remn") + " --epochs 20 --out " +
                     path("loc.csv") + " --write-scenario " + path("scene.csv"));
  ASSERT_EQ(l.code, 0);
  const json lj = json::parse(l.out);
  EXPECT_EQ(lj["epochs"], 20);
  EXPECT_TRUE(lj["mitigated"].get<bool>());

  // Replaying the saved scenario reproduces the numbers.
  const auto again = run("locate --scenario " + path("scene.csv") + " --cirs " + path("scene.csv.cirs.csv") +
                         " --model " + path("m.remn"));
  ASSERT_EQ(again.code, 0);
  EXPECT_DOUBLE_EQ(json::parse(again.out)["mitigated_position_mae"].get<double>(),
                   lj["mitigated_position_mae"].get<double>());

  EXPECT_EQ(run("locate --scenario " + path("scene.csv") + " --model " + path("m.remn")).code, 1);

  const auto b = run("bench --model " + path("m.remn") + " --iters 20 --warmup 2 --variants float64,float32,int8");
  ASSERT_EQ(b.code, 0);
  const json bj = json::parse(b.out);
  ASSERT_EQ(bj.size(), 3u);
  EXPECT_EQ(bj[2]["variant"], "int8");
  EXPECT_EQ(run("bench --model " + path("m.remn") + " --iters 0").code, 1);
}

}  // namespace
