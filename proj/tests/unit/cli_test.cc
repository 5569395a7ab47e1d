// Copyright 2026 The ifcmoe Authors
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
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "ifcmoe/textio.h"
#include "test_support.h"

namespace ifcmoe {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::scratch_dir("cli"));
    const std::string small =
        " --set corpus.synth.domains=4 --set corpus.synth.default_tokens=4000"
        " --set corpus.synth.vocab_size=300 --set embedding.dim=64 --set train.clusters=2";
    ASSERT_EQ(run("build-corpus" + small), 0);
    ASSERT_EQ(run("train --corpus runs/build-corpus-0001/corpus" + small), 0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }

  static int run(const std::string& args) {
    const std::string cmd = "cd '" + root_->string() + "' && '" IFCMOE_CLI "' " + args +
                            " > last_stdout.txt 2> last_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string stdout_text() { return read_file(*root_ / "last_stdout.txt"); }
  static std::string stderr_text() { return read_file(*root_ / "last_stderr.txt"); }

  static const std::string model_args() {
    return " --corpus runs/build-corpus-0001/corpus --model runs/train-0001/model";
  }

  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

TEST_F(CliTest, EvalKnownReport) {
  ASSERT_EQ(run("eval" + model_args() + " --policy 1,3,4 --mode known --label 3"), 0)
      << stderr_text();
  const std::string out = stdout_text();
  EXPECT_NE(out.find("perplexity"), std::string::npos);
  EXPECT_NE(out.find("audit: clean"), std::string::npos);
}

TEST_F(CliTest, EachRunGetsItsOwnDirectoryAndResultsRepeat) {
  ASSERT_EQ(run("gate" + model_args() + " --policy 2,4 --domain 2 --length 300"), 0);
  const std::string first = stdout_text();
  ASSERT_EQ(run("gate" + model_args() + " --policy 2,4 --domain 2 --length 300"), 0);
  const std::string second = stdout_text();
  EXPECT_NE(first, second);  // run directory names differ
  const fs::path a = *root_ / "runs" / "gate-0001";
  const fs::path b = *root_ / "runs" / "gate-0002";
  ASSERT_TRUE(fs::exists(a / "resolved_config.json"));
  EXPECT_EQ(read_file(a / "report.txt"), read_file(b / "report.txt"));
  EXPECT_EQ(read_file(a / "resolved_config.json"), read_file(b / "resolved_config.json"));
}

TEST_F(CliTest, GenerateWritesATrace) {
  ASSERT_EQ(run("generate" + model_args() + " --policy 1,2 --domain 1 --length 80 --tokens 6"),
            0)
      << stderr_text();
  const std::string trace = read_file(*root_ / "runs" / "generate-0001" / "trace.txt");
  EXPECT_NE(trace.find("position=80 experts="), std::string::npos);
}

TEST_F(CliTest, NiCheckPasses) {
  ASSERT_EQ(run("ni-check --corpus runs/build-corpus-0001/corpus --policies 3 --queries 2"
                " --query-length 150 --set embedding.dim=64 --set train.clusters=2"),
            0)
      << stderr_text();
  EXPECT_NE(stdout_text().find("ni-check PASS"), std::string::npos);
}

TEST_F(CliTest, StrictRefusesTheOfflinePartition) {
  EXPECT_EQ(run("gate" + model_args() +
                " --policy 1,2 --backend cluster --strict --set engine.cluster_source=offline"
                " --domain 1"),
            2);
  EXPECT_NE(stderr_text().find("strict"), std::string::npos);
  EXPECT_EQ(run("gate" + model_args() +
                " --policy 1,2 --backend cluster --no-strict --set engine.cluster_source=offline"
                " --domain 1"),
            0);
}

TEST_F(CliTest, DistinctExitCodes) {
  EXPECT_EQ(run("eval" + model_args() + " --policy 1,2 --mode known --label 3"), 3);
  EXPECT_EQ(run("eval" + model_args() + " --policy 1 --set gate.k=0"), 2);
  EXPECT_EQ(run("eval" + model_args() + " --policy 1 --set gate.nope=1"), 2);
  EXPECT_EQ(run("eval --bogus-flag"), 2);
}

TEST_F(CliTest, StaleModelIsRefused) {
  ASSERT_EQ(run("build-corpus --set corpus.synth.domains=4 --set corpus.synth.seed=99"
                " --set corpus.synth.default_tokens=4000 --set corpus.synth.vocab_size=300"),
            0);
  EXPECT_EQ(run("eval --corpus runs/build-corpus-0002/corpus --model runs/train-0001/model"
                " --policy 1"),
            5);
  EXPECT_NE(stderr_text().find("regenerate"), std::string::npos);
}

}  // namespace
}  // namespace ifcmoe
