// Copyright 2026 The specloss Authors
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

// Drives the built command-line tool in a scratch directory.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "specloss/corpus.hpp"
#include "specloss/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& Scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "specloss_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run Cli(const std::string& args, const std::string& env = "") {
  const fs::path out = Scratch() / "stdout.txt", err = Scratch() / "stderr.txt";
  const std::string cmd = env + " \"" SPECLOSS_CLI_PATH "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  return {WEXITSTATUS(raw), Slurp(out), Slurp(err)};
}

std::string P(const std::string& name) { return "\"" + (Scratch() / name).string() + "\""; }

int CountLines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

// Small corpus shared by the training-related cases.
const std::string& SmallCorpus() {
  static const std::string path = [] {
    const Run r = Cli("gen-corpus --out " + P("small") +
                      " --train 2 --val 1 --test 1 --duration 1 --seed 5");
    REQUIRE(r.status == 0);
    return P("small");
  }();
  return path;
}

}  // namespace

TEST_CASE("gen-corpus defaults", "[cli]") {
  const Run r = Cli("gen-corpus --out " + P("default"));
  REQUIRE(r.status == 0);
  const std::string manifest = Slurp(Scratch() / "default" / "manifest.csv");
  CHECK(CountLines(manifest) == 61);
  CHECK(manifest.rfind("id,clean_path,noise_path,snr_db\n", 0) == 0);
}

TEST_CASE("gen-corpus is reproducible and accepts empty splits", "[cli]") {
  REQUIRE(Cli("gen-corpus --out " + P("a") + " --train 2 --val 1 --test 0 --duration 1").status == 0);
  REQUIRE(Cli("gen-corpus --out " + P("b") + " --train 2 --val 1 --test 0 --duration 1").status == 0);
  for (const auto& e : fs::recursive_directory_iterator(Scratch() / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), Scratch() / "a");
    CHECK(Slurp(e.path()) == Slurp(Scratch() / "b" / rel));
  }
  REQUIRE(Cli("gen-corpus --out " + P("empty") + " --train 0 --val 1 --test 0 --duration 1").status == 0);
  CHECK(CountLines(Slurp(Scratch() / "empty" / "manifest.csv")) == 2);

  const Run again = Cli("gen-corpus --out " + P("a"));
  CHECK(again.status != 0);
  CHECK(CountLines(again.err) == 1);
}

TEST_CASE("SPECLOSS_SEED is the fallback seed", "[cli]") {
  REQUIRE(Cli("gen-corpus --out " + P("env7") + " --train 1 --val 0 --test 0 --duration 1",
              "SPECLOSS_SEED=7").status == 0);
  REQUIRE(Cli("gen-corpus --out " + P("flag7") + " --train 1 --val 0 --test 0 --duration 1 --seed 7")
              .status == 0);
  REQUIRE(Cli("gen-corpus --out " + P("flag8") + " --train 1 --val 0 --test 0 --duration 1 --seed 8")
              .status == 0);
  const std::string wav = "train/clean/train_0000.wav";
  CHECK(Slurp(Scratch() / "env7" / wav) == Slurp(Scratch() / "flag7" / wav));
  CHECK(Slurp(Scratch() / "env7" / wav) != Slurp(Scratch() / "flag8" / wav));
  CHECK(Cli("gen-corpus --out " + P("envbad"), "SPECLOSS_SEED=abc").status != 0);
}

TEST_CASE("train writes a checkpoint and a log", "[cli]") {
  const Run r = Cli("train --corpus " + SmallCorpus() +
                    " --loss cmae --epochs 3 --quiet --out " + P("cmae.ckpt"));
  REQUIRE(r.status == 0);
  CHECK(fs::exists(Scratch() / "cmae.ckpt"));
  const std::string log = Slurp(Scratch() / "cmae.ckpt.log.csv");
  CHECK(log.rfind("epoch,train_loss,val_metric\n", 0) == 0);
  CHECK(CountLines(log) == 4);

  const Run again = Cli("train --corpus " + SmallCorpus() +
                        " --loss cmae --epochs 3 --quiet --out " + P("cmae2.ckpt"));
  REQUIRE(again.status == 0);
  CHECK(Slurp(Scratch() / "cmae2.ckpt.log.csv") == log);
  CHECK(Slurp(Scratch() / "cmae2.ckpt") == Slurp(Scratch() / "cmae.ckpt"));
}

TEST_CASE("train argument errors", "[cli]") {
  const Run bogus = Cli("train --corpus " + SmallCorpus() + " --loss bogus --out " + P("x.ckpt"));
  CHECK(bogus.status != 0);
  CHECK(CountLines(bogus.err) == 1);
  for (const char* name : {"magMSE", "cMSE", "magMAE", "cMAE", "LSD", "PLSD", "wLSD", "wPLSD",
                           "magComp", "cComp", "SNR", "SDR", "magCorr", "cCorr", "SDW",
                           "weightedMSE", "weightedCMSE"}) {
    CHECK(bogus.err.find(name) != std::string::npos);
  }
  const Run beta = Cli("train --corpus " + SmallCorpus() +
                       " --loss magComp,cComp --beta 1.5 --out " + P("x.ckpt"));
  CHECK(beta.status != 0);
  CHECK(beta.err.find("beta") != std::string::npos);
  CHECK_FALSE(fs::exists(Scratch() / "x.ckpt"));
  CHECK_FALSE(fs::exists(Scratch() / "x.ckpt.log.csv"));
}

TEST_CASE("config file supplies flags", "[cli]") {
  {
    std::ofstream cfg(Scratch() / "train.cfg");
    cfg << "# training defaults\nloss = magMSE\nepochs = 2\nquiet = true\n";
  }
  const Run r = Cli("--config " + P("train.cfg") + " train --corpus " + SmallCorpus() +
                    " --epochs 1 --out " + P("cfg.ckpt"));
  REQUIRE(r.status == 0);
  CHECK(r.out.find("magMSE") != std::string::npos);
  CHECK(CountLines(Slurp(Scratch() / "cfg.ckpt.log.csv")) == 2);
  {
    std::ofstream cfg(Scratch() / "bad.cfg");
    cfg << "no_such_flag = 3\n";
  }
  CHECK(Cli("--config " + P("bad.cfg") + " train --corpus " + SmallCorpus() + " --out " +
            P("bad.ckpt"))
            .status != 0);
}

TEST_CASE("sweep", "[cli]") {
  const Run r = Cli("sweep --corpus " + SmallCorpus() +
                    " --param beta --values 0,0.5,1,0.5 --loss-pair magComp,cComp --epochs 1"
                    " --quiet --out " + P("sweep.csv"));
  REQUIRE(r.status == 0);
  CHECK(r.err.find("duplicate") != std::string::npos);
  const std::string csv = Slurp(Scratch() / "sweep.csv");
  CHECK(csv.rfind("param_value,val_metric,best_epoch\n", 0) == 0);
  CHECK(CountLines(csv) == 4);
  CHECK(r.out.find("argmax beta=") != std::string::npos);

  const Run empty = Cli("sweep --corpus " + SmallCorpus() +
                        " --param beta --values '' --loss-pair magComp,cComp");
  CHECK(empty.status == 2);
  const Run lambda = Cli("sweep --corpus " + SmallCorpus() +
                         " --param lambda --values 0.3,0.6 --epochs 1 --out " + P("lambda.csv"));
  REQUIRE(lambda.status == 0);
  CHECK(CountLines(Slurp(Scratch() / "lambda.csv")) == 3);
}

TEST_CASE("enhance", "[cli]") {
  REQUIRE(Cli("init-ckpt --identity --out " + P("identity.ckpt")).status == 0);
  const std::string noisy = (fs::path(SmallCorpus().substr(1, SmallCorpus().size() - 2)) /
                             "test" / "clean" / "test_0000.wav").string();
  REQUIRE(Cli("enhance --ckpt " + P("identity.ckpt") + " --in \"" + noisy + "\" --out " +
              P("identity.wav")).status == 0);
  const auto in = specloss::LoadWav(noisy);
  const auto out = specloss::LoadWav(Scratch() / "identity.wav");
  REQUIRE(in.size() == out.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(std::abs(in.samples[i] - out.samples[i]) <= 1.0 / 32768.0);
  }

  REQUIRE(Cli("train --corpus " + SmallCorpus() + " --epochs 1 --quiet --out " + P("m.ckpt")).status == 0);
  REQUIRE(Cli("enhance --ckpt " + P("m.ckpt") + " --in \"" + noisy + "\" --out " + P("off.wav")).status == 0);
  REQUIRE(Cli("enhance --ckpt " + P("m.ckpt") + " --in \"" + noisy + "\" --out " + P("on.wav") +
              " --streaming").status == 0);
  CHECK(Slurp(Scratch() / "off.wav") == Slurp(Scratch() / "on.wav"));

  const Run missing = Cli("enhance --ckpt " + P("nope.ckpt") + " --in \"" + noisy + "\" --out " +
                          P("nope.wav"));
  CHECK(missing.status != 0);
  CHECK(CountLines(missing.err) == 1);
  CHECK_FALSE(fs::exists(Scratch() / "nope.wav"));
  const Run mismatch = Cli("enhance --ckpt " + P("m.ckpt") + " --preset paper --in \"" + noisy +
                           "\" --out " + P("mm.wav"));
  CHECK(mismatch.status != 0);
}

TEST_CASE("evaluate", "[cli]") {
  REQUIRE(Cli("init-ckpt --out " + P("e.ckpt")).status == 0);
  const Run r = Cli("evaluate --ckpt " + P("e.ckpt") + " --corpus " + SmallCorpus() + " --split test");
  REQUIRE(r.status == 0);
  CHECK(r.out.find(",si_sdr_noisy,") != std::string::npos);
  CHECK(r.out.find("mean,si_sdr,") != std::string::npos);
  REQUIRE(Cli("gen-corpus --out " + P("notest") + " --train 1 --val 1 --test 0 --duration 1").status == 0);
  const Run empty = Cli("evaluate --ckpt " + P("e.ckpt") + " --corpus " + P("notest") +
                        " --split test --out " + P("empty.csv"));
  CHECK(empty.status == 2);
  CHECK_FALSE(fs::exists(Scratch() / "empty.csv"));
}

TEST_CASE("distributions", "[cli]") {
  REQUIRE(Cli("gen-corpus --out " + P("minute") + " --train 20 --val 0 --test 0").status == 0);
  CHECK(Cli("distributions --corpus " + P("minute") + " --minutes 0.5").status == 2);
  const Run r = Cli("distributions --corpus " + P("minute") + " --minutes 1 --out " + P("hist.csv"));
  REQUIRE(r.status == 0);
  std::istringstream csv(Slurp(Scratch() / "hist.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "domain,bin_center,count");
  std::map<std::string, long> totals;
  while (std::getline(csv, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    totals[line.substr(0, a)] += std::stol(line.substr(b + 1));
  }
  // 20 clips x 189 frames x 257 bins.
  REQUIRE(totals.size() == 3);
  for (const auto& [domain, count] : totals) CHECK(count == 20L * 189 * 257);
}
