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

// Command-line front end: corpus generation, training, beta/lambda sweeps,
// enhancement, evaluation and spectral distribution analysis.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specloss/checkpoint.hpp"
#include "specloss/corpus.hpp"
#include "specloss/errors.hpp"
#include "specloss/eval.hpp"
#include "specloss/trainer.hpp"
#include "specloss/wav.hpp"

namespace fs = std::filesystem;
using namespace specloss;

namespace {

std::vector<std::string> SplitCsv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double ParseNumber(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw UsageError("bad " + what + " value '" + s + "'");
  }
  return v;
}

std::vector<double> ParseNumberList(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : SplitCsv(text)) out.push_back(ParseNumber(item, what));
  return out;
}

LossKind ParseLossOrThrow(const std::string& name) {
  const auto kind = ParseLossKind(name);
  if (!kind) {
    throw UsageError("unknown loss '" + name + "'; valid names: " + LossNameList());
  }
  return *kind;
}

// "NAME" or "MAG,COMPLEX". A lone name combined with --beta is paired with its
// counterpart, magnitude loss first.
LossSpec BuildLoss(const std::string& names, std::optional<double> beta,
                   std::optional<double> lambda) {
  const auto parts = SplitCsv(names);
  if (parts.empty() || parts.size() > 2) {
    throw UsageError("--loss takes one name or a MAG,COMPLEX pair");
  }
  LossSpec spec;
  spec.kind = ParseLossOrThrow(parts[0]);
  if (parts.size() == 2) {
    spec.partner = ParseLossOrThrow(parts[1]);
  } else if (beta) {
    const auto pair = PairedLoss(spec.kind);
    if (!pair) throw UsageError(std::string(LossName(spec.kind)) + " has no magnitude/complex pair");
    spec.partner = *pair;
    if (IsPhaseAware(spec.kind)) std::swap(spec.kind, *spec.partner);
  }
  if (beta) spec.beta = *beta;
  if (lambda) spec.lambda = *lambda;
  spec.Validate();
  return spec;
}

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("failed writing " + path.string());
    }
  }
  fs::rename(tmp, path);
}

std::uint64_t ResolveSeed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SPECLOSS_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("SPECLOSS_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

// Turns "key = value" lines into "--key=value" arguments placed before the
// real ones, so command-line flags win.
std::vector<std::string> ConfigArguments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto f = s.find_first_not_of(" \t\r");
      const auto l = s.find_last_not_of(" \t\r");
      return f == std::string::npos ? std::string() : s.substr(f, l - f + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

std::vector<MixtureExample> RequireSplit(const fs::path& corpus, const std::string& split) {
  auto examples = LoadCorpusSplit(corpus, split);
  if (examples.empty()) {
    throw UsageError("split '" + split + "' of " + corpus.string() + " is empty");
  }
  return examples;
}

struct GenCorpusArgs {
  std::string out;
  int train = 40, val = 10, test = 10;
  std::optional<std::uint64_t> seed;
  std::string snr_list = "-6,-3,0,3,6,9";
  double duration = 3.0;
};

int RunGenCorpus(const GenCorpusArgs& a) {
  CorpusOptions o;
  o.train = a.train;
  o.validation = a.val;
  o.test = a.test;
  o.seed = ResolveSeed(a.seed);
  o.snr_list = ParseNumberList(a.snr_list, "SNR");
  o.duration_s = a.duration;
  WriteCorpus(a.out, o);
  std::cout << "wrote " << (o.train + o.validation + o.test) << " utterances to " << a.out
            << "\n";
  return 0;
}

struct TrainingArgs {
  std::string corpus;
  std::string loss = "cMAE";
  std::optional<double> beta, lambda;
  std::string preset = "tiny";
  int epochs = 100;
  std::optional<std::uint64_t> seed;
  double lr = 1e-4;
  double weight_decay = 0.01;
  int batch_size = 4;
  int validate_every = 10;
  int threads = 1;
  std::string metric = "si_sdr";
  bool quiet = false;

  TrainConfig Config() const {
    TrainConfig c;
    c.learning_rate = lr;
    c.weight_decay = weight_decay;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.validate_every = validate_every;
    c.num_threads = threads;
    c.selection_metric = metric;
    c.seed = ResolveSeed(seed);
    c.model = ModelConfig::FromPreset(preset);
    return c;
  }
};

void AddTrainingOptions(CLI::App* cmd, TrainingArgs& a) {
  cmd->add_option("--corpus", a.corpus, "Corpus directory (train and val splits)")->required();
  cmd->add_option("--preset", a.preset, "Model preset: tiny or paper");
  cmd->add_option("--epochs", a.epochs, "Training epochs");
  cmd->add_option("--seed", a.seed, "Random seed (default: $SPECLOSS_SEED or 1)");
  cmd->add_option("--lr", a.lr, "AdamW learning rate");
  cmd->add_option("--weight-decay", a.weight_decay, "AdamW decoupled weight decay");
  cmd->add_option("--batch-size", a.batch_size, "Utterances per update");
  cmd->add_option("--validate-every", a.validate_every, "Validation interval in epochs");
  cmd->add_option("--threads", a.threads, "Worker threads for gradient evaluation");
  cmd->add_option("--metric", a.metric, "Selection metric: si_sdr or sdr");
  cmd->add_flag("--quiet", a.quiet, "Do not print per-epoch progress");
}

int RunTrain(const TrainingArgs& a, const std::string& out, const std::string& log_path) {
  TrainConfig c = a.Config();
  c.loss = BuildLoss(a.loss, a.beta, a.lambda);
  c.Validate();
  const fs::path ckpt(out);
  const fs::path log = log_path.empty() ? fs::path(out + ".log.csv") : fs::path(log_path);
  const auto train = RequireSplit(a.corpus, "train");
  const auto val = RequireSplit(a.corpus, "val");
  const TrainResult r = Train(train, val, c, {}, [&](const EpochRecord& e) {
    if (a.quiet) return;
    std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss;
    if (e.val_metric) std::cerr << " val_" << c.selection_metric << " " << *e.val_metric;
    std::cerr << "\n";
  });
  std::ostringstream csv;
  r.log.WriteCsv(csv);
  SaveCheckpoint(ckpt, r.best);
  try {
    WriteFileAtomic(log, csv.str());
  } catch (...) {
    fs::remove(ckpt);
    throw;
  }
  std::cout << "loss " << c.loss.Describe() << " best epoch " << r.best_epoch << " val_"
            << c.selection_metric << " " << r.best_metric << "\n";
  return 0;
}

int RunSweep(const TrainingArgs& a, const std::string& param, const std::string& values_text,
             const std::string& pair, int seeds, const std::string& out) {
  const auto parameter = ParseSweepParameter(param);
  if (!parameter) throw UsageError("--param must be beta or lambda, got '" + param + "'");
  std::vector<double> values;
  for (double v : ParseNumberList(values_text, param)) {
    if (std::find(values.begin(), values.end(), v) != values.end()) {
      std::cerr << "specloss: warning: duplicate " << param << " value " << v << " ignored\n";
      continue;
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--values is empty");

  TrainConfig c = a.Config();
  const std::string names = pair.empty() ? a.loss : pair;
  if (*parameter == SweepParameter::kBeta && SplitCsv(names).size() != 2) {
    throw UsageError("a beta sweep needs --loss-pair MAG,COMPLEX");
  }
  c.loss = BuildLoss(names, std::nullopt, a.lambda);
  c.Validate();
  const auto train = RequireSplit(a.corpus, "train");
  const auto val = RequireSplit(a.corpus, "val");
  const SweepResult r = GridSearch(*parameter, values, train, val, c, seeds);
  std::ostringstream csv;
  r.WriteCsv(csv);
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    WriteFileAtomic(out, csv.str());
  }
  const SweepRow& best = r.rows[r.best_index];
  std::cout << "argmax " << param << "=" << best.param_value << " val_" << c.selection_metric
            << "=" << best.val_metric << "\n";
  return 0;
}

ModelParams LoadModel(const std::string& path, const std::string& preset) {
  if (!fs::exists(path)) throw UsageError("checkpoint " + path + " does not exist");
  ModelParams p = LoadCheckpoint(path);
  if (!preset.empty() && !(p.config() == ModelConfig::FromPreset(preset))) {
    throw ConfigError("checkpoint " + path + " does not match preset '" + preset + "'");
  }
  const StftConfig stft;
  if (p.config().input_bins != stft.num_bins() - 2 || p.config().output_bins != stft.num_bins() - 2) {
    throw ConfigError("checkpoint " + path + " expects " + std::to_string(p.config().input_bins) +
                      " bins, the STFT provides " + std::to_string(stft.num_bins() - 2));
  }
  return p;
}

int RunEnhance(const std::string& ckpt, const std::string& preset, const std::string& in,
               const std::string& out, bool streaming) {
  const ModelParams p = LoadModel(ckpt, preset);
  const AudioBuffer noisy = LoadWav(in);
  if (noisy.sample_rate != StftConfig{}.sample_rate) {
    throw UsageError(in + " is sampled at " + std::to_string(noisy.sample_rate) +
                     " Hz; 16000 Hz is required");
  }
  const AudioBuffer enhanced = streaming ? EnhanceStreaming(p, noisy) : Enhance(p, noisy).audio;
  SaveWav(out, enhanced);
  return 0;
}

int RunEvaluate(const std::string& ckpt, const std::string& preset, const std::string& corpus,
                const std::string& split, const std::string& out) {
  const ModelParams p = LoadModel(ckpt, preset);
  const auto examples = RequireSplit(corpus, split);
  const MetricReport report = EvaluateModel(p, examples);
  std::ostringstream csv;
  report.WriteCsv(csv);
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    WriteFileAtomic(out, csv.str());
    std::cout << "si_sdr " << report.Mean("si_sdr") << " dB (noisy " << report.Mean("si_sdr_noisy")
              << " dB)\n";
  }
  return 0;
}

int RunDistributions(const std::string& corpus, double minutes, const std::string& out) {
  if (!(minutes >= 1.0)) throw UsageError("--minutes must be at least 1");
  std::vector<AudioBuffer> clips;
  double seconds = 0.0;
  for (const char* split : {"train", "val", "test"}) {
    for (auto& m : LoadCorpusSplit(corpus, split)) {
      if (seconds >= minutes * 60.0) break;
      seconds += m.noisy.duration();
      clips.push_back(std::move(m.noisy));
    }
  }
  if (seconds < minutes * 60.0) {
    throw UsageError(corpus + " holds only " + std::to_string(seconds / 60.0) +
                     " minutes of audio, " + std::to_string(minutes) + " requested");
  }
  const DistributionReport r = SpectralDistributions(clips);
  std::ostringstream csv;
  r.WriteCsv(csv);
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    WriteFileAtomic(out, csv.str());
  }
  for (const auto* d : {&r.linear, &r.compressed, &r.log}) {
    std::cerr << d->domain << " excess_kurtosis " << d->excess_kurtosis << "\n";
  }
  return 0;
}

int InitCheckpoint(const std::string& preset, const std::optional<std::uint64_t>& seed,
                   bool identity, const std::string& out) {
  ModelConfig c = ModelConfig::FromPreset(preset);
  c.seed = ResolveSeed(seed);
  ModelParams p = ModelParams::Initialize(c);
  if (identity) {
    // sigmoid(40) rounds to 1 in double precision.
    p.output.weight.setZero();
    p.output.bias.setConstant(40.0);
  }
  SaveCheckpoint(out, p);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral loss toolkit for speech enhancement", "specloss"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file with defaults for the command's flags");

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic corpus and manifest");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--train", gen.train, "Training utterances");
  gen_cmd->add_option("--val", gen.val, "Validation utterances");
  gen_cmd->add_option("--test", gen.test, "Test utterances");
  gen_cmd->add_option("--seed", gen.seed, "Random seed (default: $SPECLOSS_SEED or 1)");
  gen_cmd->add_option("--snr-list", gen.snr_list, "Comma-separated SNRs in dB");
  gen_cmd->add_option("--duration", gen.duration, "Utterance length in seconds");

  TrainingArgs train;
  std::string train_out, train_log;
  auto* train_cmd = app.add_subcommand("train", "Train a gain network");
  AddTrainingOptions(train_cmd, train);
  train_cmd->add_option("--loss", train.loss, "Loss name or MAG,COMPLEX pair");
  train_cmd->add_option("--beta", train.beta, "Complex-loss weight in [0,1]");
  train_cmd->add_option("--lambda", train.lambda, "SDW trade-off in (0,1)");
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train_log, "Training log CSV (default: CKPT.log.csv)");

  TrainingArgs sweep;
  std::string sweep_param, sweep_values, sweep_pair, sweep_out;
  int sweep_seeds = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over beta or lambda");
  AddTrainingOptions(sweep_cmd, sweep);
  sweep_cmd->add_option("--param", sweep_param, "beta or lambda")->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep_cmd->add_option("--loss-pair", sweep_pair, "MAG,COMPLEX loss pair for beta sweeps");
  sweep_cmd->add_option("--loss", sweep.loss, "Loss for lambda sweeps (default SDW)");
  sweep_cmd->add_option("--lambda", sweep.lambda, "Fixed lambda during beta sweeps");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Runs per value, averaged");
  sweep_cmd->add_option("--out", sweep_out, "Sweep CSV path (default: stdout)");

  std::string ckpt, preset, in_wav, out_wav;
  bool streaming = false;
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance a WAV file");
  enhance_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  enhance_cmd->add_option("--preset", preset, "Expected model preset");
  enhance_cmd->add_option("--in", in_wav, "Input WAV")->required();
  enhance_cmd->add_option("--out", out_wav, "Output WAV")->required();
  enhance_cmd->add_flag("--streaming", streaming, "Run frame by frame");

  std::string eval_corpus, eval_split = "test", eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "SI-SDR/SDR report for a corpus split");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--preset", preset, "Expected model preset");
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus directory")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test");
  eval_cmd->add_option("--out", eval_out, "Report CSV path (default: stdout)");

  std::string dist_corpus, dist_out;
  double minutes = 5.0;
  auto* dist_cmd = app.add_subcommand("distributions", "Spectral value histograms");
  dist_cmd->add_option("--corpus", dist_corpus, "Corpus directory")->required();
  dist_cmd->add_option("--minutes", minutes, "Minutes of noisy audio to analyse");
  dist_cmd->add_option("--out", dist_out, "Histogram CSV path (default: stdout)");

  std::string init_preset = "tiny", init_out;
  std::optional<std::uint64_t> init_seed;
  bool identity = false;
  auto* init_cmd = app.add_subcommand("init-ckpt", "Write an untrained checkpoint");
  init_cmd->add_option("--preset", init_preset, "tiny or paper");
  init_cmd->add_option("--seed", init_seed, "Initialisation seed");
  init_cmd->add_flag("--identity", identity, "Unit gains (pass-through) for debugging");
  init_cmd->add_option("--out", init_out, "Checkpoint path")->required();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    // key=value lines from --config go right after the command name, so flags
    // given on the command line take precedence.
    std::string config_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        config_file = args[i + 1];
        args.erase(args.begin() + i, args.begin() + i + 2);
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        config_file = args[i].substr(9);
        args.erase(args.begin() + i);
        break;
      }
    }
    if (!config_file.empty()) {
      const auto extra = ConfigArguments(config_file);
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (app.get_subcommand_no_throw(args[i]) != nullptr) {
          args.insert(args.begin() + i + 1, extra.begin(), extra.end());
          break;
        }
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "specloss: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "specloss: error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen_cmd) return RunGenCorpus(gen);
    if (*train_cmd) return RunTrain(train, train_out, train_log);
    if (*sweep_cmd) {
      if (sweep_pair.empty() && sweep_param == "lambda" && !sweep_cmd->count("--loss")) {
        sweep.loss = "SDW";
      }
      return RunSweep(sweep, sweep_param, sweep_values, sweep_pair, sweep_seeds, sweep_out);
    }
    if (*enhance_cmd) return RunEnhance(ckpt, preset, in_wav, out_wav, streaming);
    if (*eval_cmd) return RunEvaluate(ckpt, preset, eval_corpus, eval_split, eval_out);
    if (*dist_cmd) return RunDistributions(dist_corpus, minutes, dist_out);
    if (*init_cmd) return InitCheckpoint(init_preset, init_seed, identity, init_out);
  } catch (const UsageError& e) {
    std::cerr << "specloss: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "specloss: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
