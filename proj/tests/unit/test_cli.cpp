#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "holofuse/errors.hpp"
#include "holofuse/pipeline/checkpoint.hpp"
#include "holofuse/pipeline/config.hpp"
#include "holofuse/pipeline/train.hpp"
#include "holofuse/signal/dataset_io.hpp"

namespace fs = std::filesystem;
using namespace holofuse;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "holofuse");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("holofuse_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  [[nodiscard]] std::string operator/(const std::string& s) const { return (path / s).string(); }
};

const char* kTinyConfig = R"(# tiny model for fast runs
target_rate_hz = 32
band_high_hz = 12
encoder_levels = 2
encoder_widths = 4, 4
embedding_dim = 16
tcn_blocks = 2
tcn_dilations = 1, 2
tcn_hidden = 8
mlp_hidden = 8
memory_length = 4
batch_size = 4
segments_per_batch = 2
batches_per_epoch = 2
pretrain_min_epochs = 2
pretrain_max_epochs = 2
finetune_batches_per_epoch = 1
finetune_epoch_ratio = 1
train_context_s = 30
eval_context_s = 30
)";

std::vector<std::string> tiny_synth(const std::string& out, const std::string& seizures = "2") {
  return {"synth",   "--subjects", "3",  "--channels", "4:6",        "--group-size",           "2",
          "--seizures", seizures,  "--duration", std::to_string(200 * std::stoi(seizures)), "--rate", "32",
          "--context", "60",       "--spatial-distractors", "0", "--temporal-distractors", "0",
          "--seed",  "1",          "--out", out};
}

}  // namespace

TEST_CASE("synth is reproducible and honours the channel range") {
  TempDir tmp("synth");
  auto args = tiny_synth(tmp / "a");
  REQUIRE(run(args).code == 0);
  args.back() = tmp / "b";
  const Result r = run(args);
  REQUIRE(r.code == 0);
  for (const auto& entry : fs::recursive_directory_iterator(tmp.path / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), tmp.path / "a");
    CHECK_MESSAGE(slurp(entry.path()) == slurp(tmp.path / "b" / rel), rel.string());
  }

  const auto subjects = signal::read_dataset(tmp / "a");
  REQUIRE(subjects.size() == 3);
  std::istringstream summary(slurp(tmp.path / "a" / "summary.csv"));
  std::string line;
  std::getline(summary, line);
  for (const auto& s : subjects) {
    CHECK(s.channels() >= 4);
    CHECK(s.channels() <= 6);
    REQUIRE(std::getline(summary, line));
    // subject,channels,groups,onset_group,seizures,duration_s
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 6);
    CHECK(cols[0] == s.subject_id);
    CHECK(std::stoul(cols[4]) == s.seizure_count());
  }
  CHECK(r.out.find("sub02") != std::string::npos);

  CHECK(run({"synth", "--channels", "9:3", "--out", tmp / "bad"}).code == 2);
  CHECK(run({"synth", "--channels", "many", "--out", tmp / "bad"}).code == 2);
}

TEST_CASE("curate selects the requested minutes per bin") {
  TempDir tmp("curate");
  REQUIRE(run({"synth", "--subjects", "1", "--channels", "4", "--group-size", "2", "--seizures", "2", "--duration",
               "3600", "--rate", "32", "--seed", "2", "--out", tmp / "ds"})
              .code == 0);
  REQUIRE(run({"curate", "--manifest", tmp / "ds", "--bins", "4", "--minutes", "10", "--seed", "5", "--out",
               tmp / "c1"})
              .code == 0);
  const nlohmann::json j = signal::read_json_file(tmp.path / "c1" / "sub00.curated.json");
  const auto secs = j.at("seconds_per_bin").get<std::vector<double>>();
  REQUIRE(secs.size() == 4);
  for (double s : secs) CHECK(std::abs(s - 600.0) <= 4.0);

  REQUIRE(run({"curate", "--manifest", tmp / "ds", "--bins", "4", "--minutes", "10", "--seed", "5", "--out",
               tmp / "c2"})
              .code == 0);
  CHECK(slurp(tmp.path / "c1" / "sub00.curated.json") == slurp(tmp.path / "c2" / "sub00.curated.json"));

  const Result shortfall =
      run({"curate", "--manifest", tmp / "ds", "--bins", "5", "--minutes", "20", "--out", tmp / "c3"});
  CHECK(shortfall.code == 3);
  CHECK(shortfall.err.find("shortfall") != std::string::npos);
}

TEST_CASE("default curation takes five bins of twenty minutes") {
  TempDir tmp("curate_default");
  REQUIRE(run({"synth", "--subjects", "1", "--channels", "4", "--group-size", "2", "--seizures", "2", "--duration",
               "7200", "--rate", "32", "--seed", "3", "--out", tmp / "ds"})
              .code == 0);
  REQUIRE(run({"curate", "--manifest", tmp / "ds", "--out", tmp / "c"}).code == 0);
  const nlohmann::json j = signal::read_json_file(tmp.path / "c" / "sub00.curated.json");
  const auto secs = j.at("seconds_per_bin").get<std::vector<double>>();
  REQUIRE(secs.size() == 5);
  for (double s : secs) CHECK(std::abs(s - 1200.0) <= 4.0);
}

TEST_CASE("train, fine-tune, evaluate and ablate from the command line") {
  TempDir tmp("train");
  {
    std::ofstream(tmp.path / "tiny.cfg") << kTinyConfig;
  }
  const std::string cfg = tmp / "tiny.cfg";
  REQUIRE(run(tiny_synth(tmp / "ds", "4")).code == 0);

  const Result pre = run({"pretrain", "--config", cfg, "--dataset", tmp / "ds", "--test", "sub02", "--seed", "3",
                          "--out", tmp / "pre"});
  REQUIRE_MESSAGE(pre.code == 0, pre.err);
  CHECK(fs::exists(tmp.path / "pre" / "pretrained.ckpt"));
  CHECK(fs::exists(tmp.path / "pre" / "provenance.jsonl"));
  CHECK(slurp(tmp.path / "pre" / "provenance.jsonl").find("sub02") == std::string::npos);
  // The echoed config reproduces the run's settings.
  const auto echoed = pipeline::load_config_file(tmp.path / "pre" / "config.txt");
  CHECK(echoed.seed == 3);
  CHECK(echoed.test_subjects == std::vector<std::string>{"sub02"});
  CHECK(echoed.model.encoder.output_dim == 16);

  const std::string ckpt = tmp / "pre/pretrained.ckpt";
  const Result ft = run({"finetune", "--config", cfg, "--dataset", tmp / "ds", "--checkpoint", ckpt, "--subject",
                         "sub02", "--scheme", "laboc", "--out", tmp / "ft"});
  REQUIRE_MESSAGE(ft.code == 0, ft.err);
  for (int k = 0; k < 4; ++k) {
    const fs::path p = tmp.path / "ft" / "sub02" / ("submodel" + std::to_string(k) + ".ckpt");
    REQUIRE(fs::exists(p));
    const auto sub = pipeline::load_checkpoint(p);
    CHECK(sub.meta.at("train_seizures").size() == 1);
    CHECK(sub.log.epochs() <= 10);
  }
  CHECK_FALSE(fs::exists(tmp.path / "ft" / "sub02" / "submodel4.ckpt"));

  const Result ev = run({"eval", "--config", cfg, "--dataset", tmp / "ds", "--checkpoint", tmp / "ft", "--out",
                         tmp / "ev"});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  const nlohmann::json report = signal::read_json_file(tmp.path / "ev" / "report.json");
  CHECK(report.at("scheme") == "laboc");
  CHECK(report.at("units").size() == 12);

  CHECK(run({"eval", "--config", cfg, "--dataset", tmp / "ds", "--out", tmp / "ev2"}).code == 2);
  CHECK(run({"eval", "--config", cfg, "--dataset", tmp / "ds", "--checkpoint", tmp / "missing", "--out",
             tmp / "ev3"})
            .code == 2);

  // Fine-tuning on a subject the checkpoint was pretrained on is leakage.
  CHECK(run({"finetune", "--config", cfg, "--dataset", tmp / "ds", "--checkpoint", ckpt, "--subject", "sub00",
             "--out", tmp / "ft2"})
            .code == 4);

  const Result ab = run({"ablate", "--config", cfg, "--dataset", tmp / "ds", "--test", "sub02", "--variant",
                         "mean_fusion", "--out", tmp / "ab"});
  REQUIRE_MESSAGE(ab.code == 0, ab.err);
  CHECK(signal::read_json_file(tmp.path / "ab" / "report.json").at("variant") == "mean_fusion");
  CHECK(run({"ablate", "--config", cfg, "--dataset", tmp / "ds", "--test", "sub02", "--variant", "no_such",
             "--out", tmp / "ab2"})
            .code == 2);

  const Result ik = run({"inspect-keys", "--checkpoint", ckpt, "--subject", "sub00", "--dataset", tmp / "ds",
                         "--out", tmp / "ik"});
  REQUIRE_MESSAGE(ik.code == 0, ik.err);
  const nlohmann::json keys = signal::read_json_file(tmp.path / "ik" / "sub00_keys_summary.json");
  CHECK(keys.contains("within_group_mean"));
  CHECK(run({"inspect-keys", "--checkpoint", ckpt, "--subject", "nobody", "--out", tmp / "ik2"}).code == 2);
}

TEST_CASE("inspect-keys on a fresh key map gives a banded matrix") {
  TempDir tmp("keys");
  pipeline::ModelConfig mc;
  mc.encoder.window_samples = 240;
  pipeline::TrainConfig tc;
  pipeline::Checkpoint ck = pipeline::initial_checkpoint(mc, tc);
  ck.model.add_subject("fresh", 6);
  pipeline::save_checkpoint(tmp.path / "fresh.ckpt", ck);
  REQUIRE(run({"inspect-keys", "--checkpoint", tmp / "fresh.ckpt", "--subject", "fresh", "--out", tmp / "o"}).code ==
          0);

  std::istringstream csv(slurp(tmp.path / "o" / "fresh_keys.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "ch0,ch1,ch2,ch3,ch4,ch5");
  std::vector<std::vector<double>> m;
  while (std::getline(csv, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) row.push_back(std::stod(c));
    m.push_back(row);
  }
  REQUIRE(m.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(m[i].size() == 6);
    CHECK(m[i][i] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 6; ++j) CHECK(m[i][j] == doctest::Approx(m[j][i]).epsilon(1e-12));
    for (std::size_t j = i + 1; j + 1 < 6; ++j) CHECK(m[i][j + 1] < m[i][j]);
    for (std::size_t j = i; j >= 1; --j) CHECK(m[i][j - 1] < m[i][j]);
  }
}

TEST_CASE("exit codes and output root") {
  CHECK(cli::exit_code(ConfigError("x")) == 2);
  CHECK(cli::exit_code(DataError("x")) == 3);
  CHECK(cli::exit_code(LeakageError("x")) == 4);
  CHECK(cli::exit_code(NumericError("x")) == 5);
  CHECK(cli::exit_code(std::runtime_error("x")) == 1);

  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"synth", "--help"}).code == 0);

  TempDir tmp("root");
  ::setenv(cli::kOutRootEnv, tmp.path.c_str(), 1);
  CHECK(run({"pretrain", "--dataset", tmp / "nothing"}).code == 3);
  CHECK(run({"pretrain", "--set", "bogus_key=1"}).code == 2);
  CHECK(run({"pretrain", "--set", "no_equals"}).code == 2);

  const Result r = run(tiny_synth("rel"));
  ::unsetenv(cli::kOutRootEnv);
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp.path / "rel" / "dataset.json"));
}

TEST_CASE("gradcheck command passes") {
  TempDir tmp("grad");
  const Result r = run({"gradcheck", "--out", tmp / "g"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(fs::exists(tmp.path / "g" / "gradcheck.csv"));
}
