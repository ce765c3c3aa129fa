#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "holofuse/errors.hpp"
#include "holofuse/pipeline/checkpoint.hpp"
#include "holofuse/pipeline/config.hpp"
#include "holofuse/pipeline/gradcheck.hpp"
#include "holofuse/pipeline/metrics.hpp"
#include "holofuse/pipeline/search.hpp"
#include "holofuse/pipeline/train.hpp"
#include "holofuse/signal/synth.hpp"

using namespace holofuse;
using namespace holofuse::pipeline;

namespace {

// Small enough that a full experiment runs in a couple of seconds.
RunConfig tiny_config() {
  RunConfig rc;
  rc.seed = 7;
  rc.preprocess.target_rate_hz = 32.0;
  rc.preprocess.band_high_hz = 12.0;
  rc.model.encoder.levels = 2;
  rc.model.encoder.widths = {4, 4};
  rc.model.encoder.output_dim = 16;
  rc.model.tcn.blocks = 2;
  rc.model.tcn.dilations = {1, 2};
  rc.model.tcn.hidden = 8;
  rc.model.mlp_hidden = 8;
  rc.model.memory_length = 4;
  rc.train.batch_size = 4;
  rc.train.segments_per_batch = 2;
  rc.train.batches_per_epoch = 2;
  rc.train.pretrain_min_epochs = 2;
  rc.train.pretrain_max_epochs = 2;
  rc.train.finetune_batches_per_epoch = 1;
  rc.train.finetune_epoch_ratio = 1;
  rc.train.train_context_s = 30.0;
  rc.train.eval_context_s = 30.0;
  rc.resolve();
  return rc;
}

std::vector<PreparedSubject> tiny_subjects(std::size_t subjects, std::size_t seizures, const RunConfig& rc) {
  signal::SynthSpec spec;
  spec.subjects = subjects;
  spec.channels_min = 3;
  spec.channels_max = 5;
  spec.group_size_min = 1;
  spec.group_size_max = 2;
  spec.seizures = seizures;
  spec.duration_s = 100.0 * static_cast<double>(seizures);
  spec.sampling_rate = 32.0;
  spec.seizure_min_s = 15.0;
  spec.seizure_max_s = 20.0;
  spec.context_s = 35.0;
  spec.spatial_distractors = 0;
  spec.temporal_distractors = 0;
  spec.seed = 3;
  std::vector<PreparedSubject> out;
  for (const signal::SynthSubject& s : signal::synth_generate(spec)) {
    signal::SubjectData d;
    d.subject_id = s.recording.subject_id;
    d.recordings = {s.recording};
    d.channel_groups = s.channel_groups;
    d.onset_group = s.onset_group;
    out.push_back(prepare_subject(d, rc.preprocess, rc.train.window_s, rc.train.stride_s));
  }
  return out;
}

}  // namespace

TEST_CASE("metrics on a worked confusion matrix") {
  const Confusion c{8, 2, 2, 88};
  const Metrics m = score(c);
  CHECK(m.precision == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.sensitivity == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.specificity == doctest::Approx(88.0 / 90.0).epsilon(1e-12));

  Confusion perfect;
  for (int i = 0; i < 5; ++i) perfect.add(true, true);
  for (int i = 0; i < 7; ++i) perfect.add(false, false);
  const Metrics p = score(perfect);
  CHECK(p.f1 == 1.0);
  CHECK(p.specificity == 1.0);

  Confusion silent;
  for (int i = 0; i < 4; ++i) silent.add(false, true);
  for (int i = 0; i < 4; ++i) silent.add(false, false);
  const Metrics s = score(silent);
  CHECK(s.f1 == 0.0);
  CHECK(s.precision == 0.0);
  CHECK(s.specificity == 1.0);
}

TEST_CASE("describe uses interpolated quartiles") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  const Distribution d = describe(v);
  CHECK(d.median == doctest::Approx(2.5));
  CHECK(d.q1 == doctest::Approx(1.75));
  CHECK(d.q3 == doctest::Approx(3.25));
  CHECK(d.mean == doctest::Approx(2.5));
  CHECK(d.count == 4);
}

TEST_CASE("config text parsing") {
  SUBCASE("unknown keys name the key and line") {
    try {
      (void)parse_config_text("learning_rate = 0.001\nlearnig_rate = 0.1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("learnig_rate") != std::string::npos);
      CHECK(what.find("line 2") != std::string::npos);
    }
  }
  SUBCASE("bad values are rejected") {
    CHECK_THROWS_AS((void)parse_config_text("batch_size = many"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("scheme = kfold"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("just a line"), ConfigError);
  }
  SUBCASE("round trip") {
    RunConfig c = parse_config_text(
        "# comment\n"
        "seed = 11\n"
        "encoder_widths = 4, 8\n"
        "encoder_levels = 2\n"
        "fusion = mean\n"
        "scheme = laboc\n"
        "test_subjects = sub01, sub02\n"
        "learning_rate = 0.00123\n");
    CHECK(c.seed == 11);
    CHECK(c.model.fusion == FusionMode::mean);
    CHECK(c.train.scheme == Scheme::laboc);
    CHECK(c.test_subjects == std::vector<std::string>{"sub01", "sub02"});
    const std::string text = to_config_text(c);
    const RunConfig back = parse_config_text(text);
    CHECK(to_config_text(back) == text);
    CHECK(back.train.learning_rate == c.train.learning_rate);
  }
  SUBCASE("context policy switches both contexts") {
    const RunConfig c = parse_config_text("context_policy = long");
    CHECK(c.train.train_context_s == kLongTermContextS);
    CHECK(c.train.eval_context_s == kLongTermContextS);
  }
}

TEST_CASE("pretraining stops inside the epoch bounds") {
  const TrainConfig t;
  const auto stop_epoch = [&](const std::vector<double>& f1) {
    for (std::size_t e = 1; e <= f1.size(); ++e) {
      if (plateau_reached(std::span<const double>(f1.data(), e), t)) return e;
    }
    return f1.size() + 1;
  };
  std::vector<double> flat(60, 0.5);
  CHECK(stop_epoch(flat) == 25);
  std::vector<double> rising(60);
  for (std::size_t i = 0; i < rising.size(); ++i) rising[i] = 0.01 * static_cast<double>(i);
  CHECK(stop_epoch(rising) == 50);

  Rng rng = make_stream(5, "plateau");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f1(60);
    double level = 0.0;
    for (double& x : f1) {
      level += 0.02 * uniform01(rng) * (uniform01(rng) < 0.3 ? 1.0 : 0.0);
      x = level + 0.05 * uniform01(rng);
    }
    const std::size_t e = stop_epoch(f1);
    CHECK(e >= 25);
    CHECK(e <= 50);
  }
}

TEST_CASE("fine-tuning epoch budget") {
  const TrainConfig t;
  CHECK(finetune_epoch_budget(t, 25) == 5);
  CHECK(finetune_epoch_budget(t, 50) == 10);
  CHECK(finetune_epoch_budget(t, 37) == 7);
  CHECK(finetune_epoch_budget(t, 3) == 1);
  CHECK(finetune_epoch_budget(t, 0) == 10);
  for (std::size_t p = 25; p <= 50; ++p) {
    const std::size_t f = finetune_epoch_budget(t, p);
    CHECK(f <= 10);
    CHECK(f * 5 <= p);
  }
}

TEST_CASE("subject sampler is uniform") {
  SubjectSampler sampler(42, 50);
  std::vector<int> counts(50, 0);
  for (int i = 0; i < 5000; ++i) ++counts[sampler.next()];
  const double sigma = std::sqrt(100.0 * (1.0 - 1.0 / 50.0));
  std::size_t outside = 0;
  for (int c : counts) {
    CHECK(std::abs(c - 100) < 4.0 * sigma);
    if (std::abs(c - 100) > 3.0 * sigma) ++outside;
  }
  CHECK(outside <= 2);
}

TEST_CASE("seizure units and range subtraction") {
  const RunConfig rc = tiny_config();
  const auto subjects = tiny_subjects(1, 3, rc);
  const PreparedSubject& s = subjects.front();
  const auto units = seizure_units(s, 30.0, rc.model.memory_length);
  REQUIRE(units.size() == 3);
  const auto& layout = s.recordings[0].layout;
  for (const SeizureUnit& u : units) {
    CHECK(layout.start_s(u.range.first) >= u.annotation.onset_s - 30.0 - 1e-9);
    CHECK(layout.end_s(u.range.last) <= u.annotation.offset_s + 30.0 + 1e-9);
    CHECK(layout.start_s(u.range.first) <= u.annotation.onset_s);
    CHECK(layout.end_s(u.range.last) >= u.annotation.offset_s);
  }
  CHECK_THROWS_AS((void)seizure_units(s, 30.0, 10000), DataError);

  const PatchRange r{0, 10, 40};
  const auto pieces = subtract_ranges(r, {{0, 15, 20}, {0, 38, 50}, {1, 0, 100}}, 3);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].first == 10);
  CHECK(pieces[0].last == 14);
  CHECK(pieces[1].first == 21);
  CHECK(pieces[1].last == 37);
  CHECK(subtract_ranges(r, {{0, 12, 40}}, 3).empty());
}

TEST_CASE("fused representation has dimension d for any channel count") {
  RunConfig rc = tiny_config();
  for (FusionMode mode : {FusionMode::hrr, FusionMode::mean}) {
    ModelConfig mc = rc.model;
    mc.fusion = mode;
    CaModel model(mc);
    Rng rng(1);
    model.init(rng);
    for (std::size_t c : {1U, 3U, 7U}) {
      model.add_subject("s" + std::to_string(c), c);
      nn::Tensor patches({2 * c, 1, mc.encoder.window_samples});
      for (std::size_t i = 0; i < patches.size(); ++i) patches[i] = gaussian(rng);
      nn::Graph g;
      const nn::Var f = model.fused(g, patches, c, "s" + std::to_string(c));
      CHECK(f.shape() == nn::Shape{2, mc.dim()});
    }
    nn::Tensor wrong({6, 1, mc.encoder.window_samples});
    nn::Graph g;
    CHECK_THROWS_AS((void)model.fused(g, wrong, 4, "s3"), ShapeError);
  }
}

TEST_CASE("mean fusion of identical channels is the single-channel feature") {
  ModelConfig mc = tiny_config().model;
  mc.fusion = FusionMode::mean;
  CaModel model(mc);
  Rng rng(2);
  model.init(rng);
  model.add_subject("one", 1);
  model.add_subject("four", 4);
  const std::size_t w = mc.encoder.window_samples;
  nn::Tensor single({1, 1, w});
  for (std::size_t i = 0; i < w; ++i) single[i] = gaussian(rng);
  nn::Tensor copies({4, 1, w});
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < w; ++i) copies[c * w + i] = single[i];
  }
  nn::Graph g;
  const nn::Tensor a = model.fused(g, single, 1, "one").value();
  const nn::Tensor b = model.fused(g, copies, 4, "four").value();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint persistence") {
  const RunConfig rc = tiny_config();
  Checkpoint ck = initial_checkpoint(rc.model, rc.train);
  ck.model.add_subject("sub00", 5);
  ck.log.epoch_f1 = {0.1, 0.25};
  ck.log.epoch_loss = {0.9, 0.7};
  ck.meta["pretrain_epochs"] = 2;
  // Non-trivial optimizer state.
  for (auto& [name, p] : ck.model.params()) {
    p.m.fill(0.125);
    p.v.fill(1.0 / 3.0);
    p.step = 3;
  }

  const std::vector<char> bytes = serialize_checkpoint(ck);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.model.subjects() == std::vector<std::string>{"sub00"});
  CHECK(back.log.epoch_f1 == ck.log.epoch_f1);
  for (const auto& [name, p] : ck.model.params()) {
    const nn::Param& q = back.model.params().at(name);
    CHECK(q.value.storage() == p.value.storage());
    CHECK(q.v.storage() == p.v.storage());
    CHECK(q.step == p.step);
  }

  std::vector<char> truncated(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS((void)deserialize_checkpoint(truncated), FormatError);
  std::vector<char> bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS((void)deserialize_checkpoint(bad_magic), FormatError);
  std::vector<char> bad_version = bytes;
  bad_version[8] = static_cast<char>(kCheckpointVersion + 1);
  CHECK_THROWS_AS((void)deserialize_checkpoint(bad_version), FormatError);

  ModelConfig other = rc.model;
  other.encoder.output_dim = 32;
  CHECK_THROWS_AS(back.model.require_compatible(other), ShapeError);
  CHECK_NOTHROW(back.model.require_compatible(rc.model));
  CHECK_THROWS_AS((void)load_checkpoint("/nonexistent/model.ckpt"), ConfigError);
}

TEST_CASE("LOOC and LABOC produce one sub-model per seizure") {
  RunConfig rc = tiny_config();
  const auto subjects = tiny_subjects(1, 4, rc);
  const Checkpoint base = initial_checkpoint(rc.model, rc.train);
  for (Scheme scheme : {Scheme::looc, Scheme::laboc}) {
    TrainConfig t = rc.train;
    t.scheme = scheme;
    FinetuneOptions o;
    o.epochs = 1;
    std::vector<SubModel> subs = finetune(base, subjects[0], t, o);
    REQUIRE(subs.size() == 4);
    for (std::size_t k = 0; k < subs.size(); ++k) {
      const std::size_t trained = scheme == Scheme::looc ? 3 : 1;
      CHECK(subs[k].train_seizures.size() == trained);
      CHECK(subs[k].eval_seizures.size() == 4 - trained);
      CHECK(subs[k].checkpoint.log.epochs() == 1);
      CHECK(subs[k].checkpoint.model.subjects() == std::vector<std::string>{subjects[0].subject_id});
    }
    const EvalReport r = evaluate(subs, subjects[0], t);
    CHECK(r.units.size() == (scheme == Scheme::looc ? 4U : 12U));
  }

  TrainConfig t = rc.train;
  FinetuneOptions o;
  o.epochs = t.finetune_max_epochs + 1;
  CHECK_THROWS_AS((void)finetune(base, subjects[0], t, o), ConfigError);
  const auto single = tiny_subjects(1, 1, rc);
  CHECK_THROWS_AS((void)finetune(base, single[0], t), DataError);
}

TEST_CASE("leakage is detected") {
  RunConfig rc = tiny_config();
  const auto subjects = tiny_subjects(3, 2, rc);

  SUBCASE("test subject in the pretraining pool") {
    std::vector<const PreparedSubject*> pool{&subjects[0], &subjects[1]};
    PretrainOptions o;
    o.held_out = {subjects[1].subject_id};
    CHECK_THROWS_AS((void)pretrain(pool, rc.model, rc.train, o), LeakageError);

    ExperimentSetup setup{subjects, {subjects[0].subject_id, subjects[2].subject_id}, {subjects[2].subject_id},
                          rc.model, rc.train, nullptr, nullptr};
    CHECK_THROWS_AS((void)run_experiment(setup, Variant::full), LeakageError);
  }
  SUBCASE("evaluation window overlapping a training seizure") {
    const Checkpoint base = initial_checkpoint(rc.model, rc.train);
    FinetuneOptions o;
    o.epochs = 1;
    std::vector<SubModel> subs = finetune(base, subjects[0], rc.train, o);
    subs[0].train_seizures.push_back(subs[0].eval_seizures.front());
    CHECK_THROWS_AS((void)evaluate(subs, subjects[0], rc.train), LeakageError);
  }
}

TEST_CASE("experiments are deterministic and follow the protocol") {
  RunConfig rc = tiny_config();
  const auto subjects = tiny_subjects(4, 2, rc);
  std::vector<std::string> pool{subjects[0].subject_id, subjects[1].subject_id};
  std::vector<std::string> test{subjects[2].subject_id, subjects[3].subject_id};
  ProvenanceLog log;
  ExperimentSetup setup{subjects, pool, test, rc.model, rc.train, &log, nullptr};

  const ExperimentResult a = run_experiment(setup, Variant::full);
  setup.provenance = nullptr;
  const ExperimentResult b = run_experiment(setup, Variant::full);
  CHECK(a.report.to_json().dump() == b.report.to_json().dump());
  CHECK(a.pretrain_epochs == 2);
  CHECK(a.submodels == 4);
  CHECK(a.report.subjects.size() == 2);
  for (std::size_t e : a.finetune_epochs) CHECK(e <= a.pretrain_epochs);
  for (const std::string& t : test) CHECK_FALSE(log.mentions(t, "pretrain"));
  CHECK(log.mentions(subjects[0].subject_id, "pretrain"));
  CHECK(log.mentions(subjects[2].subject_id, "finetune"));

  setup.pretrained = &a.pretrained;
  const ExperimentResult c = run_experiment(setup, Variant::full);
  CHECK(c.report.to_json().dump() == a.report.to_json().dump());

  const ExperimentResult np = run_experiment(setup, Variant::no_pretrain);
  CHECK(np.pretrain_epochs == 0);
  CHECK(np.report.variant == "no_pretrain");
  setup.pretrained = nullptr;
  const ExperimentResult mlp = run_experiment(setup, Variant::no_memory);
  CHECK(mlp.pretrained.model.config().head == HeadMode::mlp);
  const ExperimentResult mean = run_experiment(setup, Variant::mean_fusion);
  CHECK(mean.pretrained.model.config().fusion == FusionMode::mean);
}

TEST_CASE("subject scaling yields one report per pool size") {
  RunConfig rc = tiny_config();
  const auto subjects = tiny_subjects(4, 2, rc);
  ExperimentSetup setup{subjects, {}, {subjects[3].subject_id}, rc.model, rc.train, nullptr, nullptr};
  const std::vector<std::size_t> sizes{1, 3};
  const auto rows = subject_scaling_experiment(setup, sizes);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].pool.size() == 1);
  CHECK(rows[1].pool.size() == 3);
  for (const ScalingRow& r : rows) {
    CHECK(std::find(r.pool.begin(), r.pool.end(), subjects[3].subject_id) == r.pool.end());
    CHECK(r.report.subjects.size() == 1);
  }
  const std::vector<std::size_t> too_many{4};
  CHECK_THROWS_AS((void)subject_scaling_experiment(setup, too_many), ConfigError);
}

TEST_CASE("full model gradients match central differences") {
  const auto rows = model_gradcheck();
  REQUIRE(rows.size() == 3);
  for (const ModelGradCheckRow& r : rows) {
    INFO(r.group << " worst " << r.result.worst_param << "[" << r.result.worst_index << "]");
    CHECK(r.result.entries_checked > 0);
    CHECK(r.result.max_rel_error < 1e-4);
  }
}

TEST_CASE("random search is seeded and validated") {
  SearchSpace space;
  space.choices = {{"learning_rate", {"1e-4", "5.5e-4", "1e-3"}}, {"tcn_hidden", {"16", "32"}}};
  const auto a = random_search(RunConfig{}, space, 12, 9);
  const auto b = random_search(RunConfig{}, space, 12, 9);
  REQUIRE(a.size() == 12);
  bool varied = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_config_text(a[i]) == to_config_text(b[i]));
    CHECK((a[i].model.tcn.hidden == 16 || a[i].model.tcn.hidden == 32));
    varied = varied || a[i].train.learning_rate != a[0].train.learning_rate;
  }
  CHECK(varied);
  SearchSpace bad;
  bad.choices = {{"not_a_key", {"1"}}};
  CHECK_THROWS_AS((void)random_search(RunConfig{}, bad, 1, 1), ConfigError);
  bad.choices = {{"learning_rate", {}}};
  CHECK_THROWS_AS((void)random_search(RunConfig{}, bad, 1, 1), ConfigError);
}
