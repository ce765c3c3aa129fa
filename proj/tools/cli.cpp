#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "holofuse/errors.hpp"
#include "holofuse/pipeline/checkpoint.hpp"
#include "holofuse/pipeline/config.hpp"
#include "holofuse/pipeline/gradcheck.hpp"
#include "holofuse/pipeline/train.hpp"
#include "holofuse/signal/curation.hpp"
#include "holofuse/signal/dataset_io.hpp"
#include "holofuse/signal/synth.hpp"

namespace holofuse::cli {

namespace fs = std::filesystem;
using pipeline::RunConfig;

namespace {

using Row = std::vector<std::string>;

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

void print_table(std::ostream& out, const Row& header, const std::vector<Row>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const Row& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  const auto line = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << (i ? "  " : "") << std::left << std::setw(static_cast<int>(width[i])) << r[i];
    }
    out << '\n';
  };
  line(header);
  for (const Row& r : rows) line(r);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

void write_csv(const fs::path& path, const Row& header, const std::vector<Row>& rows) {
  std::ostringstream s;
  const auto line = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << r[i];
    s << '\n';
  };
  line(header);
  for (const Row& r : rows) line(r);
  write_text(path, s.str());
}

// Flags every model/training command shares.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> set;
  std::string dataset;
};

void add_common(CLI::App* app, Common& c, bool with_dataset = true) {
  app->add_option("--config", c.config, "Config file (key = value lines)");
  app->add_option("--seed", c.seed, "Root seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--set", c.set, "Config override key=value (repeatable)");
  if (with_dataset) app->add_option("--dataset", c.dataset, "Dataset directory, dataset.json or manifest");
}

fs::path output_dir(const std::string& flag, const std::string& configured, const std::string& command) {
  fs::path p = !flag.empty() ? fs::path(flag) : !configured.empty() ? fs::path(configured) : fs::path("runs") / command;
  if (p.is_relative()) {
    if (const char* root = std::getenv(kOutRootEnv); root && *root) p = fs::path(root) / p;
  }
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

// Config file, then --set overrides, then dedicated flags.
RunConfig load_run_config(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags = {}) {
  RunConfig rc = c.config.empty() ? RunConfig{} : pipeline::load_config_file(c.config);
  for (const std::string& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    pipeline::apply_setting(rc, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (c.seed) pipeline::apply_setting(rc, "seed", std::to_string(*c.seed));
  if (!c.dataset.empty()) rc.dataset = c.dataset;
  for (const auto& [k, v] : flags) {
    if (!v.empty()) pipeline::apply_setting(rc, k, v);
  }
  rc.resolve();
  return rc;
}

void echo_config(const fs::path& dir, const RunConfig& rc) { write_text(dir / "config.txt", pipeline::to_config_text(rc)); }

std::vector<pipeline::PreparedSubject> load_prepared(const RunConfig& rc) {
  if (rc.dataset.empty()) throw ConfigError("no dataset: set 'dataset' in the config or pass --dataset");
  std::vector<pipeline::PreparedSubject> out;
  for (const fs::path& manifest : signal::dataset_manifests(rc.dataset)) {
    const signal::SubjectData raw = signal::read_subject(manifest);
    out.push_back(pipeline::prepare_subject(raw, rc.preprocess, rc.train.window_s, rc.train.stride_s));
  }
  return out;
}

// Pool = non-test subjects, optionally a seeded random subset of pool_size.
std::vector<std::string> select_pool(const RunConfig& rc, std::span<const pipeline::PreparedSubject> subjects) {
  for (const std::string& t : rc.test_subjects) (void)pipeline::find_subject(subjects, t);
  std::vector<std::string> others;
  for (const auto& s : subjects) {
    if (std::find(rc.test_subjects.begin(), rc.test_subjects.end(), s.subject_id) == rc.test_subjects.end()) {
      others.push_back(s.subject_id);
    }
  }
  if (rc.pool_size == 0) return others;
  if (rc.pool_size > others.size()) {
    throw ConfigError("pool_size " + std::to_string(rc.pool_size) + " exceeds the " + std::to_string(others.size()) +
                      " available non-test subjects");
  }
  Rng rng = make_stream(rc.seed, "pool/select");
  for (std::size_t i = 0; i < rc.pool_size; ++i) {
    std::swap(others[i], others[i + uniform_index(rng, others.size() - i)]);
  }
  others.resize(rc.pool_size);
  return others;
}

std::string join(const std::vector<std::string>& v, const std::string& sep = " ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string join_indices(const std::vector<std::size_t>& v) {
  std::vector<std::string> s;
  for (std::size_t x : v) s.push_back(std::to_string(x));
  return join(s, ";");
}

void report_outputs(std::ostream& out, const fs::path& dir, const pipeline::EvalReport& report) {
  signal::write_json_file(dir / "report.json", report.to_json());
  const Row header{"subject", "units", "f1", "sensitivity", "specificity"};
  std::vector<Row> rows;
  for (const auto& s : report.subjects) {
    rows.push_back({s.subject_id, std::to_string(s.f1.count), fmt(s.f1.median), fmt(s.sensitivity.median),
                    fmt(s.specificity.median)});
  }
  rows.push_back({"median", std::to_string(report.units.size()), fmt(report.f1.median),
                  fmt(report.sensitivity.median), fmt(report.specificity.median)});
  write_csv(dir / "summary.csv", header, rows);
  out << "variant " << report.variant << ", scheme " << report.scheme << ", context " << report.context_s << " s\n";
  print_table(out, header, rows);
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text, const std::string& flag) {
  const auto parse = [&](std::string_view s) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(flag + ": expected N or A:B, got '" + text + "'");
    return v;
  };
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    const std::size_t v = parse(text);
    return {v, v};
  }
  return {parse(std::string_view(text).substr(0, colon)), parse(std::string_view(text).substr(colon + 1))};
}

// ---- commands ---------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::size_t subjects = 16;
  std::string channels = "32:128";
  std::string group_size = "4:12";
  std::size_t seizures = 4;
  double duration_s = 1920.0;
  double rate_hz = 512.0;
  double context_s = 180.0;
  std::size_t spatial = 1;
  std::size_t temporal = 3;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  signal::SynthSpec spec;
  spec.subjects = a.subjects;
  std::tie(spec.channels_min, spec.channels_max) = parse_range(a.channels, "--channels");
  std::tie(spec.group_size_min, spec.group_size_max) = parse_range(a.group_size, "--group-size");
  spec.seizures = a.seizures;
  spec.duration_s = a.duration_s;
  spec.sampling_rate = a.rate_hz;
  spec.context_s = a.context_s;
  spec.spatial_distractors = a.spatial;
  spec.temporal_distractors = a.temporal;
  spec.seed = a.common.seed.value_or(0);
  spec.validate();
  const fs::path dir = output_dir(a.common.out, "", "synth");

  nlohmann::json echo = {{"subjects", spec.subjects},      {"channels_min", spec.channels_min},
                         {"channels_max", spec.channels_max}, {"group_size_min", spec.group_size_min},
                         {"group_size_max", spec.group_size_max}, {"seizures", spec.seizures},
                         {"duration_s", spec.duration_s},  {"sampling_rate", spec.sampling_rate},
                         {"context_s", spec.context_s}, {"spatial_distractors", spec.spatial_distractors},
                         {"temporal_distractors", spec.temporal_distractors}, {"seed", spec.seed}};
  signal::write_json_file(dir / "synth_spec.json", echo);

  // One subject at a time; full-size datasets do not fit in memory at once.
  std::vector<std::string> ids;
  std::vector<Row> rows;
  for (std::size_t i = 0; i < spec.subjects; ++i) {
    const signal::SynthSubject s = signal::synth_subject(spec, i);
    signal::write_subject(dir, s);
    ids.push_back(s.recording.subject_id);
    const int groups = *std::max_element(s.channel_groups.begin(), s.channel_groups.end()) + 1;
    rows.push_back({s.recording.subject_id, std::to_string(s.recording.channels), std::to_string(groups),
                    std::to_string(s.onset_group), std::to_string(s.recording.annotations.size()),
                    fmt(s.recording.duration_s(), 1)});
  }
  signal::write_dataset_index(dir, ids);
  const Row header{"subject", "channels", "groups", "onset_group", "seizures", "duration_s"};
  write_csv(dir / "summary.csv", header, rows);
  print_table(out, header, rows);
  out << "wrote " << ids.size() << " subjects to " << dir.string() << '\n';
  return 0;
}

struct CurateArgs {
  Common common;
  std::string manifest;
  std::size_t bins = 5;
  double minutes = 20.0;
  double context_s = 60.0;
};

int cmd_curate(const CurateArgs& a, std::ostream& out) {
  if (a.manifest.empty()) throw ConfigError("curate: --manifest is required");
  signal::CurationOptions opts;
  opts.bin_count = a.bins;
  opts.minutes_per_bin = a.minutes;
  opts.ictal_context_s = a.context_s;
  opts.seed = a.common.seed.value_or(0);
  const fs::path dir = output_dir(a.common.out, "", "curate");
  signal::write_json_file(dir / "curate_options.json", {{"manifest", a.manifest},
                                                        {"bins", opts.bin_count},
                                                        {"minutes_per_bin", opts.minutes_per_bin},
                                                        {"ictal_context_s", opts.ictal_context_s},
                                                        {"seed", opts.seed}});
  std::vector<Row> rows;
  for (const fs::path& manifest : signal::dataset_manifests(a.manifest)) {
    const signal::SubjectData subject = signal::read_subject(manifest);
    std::vector<signal::CurationSource> sources;
    for (std::size_t r = 0; r < subject.recordings.size(); ++r) {
      sources.push_back({subject.recording_paths[r], &subject.recordings[r]});
    }
    const signal::CuratedDataset curated = signal::delta_curate(sources, opts);
    signal::write_json_file(dir / (subject.subject_id + ".curated.json"), signal::to_json(curated));
    std::size_t ictal = 0;
    for (const auto& s : curated.segments) ictal += s.ictal ? 1 : 0;
    Row row{subject.subject_id};
    for (double secs : curated.seconds_per_bin) row.push_back(fmt(secs / 60.0, 2));
    row.push_back(std::to_string(ictal));
    rows.push_back(row);
  }
  Row header{"subject"};
  for (std::size_t b = 0; b < opts.bin_count; ++b) header.push_back("bin" + std::to_string(b) + "_min");
  header.push_back("ictal_segments");
  write_csv(dir / "summary.csv", header, rows);
  print_table(out, header, rows);
  return 0;
}

struct TrainArgs {
  Common common;
  std::vector<std::string> test;
  std::string pool_size;
  std::string checkpoint;
  std::string scheme;
  std::string variant = "full";
  std::string context;
  std::size_t epochs = 0;
  std::vector<std::size_t> sizes;
};

std::vector<std::pair<std::string, std::string>> train_flags(const TrainArgs& a) {
  return {{"test_subjects", join(a.test, ",")},
          {"pool_size", a.pool_size},
          {"checkpoint", a.checkpoint},
          {"scheme", a.scheme},
          {"context_policy", a.context}};
}

int cmd_pretrain(const TrainArgs& a, std::ostream& out) {
  const RunConfig rc = load_run_config(a.common, train_flags(a));
  const fs::path dir = output_dir(a.common.out, rc.out, "pretrain");
  echo_config(dir, rc);
  const auto subjects = load_prepared(rc);
  const std::vector<std::string> pool_ids = select_pool(rc, subjects);
  std::vector<const pipeline::PreparedSubject*> pool;
  for (const std::string& id : pool_ids) pool.push_back(&pipeline::find_subject(subjects, id));

  pipeline::ProvenanceLog provenance(dir / "provenance.jsonl");
  pipeline::PretrainOptions opts;
  opts.provenance = &provenance;
  opts.held_out = rc.test_subjects;
  opts.on_epoch = [&](std::size_t e, double f1, double loss) {
    out << "epoch " << e << "  f1 " << fmt(f1) << "  loss " << fmt(loss, 4) << '\n' << std::flush;
  };
  out << "pretraining on " << pool.size() << " subjects: " << join(pool_ids) << '\n';
  const pipeline::Checkpoint ckpt = pipeline::pretrain(pool, rc.model, rc.train, opts);
  pipeline::save_checkpoint(dir / "pretrained.ckpt", ckpt);
  std::vector<Row> rows;
  for (std::size_t e = 0; e < ckpt.log.epochs(); ++e) {
    rows.push_back({std::to_string(e + 1), fmt(ckpt.log.epoch_f1[e], 6), fmt(ckpt.log.epoch_loss[e], 6)});
  }
  write_csv(dir / "train_log.csv", {"epoch", "f1", "loss"}, rows);
  out << "stopped after " << ckpt.log.epochs() << " epochs; checkpoint " << (dir / "pretrained.ckpt").string() << '\n';
  return 0;
}

int cmd_finetune(const TrainArgs& a, std::ostream& out) {
  const RunConfig rc = load_run_config(a.common, train_flags(a));
  if (rc.checkpoint.empty()) throw ConfigError("finetune: no checkpoint given (--checkpoint)");
  if (rc.test_subjects.empty()) throw ConfigError("finetune: no subject given (--subject or test_subjects)");
  const fs::path dir = output_dir(a.common.out, rc.out, "finetune");
  echo_config(dir, rc);
  const pipeline::Checkpoint base = pipeline::load_checkpoint(rc.checkpoint);
  base.model.require_compatible(rc.model);
  const auto subjects = load_prepared(rc);

  pipeline::ProvenanceLog provenance(dir / "provenance.jsonl");
  pipeline::FinetuneOptions opts;
  opts.provenance = &provenance;
  opts.epochs = a.epochs;
  std::vector<Row> rows;
  for (const std::string& id : rc.test_subjects) {
    if (base.meta.contains("pool")) {
      for (const auto& p : base.meta.at("pool")) {
        if (p.get<std::string>() == id) throw LeakageError("subject '" + id + "' was in the checkpoint's pretraining pool");
      }
    }
    const pipeline::PreparedSubject& subject = pipeline::find_subject(subjects, id);
    const auto subs = pipeline::finetune(base, subject, rc.train, opts);
    fs::create_directories(dir / id);
    for (std::size_t k = 0; k < subs.size(); ++k) {
      pipeline::save_checkpoint(dir / id / ("submodel" + std::to_string(k) + ".ckpt"), subs[k].checkpoint);
      rows.push_back({id, std::to_string(k), join_indices(subs[k].train_seizures),
                      join_indices(subs[k].eval_seizures), std::to_string(subs[k].checkpoint.log.epochs())});
    }
  }
  const Row header{"subject", "submodel", "train_seizures", "eval_seizures", "epochs"};
  write_csv(dir / "summary.csv", header, rows);
  print_table(out, header, rows);
  return 0;
}

// A fine-tune output directory: <dir>/<subject>/submodel<k>.ckpt.
std::vector<pipeline::SubModel> load_submodels(const fs::path& dir, const std::string& subject_id) {
  std::vector<pipeline::SubModel> subs;
  for (std::size_t k = 0;; ++k) {
    const fs::path p = dir / subject_id / ("submodel" + std::to_string(k) + ".ckpt");
    if (!fs::exists(p)) break;
    pipeline::Checkpoint ck = pipeline::load_checkpoint(p);
    pipeline::SubModel sub{std::move(ck), {}, {}};
    try {
      sub.train_seizures = sub.checkpoint.meta.at("train_seizures").get<std::vector<std::size_t>>();
      sub.eval_seizures = sub.checkpoint.meta.at("eval_seizures").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError(p.string() + ": not a fine-tuned sub-model (missing seizure assignment)");
    }
    subs.push_back(std::move(sub));
  }
  if (subs.empty()) throw ConfigError("no sub-model checkpoints for '" + subject_id + "' under " + dir.string());
  return subs;
}

int cmd_eval(const TrainArgs& a, std::ostream& out) {
  const RunConfig rc = load_run_config(a.common, train_flags(a));
  if (rc.checkpoint.empty()) throw ConfigError("eval: no checkpoint given (--checkpoint: a finetune output directory)");
  if (!fs::is_directory(rc.checkpoint)) throw ConfigError("eval: checkpoint directory not found: " + rc.checkpoint);
  const fs::path dir = output_dir(a.common.out, rc.out, "eval");
  echo_config(dir, rc);
  const auto subjects = load_prepared(rc);
  std::vector<std::string> ids = rc.test_subjects;
  if (ids.empty()) {
    for (const auto& s : subjects) {
      if (fs::exists(fs::path(rc.checkpoint) / s.subject_id / "submodel0.ckpt")) ids.push_back(s.subject_id);
    }
  }
  if (ids.empty()) throw ConfigError("eval: no fine-tuned subjects under " + rc.checkpoint);
  std::vector<pipeline::EvalReport> reports;
  for (const std::string& id : ids) {
    auto subs = load_submodels(rc.checkpoint, id);
    pipeline::TrainConfig t = rc.train;
    t.scheme = pipeline::parse_scheme(subs.front().checkpoint.meta.value("scheme", to_string(rc.train.scheme)));
    reports.push_back(pipeline::evaluate(subs, pipeline::find_subject(subjects, id), t));
  }
  report_outputs(out, dir, pipeline::combine_reports(reports));
  return 0;
}

pipeline::ExperimentSetup make_setup(const RunConfig& rc, std::span<const pipeline::PreparedSubject> subjects,
                                     pipeline::ProvenanceLog* provenance) {
  if (rc.test_subjects.empty()) throw ConfigError("no test subjects (--test or test_subjects)");
  return {subjects, select_pool(rc, subjects), rc.test_subjects, rc.model, rc.train, provenance, nullptr};
}

int cmd_ablate(const TrainArgs& a, std::ostream& out) {
  const RunConfig rc = load_run_config(a.common, train_flags(a));
  const pipeline::Variant variant = pipeline::parse_variant(a.variant);
  const fs::path dir = output_dir(a.common.out, rc.out, "ablate");
  echo_config(dir, rc);
  const auto subjects = load_prepared(rc);
  pipeline::ProvenanceLog provenance(dir / "provenance.jsonl");
  pipeline::ExperimentSetup setup = make_setup(rc, subjects, &provenance);
  std::optional<pipeline::Checkpoint> pretrained;
  if (!rc.checkpoint.empty()) {
    pretrained = pipeline::load_checkpoint(rc.checkpoint);
    setup.pretrained = &*pretrained;
  }
  const pipeline::ExperimentResult r = pipeline::run_experiment(setup, variant);
  if (r.pretrain_epochs > 0 && !pretrained) pipeline::save_checkpoint(dir / "pretrained.ckpt", r.pretrained);
  out << "pretrain epochs " << r.pretrain_epochs << ", sub-models " << r.submodels << '\n';
  report_outputs(out, dir, r.report);
  return 0;
}

int cmd_scaling(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.common, train_flags(a));
  if (!a.sizes.empty()) rc.scaling_pool_sizes = a.sizes;
  const fs::path dir = output_dir(a.common.out, rc.out, "scaling");
  echo_config(dir, rc);
  const auto subjects = load_prepared(rc);
  const pipeline::ExperimentSetup setup = make_setup(rc, subjects, nullptr);
  const auto rows = pipeline::subject_scaling_experiment(setup, rc.scaling_pool_sizes);
  std::vector<Row> table;
  for (const auto& r : rows) {
    signal::write_json_file(dir / ("report_pool" + std::to_string(r.pool_size) + ".json"), r.report.to_json());
    table.push_back({std::to_string(r.pool_size), fmt(r.report.f1.median), fmt(r.report.sensitivity.median),
                     fmt(r.report.specificity.median), fmt(r.runtime_s, 1)});
  }
  const Row header{"pool_size", "f1", "sensitivity", "specificity", "runtime_s"};
  write_csv(dir / "scaling.csv", header, table);
  print_table(out, header, table);
  return 0;
}

struct InspectArgs {
  Common common;
  std::string checkpoint;
  std::string subject;
};

int cmd_inspect_keys(const InspectArgs& a, std::ostream& out) {
  if (a.checkpoint.empty()) throw ConfigError("inspect-keys: --checkpoint is required");
  if (a.subject.empty()) throw ConfigError("inspect-keys: --subject is required");
  const pipeline::Checkpoint ck = pipeline::load_checkpoint(a.checkpoint);
  if (!ck.model.has_subject(a.subject)) {
    throw ConfigError("inspect-keys: no key map for subject '" + a.subject + "' (checkpoint has: " +
                      join(ck.model.subjects()) + ")");
  }
  const fusion::ChannelKeyMap keys = ck.model.key_map(a.subject);
  const fusion::SimilarityMatrix sim = fusion::key_similarity_matrix(keys, ck.model.basis());

  std::vector<std::string> labels = signal::default_channel_labels(keys.channels());
  std::vector<int> groups;
  std::string dataset = a.common.dataset;
  if (dataset.empty() && !a.common.config.empty()) dataset = pipeline::load_config_file(a.common.config).dataset;
  if (!dataset.empty()) {
    for (const fs::path& m : signal::dataset_manifests(dataset)) {
      const nlohmann::json j = signal::read_json_file(m);
      if (j.value("subject_id", "") != a.subject) continue;
      if (j.contains("channel_labels")) labels = j.at("channel_labels").get<std::vector<std::string>>();
      if (j.contains("channel_groups")) groups = j.at("channel_groups").get<std::vector<int>>();
    }
    if (labels.size() != keys.channels()) throw DataError("inspect-keys: dataset channel count does not match the key map");
  }
  const fs::path dir = output_dir(a.common.out, "", "inspect-keys");
  write_text(dir / (a.subject + "_keys.csv"), fusion::similarity_csv(sim, labels));

  nlohmann::json summary = {{"subject", a.subject}, {"channels", keys.channels()}, {"angles", keys.angles()}};
  std::vector<Row> rows{{"channels", std::to_string(keys.channels())}};
  if (groups.size() == keys.channels()) {
    const fusion::GroupContrast gc = fusion::group_contrast(sim, groups);
    summary["within_group_mean"] = gc.within;
    summary["between_group_mean"] = gc.between;
    rows.push_back({"within_group_mean", fmt(gc.within, 4)});
    rows.push_back({"between_group_mean", fmt(gc.between, 4)});
  }
  signal::write_json_file(dir / (a.subject + "_keys_summary.json"), summary);
  print_table(out, {"statistic", "value"}, rows);
  return 0;
}

int cmd_gradcheck(const Common& c, std::ostream& out) {
  pipeline::ModelGradCheckOptions opts;
  opts.seed = c.seed.value_or(1);
  const fs::path dir = output_dir(c.out, "", "gradcheck");
  const auto results = pipeline::model_gradcheck(opts);
  std::vector<Row> rows;
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.result.max_rel_error < 1e-4;
    ok = ok && pass;
    rows.push_back({r.group, std::to_string(r.result.entries_checked), fmt(r.result.max_rel_error * 1e6, 4) + "e-6",
                    r.result.worst_param, pass ? "PASS" : "FAIL"});
  }
  const Row header{"group", "entries", "max_rel_error", "worst_param", "status"};
  write_csv(dir / "gradcheck.csv", header, rows);
  print_table(out, header, rows);
  if (!ok) throw NumericError("gradient check failed (tolerance 1e-4)");
  return 0;
}

}  // namespace

int exit_code(const std::exception& e) noexcept {
  if (const auto* he = dynamic_cast<const Error*>(&e)) {
    switch (he->kind()) {
      case ErrorKind::kConfig:
      case ErrorKind::kShape:
      case ErrorKind::kDomain:
        return 2;
      case ErrorKind::kData:
      case ErrorKind::kFormat:
        return 3;
      case ErrorKind::kLeakage:
        return 4;
      case ErrorKind::kNumeric:
        return 5;
      case ErrorKind::kState:
        return 1;
    }
  }
  return 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"holofuse: channel-adaptive seizure detection with holographic fusion"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "Generate a synthetic grouped-channel dataset");
  add_common(s, synth.common, false);
  s->add_option("--subjects", synth.subjects, "Number of subjects");
  s->add_option("--channels", synth.channels, "Channel count N or range A:B");
  s->add_option("--group-size", synth.group_size, "Channel group size N or range A:B");
  s->add_option("--seizures", synth.seizures, "Seizures per subject");
  s->add_option("--duration", synth.duration_s, "Recording length in seconds");
  s->add_option("--rate", synth.rate_hz, "Sampling rate in Hz");
  s->add_option("--context", synth.context_s, "Quiet margin around each seizure in seconds");
  s->add_option("--spatial-distractors", synth.spatial, "Bursts in a non-onset group per seizure");
  s->add_option("--temporal-distractors", synth.temporal, "Short onset-group bursts per seizure");

  CurateArgs curate;
  CLI::App* c = app.add_subcommand("curate", "Delta-power stratified curation of non-ictal data");
  add_common(c, curate.common, false);
  c->add_option("--manifest", curate.manifest, "Dataset or subject manifest");
  c->add_option("--bins", curate.bins, "Number of delta-power bins");
  c->add_option("--minutes", curate.minutes, "Minutes selected per bin");
  c->add_option("--ictal-context", curate.context_s, "Seconds around seizures excluded / exported");

  TrainArgs train;
  const auto add_train = [&](CLI::App* sub) {
    add_common(sub, train.common);
    sub->add_option("--test", train.test, "Test subject(s)")->delimiter(',');
    sub->add_option("--pool-size", train.pool_size, "Pretraining pool size (0 = all non-test subjects)");
    sub->add_option("--context", train.context, "Evaluation/training context: short | long");
  };
  CLI::App* pre = app.add_subcommand("pretrain", "Pretrain on a pool of subjects");
  add_train(pre);
  CLI::App* fin = app.add_subcommand("finetune", "Fine-tune a pretrained checkpoint per test subject (LOOC/LABOC)");
  add_train(fin);
  fin->add_option("--checkpoint", train.checkpoint, "Pretrained checkpoint");
  fin->add_option("--subject", train.test, "Subject(s) to fine-tune on")->delimiter(',');
  fin->add_option("--scheme", train.scheme, "looc | laboc");
  fin->add_option("--epochs", train.epochs, "Override the epoch budget");
  CLI::App* ev = app.add_subcommand("eval", "Evaluate fine-tuned sub-models");
  add_train(ev);
  ev->add_option("--checkpoint", train.checkpoint, "Fine-tune output directory");
  ev->add_option("--subject", train.test, "Subject(s) to evaluate")->delimiter(',');
  CLI::App* abl = app.add_subcommand("ablate", "Run one experiment variant end to end");
  add_train(abl);
  abl->add_option("--variant", train.variant, "full | no_pretrain | mean_fusion | no_memory");
  abl->add_option("--scheme", train.scheme, "looc | laboc");
  abl->add_option("--checkpoint", train.checkpoint, "Reuse this pretrained checkpoint");
  CLI::App* sc = app.add_subcommand("scaling", "Subject-scaling experiment over pretraining pool sizes");
  add_train(sc);
  sc->add_option("--sizes", train.sizes, "Pool sizes")->delimiter(',');

  InspectArgs inspect;
  CLI::App* ik = app.add_subcommand("inspect-keys", "Export a subject's key similarity matrix");
  add_common(ik, inspect.common);
  ik->add_option("--checkpoint", inspect.checkpoint, "Checkpoint file");
  ik->add_option("--subject", inspect.subject, "Subject id");

  Common grad;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradients");
  add_common(gc, grad, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*c) return cmd_curate(curate, out);
    if (*pre) return cmd_pretrain(train, out);
    if (*fin) return cmd_finetune(train, out);
    if (*ev) return cmd_eval(train, out);
    if (*abl) return cmd_ablate(train, out);
    if (*sc) return cmd_scaling(train, out);
    if (*ik) return cmd_inspect_keys(inspect, out);
    if (*gc) return cmd_gradcheck(grad, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return 1;
}

}  // namespace holofuse::cli
