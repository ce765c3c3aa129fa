#include "holofuse/pipeline/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "holofuse/errors.hpp"
#include "holofuse/random.hpp"

namespace holofuse::pipeline {

namespace {

struct Piece {
  PatchRange range;
  std::string id;
};

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

std::size_t stack_count(const PatchRange& r, std::size_t m) { return r.size() + 1 - m; }

// Inverse class frequency over every stack the pieces can produce.
ClassWeights class_weights(const PreparedSubject& subject, std::span<const Piece> pieces, std::size_t m,
                           std::size_t& positives, std::size_t& total) {
  for (const Piece& p : pieces) {
    const auto& labels = subject.recordings[p.range.recording].layout.labels;
    for (std::size_t e = p.range.first + m - 1; e <= p.range.last; ++e) {
      positives += labels[e];
      ++total;
    }
  }
  ClassWeights w;
  if (positives > 0 && positives < total) {
    w.positive = static_cast<double>(total) / (2.0 * static_cast<double>(positives));
    w.negative = static_cast<double>(total) / (2.0 * static_cast<double>(total - positives));
  }
  return w;
}

void set_key_rate(Checkpoint& ckpt, const std::string& subject_id) {
  nn::Param& p = ckpt.model.params().at(CaModel::key_name(subject_id));
  p.lr_scale = ckpt.train.key_learning_rate / ckpt.train.learning_rate;
}

struct BatchOutcome {
  double loss = 0.0;
  std::vector<std::string> segments;
};

// One optimizer step on `batch_size` stacks drawn as `segments_per_batch`
// runs of consecutive stacks from random pieces of one subject.
BatchOutcome train_batch(Checkpoint& ckpt, const PreparedSubject& subject, std::span<const Piece> pieces,
                         const ClassWeights& weights, Rng& rng, Confusion& confusion) {
  const TrainConfig& cfg = ckpt.train;
  const std::size_t m = ckpt.model.config().memory_length;
  const std::size_t C = subject.channels();
  const std::size_t W = ckpt.model.config().encoder.window_samples;

  struct Segment {
    const Piece* piece;
    std::size_t first_end;
    std::size_t stacks;
  };
  std::vector<Segment> segments;
  std::size_t total_patches = 0;
  for (std::size_t i = 0; i < cfg.segments_per_batch; ++i) {
    const std::size_t want = cfg.batch_size / cfg.segments_per_batch + (i < cfg.batch_size % cfg.segments_per_batch ? 1 : 0);
    const Piece& piece = pieces[uniform_index(rng, pieces.size())];
    const std::size_t available = stack_count(piece.range, m);
    const std::size_t stacks = std::min(want, available);
    const std::size_t first_end = piece.range.first + m - 1 + uniform_index(rng, available - stacks + 1);
    segments.push_back({&piece, first_end, stacks});
    total_patches += stacks + m - 1;
  }

  nn::Tensor patches({total_patches * C, 1, W});
  std::vector<std::size_t> ends;
  std::vector<double> labels;
  BatchOutcome outcome;
  std::size_t row = 0;
  for (const Segment& s : segments) {
    const PreparedRecording& rec = subject.recordings[s.piece->range.recording];
    const std::size_t first_patch = s.first_end + 1 - m;
    const std::size_t count = s.stacks + m - 1;
    const nn::Tensor part = patch_tensor(rec, first_patch, count);
    std::copy(part.data().begin(), part.data().end(), patches.data().begin() + static_cast<std::ptrdiff_t>(row * C * W));
    for (std::size_t t = 0; t < s.stacks; ++t) {
      ends.push_back(row + m - 1 + t);
      labels.push_back(rec.layout.labels[s.first_end + t]);
    }
    row += count;
    outcome.segments.push_back(s.piece->id + "@" + std::to_string(s.first_end));
  }

  std::vector<double> sample_weights(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sample_weights[i] = labels[i] > 0.5 ? weights.positive : weights.negative;
  }
  ckpt.model.params().zero_grad();
  nn::Graph graph;
  const nn::Var logits = ckpt.model.logits(graph, patches, C, ends, subject.subject_id);
  const nn::Var loss = nn::weighted_bce_with_logits(logits, labels, sample_weights);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    confusion.add(logits.value()[i] >= 0.0, labels[i] > 0.5);
  }
  graph.backward(loss);
  nn::adam_step(ckpt.model.params(), cfg.learning_rate);
  outcome.loss = loss.value()[0];
  return outcome;
}

std::vector<Piece> unit_pieces(std::span<const SeizureUnit> units) {
  std::vector<Piece> pieces;
  for (const SeizureUnit& u : units) pieces.push_back({u.range, u.id()});
  return pieces;
}

// Time span covered by a unit's patches.
std::pair<double, double> unit_span(const PreparedSubject& subject, const SeizureUnit& u) {
  const auto& l = subject.recordings[u.range.recording].layout;
  return {l.start_s(u.range.first), l.end_s(u.range.last)};
}

void check_split(const PreparedSubject& subject, std::span<const SeizureUnit> eval_units,
                 std::span<const std::size_t> train_seizures, std::span<const std::size_t> eval_seizures) {
  for (std::size_t e : eval_seizures) {
    const SeizureUnit& u = eval_units[e];
    const auto [lo, hi] = unit_span(subject, u);
    for (std::size_t t : train_seizures) {
      const SeizureUnit& tu = eval_units[t];
      if (t == e || (tu.range.recording == u.range.recording && tu.annotation.onset_s < hi &&
                     tu.annotation.offset_s > lo)) {
        throw LeakageError("subject '" + subject.subject_id + "': evaluation window of seizure " +
                           std::to_string(e) + " overlaps training seizure " + std::to_string(t));
      }
    }
  }
}

}  // namespace

ProvenanceLog::ProvenanceLog(const std::filesystem::path& jsonl_path)
    : file_(std::make_unique<std::ofstream>(jsonl_path, std::ios::trunc)) {
  if (!*file_) throw DataError("cannot write provenance log " + jsonl_path.string());
}

void ProvenanceLog::add(ProvenanceRecord record) {
  if (file_) {
    const nlohmann::json j = {{"phase", record.phase},
                              {"epoch", record.epoch},
                              {"batch", record.batch},
                              {"subject_id", record.subject_id},
                              {"segments", record.segments}};
    *file_ << j.dump() << '\n';
  }
  records_.push_back(std::move(record));
}

bool ProvenanceLog::mentions(const std::string& subject_id, const std::string& phase) const {
  return std::any_of(records_.begin(), records_.end(), [&](const ProvenanceRecord& r) {
    return r.subject_id == subject_id && r.phase == phase;
  });
}

SubjectSampler::SubjectSampler(std::uint64_t seed, std::size_t pool_size)
    : rng_(make_stream(seed, "pretrain/subjects")), pool_size_(pool_size) {
  if (pool_size == 0) throw ConfigError("pretraining pool is empty");
}

std::size_t SubjectSampler::next() { return uniform_index(rng_, pool_size_); }

bool plateau_reached(std::span<const double> epoch_f1, const TrainConfig& config) {
  const std::size_t e = epoch_f1.size();
  if (e >= config.pretrain_max_epochs) return true;
  if (e < config.pretrain_min_epochs || e <= config.plateau_window) return false;
  const auto best_until = [&](std::size_t n) { return *std::max_element(epoch_f1.begin(), epoch_f1.begin() + static_cast<std::ptrdiff_t>(n)); };
  return best_until(e) - best_until(e - config.plateau_window) < config.plateau_min_delta;
}

std::size_t finetune_epoch_budget(const TrainConfig& config, std::size_t pretrain_epochs) {
  if (pretrain_epochs == 0) return config.finetune_max_epochs;
  return std::max<std::size_t>(1, std::min(config.finetune_max_epochs, pretrain_epochs / config.finetune_epoch_ratio));
}

Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train) {
  train.validate();
  Checkpoint ckpt{CaModel(model), train, {}, {{"stage", "init"}}};
  Rng rng = make_stream(train.seed, "model/init");
  ckpt.model.init(rng);
  return ckpt;
}

Checkpoint pretrain(std::span<const PreparedSubject* const> pool, const ModelConfig& model, const TrainConfig& train,
                    const PretrainOptions& options) {
  if (pool.empty()) throw ConfigError("pretraining pool is empty");
  std::vector<std::string> ids;
  for (const PreparedSubject* s : pool) {
    if (std::find(options.held_out.begin(), options.held_out.end(), s->subject_id) != options.held_out.end()) {
      throw LeakageError("test subject '" + s->subject_id + "' is in the pretraining pool");
    }
    ids.push_back(s->subject_id);
  }

  Checkpoint ckpt = initial_checkpoint(model, train);
  const std::size_t m = model.memory_length;
  std::vector<std::vector<Piece>> pieces(pool.size());
  std::size_t positives = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    pieces[i] = unit_pieces(seizure_units(*pool[i], train.train_context_s, m));
    if (pieces[i].empty()) throw DataError("pool subject '" + pool[i]->subject_id + "' has no seizures");
    ckpt.model.add_subject(pool[i]->subject_id, pool[i]->channels());
    set_key_rate(ckpt, pool[i]->subject_id);
  }
  std::vector<ClassWeights> weights(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    std::size_t p = 0;
    std::size_t n = 0;
    (void)class_weights(*pool[i], pieces[i], m, p, n);
    positives += p;
    total += n;
  }
  ClassWeights pooled;
  if (positives > 0 && positives < total) {
    pooled.positive = static_cast<double>(total) / (2.0 * static_cast<double>(positives));
    pooled.negative = static_cast<double>(total) / (2.0 * static_cast<double>(total - positives));
  }

  SubjectSampler sampler(train.seed, pool.size());
  Rng rng = make_stream(train.seed, "pretrain/batches");
  std::set<std::string> used;
  while (true) {
    Confusion confusion;
    double loss_sum = 0.0;
    const std::size_t epoch = ckpt.log.epochs() + 1;
    for (std::size_t b = 0; b < train.batches_per_epoch; ++b) {
      const std::size_t s = sampler.next();
      const BatchOutcome out = train_batch(ckpt, *pool[s], pieces[s], pooled, rng, confusion);
      loss_sum += out.loss;
      used.insert(pool[s]->subject_id);
      if (options.provenance) options.provenance->add({"pretrain", epoch, b, pool[s]->subject_id, out.segments});
    }
    const double f1 = score(confusion).f1;
    ckpt.log.epoch_f1.push_back(f1);
    ckpt.log.epoch_loss.push_back(loss_sum / static_cast<double>(train.batches_per_epoch));
    if (options.on_epoch) options.on_epoch(epoch, f1, ckpt.log.epoch_loss.back());
    if (plateau_reached(ckpt.log.epoch_f1, train)) break;
  }

  for (const std::string& h : options.held_out) {
    if (used.count(h) || (options.provenance && options.provenance->mentions(h, "pretrain"))) {
      throw LeakageError("test subject '" + h + "' appears in the pretraining provenance");
    }
  }
  ckpt.meta = {{"stage", "pretrain"}, {"pool", ids}, {"pretrain_epochs", ckpt.log.epochs()}};
  return ckpt;
}

std::vector<SubModel> finetune(const Checkpoint& base, const PreparedSubject& subject, const TrainConfig& train,
                               const FinetuneOptions& options) {
  train.validate();
  const std::size_t m = base.model.config().memory_length;
  const std::vector<SeizureUnit> train_units = seizure_units(subject, train.train_context_s, m);
  const std::vector<SeizureUnit> eval_units = seizure_units(subject, train.eval_context_s, m);
  const std::size_t n = train_units.size();
  if (n < 2) {
    throw DataError("subject '" + subject.subject_id + "' has " + std::to_string(n) + " seizure(s); " +
                    to_string(train.scheme) + " fine-tuning needs at least 2");
  }
  std::size_t pretrain_epochs = 0;
  if (base.meta.contains("pretrain_epochs")) pretrain_epochs = base.meta.at("pretrain_epochs").get<std::size_t>();
  const std::size_t epochs = options.epochs ? options.epochs : finetune_epoch_budget(train, pretrain_epochs);
  if (epochs > train.finetune_max_epochs) {
    throw ConfigError("fine-tuning epochs " + std::to_string(epochs) + " exceed the maximum of " +
                      std::to_string(train.finetune_max_epochs));
  }

  std::vector<SubModel> out;
  for (std::size_t k = 0; k < n; ++k) {
    SubModel sub{base, {}, {}};
    for (std::size_t s = 0; s < n; ++s) {
      const bool in_train = train.scheme == Scheme::looc ? s != k : s == k;
      (in_train ? sub.train_seizures : sub.eval_seizures).push_back(s);
    }
    check_split(subject, eval_units, sub.train_seizures, sub.eval_seizures);
    std::vector<PatchRange> holes;
    for (std::size_t e : sub.eval_seizures) holes.push_back(eval_units[e].range);
    std::vector<Piece> pieces;
    for (std::size_t t : sub.train_seizures) {
      for (const PatchRange& r : subtract_ranges(train_units[t].range, holes, m)) {
        pieces.push_back({r, train_units[t].id()});
      }
    }
    if (pieces.empty()) {
      throw DataError("subject '" + subject.subject_id + "': no training context left for sub-model " +
                      std::to_string(k));
    }

    Checkpoint& ckpt = sub.checkpoint;
    ckpt.train = train;
    const std::vector<std::string> keep{subject.subject_id};
    ckpt.model.keep_subjects(keep);
    ckpt.model.add_subject(subject.subject_id, subject.channels());
    set_key_rate(ckpt, subject.subject_id);
    for (auto& [name, p] : ckpt.model.params()) {
      p.m.fill(0.0);
      p.v.fill(0.0);
      p.step = 0;
      p.frozen = train.freeze_all_but_fusion && name != CaModel::key_name(subject.subject_id);
    }
    ckpt.log = {};

    std::size_t positives = 0;
    std::size_t total = 0;
    const ClassWeights weights = class_weights(subject, pieces, m, positives, total);
    Rng rng = make_stream(train.seed, "finetune/" + subject.subject_id + "/" + std::to_string(k));
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
      Confusion confusion;
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < train.finetune_batches_per_epoch; ++b) {
        const BatchOutcome o = train_batch(ckpt, subject, pieces, weights, rng, confusion);
        loss_sum += o.loss;
        if (options.provenance) options.provenance->add({"finetune", epoch, b, subject.subject_id, o.segments});
      }
      ckpt.log.epoch_f1.push_back(score(confusion).f1);
      ckpt.log.epoch_loss.push_back(loss_sum / static_cast<double>(train.finetune_batches_per_epoch));
    }
    ckpt.meta = {{"stage", "finetune"},
                 {"subject", subject.subject_id},
                 {"scheme", to_string(train.scheme)},
                 {"submodel", k},
                 {"train_seizures", sub.train_seizures},
                 {"eval_seizures", sub.eval_seizures},
                 {"pretrain_epochs", pretrain_epochs},
                 {"finetune_epochs", epochs}};
    out.push_back(std::move(sub));
  }
  return out;
}

std::vector<double> predict_range(CaModel& model, const PreparedSubject& subject, const PatchRange& range) {
  const std::size_t m = model.config().memory_length;
  const std::size_t C = subject.channels();
  const PreparedRecording& rec = subject.recordings.at(range.recording);
  if (range.size() < m) throw DataError("range shorter than the memory length");
  constexpr std::size_t kChunk = 64;
  std::vector<double> probs;
  for (std::size_t e0 = range.first + m - 1; e0 <= range.last; e0 += kChunk) {
    const std::size_t e1 = std::min(range.last, e0 + kChunk - 1);
    const std::size_t first_patch = e0 + 1 - m;
    const nn::Tensor patches = patch_tensor(rec, first_patch, e1 - first_patch + 1);
    std::vector<std::size_t> ends;
    for (std::size_t e = e0; e <= e1; ++e) ends.push_back(e - first_patch);
    nn::Graph graph;
    const nn::Var logits = model.logits(graph, patches, C, ends, subject.subject_id);
    for (std::size_t i = 0; i < ends.size(); ++i) probs.push_back(nn::sigmoid(logits.value()[i]));
  }
  return probs;
}

EvalReport evaluate(std::span<SubModel> submodels, const PreparedSubject& subject, const TrainConfig& train) {
  if (submodels.empty()) throw ConfigError("nothing to evaluate: no sub-models");
  const std::size_t m = submodels.front().checkpoint.model.config().memory_length;
  const std::vector<SeizureUnit> units = seizure_units(subject, train.eval_context_s, m);
  EvalReport report;
  report.scheme = to_string(train.scheme);
  report.context_s = train.eval_context_s;
  SubjectResult subject_result;
  subject_result.subject_id = subject.subject_id;
  std::vector<double> f1s, sens, specs;
  for (std::size_t k = 0; k < submodels.size(); ++k) {
    SubModel& sub = submodels[k];
    for (std::size_t s : sub.eval_seizures) {
      if (s >= units.size()) throw ConfigError("sub-model refers to a seizure the subject does not have");
    }
    check_split(subject, units, sub.train_seizures, sub.eval_seizures);
    for (std::size_t s : sub.eval_seizures) {
      const SeizureUnit& u = units[s];
      const std::vector<double> probs = predict_range(sub.checkpoint.model, subject, u.range);
      const auto& labels = subject.recordings[u.range.recording].layout.labels;
      UnitResult r;
      r.subject_id = subject.subject_id;
      r.submodel = k;
      r.seizure = s;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        r.confusion.add(probs[i] >= 0.5, labels[u.range.first + m - 1 + i] != 0);
      }
      r.metrics = score(r.confusion);
      subject_result.confusion += r.confusion;
      f1s.push_back(r.metrics.f1);
      sens.push_back(r.metrics.sensitivity);
      specs.push_back(r.metrics.specificity);
      report.units.push_back(r);
    }
  }
  subject_result.f1 = describe(f1s);
  subject_result.sensitivity = describe(sens);
  subject_result.specificity = describe(specs);
  report.subjects.push_back(subject_result);
  std::vector<EvalReport> single{report};
  return combine_reports(single);
}

EvalReport combine_reports(std::span<const EvalReport> reports) {
  EvalReport out;
  if (reports.empty()) return out;
  out.variant = reports.front().variant;
  out.scheme = reports.front().scheme;
  out.context_s = reports.front().context_s;
  std::vector<double> f1s, sens, specs;
  for (const EvalReport& r : reports) {
    out.units.insert(out.units.end(), r.units.begin(), r.units.end());
    for (const SubjectResult& s : r.subjects) {
      out.subjects.push_back(s);
      out.confusion += s.confusion;
      f1s.push_back(s.f1.median);
      sens.push_back(s.sensitivity.median);
      specs.push_back(s.specificity.median);
    }
  }
  out.f1 = describe(f1s);
  out.sensitivity = describe(sens);
  out.specificity = describe(specs);
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json units_json = nlohmann::json::array();
  for (const UnitResult& u : units) {
    units_json.push_back({{"subject_id", u.subject_id},
                          {"submodel", u.submodel},
                          {"seizure", u.seizure},
                          {"confusion", pipeline::to_json(u.confusion)},
                          {"metrics", pipeline::to_json(u.metrics)}});
  }
  nlohmann::json subjects_json = nlohmann::json::array();
  for (const SubjectResult& s : subjects) {
    subjects_json.push_back({{"subject_id", s.subject_id},
                             {"confusion", pipeline::to_json(s.confusion)},
                             {"f1", pipeline::to_json(s.f1)},
                             {"sensitivity", pipeline::to_json(s.sensitivity)},
                             {"specificity", pipeline::to_json(s.specificity)}});
  }
  return {{"variant", variant},
          {"scheme", scheme},
          {"context_s", context_s},
          {"threshold", 0.5},
          {"summary",
           {{"f1", pipeline::to_json(f1)},
            {"sensitivity", pipeline::to_json(sensitivity)},
            {"specificity", pipeline::to_json(specificity)},
            {"confusion", pipeline::to_json(confusion)}}},
          {"subjects", subjects_json},
          {"units", units_json},
          {"extra", extra}};
}

const PreparedSubject& find_subject(std::span<const PreparedSubject> subjects, const std::string& id) {
  for (const PreparedSubject& s : subjects) {
    if (s.subject_id == id) return s;
  }
  throw ConfigError("unknown subject '" + id + "'");
}

ModelConfig variant_model(ModelConfig model, Variant variant) {
  if (variant == Variant::mean_fusion) model.fusion = FusionMode::mean;
  if (variant == Variant::no_memory) model.head = HeadMode::mlp;
  return model;
}

ExperimentResult run_experiment(const ExperimentSetup& setup, Variant variant) {
  const ModelConfig model = variant_model(setup.model, variant);
  for (const std::string& t : setup.test) {
    if (std::find(setup.pool.begin(), setup.pool.end(), t) != setup.pool.end()) {
      throw LeakageError("test subject '" + t + "' is in the pretraining pool");
    }
  }
  ExperimentResult result{{}, 0, {}, 0, initial_checkpoint(model, setup.train)};
  if (variant != Variant::no_pretrain) {
    if (setup.pretrained) {
      setup.pretrained->model.require_compatible(model);
      if (setup.pretrained->model.config().fusion != model.fusion || setup.pretrained->model.config().head != model.head) {
        throw ConfigError("supplied pretrained checkpoint does not match variant " + to_string(variant));
      }
      result.pretrained = *setup.pretrained;
    } else {
      std::vector<const PreparedSubject*> pool;
      for (const std::string& id : setup.pool) pool.push_back(&find_subject(setup.subjects, id));
      PretrainOptions opts;
      opts.provenance = setup.provenance;
      opts.held_out = setup.test;
      result.pretrained = pretrain(pool, model, setup.train, opts);
    }
    result.pretrain_epochs = result.pretrained.log.epochs();
  }
  std::vector<EvalReport> reports;
  for (const std::string& id : setup.test) {
    const PreparedSubject& subject = find_subject(setup.subjects, id);
    FinetuneOptions fo;
    fo.provenance = setup.provenance;
    std::vector<SubModel> subs = finetune(result.pretrained, subject, setup.train, fo);
    for (const SubModel& s : subs) result.finetune_epochs.push_back(s.checkpoint.log.epochs());
    result.submodels += subs.size();
    reports.push_back(evaluate(subs, subject, setup.train));
  }
  result.report = combine_reports(reports);
  result.report.variant = to_string(variant);
  result.report.extra = {{"pool", setup.pool},
                         {"test", setup.test},
                         {"pretrain_epochs", result.pretrain_epochs},
                         {"finetune_epochs", result.finetune_epochs}};
  return result;
}

std::vector<ScalingRow> subject_scaling_experiment(const ExperimentSetup& setup, std::span<const std::size_t> pool_sizes) {
  std::vector<std::string> candidates;
  for (const PreparedSubject& s : setup.subjects) {
    if (std::find(setup.test.begin(), setup.test.end(), s.subject_id) == setup.test.end()) {
      candidates.push_back(s.subject_id);
    }
  }
  std::vector<ScalingRow> rows;
  for (std::size_t size : pool_sizes) {
    if (size == 0 || size > candidates.size()) {
      throw ConfigError("pool size " + std::to_string(size) + " needs more than the " +
                        std::to_string(candidates.size()) + " non-test subjects available");
    }
    Rng rng = make_stream(setup.train.seed, "scaling/pool" + std::to_string(size));
    std::vector<std::string> order = candidates;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    order.resize(size);
    ExperimentSetup run = setup;
    run.pool = order;
    run.pretrained = nullptr;
    run.train.seed = stream_seed(setup.train.seed, "scaling/run" + std::to_string(size));
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult r = run_experiment(run, Variant::full);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.report.extra["pool_size"] = size;
    r.report.extra["runtime_s"] = seconds;
    rows.push_back({size, order, std::move(r.report), seconds});
  }
  return rows;
}

}  // namespace holofuse::pipeline
