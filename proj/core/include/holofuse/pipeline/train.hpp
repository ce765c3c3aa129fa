#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "holofuse/pipeline/checkpoint.hpp"
#include "holofuse/pipeline/config.hpp"
#include "holofuse/pipeline/data.hpp"
#include "holofuse/pipeline/metrics.hpp"

namespace holofuse::pipeline {

struct ProvenanceRecord {
  std::string phase;
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::string subject_id;
  std::vector<std::string> segments;
};

// Per-batch record of which data went into training; optionally mirrored to
// a JSON-lines file.
class ProvenanceLog {
 public:
  ProvenanceLog() = default;
  explicit ProvenanceLog(const std::filesystem::path& jsonl_path);

  void add(ProvenanceRecord record);
  [[nodiscard]] const std::vector<ProvenanceRecord>& records() const noexcept { return records_; }
  [[nodiscard]] bool mentions(const std::string& subject_id, const std::string& phase) const;

 private:
  std::vector<ProvenanceRecord> records_;
  std::unique_ptr<std::ofstream> file_;
};

// Draws the pretraining subject of each batch; exposed for testing.
class SubjectSampler {
 public:
  SubjectSampler(std::uint64_t seed, std::size_t pool_size);
  [[nodiscard]] std::size_t next();

 private:
  Rng rng_;
  std::size_t pool_size_;
};

// Stop after epoch e (1-based) when e >= min epochs and the best F1 so far
// gained less than min_delta over the last `window` epochs; never beyond max.
[[nodiscard]] bool plateau_reached(std::span<const double> epoch_f1, const TrainConfig& config);

// Epoch budget for fine-tuning after `pretrain_epochs` of pretraining (0 when
// pretraining was skipped): min(max_epochs, pretrain_epochs / ratio), >= 1.
[[nodiscard]] std::size_t finetune_epoch_budget(const TrainConfig& config, std::size_t pretrain_epochs);

struct PretrainOptions {
  ProvenanceLog* provenance = nullptr;
  // Subjects that must not be trained on (the test subjects).
  std::vector<std::string> held_out;
  std::function<void(std::size_t epoch, double f1, double loss)> on_epoch;
};

// Fresh model with encoder/head weights from the seed's "model/init" stream.
[[nodiscard]] Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train);

// LeakageError when a held-out subject is in the pool, or shows up in the
// provenance of any batch.
[[nodiscard]] Checkpoint pretrain(std::span<const PreparedSubject* const> pool, const ModelConfig& model,
                                  const TrainConfig& train, const PretrainOptions& options = {});

struct SubModel {
  Checkpoint checkpoint;
  std::vector<std::size_t> train_seizures;
  std::vector<std::size_t> eval_seizures;
};

struct FinetuneOptions {
  ProvenanceLog* provenance = nullptr;
  // Override of finetune_epoch_budget(); 0 keeps the rule.
  std::size_t epochs = 0;
};

// LOOC: sub-model k trains on every seizure but k; LABOC: on seizure k only.
// Each starts from `base` with a fresh key map for the subject and a reset
// optimizer. DataError when the subject has fewer than two seizures.
[[nodiscard]] std::vector<SubModel> finetune(const Checkpoint& base, const PreparedSubject& subject,
                                             const TrainConfig& train, const FinetuneOptions& options = {});

struct UnitResult {
  std::string subject_id;
  std::size_t submodel = 0;
  std::size_t seizure = 0;
  Confusion confusion;
  Metrics metrics;
};

struct SubjectResult {
  std::string subject_id;
  Confusion confusion;
  Distribution f1;
  Distribution sensitivity;
  Distribution specificity;
};

struct EvalReport {
  std::string variant = "full";
  std::string scheme = "looc";
  double context_s = 0.0;
  std::vector<UnitResult> units;
  std::vector<SubjectResult> subjects;
  // Across subjects, of each subject's median.
  Distribution f1;
  Distribution sensitivity;
  Distribution specificity;
  Confusion confusion;
  nlohmann::json extra = nlohmann::json::object();

  [[nodiscard]] nlohmann::json to_json() const;
};

// Window probabilities for stacks ending at patches range.first + M - 1 .. range.last.
[[nodiscard]] std::vector<double> predict_range(CaModel& model, const PreparedSubject& subject,
                                                const PatchRange& range);

// Each sub-model is scored on its own held-out seizures (eval_context_s of
// context each side). LeakageError when a held-out window contains a seizure
// the sub-model trained on.
[[nodiscard]] EvalReport evaluate(std::span<SubModel> submodels, const PreparedSubject& subject,
                                  const TrainConfig& train);

// Per-subject reports -> one report with subject-level summary statistics.
[[nodiscard]] EvalReport combine_reports(std::span<const EvalReport> reports);

struct ExperimentSetup {
  std::span<const PreparedSubject> subjects;
  std::vector<std::string> pool;
  std::vector<std::string> test;
  ModelConfig model;
  TrainConfig train;
  ProvenanceLog* provenance = nullptr;
  // Reused instead of pretraining when set (must match the variant's model).
  const Checkpoint* pretrained = nullptr;
};

struct ExperimentResult {
  EvalReport report;
  std::size_t pretrain_epochs = 0;
  std::vector<std::size_t> finetune_epochs;
  std::size_t submodels = 0;
  Checkpoint pretrained;
};

// Model config for an ablation variant (fusion -> mean, head -> MLP).
[[nodiscard]] ModelConfig variant_model(ModelConfig model, Variant variant);

// pretrain (unless no_pretrain) -> finetune each test subject -> evaluate.
[[nodiscard]] ExperimentResult run_experiment(const ExperimentSetup& setup, Variant variant);

struct ScalingRow {
  std::size_t pool_size = 0;
  std::vector<std::string> pool;
  EvalReport report;
  double runtime_s = 0.0;
};

// One run per pool size, pools drawn from the non-test subjects with seeds
// derived per size.
[[nodiscard]] std::vector<ScalingRow> subject_scaling_experiment(const ExperimentSetup& setup,
                                                                 std::span<const std::size_t> pool_sizes);

[[nodiscard]] const PreparedSubject& find_subject(std::span<const PreparedSubject> subjects, const std::string& id);

}  // namespace holofuse::pipeline
