#pragma once

// Pre-training, curriculum pseudo-labeling and semi-supervised epochs,
// plus the Adam optimizer and heart-rate metrics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulse/curriculum.hpp"
#include "pulse/losses.hpp"
#include "pulse/model.hpp"
#include "pulse/synth.hpp"

namespace pulse {

enum class Protocol { full, partial, semi };
enum class ConsistencyOn { none, labeled, unlabeled, both };
enum class SelectionPolicy { top_k, threshold };

Protocol parse_protocol(const std::string& name);
std::string protocol_name(Protocol protocol);
ConsistencyOn parse_consistency(const std::string& name);
std::string consistency_name(ConsistencyOn on);

struct TrainConfig {
  int e_total = 20;
  int e_pre = 1;
  std::size_t batch_supervised = 4;
  std::size_t batch_semi = 2;
  double learning_rate = 1e-4;
  // From this semi epoch on the rate drops to lr_decayed; negative disables.
  int lr_decay_epoch = -1;
  double lr_decayed = 1e-5;
  LossConfig loss;
  CurriculumSchedule schedule;
  CriterionKind criterion = CriterionKind::snr;
  ConsistencyOn consistency_on = ConsistencyOn::both;
  SelectionPolicy selection = SelectionPolicy::top_k;
  double snr_threshold = 0.5;
  ModelSpec model;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update. Throws NonFiniteGradient, leaving params
// and state untouched, if any gradient entry is NaN or Inf.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamHyper& hyper = {});

struct LabeledExample {
  std::string id;
  PooledClip clip;
  BvpSignal truth;
  HrClass hr;
};

struct TrainingData {
  std::vector<LabeledExample> labeled;
  std::vector<UnlabeledExample> unlabeled;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
};

// Ground truth of unlabeled clips, kept apart from TrainingData so the
// trainer cannot read it. Used only for the unlabeled-MAE audit column.
struct AuditTruth {
  std::map<std::string, int> unlabeled_bpm;
};

struct LoadedDataset {
  TrainingData data;
  AuditTruth audit;
};

// full: unlabeled clips join the labeled set with their stored truth.
// partial: the unlabeled split is not loaded. semi: unlabeled clips lose
// their truth on load.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path, Protocol protocol,
                           const BandConfig& band);

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  // NaN when either series is constant.
  double r = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

Metrics compute_metrics(std::span<const double> predicted_bpm, std::span<const double> true_bpm);

// Degenerate predictions are scored as the lowest class.
int predict_bpm(const ModelParams& params, const PooledClip& clip, const BandConfig& band);

struct Evaluation {
  Metrics metrics;
  std::vector<int> predicted_bpm;
};

Evaluation evaluate(const ModelParams& params, const std::vector<LabeledExample>& examples,
                    const BandConfig& band);

// One supervision target in the merged set: real labels or a pseudo-label.
struct SupervisedItem {
  const PooledClip* clip = nullptr;
  const BvpSignal* target = nullptr;
  HrClass hr;
  std::string id;
};

struct PassOptions {
  std::size_t batch = 4;
  bool consistency_labeled = false;
  bool consistency_unlabeled = false;
  double lr = 1e-4;
};

struct PassStats {
  double l_s = 0.0;
  double l_c = 0.0;
  std::size_t steps = 0;
  std::size_t skipped_samples = 0;
  std::size_t skipped_steps = 0;

  bool finite() const;
};

// Per-purpose random streams, all derived from the run seed.
struct RunStreams {
  Rng shuffle;
  Rng unlabeled;
  Rng augment;

  explicit RunStreams(std::uint64_t seed);
};

// One pass over `merged` in shuffled batches. When unlabeled consistency is
// on, each step also draws `batch` clips cyclically from `unlabeled`.
PassStats train_pass(ModelParams& params, AdamState& adam, const std::vector<SupervisedItem>& merged,
                     const std::vector<UnlabeledExample>& unlabeled, const TrainConfig& cfg,
                     const PassOptions& options, RunStreams& streams);

// One pre-training pass over the labeled set: L_s plus, for the semi
// protocol, labeled consistency. run() repeats it e_pre times.
PassStats pretrain_epoch(ModelParams& params, AdamState& adam, const TrainingData& data,
                         const TrainConfig& cfg, RunStreams& streams, bool semi);

struct EpochReport {
  int epoch = 0;
  double l_s = 0.0;
  double l_c = 0.0;
  std::size_t k = 0;
  double mean_snr = 0.0;  // NaN when nothing is selected
  Metrics validation;
  double unlabeled_mae = 0.0;  // NaN without unlabeled clips
};

struct RunResult {
  Protocol protocol = Protocol::semi;
  std::vector<EpochReport> epochs;
  std::vector<PseudoLabelRecord> audit;  // every epoch; signals kept for the last one only
  Metrics validation;
  Metrics test;
  ModelParams params;
};

RunResult run(Protocol protocol, const TrainingData& data, const TrainConfig& cfg,
              const AuditTruth* audit = nullptr);

inline constexpr const char* kEpochCsvHeader =
    "epoch,l_s,l_c,k,mean_snr,val_mae,val_rmse,val_r,val_sd,unlabeled_mae";
inline constexpr const char* kAuditCsvHeader = "epoch,clip_id,hr_bpm,snr,selected";

// Shortest round-trip decimal; "nan" for NaN.
std::string format_number(double v);

struct NamedSignal {
  std::string id;
  BvpSignal signal;
};

// One signal per row: id,fps,sample0,sample1,... after the header line.
inline constexpr const char* kSignalCsvHeader = "id,fps,samples";
void write_signals_csv(const std::filesystem::path& path, const std::vector<NamedSignal>& signals);
std::vector<NamedSignal> read_signals_csv(const std::filesystem::path& path);

// epochs.csv, pseudo_labels.csv, pseudo_signals.csv, metrics.json and the
// model checkpoint (model.bin + model.json).
void write_run(const RunResult& result, const TrainConfig& cfg, const std::filesystem::path& dir);

}  // namespace pulse
