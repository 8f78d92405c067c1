#pragma once

// Pseudo-label generation, quality scoring and ratio-scheduled selection.

#include <cstddef>
#include <string>
#include <vector>

#include "pulse/model.hpp"
#include "pulse/signal.hpp"

namespace pulse {

enum class ScheduleDirection { increasing, decreasing, fixed };

struct CurriculumSchedule {
  double m = 0.2;
  double n = 0.6;
  int e_total = 1;
  ScheduleDirection direction = ScheduleDirection::increasing;
  double fixed_ratio = 0.5;

  void validate() const;
};

// R = m + n * e_j / e_total for the increasing schedule.
double ratio_at(const CurriculumSchedule& sched, int epoch);

// Parses "inc", "dec" or "fixed:<r>" into the direction fields of `sched`.
void apply_schedule_name(CurriculumSchedule& sched, const std::string& name);
std::string schedule_name(const CurriculumSchedule& sched);

enum class CriterionKind { snr, neg_ipr };

CriterionKind parse_criterion(const std::string& name);
std::string criterion_name(CriterionKind kind);

// Higher is better for both kinds: snr returns the peak-window ratio,
// neg_ipr returns 1 - IPR. Degenerate signals score 0.
double criterion(CriterionKind kind, const BvpSignal& signal, const BandConfig& band);

struct PseudoLabelRecord {
  std::string clip_id;
  BvpSignal predicted;
  HrClass hr;
  double snr = 0.0;
  double criterion_value = 0.0;
  bool degenerate = false;
  bool selected = false;
  int epoch = 0;
};

// Input to pseudo-labeling: an unlabeled clip carries no truth fields.
struct UnlabeledExample {
  std::string id;
  PooledClip clip;
};

std::vector<PseudoLabelRecord> generate_pseudo_labels(const ModelParams& params,
                                                      const std::vector<UnlabeledExample>& unlabeled,
                                                      const BandConfig& band, CriterionKind kind,
                                                      int epoch);

// k = floor(R * N).
std::size_t selection_size(double ratio, std::size_t n);

// Marks the k records with the highest criterion value (ties by ascending
// clip_id) and returns their indices in rank order. Degenerate records are
// never selected.
std::vector<std::size_t> select_top_k(std::vector<PseudoLabelRecord>& records,
                                      const CurriculumSchedule& sched, int epoch);
std::vector<std::size_t> select_top_k(std::vector<PseudoLabelRecord>& records, std::size_t k);

// Fixed-threshold baseline: every non-degenerate record with snr >= tau.
std::vector<std::size_t> select_threshold(std::vector<PseudoLabelRecord>& records, double tau);

}  // namespace pulse
