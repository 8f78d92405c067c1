#include "pulse/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pulse/errors.hpp"

namespace pulse {

void CurriculumSchedule::validate() const {
  if (e_total < 1) throw ConfigError("schedule needs e_total >= 1");
  if (direction == ScheduleDirection::fixed) {
    if (!(fixed_ratio >= 0.0 && fixed_ratio <= 1.0)) {
      throw ConfigError("fixed ratio must lie in [0, 1]");
    }
    return;
  }
  if (!(m >= 0.0) || !(n >= 0.0) || m + n > 1.0 + 1e-12) {
    throw ConfigError("schedule needs m >= 0, n >= 0 and m + n <= 1");
  }
}

double ratio_at(const CurriculumSchedule& sched, int epoch) {
  if (epoch < 0 || epoch > sched.e_total) {
    throw EpochOutOfRange("epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(sched.e_total) + "]");
  }
  const double progress = static_cast<double>(epoch) / static_cast<double>(sched.e_total);
  switch (sched.direction) {
    case ScheduleDirection::increasing:
      return sched.m + sched.n * progress;
    case ScheduleDirection::decreasing:
      return (sched.m + sched.n) - sched.n * progress;
    case ScheduleDirection::fixed:
      return sched.fixed_ratio;
  }
  return sched.fixed_ratio;
}

void apply_schedule_name(CurriculumSchedule& sched, const std::string& name) {
  if (name == "inc") {
    sched.direction = ScheduleDirection::increasing;
  } else if (name == "dec") {
    sched.direction = ScheduleDirection::decreasing;
  } else if (name.rfind("fixed:", 0) == 0) {
    const std::string value = name.substr(6);
    std::size_t used = 0;
    double r = 0.0;
    try {
      r = std::stod(value, &used);
    } catch (const std::exception&) {
      throw ConfigError("schedule: cannot parse ratio in '" + name + "'");
    }
    if (used != value.size() || !(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("schedule: fixed ratio must be a number in [0, 1], got '" + value + "'");
    }
    sched.direction = ScheduleDirection::fixed;
    sched.fixed_ratio = r;
  } else {
    throw ConfigError("schedule must be inc, dec or fixed:<r>, got '" + name + "'");
  }
}

std::string schedule_name(const CurriculumSchedule& sched) {
  switch (sched.direction) {
    case ScheduleDirection::increasing:
      return "inc";
    case ScheduleDirection::decreasing:
      return "dec";
    case ScheduleDirection::fixed: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "fixed:%g", sched.fixed_ratio);
      return buf;
    }
  }
  return "inc";
}

CriterionKind parse_criterion(const std::string& name) {
  if (name == "snr") return CriterionKind::snr;
  if (name == "ipr" || name == "neg_ipr") return CriterionKind::neg_ipr;
  throw ConfigError("criterion must be snr or ipr, got '" + name + "'");
}

std::string criterion_name(CriterionKind kind) {
  return kind == CriterionKind::snr ? "snr" : "ipr";
}

double criterion(CriterionKind kind, const BvpSignal& signal, const BandConfig& band) {
  try {
    if (kind == CriterionKind::snr) return snr(psd_probe(signal, band), band);
    return 1.0 - ipr(signal, band);
  } catch (const DegenerateSignal&) {
    return 0.0;
  }
}

std::vector<PseudoLabelRecord> generate_pseudo_labels(const ModelParams& params,
                                                      const std::vector<UnlabeledExample>& unlabeled,
                                                      const BandConfig& band, CriterionKind kind,
                                                      int epoch) {
  std::vector<PseudoLabelRecord> records;
  records.reserve(unlabeled.size());
  for (const auto& ex : unlabeled) {
    PseudoLabelRecord rec;
    rec.clip_id = ex.id;
    rec.epoch = epoch;
    rec.predicted = forward(params, ex.clip);
    try {
      const auto psd = psd_probe(rec.predicted, band);
      rec.hr = hr_class_of(psd, band);
      rec.snr = snr(psd, band);
      rec.criterion_value = kind == CriterionKind::snr ? rec.snr : criterion(kind, rec.predicted, band);
    } catch (const DegenerateSignal&) {
      rec.degenerate = true;
      rec.snr = 0.0;
      rec.criterion_value = 0.0;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::size_t selection_size(double ratio, std::size_t n) {
  // The epsilon absorbs representation error, e.g. 0.7 * 10 = 6.999...
  const double k = std::floor(ratio * static_cast<double>(n) + 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

std::vector<std::size_t> select_top_k(std::vector<PseudoLabelRecord>& records, std::size_t k) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].selected = false;
    if (!records[i].degenerate) order.push_back(i);
  }
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto& ra = records[a];
                      const auto& rb = records[b];
                      if (ra.criterion_value != rb.criterion_value) {
                        return ra.criterion_value > rb.criterion_value;
                      }
                      return ra.clip_id < rb.clip_id;
                    });
  order.resize(k);
  for (std::size_t i : order) records[i].selected = true;
  return order;
}

std::vector<std::size_t> select_top_k(std::vector<PseudoLabelRecord>& records,
                                      const CurriculumSchedule& sched, int epoch) {
  return select_top_k(records, selection_size(ratio_at(sched, epoch), records.size()));
}

std::vector<std::size_t> select_threshold(std::vector<PseudoLabelRecord>& records, double tau) {
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].selected = !records[i].degenerate && records[i].snr >= tau;
    if (records[i].selected) chosen.push_back(i);
  }
  return chosen;
}

}  // namespace pulse
