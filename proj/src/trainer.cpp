#include "pulse/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "pulse/errors.hpp"
#include "pulse/log.hpp"

namespace pulse {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Protocol parse_protocol(const std::string& name) {
  if (name == "full") return Protocol::full;
  if (name == "partial") return Protocol::partial;
  if (name == "semi") return Protocol::semi;
  throw ConfigError("protocol must be full, partial or semi, got '" + name + "'");
}

std::string protocol_name(Protocol protocol) {
  switch (protocol) {
    case Protocol::full:
      return "full";
    case Protocol::partial:
      return "partial";
    case Protocol::semi:
      return "semi";
  }
  return "semi";
}

ConsistencyOn parse_consistency(const std::string& name) {
  if (name == "none") return ConsistencyOn::none;
  if (name == "labeled") return ConsistencyOn::labeled;
  if (name == "unlabeled") return ConsistencyOn::unlabeled;
  if (name == "both") return ConsistencyOn::both;
  throw ConfigError("consistency_on must be none, labeled, unlabeled or both, got '" + name + "'");
}

std::string consistency_name(ConsistencyOn on) {
  switch (on) {
    case ConsistencyOn::none:
      return "none";
    case ConsistencyOn::labeled:
      return "labeled";
    case ConsistencyOn::unlabeled:
      return "unlabeled";
    case ConsistencyOn::both:
      return "both";
  }
  return "both";
}

void TrainConfig::validate() const {
  if (e_total < 1) throw ConfigError("e_total must be at least 1");
  if (e_pre < 1) throw ConfigError("e_pre must be at least 1");
  if (batch_supervised < 1 || batch_semi < 1) throw ConfigError("batch sizes must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (lr_decay_epoch >= 0 && !(lr_decayed > 0.0)) throw ConfigError("lr_decayed must be positive");
  if (!(loss.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (selection == SelectionPolicy::threshold && !(snr_threshold >= 0.0 && snr_threshold <= 1.0)) {
    throw ConfigError("snr_threshold must lie in [0, 1]");
  }
  CurriculumSchedule s = schedule;
  s.e_total = e_total;
  s.validate();
  try {
    model.validate();
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_step: params/grads size differ");
  for (double g : grads) {
    if (!std::isfinite(g)) throw NonFiniteGradient("gradient contains NaN or Inf");
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path, Protocol protocol,
                           const BandConfig& band) {
  const auto manifest = read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  LoadedDataset out;
  auto labeled = [&](const ManifestEntry& e) {
    auto file = read_clip(root / e.path);
    LabeledExample ex;
    ex.id = e.clip_id;
    file.clip.id = e.clip_id;
    ex.clip = pool(file.clip);
    ex.truth = std::move(file.truth);
    ex.hr = class_from_bpm(e.hr_bpm, band);
    return ex;
  };
  for (const auto& e : manifest.entries) {
    switch (e.split) {
      case Split::train_labeled:
        out.data.labeled.push_back(labeled(e));
        break;
      case Split::train_unlabeled:
        if (protocol == Protocol::full) {
          out.data.labeled.push_back(labeled(e));
        } else if (protocol == Protocol::semi) {
          auto file = read_clip(root / e.path);
          out.data.unlabeled.push_back({e.clip_id, pool(file.clip)});
          out.audit.unlabeled_bpm[e.clip_id] = e.hr_bpm;
        }
        break;
      case Split::validation:
        out.data.validation.push_back(labeled(e));
        break;
      case Split::test:
        out.data.test.push_back(labeled(e));
        break;
    }
  }
  if (out.data.labeled.empty()) throw ConfigError("manifest has no labeled training clips");
  if (protocol == Protocol::semi && out.data.unlabeled.empty()) {
    throw ConfigError("semi protocol needs unlabeled clips in the manifest");
  }
  return out;
}

Metrics compute_metrics(std::span<const double> predicted_bpm, std::span<const double> true_bpm) {
  if (predicted_bpm.size() != true_bpm.size()) {
    throw LengthMismatch("metrics on series of different lengths");
  }
  Metrics m;
  m.count = predicted_bpm.size();
  if (m.count == 0) {
    m.mae = m.rmse = m.r = m.sd = kNaN;
    return m;
  }
  const double n = static_cast<double>(m.count);
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double err_sum = 0.0;
  for (std::size_t i = 0; i < m.count; ++i) {
    const double e = predicted_bpm[i] - true_bpm[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    err_sum += e;
  }
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  const double err_mean = err_sum / n;
  double var = 0.0;
  for (std::size_t i = 0; i < m.count; ++i) {
    const double d = predicted_bpm[i] - true_bpm[i] - err_mean;
    var += d * d;
  }
  m.sd = std::sqrt(var / n);
  try {
    m.r = pearson_r(predicted_bpm, true_bpm);
  } catch (const Error&) {
    m.r = kNaN;
  }
  return m;
}

int predict_bpm(const ModelParams& params, const PooledClip& clip, const BandConfig& band) {
  const auto signal = forward(params, clip);
  try {
    return hr_class_of(signal, band).bpm;
  } catch (const DegenerateSignal&) {
    return band.bpm_low();
  }
}

Evaluation evaluate(const ModelParams& params, const std::vector<LabeledExample>& examples,
                    const BandConfig& band) {
  Evaluation ev;
  std::vector<double> pred;
  std::vector<double> truth;
  for (const auto& ex : examples) {
    const int bpm = predict_bpm(params, ex.clip, band);
    ev.predicted_bpm.push_back(bpm);
    pred.push_back(bpm);
    truth.push_back(ex.hr.bpm);
  }
  ev.metrics = compute_metrics(pred, truth);
  return ev;
}

bool PassStats::finite() const {
  return std::isfinite(l_s) && std::isfinite(l_c) && steps > skipped_steps;
}

RunStreams::RunStreams(std::uint64_t seed)
    : shuffle(Rng::mix(seed, "shuffle")),
      unlabeled(Rng::mix(seed, "unlabeled")),
      augment(Rng::mix(seed, "augment")) {}

namespace {

// Adds d(loss)/d(params) of one sample into `grad`; returns the loss terms.
// Throws on degenerate or non-finite samples, leaving `grad` untouched.
struct SampleLoss {
  double l_s = 0.0;
  double l_c = 0.0;
  int n_c = 0;
};

template <typename Build>
SampleLoss accumulate_sample(const ModelParams& params, double weight, std::vector<double>& grad,
                             Build&& build) {
  ad::Tape tape;
  ad::Var p = tape.leaf({params.values.size()}, params.values);
  SampleLoss parts;
  ad::Var total = build(tape, p, parts);
  ad::Var scaled = ad::scale(total, weight);
  tape.backward(scaled);
  const auto& g = p.grad();
  if (!g.empty()) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  }
  return parts;
}

}  // namespace

PassStats train_pass(ModelParams& params, AdamState& adam, const std::vector<SupervisedItem>& merged,
                     const std::vector<UnlabeledExample>& unlabeled, const TrainConfig& cfg,
                     const PassOptions& options, RunStreams& streams) {
  PassStats stats;
  if (merged.empty()) return stats;
  std::vector<std::size_t> order(merged.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  streams.shuffle.shuffle(order.begin(), order.end());

  const bool use_unlabeled = options.consistency_unlabeled && !unlabeled.empty();
  std::vector<std::size_t> unl_order(use_unlabeled ? unlabeled.size() : 0);
  std::iota(unl_order.begin(), unl_order.end(), std::size_t{0});
  if (use_unlabeled) streams.unlabeled.shuffle(unl_order.begin(), unl_order.end());
  std::size_t unl_cursor = 0;

  const std::size_t batch = std::max<std::size_t>(1, options.batch);
  const auto probe_cache = [&](const PooledClip& c) {
    return probe_for(c.frames, c.fps, cfg.loss.band);
  };

  double ls_sum = 0.0;
  std::size_t ls_n = 0;
  double lc_sum = 0.0;
  std::size_t lc_n = 0;
  std::vector<double> grad(params.values.size());

  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    const double weight = 1.0 / static_cast<double>(end - start);
    std::fill(grad.begin(), grad.end(), 0.0);
    std::size_t used = 0;
    ++stats.steps;

    for (std::size_t b = start; b < end; ++b) {
      const SupervisedItem& item = merged[order[b]];
      try {
        const auto parts = accumulate_sample(
            params, weight, grad, [&](ad::Tape& tape, ad::Var p, SampleLoss& out) {
              ad::Var pred = forward(tape, p, params.spec, *item.clip);
              ad::Var target = tape.constant({item.target->size()}, item.target->samples);
              ad::Var loss = l_s(pred, target, item.hr, cfg.loss, probe_cache(*item.clip));
              out.l_s = loss.item();
              if (options.consistency_labeled) {
                ad::Var lc = l_c(tape, p, params.spec, *item.clip, cfg.loss, streams.augment);
                out.l_c = lc.item();
                out.n_c = 1;
                loss = loss + lc;
              }
              return loss;
            });
        ls_sum += parts.l_s;
        ++ls_n;
        lc_sum += parts.l_c;
        lc_n += static_cast<std::size_t>(parts.n_c);
        ++used;
      } catch (const Error& e) {
        ++stats.skipped_samples;
        log::warn("skipping sample " + item.id + ": " + e.what());
      }
    }

    if (use_unlabeled) {
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = unlabeled[unl_order[unl_cursor]];
        unl_cursor = (unl_cursor + 1) % unl_order.size();
        if (unl_cursor == 0) streams.unlabeled.shuffle(unl_order.begin(), unl_order.end());
        try {
          const auto parts = accumulate_sample(
              params, weight, grad, [&](ad::Tape& tape, ad::Var p, SampleLoss& out) {
                ad::Var lc = l_c(tape, p, params.spec, ex.clip, cfg.loss, streams.augment);
                out.l_c = lc.item();
                out.n_c = 1;
                return lc;
              });
          lc_sum += parts.l_c;
          lc_n += static_cast<std::size_t>(parts.n_c);
          ++used;
        } catch (const Error& e) {
          ++stats.skipped_samples;
          log::warn("skipping unlabeled sample " + ex.id + ": " + e.what());
        }
      }
    }

    if (used == 0) {
      ++stats.skipped_steps;
      continue;
    }
    try {
      adam_step(params.values, grad, adam, options.lr);
    } catch (const NonFiniteGradient& e) {
      ++stats.skipped_steps;
      log::warn(std::string("skipping update: ") + e.what());
    }
  }
  stats.l_s = ls_n ? ls_sum / static_cast<double>(ls_n) : kNaN;
  stats.l_c = lc_n ? lc_sum / static_cast<double>(lc_n) : 0.0;
  return stats;
}

namespace {

std::vector<SupervisedItem> labeled_items(const std::vector<LabeledExample>& labeled) {
  std::vector<SupervisedItem> items;
  items.reserve(labeled.size());
  for (const auto& ex : labeled) items.push_back({&ex.clip, &ex.truth, ex.hr, ex.id});
  return items;
}

bool wants_labeled_consistency(ConsistencyOn on) {
  return on == ConsistencyOn::labeled || on == ConsistencyOn::both;
}

bool wants_unlabeled_consistency(ConsistencyOn on) {
  return on == ConsistencyOn::unlabeled || on == ConsistencyOn::both;
}

}  // namespace

PassStats pretrain_epoch(ModelParams& params, AdamState& adam, const TrainingData& data,
                         const TrainConfig& cfg, RunStreams& streams, bool semi) {
  if (data.labeled.empty()) throw ConfigError("pre-training needs labeled clips");
  PassOptions opt;
  opt.batch = semi ? cfg.batch_semi : cfg.batch_supervised;
  opt.consistency_labeled = semi && wants_labeled_consistency(cfg.consistency_on);
  opt.lr = cfg.learning_rate;
  return train_pass(params, adam, labeled_items(data.labeled), {}, cfg, opt, streams);
}

namespace {

struct Selection {
  std::size_t k = 0;
  double mean_snr = kNaN;
  double unlabeled_mae = kNaN;
};

Selection select_and_audit(std::vector<PseudoLabelRecord>& records, const TrainConfig& cfg,
                           const CurriculumSchedule& sched, int epoch, const AuditTruth* audit) {
  Selection s;
  if (records.empty()) return s;
  const auto chosen = cfg.selection == SelectionPolicy::threshold
                          ? select_threshold(records, cfg.snr_threshold)
                          : select_top_k(records, sched, epoch);
  s.k = chosen.size();
  if (!chosen.empty()) {
    double acc = 0.0;
    for (std::size_t i : chosen) acc += records[i].snr;
    s.mean_snr = acc / static_cast<double>(chosen.size());
  }
  if (audit != nullptr && !audit->unlabeled_bpm.empty()) {
    double err = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
      const auto it = audit->unlabeled_bpm.find(r.clip_id);
      if (it == audit->unlabeled_bpm.end()) continue;
      const int bpm = r.degenerate ? cfg.loss.band.bpm_low() : r.hr.bpm;
      err += std::abs(bpm - it->second);
      ++n;
    }
    if (n) s.unlabeled_mae = err / static_cast<double>(n);
  }
  return s;
}

void check_divergence(const PassStats& stats, int& streak, int epoch) {
  if (stats.finite()) {
    streak = 0;
    return;
  }
  ++streak;
  log::warn("epoch " + std::to_string(epoch) + " produced no finite update");
  if (streak > 3) {
    throw TrainingDiverged("non-finite loss for " + std::to_string(streak) +
                           " consecutive epochs");
  }
}

}  // namespace

RunResult run(Protocol protocol, const TrainingData& data, const TrainConfig& cfg,
              const AuditTruth* audit) {
  cfg.validate();
  if (data.labeled.empty()) throw ConfigError("run needs labeled clips");
  const bool semi = protocol == Protocol::semi;
  const std::vector<UnlabeledExample> none;
  const auto& unlabeled = semi ? data.unlabeled : none;
  if (!unlabeled.empty()) cfg.loss.validate(unlabeled.front().clip.frames);
  cfg.loss.validate(data.labeled.front().clip.frames);

  CurriculumSchedule sched = cfg.schedule;
  sched.e_total = cfg.e_total;

  RunResult result;
  result.protocol = protocol;
  result.params = init_params(cfg.model, Rng::mix(cfg.seed, "init"));
  AdamState adam;
  RunStreams streams(cfg.seed);
  const auto& band = cfg.loss.band;
  int streak = 0;

  PassStats pre;
  for (int e = 0; e < cfg.e_pre; ++e) {
    pre = pretrain_epoch(result.params, adam, data, cfg, streams, semi);
    log::info("pretrain pass " + std::to_string(e + 1) + "/" + std::to_string(cfg.e_pre) +
              ": l_s=" + format_number(pre.l_s) + " l_c=" + format_number(pre.l_c));
    check_divergence(pre, streak, 0);
  }

  auto records = generate_pseudo_labels(result.params, unlabeled, band, cfg.criterion, 0);
  Selection sel = select_and_audit(records, cfg, sched, 0, audit);

  auto report = [&](int epoch, const PassStats& stats, const Selection& s) {
    EpochReport r;
    r.epoch = epoch;
    r.l_s = stats.l_s;
    r.l_c = stats.l_c;
    r.k = s.k;
    r.mean_snr = s.mean_snr;
    r.validation = evaluate(result.params, data.validation, band).metrics;
    r.unlabeled_mae = s.unlabeled_mae;
    result.epochs.push_back(r);
    log::info("epoch " + std::to_string(epoch) + ": l_s=" + format_number(r.l_s) +
              " l_c=" + format_number(r.l_c) + " k=" + std::to_string(r.k) +
              " val_mae=" + format_number(r.validation.mae));
  };
  auto keep_audit = [&](std::vector<PseudoLabelRecord>& recs, bool keep_signals) {
    for (auto& r : recs) {
      if (!keep_signals) r.predicted.samples.clear();
      result.audit.push_back(r);
    }
  };
  report(0, pre, sel);

  const bool lab_c = semi && wants_labeled_consistency(cfg.consistency_on);
  const bool unl_c = semi && wants_unlabeled_consistency(cfg.consistency_on);
  for (int e = 1; e <= cfg.e_total; ++e) {
    std::vector<SupervisedItem> merged = labeled_items(data.labeled);
    for (const auto& r : records) {
      if (r.selected) {
        const auto it = std::find_if(unlabeled.begin(), unlabeled.end(),
                                     [&](const UnlabeledExample& u) { return u.id == r.clip_id; });
        merged.push_back({&it->clip, &r.predicted, r.hr, r.clip_id});
      }
    }
    PassOptions opt;
    opt.batch = semi ? cfg.batch_semi : cfg.batch_supervised;
    opt.consistency_labeled = lab_c;
    opt.consistency_unlabeled = unl_c;
    opt.lr = (cfg.lr_decay_epoch >= 0 && e >= cfg.lr_decay_epoch) ? cfg.lr_decayed
                                                                  : cfg.learning_rate;
    const PassStats stats = train_pass(result.params, adam, merged, unlabeled, cfg, opt, streams);
    check_divergence(stats, streak, e);

    keep_audit(records, false);
    records = generate_pseudo_labels(result.params, unlabeled, band, cfg.criterion, e);
    sel = select_and_audit(records, cfg, sched, e, audit);
    report(e, stats, sel);
  }
  keep_audit(records, true);

  result.validation = evaluate(result.params, data.validation, band).metrics;
  result.test = evaluate(result.params, data.test, band).metrics;
  return result;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_signals_csv(const std::filesystem::path& path, const std::vector<NamedSignal>& signals) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kSignalCsvHeader << "\n";
  for (const auto& s : signals) {
    os << s.id << ',' << format_number(s.signal.fps);
    for (double v : s.signal.samples) os << ',' << format_number(v);
    os << "\n";
  }
  if (!os) throw IoError("short write on " + path.string());
}

std::vector<NamedSignal> read_signals_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<NamedSignal> out;
  std::string line;
  if (!std::getline(is, line)) return out;
  if (line != kSignalCsvHeader) throw CorruptFile(path.string() + ": missing signal header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    NamedSignal s;
    if (!std::getline(ss, s.id, ',')) throw CorruptFile(path.string() + ": empty row");
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw CorruptFile(path.string() + ": bad number '" + field + "' in row " + s.id);
      }
      values.push_back(v);
    }
    if (values.empty()) throw CorruptFile(path.string() + ": row " + s.id + " has no fps");
    s.signal.fps = values.front();
    s.signal.samples.assign(values.begin() + 1, values.end());
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  return {{"mae", num(m.mae)}, {"rmse", num(m.rmse)}, {"r", num(m.r)}, {"sd", num(m.sd)},
          {"count", m.count}};
}

}  // namespace

void write_run(const RunResult& result, const TrainConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    std::ofstream os(dir / "epochs.csv", std::ios::binary);
    if (!os) throw IoError("cannot write epochs.csv");
    os << kEpochCsvHeader << "\n";
    for (const auto& r : result.epochs) {
      os << r.epoch << ',' << format_number(r.l_s) << ',' << format_number(r.l_c) << ',' << r.k
         << ',' << format_number(r.mean_snr) << ',' << format_number(r.validation.mae) << ','
         << format_number(r.validation.rmse) << ',' << format_number(r.validation.r) << ','
         << format_number(r.validation.sd) << ',' << format_number(r.unlabeled_mae) << "\n";
    }
  }
  {
    std::ofstream os(dir / "pseudo_labels.csv", std::ios::binary);
    if (!os) throw IoError("cannot write pseudo_labels.csv");
    os << kAuditCsvHeader << "\n";
    for (const auto& r : result.audit) {
      os << r.epoch << ',' << r.clip_id << ',' << (r.degenerate ? 0 : r.hr.bpm) << ','
         << format_number(r.snr) << ',' << (r.selected ? 1 : 0) << "\n";
    }
  }
  {
    std::vector<NamedSignal> signals;
    const int last = result.epochs.empty() ? 0 : result.epochs.back().epoch;
    for (const auto& r : result.audit) {
      if (r.epoch == last && !r.predicted.samples.empty()) signals.push_back({r.clip_id, r.predicted});
    }
    write_signals_csv(dir / "pseudo_signals.csv", signals);
  }
  {
    nlohmann::json j{{"protocol", protocol_name(result.protocol)},
                     {"seed", cfg.seed},
                     {"e_total", cfg.e_total},
                     {"e_pre", cfg.e_pre},
                     {"lambda", cfg.loss.lambda},
                     {"schedule", schedule_name(cfg.schedule)},
                     {"criterion", criterion_name(cfg.criterion)},
                     {"validation", metrics_json(result.validation)},
                     {"test", metrics_json(result.test)}};
    std::ofstream os(dir / "metrics.json", std::ios::binary);
    if (!os) throw IoError("cannot write metrics.json");
    os << j.dump(2) << "\n";
  }
  save_checkpoint(result.params, dir / "model");
}

}  // namespace pulse
