#include "pulse/commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <vector>

#include "pulse/config.hpp"
#include "pulse/errors.hpp"
#include "pulse/log.hpp"
#include "pulse/trainer.hpp"

namespace pulse {

namespace {

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidSpec& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingDiverged& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CorruptFile& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const VersionMismatch& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

RunConfig resolve_config(const CommonOptions& options) {
  RunConfig config = options.config ? load_run_config(*options.config) : default_run_config();
  if (options.seed) override_seed(config, *options.seed);
  return config;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string metrics_line(const std::string& label, const Metrics& m) {
  return label + "_mae=" + format_number(m.mae) + " " + label + "_rmse=" +
         format_number(m.rmse) + " " + label + "_r=" + format_number(m.r) + " " + label +
         "_sd=" + format_number(m.sd);
}

}  // namespace

int cmd_gen(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    ensure_dir(options.out);
    const auto manifest = gen_dataset(config.data, options.out);
    out << "train_labeled=" << manifest.count(Split::train_labeled)
        << " train_unlabeled=" << manifest.count(Split::train_unlabeled)
        << " validation=" << manifest.count(Split::validation)
        << " test=" << manifest.count(Split::test) << "\n";
    return kExitOk;
  });
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config = resolve_config(options.common);
    const Protocol protocol = parse_protocol(options.protocol);
    if (options.schedule) apply_schedule_name(config.train.schedule, *options.schedule);
    if (options.criterion) config.train.criterion = parse_criterion(*options.criterion);
    config.train.validate();
    const auto data_dir = options.data ? *options.data : config.data_dir;
    const auto loaded = load_dataset(data_dir / "manifest.csv", protocol, config.train.loss.band);
    const RunResult result = run(protocol, loaded.data, config.train, &loaded.audit);
    write_run(result, config.train, options.common.out);
    {
      std::ofstream os(options.common.out / "config.txt", std::ios::binary);
      os << dump_run_config(config);
    }
    out << "protocol=" << protocol_name(protocol) << " seed=" << config.train.seed << " "
        << metrics_line("test", result.test) << "\n";
    return kExitOk;
  });
}

int cmd_score(const std::filesystem::path& input, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::filesystem::path file = input;
    if (std::filesystem::is_directory(input)) file = input / "pseudo_signals.csv";
    if (!std::filesystem::exists(file)) throw IoError("cannot read " + file.string());
    const auto signals = read_signals_csv(file);
    const BandConfig band;
    out << kScoreCsvHeader << "\n";
    for (const auto& s : signals) {
      std::string bpm = "nan";
      double snr_v = std::nan("");
      double ipr_v = std::nan("");
      try {
        const auto psd = psd_probe(s.signal, band);
        bpm = std::to_string(hr_class_of(psd, band).bpm);
        snr_v = snr(psd, band);
        ipr_v = ipr(s.signal, band);
      } catch (const DegenerateSignal&) {
      } catch (const NonFiniteInput&) {
      } catch (const LengthMismatch&) {
      }
      out << s.id << ',' << bpm << ',' << format_number(snr_v) << ',' << format_number(ipr_v)
          << "\n";
    }
    return kExitOk;
  });
}

namespace {

struct Variant {
  std::string name;
  std::function<void(TrainConfig&)> apply;
};

std::vector<Variant> variants_for(const std::string& axis) {
  auto schedule = [](const std::string& s) {
    return Variant{s, [s](TrainConfig& c) { apply_schedule_name(c.schedule, s); }};
  };
  if (axis == "schedule") {
    return {schedule("fixed:0.1"), schedule("fixed:0.5"), schedule("fixed:0.9"), schedule("inc"),
            schedule("dec")};
  }
  if (axis == "criterion") {
    return {{"snr", [](TrainConfig& c) { c.criterion = CriterionKind::snr; }},
            {"ipr", [](TrainConfig& c) { c.criterion = CriterionKind::neg_ipr; }}};
  }
  if (axis == "lambda") {
    std::vector<Variant> out;
    for (double l : {1.0, 0.1, 0.01}) {
      out.push_back({"lambda=" + format_number(l), [l](TrainConfig& c) { c.loss.lambda = l; }});
    }
    return out;
  }
  if (axis == "e_pre") {
    std::vector<Variant> out;
    for (int e : {1, 10, 30}) {
      out.push_back({"e_pre=" + std::to_string(e), [e](TrainConfig& c) { c.e_pre = e; }});
    }
    return out;
  }
  throw ConfigError("unknown ablation axis '" + axis +
                    "' (expected schedule, criterion, lambda or e_pre)");
}

}  // namespace

int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto variants = variants_for(options.axis);
    RunConfig config = resolve_config(options.common);
    std::vector<std::uint64_t> seeds = config.ablate_seeds;
    if (options.common.seed) seeds = {*options.common.seed};
    const auto data_dir = options.data ? *options.data : config.data_dir;
    const auto loaded =
        load_dataset(data_dir / "manifest.csv", Protocol::semi, config.train.loss.band);
    ensure_dir(options.common.out);
    const auto csv_path = options.common.out / ("ablation_" + options.axis + ".csv");
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << kAblationCsvHeader << "\n";
    for (const auto& v : variants) {
      double sums[4] = {0, 0, 0, 0};
      for (std::uint64_t seed : seeds) {
        TrainConfig cfg = config.train;
        cfg.seed = seed;
        v.apply(cfg);
        const auto result = run(Protocol::semi, loaded.data, cfg, &loaded.audit);
        const Metrics& m = result.test;
        csv << v.name << ',' << seed << ',' << format_number(m.mae) << ','
            << format_number(m.rmse) << ',' << format_number(m.r) << ',' << format_number(m.sd)
            << "\n";
        sums[0] += m.mae;
        sums[1] += m.rmse;
        sums[2] += m.r;
        sums[3] += m.sd;
        log::info("ablate " + v.name + " seed " + std::to_string(seed) + ": " +
                  metrics_line("test", m));
      }
      const double n = static_cast<double>(seeds.size());
      csv << v.name << ",mean," << format_number(sums[0] / n) << ',' << format_number(sums[1] / n)
          << ',' << format_number(sums[2] / n) << ',' << format_number(sums[3] / n) << "\n";
      out << v.name << " mean_test_mae=" << format_number(sums[0] / n)
          << " mean_test_rmse=" << format_number(sums[1] / n) << "\n";
    }
    if (!csv) throw IoError("short write on " + csv_path.string());
    return kExitOk;
  });
}

}  // namespace pulse
