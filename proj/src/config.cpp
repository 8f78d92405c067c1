#include "pulse/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "pulse/errors.hpp"

namespace pulse {

RunConfig default_run_config() { return RunConfig{}; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw ConfigError("key '" + key + "': must be non-negative");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<T>(to_count(key, item)));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': expected a comma-separated list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string num(double v) { return format_number(v); }

const std::vector<Key>& keys() {
  using C = RunConfig;
  using S = const std::string;
  static const std::vector<Key> table{
      // paths and seeds
      {"data_dir", [](C& c, S&, S& v) { c.data_dir = v; },
       [](const C& c) { return c.data_dir.string(); }},
      {"seed",
       [](C& c, S& k, S& v) { override_seed(c, static_cast<std::uint64_t>(to_count(k, v))); },
       [](const C& c) { return std::to_string(c.train.seed); }},
      {"ablate_seeds", [](C& c, S& k, S& v) { c.ablate_seeds = to_list<std::uint64_t>(k, v); },
       [](const C& c) { return join(c.ablate_seeds); }},
      // dataset
      {"n_labeled", [](C& c, S& k, S& v) { c.data.n_labeled = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.n_labeled); }},
      {"n_unlabeled", [](C& c, S& k, S& v) { c.data.n_unlabeled = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.n_unlabeled); }},
      {"n_validation", [](C& c, S& k, S& v) { c.data.n_validation = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.n_validation); }},
      {"n_test", [](C& c, S& k, S& v) { c.data.n_test = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.n_test); }},
      {"fully_supervised", [](C& c, S& k, S& v) { c.data.fully_supervised = to_bool(k, v); },
       [](const C& c) { return std::string(c.data.fully_supervised ? "true" : "false"); }},
      {"hr_min", [](C& c, S& k, S& v) { c.data.hr_min = static_cast<int>(to_int(k, v)); },
       [](const C& c) { return std::to_string(c.data.hr_min); }},
      {"hr_max", [](C& c, S& k, S& v) { c.data.hr_max = static_cast<int>(to_int(k, v)); },
       [](const C& c) { return std::to_string(c.data.hr_max); }},
      {"frames", [](C& c, S& k, S& v) { c.data.base.frames = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.base.frames); }},
      {"width", [](C& c, S& k, S& v) { c.data.base.width = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.base.width); }},
      {"height", [](C& c, S& k, S& v) { c.data.base.height = to_count(k, v); },
       [](const C& c) { return std::to_string(c.data.base.height); }},
      {"channels",
       [](C& c, S& k, S& v) {
         c.data.base.channels = to_count(k, v);
         c.train.model.in_channels = c.data.base.channels;
       },
       [](const C& c) { return std::to_string(c.data.base.channels); }},
      {"fps", [](C& c, S& k, S& v) { c.data.base.fps = to_double(k, v); },
       [](const C& c) { return num(c.data.base.fps); }},
      {"pulse_amp", [](C& c, S& k, S& v) { c.data.base.pulse_amp = to_double(k, v); },
       [](const C& c) { return num(c.data.base.pulse_amp); }},
      {"harmonic_amp", [](C& c, S& k, S& v) { c.data.base.harmonic_amp = to_double(k, v); },
       [](const C& c) { return num(c.data.base.harmonic_amp); }},
      {"noise_std", [](C& c, S& k, S& v) { c.data.base.noise_std = to_double(k, v); },
       [](const C& c) { return num(c.data.base.noise_std); }},
      {"unlabeled_noise_std",
       [](C& c, S& k, S& v) { c.data.unlabeled_noise_std = to_double(k, v); },
       [](const C& c) { return num(c.data.unlabeled_noise_std); }},
      {"skin_fraction", [](C& c, S& k, S& v) { c.data.base.skin_fraction = to_double(k, v); },
       [](const C& c) { return num(c.data.base.skin_fraction); }},
      {"freq_jitter", [](C& c, S& k, S& v) { c.data.base.freq_jitter = to_double(k, v); },
       [](const C& c) { return num(c.data.base.freq_jitter); }},
      {"distractor_amp_max",
       [](C& c, S& k, S& v) { c.data.distractor_amp_max = to_double(k, v); },
       [](const C& c) { return num(c.data.distractor_amp_max); }},
      {"distractor_wander",
       [](C& c, S& k, S& v) { c.data.base.distractor_wander = to_double(k, v); },
       [](const C& c) { return num(c.data.base.distractor_wander); }},
      {"distractor_freq_min",
       [](C& c, S& k, S& v) { c.data.distractor_freq_min = to_double(k, v); },
       [](const C& c) { return num(c.data.distractor_freq_min); }},
      {"distractor_freq_max",
       [](C& c, S& k, S& v) { c.data.distractor_freq_max = to_double(k, v); },
       [](const C& c) { return num(c.data.distractor_freq_max); }},
      // training
      {"e_total", [](C& c, S& k, S& v) { c.train.e_total = static_cast<int>(to_int(k, v)); },
       [](const C& c) { return std::to_string(c.train.e_total); }},
      {"e_pre", [](C& c, S& k, S& v) { c.train.e_pre = static_cast<int>(to_int(k, v)); },
       [](const C& c) { return std::to_string(c.train.e_pre); }},
      {"batch_supervised", [](C& c, S& k, S& v) { c.train.batch_supervised = to_count(k, v); },
       [](const C& c) { return std::to_string(c.train.batch_supervised); }},
      {"batch_semi", [](C& c, S& k, S& v) { c.train.batch_semi = to_count(k, v); },
       [](const C& c) { return std::to_string(c.train.batch_semi); }},
      {"learning_rate", [](C& c, S& k, S& v) { c.train.learning_rate = to_double(k, v); },
       [](const C& c) { return num(c.train.learning_rate); }},
      {"lr_decay_epoch",
       [](C& c, S& k, S& v) { c.train.lr_decay_epoch = static_cast<int>(to_int(k, v)); },
       [](const C& c) { return std::to_string(c.train.lr_decay_epoch); }},
      {"lr_decayed", [](C& c, S& k, S& v) { c.train.lr_decayed = to_double(k, v); },
       [](const C& c) { return num(c.train.lr_decayed); }},
      {"lambda", [](C& c, S& k, S& v) { c.train.loss.lambda = to_double(k, v); },
       [](const C& c) { return num(c.train.loss.lambda); }},
      {"weak_shift_max", [](C& c, S& k, S& v) { c.train.loss.weak_shift_max = to_count(k, v); },
       [](const C& c) { return std::to_string(c.train.loss.weak_shift_max); }},
      {"stop_gradient_weak",
       [](C& c, S& k, S& v) { c.train.loss.stop_gradient_weak = to_bool(k, v); },
       [](const C& c) { return std::string(c.train.loss.stop_gradient_weak ? "true" : "false"); }},
      {"band_low", [](C& c, S& k, S& v) { c.train.loss.band.f_low = to_double(k, v); },
       [](const C& c) { return num(c.train.loss.band.f_low); }},
      {"band_high", [](C& c, S& k, S& v) { c.train.loss.band.f_high = to_double(k, v); },
       [](const C& c) { return num(c.train.loss.band.f_high); }},
      {"delta_f", [](C& c, S& k, S& v) { c.train.loss.band.delta_f = to_double(k, v); },
       [](const C& c) { return num(c.train.loss.band.delta_f); }},
      {"schedule", [](C& c, S&, S& v) { apply_schedule_name(c.train.schedule, v); },
       [](const C& c) { return schedule_name(c.train.schedule); }},
      {"schedule_m", [](C& c, S& k, S& v) { c.train.schedule.m = to_double(k, v); },
       [](const C& c) { return num(c.train.schedule.m); }},
      {"schedule_n", [](C& c, S& k, S& v) { c.train.schedule.n = to_double(k, v); },
       [](const C& c) { return num(c.train.schedule.n); }},
      {"criterion", [](C& c, S&, S& v) { c.train.criterion = parse_criterion(v); },
       [](const C& c) { return criterion_name(c.train.criterion); }},
      {"consistency_on", [](C& c, S&, S& v) { c.train.consistency_on = parse_consistency(v); },
       [](const C& c) { return consistency_name(c.train.consistency_on); }},
      {"selection",
       [](C& c, S& k, S& v) {
         if (v == "top_k") {
           c.train.selection = SelectionPolicy::top_k;
         } else if (v == "threshold") {
           c.train.selection = SelectionPolicy::threshold;
         } else {
           throw ConfigError("key '" + k + "': expected top_k or threshold, got '" + v + "'");
         }
       },
       [](const C& c) {
         return std::string(c.train.selection == SelectionPolicy::top_k ? "top_k" : "threshold");
       }},
      {"snr_threshold", [](C& c, S& k, S& v) { c.train.snr_threshold = to_double(k, v); },
       [](const C& c) { return num(c.train.snr_threshold); }},
      {"model_widths",
       [](C& c, S& k, S& v) { c.train.model.widths = to_list<std::size_t>(k, v); },
       [](const C& c) { return join(c.train.model.widths); }},
      {"model_kernel", [](C& c, S& k, S& v) { c.train.model.kernel = to_count(k, v); },
       [](const C& c) { return std::to_string(c.train.model.kernel); }},
  };
  return table;
}

void validate_all(const RunConfig& c) {
  // Re-throw with the offending key so error messages name it.
  if (c.data.hr_min < 40 || c.data.hr_min > 180) {
    throw ConfigError("key 'hr_min': must lie in [40, 180]");
  }
  if (c.data.hr_max < c.data.hr_min || c.data.hr_max > 180) {
    throw ConfigError("key 'hr_max': must lie in [hr_min, 180]");
  }
  c.data.validate();
  c.train.validate();
}

}  // namespace

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.data.seed = seed;
  config.train.seed = seed;
}

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      try {
        k.set(config, key, value);
      } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.find("'" + key + "'") == std::string::npos) {
          throw ConfigError("key '" + key + "': " + what);
        }
        throw;
      }
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config = default_run_config();
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate_all(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  RunConfig config = parse_run_config(ss.str());
  if (config.data_dir.is_relative()) config.data_dir = path.parent_path() / config.data_dir;
  return config;
}

std::string dump_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace pulse
