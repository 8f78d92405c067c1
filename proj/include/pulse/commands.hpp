#pragma once

// Command implementations behind the pulsessl CLI. Each returns a process
// exit code: 0 success, 2 configuration error, 3 I/O error, 4 training
// divergence.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace pulse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDiverged = 4;

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};

struct TrainOptions {
  CommonOptions common;
  std::string protocol = "semi";
  std::optional<std::string> schedule;
  std::optional<std::string> criterion;
  std::optional<std::filesystem::path> data;
};

struct AblateOptions {
  CommonOptions common;
  std::string axis;
  std::optional<std::filesystem::path> data;
};

int cmd_gen(const CommonOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
// `input` is a signals CSV or a run directory (its pseudo_signals.csv).
// Writes "id,hr_bpm,snr,ipr" rows to `out`.
int cmd_score(const std::filesystem::path& input, std::ostream& out, std::ostream& err);
int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err);

inline constexpr const char* kScoreCsvHeader = "id,hr_bpm,snr,ipr";
inline constexpr const char* kAblationCsvHeader = "variant,seed,test_mae,test_rmse,test_r,test_sd";

}  // namespace pulse
