#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "pulse/rng.hpp"
#include "pulse/signal.hpp"

namespace testing {

inline std::vector<double> tone(double hz, double fps, std::size_t n, double amp = 1.0,
                                double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(t) / fps + phase);
  }
  return x;
}

inline std::vector<double> random_signal(pulse::Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

inline pulse::BvpSignal bvp(std::vector<double> x, double fps = 30.0) {
  return pulse::BvpSignal{std::move(x), fps};
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pulsessl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
