#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>

#include "doctest.h"
#include "pulse/errors.hpp"
#include "pulse/synth.hpp"
#include "support.hpp"

using namespace pulse;

#ifndef PULSE_GOLDEN_DIR
#error "PULSE_GOLDEN_DIR must point at tests/golden"
#endif

namespace {

std::vector<unsigned char> bytes_of(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

const std::filesystem::path kGolden = std::filesystem::path(PULSE_GOLDEN_DIR) / "tiny.pcb";

}  // namespace

TEST_CASE("golden header bytes") {
  const auto b = bytes_of(kGolden);
  REQUIRE(b.size() == 84);
  const unsigned char expect[28] = {'P', 'C', 'B', '1', 2, 0, 0, 0, 2, 0, 0, 0, 1, 0,
                                    0,   0,   3,   0,   0, 0, 0, 0, 0, 0, 0, 0, 0x3e, 0x40};
  for (std::size_t i = 0; i < 28; ++i) CHECK(b[i] == expect[i]);
}

TEST_CASE("golden file reads and rewrites byte for byte") {
  const auto f = read_clip(kGolden);
  CHECK(f.clip.frames == 2);
  CHECK(f.clip.width == 2);
  CHECK(f.clip.height == 1);
  CHECK(f.clip.channels == 3);
  CHECK(f.clip.fps == 30.0);
  CHECK(f.clip.at(0, 0, 0, 1) == 0.25);
  CHECK(f.clip.at(1, 1, 0, 2) == 0.875);
  CHECK(f.truth.samples == std::vector<double>{1.0, -1.0});
  const auto dir = testing::scratch_dir("golden");
  write_clip(dir / "again.pcb", f.clip, f.truth);
  CHECK(bytes_of(dir / "again.pcb") == bytes_of(kGolden));
}

TEST_CASE("random clip round trip at single precision") {
  const auto dir = testing::scratch_dir("roundtrip");
  SynthSpec s;
  s.frames = 50;
  s.seed = 77;
  const auto g = gen_clip(s);
  write_clip(dir / "c.pcb", g.clip, g.truth);
  CHECK(std::filesystem::file_size(dir / "c.pcb") ==
        kClipHeaderBytes + 4 * (g.clip.data.size() + g.truth.samples.size()));
  const auto back = read_clip(dir / "c.pcb");
  double worst = 0.0;
  for (std::size_t i = 0; i < g.clip.data.size(); ++i) {
    worst = std::max(worst, std::fabs(back.clip.data[i] - g.clip.data[i]));
    CHECK(back.clip.data[i] == static_cast<double>(static_cast<float>(g.clip.data[i])));
  }
  CHECK(worst <= 1e-7);
  for (std::size_t i = 0; i < g.truth.samples.size(); ++i) {
    CHECK(back.truth.samples[i] == static_cast<double>(static_cast<float>(g.truth.samples[i])));
  }
}

TEST_CASE("corrupt and foreign files") {
  const auto dir = testing::scratch_dir("corrupt");
  auto b = bytes_of(kGolden);
  auto truncated = b;
  truncated.resize(b.size() - 3);
  write_bytes(dir / "trunc.pcb", truncated);
  CHECK_THROWS_AS(read_clip(dir / "trunc.pcb"), CorruptFile);

  auto longer = b;
  longer.push_back(0);
  write_bytes(dir / "long.pcb", longer);
  CHECK_THROWS_AS(read_clip(dir / "long.pcb"), CorruptFile);

  auto version = b;
  version[3] = '2';
  write_bytes(dir / "v2.pcb", version);
  CHECK_THROWS_AS(read_clip(dir / "v2.pcb"), VersionMismatch);

  auto magic = b;
  magic[0] = 'X';
  write_bytes(dir / "magic.pcb", magic);
  CHECK_THROWS_AS(read_clip(dir / "magic.pcb"), CorruptFile);

  write_bytes(dir / "tiny.pcb", {'P', 'C'});
  CHECK_THROWS_AS(read_clip(dir / "tiny.pcb"), CorruptFile);
  CHECK_THROWS_AS(read_clip(dir / "absent.pcb"), IoError);
}

TEST_CASE("clean clip pools to the requested class") {
  for (int bpm : {40, 75, 90, 133, 180}) {
    SynthSpec s;
    s.hr_bpm = bpm;
    s.noise_std = 0.0;
    s.freq_jitter = 0.0;
    s.skin_fraction = 1.0;
    const auto g = gen_clip(s);
    const auto pooled = pool(g.clip);
    std::vector<double> green(pooled.data.begin() + 300, pooled.data.begin() + 600);
    CHECK(hr_class_of(testing::bvp(green), BandConfig{}).bpm == bpm);
  }
}

TEST_CASE("realised pulse rate stays within half a BPM") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec s;
    s.seed = seed;
    s.hr_bpm = 60 + static_cast<int>(seed) * 17;
    s.freq_jitter = 0.05;
    const auto g = gen_clip(s);
    // Rising zero crossings, one per period of the fundamental.
    const auto& x = g.truth.samples;
    double crossings = 0.0;
    std::size_t first = 0, last = 0;
    for (std::size_t t = 1; t < x.size(); ++t) {
      if (x[t - 1] < 0.0 && x[t] >= 0.0) {
        if (crossings == 0.0) first = t;
        last = t;
        crossings += 1.0;
      }
    }
    const double periods = crossings - 1.0;
    const double bpm = 60.0 * periods * s.fps / static_cast<double>(last - first);
    CHECK(std::fabs(bpm - s.hr_bpm) <= 0.5 + 60.0 * s.fps / static_cast<double>(last - first));
  }
}

TEST_CASE("same spec, different seeds") {
  SynthSpec a;
  a.seed = 1;
  SynthSpec b = a;
  b.seed = 2;
  const auto ga = gen_clip(a);
  const auto gb = gen_clip(b);
  CHECK(ga.clip.data != gb.clip.data);
  CHECK(gen_clip(a).clip.data == ga.clip.data);
}

TEST_CASE("zero pulse amplitude leaves only noise") {
  SynthSpec s;
  s.pulse_amp = 0.0;
  s.noise_std = 0.0;
  const auto g = gen_clip(s);
  for (double v : g.clip.data) CHECK(v == 0.5);
  CHECK(g.truth.samples.size() == s.frames);
}

TEST_CASE("clamp warning") {
  SynthSpec s;
  s.frames = 30;
  s.noise_std = 1.0;
  const auto g = gen_clip(s);
  CHECK(g.clamp_fraction > 0.10);
  CHECK(g.clamp_warning);
  for (double v : g.clip.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("synth spec validation") {
  SynthSpec s;
  s.hr_bpm = 200;
  CHECK_THROWS_AS(gen_clip(s), InvalidSpec);
  s = SynthSpec{};
  s.skin_fraction = 0.0;
  CHECK_THROWS_AS(gen_clip(s), InvalidSpec);
  s = SynthSpec{};
  s.noise_std = -1.0;
  CHECK_THROWS_AS(gen_clip(s), InvalidSpec);
  s = SynthSpec{};
  s.width = 0;
  CHECK_THROWS_AS(gen_clip(s), InvalidSpec);
}

TEST_CASE("dataset counts, ids and determinism") {
  const auto dir = testing::scratch_dir("dataset");
  DatasetConfig cfg;
  cfg.base.frames = 60;
  const auto m = gen_dataset(cfg, dir / "a");
  CHECK(m.count(Split::train_labeled) == 24);
  CHECK(m.count(Split::train_unlabeled) == 96);
  CHECK(m.count(Split::validation) == 24);
  CHECK(m.count(Split::test) == 24);
  for (const auto& e : m.entries) {
    CHECK(e.hr_bpm >= 40);
    CHECK(e.hr_bpm <= 180);
    CHECK(e.has_label == (e.split != Split::train_unlabeled));
    CHECK(std::filesystem::exists(dir / "a" / e.path));
  }
  CHECK(m.entries.front().clip_id == "lab_0000");

  const auto back = read_manifest(dir / "a" / "manifest.csv");
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].clip_id == m.entries[i].clip_id);
    CHECK(back.entries[i].hr_bpm == m.entries[i].hr_bpm);
    CHECK(back.entries[i].split == m.entries[i].split);
  }

  gen_dataset(cfg, dir / "b");
  CHECK(bytes_of(dir / "a" / "manifest.csv") == bytes_of(dir / "b" / "manifest.csv"));
  for (const auto& e : m.entries) CHECK(bytes_of(dir / "a" / e.path) == bytes_of(dir / "b" / e.path));
}

TEST_CASE("fully supervised protocol has no unlabeled entries") {
  const auto dir = testing::scratch_dir("fully");
  DatasetConfig cfg;
  cfg.base.frames = 40;
  cfg.fully_supervised = true;
  const auto m = gen_dataset(cfg, dir);
  CHECK(m.count(Split::train_unlabeled) == 0);
  CHECK(m.count(Split::train_labeled) == 120);
}

TEST_CASE("unlabeled domain shift raises the unlabeled noise only") {
  DatasetConfig cfg;
  cfg.unlabeled_noise_std = 0.09;
  CHECK(clip_spec(cfg, Split::train_unlabeled, 3).noise_std == 0.09);
  CHECK(clip_spec(cfg, Split::test, 3).noise_std == cfg.base.noise_std);
  CHECK(clip_spec(cfg, Split::train_labeled, 3).noise_std == cfg.base.noise_std);
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  m.entries.push_back({"a", "clips/a.pcb", 80, true, Split::train_labeled});
  m.entries.push_back({"a", "clips/b.pcb", 80, true, Split::test});
  CHECK_THROWS(m.validate());
  const auto dir = testing::scratch_dir("manifest");
  {
    std::ofstream os(dir / "bad.csv");
    os << "id,path\nx,y\n";
  }
  CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), CorruptFile);
}

TEST_CASE("ground truth rate is recoverable up to 2% jitter") {
  for (int bpm = 40; bpm <= 180; ++bpm) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      SynthSpec s;
      s.hr_bpm = bpm;
      s.freq_jitter = 0.02;
      s.width = s.height = 1;
      s.seed = seed;
      const auto g = gen_clip(s);
      CHECK(hr_class_of(g.truth, BandConfig{}).bpm == bpm);
    }
  }
}

TEST_CASE("manifest splits partition the clip set") {
  const auto dir = testing::scratch_dir("partition");
  DatasetConfig cfg;
  cfg.base.frames = 30;
  const auto m = gen_dataset(cfg, dir);
  std::set<std::string> ids, paths;
  for (const auto& e : m.entries) {
    ids.insert(e.clip_id);
    paths.insert(e.path);
  }
  CHECK(ids.size() == m.entries.size());
  CHECK(paths.size() == m.entries.size());
  std::size_t total = 0;
  for (Split sp : {Split::train_labeled, Split::train_unlabeled, Split::validation, Split::test}) {
    total += m.count(sp);
  }
  CHECK(total == m.entries.size());
  CHECK(std::distance(std::filesystem::directory_iterator(dir / "clips"), {}) ==
        static_cast<std::ptrdiff_t>(m.entries.size()));
}
