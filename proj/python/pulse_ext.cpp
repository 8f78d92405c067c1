#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pulse/commands.hpp"
#include "pulse/curriculum.hpp"
#include "pulse/errors.hpp"
#include "pulse/signal.hpp"
#include "pulse/synth.hpp"

namespace py = pybind11;
using namespace pulse;

namespace {

template <typename F>
py::tuple capture(F&& f) {
  std::ostringstream out, err;
  const int code = f(out, err);
  return py::make_tuple(code, out.str(), err.str());
}

BvpSignal as_signal(std::vector<double> samples, double fps) { return BvpSignal{std::move(samples), fps}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral heart-rate utilities, synthetic clips and the training command layer.";

  auto base = py::register_exception<Error>(m, "PulseError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<CorruptFile>(m, "CorruptFile", base.ptr());
  py::register_exception<VersionMismatch>(m, "VersionMismatch", base.ptr());
  py::register_exception<DegenerateSignal>(m, "DegenerateSignal", base.ptr());
  py::register_exception<NonFiniteInput>(m, "NonFiniteInput", base.ptr());
  py::register_exception<InvalidSpec>(m, "InvalidSpec", base.ptr());
  py::register_exception<EpochOutOfRange>(m, "EpochOutOfRange", base.ptr());

  m.def(
      "psd",
      [](std::vector<double> x, double fps) { return psd_probe(x, fps, BandConfig{}).power; },
      py::arg("samples"), py::arg("fps") = 30.0,
      "Power at the 141 one-BPM classes from 40 to 180 BPM.");
  m.def(
      "heart_rate",
      [](std::vector<double> x, double fps) { return hr_class_of(as_signal(std::move(x), fps), BandConfig{}).bpm; },
      py::arg("samples"), py::arg("fps") = 30.0);
  m.def(
      "snr",
      [](std::vector<double> x, double fps) {
        const BandConfig band;
        return snr(psd_probe(x, fps, band), band);
      },
      py::arg("samples"), py::arg("fps") = 30.0);
  m.def(
      "ipr", [](std::vector<double> x, double fps) { return ipr(as_signal(std::move(x), fps), BandConfig{}); },
      py::arg("samples"), py::arg("fps") = 30.0);
  m.def(
      "pearson", [](std::vector<double> a, std::vector<double> b) { return pearson_r(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "ratio_at",
      [](const std::string& schedule, int e_total, int epoch) {
        CurriculumSchedule s;
        s.e_total = e_total;
        apply_schedule_name(s, schedule);
        return ratio_at(s, epoch);
      },
      py::arg("schedule"), py::arg("e_total"), py::arg("epoch"));
  m.def("selection_size", &selection_size, py::arg("ratio"), py::arg("n"));

  m.def(
      "read_clip",
      [](const std::filesystem::path& path) {
        const auto f = read_clip(path);
        py::dict d;
        d["shape"] = py::make_tuple(f.clip.frames, f.clip.width, f.clip.height, f.clip.channels);
        d["fps"] = f.clip.fps;
        d["pixels"] = f.clip.data;
        d["truth"] = f.truth.samples;
        return d;
      },
      py::arg("path"), "Read a PCB1 clip; pixels are flat in (t, h, w, c) order.");
  m.def(
      "synth_truth",
      [](int hr_bpm, std::size_t frames, std::uint64_t seed) {
        SynthSpec s;
        s.hr_bpm = hr_bpm;
        s.frames = frames;
        s.width = s.height = 1;
        s.seed = seed;
        return gen_clip(s).truth.samples;
      },
      py::arg("hr_bpm"), py::arg("frames") = 300, py::arg("seed") = 1,
      "Ground-truth pulse waveform of a synthetic clip.");

  // Each command returns (exit_code, stdout, stderr) exactly as the CLI would.
  m.def(
      "gen",
      [](std::optional<std::filesystem::path> config, std::filesystem::path out, std::optional<std::uint64_t> seed) {
        return capture([&](auto& o, auto& e) { return cmd_gen({config, seed, out}, o, e); });
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none());
  m.def(
      "train",
      [](std::optional<std::filesystem::path> config, std::filesystem::path out, std::string protocol,
         std::optional<std::uint64_t> seed, std::optional<std::string> schedule,
         std::optional<std::string> criterion, std::optional<std::filesystem::path> data) {
        TrainOptions t;
        t.common = {config, seed, out};
        t.protocol = std::move(protocol);
        t.schedule = std::move(schedule);
        t.criterion = std::move(criterion);
        t.data = std::move(data);
        return capture([&](auto& o, auto& e) { return cmd_train(t, o, e); });
      },
      py::arg("config"), py::arg("out"), py::arg("protocol") = "semi", py::arg("seed") = py::none(),
      py::arg("schedule") = py::none(), py::arg("criterion") = py::none(), py::arg("data") = py::none());
  m.def(
      "score",
      [](std::filesystem::path input) {
        return capture([&](auto& o, auto& e) { return cmd_score(input, o, e); });
      },
      py::arg("input"));
  m.def(
      "ablate",
      [](std::optional<std::filesystem::path> config, std::filesystem::path out, std::string axis,
         std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> data) {
        AblateOptions a;
        a.common = {config, seed, out};
        a.axis = std::move(axis);
        a.data = std::move(data);
        return capture([&](auto& o, auto& e) { return cmd_ablate(a, o, e); });
      },
      py::arg("config"), py::arg("out"), py::arg("axis"), py::arg("seed") = py::none(),
      py::arg("data") = py::none());
}
