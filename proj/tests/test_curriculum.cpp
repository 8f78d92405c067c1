#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pulse/curriculum.hpp"
#include "pulse/errors.hpp"
#include "support.hpp"

using namespace pulse;

TEST_CASE("increasing schedule end points") {
  CurriculumSchedule s;
  s.e_total = 10;
  CHECK(ratio_at(s, 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(ratio_at(s, 10) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(ratio_at(s, 5) == doctest::Approx(0.5).epsilon(1e-12));
  for (int e = 1; e <= 10; ++e) CHECK(ratio_at(s, e) >= ratio_at(s, e - 1));
  CHECK_THROWS_AS(ratio_at(s, 11), EpochOutOfRange);
  CHECK_THROWS_AS(ratio_at(s, -1), EpochOutOfRange);
}

TEST_CASE("decreasing and fixed schedules") {
  CurriculumSchedule s;
  s.e_total = 4;
  apply_schedule_name(s, "dec");
  CHECK(ratio_at(s, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(ratio_at(s, 4) == doctest::Approx(0.2).epsilon(1e-12));
  for (int e = 1; e <= 4; ++e) CHECK(ratio_at(s, e) <= ratio_at(s, e - 1));
  apply_schedule_name(s, "fixed:0.3");
  for (int e = 0; e <= 4; ++e) CHECK(ratio_at(s, e) == 0.3);
  CHECK(schedule_name(s) == "fixed:0.3");
  apply_schedule_name(s, "inc");
  CHECK(schedule_name(s) == "inc");
  CHECK_THROWS_AS(apply_schedule_name(s, "sideways"), ConfigError);
  CHECK_THROWS_AS(apply_schedule_name(s, "fixed:1.5"), ConfigError);
}

TEST_CASE("schedule validation") {
  CurriculumSchedule s;
  s.m = 0.5;
  s.n = 0.6;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = CurriculumSchedule{};
  s.e_total = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("selection size is floor of R times N") {
  CHECK(selection_size(0.2, 96) == 19);
  CHECK(selection_size(0.8, 96) == 76);
  CHECK(selection_size(0.7, 10) == 7);
  CHECK(selection_size(0.0, 10) == 0);
  CHECK(selection_size(1.0, 10) == 10);
  CurriculumSchedule s;
  s.e_total = 20;
  for (int e = 0; e <= 20; ++e) {
    const double r = ratio_at(s, e);
    CHECK(selection_size(r, 96) == static_cast<std::size_t>(std::floor(r * 96 + 1e-9)));
  }
}

namespace {

std::vector<PseudoLabelRecord> random_records(Rng& rng, std::size_t n) {
  std::vector<PseudoLabelRecord> recs(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "unl_%04zu", static_cast<std::size_t>(rng.uniform_int(0, 9999)));
    recs[i].clip_id = std::string(id) + "_" + std::to_string(i);
    // Coarse values make ties common.
    recs[i].criterion_value = std::round(rng.uniform() * 8.0) / 8.0;
    recs[i].snr = recs[i].criterion_value;
    recs[i].degenerate = rng.uniform() < 0.1;
  }
  return recs;
}

}  // namespace

TEST_CASE("top-k equals the full-sort oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 40));
    auto recs = random_records(rng, n);
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) + 3));
    std::vector<oracle::Scored> items;
    for (const auto& r : recs) items.push_back({r.clip_id, r.criterion_value, !r.degenerate});
    const auto chosen = select_top_k(recs, k);
    std::vector<std::string> got;
    for (std::size_t i : chosen) got.push_back(recs[i].clip_id);
    std::sort(got.begin(), got.end());
    CHECK(got == oracle::top_k(items, k));
    std::size_t flagged = 0;
    for (const auto& r : recs) {
      flagged += r.selected ? 1 : 0;
      if (r.degenerate) CHECK_FALSE(r.selected);
    }
    CHECK(flagged == chosen.size());
  }
}

TEST_CASE("ties break by ascending clip id") {
  std::vector<PseudoLabelRecord> recs(3);
  recs[0].clip_id = "unl_0002";
  recs[1].clip_id = "unl_0000";
  recs[2].clip_id = "unl_0001";
  for (auto& r : recs) r.criterion_value = 0.5;
  const auto chosen = select_top_k(recs, 2);
  CHECK(recs[1].selected);
  CHECK(recs[2].selected);
  CHECK_FALSE(recs[0].selected);
  CHECK(chosen.size() == 2);
}

TEST_CASE("threshold selection") {
  std::vector<PseudoLabelRecord> recs(4);
  const double vals[] = {0.1, 0.6, 0.5, 0.9};
  for (std::size_t i = 0; i < 4; ++i) {
    recs[i].clip_id = "c" + std::to_string(i);
    recs[i].snr = vals[i];
    recs[i].criterion_value = vals[i];
  }
  recs[3].degenerate = true;
  const auto chosen = select_threshold(recs, 0.5);
  CHECK(chosen.size() == 2);
  CHECK(recs[1].selected);
  CHECK(recs[2].selected);
  CHECK_FALSE(recs[3].selected);
}

TEST_CASE("criterion values") {
  const BandConfig band;
  const auto clean = testing::bvp(testing::tone(1.2, 30.0, 300));
  CHECK(criterion(CriterionKind::snr, clean, band) ==
        doctest::Approx(snr(psd_probe(clean, band), band)));
  CHECK(criterion(CriterionKind::neg_ipr, clean, band) ==
        doctest::Approx(1.0 - ipr(clean, band)));
  CHECK(criterion(CriterionKind::snr, testing::bvp(std::vector<double>(300, 1.0)), band) == 0.0);
  CHECK(parse_criterion("snr") == CriterionKind::snr);
  CHECK(parse_criterion("ipr") == CriterionKind::neg_ipr);
  CHECK_THROWS_AS(parse_criterion("mae"), ConfigError);
}

TEST_CASE("pseudo labels carry prediction and class") {
  Rng rng(32);
  std::vector<UnlabeledExample> unl;
  for (int i = 0; i < 4; ++i) {
    PooledClip p{3, 60, 30.0, {}};
    p.data.resize(180);
    for (auto& v : p.data) v = rng.normal();
    unl.push_back({"unl_000" + std::to_string(i), p});
  }
  const auto params = init_params(ModelSpec{}, 5);
  const auto recs = generate_pseudo_labels(params, unl, BandConfig{}, CriterionKind::snr, 3);
  REQUIRE(recs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(recs[i].clip_id == unl[i].id);
    CHECK(recs[i].epoch == 3);
    CHECK(recs[i].predicted.samples == forward(params, unl[i].clip).samples);
    CHECK(recs[i].hr.class_index == hr_class_of(recs[i].predicted, BandConfig{}).class_index);
    CHECK(recs[i].criterion_value == doctest::Approx(recs[i].snr));
  }
}

TEST_CASE("selection is invariant under rescaled predictions and deterministic") {
  Rng rng(33);
  const BandConfig band;
  std::vector<PseudoLabelRecord> a(30), b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    auto x = testing::tone(rng.uniform(0.8, 2.8), 30.0, 200);
    for (auto& v : x) v += 0.8 * rng.normal();
    auto y = x;
    const double k = rng.uniform(0.1, 10.0);
    for (auto& v : y) v *= k;
    a[i].clip_id = b[i].clip_id = "unl_" + std::to_string(1000 + i);
    a[i].criterion_value = criterion(CriterionKind::snr, testing::bvp(x), band);
    b[i].criterion_value = criterion(CriterionKind::snr, testing::bvp(y), band);
  }
  CurriculumSchedule s;
  s.e_total = 10;
  for (int e = 0; e <= 10; ++e) {
    auto a2 = a;
    auto b2 = b;
    CHECK(select_top_k(a2, s, e) == select_top_k(b2, s, e));
    auto a3 = a;
    CHECK(select_top_k(a3, s, e) == select_top_k(a2, s, e));
  }
}
