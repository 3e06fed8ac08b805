#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "volrob/metrics.hpp"

using namespace volrob;
using namespace volrob::testing;

namespace {

LabelVolume labels_from(const std::vector<std::int32_t>& values, Shape3 shape, int classes) {
  LabelVolume l(shape, classes);
  l.labels = values;
  return l;
}

SampleMetrics with_means(double mean_dsc, double mean_hd95, bool defined = true) {
  SampleMetrics m;
  m.mean_dsc = mean_dsc;
  m.mean_hd95 = mean_hd95;
  m.hd95_defined = defined;
  return m;
}

}  // namespace

TEST_CASE("dsc of identical non-empty masks is one") {
  const LabelVolume a = random_labels({4, 4, 4}, 3, 1);
  CHECK(dsc(a, a, 1) == 1.0);
  CHECK(dsc(a, a, 2) == 1.0);
}

TEST_CASE("dsc of disjoint masks is zero") {
  const Shape3 s{2, 2, 2};
  const LabelVolume a = labels_from({1, 1, 0, 0, 0, 0, 0, 0}, s, 2);
  const LabelVolume b = labels_from({0, 0, 1, 1, 0, 0, 0, 0}, s, 2);
  CHECK(dsc(a, b, 1) == 0.0);
}

TEST_CASE("dsc counts sets: |A|=4, |B|=4, overlap 2 gives 0.5") {
  const Shape3 s{2, 2, 2};
  const LabelVolume a = labels_from({1, 1, 1, 1, 0, 0, 0, 0}, s, 2);
  const LabelVolume b = labels_from({0, 0, 1, 1, 1, 1, 0, 0}, s, 2);
  CHECK(dsc(a, b, 1) == 0.5);
}

TEST_CASE("dsc flags the both-empty case as a perfect 1.0") {
  const Shape3 s{2, 2, 2};
  const LabelVolume a(s, 3, 0);
  bool both_empty = false;
  CHECK(dsc(a, a, 2, &both_empty) == 1.0);
  CHECK(both_empty);
}

TEST_CASE("dsc rejects out-of-range classes") {
  const LabelVolume a = random_labels({4, 4, 4}, 3, 2);
  CHECK_THROWS_AS(dsc(a, a, 3), Error);
}

TEST_CASE("dsc matches the set-count oracle and is symmetric") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Shape3 s{4, 4, 4};
    const LabelVolume a = random_labels(s, 3, seed * 2 + 1);
    const LabelVolume b = random_labels(s, 3, seed * 2 + 2);
    for (int c = 1; c < 3; ++c) {
      CHECK(dsc(a, b, c) == dsc_oracle(a, b, c));
      CHECK(dsc(a, b, c) == dsc(b, a, c));
    }
  }
}

TEST_CASE("hd95 of identical masks is zero") {
  const Shape3 s{8, 8, 8};
  const auto m = random_mask(s, 0.3, 5);
  if (std::find(m.begin(), m.end(), 1) != m.end()) {
    CHECK(hd95(m, m, s) == 0.0);
  }
}

TEST_CASE("hd95 of two single voxels is their Euclidean distance") {
  const Shape3 s{8, 8, 8};
  std::vector<std::uint8_t> a(numel(s), 0), b(numel(s), 0);
  a[flat_index(s, 0, 0, 0)] = 1;
  b[flat_index(s, 3, 4, 0)] = 1;
  CHECK(hd95(a, b, s) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("empty prediction mask yields the flagged volume-diagonal sentinel") {
  const Shape3 s{32, 32, 32};
  std::vector<std::uint8_t> empty(numel(s), 0);
  std::vector<std::uint8_t> gt(numel(s), 0);
  gt[0] = 1;
  bool flagged = false;
  const double v = hd95(empty, gt, s, &flagged);
  CHECK(flagged);
  CHECK(v == doctest::Approx(32.0 * std::sqrt(3.0)).epsilon(1e-9));
}

TEST_CASE("hd95 is symmetric and matches the all-pairs oracle") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Shape3 s{6, 6, 6};
    const auto a = random_mask(s, 0.15 + 0.02 * (seed % 5), seed * 3 + 1);
    const auto b = random_mask(s, 0.15 + 0.02 * (seed % 7), seed * 3 + 2);
    bool fa = false, fb = false;
    const double ours = hd95(a, b, s, &fa);
    const double oracle = hd95_oracle(a, b, s, &fb);
    CAPTURE(seed);
    CHECK(fa == fb);
    CHECK(ours == oracle);
    CHECK(hd95(b, a, s) == ours);
  }
}

TEST_CASE("asr_d is zero when nothing changed") {
  const std::vector<SampleMetrics> clean{with_means(0.9, 3.0), with_means(0.7, 2.0)};
  CHECK(asr_d(clean, clean) == 0.0);
}

TEST_CASE("asr_d averages absolute per-sample DSC drops") {
  const std::vector<SampleMetrics> clean{with_means(0.8, 0.0), with_means(0.9, 0.0)};
  const std::vector<SampleMetrics> adv{with_means(0.5, 0.0), with_means(0.7, 0.0)};
  CHECK(asr_d(clean, adv) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("asr_d rejects mismatched list lengths") {
  const std::vector<SampleMetrics> clean{with_means(0.8, 0.0)};
  const std::vector<SampleMetrics> adv{};
  CHECK_THROWS_AS(asr_d(clean, adv), Error);
}

TEST_CASE("asr_h on identical lists is (0, 0)") {
  const std::vector<SampleMetrics> clean{with_means(0.9, 4.0)};
  const AsrH h = asr_h(clean, clean);
  CHECK(h.signed_change == 0.0);
  CHECK(h.abs_change == 0.0);
}

TEST_CASE("asr_h hand-computed case: 2.0 to 5.0 gives +3.0") {
  const std::vector<SampleMetrics> clean{with_means(0.9, 2.0)};
  const std::vector<SampleMetrics> adv{with_means(0.5, 5.0)};
  const AsrH h = asr_h(clean, adv);
  CHECK(h.signed_change == doctest::Approx(3.0));
  CHECK(h.abs_change == doctest::Approx(3.0));
}

TEST_CASE("asr_h admits negative signed changes while abs dominates") {
  const std::vector<SampleMetrics> clean{with_means(0.9, 5.0), with_means(0.9, 4.0)};
  const std::vector<SampleMetrics> adv{with_means(0.8, 2.0), with_means(0.8, 6.0)};
  const AsrH h = asr_h(clean, adv);
  CHECK(h.signed_change == doctest::Approx(-0.5));
  CHECK(h.abs_change == doctest::Approx(2.5));
  CHECK(h.abs_change >= std::abs(h.signed_change));
}

TEST_CASE("asr_h excludes sentinel-flagged samples and errors when all are") {
  const std::vector<SampleMetrics> clean{with_means(0.9, 2.0, false), with_means(0.9, 2.0)};
  const std::vector<SampleMetrics> adv{with_means(0.1, 9.0), with_means(0.1, 5.0)};
  const AsrH h = asr_h(clean, adv);
  CHECK(h.n_used == 1);
  CHECK(h.n_excluded == 1);
  CHECK(h.signed_change == doctest::Approx(3.0));

  const std::vector<SampleMetrics> all_flagged{with_means(0.9, 2.0, false)};
  const std::vector<SampleMetrics> adv1{with_means(0.1, 9.0)};
  CHECK_THROWS_AS(asr_h(all_flagged, adv1), Error);
}

TEST_CASE("sample metrics exclude background and flagged classes from means") {
  const Shape3 s{4, 4, 4};
  LabelVolume gt(s, 3, 0);
  gt.labels[0] = 1;
  gt.labels[1] = 1;  // class 2 absent in both -> dsc flagged, hd95 flagged
  LabelVolume pred = gt;
  const SampleMetrics m = compute_sample_metrics(pred, gt);
  CHECK(m.class_dsc[1] == 1.0);
  CHECK(m.dsc_empty[2]);
  CHECK(m.hd95_flagged[2]);
  CHECK(m.mean_dsc == 1.0);   // only class 1 counted
  CHECK(m.mean_hd95 == 0.0);  // only class 1 counted
  CHECK(m.hd95_defined);
}

TEST_CASE("perturbation stats of identical volumes vanish") {
  const Volume x = random_volume({8, 8, 8}, 70);
  const PerturbationStats s = perturbation_stats(x, x);
  CHECK(s.linf == 0.0);
  CHECK(s.l2 == 0.0);
  CHECK(s.mean_abs == 0.0);
}

TEST_CASE("a single changed voxel is reflected in every norm") {
  const Shape3 shape{4, 4, 4};
  const Volume x(shape, 0.5f);
  Volume y = x;
  y.data[10] = 0.6f;
  const PerturbationStats s = perturbation_stats(x, y);
  const double d = static_cast<double>(y.data[10]) - 0.5;
  CHECK(s.linf == doctest::Approx(d).epsilon(1e-12));
  CHECK(s.l2 == doctest::Approx(d).epsilon(1e-12));
  CHECK(s.mean_abs == doctest::Approx(d / 64.0).epsilon(1e-12));
}

TEST_CASE("dsc grows with intersection at fixed mask sizes") {
  // Brute force over tiny masks: fixed |A| and |B|, growing overlap.
  const Shape3 s{4, 4, 1};
  for (int overlap = 0; overlap <= 3; ++overlap) {
    std::vector<std::int32_t> a(numel(s), 0), b(numel(s), 0);
    for (int i = 0; i < 3; ++i) a[i] = 1;                      // A = {0,1,2}
    for (int i = 0; i < 3; ++i) b[3 - overlap + i] = 1;        // B shifts into A
    const double value =
        dsc(labels_from(a, s, 2), labels_from(b, s, 2), 1);
    CHECK(value == doctest::Approx(2.0 * overlap / 6.0).epsilon(1e-12));
  }
}
