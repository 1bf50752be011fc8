#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support/detection_oracles.hpp"
#include "support/oracles.hpp"
#include "vdnet/eval.hpp"

namespace vdnet {
namespace {

using testing::TestRng;
using testing::greedy_oracle;
using testing::same;

Box random_box(TestRng& rng, double extent = 20.0) {
  const double x = rng.uniform(0, extent), y = rng.uniform(0, extent);
  return {x, y, x + rng.uniform(1, 10), y + rng.uniform(1, 10)};
}

TEST(IouTest, HandFixtures) {
  const Box a{0, 0, 1, 1};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, Box{2, 2, 3, 3}), 0.0);
  EXPECT_EQ(iou(a, Box{1, 0, 2, 1}), 0.0);  // touching edges
  EXPECT_NEAR(iou(a, Box{0.5, 0, 1.5, 1}), 1.0 / 3.0, 1e-12);
  EXPECT_THROW(iou(a, Box{1, 1, 1, 2}), GeometryError);
}

TEST(IouTest, SymmetricAndBounded) {
  TestRng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(NmsTest, SingletonAndDuplicate) {
  const Detection d{{0, 0, 4, 4}, 0, 0.7};
  EXPECT_TRUE(same(nms({d}, 0.5), {d}));
  const Detection hi{{0, 0, 4, 4}, 1, 0.9}, lo{{0, 0, 4, 4}, 1, 0.8};
  const auto kept = nms({lo, hi}, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
  // Different classes never suppress each other.
  EXPECT_EQ(nms({hi, Detection{{0, 0, 4, 4}, 2, 0.8}}, 0.5).size(), 2u);
}

TEST(NmsTest, MatchesExhaustiveGreedyAndIsIdempotent) {
  TestRng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Detection> dets(rng.index(11));
    for (auto& d : dets) d = {random_box(rng, 12.0), rng.index(2), rng.uniform()};
    const double thresh = rng.uniform();
    const auto kept = nms(dets, thresh);
    ASSERT_TRUE(same(kept, greedy_oracle(dets, thresh))) << "trial " << trial;
    EXPECT_TRUE(same(nms(kept, thresh), kept));
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) EXPECT_GE(kept[i].score, kept[i + 1].score);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].class_id == kept[j].class_id) {
          EXPECT_LE(iou(kept[i].box, kept[j].box), thresh);
        }
      }
    }
  }
}

TEST(AveragePrecisionTest, PerfectAndEmpty) {
  const std::vector<ImageBox> gts{{0, {0, 0, 2, 2}}, {1, {3, 3, 6, 6}}};
  const std::vector<ImageDetection> perfect{{0, {0, 0, 2, 2}, 0.9}, {1, {3, 3, 6, 6}, 0.4}};
  EXPECT_EQ(average_precision(perfect, gts, 0.5).ap, 1.0);
  EXPECT_EQ(average_precision({}, gts, 0.5).ap, 0.0);
}

TEST(AveragePrecisionTest, HandEnumeratedFixture) {
  // Ranked TP, FP, TP over two truths.
  // rank 1: P = 1,   R = 1/2
  // rank 2: P = 1/2, R = 1/2
  // rank 3: P = 2/3, R = 1
  // Envelope over recall: 1 on (0, 1/2], 2/3 on (1/2, 1].
  const std::vector<ImageBox> gts{{0, {0, 0, 4, 4}}, {0, {10, 10, 14, 14}}};
  const std::vector<ImageDetection> dets{{0, {0, 0, 4, 4}, 0.9}, {0, {20, 20, 24, 24}, 0.8},
                                         {0, {10, 10, 14, 14}, 0.7}};
  const ApResult r = average_precision(dets, gts, 0.5);
  EXPECT_EQ(r.ap, 0.5 * 1.0 + 0.5 * (2.0 / 3.0));
  ASSERT_EQ(r.curve.size(), 3u);
  EXPECT_EQ(r.curve[1].precision, 0.5);
  EXPECT_TRUE(r.matches[0].true_positive);
  EXPECT_FALSE(r.matches[1].true_positive);
  EXPECT_EQ(*r.matches[2].truth, 1u);
}

TEST(AveragePrecisionTest, EachTruthMatchedOnce) {
  const std::vector<ImageBox> gts{{0, {0, 0, 4, 4}}};
  const std::vector<ImageDetection> dets{{0, {0, 0, 4, 4}, 0.9}, {0, {0, 0, 4, 4}, 0.8}};
  const ApResult r = average_precision(dets, gts, 0.5);
  EXPECT_TRUE(r.matches[0].true_positive);
  EXPECT_FALSE(r.matches[1].true_positive);
  EXPECT_EQ(r.ap, 1.0);
  // A detection in another image never matches.
  const std::vector<ImageDetection> elsewhere{{1, {0, 0, 4, 4}, 0.9}};
  EXPECT_EQ(average_precision(elsewhere, gts, 0.5).ap, 0.0);
}

TEST(AveragePrecisionTest, InvariantToPositiveScoreScaling) {
  TestRng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ImageBox> gts(1 + rng.index(5));
    for (auto& g : gts) g = {rng.index(2), random_box(rng, 10.0)};
    std::vector<ImageDetection> dets(rng.index(10));
    for (auto& d : dets) d = {rng.index(2), random_box(rng, 10.0), rng.uniform()};
    auto scaled = dets;
    const double c = rng.uniform(0.01, 100.0);
    for (auto& d : scaled) d.score *= c;
    const double ap = average_precision(dets, gts, 0.5).ap;
    EXPECT_EQ(average_precision(scaled, gts, 0.5).ap, ap);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
  }
}

// Independent mAP: per class, enumerate every rank cut-off and take the
// maximum precision at recall >= r for each recall step.
double brute_force_map(const std::vector<std::vector<Detection>>& dets,
                       const std::vector<std::vector<Annotation>>& truths, std::size_t classes) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    struct Flat {
      std::size_t image, order;
      Detection d;
    };
    std::vector<Flat> flat;
    std::size_t n_gt = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      for (const auto& a : truths[i]) n_gt += a.class_id == c;
      for (const auto& d : dets[i]) {
        if (d.class_id == c) flat.push_back({i, flat.size(), d});
      }
    }
    if (n_gt == 0) continue;
    std::stable_sort(flat.begin(), flat.end(), [](const Flat& a, const Flat& b) { return a.d.score > b.d.score; });
    std::vector<std::vector<char>> used(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) used[i].assign(truths[i].size(), 0);
    std::vector<double> prec, rec;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const auto& f = flat[k];
      double best = -1.0;
      std::optional<std::size_t> hit;
      for (std::size_t g = 0; g < truths[f.image].size(); ++g) {
        const auto& a = truths[f.image][g];
        if (a.class_id != c || used[f.image][g]) continue;
        const double v = iou(a.box, f.d.box);
        if (v >= 0.5 && v > best) {
          best = v;
          hit = g;
        }
      }
      if (hit) {
        used[f.image][*hit] = 1;
        ++tp;
      }
      prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
      rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    double ap = 0.0, last = 0.0;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      double p = 0.0;
      for (std::size_t j = k; j < rec.size(); ++j) p = std::max(p, prec[j]);
      ap += (rec[k] - last) * p;
      last = rec[k];
    }
    total += ap;
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

TEST(EvaluateTest, MatchesBruteForceMap) {
  TestRng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t images = 1 + rng.index(3);
    std::vector<std::vector<Annotation>> truths(images);
    std::vector<std::vector<Detection>> dets(images);
    std::size_t boxes = 0;
    for (std::size_t i = 0; i < images; ++i) {
      for (std::size_t k = rng.index(4); k > 0 && boxes < 20; --k, ++boxes) {
        truths[i].push_back({rng.index(3), random_box(rng, 8.0)});
      }
      for (std::size_t k = rng.index(5); k > 0 && boxes < 20; --k, ++boxes) {
        // Jittered copies of truths plus clutter.
        Box b = random_box(rng, 8.0);
        if (!truths[i].empty() && rng.uniform() < 0.6) {
          b = truths[i][rng.index(truths[i].size())].box;
          b.x_min += rng.uniform(-0.5, 0.5);
          b.x_max += rng.uniform(-0.5, 0.5);
        }
        dets[i].push_back({b, rng.index(3), std::round(rng.uniform() * 5) / 5});
      }
    }
    const EvalReport report = evaluate(dets, truths, {"a", "b", "c"});
    EXPECT_NEAR(report.mean_ap, brute_force_map(dets, truths, 3), 1e-12) << "trial " << trial;
  }
}

TEST(EvaluateTest, ExcludesClassesWithoutTruth) {
  const std::vector<std::vector<Annotation>> truths{{{0, {0, 0, 4, 4}}}};
  const std::vector<std::vector<Detection>> dets{{{{0, 0, 4, 4}, 0, 0.9}, {{5, 5, 9, 9}, 1, 0.8}}};
  const EvalReport r = evaluate(dets, truths, {"circle", "square"});
  ASSERT_EQ(r.classes.size(), 1u);
  EXPECT_EQ(r.mean_ap, 1.0);
  EXPECT_EQ(r.to_json()["iou_threshold"], 0.5);
  EXPECT_NE(r.to_table("x").find("circle"), std::string::npos);
}

TEST(CompareTest, IdenticalArmsGiveZeroDelta) {
  const std::vector<std::vector<Annotation>> truths{{{0, {0, 0, 4, 4}}}, {{1, {2, 2, 8, 8}}}};
  const ArmResult arm{{"a", "b"}, {{{{0, 0, 4, 4}, 0, 0.9}}, {{{2, 2, 7, 8}, 1, 0.6}, {{9, 9, 12, 12}, 1, 0.7}}}};
  const ComparisonReport r = compare_masked_unmasked(arm, arm, truths, {"circle", "square"}, {0.4, 0.5}, {1, 1});
  EXPECT_EQ(r.map_delta, 0.0);
  const auto j = r.to_json();
  EXPECT_EQ(j["iou_threshold"], 0.5);
  EXPECT_TRUE(j.contains("mAP_masked"));
  EXPECT_TRUE(j.contains("mAP_plain"));
  EXPECT_NEAR(j["mask_coverage"]["mean"].get<double>(), 0.45, 1e-12);
  EXPECT_NE(r.to_table().find("masked"), std::string::npos);

  ArmResult other = arm;
  other.image_ids[1] = "c";
  EXPECT_THROW(compare_masked_unmasked(arm, other, truths, {"circle", "square"}, {}, {}), ValueError);
}

}  // namespace
}  // namespace vdnet
