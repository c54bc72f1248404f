#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "eafnet/metrics.hpp"

using namespace eafnet::metrics;

namespace {

struct Oracle {
    std::vector<std::optional<double>> iou, precision, recall;
    std::optional<double> miou;
};

// Per-pixel set counting, written independently of the confusion matrix.
Oracle brute_force(const std::vector<int>& truth, const std::vector<int>& pred, int k, const std::vector<int>& evaluated)
{
    Oracle o;
    double sum = 0;
    int defined = 0;
    for (int c = 0; c < k; ++c) {
        long inter = 0, in_truth = 0, in_pred = 0, uni = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool a = truth[i] == c, b = pred[i] == c;
            inter += a && b;
            uni += a || b;
            in_truth += a;
            in_pred += b;
        }
        o.iou.push_back(uni ? std::optional<double>(double(inter) / double(uni)) : std::nullopt);
        o.precision.push_back(in_pred ? std::optional<double>(double(inter) / double(in_pred)) : std::nullopt);
        o.recall.push_back(in_truth ? std::optional<double>(double(inter) / double(in_truth)) : std::nullopt);
    }
    for (int c : evaluated) {
        if (o.iou[c]) {
            sum += *o.iou[c];
            ++defined;
        }
    }
    if (defined) o.miou = sum / defined;
    return o;
}

}  // namespace

TEST(Confusion, PerfectPredictionIsDiagonal)
{
    std::vector<int> labels{0, 3, 3, 8, 2, 1};
    ConfusionMatrix cm(9);
    update_confusion(cm, labels, labels);
    for (int t = 0; t < 9; ++t) {
        for (int p = 0; p < 9; ++p) {
            if (t != p) {
                EXPECT_EQ(cm.at(t, p), 0u);
            }
        }
    }
    EXPECT_EQ(cm.at(3, 3), 2u);
    auto r = compute_metrics(cm, {0, 1, 2, 3, 8});
    EXPECT_EQ(*r.miou, 1.0);
}

TEST(Confusion, HandCount)
{
    ConfusionMatrix cm(2);
    update_confusion(cm, {0, 0, 1, 1}, {0, 1, 1, 1});
    EXPECT_EQ(cm.counts(), (std::vector<std::uint64_t>{1, 1, 0, 2}));
    auto r = compute_metrics(cm, {0, 1});
    EXPECT_DOUBLE_EQ(*r.per_class[0].iou, 0.5);
    EXPECT_DOUBLE_EQ(*r.per_class[0].precision, 1.0);
    EXPECT_DOUBLE_EQ(*r.per_class[0].recall, 0.5);
    EXPECT_DOUBLE_EQ(*r.per_class[1].iou, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*r.per_class[1].precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*r.per_class[1].recall, 1.0);
}

TEST(Confusion, IgnoreAndBounds)
{
    ConfusionMatrix cm(3);
    update_confusion(cm, {0, 1, 2}, {0, 0, 0}, {0, 1, 2});
    EXPECT_EQ(cm.total(), 0u);
    auto r = compute_metrics(cm);
    EXPECT_FALSE(r.miou.has_value());
    for (const auto& c : r.per_class) EXPECT_FALSE(c.iou || c.precision || c.recall);
    EXPECT_THROW(update_confusion(cm, {0, 1}, {0}), std::invalid_argument);
    EXPECT_THROW(update_confusion(cm, {3}, {0}), std::out_of_range);
    EXPECT_THROW(update_confusion(cm, {0}, {-1}), std::out_of_range);
}

TEST(Confusion, MergeMatchesUnionProperty)
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> ta(100), pa(100), tb(70), pb(70);
        for (auto* v : {&ta, &pa, &tb, &pb}) {
            for (int& x : *v) x = static_cast<int>(rng() % 5);
        }
        ConfusionMatrix a(5), b(5), u(5);
        update_confusion(a, ta, pa, {4});
        update_confusion(b, tb, pb, {4});
        update_confusion(u, ta, pa, {4});
        update_confusion(u, tb, pb, {4});
        auto ab = a, ba = b;
        ab.merge(b);
        ba.merge(a);
        ASSERT_EQ(ab, u);
        ASSERT_EQ(ba, u);
    }
}

TEST(Argmax, TiesGoToLowestId)
{
    // N=1, K=3, 1x2: pixel 0 ties between classes 1 and 2, pixel 1 all equal
    std::vector<double> s{0.0, 5.0, 2.0, 5.0, 2.0, 5.0};
    EXPECT_EQ(argmax_channels(s, 1, 3, 1, 2), (std::vector<int>{1, 0}));
}

TEST(Metrics, MatchesBruteForceOracle)
{
    std::mt19937_64 rng(2);
    const std::vector<int> evaluated{1, 2, 3, 4, 5, 6, 7, 8};
    for (int trial = 0; trial < 100; ++trial) {
        // skewed class usage so some classes end up undefined
        const int used = 2 + static_cast<int>(rng() % 8);
        std::vector<int> t(256), p(256);
        for (int& x : t) x = static_cast<int>(rng() % used);
        for (int& x : p) x = static_cast<int>(rng() % used);
        ConfusionMatrix cm(9);
        update_confusion(cm, t, p);
        auto r = compute_metrics(cm, evaluated);
        auto o = brute_force(t, p, 9, evaluated);
        for (int c = 0; c < 9; ++c) {
            ASSERT_EQ(r.per_class[c].iou, o.iou[c]);
            ASSERT_EQ(r.per_class[c].precision, o.precision[c]);
            ASSERT_EQ(r.per_class[c].recall, o.recall[c]);
        }
        ASSERT_EQ(r.miou, o.miou);
    }
}

TEST(Metrics, IouBoundedByPrecisionAndRecallProperty)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix cm(4);
        for (int t = 0; t < 4; ++t) {
            for (int p = 0; p < 4; ++p) cm.at(t, p) = rng() % 20;
        }
        auto r = compute_metrics(cm, {0, 1, 2, 3});
        for (const auto& c : r.per_class) {
            if (!c.iou) continue;
            ASSERT_LE(*c.iou, *c.precision);
            ASSERT_LE(*c.iou, *c.recall);
            ASSERT_GE(*c.iou, 0.0);
        }
    }
}

TEST(Metrics, CsvLayout)
{
    ConfusionMatrix cm(2);
    update_confusion(cm, {0, 0, 1, 1}, {0, 1, 1, 1});
    std::ostringstream os;
    compute_metrics(cm, {1}).write_csv(os, {"bg", "fg"});
    EXPECT_EQ(os.str(),
              "class,iou,precision,recall\n"
              "bg,0.5,1,0.5\n"
              "fg,0.66666666666666663,0.66666666666666663,1\n"
              "mIoU,0.66666666666666663,,\n");
}
