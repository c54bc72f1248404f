#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eafnet/gradcheck.hpp"
#include "eafnet/optim.hpp"

using namespace eafnet;
using namespace eafnet::autograd;
using V = Var<double>;
using G = Graph<double>;
using TD = Tensor<double>;

namespace {

constexpr double kOpTol = 1e-4;

V leaf(TD t) { return V(std::move(t), true); }

V rand_var(const Shape& s, std::mt19937_64& rng, double lo = -1, double hi = 1)
{
    return leaf(random_tensor<double>(s, rng, lo, hi));
}

// Reduces an op output with a fixed random projection and grad-checks it.
double check_projected(const std::function<V(G&)>& op, std::vector<V> inputs, std::uint64_t seed = 5)
{
    G probe(false);
    const Shape out_shape = op(probe).shape();
    const TD w = projection_weights<double>(out_shape, seed);
    auto f = [&](G& g) { return weighted_sum(g, op(g), w); };
    return grad_check<double>(f, std::move(inputs)).max_rel_error;
}

const std::vector<Shape> kImageShapes{{1, 2, 5, 5}, {2, 3, 4, 6}, {3, 1, 7, 3}};

}  // namespace

TEST(Tensor, RejectsBadShapes)
{
    EXPECT_THROW(TD(Shape{}), std::invalid_argument);
    EXPECT_THROW(TD({1, 2, 3, 4, 5}), std::invalid_argument);
    EXPECT_THROW(TD({2, 0}), std::invalid_argument);
    EXPECT_THROW(TD({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Graph, FanOutAccumulates)
{
    V x = leaf(TD({3}, std::vector<double>{1, 2, 3}));
    G g;
    V y = add(g, x, x);
    V s = sum(g, y);
    g.backward(s);
    for (double v : x.grad().values()) EXPECT_EQ(v, 2.0);
}

TEST(Graph, CheckFiniteFlagsNonFiniteValues)
{
    V x = leaf(TD({2}, std::vector<double>{1.0, std::numeric_limits<double>::infinity()}));
    G g;
    g.set_check_finite(true);
    EXPECT_THROW(relu(g, x), std::runtime_error);
}

TEST(Conv2d, IdentityOneByOne)
{
    std::mt19937_64 rng(1);
    V x = rand_var({2, 3, 4, 5}, rng);
    TD w({3, 3, 1, 1});
    for (int i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0;
    G g(false);
    V y = conv2d(g, x, V(w), V(TD({3})), 1, 0);
    EXPECT_EQ(y.value(), x.value());
}

TEST(Conv2d, MeanFilterOnConstantPlane)
{
    V x(TD({1, 1, 6, 6}, 0.7));
    V w(TD({1, 1, 3, 3}, 1.0 / 9.0));
    G g(false);
    V y = conv2d(g, x, w, V(), 1, 0);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
    for (double v : y.value().values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Conv2d, HandComputedStrideAndPad)
{
    // 1 channel 3x3 input, 2x2-valued 3x3 kernel of ones, stride 2, pad 1.
    V x(TD({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9}));
    V w(TD({1, 1, 3, 3}, 1.0));
    G g(false);
    V y = conv2d(g, x, w, V(TD({1}, 0.5)), 2, 1);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    // top-left window covers {1,2,4,5}, top-right {2,3,5,6}, ...
    EXPECT_EQ(y.value()[0], 12.5);
    EXPECT_EQ(y.value()[1], 16.5);
    EXPECT_EQ(y.value()[2], 24.5);
    EXPECT_EQ(y.value()[3], 28.5);
}

TEST(Conv2d, ShapeMismatchNamesDims)
{
    V x(TD({1, 3, 4, 4}));
    V w(TD({2, 2, 3, 3}));
    G g;
    try {
        conv2d(g, x, w, V(), 1, 1);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("[2,2,3,3]"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("[1,3,4,4]"), std::string::npos);
    }
}

TEST(Conv2d, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(2);
    struct Case {
        Shape x;
        int out, k, stride, pad;
    };
    for (const Case& c : {Case{{1, 2, 5, 5}, 3, 3, 1, 1}, Case{{2, 3, 7, 6}, 2, 7, 2, 3}, Case{{2, 2, 4, 4}, 3, 1, 1, 0},
                          Case{{1, 2, 6, 6}, 2, 3, 2, 1}}) {
        V x = rand_var(c.x, rng);
        V w = rand_var({c.out, c.x[1], c.k, c.k}, rng);
        V b = rand_var({c.out}, rng);
        double err = check_projected([&](G& g) { return conv2d(g, x, w, b, c.stride, c.pad); }, {x, w, b});
        EXPECT_LT(err, kOpTol) << shape_str(c.x) << " k=" << c.k;
    }
}

TEST(Conv1dChannels, IdentityKernel)
{
    V v(TD({1, 4}, std::vector<double>{1, 2, 3, 4}));
    G g(false);
    EXPECT_EQ(conv1d_channels(g, v, V(TD({1}, 1.0))).value(), v.value());
}

TEST(Conv1dChannels, EvenKernelPadsRight)
{
    V v(TD({1, 4}, std::vector<double>{1, 2, 3, 4}));
    G g(false);
    V y = conv1d_channels(g, v, V(TD({2}, 1.0)));
    EXPECT_EQ(y.value().to_vector(), (std::vector<double>{3, 5, 7, 4}));
}

TEST(Conv1dChannels, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(3);
    for (auto [n, c, k] : {std::tuple{1, 8, 3}, std::tuple{2, 16, 2}, std::tuple{3, 5, 4}, std::tuple{2, 3, 6}}) {
        V v = rand_var({n, c}, rng);
        V ker = rand_var({k}, rng);
        double err = check_projected([&](G& g) { return conv1d_channels(g, v, ker); }, {v, ker});
        EXPECT_LT(err, kOpTol) << c << " " << k;
    }
}

TEST(Pooling, GlobalAverageHandCase)
{
    V x(TD({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
    G g(false);
    EXPECT_EQ(global_avg_pool(g, x).value()[0], 2.5);
    V c(TD({2, 3, 4, 4}, -1.25));
    V pooled = global_avg_pool(g, c);
    for (double v : pooled.value().values()) EXPECT_EQ(v, -1.25);
}

TEST(Pooling, MaxPoolTieGoesToFirstRowMajor)
{
    V x(TD({1, 1, 2, 2}, std::vector<double>{3, 3, 3, 3}), true);
    G g;
    V y = max_pool2d(g, x, 2);
    V s = sum(g, y);
    g.backward(s);
    EXPECT_EQ(x.grad().to_vector(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Pooling, GridBinsCoverInput)
{
    V x(TD({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9}));
    G g(false);
    V y = avg_pool_grid(g, x, 2);
    // bins [0,2) and [1,3) in both axes
    EXPECT_EQ(y.value()[0], 3.0);
    EXPECT_EQ(y.value()[1], 4.0);
    EXPECT_EQ(y.value()[2], 6.0);
    EXPECT_EQ(y.value()[3], 7.0);
    EXPECT_THROW(avg_pool_grid(g, x, 4), std::invalid_argument);
}

TEST(Pooling, GradientsMatchFiniteDifferences)
{
    std::mt19937_64 rng(4);
    for (const Shape& s : kImageShapes) {
        V x = rand_var(s, rng);
        EXPECT_LT(check_projected([&](G& g) { return global_avg_pool(g, x); }, {x}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return avg_pool_grid(g, x, 2); }, {x}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return avg_pool_grid(g, x, 3); }, {x}), kOpTol);
        // distinct values keep the argmax away from ties
        V xd(TD(s), true);
        std::vector<double> vals(xd.value().numel());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
        std::shuffle(vals.begin(), vals.end(), rng);
        xd.value().storage().assign(vals.begin(), vals.end());
        EXPECT_LT(check_projected([&](G& g) { return max_pool2d(g, xd, 2); }, {xd}), kOpTol);
    }
}

TEST(Eltwise, HandCases)
{
    G g(false);
    EXPECT_EQ(sigmoid(g, V(TD({1}, 0.0))).value()[0], 0.5);
    std::mt19937_64 rng(5);
    V x = rand_var({2, 3, 2, 2}, rng);
    EXPECT_EQ(channel_scale(g, x, V(TD({2, 3}, 1.0))).value(), x.value());
    V c(TD({1, 2, 3, 5}, 0.3));
    V up = upsample2x(g, c);
    ASSERT_EQ(up.shape(), (Shape{1, 2, 6, 10}));
    for (double v : up.value().values()) EXPECT_NEAR(v, 0.3, 1e-15);
    V r = relu(g, V(TD({3}, std::vector<double>{-1, 0, 2})));
    EXPECT_EQ(r.value().to_vector(), (std::vector<double>{0, 0, 2}));
}

TEST(Eltwise, ChannelScaleMatchesPerChannelMultiply)
{
    std::mt19937_64 rng(6);
    V x = rand_var({2, 3, 4, 4}, rng);
    V d = rand_var({2, 3}, rng, 0, 1);
    G g(false);
    V y = channel_scale(g, x, d);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) EXPECT_EQ(y.value().at(n, c, i, j), x.value().at(n, c, i, j) * d.value()[n * 3 + c]);
}

TEST(Eltwise, GradientsMatchFiniteDifferences)
{
    std::mt19937_64 rng(7);
    for (const Shape& s : kImageShapes) {
        V a = rand_var(s, rng), b = rand_var(s, rng);
        // keep relu inputs away from the kink
        for (double& v : a.value().storage()) v += v > 0 ? 0.05 : -0.05;
        EXPECT_LT(check_projected([&](G& g) { return relu(g, a); }, {a}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return sigmoid(g, a); }, {a}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return add(g, a, b); }, {a, b}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return mul(g, a, b); }, {a, b}), kOpTol);
        V d = rand_var({s[0], s[1]}, rng);
        EXPECT_LT(check_projected([&](G& g) { return channel_scale(g, a, d); }, {a, d}), kOpTol);
        V c = rand_var({s[0], 2, s[2], s[3]}, rng);
        EXPECT_LT(check_projected([&](G& g) { return concat_channels<double>(g, {a, c, b}); }, {a, b, c}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return upsample2x(g, a); }, {a}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return bilinear_resize(g, a, 3, 11); }, {a}), kOpTol);
        EXPECT_LT(check_projected([&](G& g) { return bilinear_resize(g, a, 1, 2); }, {a}), kOpTol);
    }
}

TEST(BatchNorm, StandardizedInputPassesThrough)
{
    // per channel: values with mean 0 and biased variance 1
    std::vector<double> vals{1, -1, 1, -1, -1, 1, -1, 1};
    V x(TD({2, 1, 2, 2}, vals));
    V gamma(TD({1}, 1.0)), beta(TD({1}, 0.0));
    BatchNormState<double> st{TD({1}), TD({1}, 1.0)};
    G g(false);
    V y = batchnorm2d(g, x, gamma, beta, st, NormMode::train);
    for (std::size_t i = 0; i < vals.size(); ++i) EXPECT_NEAR(y.value()[i], vals[i], 1e-5);
    // running stats: momentum 0.1 towards mean 0, unbiased var 8/7
    EXPECT_NEAR(st.running_mean[0], 0.0, 1e-15);
    EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * 8.0 / 7.0, 1e-12);
}

TEST(BatchNorm, BetaShiftsOutputMean)
{
    std::mt19937_64 rng(8);
    V x = rand_var({4, 2, 3, 3}, rng);
    V gamma(TD({2}, 1.7)), beta(TD({2}, std::vector<double>{0.25, -3.0}));
    BatchNormState<double> st{TD({2}), TD({2}, 1.0)};
    G g(false);
    V y = batchnorm2d(g, x, gamma, beta, st, NormMode::train);
    for (int c = 0; c < 2; ++c) {
        double m = 0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 9; ++i) m += y.value()[(n * 2 + c) * 9 + i];
        EXPECT_NEAR(m / 36, beta.value()[c], 1e-12);
    }
}

TEST(BatchNorm, ModesAndBatchRequirement)
{
    V x(TD({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
    V gamma(TD({1}, 2.0)), beta(TD({1}, 1.0));
    BatchNormState<double> st{TD({1}, 1.0), TD({1}, 4.0)};
    G g(false);
    EXPECT_THROW(batchnorm2d(g, x, gamma, beta, st, NormMode::train), std::invalid_argument);
    V e = batchnorm2d(g, x, gamma, beta, st, NormMode::eval);
    EXPECT_NEAR(e.value()[3], 2.0 * (4 - 1) / std::sqrt(4 + 1e-5) + 1.0, 1e-12);
    V a = batchnorm2d(g, x, gamma, beta, st, NormMode::affine_only);
    EXPECT_EQ(a.value()[2], 7.0);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(9);
    for (const Shape& s : {Shape{4, 2, 3, 3}, Shape{4, 3, 2, 5}, Shape{2, 1, 4, 4}}) {
        V x = rand_var(s, rng);
        V gamma = rand_var({s[1]}, rng, 0.5, 1.5), beta = rand_var({s[1]}, rng);
        BatchNormState<double> st{TD({s[1]}), TD({s[1]}, 1.0)};
        for (NormMode mode : {NormMode::train, NormMode::eval, NormMode::affine_only}) {
            double err = check_projected([&](G& g) { return batchnorm2d(g, x, gamma, beta, st, mode); }, {x, gamma, beta});
            EXPECT_LT(err, kOpTol) << shape_str(s) << " mode " << static_cast<int>(mode);
        }
    }
}

TEST(CrossEntropy, UniformLogits)
{
    V logits(TD({2, 9, 3, 3}, 0.37));
    std::vector<int> labels(18);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 9);
    G g(false);
    EXPECT_NEAR(softmax_cross_entropy(g, logits, labels).value()[0], std::log(9.0), 1e-12);
    EXPECT_NEAR(std::log(9.0), 2.1972, 1e-4);
}

TEST(CrossEntropy, AllIgnoredIsZeroWithNoGradient)
{
    V logits(TD({1, 3, 2, 2}, 0.5), true);
    std::vector<int> labels(4, 255);
    G g;
    std::size_t counted = 99;
    V loss = softmax_cross_entropy(g, logits, labels, {255}, &counted);
    EXPECT_EQ(counted, 0u);
    EXPECT_EQ(loss.value()[0], 0.0);
    EXPECT_FALSE(loss.requires_grad() && g.size() > 0);
    EXPECT_FALSE(logits.has_grad());
}

TEST(CrossEntropy, NonNegativeAndZeroOnlyForConfidentCorrect)
{
    std::mt19937_64 rng(10);
    for (int t = 0; t < 20; ++t) {
        V logits = rand_var({1, 4, 2, 2}, rng, -3, 3);
        std::vector<int> labels(4);
        for (int& l : labels) l = static_cast<int>(rng() % 4);
        G g(false);
        EXPECT_GT(softmax_cross_entropy(g, logits, labels).value()[0], 0.0);
    }
    TD onehot({1, 2, 1, 1}, std::vector<double>{800, -800});
    G g(false);
    EXPECT_EQ(softmax_cross_entropy(g, V(onehot), {0}).value()[0], 0.0);
}

TEST(CrossEntropy, RejectsOutOfRangeLabel)
{
    V logits(TD({1, 3, 1, 2}));
    G g(false);
    EXPECT_THROW(softmax_cross_entropy(g, logits, {0, 3}), std::invalid_argument);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(11);
    for (const Shape& s : {Shape{1, 3, 2, 2}, Shape{2, 5, 3, 2}, Shape{2, 9, 2, 3}}) {
        V logits = rand_var(s, rng, -2, 2);
        std::vector<int> labels(static_cast<std::size_t>(s[0] * s[2] * s[3]));
        for (int& l : labels) l = static_cast<int>(rng() % static_cast<unsigned>(s[1]));
        labels[0] = 255;
        auto f = [&](G& g) { return softmax_cross_entropy(g, logits, labels, {255}); };
        EXPECT_LT(grad_check<double>(f, {logits}).max_rel_error, kOpTol);
    }
}

TEST(GradCheck, LinearMapIsExactToRounding)
{
    std::mt19937_64 rng(12);
    V x = rand_var({3, 4}, rng);
    TD w = projection_weights<double>({3, 4}, 3);
    auto f = [&](G& g) { return weighted_sum(g, scale(g, x, 2.5), w); };
    EXPECT_LT(grad_check<double>(f, {x}).max_rel_error, 1e-9);
}

TEST(GradCheck, SigmoidComposition)
{
    std::mt19937_64 rng(13);
    V x = rand_var({2, 3, 3, 3}, rng);
    TD w = projection_weights<double>({2, 3, 3, 3}, 4);
    auto f = [&](G& g) { return weighted_sum(g, sigmoid(g, scale(g, sigmoid(g, x), 3.0)), w); };
    EXPECT_LT(grad_check<double>(f, {x}).max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsCorruptedBackward)
{
    std::mt19937_64 rng(14);
    V x = rand_var({2, 3}, rng);
    TD w = projection_weights<double>({2, 3}, 4);
    auto f = [&](G& g) { return weighted_sum(g, sigmoid(g, x), w); };
    fault_injection::corrupt_sigmoid_backward = true;
    const double err = grad_check<double>(f, {x}).max_rel_error;
    fault_injection::corrupt_sigmoid_backward = false;
    EXPECT_GT(err, 1e-2);
}

TEST(Adam, ZeroGradientZeroDecayLeavesParams)
{
    optim::ParamList<double> ps{{"w", V(TD({3}, std::vector<double>{1, -2, 3}), true), true}};
    ps[0].var.grad();
    optim::AdamState<double> st;
    optim::adam_step(ps, st, 1e-3, 0.0);
    EXPECT_EQ(ps[0].var.value().to_vector(), (std::vector<double>{1, -2, 3}));
}

TEST(Adam, FirstStepMovesByLearningRate)
{
    optim::ParamList<double> ps{{"w", V(TD({1}, 0.0), true), true}};
    ps[0].var.grad()[0] = 1.0;
    optim::AdamState<double> st;
    optim::adam_step(ps, st, 1e-3, 1e-4);
    // m_hat = v_hat = 1 -> step = lr / (1 + eps); decay term is 0 at theta = 0
    EXPECT_NEAR(ps[0].var.value()[0], -1e-3 / (1 + 1e-8), 1e-18);
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, DecayOnlyOnFlaggedParams)
{
    optim::ParamList<double> ps{{"w", V(TD({1}, 1.0), true), true}, {"b", V(TD({1}, 1.0), true), false}};
    optim::AdamState<double> st;
    optim::adam_step(ps, st, 1e-2, 1e-4);
    EXPECT_LT(ps[0].var.value()[0], 1.0);
    EXPECT_EQ(ps[1].var.value()[0], 1.0);
}

TEST(Adam, Deterministic)
{
    auto run = [] {
        std::mt19937_64 rng(15);
        optim::ParamList<double> ps{{"w", rand_var({4, 4}, rng), true}};
        optim::AdamState<double> st;
        for (int i = 0; i < 10; ++i) {
            for (std::size_t k = 0; k < 16; ++k) ps[0].var.grad()[k] = std::sin(static_cast<double>(i * 16 + k));
            optim::adam_step(ps, st, 1e-3, 1e-4);
        }
        return std::pair{ps[0].var.value(), st.m[0]};
    };
    EXPECT_EQ(run(), run());
}

TEST(Cosine, Endpoints)
{
    optim::CosineSchedule s{4e-4, 2.5e-3, 1000};
    EXPECT_EQ(optim::cosine_lr(0, s), 4e-4);
    EXPECT_NEAR(optim::cosine_lr(1000, s), 1e-6, 1e-18);
    EXPECT_NEAR(optim::cosine_lr(500, s), (4e-4 + 1e-6) / 2, 1e-18);
    EXPECT_THROW(optim::cosine_lr(1001, s), std::out_of_range);
    EXPECT_THROW(optim::cosine_lr(-1, s), std::out_of_range);
}

TEST(Cosine, MonotoneNonIncreasing)
{
    optim::CosineSchedule s{4e-4, 2.5e-3, 777};
    double prev = optim::cosine_lr(0, s);
    for (long t = 1; t <= s.total_steps; ++t) {
        const double lr = optim::cosine_lr(t, s);
        ASSERT_LE(lr, prev);
        prev = lr;
    }
}

TEST(GradCheck, KinkAwareStepShrinks)
{
    // x sits 1e-4 from the ReLU kink; a 1e-3 stencil straddles it.
    V x = leaf(TD({1}, 1e-4));
    auto f = [&](G& g) { return sum(g, relu(g, x)); };
    GradCheckOptions naive;
    naive.eps = 1e-3;
    EXPECT_GT(grad_check<double>(f, {x}, naive).max_rel_error, 0.1);
    GradCheckOptions aware = naive;
    aware.avoid_kinks = true;
    auto r = grad_check<double>(f, {x}, aware);
    EXPECT_LT(r.max_rel_error, 1e-9);
    EXPECT_EQ(r.skipped, 0u);
    V at_kink = leaf(TD({1}, 0.0));
    auto g0 = [&](G& g) { return sum(g, relu(g, at_kink)); };
    EXPECT_EQ(grad_check<double>(g0, {at_kink}, aware).skipped, 1u);
}

TEST(GradCheck, HigherOrderStencils)
{
    std::mt19937_64 rng(21);
    V x = rand_var({2, 3}, rng);
    auto f = [&](G& g) { return sum(g, sigmoid(g, mul(g, x, x))); };
    for (auto m : {FdMethod::central, FdMethod::five_point, FdMethod::ridders}) {
        GradCheckOptions o;
        o.method = m;
        o.eps = m == FdMethod::ridders ? 1e-2 : 1e-4;
        EXPECT_LT(grad_check<double>(f, {x}, o).max_rel_error, 1e-7);
    }
}
