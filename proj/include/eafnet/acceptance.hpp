#pragma once

// The twelve acceptance checks, shared by `eafnet verify` and the acceptance
// test binary. Each check returns pass/fail plus a one-line detail.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eafnet/checkpoint.hpp"
#include "eafnet/dataset.hpp"
#include "eafnet/eac.hpp"
#include "eafnet/gradcheck.hpp"
#include "eafnet/metrics.hpp"
#include "eafnet/model.hpp"
#include "eafnet/pder.hpp"
#include "eafnet/polarimetry.hpp"
#include "eafnet/train.hpp"

namespace eafnet::acceptance {

namespace fs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Check {
    int id = 0;
    std::string name;
    std::function<Outcome()> run;
};

struct Options {
    // Runs the command-line frontend in-process; returns its exit code.
    std::function<int(const std::vector<std::string>&)> cli;
    fs::path scratch = fs::temp_directory_path();
};

namespace detail {

inline std::string fmt(double v, int precision = 3)
{
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline fs::path fresh_dir(const fs::path& base, const std::string& stem)
{
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const fs::path p = base / (stem + "-" + std::to_string(rd()));
        if (fs::create_directories(p)) return p;
    }
    throw std::runtime_error("cannot create a scratch directory under " + base.string());
}

using V = autograd::Var<double>;
using G = autograd::Graph<double>;
using TD = Tensor<double>;

inline V leaf(const Shape& s, std::mt19937_64& rng, double lo = -1, double hi = 1)
{
    return V(autograd::random_tensor<double>(s, rng, lo, hi), true);
}

inline double projected_error(const std::function<V(G&)>& op, std::vector<V> inputs, std::uint64_t seed = 5)
{
    G probe(false);
    const TD w = autograd::projection_weights<double>(op(probe).shape(), seed);
    auto f = [&](G& g) { return autograd::weighted_sum(g, op(g), w); };
    return autograd::grad_check<double>(f, std::move(inputs)).max_rel_error;
}

// Independent per-pixel set counting.
struct OracleReport {
    std::vector<std::optional<double>> iou, precision, recall;
    std::optional<double> miou;
};

inline OracleReport brute_force(const std::vector<int>& truth, const std::vector<int>& pred, int k,
                                const std::vector<int>& evaluated)
{
    OracleReport o;
    for (int c = 0; c < k; ++c) {
        long inter = 0, uni = 0, in_truth = 0, in_pred = 0;
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
    double sum = 0;
    int defined = 0;
    for (int c : evaluated) {
        if (o.iou[static_cast<std::size_t>(c)]) {
            sum += *o.iou[static_cast<std::size_t>(c)];
            ++defined;
        }
    }
    if (defined) o.miou = sum / defined;
    return o;
}

inline nn::EafnetConfig toy_model(train::Preset p, std::uint64_t seed)
{
    nn::EafnetConfig c;
    c.branches = train::preset_branches(p);
    c.widths = {8, 8, 12, 12, 16};
    c.blocks_per_stage = 1;
    c.spp_levels = {1, 2};
    c.decoder_width = 8;
    c.init_seed = seed;
    return c;
}

}  // namespace detail

// ---------------------------------------------------------------- 1

inline Outcome stokes_roundtrip()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int side = 100;
    polar::StokesMap s{ImageD(1, side, side), ImageD(1, side, side), ImageD(1, side, side)};
    for (std::size_t i = 0; i < s.s0.data.size(); ++i) {
        const double s0 = 1e-3 + u(rng), p = u(rng), phi = 2 * std::numbers::pi * u(rng);
        s.s0.data[i] = s0;
        s.s1.data[i] = s0 * p * std::cos(phi);
        s.s2.data[i] = s0 * p * std::sin(phi);
    }
    const auto back = polar::compute_stokes(polar::synthesize_intensities(s));
    double worst = 0;
    for (std::size_t i = 0; i < s.s0.data.size(); ++i) {
        worst = std::max({worst, std::abs(back.s0.data[i] - s.s0.data[i]), std::abs(back.s1.data[i] - s.s1.data[i]),
                          std::abs(back.s2.data[i] - s.s2.data[i])});
    }
    const double secs = detail::seconds_since(t0);
    return {worst < 1e-9 && secs < 1.0,
            "10000 pixels, max residual " + detail::fmt(worst) + ", " + detail::fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 2

inline Outcome polarization_ranges()
{
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    polar::IntensityQuad q{ImageD(1, 100, 100), ImageD(1, 100, 100), ImageD(1, 100, 100), ImageD(1, 100, 100)};
    for (ImageD* p : {&q.i0, &q.i45, &q.i90, &q.i135}) {
        for (double& v : p->data) v = u(rng);
    }
    q.i0.data[0] = q.i45.data[0] = q.i90.data[0] = q.i135.data[0] = 0.0;  // dark pixel
    const auto st = polar::compute_stokes(q);
    long bad = 0;
    for (auto conv : {polar::AolpConvention::atan2_s1_s2, polar::AolpConvention::standard}) {
        const auto d = polar::derive(st, conv);
        for (double v : d.dolp.data) bad += !(v >= 0.0 && v <= 1.0);
        for (double v : d.aolp_deg.data) bad += !(v >= 0.0 && v < 180.0);
    }
    const double d1 = polar::dolp_of(1, 1, 0), a1 = polar::aolp_of(1, 0), a2 = polar::aolp_of(0, -1);
    const bool hand = std::abs(d1 - 1.0) <= 1e-9 && std::abs(a1 - 45.0) <= 1e-9 && std::abs(a2 - 90.0) <= 1e-9;
    return {bad == 0 && hand, std::to_string(bad) + " out-of-range values over 20000; (1,1,0) -> DoLP " +
                                  detail::fmt(d1, 12) + ", AoLP " + detail::fmt(a1, 12) + "; (1,0,-1) -> AoLP " +
                                  detail::fmt(a2, 12)};
}

// ---------------------------------------------------------------- 3

inline Outcome fresnel()
{
    double worst_brewster = 0;
    for (double n : {1.33, 1.5, 2.4}) {
        worst_brewster = std::max(worst_brewster,
                                  std::abs(polar::fresnel_coefficients(1.0, n, polar::brewster_angle_deg(1.0, n)).r_p));
    }
    const auto r = polar::fresnel_coefficients(1.0, 1.5, 0.0);
    const double worst_normal = std::max({std::abs(r.r_s + 0.2), std::abs(r.r_p - 0.2), std::abs(r.t_s - 0.8),
                                          std::abs(r.t_p - 0.8)});
    return {worst_brewster < 1e-9 && worst_normal < 1e-12,
            "max |r_p| at Brewster " + detail::fmt(worst_brewster) + "; normal incidence max deviation " +
                detail::fmt(worst_normal)};
}

// ---------------------------------------------------------------- 4

inline Outcome kernel_table()
{
    const std::vector<int> channels{16, 32, 64, 128, 256, 512}, expected{2, 4, 4, 4, 4, 6};
    std::vector<int> got;
    for (int c : channels) got.push_back(nn::adaptive_kernel_size(c, 1.0, 2.0));
    std::string s;
    for (std::size_t i = 0; i < got.size(); ++i) s += (i ? "," : "") + std::to_string(got[i]);
    return {got == expected, "K over C=16..512: {" + s + "}"};
}

// ---------------------------------------------------------------- 5

inline Outcome aolp_flip()
{
    std::mt19937_64 rng(105);
    std::uniform_real_distribution<double> u(0.0, 180.0);
    double worst = 0;
    for (int i = 0; i < 1000000; ++i) {
        const double a = u(rng);
        worst = std::max(worst, std::abs(polar::flip_aolp(polar::flip_aolp(a)) - a));
    }
    auto cfg = data::SyntheticSceneConfig{};
    cfg.seed = 5;
    double worst_sample = 0;
    for (int i = 0; i < 5; ++i) {
        const auto cap = data::synthetic_capture_at(cfg, "train", i);
        const auto s = data::sample_from_capture("s", cap.quad, cap.label, data::ModalityMode::aolp_dolp);
        const auto twice = data::flip_sample(data::flip_sample(s));
        const ImageD a = s.plane(data::PlaneKind::aolp), b = twice.plane(data::PlaneKind::aolp);
        for (std::size_t k = 0; k < a.data.size(); ++k) {
            worst_sample = std::max(worst_sample, std::abs(a.data[k] - b.data[k]) * 180.0);
        }
    }
    return {worst <= 1e-12 && worst_sample <= 1e-6,
            "value map max error " + detail::fmt(worst) + " over 1e6 angles; sample double flip max error " +
                detail::fmt(worst_sample) + " deg"};
}

// ---------------------------------------------------------------- 6

inline Outcome gradient_suite()
{
    using namespace autograd;
    using detail::G;
    using detail::leaf;
    using detail::TD;
    using detail::V;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(106);
    std::vector<std::pair<std::string, double>> errs;
    const auto rec = [&errs](const std::string& name, double e) { errs.emplace_back(name, e); };

    {
        V x = leaf({2, 3, 7, 6}, rng), w = leaf({4, 3, 3, 3}, rng), b = leaf({4}, rng);
        rec("conv2d", detail::projected_error([&](G& g) { return conv2d(g, x, w, b, 2, 1); }, {x, w, b}));
        V w7 = leaf({2, 3, 7, 7}, rng);
        rec("conv2d_7x7", detail::projected_error([&](G& g) { return conv2d(g, x, w7, V(), 2, 3); }, {x, w7}));
    }
    {
        V v = leaf({2, 9}, rng), k = leaf({4}, rng);
        rec("conv1d_channels", detail::projected_error([&](G& g) { return conv1d_channels(g, v, k); }, {v, k}));
    }
    V a = leaf({2, 3, 4, 6}, rng), b = leaf({2, 3, 4, 6}, rng);
    for (double& v : a.value().storage()) v += v > 0 ? 0.05 : -0.05;  // away from the ReLU kink
    rec("global_avg_pool", detail::projected_error([&](G& g) { return global_avg_pool(g, a); }, {a}));
    rec("avg_pool_grid", detail::projected_error([&](G& g) { return avg_pool_grid(g, a, 3); }, {a}));
    {
        V xd(TD({2, 3, 4, 6}), true);
        std::vector<double> vals(xd.value().numel());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
        std::shuffle(vals.begin(), vals.end(), rng);
        xd.value().storage().assign(vals.begin(), vals.end());
        rec("max_pool2d", detail::projected_error([&](G& g) { return max_pool2d(g, xd, 2); }, {xd}));
    }
    rec("relu", detail::projected_error([&](G& g) { return relu(g, a); }, {a}));
    rec("sigmoid", detail::projected_error([&](G& g) { return sigmoid(g, a); }, {a}));
    rec("add", detail::projected_error([&](G& g) { return add(g, a, b); }, {a, b}));
    rec("mul", detail::projected_error([&](G& g) { return mul(g, a, b); }, {a, b}));
    rec("scale", detail::projected_error([&](G& g) { return scale(g, a, 1.7); }, {a}));
    {
        V d = leaf({2, 3}, rng);
        rec("channel_scale", detail::projected_error([&](G& g) { return channel_scale(g, a, d); }, {a, d}));
        V c = leaf({2, 2, 4, 6}, rng);
        rec("concat_channels", detail::projected_error([&](G& g) { return concat_channels<double>(g, {a, c, b}); }, {a, b, c}));
    }
    rec("upsample2x", detail::projected_error([&](G& g) { return upsample2x(g, a); }, {a}));
    rec("bilinear_resize", detail::projected_error([&](G& g) { return bilinear_resize(g, a, 3, 11); }, {a}));
    {
        V x = leaf({4, 3, 3, 3}, rng), gamma = leaf({3}, rng, 0.5, 1.5), beta = leaf({3}, rng);
        BatchNormState<double> st{TD({3}), TD({3}, 1.0)};
        for (NormMode m : {NormMode::train, NormMode::eval, NormMode::affine_only}) {
            rec("batchnorm2d", detail::projected_error([&](G& g) { return batchnorm2d(g, x, gamma, beta, st, m); },
                                                       {x, gamma, beta}));
        }
    }
    {
        V logits = leaf({2, 9, 2, 3}, rng, -2, 2);
        std::vector<int> labels(12);
        for (int& l : labels) l = static_cast<int>(rng() % 9);
        labels[0] = 255;
        auto f = [&](G& g) { return softmax_cross_entropy(g, logits, labels, {255}); };
        rec("softmax_cross_entropy", grad_check<double>(f, {logits}).max_rel_error);
        auto s = [&](G& g) { return sum(g, sigmoid(g, a)); };
        rec("sum", grad_check<double>(s, {a}).max_rel_error);
    }
    {
        auto eac = nn::EacModule<double>::from_channels(6);
        eac.init_random(rng);
        V x = leaf({2, 6, 3, 4}, rng);
        rec("eac_forward", detail::projected_error([&](G& g) { return eac.forward(g, x).adjusted; }, {x, eac.kernel()}));
        rec("eac_weights", detail::projected_error([&](G& g) { return eac.forward(g, x).weights; }, {x, eac.kernel()}));
        auto eac2 = nn::EacModule<double>::from_channels(6);
        eac2.init_random(rng);
        V y = leaf({2, 6, 3, 4}, rng), m = leaf({2, 6, 3, 4}, rng);
        rec("fuse_stage", detail::projected_error(
                              [&](G& g) {
                                  return nn::fuse_stage<double>(g, {x, y}, {&eac, &eac2}, std::optional<V>(m)).fused;
                              },
                              {x, y, m, eac.kernel(), eac2.kernel()}));
    }
    double op_worst = 0;
    std::string op_name;
    for (const auto& [n, e] : errs) {
        if (!(e <= op_worst)) {
            op_worst = e;
            op_name = n;
        }
    }

    // end-to-end toy model, 32x32, batch 4
    nn::EafnetConfig cfg;
    cfg.branches = {{nn::InputKind::rgb, 3}, {nn::InputKind::aolp, 1}};
    cfg.widths = {3, 4, 4, 5, 6};
    cfg.blocks_per_stage = 1;
    cfg.spp_levels = {1};
    cfg.decoder_width = 3;
    cfg.num_classes = 3;
    cfg.init_seed = 9;
    nn::Eafnet<double> model(cfg);
    std::mt19937_64 mrng(11);
    for (auto& stage : model.eac_modules()) {
        for (auto& e : stage) e.init_random(mrng);
    }
    std::vector<V> inputs;
    for (const auto& br : cfg.branches) {
        inputs.emplace_back(random_tensor<double>({4, br.channels, 32, 32}, mrng, 0, 1), false);
    }
    std::vector<int> labels(4 * 32 * 32);
    for (int& l : labels) l = static_cast<int>(mrng() % 3);
    std::vector<V> probe;
    for (auto& p : model.parameters()) probe.push_back(p.var);
    probe.push_back(inputs[1]);
    auto f = [&](G& g) { return softmax_cross_entropy(g, model.forward(g, inputs, NormMode::train).logits, labels); };
    GradCheckOptions opt;
    opt.max_elements_per_input = 3;
    opt.method = FdMethod::five_point;
    opt.eps = 1e-3;
    opt.avoid_kinks = true;
    const auto e2e = grad_check<double>(f, probe, opt);
    const bool e2e_ok = e2e.max_rel_error < 1e-3 && e2e.skipped * 20 <= e2e.checked + e2e.skipped;
    const double secs = detail::seconds_since(t0);
    return {op_worst < 1e-4 && e2e_ok && secs < 300.0,
            std::to_string(errs.size()) + " op checks, worst " + detail::fmt(op_worst) + " (" + op_name +
                "); end-to-end " + detail::fmt(e2e.max_rel_error) + " over " + std::to_string(e2e.checked) +
                " elements (" + std::to_string(e2e.skipped) + " skipped at kinks); " + detail::fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 7

inline Outcome metrics_oracle()
{
    std::mt19937_64 rng(107);
    const auto evaluated = metrics::default_evaluated_classes(9);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int used = 2 + static_cast<int>(rng() % 8);
        std::vector<int> t(256), p(256);
        for (int& x : t) x = static_cast<int>(rng() % static_cast<unsigned>(used));
        for (int& x : p) x = static_cast<int>(rng() % static_cast<unsigned>(used));
        metrics::ConfusionMatrix cm(9);
        metrics::update_confusion(cm, t, p);
        const auto r = metrics::compute_metrics(cm, evaluated);
        const auto o = detail::brute_force(t, p, 9, evaluated);
        bool same = r.miou == o.miou;
        for (int c = 0; c < 9; ++c) {
            const auto& m = r.per_class[static_cast<std::size_t>(c)];
            const auto k = static_cast<std::size_t>(c);
            same = same && m.iou == o.iou[k] && m.precision == o.precision[k] && m.recall == o.recall[k];
        }
        mismatches += !same;
    }
    auto scfg = data::SyntheticSceneConfig::two_material();
    scfg.seed = 17;
    const auto val = data::synthesize_split(scfg, "val", 7, data::ModalityMode::aolp);
    nn::Eafnet<float> model(detail::toy_model(train::Preset::aolp_ex, 17));
    const auto seq = train::evaluate_confusion(model, val);
    int shard_mismatch = 0;
    for (int shards : {2, 3, 4, 7}) {
        train::EvalOptions o;
        o.shards = shards;
        shard_mismatch += !(train::evaluate_confusion(model, val, o) == seq);
    }
    return {mismatches == 0 && shard_mismatch == 0,
            std::to_string(mismatches) + "/100 oracle mismatches; " + std::to_string(shard_mismatch) +
                "/4 shard layouts differ from sequential"};
}

// ---------------------------------------------------------------- 8

inline Outcome eac_contract()
{
    using detail::G;
    using detail::TD;
    using detail::V;
    std::mt19937_64 rng(108);
    std::normal_distribution<double> nd(0.0, 3.0);
    bool open_interval = true;
    double e_err = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int c = 4 + trial * 3;
        auto eac = nn::EacModule<double>::from_channels(c);
        eac.init_random(rng);
        TD x({3, c, 5, 4});
        for (double& v : x.storage()) v = nd(rng);
        G g(false);
        const auto out = eac.forward(g, V(x));
        for (double d : out.weights.value().values()) open_interval = open_interval && d > 0.0 && d < 1.0;
        for (int n = 0; n < 3; ++n) {
            for (int k = 0; k < c; ++k) {
                const double d = out.weights.value()[static_cast<std::size_t>(n * c + k)];
                for (int i = 0; i < 5; ++i) {
                    for (int j = 0; j < 4; ++j) {
                        e_err = std::max(e_err, std::abs(out.adjusted.value().at(n, k, i, j) - x.at(n, k, i, j) * d));
                    }
                }
            }
        }
    }
    bool half = true;
    {
        nn::EacModule<double> zero(16, 2);
        TD x({2, 16, 3, 3});
        for (double& v : x.storage()) v = nd(rng);
        G g(false);
        for (double d : zero.forward(g, V(x)).weights.value().values()) half = half && d == 0.5;
    }
    double perm_err = 0;
    {
        std::vector<nn::EacModule<double>> eacs;
        std::vector<V> feats;
        for (int b = 0; b < 3; ++b) {
            eacs.push_back(nn::EacModule<double>::from_channels(12));
            eacs.back().init_random(rng);
            TD f({2, 12, 4, 4});
            for (double& v : f.storage()) v = nd(rng);
            feats.emplace_back(f);
        }
        TD m({2, 12, 4, 4});
        for (double& v : m.storage()) v = nd(rng);
        G g(false);
        const auto base = nn::fuse_stage<double>(g, feats, {&eacs[0], &eacs[1], &eacs[2]}, std::optional<V>(V(m)));
        const std::vector<std::vector<int>> perms{{1, 0, 2}, {2, 1, 0}, {1, 2, 0}};
        for (const auto& p : perms) {
            const auto out = nn::fuse_stage<double>(
                g, {feats[static_cast<std::size_t>(p[0])], feats[static_cast<std::size_t>(p[1])], feats[static_cast<std::size_t>(p[2])]},
                {&eacs[static_cast<std::size_t>(p[0])], &eacs[static_cast<std::size_t>(p[1])], &eacs[static_cast<std::size_t>(p[2])]},
                std::optional<V>(V(m)));
            for (std::size_t i = 0; i < base.fused.value().numel(); ++i) {
                perm_err = std::max(perm_err, std::abs(base.fused.value()[i] - out.fused.value()[i]));
            }
        }
    }
    return {open_interval && e_err <= 1e-6 && half && perm_err <= 1e-6,
            std::string("D in (0,1): ") + (open_interval ? "yes" : "no") + "; E vs per-channel multiply " +
                detail::fmt(e_err) + "; zero kernel gives 0.5: " + (half ? "yes" : "no") +
                "; permutation deviation " + detail::fmt(perm_err)};
}

// ---------------------------------------------------------------- 9

// Color-uninformative two-material scenes: RGB-only versus RGB + AoLP, each
// trained with the default recipe on 200 scenes and scored on 50 more.
inline Outcome directional_fusion(std::ostream* progress = nullptr)
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    double sum_base = 0, sum_aolp = 0;
    std::string per_seed;
    for (std::uint64_t seed : seeds) {
        auto scfg = data::SyntheticSceneConfig::two_material();
        scfg.seed = seed;
        train::TrainConfig tc;
        tc.seed = seed;
        double score[2] = {0, 0};
        for (int k = 0; k < 2; ++k) {
            const auto preset = k == 0 ? train::Preset::baseline : train::Preset::aolp_ex;
            const auto mode = train::preset_modality(preset);
            const auto tr = data::synthesize_split(scfg, "train", 200, mode);
            const auto va = data::synthesize_split(scfg, "val", 50, mode);
            nn::Eafnet<float> model(detail::toy_model(preset, seed));
            const auto res = train::train(model, tr, va, tc);
            score[k] = res.final_report.miou.value_or(0.0);
            if (progress) {
                *progress << "  seed " << seed << ' ' << train::to_string(preset) << " val mIoU " << score[k] << " ("
                          << detail::fmt(detail::seconds_since(t0)) << " s)\n";
            }
        }
        sum_base += score[0];
        sum_aolp += score[1];
        per_seed += (per_seed.empty() ? "" : ", ") + detail::fmt(score[1]) + " vs " + detail::fmt(score[0]);
    }
    const double n = static_cast<double>(seeds.size());
    const double gap = (sum_aolp - sum_base) / n * 100.0;
    const double secs = detail::seconds_since(t0);
    return {gap >= 10.0 && secs <= 600.0,
            "AoLP-EX " + detail::fmt(sum_aolp / n) + " vs Baseline " + detail::fmt(sum_base / n) + " mean mIoU (" +
                detail::fmt(gap) + " points; per seed " + per_seed + "); " + detail::fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 10

inline Outcome cli_determinism(const Options& opt)
{
    if (!opt.cli) return {false, "no command-line entry point supplied"};
    const fs::path root = detail::fresh_dir(opt.scratch, "eafnet-determinism");
    std::vector<std::vector<std::uint8_t>> files[2];
    const std::vector<std::string> names{"metrics.csv", "last.eafc", "best.eafc", "log.csv"};
    for (int k = 0; k < 2; ++k) {
        const fs::path out = root / ("run" + std::to_string(k));
        const int rc = opt.cli({"run", "AoLP-EX", "--synthetic", "--seed", "7", "--out", out.string()});
        if (rc != 0) return {false, "run exited with code " + std::to_string(rc)};
        for (const auto& n : names) files[k].push_back(io::read_file((out / n).string()));
    }
    fs::remove_all(root);
    std::string differing;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (files[0][i] != files[1][i]) differing += " " + names[i];
    }
    return {differing.empty(), differing.empty() ? "two runs of `run AoLP-EX --synthetic --seed 7` byte-identical "
                                                   "(metrics.csv, last.eafc, best.eafc, log.csv)"
                                                 : "differing files:" + differing};
}

// ---------------------------------------------------------------- 11

inline Outcome persistence(const Options& opt)
{
    const fs::path root = detail::fresh_dir(opt.scratch, "eafnet-persistence");
    std::mt19937_64 rng(111);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    bool pder_ok = true;
    for (int channels : {1, 3}) {
        ImageD img(channels, 3, 4);
        for (double& v : img.data) v = u(rng);
        const fs::path p = root / ("plane" + std::to_string(channels) + ".pder");
        pder::save_derived(img, p.string());
        const ImageD back = pder::load_derived(p.string());
        pder_ok = pder_ok && back.data == img.data && back.channels == img.channels;
    }

    auto scfg = data::SyntheticSceneConfig::two_material();
    scfg.seed = 3;
    const auto tr = data::synthesize_split(scfg, "train", 8, data::ModalityMode::aolp);
    nn::Eafnet<float> model(detail::toy_model(train::Preset::aolp_ex, 3));
    train::TrainConfig tc;
    tc.epochs = 1;
    train::train(model, tr, {}, tc);
    const fs::path a = root / "a.eafc", b = root / "b.eafc";
    checkpoint::save(model, a, {{"note", "persistence"}});
    auto loaded = checkpoint::load<float>(a);
    checkpoint::save(loaded.model, b, loaded.meta);
    const bool bytes_ok = io::read_file(a.string()) == io::read_file(b.string());
    const auto batch = train::make_batch<float>({&tr[0], &tr[1]}, model.config());
    autograd::Graph<float> g(false);
    const bool forward_ok = model.forward(g, batch.inputs, autograd::NormMode::eval).logits.value() ==
                            loaded.model.forward(g, batch.inputs, autograd::NormMode::eval).logits.value();
    fs::remove_all(root);
    return {pder_ok && bytes_ok && forward_ok, std::string("PDER round trip ") + (pder_ok ? "bit-exact" : "DIFFERS") +
                                                   "; checkpoint save-load-save " +
                                                   (bytes_ok ? "byte-identical" : "DIFFERS") + "; post-load forward " +
                                                   (forward_ok ? "bitwise equal" : "DIFFERS")};
}

// ---------------------------------------------------------------- 12

inline Outcome statistics()
{
    auto scfg = data::SyntheticSceneConfig::two_material();
    scfg.seed = 11;
    const auto samples = data::synthesize_split(scfg, "train", 40, data::ModalityMode::aolp_dolp);
    std::uint64_t pixels = 0;
    for (const auto& s : samples) pixels += static_cast<std::uint64_t>(s.height()) * static_cast<std::uint64_t>(s.width());
    bool totals = true;
    for (auto kind : {data::PlaneKind::aolp, data::PlaneKind::dolp}) {
        for (int bins : {2, 7, 100}) {
            const auto st = data::histogram(samples, kind, bins);
            totals = totals && st.total == pixels &&
                     std::accumulate(st.counts.begin(), st.counts.end(), std::uint64_t{0}) == pixels;
        }
    }
    const double mass = data::histogram(samples, data::PlaneKind::dolp, 100).mass_below(0.4);
    return {totals && mass >= 0.8, std::string("counts sum to pixel totals: ") + (totals ? "yes" : "no") +
                                       "; DoLP mass in [0, 0.4]: " + detail::fmt(mass)};
}

// ---------------------------------------------------------------- registry

inline std::vector<Check> all_checks(const Options& opt, std::ostream* progress = nullptr)
{
    return {
        {1, "stokes_roundtrip", stokes_roundtrip},
        {2, "dolp_aolp_ranges", polarization_ranges},
        {3, "fresnel", fresnel},
        {4, "kernel_size_table", kernel_table},
        {5, "aolp_flip", aolp_flip},
        {6, "gradient_suite", gradient_suite},
        {7, "metrics_oracle", metrics_oracle},
        {8, "eac_contract", eac_contract},
        {9, "directional_fusion", [progress] { return directional_fusion(progress); }},
        {10, "determinism", [opt] { return cli_determinism(opt); }},
        {11, "persistence", [opt] { return persistence(opt); }},
        {12, "statistics", statistics},
    };
}

// Runs the selected checks (all when `only` is empty), printing one line per
// check. Returns true when every selected check passed.
inline bool run_checks(const std::vector<Check>& checks, const std::set<std::string>& only, std::ostream& os)
{
    for (const auto& name : only) {
        const bool known = std::any_of(checks.begin(), checks.end(), [&](const Check& c) { return c.name == name; });
        if (!known) throw std::invalid_argument("unknown check '" + name + "'");
    }
    bool all = true;
    for (const auto& c : checks) {
        if (!only.empty() && !only.count(c.name)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double ms = detail::seconds_since(t0) * 1000.0;
        os << (o.pass ? "PASS" : "FAIL") << ' ' << std::setw(2) << c.id << ' ' << c.name << " [" << detail::fmt(ms, 4)
           << " ms]: " << o.detail << std::endl;
        all = all && o.pass;
    }
    return all;
}

}  // namespace eafnet::acceptance
