#pragma once

// Experiment presets, the training loop and evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "eafnet/checkpoint.hpp"
#include "eafnet/dataset.hpp"
#include "eafnet/metrics.hpp"
#include "eafnet/model.hpp"
#include "eafnet/optim.hpp"

namespace eafnet::train {

using data::Sample;
using nn::Eafnet;
using nn::InputKind;

// ---------------------------------------------------------------- presets

enum class Preset { baseline, aolp_ex, dolp_ex, ad_ex, three_path_ex, rgbd };

inline const std::vector<Preset>& all_presets()
{
    static const std::vector<Preset> v{Preset::baseline,     Preset::aolp_ex,       Preset::dolp_ex,
                                       Preset::ad_ex,        Preset::three_path_ex, Preset::rgbd};
    return v;
}

inline std::string to_string(Preset p)
{
    switch (p) {
        case Preset::baseline: return "Baseline";
        case Preset::aolp_ex: return "AoLP-EX";
        case Preset::dolp_ex: return "DoLP-EX";
        case Preset::ad_ex: return "A/D-EX";
        case Preset::three_path_ex: return "3-Path-EX";
        case Preset::rgbd: return "RGBD";
    }
    return "?";
}

inline Preset preset_from_string(const std::string& s)
{
    for (Preset p : all_presets()) {
        if (to_string(p) == s) return p;
    }
    throw std::invalid_argument("unknown preset '" + s +
                                "' (expected Baseline, AoLP-EX, DoLP-EX, A/D-EX, 3-Path-EX or RGBD)");
}

inline std::vector<nn::BranchSpec> preset_branches(Preset p)
{
    const nn::BranchSpec rgb{InputKind::rgb, 3};
    switch (p) {
        case Preset::baseline: return {rgb};
        case Preset::aolp_ex: return {rgb, {InputKind::aolp, 1}};
        case Preset::dolp_ex: return {rgb, {InputKind::dolp, 1}};
        case Preset::ad_ex: return {rgb, {InputKind::aolp_dolp, 2}};
        case Preset::three_path_ex: return {rgb, {InputKind::aolp, 1}, {InputKind::dolp, 1}};
        case Preset::rgbd: return {rgb, {InputKind::disparity, 1}};
    }
    return {rgb};
}

// Planes a sample must carry for the preset's branches.
inline data::ModalityMode preset_modality(Preset p)
{
    switch (p) {
        case Preset::baseline: return data::ModalityMode::none;
        case Preset::aolp_ex: return data::ModalityMode::aolp;
        case Preset::dolp_ex: return data::ModalityMode::dolp;
        case Preset::ad_ex:
        case Preset::three_path_ex: return data::ModalityMode::aolp_dolp;
        case Preset::rgbd: return data::ModalityMode::disparity;
    }
    return data::ModalityMode::none;
}

// Derived planes a model with these branches consumes.
inline data::ModalityMode modality_for_branches(const std::vector<nn::BranchSpec>& branches)
{
    bool aolp = false, dolp = false, disparity = false;
    for (const auto& b : branches) {
        aolp = aolp || b.kind == InputKind::aolp || b.kind == InputKind::aolp_dolp;
        dolp = dolp || b.kind == InputKind::dolp || b.kind == InputKind::aolp_dolp;
        disparity = disparity || b.kind == InputKind::disparity;
    }
    if (disparity) {
        if (aolp || dolp) throw std::invalid_argument("model mixes disparity with polarization inputs");
        return data::ModalityMode::disparity;
    }
    if (aolp && dolp) return data::ModalityMode::aolp_dolp;
    if (aolp) return data::ModalityMode::aolp;
    if (dolp) return data::ModalityMode::dolp;
    return data::ModalityMode::none;
}

// ---------------------------------------------------------------- batches

inline ImageD branch_image(const Sample& s, InputKind k)
{
    switch (k) {
        case InputKind::rgb: return s.rgb;
        case InputKind::aolp: return s.plane(data::PlaneKind::aolp);
        case InputKind::dolp: return s.plane(data::PlaneKind::dolp);
        case InputKind::disparity: return s.plane(data::PlaneKind::disparity);
        case InputKind::aolp_dolp: {
            const ImageD a = s.plane(data::PlaneKind::aolp), d = s.plane(data::PlaneKind::dolp);
            return stack_channels<double>({&a, &d});
        }
    }
    throw std::invalid_argument("unknown input kind");
}

template <class T>
struct Batch {
    std::vector<autograd::Var<T>> inputs;  // one N x C x H x W tensor per branch
    std::vector<int> labels;               // N x H x W
};

template <class T>
Batch<T> make_batch(const std::vector<const Sample*>& samples, const nn::EafnetConfig& cfg)
{
    if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
    const int n = static_cast<int>(samples.size());
    const int h = samples[0]->height(), w = samples[0]->width();
    Batch<T> b;
    for (const auto& spec : cfg.branches) {
        Tensor<T> t({n, spec.channels, h, w});
        for (int i = 0; i < n; ++i) {
            const Sample& s = *samples[static_cast<std::size_t>(i)];
            if (s.height() != h || s.width() != w) {
                throw std::invalid_argument("make_batch: sample " + s.id + " extent differs from " + samples[0]->id);
            }
            const ImageD img = branch_image(s, spec.kind);
            if (img.channels != spec.channels) {
                throw std::invalid_argument("make_batch: sample " + s.id + " gives " + std::to_string(img.channels) +
                                            " planes for a " + std::to_string(spec.channels) + "-channel branch");
            }
            std::copy(img.data.begin(), img.data.end(), t.data() + static_cast<std::size_t>(i) * img.data.size());
        }
        b.inputs.emplace_back(std::move(t));
    }
    for (const Sample* s : samples) b.labels.insert(b.labels.end(), s->label.data.begin(), s->label.data.end());
    return b;
}

// ---------------------------------------------------------------- config

struct TrainConfig {
    double lr = 4e-4;
    double weight_decay = 1e-4;
    double lr_floor_fraction = 2.5e-3;  // final lr = lr * lr_floor_fraction
    int batch = 4;
    int epochs = 60;
    std::uint64_t seed = 0;
    int crop = 64;
    double scale_min = 0.75;
    double scale_max = 1.25;
    double hflip_prob = 0.5;
    bool ignore_background_in_miou = true;
    int eval_shards = 1;

    void validate() const
    {
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: lr must be >= 0");
        if (!(weight_decay >= 0.0)) throw std::invalid_argument("train config: weight_decay must be >= 0");
        if (!(lr_floor_fraction > 0.0 && lr_floor_fraction <= 1.0)) {
            throw std::invalid_argument("train config: lr_floor_fraction must be in (0, 1]");
        }
        if (batch < 2) throw std::invalid_argument("train config: batch must be >= 2 for batch statistics");
        if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
        if (crop < 32 || crop % nn::EafnetConfig::kDownsample) {
            throw std::invalid_argument("train config: crop must be a positive multiple of 32, got " +
                                        std::to_string(crop));
        }
        augmentation().validate();
        if (eval_shards < 1) throw std::invalid_argument("train config: eval_shards must be >= 1");
    }

    data::AugmentationConfig augmentation() const { return {scale_min, scale_max, crop, hflip_prob, seed}; }

    bool operator==(const TrainConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = nlohmann::json{{"lr", c.lr},
                       {"weight_decay", c.weight_decay},
                       {"lr_floor_fraction", c.lr_floor_fraction},
                       {"batch", c.batch},
                       {"epochs", c.epochs},
                       {"seed", c.seed},
                       {"crop", c.crop},
                       {"scale_min", c.scale_min},
                       {"scale_max", c.scale_max},
                       {"hflip_prob", c.hflip_prob},
                       {"ignore_background_in_miou", c.ignore_background_in_miou},
                       {"eval_shards", c.eval_shards}};
}

inline void update_from_json(TrainConfig& c, const nlohmann::json& j)
{
    nn::reject_unknown_keys(j,
                            {"lr", "weight_decay", "lr_floor_fraction", "batch", "epochs", "seed", "crop", "scale_min",
                             "scale_max", "hflip_prob", "ignore_background_in_miou", "eval_shards"},
                            "train config");
    const auto take = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("lr", c.lr);
    take("weight_decay", c.weight_decay);
    take("lr_floor_fraction", c.lr_floor_fraction);
    take("batch", c.batch);
    take("epochs", c.epochs);
    take("seed", c.seed);
    take("crop", c.crop);
    take("scale_min", c.scale_min);
    take("scale_max", c.scale_max);
    take("hflip_prob", c.hflip_prob);
    take("ignore_background_in_miou", c.ignore_background_in_miou);
    take("eval_shards", c.eval_shards);
}

inline void from_json(const nlohmann::json& j, TrainConfig& c)
{
    c = TrainConfig{};
    update_from_json(c, j);
    c.validate();
}

// ---------------------------------------------------------------- evaluation

struct EvalOptions {
    bool ignore_background_in_miou = true;
    int shards = 1;
    std::set<int> ignore_ids;  // label ids left out of the confusion matrix
};

inline std::vector<int> evaluated_classes(int num_classes, bool ignore_background)
{
    std::vector<int> v;
    for (int c = ignore_background ? 1 : 0; c < num_classes; ++c) v.push_back(c);
    return v;
}

// Per-pixel class ids for one sample (center-cropped to a multiple of 32).
template <class T>
LabelMap predict(Eafnet<T>& model, const Sample& in)
{
    const Sample s = data::center_crop_multiple(in, nn::EafnetConfig::kDownsample);
    autograd::Graph<T> g(false);
    const auto batch = make_batch<T>({&s}, model.config());
    const auto out = model.forward(g, batch.inputs, autograd::NormMode::eval);
    const auto ids = metrics::argmax_channels(out.logits.value().values(), 1, model.config().num_classes,
                                              s.height(), s.width());
    LabelMap lm(1, s.height(), s.width());
    for (std::size_t i = 0; i < ids.size(); ++i) lm.data[i] = static_cast<unsigned char>(ids[i]);
    return lm;
}

template <class T>
metrics::ConfusionMatrix confusion_over(Eafnet<T>& model, const std::vector<Sample>& samples, std::size_t begin,
                                        std::size_t end, const std::set<int>& ignore_ids)
{
    metrics::ConfusionMatrix cm(model.config().num_classes);
    for (std::size_t i = begin; i < end; ++i) {
        const Sample s = data::center_crop_multiple(samples[i], nn::EafnetConfig::kDownsample);
        const LabelMap pred = predict(model, s);
        const std::vector<int> truth(s.label.data.begin(), s.label.data.end());
        const std::vector<int> ids(pred.data.begin(), pred.data.end());
        metrics::update_confusion(cm, truth, ids, ignore_ids);
    }
    return cm;
}

// Contiguous shards run concurrently; their matrices are summed.
template <class T>
metrics::ConfusionMatrix evaluate_confusion(Eafnet<T>& model, const std::vector<Sample>& samples,
                                            const EvalOptions& opt = {})
{
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    if (opt.shards < 1) throw std::invalid_argument("evaluate: shards must be >= 1");
    const std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(opt.shards), samples.size());
    if (shards == 1) return confusion_over(model, samples, 0, samples.size(), opt.ignore_ids);
    std::vector<std::future<metrics::ConfusionMatrix>> parts;
    for (std::size_t k = 0; k < shards; ++k) {
        const std::size_t b = samples.size() * k / shards, e = samples.size() * (k + 1) / shards;
        parts.push_back(std::async(std::launch::async,
                                   [&, b, e] { return confusion_over(model, samples, b, e, opt.ignore_ids); }));
    }
    metrics::ConfusionMatrix cm(model.config().num_classes);
    for (auto& p : parts) cm.merge(p.get());
    return cm;
}

template <class T>
metrics::MetricsReport evaluate(Eafnet<T>& model, const std::vector<Sample>& samples, const EvalOptions& opt = {})
{
    return metrics::compute_metrics(evaluate_confusion(model, samples, opt),
                                    evaluated_classes(model.config().num_classes, opt.ignore_background_in_miou));
}

// ---------------------------------------------------------------- training

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LogRow {
    int epoch = 0;
    long step = 0;  // 1-based global optimizer step
    double lr = 0;
    double loss = 0;
    bool epoch_end = false;
    std::optional<double> val_miou;  // set on the last row of each epoch
};

inline std::string format_number(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

inline void write_log_csv(std::ostream& os, const std::vector<LogRow>& rows)
{
    os << "epoch,step,lr,loss,val_miou\n";
    for (const auto& r : rows) {
        os << r.epoch << ',' << r.step << ',' << format_number(r.lr) << ',' << format_number(r.loss) << ',';
        if (r.epoch_end) os << (r.val_miou ? format_number(*r.val_miou) : "nan");
        os << '\n';
    }
}

struct TrainResult {
    std::vector<LogRow> log;
    std::vector<std::optional<double>> epoch_miou;
    int best_epoch = 0;
    std::optional<double> best_miou;
    std::vector<std::uint8_t> best_checkpoint;  // EAFC bytes of the best-validation epoch
    metrics::MetricsReport final_report;        // last epoch's validation report
};

struct TrainHooks {
    std::function<void(const LogRow&)> on_step;
    std::function<void(int epoch, const std::optional<double>& miou)> on_epoch;
};

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(data::splitmix64(seed ^ data::splitmix64(0x5eedULL + static_cast<std::uint64_t>(epoch))));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

// Adam with cosine annealing on softmax cross entropy. Every epoch visits
// floor(|train| / batch) batches of a seeded permutation; each sample is
// augmented from its own (seed, id, epoch) stream. Validation runs after
// every epoch; the best epoch's weights are kept as checkpoint bytes.
template <class T>
TrainResult train(Eafnet<T>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const nlohmann::json& checkpoint_meta = nlohmann::json::object(),
                  const TrainHooks& hooks = {})
{
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    const std::size_t steps_per_epoch = train_set.size() / static_cast<std::size_t>(cfg.batch);
    if (steps_per_epoch == 0) {
        throw std::invalid_argument("train: " + std::to_string(train_set.size()) + " samples cannot fill a batch of " +
                                    std::to_string(cfg.batch));
    }
    const auto aug = cfg.augmentation();
    auto params = model.parameters();
    optim::AdamState<T> adam;
    const optim::CosineSchedule sched{cfg.lr, cfg.lr_floor_fraction,
                                      static_cast<long>(steps_per_epoch) * cfg.epochs};
    const EvalOptions eval_opt{cfg.ignore_background_in_miou, cfg.eval_shards, {}};

    TrainResult res;
    std::vector<double> history;
    long step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = epoch_order(train_set.size(), cfg.seed, epoch);
        for (std::size_t b = 0; b < steps_per_epoch; ++b) {
            std::vector<Sample> augmented;
            augmented.reserve(static_cast<std::size_t>(cfg.batch));
            for (int i = 0; i < cfg.batch; ++i) {
                const Sample& s = train_set[order[b * static_cast<std::size_t>(cfg.batch) + static_cast<std::size_t>(i)]];
                std::mt19937_64 rng(data::sample_seed(cfg.seed, s.id, static_cast<std::uint64_t>(epoch)));
                augmented.push_back(data::augment(s, aug, rng));
            }
            std::vector<const Sample*> ptrs;
            for (const auto& s : augmented) ptrs.push_back(&s);
            const Batch<T> batch = make_batch<T>(ptrs, model.config());

            const double lr = optim::cosine_lr(step, sched);
            autograd::Graph<T> g;
            auto out = model.forward(g, batch.inputs, autograd::NormMode::train);
            auto loss = autograd::softmax_cross_entropy(g, out.logits, batch.labels);
            const double lv = static_cast<double>(loss.value()[0]);
            ++step;
            history.push_back(lv);
            const auto diverged = [&](const std::string& what) {
                std::ostringstream msg;
                msg << "training diverged: " << what << " at step " << step << " (epoch " << epoch << ", lr " << lr
                    << "); last losses:";
                const std::size_t from = history.size() > 8 ? history.size() - 8 : 0;
                for (std::size_t i = from; i < history.size(); ++i) msg << ' ' << history[i];
                return TrainingDiverged(msg.str());
            };
            if (!std::isfinite(lv)) throw diverged("non-finite loss");
            optim::zero_grads(params);
            g.backward(loss);
            optim::adam_step(params, adam, lr, cfg.weight_decay);
            for (const auto& p : params) {
                if (!p.var.value().all_finite()) throw diverged("non-finite parameter " + p.name);
            }

            LogRow row{epoch, step, lr, lv, false, std::nullopt};
            const bool last = b + 1 == steps_per_epoch;
            if (last) {
                row.epoch_end = true;
                if (!val_set.empty()) {
                    res.final_report = evaluate(model, val_set, eval_opt);
                    row.val_miou = res.final_report.miou;
                }
            }
            res.log.push_back(row);
            if (hooks.on_step) hooks.on_step(row);
            if (last) {
                res.epoch_miou.push_back(row.val_miou);
                const double score = row.val_miou.value_or(-std::numeric_limits<double>::infinity());
                const double best = res.best_miou.value_or(-std::numeric_limits<double>::infinity());
                if (res.best_checkpoint.empty() || score > best) {
                    res.best_epoch = epoch;
                    res.best_miou = row.val_miou;
                    res.best_checkpoint = checkpoint::encode(model, checkpoint_meta);
                }
                if (hooks.on_epoch) hooks.on_epoch(epoch, row.val_miou);
            }
        }
    }
    return res;
}

}  // namespace eafnet::train
