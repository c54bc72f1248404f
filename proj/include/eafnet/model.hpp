#pragma once

// Multi-branch attention-bridged fusion network.
//
// Each input branch runs a ResNet-18-shaped encoder (7x7 stride-2 stem plus
// four stride-2 residual stages). With two or more branches, an implicit
// fusion branch starts from the EAC-weighted sum of the stem features and,
// at every later stage, runs its own residual stage and adds the EAC-weighted
// branch features of that stage. Spatial pyramid pooling sits on the deepest
// fusion feature, and a ladder decoder climbs back to 1/4 resolution using
// 1x1 laterals on the fusion features before a final bilinear upsample.
// A single-branch config has no EAC and no fusion branch.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eafnet/eac.hpp"
#include "eafnet/optim.hpp"

namespace eafnet::nn {

using autograd::NormMode;

// What a branch consumes. aolp_dolp is a two-plane stack (AoLP, DoLP).
enum class InputKind { rgb, aolp, dolp, aolp_dolp, disparity };

inline std::string to_string(InputKind k)
{
    switch (k) {
        case InputKind::rgb: return "rgb";
        case InputKind::aolp: return "aolp";
        case InputKind::dolp: return "dolp";
        case InputKind::aolp_dolp: return "aolp_dolp";
        case InputKind::disparity: return "disparity";
    }
    return "?";
}

inline InputKind input_kind_from_string(const std::string& s)
{
    for (auto k : {InputKind::rgb, InputKind::aolp, InputKind::dolp, InputKind::aolp_dolp, InputKind::disparity}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown input kind '" + s + "'");
}

inline int input_channels(InputKind k)
{
    switch (k) {
        case InputKind::rgb: return 3;
        case InputKind::aolp_dolp: return 2;
        default: return 1;
    }
}

struct BranchSpec {
    InputKind kind = InputKind::rgb;
    int channels = 3;

    bool operator==(const BranchSpec&) const = default;
};

struct EafnetConfig {
    std::vector<BranchSpec> branches{{InputKind::rgb, 3}, {InputKind::aolp, 1}};
    std::vector<int> widths{16, 24, 32, 48, 64};  // stem, stage1..stage4
    int blocks_per_stage = 2;
    int num_classes = 9;
    std::vector<int> spp_levels{1, 2, 4, 8};
    int decoder_width = 32;
    KernelParity kernel_parity = KernelParity::even;
    double eac_b = 1.0;
    double eac_gamma = 2.0;
    bool zero_eac_init = false;
    std::uint64_t init_seed = 0;

    static constexpr int kStages = 5;  // stem + four residual stages
    static constexpr int kDownsample = 32;

    void validate() const
    {
        if (branches.empty() || branches.size() > 3) {
            throw std::invalid_argument("model config: 1 to 3 input branches required, got " +
                                        std::to_string(branches.size()));
        }
        for (const auto& b : branches) {
            if (b.channels < 1) throw std::invalid_argument("model config: branch channels must be positive");
        }
        if (widths.size() != kStages) throw std::invalid_argument("model config: widths must list 5 stage widths");
        for (int w : widths) {
            if (w < 1) throw std::invalid_argument("model config: widths must be positive");
        }
        if (blocks_per_stage < 1) throw std::invalid_argument("model config: blocks_per_stage must be >= 1");
        if (num_classes < 2) throw std::invalid_argument("model config: class count must be >= 2");
        if (spp_levels.empty()) throw std::invalid_argument("model config: spp_levels must not be empty");
        for (int l : spp_levels) {
            if (l < 1) throw std::invalid_argument("model config: spp levels must be >= 1");
        }
        if (decoder_width < 1) throw std::invalid_argument("model config: decoder_width must be positive");
        if (!(eac_gamma > 0)) throw std::invalid_argument("model config: eac_gamma must be positive");
    }

    bool operator==(const EafnetConfig&) const = default;
};

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
    }
}

inline void to_json(nlohmann::json& j, const EafnetConfig& c)
{
    nlohmann::json br = nlohmann::json::array();
    for (const auto& b : c.branches) br.push_back({{"kind", to_string(b.kind)}, {"channels", b.channels}});
    j = {{"branches", br},
         {"widths", c.widths},
         {"blocks_per_stage", c.blocks_per_stage},
         {"num_classes", c.num_classes},
         {"spp_levels", c.spp_levels},
         {"decoder_width", c.decoder_width},
         {"kernel_parity", c.kernel_parity == KernelParity::even ? "even" : "odd"},
         {"eac_b", c.eac_b},
         {"eac_gamma", c.eac_gamma},
         {"zero_eac_init", c.zero_eac_init},
         {"init_seed", c.init_seed}};
}

// Partial update: keys absent from `j` keep their current value.
inline void update_from_json(EafnetConfig& c, const nlohmann::json& j)
{
    reject_unknown_keys(j,
                        {"branches", "widths", "blocks_per_stage", "num_classes", "spp_levels", "decoder_width",
                         "kernel_parity", "eac_b", "eac_gamma", "zero_eac_init", "init_seed"},
                        "model config");
    if (j.contains("branches")) {
        c.branches.clear();
        for (const auto& b : j.at("branches")) {
            reject_unknown_keys(b, {"kind", "channels"}, "model branch");
            BranchSpec s;
            s.kind = input_kind_from_string(b.at("kind").get<std::string>());
            s.channels = b.contains("channels") ? b.at("channels").get<int>() : input_channels(s.kind);
            c.branches.push_back(s);
        }
    }
    if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<int>>();
    if (j.contains("blocks_per_stage")) c.blocks_per_stage = j.at("blocks_per_stage").get<int>();
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<int>();
    if (j.contains("spp_levels")) c.spp_levels = j.at("spp_levels").get<std::vector<int>>();
    if (j.contains("decoder_width")) c.decoder_width = j.at("decoder_width").get<int>();
    if (j.contains("kernel_parity")) {
        const auto p = j.at("kernel_parity").get<std::string>();
        if (p == "even") {
            c.kernel_parity = KernelParity::even;
        } else if (p == "odd") {
            c.kernel_parity = KernelParity::odd;
        } else {
            throw std::invalid_argument("model config: kernel_parity must be 'even' or 'odd'");
        }
    }
    if (j.contains("eac_b")) c.eac_b = j.at("eac_b").get<double>();
    if (j.contains("eac_gamma")) c.eac_gamma = j.at("eac_gamma").get<double>();
    if (j.contains("zero_eac_init")) c.zero_eac_init = j.at("zero_eac_init").get<bool>();
    if (j.contains("init_seed")) c.init_seed = j.at("init_seed").get<std::uint64_t>();
}

inline void from_json(const nlohmann::json& j, EafnetConfig& c)
{
    c = EafnetConfig{};
    update_from_json(c, j);
    c.validate();
}

template <class T>
struct Registry {
    optim::ParamList<T> params;
    std::vector<std::pair<std::string, Tensor<T>*>> buffers;
};

template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in, int out, int k, int stride, int pad, bool with_bias, std::mt19937_64& rng)
        : weight_(Tensor<T>({out, in, k, k}), true), stride_(stride), pad_(pad)
    {
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (static_cast<double>(in) * k * k)));
        for (T& v : weight_.value().storage()) v = static_cast<T>(nd(rng));
        if (with_bias) bias_ = Var<T>(Tensor<T>({out}), true);
    }

    Var<T> operator()(Graph<T>& g, const Var<T>& x) const { return autograd::conv2d(g, x, weight_, bias_, stride_, pad_); }

    void collect(const std::string& prefix, Registry<T>& r)
    {
        r.params.push_back({prefix + ".weight", weight_, true});
        if (bias_.defined()) r.params.push_back({prefix + ".bias", bias_, false});
    }

private:
    Var<T> weight_;
    Var<T> bias_;
    int stride_ = 1;
    int pad_ = 0;
};

template <class T>
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int c) : gamma_(Tensor<T>({c}, T(1)), true), beta_(Tensor<T>({c}), true)
    {
        state_.running_mean = Tensor<T>({c});
        state_.running_var = Tensor<T>({c}, T(1));
    }

    Var<T> operator()(Graph<T>& g, const Var<T>& x, NormMode mode)
    {
        return autograd::batchnorm2d(g, x, gamma_, beta_, state_, mode);
    }

    void collect(const std::string& prefix, Registry<T>& r)
    {
        r.params.push_back({prefix + ".gamma", gamma_, false});
        r.params.push_back({prefix + ".beta", beta_, false});
        r.buffers.emplace_back(prefix + ".running_mean", &state_.running_mean);
        r.buffers.emplace_back(prefix + ".running_var", &state_.running_var);
    }

private:
    Var<T> gamma_;
    Var<T> beta_;
    autograd::BatchNormState<T> state_;
};

template <class T>
class ConvBnRelu {
public:
    ConvBnRelu() = default;
    ConvBnRelu(int in, int out, int k, int stride, std::mt19937_64& rng)
        : conv_(in, out, k, stride, k / 2, false, rng), bn_(out)
    {
    }

    Var<T> operator()(Graph<T>& g, const Var<T>& x, NormMode mode)
    {
        return autograd::relu(g, bn_(g, conv_(g, x), mode));
    }

    void collect(const std::string& prefix, Registry<T>& r)
    {
        conv_.collect(prefix + ".conv", r);
        bn_.collect(prefix + ".bn", r);
    }

private:
    Conv2d<T> conv_;
    BatchNorm<T> bn_;
};

template <class T>
class BasicBlock {
public:
    BasicBlock(int in, int out, int stride, std::mt19937_64& rng)
        : conv1_(in, out, 3, stride, 1, false, rng), bn1_(out), conv2_(out, out, 3, 1, 1, false, rng), bn2_(out)
    {
        if (stride != 1 || in != out) {
            down_conv_ = Conv2d<T>(in, out, 1, stride, 0, false, rng);
            down_bn_ = BatchNorm<T>(out);
            has_down_ = true;
        }
    }

    Var<T> operator()(Graph<T>& g, const Var<T>& x, NormMode mode)
    {
        Var<T> h = autograd::relu(g, bn1_(g, conv1_(g, x), mode));
        h = bn2_(g, conv2_(g, h), mode);
        Var<T> skip = has_down_ ? down_bn_(g, down_conv_(g, x), mode) : x;
        return autograd::relu(g, autograd::add(g, h, skip));
    }

    void collect(const std::string& prefix, Registry<T>& r)
    {
        conv1_.collect(prefix + ".conv1", r);
        bn1_.collect(prefix + ".bn1", r);
        conv2_.collect(prefix + ".conv2", r);
        bn2_.collect(prefix + ".bn2", r);
        if (has_down_) {
            down_conv_.collect(prefix + ".down.conv", r);
            down_bn_.collect(prefix + ".down.bn", r);
        }
    }

private:
    Conv2d<T> conv1_;
    BatchNorm<T> bn1_;
    Conv2d<T> conv2_;
    BatchNorm<T> bn2_;
    Conv2d<T> down_conv_;
    BatchNorm<T> down_bn_;
    bool has_down_ = false;
};

template <class T>
class ResidualStage {
public:
    ResidualStage(int in, int out, int blocks, std::mt19937_64& rng)
    {
        for (int b = 0; b < blocks; ++b) blocks_.emplace_back(b == 0 ? in : out, out, b == 0 ? 2 : 1, rng);
    }

    Var<T> operator()(Graph<T>& g, Var<T> x, NormMode mode)
    {
        for (auto& b : blocks_) x = b(g, x, mode);
        return x;
    }

    void collect(const std::string& prefix, Registry<T>& r)
    {
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), r);
    }

private:
    std::vector<BasicBlock<T>> blocks_;
};

// Grid average pools on the deepest feature, each projected by 1x1 conv,
// upsampled, concatenated with the input and blended by a 1x1 conv. Grid
// levels larger than the feature map are clamped to its size.
template <class T>
class SpatialPyramidPooling {
public:
    SpatialPyramidPooling(int in, int out, std::vector<int> levels, std::mt19937_64& rng) : levels_(std::move(levels))
    {
        const int lw = std::max(1, in / 4);
        for (std::size_t i = 0; i < levels_.size(); ++i) level_convs_.emplace_back(in, lw, 1, 1, rng);
        blend_ = ConvBnRelu<T>(in + lw * static_cast<int>(levels_.size()), out, 1, 1, rng);
    }

    Var<T> operator()(Graph<T>& g, const Var<T>& x, NormMode mode)
    {
        const int h = x.shape()[2], w = x.shape()[3];
        std::vector<Var<T>> parts{x};
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            const int grid = std::min({levels_[i], h, w});
            Var<T> p = autograd::avg_pool_grid(g, x, grid);
            p = level_convs_[i](g, p, mode);
            parts.push_back(autograd::bilinear_resize(g, p, h, w));
        }
        return blend_(g, autograd::concat_channels(g, parts), mode);
    }

    void collect(const std::string& prefix, Registry<T>& r)
    {
        for (std::size_t i = 0; i < level_convs_.size(); ++i) {
            level_convs_[i].collect(prefix + ".level" + std::to_string(i), r);
        }
        blend_.collect(prefix + ".blend", r);
    }

private:
    std::vector<int> levels_;
    std::vector<ConvBnRelu<T>> level_convs_;
    ConvBnRelu<T> blend_;
};

template <class T>
struct BranchEncoder {
    ConvBnRelu<T> stem;
    std::vector<ResidualStage<T>> stages;
};

template <class T>
struct ForwardOutput {
    Var<T> logits;
    // attention[stage][branch]: N x C weights; empty for single-branch models.
    std::vector<std::vector<Var<T>>> attention;
};

template <class T>
class Eafnet {
public:
    explicit Eafnet(EafnetConfig cfg) : cfg_(std::move(cfg))
    {
        cfg_.validate();
        std::mt19937_64 rng(cfg_.init_seed);
        const auto& w = cfg_.widths;
        for (const auto& b : cfg_.branches) {
            BranchEncoder<T> enc;
            enc.stem = ConvBnRelu<T>(b.channels, w[0], 7, 2, rng);
            for (int s = 1; s < EafnetConfig::kStages; ++s) enc.stages.emplace_back(w[s - 1], w[s], cfg_.blocks_per_stage, rng);
            encoders_.push_back(std::move(enc));
        }
        if (fused()) {
            for (int s = 1; s < EafnetConfig::kStages; ++s) {
                fusion_stages_.emplace_back(w[s - 1], w[s], cfg_.blocks_per_stage, rng);
            }
            eac_.resize(EafnetConfig::kStages);
            for (int s = 0; s < EafnetConfig::kStages; ++s) {
                for (std::size_t b = 0; b < cfg_.branches.size(); ++b) {
                    auto m = EacModule<T>::from_channels(w[s], cfg_.eac_b, cfg_.eac_gamma, cfg_.kernel_parity);
                    if (!cfg_.zero_eac_init) m.init_random(rng);
                    eac_[s].push_back(std::move(m));
                }
            }
        }
        spp_ = std::make_unique<SpatialPyramidPooling<T>>(w[4], cfg_.decoder_width, cfg_.spp_levels, rng);
        for (int lvl : kDecoderLevels) {
            laterals_.emplace_back(w[lvl], cfg_.decoder_width, 1, 1, 0, false, rng);
            blends_.emplace_back(cfg_.decoder_width, cfg_.decoder_width, 3, 1, rng);
        }
        head_ = Conv2d<T>(cfg_.decoder_width, cfg_.num_classes, 1, 1, 0, true, rng);
    }

    Eafnet(const Eafnet&) = delete;
    Eafnet& operator=(const Eafnet&) = delete;
    Eafnet(Eafnet&&) noexcept = default;
    Eafnet& operator=(Eafnet&&) noexcept = default;

    const EafnetConfig& config() const { return cfg_; }
    bool fused() const { return cfg_.branches.size() >= 2; }
    std::vector<std::vector<EacModule<T>>>& eac_modules() { return eac_; }

    void validate_inputs(const std::vector<Var<T>>& inputs) const
    {
        if (inputs.size() != cfg_.branches.size()) {
            throw std::invalid_argument("model expects " + std::to_string(cfg_.branches.size()) + " inputs, got " +
                                        std::to_string(inputs.size()));
        }
        const Shape& s0 = inputs[0].shape();
        for (std::size_t b = 0; b < inputs.size(); ++b) {
            const Shape& s = inputs[b].shape();
            if (s.size() != 4 || s[1] != cfg_.branches[b].channels) {
                throw std::invalid_argument("branch " + std::to_string(b) + " expects " +
                                            std::to_string(cfg_.branches[b].channels) + " channels, got " +
                                            shape_str(s));
            }
            if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
                throw std::invalid_argument("branch inputs disagree: " + shape_str(s) + " vs " + shape_str(s0));
            }
        }
        if (s0[2] % EafnetConfig::kDownsample || s0[3] % EafnetConfig::kDownsample) {
            throw std::invalid_argument("input spatial dims must be divisible by 32, got " + shape_str(s0));
        }
    }

    ForwardOutput<T> forward(Graph<T>& g, const std::vector<Var<T>>& inputs, NormMode mode)
    {
        validate_inputs(inputs);
        ForwardOutput<T> out;
        const std::size_t nb = inputs.size();
        std::vector<Var<T>> ys(nb);
        for (std::size_t b = 0; b < nb; ++b) ys[b] = encoders_[b].stem(g, inputs[b], mode);

        std::vector<Var<T>> skips(EafnetConfig::kStages);
        Var<T> m;
        if (fused()) {
            auto f = fuse_stage<T>(g, ys, eac_ptrs(0), std::nullopt);
            m = f.fused;
            out.attention.push_back(std::move(f.weights));
            skips[0] = m;
        } else {
            skips[0] = ys[0];
        }
        for (int s = 1; s < EafnetConfig::kStages; ++s) {
            for (std::size_t b = 0; b < nb; ++b) ys[b] = encoders_[b].stages[static_cast<std::size_t>(s - 1)](g, ys[b], mode);
            if (fused()) {
                Var<T> carried = fusion_stages_[static_cast<std::size_t>(s - 1)](g, m, mode);
                auto f = fuse_stage<T>(g, ys, eac_ptrs(s), std::optional<Var<T>>(carried));
                m = f.fused;
                out.attention.push_back(std::move(f.weights));
                skips[static_cast<std::size_t>(s)] = m;
            } else {
                skips[static_cast<std::size_t>(s)] = ys[0];
            }
        }

        Var<T> x = (*spp_)(g, skips[4], mode);
        for (std::size_t i = 0; i < std::size(kDecoderLevels); ++i) {
            const Var<T>& skip = skips[static_cast<std::size_t>(kDecoderLevels[i])];
            Var<T> up = autograd::bilinear_resize(g, x, skip.shape()[2], skip.shape()[3]);
            x = autograd::add(g, up, laterals_[i](g, skip));
            x = blends_[i](g, x, mode);
        }
        Var<T> logits = head_(g, x);
        out.logits = autograd::bilinear_resize(g, logits, inputs[0].shape()[2], inputs[0].shape()[3]);
        return out;
    }

    Registry<T> registry()
    {
        Registry<T> r;
        for (std::size_t b = 0; b < encoders_.size(); ++b) {
            const std::string p = "branch" + std::to_string(b);
            encoders_[b].stem.collect(p + ".stem", r);
            for (std::size_t s = 0; s < encoders_[b].stages.size(); ++s) {
                encoders_[b].stages[s].collect(p + ".stage" + std::to_string(s + 1), r);
            }
        }
        for (std::size_t s = 0; s < fusion_stages_.size(); ++s) {
            fusion_stages_[s].collect("fusion.stage" + std::to_string(s + 1), r);
        }
        for (std::size_t s = 0; s < eac_.size(); ++s) {
            for (std::size_t b = 0; b < eac_[s].size(); ++b) {
                r.params.push_back({"eac.stage" + std::to_string(s) + ".branch" + std::to_string(b) + ".kernel",
                                    eac_[s][b].kernel(), true});
            }
        }
        spp_->collect("spp", r);
        for (std::size_t i = 0; i < laterals_.size(); ++i) {
            laterals_[i].collect("decoder.lateral" + std::to_string(kDecoderLevels[i]), r);
            blends_[i].collect("decoder.blend" + std::to_string(kDecoderLevels[i]), r);
        }
        head_.collect("head", r);
        return r;
    }

    optim::ParamList<T> parameters() { return registry().params; }

    // Every persistent tensor (parameters then buffers) in a fixed order.
    std::vector<std::pair<std::string, Tensor<T>*>> named_tensors()
    {
        Registry<T> r = registry();
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (auto& p : r.params) out.emplace_back(p.name, &p.var.value());
        for (auto& b : r.buffers) out.push_back(b);
        return out;
    }

    std::size_t parameter_count()
    {
        std::size_t n = 0;
        for (auto& p : parameters()) n += p.var.value().numel();
        return n;
    }

private:
    static constexpr int kDecoderLevels[3] = {3, 2, 1};

    std::vector<const EacModule<T>*> eac_ptrs(int stage) const
    {
        std::vector<const EacModule<T>*> out;
        for (const auto& m : eac_[static_cast<std::size_t>(stage)]) out.push_back(&m);
        return out;
    }

    EafnetConfig cfg_;
    std::vector<BranchEncoder<T>> encoders_;
    std::vector<ResidualStage<T>> fusion_stages_;
    std::vector<std::vector<EacModule<T>>> eac_;
    std::unique_ptr<SpatialPyramidPooling<T>> spp_;
    std::vector<Conv2d<T>> laterals_;
    std::vector<ConvBnRelu<T>> blends_;
    Conv2d<T> head_;
};

struct AttentionEntry {
    int stage = 0;
    int branch = 0;
    double mean_weight = 0;
};

struct AttentionRecord {
    std::vector<AttentionEntry> entries;  // stage-major
    // per_channel[stage][branch][channel]: weight averaged over samples.
    std::vector<std::vector<std::vector<double>>> per_channel;
};

// Runs every batch in eval mode and averages each EAC's weights over
// channels and samples, per (stage, branch).
template <class T>
AttentionRecord collect_attention(Eafnet<T>& model, const std::vector<std::vector<Var<T>>>& batches)
{
    if (!model.fused()) throw std::invalid_argument("single-branch model has no attention");
    if (batches.empty()) throw std::invalid_argument("collect_attention: no samples");
    const auto& cfg = model.config();
    const std::size_t nb = cfg.branches.size();
    AttentionRecord rec;
    rec.per_channel.assign(EafnetConfig::kStages, std::vector<std::vector<double>>(nb));
    for (int s = 0; s < EafnetConfig::kStages; ++s) {
        for (std::size_t b = 0; b < nb; ++b) {
            rec.per_channel[static_cast<std::size_t>(s)][b].assign(static_cast<std::size_t>(cfg.widths[static_cast<std::size_t>(s)]), 0.0);
        }
    }
    std::size_t samples = 0;
    for (const auto& inputs : batches) {
        Graph<T> g(false);
        auto out = model.forward(g, inputs, NormMode::eval);
        const int n = inputs[0].shape()[0];
        samples += static_cast<std::size_t>(n);
        for (int s = 0; s < EafnetConfig::kStages; ++s) {
            for (std::size_t b = 0; b < nb; ++b) {
                const Tensor<T>& d = out.attention[static_cast<std::size_t>(s)][b].value();
                auto& acc = rec.per_channel[static_cast<std::size_t>(s)][b];
                const int c = d.shape()[1];
                for (int i = 0; i < n; ++i) {
                    for (int k = 0; k < c; ++k) acc[static_cast<std::size_t>(k)] += d[static_cast<std::size_t>(i * c + k)];
                }
            }
        }
    }
    for (int s = 0; s < EafnetConfig::kStages; ++s) {
        for (std::size_t b = 0; b < nb; ++b) {
            auto& acc = rec.per_channel[static_cast<std::size_t>(s)][b];
            double total = 0;
            for (double& v : acc) {
                v /= static_cast<double>(samples);
                total += v;
            }
            rec.entries.push_back({s, static_cast<int>(b), total / static_cast<double>(acc.size())});
        }
    }
    return rec;
}

}  // namespace eafnet::nn
