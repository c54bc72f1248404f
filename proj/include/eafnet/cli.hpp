#pragma once

// Command-line frontend. `run_cli` is callable in-process; the eafnet_cli
// tool is a thin wrapper around it.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eafnet/acceptance.hpp"
#include "eafnet/checkpoint.hpp"
#include "eafnet/dataset.hpp"
#include "eafnet/pder.hpp"
#include "eafnet/png_io.hpp"
#include "eafnet/train.hpp"

namespace eafnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One colour per class id, in class order.
inline const std::vector<std::array<unsigned char, 3>>& palette()
{
    static const std::vector<std::array<unsigned char, 3>> p{
        {{0, 0, 0}},       {{140, 80, 60}},  {{0, 180, 255}},  {{220, 20, 60}},  {{128, 64, 128}},
        {{107, 142, 35}},  {{70, 130, 180}}, {{255, 200, 0}},  {{119, 11, 32}},
    };
    return p;
}

// ---------------------------------------------------------------- config

struct SyntheticOptions {
    std::string scene = "two_material";  // or "all_classes"
    int train_count = 64;
    int val_count = 16;
    int height = 64;
    int width = 64;
    bool color_informative = false;
    double noise_sigma = 0.01;
};

struct CliConfig {
    std::uint64_t seed = 0;
    nn::EafnetConfig model;  // branches come from the preset or checkpoint
    train::TrainConfig train;
    SyntheticOptions synthetic;
    polar::AolpConvention aolp_convention = polar::AolpConvention::atan2_s1_s2;

    // The global seed drives initialization, augmentation, shuffling and synthesis.
    void propagate_seed()
    {
        train.seed = seed;
        model.init_seed = seed;
    }

    data::SyntheticSceneConfig scene() const
    {
        data::SyntheticSceneConfig c;
        if (synthetic.scene == "two_material") {
            c = data::SyntheticSceneConfig::two_material();
        } else if (synthetic.scene != "all_classes") {
            throw std::invalid_argument("config: synthetic.scene must be 'two_material' or 'all_classes'");
        }
        c.height = synthetic.height;
        c.width = synthetic.width;
        c.color_informative = synthetic.color_informative;
        c.noise_sigma = synthetic.noise_sigma;
        c.seed = seed;
        c.aolp_convention = aolp_convention;
        return c;
    }

    void validate() const
    {
        train.validate();
        scene().validate();
        if (synthetic.train_count < 0 || synthetic.val_count < 0) {
            throw std::invalid_argument("config: synthetic sample counts must be >= 0");
        }
        nn::EafnetConfig m = model;
        if (m.branches.empty()) m.branches = {{nn::InputKind::rgb, 3}};
        m.validate();
    }
};

inline std::string to_string(polar::AolpConvention c) { return c == polar::AolpConvention::atan2_s1_s2 ? "atan2_s1_s2" : "standard"; }

inline polar::AolpConvention aolp_convention_from_string(const std::string& s)
{
    if (s == "atan2_s1_s2") return polar::AolpConvention::atan2_s1_s2;
    if (s == "standard") return polar::AolpConvention::standard;
    throw std::invalid_argument("config: aolp_convention must be 'atan2_s1_s2' or 'standard', got '" + s + "'");
}

inline json to_json(const CliConfig& c)
{
    json model = c.model;
    model.erase("branches");
    model.erase("init_seed");
    json train = c.train;
    train.erase("seed");
    const auto& s = c.synthetic;
    return json{{"seed", c.seed},
                {"model", model},
                {"train", train},
                {"synthetic",
                 {{"scene", s.scene},
                  {"train_count", s.train_count},
                  {"val_count", s.val_count},
                  {"height", s.height},
                  {"width", s.width},
                  {"color_informative", s.color_informative},
                  {"noise_sigma", s.noise_sigma}}},
                {"aolp_convention", to_string(c.aolp_convention)}};
}

// Partial, strict update: unknown keys are errors, absent keys keep their value.
inline void update_from_json(CliConfig& c, const json& j)
{
    nn::reject_unknown_keys(j, {"seed", "model", "train", "synthetic", "aolp_convention"}, "config");
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("model")) {
            const json& m = j.at("model");
            nn::reject_unknown_keys(m,
                                    {"widths", "blocks_per_stage", "num_classes", "spp_levels", "decoder_width",
                                     "kernel_parity", "eac_b", "eac_gamma", "zero_eac_init"},
                                    "config.model");
            nn::update_from_json(c.model, m);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            if (t.is_object() && t.contains("seed")) {
                throw std::invalid_argument("config.train: unknown key 'seed' (use the top-level seed)");
            }
            train::update_from_json(c.train, t);
        }
        if (j.contains("synthetic")) {
            const json& s = j.at("synthetic");
            nn::reject_unknown_keys(
                s, {"scene", "train_count", "val_count", "height", "width", "color_informative", "noise_sigma"},
                "config.synthetic");
            auto& o = c.synthetic;
            const auto take = [&s](const char* key, auto& field) {
                if (s.contains(key)) field = s.at(key).get<std::decay_t<decltype(field)>>();
            };
            take("scene", o.scene);
            take("train_count", o.train_count);
            take("val_count", o.val_count);
            take("height", o.height);
            take("width", o.width);
            take("color_informative", o.color_informative);
            take("noise_sigma", o.noise_sigma);
        }
        if (j.contains("aolp_convention")) {
            c.aolp_convention = aolp_convention_from_string(j.at("aolp_convention").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

inline json read_json_file(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) throw std::invalid_argument("cannot open config file " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(p.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- helpers

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool quiet = false;
};

struct DataSource {
    std::string root;
    bool synthetic = false;

    void validate() const
    {
        if (root.empty() == !synthetic) throw UsageError("choose exactly one data source: --root DIR or --synthetic");
        if (!root.empty() && !fs::is_directory(root)) throw UsageError("dataset root " + root + " is not a directory");
    }
};

inline void add_source(CLI::App* cmd, DataSource& src)
{
    cmd->add_option("--root", src.root, "Dataset root (SPLIT/ID/{i0,i45,i90,i135,label}.png)");
    cmd->add_flag("--synthetic", src.synthetic, "Use generated scenes instead of a dataset root");
}

inline std::vector<data::Sample> load_samples(const DataSource& src, const CliConfig& cfg, const std::string& split,
                                              data::ModalityMode mode)
{
    if (src.synthetic) {
        const int count = split == "train" ? cfg.synthetic.train_count
                          : split == "val" ? cfg.synthetic.val_count
                                           : throw UsageError("synthetic data has splits 'train' and 'val', not '" +
                                                              split + "'");
        if (count < 1) throw UsageError("config.synthetic." + split + "_count must be >= 1");
        return data::synthesize_split(cfg.scene(), split, count, mode);
    }
    return data::load_split(src.root, split, mode, cfg.model.num_classes, cfg.aolp_convention);
}

inline void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

template <class F>
void write_stream(const fs::path& p, F&& body)
{
    std::ostringstream s;
    body(s);
    write_text(p, s.str());
}

inline std::vector<std::string> class_name_list(int classes)
{
    std::vector<std::string> names;
    for (int c = 0; c < classes; ++c) {
        names.push_back(c < data::kNumClasses ? data::class_names()[static_cast<std::size_t>(c)] : std::to_string(c));
    }
    return names;
}

inline std::array<unsigned char, 3> hue_to_rgb(double hue_deg)
{
    const double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
    const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = 1, g = x; break;
        case 1: r = x, g = 1; break;
        case 2: g = 1, b = x; break;
        case 3: g = x, b = 1; break;
        case 4: r = x, b = 1; break;
        default: r = 1, b = x; break;
    }
    const auto q = [](double v) { return static_cast<unsigned char>(std::lround(v * 255.0)); };
    return {q(r), q(g), q(b)};
}

// AoLP plane in [0, 1) as hue = 2 * AoLP, so 0 and 180 degrees share a colour.
inline png::RawImage aolp_preview(const ImageD& aolp_unit)
{
    png::RawImage img;
    img.width = aolp_unit.width;
    img.height = aolp_unit.height;
    img.channels = 3;
    img.bit_depth = 8;
    const std::size_t n = aolp_unit.plane_size();
    img.samples.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto rgb = hue_to_rgb(2.0 * 180.0 * aolp_unit.data[i]);
        for (std::size_t k = 0; k < 3; ++k) img.samples[k * n + i] = rgb[k];
    }
    return img;
}

struct Context {
    Globals g;
    CliConfig cfg;
    std::ostream& out;

    std::ostream discard{nullptr};

    std::ostream& log() { return g.quiet ? discard : out; }

    void echo_config() { log() << "effective config: " << to_json(cfg).dump() << '\n'; }
};

inline CliConfig base_config(const Globals& g, const std::optional<json>& stored = std::nullopt)
{
    CliConfig c;
    if (stored) update_from_json(c, *stored);
    if (!g.config_path.empty()) update_from_json(c, read_json_file(g.config_path));
    if (g.seed) c.seed = *g.seed;
    c.propagate_seed();
    c.validate();
    return c;
}

// ---------------------------------------------------------------- commands

inline int cmd_derive(Context& ctx, const DataSource& src, const std::string& split, const std::string& mode_name)
{
    src.validate();
    const auto mode = data::modality_mode_from_string(mode_name);
    if (mode == data::ModalityMode::none || mode == data::ModalityMode::disparity) {
        throw UsageError("derive: --mode must be aolp, dolp or aolp_dolp");
    }
    ctx.echo_config();
    const auto samples = load_samples(src, ctx.cfg, split, mode);
    const fs::path base = fs::path(ctx.g.out) / "derived" / split;
    for (const auto& s : samples) {
        const fs::path dir = base / s.id;
        fs::create_directories(dir);
        for (auto k : s.kinds) {
            const ImageD plane = s.plane(k);
            pder::save_derived(plane, (dir / (data::to_string(k) + ".pder")).string());
            if (k == data::PlaneKind::dolp) {
                png::write_png((dir / "dolp.png").string(), png::from_unit_image(plane, 8));
            } else if (k == data::PlaneKind::aolp) {
                png::write_png((dir / "aolp.png").string(), aolp_preview(plane));
            }
        }
    }
    ctx.log() << "derived " << samples.size() << " samples into " << base.string() << '\n';
    return 0;
}

inline int cmd_stats(Context& ctx, const DataSource& src, const std::string& split, const std::string& kind_name,
                     int bins)
{
    src.validate();
    const auto kind = data::plane_kind_from_string(kind_name);
    if (bins < 2) throw UsageError("stats: --bins must be >= 2");
    const auto mode = kind == data::PlaneKind::aolp   ? data::ModalityMode::aolp
                      : kind == data::PlaneKind::dolp ? data::ModalityMode::dolp
                                                      : data::ModalityMode::disparity;
    ctx.echo_config();
    const auto samples = load_samples(src, ctx.cfg, split, mode);
    const auto st = data::histogram(samples, kind, bins);
    fs::create_directories(ctx.g.out);
    const fs::path p = fs::path(ctx.g.out) / ("stats_" + split + "_" + kind_name + ".csv");
    write_stream(p, [&](std::ostream& os) { st.write_csv(os); });
    ctx.log() << kind_name << " histogram over " << st.total << " pixels of " << samples.size()
              << " samples; mass in [0, 0.4]: " << st.mass_below(0.4) << "; written to " << p.string() << '\n';
    return 0;
}

inline int cmd_synth(Context& ctx, const std::string& which)
{
    if (which != "all" && which != "train" && which != "val") throw UsageError("synth: --split must be all, train or val");
    ctx.echo_config();
    const auto scene = ctx.cfg.scene();
    std::size_t written = 0;
    for (const std::string split : {"train", "val"}) {
        if (which != "all" && which != split) continue;
        const int count = split == "train" ? ctx.cfg.synthetic.train_count : ctx.cfg.synthetic.val_count;
        for (int i = 0; i < count; ++i) {
            const auto cap = data::synthetic_capture_at(scene, split, i);
            data::write_capture(ctx.g.out, split, data::synthetic_id(i), cap.quad, cap.label, &cap.disparity);
            ++written;
        }
    }
    ctx.log() << "wrote " << written << " synthetic captures under " << ctx.g.out << '\n';
    return 0;
}

inline int cmd_run(Context& ctx, const DataSource& src, const std::string& preset_name)
{
    src.validate();
    const auto preset = train::preset_from_string(preset_name);
    ctx.cfg.model.branches = train::preset_branches(preset);
    ctx.cfg.model.validate();
    const auto mode = train::preset_modality(preset);
    ctx.echo_config();
    const auto train_set = load_samples(src, ctx.cfg, "train", mode);
    const auto val_set = load_samples(src, ctx.cfg, "val", mode);
    if (train_set.size() < static_cast<std::size_t>(ctx.cfg.train.batch)) {
        throw UsageError("run: " + std::to_string(train_set.size()) + " training samples cannot fill a batch of " +
                         std::to_string(ctx.cfg.train.batch));
    }

    const fs::path out = ctx.g.out;
    fs::create_directories(out);
    const json cfg_json = to_json(ctx.cfg);
    write_text(out / "config.json", cfg_json.dump(2) + "\n");
    const json meta{{"preset", train::to_string(preset)}, {"config", cfg_json}};

    nn::Eafnet<float> model(ctx.cfg.model);
    train::TrainHooks hooks;
    std::ostream& log = ctx.log();
    double last_loss = 0;
    hooks.on_step = [&](const train::LogRow& r) { last_loss = r.loss; };
    hooks.on_epoch = [&](int epoch, const std::optional<double>& miou) {
        log << "epoch " << epoch << '/' << ctx.cfg.train.epochs << " loss " << last_loss << " val mIoU "
            << (miou ? std::to_string(*miou) : std::string("nan")) << '\n';
    };
    const auto res = train::train(model, train_set, val_set, ctx.cfg.train, meta, hooks);

    write_stream(out / "log.csv", [&](std::ostream& os) { train::write_log_csv(os, res.log); });
    write_stream(out / "metrics.csv", [&](std::ostream& os) {
        res.final_report.write_csv(os, class_name_list(ctx.cfg.model.num_classes));
    });
    checkpoint::save(model, out / "last.eafc", meta);
    io::write_file((out / "best.eafc").string(), res.best_checkpoint);
    log << train::to_string(preset) << ": final val mIoU "
        << (res.final_report.miou ? train::format_number(*res.final_report.miou) : std::string("nan")) << ", best epoch "
        << res.best_epoch << "; outputs in " << out.string() << '\n';
    return 0;
}

struct Loaded {
    nn::Eafnet<float> model;
    json meta;
};

// Config stored with the checkpoint, then --config, then --seed.
inline Loaded load_checkpoint(Context& ctx, const std::string& path)
{
    if (path.empty()) throw UsageError("--checkpoint is required");
    auto ck = checkpoint::load<float>(path);
    const std::optional<json> stored =
        ck.meta.is_object() && ck.meta.contains("config") ? std::optional<json>(ck.meta.at("config")) : std::nullopt;
    ctx.cfg = base_config(ctx.g, stored);
    ctx.cfg.model = ck.model.config();
    return {std::move(ck.model), std::move(ck.meta)};
}

inline int cmd_eval(Context& ctx, const DataSource& src, const std::string& ckpt, const std::string& split)
{
    src.validate();
    auto ck = load_checkpoint(ctx, ckpt);
    ctx.echo_config();
    const auto samples = load_samples(src, ctx.cfg, split, train::modality_for_branches(ck.model.config().branches));
    const train::EvalOptions opt{ctx.cfg.train.ignore_background_in_miou, ctx.cfg.train.eval_shards, {}};
    const auto report = train::evaluate(ck.model, samples, opt);
    fs::create_directories(ctx.g.out);
    const fs::path p = fs::path(ctx.g.out) / ("eval_" + split + ".csv");
    write_stream(p, [&](std::ostream& os) { report.write_csv(os, class_name_list(ck.model.config().num_classes)); });
    ctx.out << "mIoU " << (report.miou ? train::format_number(*report.miou) : std::string("nan")) << '\n';
    ctx.log() << "per-class metrics written to " << p.string() << '\n';
    return 0;
}

inline int cmd_infer(Context& ctx, const DataSource& src, const std::string& ckpt, const std::string& split)
{
    src.validate();
    auto ck = load_checkpoint(ctx, ckpt);
    if (ck.model.config().num_classes > static_cast<int>(palette().size())) {
        throw UsageError("infer: the palette covers " + std::to_string(palette().size()) + " classes, model has " +
                         std::to_string(ck.model.config().num_classes));
    }
    ctx.echo_config();
    const auto samples = load_samples(src, ctx.cfg, split, train::modality_for_branches(ck.model.config().branches));
    const fs::path dir = fs::path(ctx.g.out) / "pred" / split;
    fs::create_directories(dir);
    for (const auto& s : samples) png::write_png_indexed((dir / (s.id + ".png")).string(), train::predict(ck.model, s), palette());
    ctx.log() << "wrote " << samples.size() << " label maps to " << dir.string() << '\n';
    return 0;
}

inline int cmd_attn(Context& ctx, const DataSource& src, const std::string& ckpt, const std::string& split)
{
    src.validate();
    auto ck = load_checkpoint(ctx, ckpt);
    const auto& mc = ck.model.config();
    if (mc.branches.size() < 2) throw UsageError("attn: single-branch model has no attention");
    ctx.echo_config();
    const auto samples = load_samples(src, ctx.cfg, split, train::modality_for_branches(mc.branches));
    std::ostringstream summary, channels;
    summary << "id,stage,branch,mean_weight\n";
    channels << "id,stage,branch,channel,weight\n";
    for (const auto& raw : samples) {
        const auto s = data::center_crop_multiple(raw, nn::EafnetConfig::kDownsample);
        autograd::Graph<float> g(false);
        const auto batch = train::make_batch<float>({&s}, mc);
        const auto fwd = ck.model.forward(g, batch.inputs, autograd::NormMode::eval);
        for (std::size_t st = 0; st < fwd.attention.size(); ++st) {
            for (std::size_t b = 0; b < fwd.attention[st].size(); ++b) {
                const auto& w = fwd.attention[st][b].value();
                const std::string branch = nn::to_string(mc.branches[b].kind);
                double sum = 0;
                for (std::size_t c = 0; c < w.numel(); ++c) {
                    sum += w[c];
                    channels << s.id << ',' << st << ',' << branch << ',' << c << ','
                             << train::format_number(w[c]) << '\n';
                }
                summary << s.id << ',' << st << ',' << branch << ','
                        << train::format_number(sum / static_cast<double>(w.numel())) << '\n';
            }
        }
    }
    fs::create_directories(ctx.g.out);
    write_text(fs::path(ctx.g.out) / "attention.csv", summary.str());
    write_text(fs::path(ctx.g.out) / "attention_channels.csv", channels.str());
    ctx.log() << "attention for " << samples.size() << " samples written to " << ctx.g.out << '\n';
    return 0;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

inline int cmd_verify(Context& ctx, const std::string& only, bool list, bool inject_fault)
{
    acceptance::Options opt;
    opt.cli = [](const std::vector<std::string>& a) {
        std::vector<std::string> args{"eafnet", "--quiet"};
        args.insert(args.end(), a.begin(), a.end());
        std::ostringstream sink;
        return run_cli(args, sink, sink);
    };
    const auto checks = acceptance::all_checks(opt, ctx.g.quiet ? nullptr : &ctx.out);
    if (list) {
        for (const auto& c : checks) ctx.out << c.id << ' ' << c.name << '\n';
        return 0;
    }
    std::set<std::string> names;
    std::stringstream ss(only);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) names.insert(item);
    }
    autograd::fault_injection::corrupt_sigmoid_backward = inject_fault;
    bool ok = false;
    try {
        ok = acceptance::run_checks(checks, names, ctx.out);
    } catch (...) {
        autograd::fault_injection::corrupt_sigmoid_backward = false;
        throw;
    }
    autograd::fault_injection::corrupt_sigmoid_backward = false;
    ctx.out << (ok ? "all selected checks passed" : "some checks FAILED") << '\n';
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------- entry

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Polarization-aware semantic segmentation toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON config overriding the defaults");
    app.add_option("--seed", g.seed, "Global seed (initialization, augmentation, shuffling, synthesis)");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "Suppress progress output");

    DataSource src;
    std::string split = "train", mode = "aolp_dolp", kind = "dolp", which = "all", preset, ckpt, only;
    int bins = 100;
    bool list = false, fault = false;

    auto* derive = app.add_subcommand("derive", "Write AoLP/DoLP planes (PDER) and previews");
    derive->fallthrough();
    add_source(derive, src);
    derive->add_option("--split", split, "Split to process")->capture_default_str();
    derive->add_option("--mode", mode, "aolp, dolp or aolp_dolp")->capture_default_str();

    auto* stats = app.add_subcommand("stats", "Histogram of a derived plane over a split");
    stats->fallthrough();
    add_source(stats, src);
    stats->add_option("--split", split, "Split to process")->capture_default_str();
    stats->add_option("--kind", kind, "aolp, dolp or disparity")->capture_default_str();
    stats->add_option("--bins", bins, "Histogram bins")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Write generated scenes in the dataset layout");
    synth->fallthrough();
    synth->add_option("--split", which, "all, train or val")->capture_default_str();

    auto* run = app.add_subcommand("run", "Train a preset and write log, metrics and checkpoints");
    run->fallthrough();
    add_source(run, src);
    run->add_option("preset", preset, "Baseline, AoLP-EX, DoLP-EX, A/D-EX, 3-Path-EX or RGBD")->required();

    std::string eval_split = "val";
    const auto with_checkpoint = [&](CLI::App* c) {
        c->fallthrough();
        add_source(c, src);
        c->add_option("--checkpoint", ckpt, "EAFC checkpoint")->required();
        c->add_option("--split", eval_split, "Split to process")->capture_default_str();
    };
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    with_checkpoint(eval);
    auto* infer = app.add_subcommand("infer", "Write predicted label maps as palette PNGs");
    with_checkpoint(infer);
    auto* attn = app.add_subcommand("attn", "Dump per-stage branch attention weights");
    with_checkpoint(attn);

    auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
    verify->fallthrough();
    verify->add_option("--only", only, "Comma-separated check names");
    verify->add_flag("--list", list, "List check names");
    verify->add_flag("--inject-fault", fault)->group("");

    std::vector<std::string> argv_store(args.empty() ? std::vector<std::string>{"eafnet"} : args);
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        Context ctx{g, {}, out};
        if (!attn->parsed() && !eval->parsed() && !infer->parsed()) ctx.cfg = base_config(g);
        if (derive->parsed()) return cmd_derive(ctx, src, split, mode);
        if (stats->parsed()) return cmd_stats(ctx, src, split, kind, bins);
        if (synth->parsed()) return cmd_synth(ctx, which);
        if (run->parsed()) return cmd_run(ctx, src, preset);
        if (eval->parsed()) return cmd_eval(ctx, src, ckpt, eval_split);
        if (infer->parsed()) return cmd_infer(ctx, src, ckpt, eval_split);
        if (attn->parsed()) return cmd_attn(ctx, src, ckpt, eval_split);
        if (verify->parsed()) return cmd_verify(ctx, only, list, fault);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

inline int run_cli(int argc, char** argv)
{
    return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace eafnet::cli
