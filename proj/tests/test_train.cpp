#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "eafnet/checkpoint.hpp"
#include "eafnet/train.hpp"

using namespace eafnet;
using namespace eafnet::train;
using nn::EafnetConfig;

namespace {

EafnetConfig toy_config(Preset p, int classes = data::kNumClasses)
{
    EafnetConfig c;
    c.branches = preset_branches(p);
    c.widths = {8, 8, 12, 12, 16};
    c.blocks_per_stage = 1;
    c.spp_levels = {1, 2};
    c.decoder_width = 8;
    c.num_classes = classes;
    c.init_seed = 3;
    return c;
}

std::vector<data::Sample> two_material(const std::string& split, int count, data::ModalityMode mode,
                                       std::uint64_t seed = 1, int size = 64)
{
    auto cfg = data::SyntheticSceneConfig::two_material();
    cfg.seed = seed;
    cfg.height = cfg.width = size;
    return data::synthesize_split(cfg, split, count, mode);
}

TrainConfig quick(int epochs)
{
    TrainConfig t;
    t.epochs = epochs;
    t.batch = 4;
    t.crop = 32;
    t.lr = 2e-3;
    t.seed = 5;
    return t;
}

template <class T>
std::vector<Tensor<T>> snapshot(nn::Eafnet<T>& m)
{
    std::vector<Tensor<T>> out;
    for (auto& p : m.parameters()) out.push_back(p.var.value());
    return out;
}

}  // namespace

TEST(Presets, Wiring)
{
    EXPECT_EQ(preset_branches(Preset::baseline).size(), 1u);
    const auto three = preset_branches(Preset::three_path_ex);
    ASSERT_EQ(three.size(), 3u);
    EXPECT_EQ(three[1].kind, nn::InputKind::aolp);
    EXPECT_EQ(three[2].kind, nn::InputKind::dolp);
    EXPECT_EQ(preset_branches(Preset::ad_ex)[1].channels, 2);
    EXPECT_EQ(preset_modality(Preset::rgbd), data::ModalityMode::disparity);
    for (Preset p : all_presets()) EXPECT_EQ(preset_from_string(to_string(p)), p);
    EXPECT_THROW(preset_from_string("AoLP"), std::invalid_argument);
}

TEST(Presets, EveryPresetBuildsBatchesFromSyntheticData)
{
    for (Preset p : all_presets()) {
        const auto samples = two_material("train", 2, preset_modality(p), 1, 32);
        const auto cfg = toy_config(p);
        const auto b = make_batch<float>({&samples[0], &samples[1]}, cfg);
        ASSERT_EQ(b.inputs.size(), cfg.branches.size()) << to_string(p);
        nn::Eafnet<float> m(cfg);
        autograd::Graph<float> g(false);
        EXPECT_EQ(m.forward(g, b.inputs, autograd::NormMode::eval).logits.shape(), (Shape{2, 9, 32, 32}));
    }
}

TEST(TrainConfigTest, ValidationAndStrictJson)
{
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.lr * c.lr_floor_fraction, 4e-4 * 2.5e-3);
    c.crop = 48;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.batch = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.lr = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);

    TrainConfig d;
    d.epochs = 7;
    d.seed = 123;
    nlohmann::json j = d;
    EXPECT_EQ(j.get<TrainConfig>(), d);
    j["epoch"] = 3;
    EXPECT_THROW(j.get<TrainConfig>(), std::invalid_argument);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged)
{
    const auto train_set = two_material("train", 8, data::ModalityMode::aolp);
    nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
    const auto before = snapshot(m);
    auto cfg = quick(1);
    cfg.lr = 0.0;
    train::train(m, train_set, {}, cfg);
    EXPECT_EQ(snapshot(m), before);
}

TEST(Train, SameSeedSameTrajectory)
{
    const auto train_set = two_material("train", 8, data::ModalityMode::aolp);
    const auto val_set = two_material("val", 4, data::ModalityMode::aolp);
    const auto run = [&] {
        nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
        auto r = train::train(m, train_set, val_set, quick(2));
        std::ostringstream os;
        write_log_csv(os, r.log);
        return std::make_pair(os.str(), checkpoint::encode(m));
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Train, SmokeRunLossDecreases)
{
    const auto train_set = two_material("train", 200, data::ModalityMode::aolp);
    nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
    auto cfg = quick(1);
    cfg.crop = 64;
    cfg.lr = 4e-4;
    const auto r = train::train(m, train_set, {}, cfg);
    ASSERT_EQ(r.log.size(), 50u);
    for (const auto& row : r.log) ASSERT_TRUE(std::isfinite(row.loss));
    EXPECT_LE(r.log.back().loss, r.log.front().loss);
}

TEST(Train, LogLayoutAndSchedule)
{
    const auto train_set = two_material("train", 9, data::ModalityMode::none);
    const auto val_set = two_material("val", 2, data::ModalityMode::none);
    nn::Eafnet<float> m(toy_config(Preset::baseline));
    auto cfg = quick(2);
    const auto r = train::train(m, train_set, val_set, cfg);
    ASSERT_EQ(r.log.size(), 4u);  // 9 samples, batch 4: two steps per epoch, remainder dropped
    EXPECT_EQ(r.log[0].lr, cfg.lr);
    EXPECT_FALSE(r.log[0].epoch_end);
    EXPECT_TRUE(r.log[1].epoch_end);
    EXPECT_EQ(r.log[3].step, 4);
    std::ostringstream os;
    write_log_csv(os, r.log);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "epoch,step,lr,loss,val_miou");
    std::getline(is, line);
    EXPECT_EQ(line.back(), ',');  // no validation value mid-epoch
    ASSERT_EQ(r.epoch_miou.size(), 2u);
    EXPECT_FALSE(r.best_checkpoint.empty());
    EXPECT_NO_THROW(checkpoint::decode<float>(r.best_checkpoint));
}

TEST(Train, NonFiniteLossAbortsWithDiagnostics)
{
    auto train_set = two_material("train", 4, data::ModalityMode::none);
    train_set[2].rgb.data[5] = std::nan("");
    nn::Eafnet<float> m(toy_config(Preset::baseline));
    auto cfg = quick(1);
    cfg.scale_min = cfg.scale_max = 1.0;
    cfg.crop = 64;
    try {
        train::train(m, train_set, {}, cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingDiverged& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("lr"), std::string::npos) << msg;
    }
}

TEST(Evaluate, OverfitTwoClassSynthetic)
{
    const auto train_set = two_material("train", 16, data::ModalityMode::aolp, 11);
    nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
    auto cfg = quick(100);
    cfg.crop = 64;
    cfg.scale_min = cfg.scale_max = 1.0;
    cfg.hflip_prob = 0.0;
    cfg.weight_decay = 0.0;
    cfg.lr = 3e-3;
    train::train(m, train_set, {}, cfg);
    const auto r = evaluate(m, train_set);
    ASSERT_TRUE(r.miou.has_value());
    EXPECT_GT(*r.miou, 0.9);
}

TEST(Evaluate, ShardedEqualsSequentialAndRepeatable)
{
    const auto val_set = two_material("val", 7, data::ModalityMode::aolp_dolp, 4);
    nn::Eafnet<float> m(toy_config(Preset::three_path_ex));
    const auto seq = evaluate_confusion(m, val_set);
    EXPECT_EQ(seq.total(), 7u * 64 * 64);
    for (int shards : {2, 3, 7, 20}) {
        EvalOptions o;
        o.shards = shards;
        EXPECT_EQ(evaluate_confusion(m, val_set, o), seq) << shards;
    }
    EXPECT_EQ(evaluate_confusion(m, val_set), seq);
}

TEST(Evaluate, AllIgnoredGivesUndefinedReport)
{
    const auto val_set = two_material("val", 2, data::ModalityMode::none);
    nn::Eafnet<float> m(toy_config(Preset::baseline));
    EvalOptions o;
    for (int c = 0; c < data::kNumClasses; ++c) o.ignore_ids.insert(c);
    const auto r = evaluate(m, val_set, o);
    EXPECT_FALSE(r.miou.has_value());
    for (const auto& c : r.per_class) EXPECT_FALSE(c.iou || c.precision || c.recall);
}

TEST(Evaluate, CenterCropsToMultipleOf32)
{
    const auto val_set = two_material("val", 1, data::ModalityMode::none, 1, 70);
    nn::Eafnet<float> m(toy_config(Preset::baseline));
    EXPECT_EQ(evaluate_confusion(m, val_set).total(), 64u * 64);
    EXPECT_EQ(predict(m, val_set[0]).height, 64);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical)
{
    const auto train_set = two_material("train", 4, data::ModalityMode::aolp);
    for (bool dbl : {false, true}) {
        if (dbl) {
            nn::Eafnet<double> m(toy_config(Preset::aolp_ex));
            const auto a = checkpoint::encode(m, {{"note", "x"}});
            auto loaded = checkpoint::decode<double>(a);
            EXPECT_EQ(loaded.meta["note"], "x");
            EXPECT_EQ(checkpoint::encode(loaded.model, loaded.meta), a);
        } else {
            nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
            train::train(m, train_set, {}, quick(1));  // non-trivial running statistics
            const auto a = checkpoint::encode(m);
            auto loaded = checkpoint::decode<float>(a);
            EXPECT_EQ(checkpoint::encode(loaded.model, loaded.meta), a);
        }
    }
}

TEST(Checkpoint, HeaderLayout)
{
    nn::Eafnet<float> m(toy_config(Preset::baseline));
    const auto b = checkpoint::encode(m);
    ASSERT_GT(b.size(), 10u);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "EAFC");
    EXPECT_EQ(b[4] | (b[5] << 8), 1);
    const std::uint32_t len = b[6] | (b[7] << 8) | (b[8] << 16) | (static_cast<std::uint32_t>(b[9]) << 24);
    const auto blob = nlohmann::json::parse(std::string(b.begin() + 10, b.begin() + 10 + len));
    EXPECT_EQ(blob["model"].get<EafnetConfig>(), m.config());
    // first record is the first named tensor, stored as f32
    const std::size_t r = 10 + len;
    const int nlen = b[r] | (b[r + 1] << 8);
    EXPECT_EQ(std::string(b.begin() + static_cast<long>(r) + 2, b.begin() + static_cast<long>(r) + 2 + nlen),
              m.named_tensors()[0].first);
    EXPECT_EQ(b[r + 2 + static_cast<std::size_t>(nlen)], 0);
}

TEST(Checkpoint, ForwardBitwiseEqualAfterLoad)
{
    const auto samples = two_material("val", 2, data::ModalityMode::aolp);
    const auto train_set = two_material("train", 4, data::ModalityMode::aolp);
    nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
    train::train(m, train_set, {}, quick(1));
    const auto batch = make_batch<float>({&samples[0], &samples[1]}, m.config());
    autograd::Graph<float> g(false);
    const auto before = m.forward(g, batch.inputs, autograd::NormMode::eval).logits.value();
    auto loaded = checkpoint::decode<float>(checkpoint::encode(m));
    const auto after = loaded.model.forward(g, batch.inputs, autograd::NormMode::eval).logits.value();
    EXPECT_EQ(before, after);
}

TEST(Checkpoint, RejectsMalformedAndMismatchedFiles)
{
    nn::Eafnet<float> m(toy_config(Preset::aolp_ex));
    const auto good = checkpoint::encode(m);

    auto bad = good;
    bad[0] = 'X';
    EXPECT_THROW(checkpoint::decode<float>(bad), checkpoint::CheckpointError);
    bad = good;
    bad[4] = 2;
    EXPECT_THROW(checkpoint::decode<float>(bad), checkpoint::CheckpointError);
    bad.assign(good.begin(), good.end() - 3);
    EXPECT_THROW(checkpoint::decode<float>(bad), checkpoint::CheckpointError);
    bad = good;
    bad.push_back(0);
    EXPECT_THROW(checkpoint::decode<float>(bad), checkpoint::CheckpointError);

    // Edit the class count in the JSON blob, keeping the tensors.
    const std::uint32_t len = good[6] | (good[7] << 8) | (good[8] << 16) | (static_cast<std::uint32_t>(good[9]) << 24);
    auto blob = nlohmann::json::parse(std::string(good.begin() + 10, good.begin() + 10 + len));
    blob["model"]["num_classes"] = 5;
    const std::string text = blob.dump();
    io::ByteWriter w;
    w.raw(good.data(), 6);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(text.data(), text.size());
    w.raw(good.data() + 10 + len, good.size() - 10 - len);
    try {
        checkpoint::decode<float>(w.bytes());
        FAIL() << "expected a config mismatch";
    } catch (const checkpoint::CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("config mismatch"), std::string::npos) << e.what();
    }
}
