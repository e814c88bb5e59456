// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors

#include <gtest/gtest.h>

#include <filesystem>

#include "msdkws/trainer.hpp"

using namespace msdkws;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("msdkws_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ModelConfig small_model() {
  ModelConfig c;
  c.encoder_layers = 2;
  c.encoder_hidden = 16;
  c.encoder_out = 12;
  c.embed_dim = 8;
  c.joiner_hidden = 12;
  return c;
}

std::vector<TrainItem> small_items(std::size_t n) {
  SyntheticTaskConfig d;
  d.positives = n / 2;
  d.negatives = n - n / 2;
  d.seed = 5;
  std::vector<TrainItem> items;
  for (auto& u : generate_utterances(d)) {
    Tensor f = stack_frames(u.features, 1, 1);
    const std::size_t t = f.dim(0);
    items.push_back({u.utt_id, Sample{std::move(f), t, u.tokens}});
  }
  return items;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.max_samples = 8;
  t.lr = 3e-3;
  t.val_fraction = 0.2;
  return t;
}

}  // namespace

TEST(Batches, RespectBothCaps) {
  auto items = small_items(40);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  const auto b = make_batches(items, order, 120, 6);
  std::size_t seen = 0;
  for (const auto& batch : b) {
    ASSERT_FALSE(batch.empty());
    std::size_t longest = 0;
    for (auto i : batch) longest = std::max(longest, items[i].sample.valid_frames);
    EXPECT_LE(batch.size(), 6u);
    if (batch.size() > 1) {
      EXPECT_LE(longest * batch.size(), 120u);
    }
    seen += batch.size();
  }
  EXPECT_EQ(seen, items.size());
  // One over-long sample still forms its own batch.
  EXPECT_EQ(make_batches(items, {0}, 1, 1).size(), 1u);
}

TEST(Split, DeterministicAndDisjoint) {
  TrainConfig c;
  c.val_fraction = 0.25;
  const auto a = split_items(20, c), b = split_items(20, c);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.val.size(), 5u);
  EXPECT_EQ(a.train.size(), 15u);
  for (auto v : a.val) EXPECT_EQ(std::count(a.train.begin(), a.train.end(), v), 0);
}

TEST(Train, LossDecreases) {
  const auto items = small_items(40);
  TransducerModel m(small_model(), 1);
  const auto r = train(m, items, quick(4));
  ASSERT_EQ(r.epochs.size(), 4u);
  EXPECT_LT(r.epochs.back().mean.total, r.epochs.front().mean.total);
}

TEST(Train, ResumeReproducesTrajectory) {
  const auto items = small_items(24);
  const auto full_dir = scratch("full"), part_dir = scratch("part");

  TransducerModel a(small_model(), 2);
  TrainOptions fo;
  fo.out_dir = full_dir;
  train(a, items, quick(3), fo);

  TransducerModel b(small_model(), 2);
  TrainOptions po;
  po.out_dir = part_dir;
  train(b, items, quick(2), po);
  TransducerModel c(small_model(), 99);  // weights come from the checkpoint
  TrainOptions ro;
  ro.out_dir = part_dir;
  ro.resume = part_dir / "epoch_002.ckpt";
  train(c, items, quick(3), ro);

  EXPECT_EQ(detail::read_file(full_dir / "train.log"), detail::read_file(part_dir / "train.log"));
  EXPECT_EQ(detail::read_file(full_dir / "last.ckpt"), detail::read_file(part_dir / "last.ckpt"));
  EXPECT_EQ(encode_container(a.to_tensors()), encode_container(c.to_tensors()));
}

TEST(Train, CheckpointFilesAndLogFormat) {
  const auto items = small_items(16);
  const auto dir = scratch("files");
  TransducerModel m(small_model(), 3);
  TrainOptions o;
  o.out_dir = dir;
  train(m, items, quick(2), o);
  for (const char* f : {"epoch_001.ckpt", "epoch_002.ckpt", "last.ckpt", "best.ckpt", "train.log"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto ck = load_checkpoint(dir / "last.ckpt");
  ASSERT_TRUE(ck.state.has_value());
  EXPECT_EQ(ck.state->epoch, 2u);
  EXPECT_EQ(ck.model.config(), small_model());
  const std::string log = detail::read_file(dir / "train.log");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\t'), 10);
}

TEST(Train, PlateauHalvesLearningRate) {
  const auto items = small_items(16);
  TransducerModel m(small_model(), 4);
  TrainConfig c = quick(5);
  c.plateau_threshold = 1e9;  // nothing after the first epoch counts as improvement
  c.plateau_patience = 2;
  const auto r = train(m, items, c);
  std::vector<double> lrs;
  for (const auto& e : r.epochs) lrs.push_back(e.lr);
  EXPECT_EQ(lrs, (std::vector<double>{3e-3, 3e-3, 3e-3, 1.5e-3, 1.5e-3}));
}

TEST(Train, ResumeRejectsOtherModel) {
  const auto items = small_items(8);
  const auto dir = scratch("other");
  TransducerModel m(small_model(), 5);
  TrainOptions o;
  o.out_dir = dir;
  train(m, items, quick(1), o);
  TransducerModel big(ModelConfig{}, 5);
  TrainOptions r;
  r.resume = dir / "last.ckpt";
  EXPECT_THROW(train(big, items, quick(2), r), ConfigError);
}

TEST(LoadItems, NamesFailingUtterance) {
  const auto dir = scratch("items");
  Manifest m;
  m.base_dir = dir;
  m.records = {{"ghost", "feats/ghost.feat", Label::kNegative, {1}}};
  try {
    load_items(m, 1, 1, 24);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}
