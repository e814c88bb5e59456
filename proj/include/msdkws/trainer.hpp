// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Mini-batch masked self-distillation training with AdamW and plateau decay.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msdkws/container.hpp"
#include "msdkws/data.hpp"
#include "msdkws/error.hpp"
#include "msdkws/losses.hpp"
#include "msdkws/model.hpp"
#include "msdkws/optim.hpp"
#include "msdkws/rng.hpp"

namespace msdkws {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  std::size_t max_frames = 12288;
  std::size_t max_samples = 64;
  std::size_t epochs = 10;
  double mask_prob = 0.35;
  double lambda_mask = 1.0;
  double lambda_msd = 0.003;
  bool msd_masked_only = false;
  std::uint64_t seed = 1;
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 2;
  double plateau_threshold = 1e-4;
  /// Fraction of the manifest held out for the plateau metric.
  double val_fraction = 0.05;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0,1)");
    if (max_frames < 1 || max_samples < 1) throw ConfigError("batch caps must be >= 1");
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw ConfigError("mask_prob must lie in [0,1]");
    if (!(lambda_mask >= 0.0 && lambda_msd >= 0.0)) throw ConfigError("loss weights must be >= 0");
    if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ConfigError("plateau_factor must lie in (0,1]");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0,1)");
  }

  LossWeights weights() const { return {mask_prob, lambda_mask, lambda_msd, msd_masked_only}; }
  AdamWHyper hyper() const { return {beta1, beta2, adam_eps, weight_decay}; }
};

struct TrainItem {
  std::string utt_id;
  Sample sample;
};

/// Loads and stacks every manifest utterance. Fails naming the utterance
/// whose feature file cannot be read.
inline std::vector<TrainItem> load_items(const Manifest& m, std::size_t stack_left, std::size_t stack_right,
                                         std::size_t feature_dim) {
  std::vector<TrainItem> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) {
    Tensor raw;
    try {
      raw = read_features(m.feature_path(r));
    } catch (const Error& e) {
      throw IoError("utterance " + r.utt_id + ": " + e.what());
    }
    Tensor stacked = stack_frames(raw, stack_left, stack_right);
    if (stacked.dim(1) != feature_dim) {
      throw ConfigError("utterance " + r.utt_id + ": stacked feature width " + std::to_string(stacked.dim(1)) +
                        " != feature_dim " + std::to_string(feature_dim));
    }
    const std::size_t t = stacked.dim(0);
    out.push_back({r.utt_id, Sample{std::move(stacked), t, r.tokens}});
  }
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown mean;
  double lr = 0.0;
  double val_total = 0.0;

  /// `epoch\tl_rnnt\tl_mask\tl_msd\ttotal\tlr`, round-trippable precision.
  std::string to_line() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g", epoch, mean.l_rnnt, mean.l_rnnt_mask,
                  mean.l_msd, mean.total, lr);
    return buf;
  }
};

/// Scheduler/bookkeeping state persisted alongside checkpoints.
struct TrainerState {
  std::size_t epoch = 0;  // last completed epoch
  double lr = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  std::size_t best_epoch = 0;

  Tensor to_tensor() const {
    return Tensor({5}, std::vector<double>{double(epoch), lr, best_val, double(bad_epochs), double(best_epoch)});
  }
  static TrainerState from_tensor(const Tensor& t) {
    if (t.size() != 5) throw FormatError("trainer.state record must have 5 fields");
    return {std::size_t(t[0]), t[1], t[2], std::size_t(t[3]), std::size_t(t[4])};
  }
};

inline std::vector<NamedTensor> training_checkpoint(const TransducerModel& model, const AdamW& opt,
                                                    const TrainerState& st) {
  auto recs = model.to_tensors();
  opt.append_state(recs);
  recs.push_back({"trainer.state", st.to_tensor()});
  return recs;
}

struct LoadedCheckpoint {
  TransducerModel model;
  std::vector<NamedTensor> records;
  std::optional<TrainerState> state;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto recs = load_container(path);
  LoadedCheckpoint out{TransducerModel::from_tensors(recs), recs, std::nullopt};
  for (const auto& r : recs)
    if (r.name == "trainer.state") out.state = TrainerState::from_tensor(r.tensor);
  return out;
}

/// Greedy batching in the given order: a batch closes when one more sample
/// would exceed max_samples or push the padded frame count past max_frames.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<TrainItem>& items,
                                                          const std::vector<std::size_t>& order,
                                                          std::size_t max_frames, std::size_t max_samples) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> cur;
  std::size_t longest = 0;
  for (std::size_t idx : order) {
    const std::size_t t = items[idx].sample.valid_frames;
    const std::size_t new_longest = std::max(longest, t);
    if (!cur.empty() && (cur.size() + 1 > max_samples || new_longest * (cur.size() + 1) > max_frames)) {
      batches.push_back(std::move(cur));
      cur.clear();
      longest = 0;
    }
    cur.push_back(idx);
    longest = std::max(longest, t);
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

inline std::vector<std::size_t> shuffled(std::vector<std::size_t> v, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_int(rng, 0, i - 1)]);
  return v;
}

struct TrainSplit {
  std::vector<std::size_t> train, val;
};

inline TrainSplit split_items(std::size_t n, const TrainConfig& cfg) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  all = shuffled(std::move(all), mix_seed(cfg.seed, {0x7a1}));
  std::size_t n_val = n >= 2 ? std::size_t(std::ceil(cfg.val_fraction * double(n))) : 0;
  n_val = std::min(n_val, n - 1);
  TrainSplit s;
  s.val.assign(all.begin(), all.begin() + long(n_val));
  s.train.assign(all.begin() + long(n_val), all.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

struct TrainOptions {
  /// Directory receiving epoch_NNN.ckpt, last.ckpt, best.ckpt, train.log.
  std::optional<std::filesystem::path> out_dir;
  /// Checkpoint to continue from (model, optimizer and scheduler state).
  std::optional<std::filesystem::path> resume;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  TrainerState state;
};

inline LossBreakdown mean_breakdown(const std::vector<LossBreakdown>& v, const LossWeights& w) {
  LossBreakdown m;
  for (const auto& b : v) {
    m.l_rnnt += b.l_rnnt;
    m.l_rnnt_mask += b.l_rnnt_mask;
    m.l_msd += b.l_msd;
  }
  const double n = double(std::max<std::size_t>(v.size(), 1));
  m.l_rnnt /= n;
  m.l_rnnt_mask /= n;
  m.l_msd /= n;
  m.lambda_mask = w.lambda_mask;
  m.lambda_msd = w.lambda_msd;
  m.total = LossBreakdown::combine(m.l_rnnt, m.l_rnnt_mask, m.l_msd, w.lambda_mask, w.lambda_msd);
  return m;
}

inline TrainResult train(TransducerModel& model, const std::vector<TrainItem>& items, const TrainConfig& cfg,
                         const TrainOptions& opts = {}) {
  cfg.validate();
  if (items.empty()) throw ParameterError("training manifest is empty");
  const LossWeights w = cfg.weights();
  AdamW opt(model.param_ptrs(), cfg.hyper());
  TrainerState st;
  st.lr = cfg.lr;
  std::vector<std::string> log_lines;

  if (opts.resume) {
    auto ck = load_checkpoint(*opts.resume);
    if (!(ck.model.config() == model.config())) throw ConfigError("resume checkpoint model config differs");
    if (!ck.state) throw FormatError(opts.resume->string() + " has no trainer state");
    model = std::move(ck.model);
    opt = AdamW(model.param_ptrs(), cfg.hyper());
    opt.restore_state(ck.records);
    st = *ck.state;
  }
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    std::ifstream prev(*opts.out_dir / "train.log");
    std::string line;
    while (opts.resume && std::getline(prev, line)) {
      if (!line.empty() && std::stoul(line) <= st.epoch) log_lines.push_back(line);
    }
  }

  const TrainSplit split = split_items(items.size(), cfg);
  TrainResult result;
  for (std::size_t epoch = st.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(split.train, mix_seed(cfg.seed, {0xe90c, epoch}));
    const auto batches = make_batches(items, order, cfg.max_frames, cfg.max_samples);
    std::vector<LossBreakdown> per_sample;
    per_sample.reserve(order.size());
    for (const auto& batch : batches) {
      model.zero_grad();
      const double scale = 1.0 / double(batch.size());
      for (std::size_t idx : batch) {
        per_sample.push_back(
            total_loss_backward(model, items[idx].sample, w, mix_seed(cfg.seed, {0x3a5c, epoch, idx}), scale));
      }
      opt.step(st.lr);
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean = mean_breakdown(per_sample, w);
    log.lr = st.lr;
    if (split.val.empty()) {
      log.val_total = log.mean.total;
    } else {
      std::vector<LossBreakdown> vb;
      for (std::size_t idx : split.val)
        vb.push_back(total_loss(model, items[idx].sample, w, mix_seed(cfg.seed, {0x5a1, idx})));
      log.val_total = mean_breakdown(vb, w).total;
    }
    for (const auto& p : model.params())
      if (!p.value.all_finite()) throw NumericalError("parameter " + p.name + " became non-finite");

    st.epoch = epoch;
    bool improved = false;
    if (log.val_total < st.best_val - cfg.plateau_threshold) {
      st.best_val = log.val_total;
      st.best_epoch = epoch;
      st.bad_epochs = 0;
      improved = true;
    } else if (++st.bad_epochs >= cfg.plateau_patience) {
      st.lr *= cfg.plateau_factor;
      st.bad_epochs = 0;
    }

    if (opts.out_dir) {
      const auto recs = training_checkpoint(model, opt, st);
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", epoch);
      const std::string bytes = encode_container(recs);
      detail::write_file_atomic(*opts.out_dir / name, bytes);
      detail::write_file_atomic(*opts.out_dir / "last.ckpt", bytes);
      if (improved) detail::write_file_atomic(*opts.out_dir / "best.ckpt", bytes);
      log_lines.push_back(log.to_line());
      std::string all;
      for (const auto& l : log_lines) all += l + '\n';
      detail::write_file_atomic(*opts.out_dir / "train.log", all);
    }
    if (opts.on_epoch) opts.on_epoch(log);
    result.epochs.push_back(log);
  }
  result.state = st;
  return result;
}

}  // namespace msdkws
