// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// msdkws command-line driver: gen-data, train, decode, eval, sweep-alpha.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msdkws/msdkws.hpp"

namespace fs = std::filesystem;
using namespace msdkws;

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.config, "key = value configuration file");
  cmd->add_option("--set", a.sets, "override one key, as key=value (repeatable)");
}

RunConfig resolve_config(const ConfigArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_config(a.config);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(c, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
  }
  c.validate();
  return c;
}

void log_config(const RunConfig& c) {
  std::istringstream is(format_config(c));
  std::string line;
  while (std::getline(is, line)) std::cerr << "# " << line << '\n';
}

/// A manifest argument may name the file itself or the corpus directory.
fs::path manifest_path(const std::string& arg) {
  fs::path p(arg);
  return fs::is_directory(p) ? p / "manifest.tsv" : p;
}

std::vector<KeywordSpec> keywords_for(const std::string& keywords_arg, const fs::path& manifest) {
  const fs::path p = keywords_arg.empty() ? manifest.parent_path() / "keywords.txt" : fs::path(keywords_arg);
  return read_keywords(p);
}

std::vector<std::size_t> parse_fa_list(const std::string& s) { return detail::parse_size_list("fa-list", s); }

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(detail::parse_double("grid", detail::trim(item)));
  if (out.empty()) throw ParameterError("empty alpha grid");
  return out;
}

// --- gen-data ---------------------------------------------------------------

struct GenArgs {
  ConfigArgs cfg;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const RunConfig c = resolve_config(a.cfg);
  log_config(c);
  const auto s = generate_corpus(c.data, a.out);
  detail::write_file_atomic(fs::path(a.out) / "config.resolved", format_config(c));
  std::printf("positives\t%zu\nnegatives\t%zu\ndistractors\t%zu\nframes\t%zu\nmean_frames\t%.6f\n", s.positives,
              s.negatives, s.distractors, s.frames, s.mean_frames());
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  ConfigArgs cfg;
  std::string data;
  std::string out;
  std::string resume;
};

int run_train(const TrainArgs& a) {
  const RunConfig c = resolve_config(a.cfg);
  log_config(c);
  const Manifest man = read_manifest(manifest_path(a.data));
  const auto items = load_items(man, c.stack_left, c.stack_right, c.model.feature_dim);
  fs::create_directories(a.out);
  detail::write_file_atomic(fs::path(a.out) / "config.resolved", format_config(c));

  TransducerModel model(c.model, c.train.seed);
  TrainOptions opts;
  opts.out_dir = fs::path(a.out);
  if (!a.resume.empty()) opts.resume = fs::path(a.resume);
  opts.on_epoch = [](const EpochLog& e) {
    std::printf("%s\n", e.to_line().c_str());
    std::fflush(stdout);
  };
  const auto r = train(model, items, c.train, opts);
  std::fprintf(stderr, "# best_epoch = %zu\n# best_val = %.17g\n", r.state.best_epoch, r.state.best_val);
  return 0;
}

// --- decode -----------------------------------------------------------------

struct DecodeArgs {
  ConfigArgs cfg;
  std::string ckpt, manifest, keyword, keywords, mode = "sar", scores_out, dump_lattices;
  std::optional<double> alpha, bonus;
  std::optional<std::size_t> timeout;
};

struct DecodeSetup {
  RunConfig cfg;
  TransducerModel model;
  Manifest manifest;
  std::vector<TrainItem> items;
  KeywordSpec keyword;
};

DecodeSetup setup_decode(const ConfigArgs& ca, const std::string& ckpt, const std::vector<std::string>& manifests,
                         const std::string& keyword, const std::string& keywords_file) {
  RunConfig c = resolve_config(ca);
  TransducerModel model = TransducerModel::load(ckpt);
  c.model = model.config();
  c.data.vocab = c.model.vocab_size;
  c.validate();
  Manifest all;
  std::vector<TrainItem> items;
  std::vector<KeywordSpec> kws;
  for (const auto& m : manifests) {
    const fs::path p = manifest_path(m);
    Manifest man = read_manifest(p);
    auto part = load_items(man, c.stack_left, c.stack_right, c.model.feature_dim);
    items.insert(items.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    for (auto& r : man.records) {
      r.path = (man.base_dir / r.path).string();
      all.records.push_back(std::move(r));
    }
    if (kws.empty()) kws = keywords_for(keywords_file, p);
  }
  if (items.empty()) throw ParameterError("no utterances to decode");
  KeywordSpec kw = keyword.empty() ? kws.front() : find_keyword(kws, keyword);
  kw.validate(c.model.vocab_size);
  return {std::move(c), std::move(model), std::move(all), std::move(items), std::move(kw)};
}

int run_decode(const DecodeArgs& a) {
  DecodeSetup s = setup_decode(a.cfg, a.ckpt, {a.manifest}, a.keyword, a.keywords);
  DecodeParams p = s.cfg.decode;
  if (a.alpha) p.alpha = *a.alpha;
  if (a.bonus) p.bonus = *a.bonus;
  if (a.timeout) p.timeout = *a.timeout;
  const DecodeMode mode = parse_mode(a.mode);
  if (mode == DecodeMode::kAr) p.alpha = 1.0;
  if (mode == DecodeMode::kNar) p.alpha = 0.0;
  p.validate();
  log_config(s.cfg);
  std::fprintf(stderr, "# keyword = %s (%s)\n# mode = %s\n# alpha = %g\n", s.keyword.name.c_str(),
               join_tokens(s.keyword.tokens).c_str(), a.mode.c_str(), p.alpha);

  const auto lattices = compute_lattices(s.model, s.items, s.keyword);
  const auto scores = score_lattices(lattices, s.items, s.keyword, mode, p);
  if (a.scores_out.empty()) {
    std::fputs(encode_scores(scores).c_str(), stdout);
  } else {
    write_scores(a.scores_out, scores);
  }
  if (!a.dump_lattices.empty()) {
    std::vector<NamedTensor> recs;
    for (std::size_t i = 0; i < lattices.size(); ++i) {
      recs.push_back({"ar." + s.items[i].utt_id, lattices[i].ar.probs});
      recs.push_back({"nar." + s.items[i].utt_id, lattices[i].nar.probs});
    }
    save_container(a.dump_lattices, recs);
  }
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> scores;
  std::string all_scores, manifest, keyword, keywords, fa_list = "1,2,3,4,5,6,12,24", format = "text", out;
  std::optional<double> neg_hours;
};

std::vector<double> score_values(const std::string& path) {
  std::vector<double> v;
  for (const auto& l : read_scores(path)) v.push_back(l.score);
  return v;
}

int run_eval(const EvalArgs& a) {
  EvalSet set;
  set.negative_hours = a.neg_hours;
  auto add = [&](const std::string& kw, const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty()) throw ParameterError("no positive scores for keyword " + kw);
    if (neg.empty()) throw ParameterError("no negative scores for keyword " + kw);
    for (double s : pos) set.records.push_back({"", kw, Polarity::kPositive, s});
    for (double s : neg) set.records.push_back({"", kw, Polarity::kNegative, s});
  };
  if (!a.scores.empty()) {
    if (a.scores.size() != 2) throw ParameterError("--scores expects two files: positives negatives");
    add(a.keyword.empty() ? "keyword" : a.keyword, score_values(a.scores[0]), score_values(a.scores[1]));
  } else {
    if (a.all_scores.empty() || a.manifest.empty()) {
      throw ParameterError("eval needs --scores POS NEG or --all-scores with --manifest");
    }
    const fs::path mp = manifest_path(a.manifest);
    const Manifest man = read_manifest(mp);
    const auto kws = keywords_for(a.keywords, mp);
    const KeywordSpec& kw = a.keyword.empty() ? kws.front() : find_keyword(kws, a.keyword);
    auto [pos, neg] = split_scores(man, read_scores(a.all_scores), kw);
    add(kw.name, pos, neg);
  }
  const auto rep = evaluate(set, parse_fa_list(a.fa_list));
  std::string text;
  if (a.format == "text") {
    text = rep.to_text();
  } else if (a.format == "kv") {
    text = rep.to_kv();
  } else {
    throw ParameterError("format must be text or kv, got '" + a.format + "'");
  }
  if (a.out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    detail::write_file_atomic(a.out, text);
  }
  return 0;
}

// --- sweep-alpha ------------------------------------------------------------

struct SweepArgs {
  ConfigArgs cfg;
  std::string ckpt, keyword, keywords, grid = "0,0.3,0.5,1", fa_list = "1,2,4";
  std::vector<std::string> manifests;
};

int run_sweep(const SweepArgs& a) {
  DecodeSetup s = setup_decode(a.cfg, a.ckpt, a.manifests, a.keyword, a.keywords);
  const auto grid = parse_grid(a.grid);
  const auto fa = parse_fa_list(a.fa_list);
  log_config(s.cfg);
  const auto lattices = compute_lattices(s.model, s.items, s.keyword);
  std::string header = "# alpha";
  for (auto n : fa) header += "\trecall@" + std::to_string(n);
  std::printf("%s\n", header.c_str());
  for (double alpha : grid) {
    DecodeParams p = s.cfg.decode;
    p.alpha = alpha;
    p.validate();
    const auto scores = score_lattices(lattices, s.items, s.keyword, DecodeMode::kSar, p);
    auto [pos, neg] = split_scores(s.manifest, scores, s.keyword);
    std::string row = MetricsReport::fmt(alpha);
    for (const auto& d : det_sweep(pos, neg, fa)) row += '\t' + MetricsReport::fmt(d.recall);
    std::printf("%s\n", row.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msdkws: masked self-distilled transducer keyword spotting"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  add_config_flags(c_gen, gen.cfg);
  c_gen->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a model on a manifest");
  add_config_flags(c_train, tr.cfg);
  c_train->add_option("--data", tr.data, "manifest file or corpus directory")->required();
  c_train->add_option("--out", tr.out, "checkpoint directory")->required();
  c_train->add_option("--resume", tr.resume, "checkpoint to continue from");

  DecodeArgs dec;
  auto* c_dec = app.add_subcommand("decode", "score every utterance of a manifest");
  add_config_flags(c_dec, dec.cfg);
  c_dec->add_option("--ckpt", dec.ckpt, "model checkpoint")->required();
  c_dec->add_option("--manifest", dec.manifest, "manifest file or corpus directory")->required();
  c_dec->add_option("--keyword", dec.keyword, "keyword name (default: first)");
  c_dec->add_option("--keywords", dec.keywords, "keyword list (default: keywords.txt beside the manifest)");
  c_dec->add_option("--mode", dec.mode, "ar, nar or sar")->check(CLI::IsMember({"ar", "nar", "sar"}));
  c_dec->add_option("--alpha", dec.alpha, "fusion weight of the AR branch");
  c_dec->add_option("--bonus", dec.bonus, "score bonus");
  c_dec->add_option("--timeout", dec.timeout, "maximum path span in frames (0: off)");
  c_dec->add_option("--scores-out", dec.scores_out, "scores file (default: stdout)");
  c_dec->add_option("--dump-lattices", dec.dump_lattices, "write posterior lattices to this file");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "recall at fixed false-alarm counts");
  c_eval->add_option("--scores", ev.scores, "positive and negative score files")->expected(2);
  c_eval->add_option("--all-scores", ev.all_scores, "one scores file split by --manifest labels");
  c_eval->add_option("--manifest", ev.manifest, "manifest matching --all-scores");
  c_eval->add_option("--keyword", ev.keyword, "keyword name");
  c_eval->add_option("--keywords", ev.keywords, "keyword list");
  c_eval->add_option("--fa-list", ev.fa_list, "comma-separated false-alarm counts");
  c_eval->add_option("--format", ev.format, "text or kv");
  c_eval->add_option("--neg-hours", ev.neg_hours, "negative audio duration, enables FA/hour");
  c_eval->add_option("--out", ev.out, "report file (default: stdout)");

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep-alpha", "recall over a grid of fusion weights");
  add_config_flags(c_sweep, sw.cfg);
  c_sweep->add_option("--ckpt", sw.ckpt, "model checkpoint")->required();
  c_sweep->add_option("--manifests", sw.manifests, "manifests to pool")->required();
  c_sweep->add_option("--grid", sw.grid, "comma-separated alpha values");
  c_sweep->add_option("--keyword", sw.keyword, "keyword name");
  c_sweep->add_option("--keywords", sw.keywords, "keyword list");
  c_sweep->add_option("--fa-list", sw.fa_list, "comma-separated false-alarm counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*c_gen) return run_gen(gen);
    if (*c_train) return run_train(tr);
    if (*c_dec) return run_decode(dec);
    if (*c_eval) return run_eval(ev);
    if (*c_sweep) return run_sweep(sw);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.category().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
