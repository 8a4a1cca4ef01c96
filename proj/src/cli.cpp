// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttfr/checkpoint.hpp"
#include "ttfr/config.hpp"
#include "ttfr/errors.hpp"
#include "ttfr/growth.hpp"
#include "ttfr/model.hpp"
#include "ttfr/rng.hpp"
#include "ttfr/trainer.hpp"
#include "ttfr/verify.hpp"

namespace ttfr {

namespace {

// Thrown for problems that count as bad usage rather than domain failures.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<int> tokenize_for(const ModelConfig& cfg, const std::string& text) {
  const auto ids = CharTokenizer(cfg.is_encoder()).encode(text);
  for (int id : ids) {
    if (static_cast<size_t>(id) >= cfg.vocab_size) {
      throw InputError("byte " + std::to_string(id) + " is outside the model vocabulary of " +
                       std::to_string(cfg.vocab_size));
    }
  }
  return ids;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string thousands(size_t n) {
  std::string s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<size_t>(i), ",");
  return s;
}

struct InitArgs {
  std::string config, out;
  uint64_t seed = 0;
  double init_std = 0.02;
};

void cmd_init(const InitArgs& a, std::ostream& out, std::ostream& err) {
  ModelConfig cfg;
  try {
    cfg = load_config_file(a.config);
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad config: ") + e.what());
  }
  if (!(a.init_std >= 0.0)) throw UsageError("--init-std must be >= 0");
  Rng rng(a.seed);
  const auto w = init_random<float>(cfg, rng, a.init_std);
  save_checkpoint(a.out, cfg, w, {});
  out << nlohmann::json{{"out", a.out},
                        {"parameters", parameter_count(cfg)},
                        {"tensors", tensor_count(cfg)}}
             .dump()
      << "\n";
  err << "initialized " << thousands(parameter_count(cfg)) << " parameters -> " << a.out << "\n";
}

struct TrainArgs {
  std::string model, corpus, out, log;
  TrainConfig tcfg;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(a.model);
  const auto tokens = tokenize_for(ck.config, read_text_file(a.corpus));
  const auto result = train<float>(ck.config, ck.weights, tokens, a.tcfg);
  save_checkpoint(a.out, ck.config, result.weights, ck.metadata);
  if (!a.log.empty()) write_loss_csv(a.log, result.log);
  const double first = result.log.front().loss;
  const double last = result.log.back().loss;
  out << nlohmann::json{{"out", a.out},
                        {"steps", a.tcfg.steps},
                        {"first_loss", first},
                        {"last_loss", last}}
             .dump()
      << "\n";
  err << "trained " << a.tcfg.steps << " steps, loss " << fixed(first, 4) << " -> "
      << fixed(last, 4) << "\n";
}

struct GrowArgs {
  std::string source, plan, out;
};

void cmd_grow(const GrowArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(a.source);
  const GrowthPlan plan = load_plan_file(a.plan);
  plan.validate();
  if (!(plan.source_cfg == ck.config)) {
    throw PlanError("plan source_cfg does not match the source checkpoint config");
  }
  const auto grown = grow_model(ck.weights, plan);
  const std::string cls(to_string(grown.equivalence_class));
  save_checkpoint(a.out, plan.target_cfg, grown.weights,
                  nlohmann::json{{"equivalence_class", cls}, {"plan", plan}});

  const size_t sp = parameter_count(plan.source_cfg);
  const size_t tp = parameter_count(plan.target_cfg);
  out << nlohmann::json{
             {"equivalence_class", cls},
             {"source", {{"parameters", sp}, {"tensors", tensor_count(plan.source_cfg)}}},
             {"target", {{"parameters", tp}, {"tensors", tensor_count(plan.target_cfg)}}},
             {"out", a.out}}
             .dump()
      << "\n";
  err << "grew " << thousands(sp) << " -> " << thousands(tp) << " parameters ("
      << tensor_count(plan.source_cfg) << " -> " << tensor_count(plan.target_cfg)
      << " tensors), class " << cls << "\n";
}

struct VerifyArgs {
  std::string source, target;
  size_t n_seqs = 64;
  uint64_t seed = 0;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint src = load_checkpoint(a.source);
  const Checkpoint tgt = load_checkpoint(a.target);
  if (src.config.vocab_size != tgt.config.vocab_size) {
    throw InputError("vocab_size differs: " + std::to_string(src.config.vocab_size) + " vs " +
                     std::to_string(tgt.config.vocab_size));
  }
  if (a.n_seqs == 0) throw UsageError("--n-seqs must be >= 1");
  std::optional<EquivalenceClass> claimed;
  if (tgt.metadata.is_object() && tgt.metadata.contains("equivalence_class")) {
    claimed = parse_equivalence_class(tgt.metadata["equivalence_class"].get<std::string>());
  }
  const size_t max_len = std::min(src.config.max_seq_len, tgt.config.max_seq_len);
  const auto seqs = make_test_sequences(a.seed, a.n_seqs, src.config.vocab_size, max_len);
  const auto report = compare_models(src.config, src.weights, tgt.config, tgt.weights, seqs, claimed);
  out << nlohmann::json(report).dump() << "\n";
  err << "class " << to_string(report.equivalence_class) << ", max |diff| "
      << report.max_abs_logit_diff << ", mean KL " << report.mean_kl << ", argmax agreement "
      << fixed(report.argmax_agreement, 4) << (report.failed ? " FAILED" : "") << "\n";
  return report.failed ? kExitFailure : kExitOk;
}

struct EvalArgs {
  std::string model, corpus;
};

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(a.model);
  const auto tokens = tokenize_for(ck.config, read_text_file(a.corpus));
  const double ppl = perplexity(ck.config, ck.weights, tokens);
  out << nlohmann::json{{"perplexity", ppl}, {"tokens", tokens.size()}}.dump() << "\n";
  err << "perplexity " << fixed(ppl, 4) << " over " << tokens.size() << " tokens\n";
}

struct FillMaskArgs {
  std::string model, target, text, probes;
  size_t position = 0;
  size_t k = 5;
};

int gold_id(const nlohmann::json& g) {
  if (g.is_string()) {
    const auto s = g.get<std::string>();
    if (s.size() != 1) throw InputError("probe gold string must be a single byte");
    return static_cast<unsigned char>(s[0]);
  }
  return g.get<int>();
}

// Probe file: array of {"text" | "tokens", "position", "gold"}; gold is an
// id or a one-byte string.
std::vector<MaskProbe> load_probes(const std::string& path, const ModelConfig& cfg) {
  const auto j = read_json_file(path);
  if (!j.is_array()) throw InputError("probe file must hold a JSON array");
  std::vector<MaskProbe> probes;
  try {
    for (const auto& p : j) {
      MaskProbe probe;
      probe.tokens = p.contains("text") ? tokenize_for(cfg, p.at("text").get<std::string>())
                                        : p.at("tokens").get<std::vector<int>>();
      probe.position = p.at("position").get<size_t>();
      probe.gold = gold_id(p.at("gold"));
      probes.push_back(std::move(probe));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed probe: ") + e.what());
  }
  return probes;
}

void cmd_fill_mask(const FillMaskArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(a.model);
  if (!ck.config.is_encoder()) throw InputError("fill-mask: encoder required");

  if (!a.probes.empty()) {
    const auto probes = load_probes(a.probes, ck.config);
    const double src_acc = topk_accuracy(ck.config, ck.weights, probes, a.k);
    std::optional<double> tgt_acc;
    if (!a.target.empty()) {
      const Checkpoint tgt = load_checkpoint(a.target);
      if (!tgt.config.is_encoder()) throw InputError("fill-mask: encoder required");
      tgt_acc = topk_accuracy(tgt.config, tgt.weights, probes, a.k);
    }
    char line[128];
    std::snprintf(line, sizeof(line), "%-12s %10s %10s\n", "probes", "source", "grown");
    out << line;
    std::snprintf(line, sizeof(line), "%-12s %10s %10s\n",
                  ("top-" + std::to_string(a.k) + " acc").c_str(),
                  fixed(100.0 * src_acc, 2).c_str(),
                  tgt_acc ? fixed(100.0 * *tgt_acc, 2).c_str() : "-");
    out << line;
    err << probes.size() << " probes\n";
    return;
  }

  if (a.text.empty()) throw UsageError("fill-mask needs --text or --probes");
  const auto tokens = tokenize_for(ck.config, a.text);
  const auto top = fill_mask_topk(ck.config, ck.weights, tokens, a.position, a.k);
  nlohmann::json strs = nlohmann::json::array();
  for (int id : top) {
    if (id >= 256) {
      strs.push_back("[MASK]");
    } else if (id >= 0x20 && id < 0x7f) {
      strs.push_back(std::string(1, static_cast<char>(id)));
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "<0x%02X>", id);
      strs.push_back(buf);
    }
  }
  out << nlohmann::json{{"position", a.position}, {"topk", top}, {"tokens", strs}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grow a small trained transformer into a larger one."};
  app.name("ttfr");
  app.require_subcommand(1);

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init", "Write a randomly initialized checkpoint");
  init_cmd->add_option("--config", init.config, "Model config JSON")->required();
  init_cmd->add_option("--seed", init.seed, "RNG seed");
  init_cmd->add_option("--out", init.out, "Output checkpoint")->required();
  init_cmd->add_option("--init-std", init.init_std, "Std of weight matrices");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a decoder on a byte corpus");
  train_cmd->add_option("--model", tr.model, "Input checkpoint")->required();
  train_cmd->add_option("--corpus", tr.corpus, "Corpus file (bytes)")->required();
  train_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
  train_cmd->add_option("--log", tr.log, "CSV loss log");
  train_cmd->add_option("--steps", tr.tcfg.steps);
  train_cmd->add_option("--lr", tr.tcfg.lr);
  train_cmd->add_option("--batch-size", tr.tcfg.batch_size);
  train_cmd->add_option("--seq-len", tr.tcfg.seq_len);
  train_cmd->add_option("--seed", tr.tcfg.seed);
  train_cmd->add_option("--log-every", tr.tcfg.log_every);
  train_cmd->add_option("--grad-clip", tr.tcfg.grad_clip_norm, "Global-norm clip, <= 0 disables");

  GrowArgs gr;
  auto* grow_cmd = app.add_subcommand("grow", "Grow a checkpoint according to a plan");
  grow_cmd->add_option("--source", gr.source, "Source checkpoint")->required();
  grow_cmd->add_option("--plan", gr.plan, "Growth plan JSON")->required();
  grow_cmd->add_option("--out", gr.out, "Output checkpoint")->required();

  VerifyArgs ve;
  auto* verify_cmd = app.add_subcommand("verify", "Compare source and grown logits");
  verify_cmd->add_option("--source", ve.source)->required();
  verify_cmd->add_option("--target", ve.target)->required();
  verify_cmd->add_option("--n-seqs", ve.n_seqs);
  verify_cmd->add_option("--seed", ve.seed);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Perplexity on a byte corpus");
  eval_cmd->add_option("--model", ev.model)->required();
  eval_cmd->add_option("--corpus", ev.corpus)->required();

  FillMaskArgs fm;
  auto* fill_cmd = app.add_subcommand("fill-mask", "Top-k mask filling for encoder checkpoints");
  fill_cmd->add_option("--model", fm.model)->required();
  fill_cmd->add_option("--text", fm.text);
  fill_cmd->add_option("--position", fm.position);
  fill_cmd->add_option("--k", fm.k);
  fill_cmd->add_option("--probes", fm.probes, "Probe JSON; prints a source/grown accuracy table");
  fill_cmd->add_option("--target", fm.target, "Grown checkpoint for the second column");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*init_cmd) cmd_init(init, out, err);
    if (*train_cmd) cmd_train(tr, out, err);
    if (*grow_cmd) cmd_grow(gr, out, err);
    if (*verify_cmd) return cmd_verify(ve, out, err);
    if (*eval_cmd) cmd_eval(ev, out, err);
    if (*fill_cmd) cmd_fill_mask(fm, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace ttfr
