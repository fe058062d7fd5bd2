// vskip: compress multimodal chain-of-thought traces with dual-path scoring
// and union gating, distill the policy into a low-rank adapter, and evaluate.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "vskip/errors.hpp"
#include "vskip/pipeline.hpp"

namespace {

std::vector<vskip::Strategy> parse_strategies(const std::string& csv) {
  std::vector<vskip::Strategy> out;
  std::size_t begin = 0;
  while (begin <= csv.size()) {
    const std::size_t comma = csv.find(',', begin);
    const std::string item = csv.substr(begin, comma == std::string::npos ? comma : comma - begin);
    if (!item.empty()) out.push_back(vskip::parse_strategy(item));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  if (out.empty()) throw vskip::DomainError("no strategies given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"token compression for multimodal chain-of-thought traces"};
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  vskip::cmd::SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a planted-anchor corpus");
  synth_cmd->add_option("--out", synth.out, "output trace JSONL")->required();
  synth_cmd->add_option("--n", synth.spec.n_traces, "number of traces");
  synth_cmd->add_option("--len", synth.spec.trace_len, "tokens per trace");
  synth_cmd->add_option("--anchor-rate", synth.spec.anchor_rate, "fraction of anchor positions");
  synth_cmd->add_option("--anchor-surprisal-lo", synth.spec.anchor_surprisal_lo, "");
  synth_cmd->add_option("--anchor-surprisal-hi", synth.spec.anchor_surprisal_hi, "");
  synth_cmd->add_option("--filler-surprisal-lo", synth.spec.filler_surprisal_lo, "");
  synth_cmd->add_option("--filler-surprisal-hi", synth.spec.filler_surprisal_hi, "");
  synth_cmd->add_option("--anchor-mass-lo", synth.spec.anchor_visual_mass_lo, "");
  synth_cmd->add_option("--anchor-mass-hi", synth.spec.anchor_visual_mass_hi, "");
  synth_cmd->add_option("--filler-mass-lo", synth.spec.filler_visual_mass_lo, "");
  synth_cmd->add_option("--filler-mass-hi", synth.spec.filler_visual_mass_hi, "");
  synth_cmd->add_option("--seed", synth.spec.seed, "RNG seed");

  // score ------------------------------------------------------------------
  vskip::cmd::ScoreArgs score;
  CLI::App* score_cmd = app.add_subcommand("score", "dump traces with s_text / s_vis appended");
  score_cmd->add_option("--traces", score.traces_path, "input trace JSONL")->required();
  score_cmd->add_option("--out", score.out, "output JSONL")->required();
  score_cmd->add_option("--focus-lo", score.scoring.focus_lo, "focus depth range start");
  score_cmd->add_option("--focus-hi", score.scoring.focus_hi, "focus depth range end");

  // prune ------------------------------------------------------------------
  vskip::cmd::PruneArgs prune;
  std::string prune_strategy = "union", prune_filter = "exact", prune_protect;
  CLI::App* prune_cmd = app.add_subcommand("prune", "filter, score, and gate traces into a dataset");
  prune_cmd->add_option("--traces", prune.traces_path, "input trace JSONL")->required();
  prune_cmd->add_option("--out", prune.out, "output dataset JSONL")->required();
  prune_cmd->add_option("--chains-out", prune.chains_out, "also emit compressed-chain JSONL");
  prune_cmd->add_option("--gamma", prune.cfg.gate.gamma, "target retention ratio");
  prune_cmd->add_option("--strategy", prune_strategy,
                        "union|text|vision|intersection|random|truncation");
  prune_cmd->add_option("--seed", prune.cfg.gate.seed, "RNG seed (random strategy)");
  prune_cmd->add_option("--protect", prune_protect, "csv of positions never pruned");
  prune_cmd->add_option("--filter", prune_filter, "exact | anls:<threshold>");
  prune_cmd->add_option("--focus-lo", prune.cfg.scoring.focus_lo, "");
  prune_cmd->add_option("--focus-hi", prune.cfg.scoring.focus_hi, "");

  // distill ----------------------------------------------------------------
  vskip::cmd::DistillArgs distill;
  CLI::App* distill_cmd = app.add_subcommand("distill", "fit a low-rank adapter on a dataset");
  distill_cmd->add_option("--dataset", distill.dataset_path, "phase-1 dataset JSONL")->required();
  distill_cmd->add_option("--checkpoint-out", distill.checkpoint_out, "output checkpoint")->required();
  distill_cmd->add_option("--checkpoint-in", distill.checkpoint_in, "base model checkpoint");
  distill_cmd->add_option("--curve-out", distill.curve_out, "step,loss CSV");
  distill_cmd->add_option("--rank", distill.rank, "adapter rank");
  distill_cmd->add_option("--alpha", distill.alpha, "adapter scaling factor");
  distill_cmd->add_option("--dropout", distill.dropout, "adapter dropout rate");
  distill_cmd->add_option("--lr", distill.train.lr, "learning rate");
  distill_cmd->add_option("--steps", distill.train.steps, "optimizer steps");
  distill_cmd->add_option("--batch", distill.train.batch_size, "batch size");
  distill_cmd->add_option("--seed", distill.train.seed, "RNG seed");
  distill_cmd->add_option("--vocab", distill.model.vocab_size, "fresh base: vocabulary size");
  distill_cmd->add_option("--d-model", distill.model.d_model, "fresh base: model width");
  distill_cmd->add_option("--model-layers", distill.model.layers, "fresh base: layers");
  distill_cmd->add_option("--model-heads", distill.model.heads, "fresh base: heads");

  // eval / sweep -------------------------------------------------------------
  vskip::cmd::EvalArgs eval;
  std::string eval_strategies = "union", eval_gammas = "0.5";
  bool no_timing = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate one (gamma, strategy) point");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "evaluate a gamma x strategy grid");
  for (CLI::App* c : {eval_cmd, sweep_cmd}) {
    c->add_option("--traces", eval.traces_path, "input trace JSONL")->required();
    c->add_option("--out", eval.out, "write the report here instead of stdout");
    c->add_option("--checkpoint", eval.checkpoint, "distilled mode: answer with this model");
    c->add_option("--gammas", eval_gammas, "csv of retention ratios");
    c->add_option("--gamma", eval_gammas, "alias of --gammas");
    c->add_option("--strategies", eval_strategies, "csv of strategies");
    c->add_option("--strategy", eval_strategies, "alias of --strategies");
    c->add_option("--focus-lo", eval.scoring.focus_lo, "");
    c->add_option("--focus-hi", eval.scoring.focus_hi, "");
    c->add_option("--seed", eval.seed, "RNG seed");
    c->add_option("--format", eval.format, "json | csv");
    c->add_flag("--no-timing", no_timing, "report wall_clock_s as 0 for byte-stable output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      vskip::cmd::run_synth(synth);
    } else if (*score_cmd) {
      vskip::cmd::run_score(score);
    } else if (*prune_cmd) {
      prune.cfg.gate.strategy = vskip::parse_strategy(prune_strategy);
      prune.cfg.filter = vskip::parse_filter(prune_filter);
      if (!prune_protect.empty()) {
        std::size_t begin = 0;
        while (begin <= prune_protect.size()) {
          const std::size_t comma = prune_protect.find(',', begin);
          const std::string item =
              prune_protect.substr(begin, comma == std::string::npos ? comma : comma - begin);
          if (!item.empty()) prune.cfg.gate.protect_positions.push_back(std::stoi(item));
          if (comma == std::string::npos) break;
          begin = comma + 1;
        }
      }
      vskip::cmd::run_prune(prune);
    } else if (*distill_cmd) {
      distill.model.seed = distill.train.seed;
      vskip::cmd::run_distill(distill);
    } else if (*eval_cmd || *sweep_cmd) {
      eval.timing = !no_timing;
      eval.strategies = parse_strategies(eval_strategies);
      eval.gammas.clear();
      std::size_t begin = 0;
      while (begin <= eval_gammas.size()) {
        const std::size_t comma = eval_gammas.find(',', begin);
        const std::string item =
            eval_gammas.substr(begin, comma == std::string::npos ? comma : comma - begin);
        if (!item.empty()) eval.gammas.push_back(std::stod(item));
        if (comma == std::string::npos) break;
        begin = comma + 1;
      }
      if (eval.format.empty()) eval.format = *sweep_cmd ? "csv" : "json";
      if (*sweep_cmd && eval.format == "json" && !sweep_cmd->count("--format")) eval.format = "csv";
      const std::string rendered = vskip::cmd::run_eval(eval);
      if (eval.out.empty()) std::cout << rendered;
    }
  } catch (const vskip::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {  // DomainError and bad numeric flags
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
