#pragma once

// Orchestrates the two-phase pipeline: generate/load traces, filter out
// incorrect rationales, prune with the configured gate, distill the pruning
// policy into a low-rank adapter, and evaluate sweeps of (gamma, strategy).

#include <cstdint>
#include <string>
#include <vector>

#include "vskip/distill.hpp"
#include "vskip/gating.hpp"
#include "vskip/metrics.hpp"
#include "vskip/scoring.hpp"
#include "vskip/synth.hpp"
#include "vskip/toy_model.hpp"
#include "vskip/trace.hpp"

namespace vskip {

enum class FilterMode { kExact, kAnlsThreshold };

struct FilterConfig {
  FilterMode mode = FilterMode::kExact;
  double threshold = 0.5;  // anls mode only
};

// "exact" or "anls:<threshold>".
FilterConfig parse_filter(const std::string& text);
std::string filter_name(const FilterConfig& cfg);

struct PipelineConfig {
  ScoringConfig scoring;
  GateConfig gate;
  FilterConfig filter;
};

// Keeps traces whose prediction matches the ground truth under the active
// mode, preserving order.
std::vector<ReasoningTrace> filter_correct(std::vector<ReasoningTrace> traces,
                                           const FilterConfig& cfg);

// One pruned trace of the distillation dataset, with the audit fields needed
// to recompute the mask from the stored trace.
struct DatasetRecord {
  std::string trace_id;
  std::string image_id;
  std::string question;
  std::vector<std::uint8_t> mask;
  std::vector<int> retained_ids;
  double actual_ratio = 0.0;
  std::vector<double> s_text;
  std::vector<double> s_vis;
};

// filter -> score -> gate -> compress. Throws PipelineError if nothing
// survives filtering.
std::vector<DatasetRecord> run_phase1(const std::vector<ReasoningTrace>& traces,
                                      const PipelineConfig& cfg);

void save_dataset(const std::vector<DatasetRecord>& dataset, const std::string& path);
std::vector<DatasetRecord> load_dataset(const std::string& path);

// Traces carry no pixels; the toy model consumes per-image features derived
// deterministically from the image id.
std::vector<std::vector<double>> features_for_image(const std::string& image_id,
                                                    const ToyConfig& cfg);

// Splits the stored question string back into toy-vocabulary ids.
std::vector<int> parse_question_ids(const std::string& question, const ToyConfig& cfg);

// Drops records whose compressed chain came out empty (nothing to supervise).
std::vector<DistillExample> dataset_to_examples(const std::vector<DatasetRecord>& dataset,
                                                const ToyConfig& cfg);

struct Phase2Result {
  LoraAdapter adapter;
  std::vector<CurvePoint> curve;
};

Phase2Result run_phase2(const std::vector<DatasetRecord>& dataset,
                        const ToyReasonerParams& base, int rank, double alpha, double dropout,
                        const TrainConfig& train);

struct SweepPoint {
  double gamma = 0.5;
  Strategy strategy = Strategy::kUnion;
};

struct EvalOptions {
  ScoringConfig scoring;
  std::uint64_t seed = 0;
  // Wall clock is the median of 3 timed passes over scoring+gating+compression
  // (or generation in distilled mode). false pins it at 0 so emitted reports
  // are byte-stable across runs.
  bool timing = true;
  // Distilled mode: answers come from the adapted model's own generations
  // instead of the gate; set both.
  const ToyReasonerParams* model = nullptr;
  const LoraAdapter* adapter = nullptr;
};

struct SweepRow {
  double gamma = 0.5;
  Strategy strategy = Strategy::kUnion;
  EvalReport report;
};

std::vector<SweepRow> evaluate(const std::vector<ReasoningTrace>& traces,
                               const EvalOptions& opt, const std::vector<SweepPoint>& sweep);

std::string report_to_json(const SweepRow& row);
std::string sweep_to_json(const std::vector<SweepRow>& rows);
// gamma,strategy,accuracy,anls,avg_tokens,act_ratio,varr_color,varr_shape,
// varr_object,yes_ratio,f1,wall_clock_s
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

// File-level commands backing the CLI subcommands.
namespace cmd {

struct SynthArgs {
  SynthSpec spec;
  std::string out;
};
void run_synth(const SynthArgs& args);

struct ScoreArgs {
  std::string traces_path;
  std::string out;
  ScoringConfig scoring;
};
void run_score(const ScoreArgs& args);

struct PruneArgs {
  std::string traces_path;
  std::string out;         // dataset JSONL
  std::string chains_out;  // optional compressed-chain JSONL
  PipelineConfig cfg;
};
void run_prune(const PruneArgs& args);

struct DistillArgs {
  std::string dataset_path;
  std::string checkpoint_in;  // empty: fresh base from `model`
  std::string checkpoint_out;
  std::string curve_out;  // optional
  ToyConfig model;
  int rank = 4;
  double alpha = 32.0;
  double dropout = 0.05;
  TrainConfig train;
};
void run_distill(const DistillArgs& args);

struct EvalArgs {
  std::string traces_path;
  std::string out;         // empty: caller prints the returned text
  std::string checkpoint;  // distilled mode when set
  std::vector<double> gammas{0.5};
  std::vector<Strategy> strategies{Strategy::kUnion};
  ScoringConfig scoring;
  std::uint64_t seed = 0;
  bool timing = true;
  std::string format = "json";  // json | csv
};
std::string run_eval(const EvalArgs& args);

}  // namespace cmd

}  // namespace vskip
