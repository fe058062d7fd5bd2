#include "vskip/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "vskip/errors.hpp"
#include "vskip/rng.hpp"
#include "vskip/toy_vocab.hpp"
#include "vskip/trace_json.hpp"

namespace vskip {

using nlohmann::json;

FilterConfig parse_filter(const std::string& text) {
  if (text == "exact") return {FilterMode::kExact, 0.5};
  if (text.rfind("anls:", 0) == 0) {
    double threshold = 0.0;
    const char* b = text.data() + 5;
    const char* e = text.data() + text.size();
    auto res = std::from_chars(b, e, threshold);
    if (res.ec != std::errc{} || res.ptr != e || threshold < 0.0 || threshold > 1.0)
      throw DomainError("bad filter threshold in \"" + text + "\"");
    return {FilterMode::kAnlsThreshold, threshold};
  }
  throw DomainError("filter must be \"exact\" or \"anls:<threshold>\"");
}

std::string filter_name(const FilterConfig& cfg) {
  if (cfg.mode == FilterMode::kExact) return "exact";
  std::ostringstream os;
  os << "anls:" << cfg.threshold;
  return os.str();
}

std::vector<ReasoningTrace> filter_correct(std::vector<ReasoningTrace> traces,
                                           const FilterConfig& cfg) {
  std::vector<ReasoningTrace> kept;
  kept.reserve(traces.size());
  for (ReasoningTrace& t : traces) {
    const bool correct =
        cfg.mode == FilterMode::kExact
            ? canonical_answer(t.answer_pred) == canonical_answer(t.answer_gt)
            : anls_pair(t.answer_pred, t.answer_gt) >= cfg.threshold;
    if (correct) kept.push_back(std::move(t));
  }
  return kept;
}

std::vector<DatasetRecord> run_phase1(const std::vector<ReasoningTrace>& traces,
                                      const PipelineConfig& cfg) {
  std::vector<ReasoningTrace> filtered = filter_correct(traces, cfg.filter);
  if (filtered.empty()) throw PipelineError("no traces survived answer filtering");

  std::vector<DatasetRecord> dataset;
  dataset.reserve(filtered.size());
  for (ReasoningTrace& trace : filtered) {
    DatasetRecord rec;
    rec.trace_id = trace.trace_id;
    rec.image_id = trace.image_id;
    rec.question = trace.question;
    ScoredTrace scored = score_trace(std::move(trace), cfg.scoring);
    rec.mask = strategy_mask(scored, cfg.gate);
    const CompressedChain chain = compress(scored.trace, rec.mask);
    for (const TokenRecord& t : chain.retained) rec.retained_ids.push_back(t.token_id);
    rec.actual_ratio = chain.actual_ratio;
    rec.s_text = std::move(scored.s_text);
    rec.s_vis = std::move(scored.s_vis);
    dataset.push_back(std::move(rec));
  }
  return dataset;
}

void save_dataset(const std::vector<DatasetRecord>& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const DatasetRecord& rec : dataset) {
    json j;
    j["trace_id"] = rec.trace_id;
    j["image_id"] = rec.image_id;
    j["question"] = rec.question;
    json mask = json::array();
    for (std::uint8_t b : rec.mask) mask.push_back(static_cast<int>(b));
    j["mask"] = std::move(mask);
    j["retained_ids"] = rec.retained_ids;
    j["actual_ratio"] = rec.actual_ratio;
    j["s_text"] = rec.s_text;
    j["s_vis"] = rec.s_vis;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      DatasetRecord rec;
      rec.trace_id = j.at("trace_id").get<std::string>();
      rec.image_id = j.at("image_id").get<std::string>();
      rec.question = j.at("question").get<std::string>();
      for (const auto& v : j.at("mask")) rec.mask.push_back(static_cast<std::uint8_t>(v.get<int>()));
      rec.retained_ids = j.at("retained_ids").get<std::vector<int>>();
      rec.actual_ratio = j.at("actual_ratio").get<double>();
      rec.s_text = j.at("s_text").get<std::vector<double>>();
      rec.s_vis = j.at("s_vis").get<std::vector<double>>();
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::vector<double>> features_for_image(const std::string& image_id,
                                                    const ToyConfig& cfg) {
  Rng rng(mix64(fnv1a64(image_id) ^ 0x696d67ull));
  std::vector<std::vector<double>> features(static_cast<std::size_t>(cfg.image_patches),
                                            std::vector<double>(static_cast<std::size_t>(cfg.d_model)));
  for (auto& patch : features)
    for (double& v : patch) v = rng.normal(0.0, 0.2);
  return features;
}

std::vector<int> parse_question_ids(const std::string& question, const ToyConfig& cfg) {
  std::vector<int> ids;
  std::istringstream in(question);
  std::string word;
  while (in >> word) {
    const int id = toyvocab::id_from_text(word);
    if (id < 0 || id >= cfg.vocab_size)
      throw PipelineError("question token \"" + word + "\" is not in the toy vocabulary");
    ids.push_back(id);
  }
  if (ids.empty()) throw PipelineError("empty question");
  return ids;
}

std::vector<DistillExample> dataset_to_examples(const std::vector<DatasetRecord>& dataset,
                                                const ToyConfig& cfg) {
  std::vector<DistillExample> examples;
  examples.reserve(dataset.size());
  for (const DatasetRecord& rec : dataset) {
    if (rec.retained_ids.empty()) continue;
    for (int id : rec.retained_ids)
      if (id < 0 || id >= cfg.vocab_size)
        throw PipelineError("trace " + rec.trace_id + " carries ids outside the toy vocabulary");
    DistillExample ex;
    ex.image_features = features_for_image(rec.image_id, cfg);
    ex.question_ids = parse_question_ids(rec.question, cfg);
    ex.target_ids = rec.retained_ids;
    examples.push_back(std::move(ex));
  }
  return examples;
}

Phase2Result run_phase2(const std::vector<DatasetRecord>& dataset,
                        const ToyReasonerParams& base, int rank, double alpha, double dropout,
                        const TrainConfig& train) {
  const std::vector<DistillExample> examples = dataset_to_examples(dataset, base.config);
  if (examples.empty()) throw PipelineError("distillation dataset is empty");
  Phase2Result result;
  result.adapter = LoraAdapter::init(base.config, rank, alpha, dropout, train.seed);
  result.curve = train_adapter(base, result.adapter, examples, train);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

struct PointOutcome {
  std::vector<std::string> preds;
  std::vector<int> out_lengths;
  std::vector<int> orig_lengths;
  std::vector<std::vector<std::uint8_t>> masks;  // empty in distilled mode
  std::vector<bool> pope_pred, pope_label;
  double seconds = 0.0;
};

PointOutcome run_gated_point(const std::vector<ReasoningTrace>& traces,
                             const EvalOptions& opt, const SweepPoint& point) {
  PointOutcome out;
  const int runs = opt.timing ? 3 : 1;
  double secs[3] = {0.0, 0.0, 0.0};
  std::vector<CompressedChain> chains;
  std::vector<std::vector<std::uint8_t>> masks;
  for (int r = 0; r < runs; ++r) {
    chains.clear();
    masks.clear();
    const auto t0 = std::chrono::steady_clock::now();
    for (const ReasoningTrace& trace : traces) {
      ScoredTrace scored = score_trace(trace, opt.scoring);
      GateConfig gate;
      gate.gamma = point.gamma;
      gate.strategy = point.strategy;
      gate.seed = opt.seed;
      std::vector<std::uint8_t> mask = strategy_mask(scored, gate);
      chains.push_back(compress(scored.trace, mask));
      masks.push_back(std::move(mask));
    }
    const auto t1 = std::chrono::steady_clock::now();
    secs[r] = std::chrono::duration<double>(t1 - t0).count();
  }
  out.seconds = opt.timing ? median3(secs[0], secs[1], secs[2]) : 0.0;
  out.masks = std::move(masks);

  for (std::size_t i = 0; i < traces.size(); ++i) {
    const CompressedChain& chain = chains[i];
    std::vector<int> retained_ids;
    retained_ids.reserve(chain.retained.size());
    for (const TokenRecord& t : chain.retained) retained_ids.push_back(t.token_id);
    out.preds.push_back(proxy_answer(retained_ids));
    out.out_lengths.push_back(static_cast<int>(chain.retained.size()));
    out.orig_lengths.push_back(traces[i].length());
    const PopeProbe probe = pope_probe(traces[i]);
    out.pope_label.push_back(probe.label_yes);
    out.pope_pred.push_back(pope_prediction(probe, retained_ids));
  }
  return out;
}

PointOutcome run_distilled_point(const std::vector<ReasoningTrace>& traces,
                                 const EvalOptions& opt) {
  PointOutcome out;
  const ToyConfig& cfg = opt.model->config;
  const int runs = opt.timing ? 3 : 1;
  double secs[3] = {0.0, 0.0, 0.0};
  std::vector<std::vector<int>> generations;
  for (int r = 0; r < runs; ++r) {
    generations.clear();
    const auto t0 = std::chrono::steady_clock::now();
    for (const ReasoningTrace& trace : traces) {
      const auto features = features_for_image(trace.image_id, cfg);
      const std::vector<int> q_ids = parse_question_ids(trace.question, cfg);
      const int room = cfg.max_seq - static_cast<int>(q_ids.size());
      const int max_len = std::max(1, std::min(trace.length(), room));
      const ReasoningTrace gen = generate_cot(*opt.model, opt.adapter, features, q_ids, max_len,
                                              trace.trace_id, trace.image_id);
      std::vector<int> ids;
      ids.reserve(gen.tokens.size());
      for (const TokenRecord& t : gen.tokens) ids.push_back(t.token_id);
      generations.push_back(std::move(ids));
    }
    const auto t1 = std::chrono::steady_clock::now();
    secs[r] = std::chrono::duration<double>(t1 - t0).count();
  }
  out.seconds = opt.timing ? median3(secs[0], secs[1], secs[2]) : 0.0;

  for (std::size_t i = 0; i < traces.size(); ++i) {
    out.preds.push_back(proxy_answer(generations[i]));
    out.out_lengths.push_back(static_cast<int>(generations[i].size()));
    out.orig_lengths.push_back(traces[i].length());
    const PopeProbe probe = pope_probe(traces[i]);
    out.pope_label.push_back(probe.label_yes);
    out.pope_pred.push_back(pope_prediction(probe, generations[i]));
  }
  return out;
}

}  // namespace

std::vector<SweepRow> evaluate(const std::vector<ReasoningTrace>& traces,
                               const EvalOptions& opt, const std::vector<SweepPoint>& sweep) {
  if (traces.empty()) throw PipelineError("no traces to evaluate");
  const bool distilled = opt.model != nullptr;

  std::vector<SweepRow> rows;
  rows.reserve(sweep.size());
  for (const SweepPoint& point : sweep) {
    const PointOutcome oc =
        distilled ? run_distilled_point(traces, opt) : run_gated_point(traces, opt, point);

    SweepRow row;
    row.gamma = point.gamma;
    row.strategy = point.strategy;
    std::vector<std::string> gts;
    gts.reserve(traces.size());
    for (const ReasoningTrace& t : traces) gts.push_back(t.answer_gt);
    row.report.accuracy = top1_accuracy(oc.preds, gts);
    double anls_sum = 0.0;
    for (std::size_t i = 0; i < oc.preds.size(); ++i) anls_sum += anls_pair(oc.preds[i], gts[i]);
    row.report.anls = 100.0 * anls_sum / static_cast<double>(oc.preds.size());
    row.report.avg_tokens = avg_tokens(oc.out_lengths);
    row.report.act_ratio = act_ratio(oc.out_lengths, oc.orig_lengths);
    if (!oc.masks.empty()) {
      std::vector<std::map<std::string, std::vector<int>>> attrs;
      attrs.reserve(traces.size());
      for (const ReasoningTrace& t : traces) attrs.push_back(t.attributes);
      row.report.varr = varr(oc.masks, attrs);
    }
    row.report.pope = pope_stats(oc.pope_pred, oc.pope_label);
    row.report.wall_clock_s = oc.seconds;
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json row_json(const SweepRow& row) {
  json j;
  j["gamma"] = row.gamma;
  j["strategy"] = strategy_name(row.strategy);
  j["accuracy"] = row.report.accuracy;
  j["anls"] = row.report.anls;
  j["avg_tokens"] = row.report.avg_tokens;
  j["act_ratio"] = row.report.act_ratio;
  j["varr"] = row.report.varr;
  j["pope"] = {{"yes_ratio", row.report.pope.yes_ratio},
               {"accuracy", row.report.pope.accuracy},
               {"precision", row.report.pope.precision},
               {"recall", row.report.pope.recall},
               {"f1", row.report.pope.f1}};
  j["wall_clock_s"] = row.report.wall_clock_s;
  return j;
}

}  // namespace

std::string report_to_json(const SweepRow& row) { return row_json(row).dump(2) + "\n"; }

std::string sweep_to_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const SweepRow& row : rows) arr.push_back(row_json(row));
  return arr.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "gamma,strategy,accuracy,anls,avg_tokens,act_ratio,varr_color,varr_shape,varr_object,"
      "yes_ratio,f1,wall_clock_s\n";
  for (const SweepRow& row : rows) {
    out += fmt_double(row.gamma);
    out += ',';
    out += strategy_name(row.strategy);
    out += ',';
    out += fmt_double(row.report.accuracy);
    out += ',';
    out += fmt_double(row.report.anls);
    out += ',';
    out += fmt_double(row.report.avg_tokens);
    out += ',';
    out += fmt_double(row.report.act_ratio);
    for (const char* cat : {"color", "shape", "object"}) {
      out += ',';
      auto it = row.report.varr.find(cat);
      if (it != row.report.varr.end()) out += fmt_double(it->second);
    }
    out += ',';
    out += fmt_double(row.report.pope.yes_ratio);
    out += ',';
    out += fmt_double(row.report.pope.f1);
    out += ',';
    out += fmt_double(row.report.wall_clock_s);
    out += '\n';
  }
  return out;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "step,loss\n";
  for (const CurvePoint& p : curve)
    out << p.step << ',' << fmt_double(p.loss) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// CLI-facing commands

namespace cmd {

void run_synth(const SynthArgs& args) {
  save_traces(synth_corpus(args.spec), args.out);
}

void run_score(const ScoreArgs& args) {
  const std::vector<ReasoningTrace> traces = load_traces(args.traces_path);
  std::ofstream out(args.out);
  if (!out) throw IoError("cannot open " + args.out + " for writing");
  for (const ReasoningTrace& trace : traces) {
    const ScoredTrace scored = score_trace(trace, args.scoring);
    json j = trace_to_json(scored.trace);
    j["s_text"] = scored.s_text;
    j["s_vis"] = scored.s_vis;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + args.out);
}

void run_prune(const PruneArgs& args) {
  const std::vector<ReasoningTrace> traces = load_traces(args.traces_path);
  const std::vector<DatasetRecord> dataset = run_phase1(traces, args.cfg);
  save_dataset(dataset, args.out);
  if (!args.chains_out.empty()) {
    std::unordered_map<std::string, const ReasoningTrace*> by_id;
    for (const ReasoningTrace& t : traces) by_id[t.trace_id] = &t;
    std::vector<CompressedChain> chains;
    chains.reserve(dataset.size());
    for (const DatasetRecord& rec : dataset)
      chains.push_back(compress(*by_id.at(rec.trace_id), rec.mask));
    save_compressed(chains, args.chains_out);
  }
}

void run_distill(const DistillArgs& args) {
  const std::vector<DatasetRecord> dataset = load_dataset(args.dataset_path);
  ToyReasonerParams base = args.checkpoint_in.empty()
                               ? ToyReasonerParams::init(args.model)
                               : load_checkpoint(args.checkpoint_in).params;
  const Phase2Result result =
      run_phase2(dataset, base, args.rank, args.alpha, args.dropout, args.train);
  save_checkpoint({std::move(base), result.adapter}, args.checkpoint_out);
  if (!args.curve_out.empty()) write_curve_csv(result.curve, args.curve_out);
}

std::string run_eval(const EvalArgs& args) {
  const std::vector<ReasoningTrace> traces = load_traces(args.traces_path);

  Checkpoint ck;
  EvalOptions opt;
  opt.scoring = args.scoring;
  opt.seed = args.seed;
  opt.timing = args.timing;
  if (!args.checkpoint.empty()) {
    ck = load_checkpoint(args.checkpoint);
    opt.model = &ck.params;
    if (ck.adapter) opt.adapter = &*ck.adapter;
  }

  std::vector<SweepPoint> sweep;
  for (double gamma : args.gammas)
    for (Strategy strategy : args.strategies) sweep.push_back({gamma, strategy});
  const std::vector<SweepRow> rows = evaluate(traces, opt, sweep);

  std::string rendered;
  if (args.format == "csv")
    rendered = sweep_to_csv(rows);
  else if (rows.size() == 1)
    rendered = report_to_json(rows[0]);
  else
    rendered = sweep_to_json(rows);

  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot open " + args.out + " for writing");
    out << rendered;
    if (!out) throw IoError("write failed: " + args.out);
  }
  return rendered;
}

}  // namespace cmd

}  // namespace vskip
