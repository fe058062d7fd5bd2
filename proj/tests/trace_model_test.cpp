#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vskip/errors.hpp"
#include "vskip/rng.hpp"
#include "vskip/trace.hpp"
#include "vskip/trace_json.hpp"

using namespace vskip;

namespace {

// Uniform-attention trace: P image keys, T tokens, row t spread evenly over
// keys 0..P+t.
ReasoningTrace make_trace(int layers, int heads, int patches, int T) {
  ReasoningTrace t;
  t.trace_id = "t0";
  t.question = "q";
  t.image_id = "img";
  for (int k = 0; k < patches; ++k) t.image_key_indices.push_back(k);
  for (int i = 0; i < T; ++i) t.tokens.push_back({"w" + std::to_string(i), i, -0.5});
  AttentionTensor a;
  a.layers = layers;
  a.heads = heads;
  a.queries = T;
  a.keys = patches + T;
  a.w.assign(static_cast<std::size_t>(layers) * heads * T * a.keys, 0.0);
  for (int l = 0; l < layers; ++l)
    for (int h = 0; h < heads; ++h)
      for (int q = 0; q < T; ++q)
        for (int k = 0; k <= patches + q; ++k) a.at(l, h, q, k) = 1.0 / (patches + q + 1);
  t.attention = std::move(a);
  t.answer_gt = "x";
  t.answer_pred = "x";
  return t;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("well-formed trace has no violations") {
  CHECK(validate_trace(make_trace(2, 2, 3, 4)).empty());
}

TEST_CASE("attention row not summing to 1 is flagged with its position") {
  ReasoningTrace t = make_trace(2, 2, 3, 4);
  t.attention->at(1, 0, 2, 0) -= 0.2;  // row now sums to 0.8
  const auto violations = validate_trace(t);
  REQUIRE(!violations.empty());
  bool found = false;
  for (const Violation& v : violations)
    if (v.rule.find("row-normalization") != std::string::npos &&
        v.detail.find("layer=1") != std::string::npos &&
        v.detail.find("token=2") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("empty image key set is flagged") {
  ReasoningTrace t = make_trace(1, 1, 2, 3);
  t.image_key_indices.clear();
  const auto violations = validate_trace(t);
  REQUIRE(!violations.empty());
  CHECK(violations[0].field == "image_key_indices");
}

TEST_CASE("nonzero weight beyond the causal bound is flagged") {
  ReasoningTrace t = make_trace(1, 1, 2, 3);
  t.attention->at(0, 0, 0, 4) = 1e-9;
  bool found = false;
  for (const Violation& v : validate_trace(t))
    if (v.rule.find("masked keys") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("positive logprob and empty text are flagged") {
  ReasoningTrace t = make_trace(1, 1, 2, 3);
  t.tokens[1].logprob = 0.25;
  t.tokens[2].text.clear();
  const auto violations = validate_trace(t);
  CHECK(violations.size() == 2);
}

TEST_CASE("image keys must stay out of the rationale key range") {
  ReasoningTrace t = make_trace(1, 1, 2, 3);
  t.image_key_indices = {0, 2};  // key 2 is the first rationale position
  bool found = false;
  for (const Violation& v : validate_trace(t))
    if (v.rule.find("disjoint") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("trace JSONL round-trips both layouts") {
  std::vector<ReasoningTrace> traces;
  traces.push_back(make_trace(2, 2, 3, 4));
  ReasoningTrace m = make_trace(1, 1, 2, 3);
  m.visual_mass = derive_visual_mass(*m.attention, m.image_key_indices);
  m.attention.reset();
  m.trace_id = "t1";
  m.attributes["color"] = {0, 2};
  traces.push_back(std::move(m));

  const std::string path = temp_path("vskip_traces_rt.jsonl");
  save_traces(traces, path);
  const auto loaded = load_traces(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].attention.has_value());
  CHECK(!loaded[0].visual_mass.has_value());
  CHECK(loaded[1].visual_mass.has_value());
  CHECK(loaded[1].attributes.at("color") == std::vector<int>{0, 2});
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(loaded[i].trace_id == traces[i].trace_id);
    CHECK(loaded[i].question == traces[i].question);
    CHECK(loaded[i].tokens.size() == traces[i].tokens.size());
    for (std::size_t k = 0; k < traces[i].tokens.size(); ++k) {
      CHECK(loaded[i].tokens[k].text == traces[i].tokens[k].text);
      CHECK(loaded[i].tokens[k].token_id == traces[i].tokens[k].token_id);
      CHECK(loaded[i].tokens[k].logprob == traces[i].tokens[k].logprob);
    }
  }
  // Save(load(f)) is byte-identical to save of the originals.
  const std::string path2 = temp_path("vskip_traces_rt2.jsonl");
  save_traces(loaded, path2);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("loader errors name the offending line") {
  const std::string path = temp_path("vskip_traces_bad.jsonl");
  const nlohmann::json good = trace_to_json(make_trace(1, 1, 2, 3));
  {
    nlohmann::json bad = good;
    bad.erase("logprobs");
    std::ofstream out(path);
    out << good.dump() << '\n' << good.dump() << '\n' << bad.dump() << '\n';
  }
  try {
    load_traces(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
    CHECK(std::string(e.what()).find("logprobs") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << good.dump() << '\n' << "{not json\n";
  }
  try {
    load_traces(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  {
    nlohmann::json both = good;
    both["visual_mass"] = {{{0.5, 0.5, 0.5}}};
    std::ofstream out(path);
    out << both.dump() << '\n';
  }
  CHECK_THROWS_AS(load_traces(path), ValidationError);
}

TEST_CASE("visual_mass schema branch loads without a full tensor") {
  ReasoningTrace m = make_trace(2, 2, 3, 4);
  m.visual_mass = derive_visual_mass(*m.attention, m.image_key_indices);
  m.attention.reset();
  const std::string path = temp_path("vskip_traces_mass.jsonl");
  save_traces({m}, path);
  const auto loaded = load_traces(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].visual_mass.has_value());
  CHECK(!loaded[0].attention.has_value());
  CHECK(loaded[0].visual_mass->layers == 2);
  CHECK(loaded[0].visual_mass->queries == 4);
}

TEST_CASE("compressed chains round-trip") {
  ReasoningTrace t = make_trace(1, 1, 2, 3);
  CompressedChain c;
  c.trace_id = t.trace_id;
  c.mask = {1, 0, 1};
  c.retained = {t.tokens[0], t.tokens[2]};
  c.actual_ratio = 2.0 / 3.0;

  const std::string path = temp_path("vskip_chains.jsonl");
  SUBCASE("single chain") {
    save_compressed({c}, path);
    const auto loaded = load_compressed(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].trace_id == "t0");
    CHECK(loaded[0].mask == c.mask);
    REQUIRE(loaded[0].retained.size() == 2);
    CHECK(loaded[0].retained[0].text == "w0");
    CHECK(loaded[0].retained[1].text == "w2");
    CHECK(loaded[0].actual_ratio == c.actual_ratio);
  }
  SUBCASE("empty list gives an empty file") {
    save_compressed({}, path);
    CHECK(std::filesystem::file_size(path) == 0);
    CHECK(load_compressed(path).empty());
  }
  SUBCASE("all-ones mask retains every token") {
    CompressedChain full;
    full.trace_id = t.trace_id;
    full.mask = {1, 1, 1};
    full.retained = t.tokens;
    full.actual_ratio = 1.0;
    save_compressed({full}, path);
    const auto loaded = load_compressed(path);
    REQUIRE(loaded.size() == 1);
    REQUIRE(loaded[0].retained.size() == t.tokens.size());
    for (std::size_t i = 0; i < t.tokens.size(); ++i)
      CHECK(loaded[0].retained[i].text == t.tokens[i].text);
  }
}

TEST_CASE("actual_ratio times T recovers the popcount") {
  Rng rng(123);
  for (int rep = 0; rep < 200; ++rep) {
    const int T = 1 + static_cast<int>(rng.bounded(40));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(T));
    long long ones = 0;
    for (auto& b : mask) {
      b = static_cast<std::uint8_t>(rng.bounded(2));
      ones += b;
    }
    const double ratio = static_cast<double>(ones) / T;
    CHECK(std::llround(ratio * T) == ones);
    CHECK(std::fabs(ratio * T - static_cast<double>(ones)) < 1e-9);
  }
}

TEST_CASE("random traces survive a save/load/save round trip byte-for-byte") {
  Rng rng(77);
  std::vector<ReasoningTrace> traces;
  for (int rep = 0; rep < 20; ++rep) {
    const int L = 1 + static_cast<int>(rng.bounded(3));
    const int H = 1 + static_cast<int>(rng.bounded(3));
    const int P = 1 + static_cast<int>(rng.bounded(4));
    const int T = 1 + static_cast<int>(rng.bounded(8));
    ReasoningTrace t = make_trace(L, H, P, T);
    t.trace_id = "rt-" + std::to_string(rep);
    for (TokenRecord& tok : t.tokens) tok.logprob = -rng.uniform(0.0, 5.0);
    if (rng.bounded(2)) {
      t.visual_mass = derive_visual_mass(*t.attention, t.image_key_indices);
      t.attention.reset();
    }
    if (rng.bounded(2)) t.attributes["color"] = {static_cast<int>(rng.bounded(static_cast<std::uint64_t>(T)))};
    REQUIRE(validate_trace(t).empty());
    traces.push_back(std::move(t));
  }
  const std::string p1 = temp_path("vskip_traces_prop1.jsonl");
  const std::string p2 = temp_path("vskip_traces_prop2.jsonl");
  save_traces(traces, p1);
  save_traces(load_traces(p1), p2);
  std::ifstream a(p1), b(p2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("loader reports invariant violations with the line number") {
  ReasoningTrace bad = make_trace(1, 1, 2, 3);
  bad.attention->at(0, 0, 1, 0) -= 0.3;  // break row normalization
  const std::string path = temp_path("vskip_traces_inv.jsonl");
  {
    std::ofstream out(path);
    out << trace_to_json(make_trace(1, 1, 2, 3)).dump() << '\n'
        << trace_to_json(bad).dump() << '\n';
  }
  try {
    load_traces(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find(":2") != std::string::npos);
    CHECK(what.find("row-normalization") != std::string::npos);
  }
}

TEST_CASE("loading a chain with an inconsistent ratio fails") {
  const std::string path = temp_path("vskip_chain_bad_ratio.jsonl");
  {
    std::ofstream out(path);
    out << R"({"trace_id":"x","mask":[1,0],"retained":["a"],"actual_ratio":0.9})" << '\n';
  }
  CHECK_THROWS_AS(load_compressed(path), ValidationError);
}

TEST_CASE("attribute positions out of range are flagged") {
  ReasoningTrace t = make_trace(1, 1, 2, 3);
  t.attributes["color"] = {0, 3};
  bool found = false;
  for (const Violation& v : validate_trace(t))
    if (v.field == "attributes") found = true;
  CHECK(found);
}
