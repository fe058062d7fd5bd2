#include "vskip/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "vskip/errors.hpp"

namespace vskip {

namespace {

// Decodes UTF-8 into scalar values; malformed bytes pass through one at a
// time so the metric is total over arbitrary input.
std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = b0;
    if ((b0 & 0x80u) == 0x00u) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0u) == 0xC0u) {
      len = 2;
      cp = b0 & 0x1Fu;
    } else if ((b0 & 0xF0u) == 0xE0u) {
      len = 3;
      cp = b0 & 0x0Fu;
    } else if ((b0 & 0xF8u) == 0xF0u) {
      len = 4;
      cp = b0 & 0x07u;
    }
    if (i + len > s.size()) len = 1, cp = b0;
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const unsigned char bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((bk & 0xC0u) != 0x80u) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (bk & 0x3Fu);
    }
    if (!ok) {
      len = 1;
      cp = b0;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

}  // namespace

std::string canonical_answer(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double top1_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& golds) {
  if (preds.size() != golds.size()) throw DomainError("prediction/gold length mismatch");
  if (preds.empty()) throw DomainError("empty prediction list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (canonical_answer(preds[i]) == canonical_answer(golds[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::size_t levenshtein(std::string_view p, std::string_view g) {
  const std::vector<char32_t> a = decode_utf8(p);
  const std::vector<char32_t> b = decode_utf8(g);
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double anls_pair(std::string_view p, std::string_view g, double tau) {
  const std::size_t lp = decode_utf8(p).size();
  const std::size_t lg = decode_utf8(g).size();
  const std::size_t M = std::max(lp, lg);
  if (M == 0) return 1.0;  // both empty: distance 0, identical
  const double d = static_cast<double>(levenshtein(p, g));
  if (d >= tau * static_cast<double>(M)) return 0.0;
  return 1.0 - d / static_cast<double>(M);
}

double act_ratio(const std::vector<int>& compressed_lengths,
                 const std::vector<int>& original_lengths) {
  if (compressed_lengths.size() != original_lengths.size())
    throw DomainError("length-list mismatch");
  long long num = 0, den = 0;
  for (int c : compressed_lengths) num += c;
  for (int o : original_lengths) {
    if (o <= 0) throw DomainError("original lengths must be positive");
    den += o;
  }
  if (den == 0) throw DomainError("zero total original length");
  return static_cast<double>(num) / static_cast<double>(den);
}

double avg_tokens(const std::vector<int>& lengths) {
  if (lengths.empty()) throw DomainError("empty length list");
  long long sum = 0;
  for (int v : lengths) sum += v;
  return static_cast<double>(sum) / static_cast<double>(lengths.size());
}

std::map<std::string, double> varr(
    const std::vector<std::vector<std::uint8_t>>& masks,
    const std::vector<std::map<std::string, std::vector<int>>>& attributes) {
  if (masks.size() != attributes.size()) throw DomainError("masks/attributes length mismatch");
  std::map<std::string, std::pair<long long, long long>> counts;  // retained, total
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (const auto& [category, positions] : attributes[i]) {
      auto& [retained, total] = counts[category];
      for (int p : positions) {
        if (p < 0 || static_cast<std::size_t>(p) >= masks[i].size())
          throw DomainError("attribute position out of mask range: " + std::to_string(p));
        ++total;
        retained += masks[i][static_cast<std::size_t>(p)];
      }
    }
  }
  std::map<std::string, double> out;
  for (const auto& [category, rt] : counts)
    if (rt.second > 0)
      out[category] = 100.0 * static_cast<double>(rt.first) / static_cast<double>(rt.second);
  return out;
}

PopeStats pope_stats(const std::vector<bool>& pred_yes, const std::vector<bool>& label_yes) {
  if (pred_yes.size() != label_yes.size()) throw DomainError("pred/label length mismatch");
  if (pred_yes.empty()) throw DomainError("empty prediction list");
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred_yes.size(); ++i) {
    if (pred_yes[i] && label_yes[i]) ++tp;
    else if (pred_yes[i] && !label_yes[i]) ++fp;
    else if (!pred_yes[i] && label_yes[i]) ++fn;
    else ++tn;
  }
  const double n = static_cast<double>(pred_yes.size());
  PopeStats s;
  s.yes_ratio = static_cast<double>(tp + fp) / n;
  s.accuracy = static_cast<double>(tp + tn) / n;
  s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace vskip
