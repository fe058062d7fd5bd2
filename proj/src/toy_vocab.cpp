#include "vskip/toy_vocab.hpp"

#include <charconv>

namespace vskip::toyvocab {

std::string token_text(int id) {
  if (id == kBos) return "<s>";
  if (id >= kQuestionBegin && id < kQuestionEnd) return "q" + std::to_string(id - kQuestionBegin + 1);
  if (is_anchor(id)) return "A" + std::to_string(id - kAnchorBegin);
  if (is_op(id)) return "OP" + std::to_string(id - kOpBegin);
  if (id >= kFillerBegin && id < kFillerEnd) return "f" + std::to_string(id - kFillerBegin);
  return "t" + std::to_string(id);
}

namespace {

int parse_suffix(const std::string& word, std::size_t prefix_len) {
  int n = -1;
  const char* b = word.data() + prefix_len;
  const char* e = word.data() + word.size();
  auto res = std::from_chars(b, e, n);
  if (res.ec != std::errc{} || res.ptr != e) return -1;
  return n;
}

}  // namespace

int id_from_text(const std::string& word) {
  if (word == "<s>") return kBos;
  if (word.size() < 2) return -1;
  if (word[0] == 'q') {
    const int n = parse_suffix(word, 1);
    const int id = kQuestionBegin + n - 1;
    return (n >= 1 && id < kQuestionEnd) ? id : -1;
  }
  if (word[0] == 'A') {
    const int n = parse_suffix(word, 1);
    const int id = kAnchorBegin + n;
    return (n >= 0 && id < kAnchorEnd) ? id : -1;
  }
  if (word.size() > 2 && word[0] == 'O' && word[1] == 'P') {
    const int n = parse_suffix(word, 2);
    const int id = kOpBegin + n;
    return (n >= 0 && id < kOpEnd) ? id : -1;
  }
  if (word[0] == 'f') {
    const int n = parse_suffix(word, 1);
    const int id = kFillerBegin + n;
    return (n >= 0 && id < kFillerEnd) ? id : -1;
  }
  if (word[0] == 't') {
    const int n = parse_suffix(word, 1);
    return n >= 0 ? n : -1;
  }
  return -1;
}

}  // namespace vskip::toyvocab
