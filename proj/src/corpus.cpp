#include "seqclass/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "seqclass/tensor.hpp"

namespace seqclass {

namespace {

// Decodes the UTF-8 sequence starting at s[i]. Returns its byte length and
// stores the codepoint, or returns 0 on malformed input.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[i + k]); };
  const unsigned char b0 = b(0);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  auto cont = [&](std::size_t k, unsigned char lo, unsigned char hi) {
    return i + k < s.size() && b(k) >= lo && b(k) <= hi;
  };
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    if (!cont(1, 0x80, 0xBF)) return 0;
    cp = (char32_t(b0 & 0x1F) << 6) | (b(1) & 0x3F);
    return 2;
  }
  if (b0 >= 0xE0 && b0 <= 0xEF) {
    const unsigned char lo1 = b0 == 0xE0 ? 0xA0 : 0x80;
    const unsigned char hi1 = b0 == 0xED ? 0x9F : 0xBF;
    if (!cont(1, lo1, hi1) || !cont(2, 0x80, 0xBF)) return 0;
    cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(b(1) & 0x3F) << 6) | (b(2) & 0x3F);
    return 3;
  }
  if (b0 >= 0xF0 && b0 <= 0xF4) {
    const unsigned char lo1 = b0 == 0xF0 ? 0x90 : 0x80;
    const unsigned char hi1 = b0 == 0xF4 ? 0x8F : 0xBF;
    if (!cont(1, lo1, hi1) || !cont(2, 0x80, 0xBF) || !cont(3, 0x80, 0xBF)) return 0;
    cp = (char32_t(b0 & 0x07) << 18) | (char32_t(b(1) & 0x3F) << 12) |
         (char32_t(b(2) & 0x3F) << 6) | (b(3) & 0x3F);
    return 4;
  }
  return 0;
}

bool is_space_cp(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_ascii_punct(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
         (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  return out;
}

bool has_scheme_prefix(std::string_view s) {
  const std::size_t pos = s.find("://");
  if (pos == std::string_view::npos || pos == 0) return false;
  if (!(s[0] >= 'a' && s[0] <= 'z')) return false;
  for (std::size_t i = 1; i < pos; ++i) {
    const char c = s[i];
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '+' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

void emit_span(std::string_view span, std::vector<std::string>& out) {
  std::string low = ascii_lower(span);
  const bool mention = (low[0] == '@' || low[0] == '#') && low.size() > 1;
  const bool url = low.rfind("www.", 0) == 0 || has_scheme_prefix(low);
  if (mention || url) {
    out.push_back(std::move(low));
    return;
  }
  std::string word;
  std::size_t i = 0;
  while (i < low.size()) {
    char32_t cp = 0xFFFD;
    std::size_t len = decode_utf8(low, i, cp);
    if (len == 0) {
      len = 1;  // malformed byte; ingestion is responsible for rejecting these
      cp = 0xFFFD;
    }
    if (is_ascii_punct(cp)) {
      if (!word.empty()) out.push_back(std::exchange(word, {}));
      out.emplace_back(1, static_cast<char>(cp));
    } else {
      word.append(low, i, len);
    }
    i += len;
  }
  if (!word.empty()) out.push_back(std::move(word));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0xFFFD;
    const std::size_t len = decode_utf8(text, i, cp);
    if (len != 0 && is_space_cp(cp)) {
      i += len;
      continue;
    }
    const std::size_t begin = i;
    while (i < text.size()) {
      char32_t sp = 0xFFFD;
      const std::size_t l = decode_utf8(text, i, sp);
      if (l == 0) {
        i += 1;  // malformed byte; ingestion is responsible for rejecting these
        continue;
      }
      if (is_space_cp(sp)) break;
      i += l;
    }
    emit_span(text.substr(begin, i - begin), out);
  }
  return out;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    char32_t cp;
    const std::size_t len = decode_utf8(s, i, cp);
    if (len == 0) return false;
    i += len;
  }
  return true;
}

Vocabulary::Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> entries)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [token, freq] = entries_[i];
    if (token.empty())
      throw std::invalid_argument("vocabulary: empty token at index " +
                                  std::to_string(i + 1));
    for (char c : token)
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
        throw std::invalid_argument("vocabulary: token contains whitespace: '" +
                                    token + "'");
    if (i > 0) {
      const auto& [prev, prev_freq] = entries_[i - 1];
      if (freq > prev_freq || (freq == prev_freq && token < prev))
        throw std::invalid_argument(
            "vocabulary: entries not in canonical (frequency desc, token asc) "
            "order at index " + std::to_string(i + 1));
    }
  }
  rebuild_index();
  if (index_.size() != entries_.size())
    throw std::invalid_argument("vocabulary: duplicate token");
}

void Vocabulary::rebuild_index() {
  index_.clear();
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i)
    index_.emplace(entries_[i].first, static_cast<std::uint32_t>(i + 1));
}

std::uint32_t Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? oov_index() : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(token) != index_.end();
}

const std::string& Vocabulary::token_at(std::uint32_t index) const {
  if (index == 0 || index > entries_.size())
    throw std::invalid_argument("vocabulary: index " + std::to_string(index) +
                                " out of range [1, " +
                                std::to_string(entries_.size()) + "]");
  return entries_[index - 1].first;
}

std::uint64_t Vocabulary::frequency_at(std::uint32_t index) const {
  if (index == 0 || index > entries_.size())
    throw std::invalid_argument("vocabulary: index out of range");
  return entries_[index - 1].second;
}

std::string Vocabulary::to_tsv() const {
  std::string out = "#V=" + std::to_string(entries_.size()) + "\n";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    out += entries_[i].first;
    out += '\t';
    out += std::to_string(i + 1);
    out += '\t';
    out += std::to_string(entries_[i].second);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::uint64_t parse_u64_field(std::string_view field, std::size_t line_no,
                              const char* what) {
  std::uint64_t value = 0;
  if (field.empty())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": empty " + what);
  for (char c : field) {
    if (c < '0' || c > '9')
      throw std::invalid_argument("line " + std::to_string(line_no) + ": bad " +
                                  what + " '" + std::string(field) + "'");
    value = value * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return value;
}

}  // namespace

Vocabulary Vocabulary::from_tsv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0].rfind("#V=", 0) != 0)
    throw std::invalid_argument("vocabulary tsv: missing #V= header");
  const std::uint64_t declared = parse_u64_field(lines[0].substr(3), 1, "size");
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos
                               ? std::string_view::npos
                               : line.find('\t', t1 + 1);
    if (t1 == std::string_view::npos || t2 == std::string_view::npos)
      throw std::invalid_argument("line " + std::to_string(li + 1) +
                                  ": expected token<TAB>index<TAB>frequency");
    const std::uint64_t index = parse_u64_field(line.substr(t1 + 1, t2 - t1 - 1),
                                                li + 1, "index");
    const std::uint64_t freq = parse_u64_field(line.substr(t2 + 1), li + 1,
                                               "frequency");
    if (index != entries.size() + 1)
      throw std::invalid_argument("line " + std::to_string(li + 1) +
                                  ": index out of order");
    entries.emplace_back(std::string(line.substr(0, t1)), freq);
  }
  if (entries.size() != declared)
    throw std::invalid_argument("vocabulary tsv: header declares " +
                                std::to_string(declared) + " entries, found " +
                             std::to_string(entries.size()));
  return Vocabulary(std::move(entries));
}

void Vocabulary::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string text = to_tsv();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_tsv(buf.str());
}

Vocabulary build_vocabulary(const Dataset& corpus, std::size_t max_size) {
  if (max_size < 1) throw std::invalid_argument("vocabulary size must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& ex : corpus.examples)
    for (auto& tok : tokenize(ex.text)) counts[std::move(tok)] += 1;
  if (counts.empty()) throw std::invalid_argument("corpus has no tokens");
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  ranked.reserve(counts.size());
  for (auto& [tok, n] : counts) ranked.emplace_back(tok, n);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  return Vocabulary(std::move(ranked));
}

EncodedMessage encode(const std::vector<std::string>& tokens,
                      const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  EncodedMessage msg;
  msg.original_len = tokens.size();
  msg.indices.assign(max_len, Vocabulary::kPadIndex);
  const std::size_t kept = std::min(tokens.size(), max_len);
  const std::size_t offset = max_len - kept;
  for (std::size_t i = 0; i < kept; ++i)
    msg.indices[offset + i] = vocab.index_of(tokens[i]);
  return msg;
}

Dataset balanced_sample(const Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.size(); ++i)
    (data.examples[i].label == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw std::invalid_argument("class missing");
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  const std::size_t n = std::min(pos.size(), neg.size());
  std::vector<std::size_t> picked(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n));
  picked.insert(picked.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n));
  rng.shuffle(picked);
  Dataset out;
  out.provenance = data.provenance + ":balanced";
  out.examples.reserve(picked.size());
  for (std::size_t i : picked) out.examples.push_back(data.examples[i]);
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must be in (0, 1)");
  if (data.size() < 2)
    throw std::invalid_argument("split needs at least 2 examples");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  // Tiny nudge so decimal fractions like 0.7 floor to their exact value.
  const auto train_n = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(data.size()) + 1e-9));
  Dataset train, test;
  train.provenance = data.provenance + ":train";
  test.provenance = data.provenance + ":test";
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < train_n ? train : test).examples.push_back(data.examples[order[i]]);
  return {std::move(train), std::move(test)};
}

namespace {

bool is_language_tag(std::string_view s) {
  return s.size() == 2 && s[0] >= 'a' && s[0] <= 'z' && s[1] >= 'a' && s[1] <= 'z';
}

}  // namespace

Dataset load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  Dataset out;
  out.provenance = path.string();
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (line.empty()) continue;
    if (!valid_utf8(line))
      throw std::invalid_argument("line " + std::to_string(li + 1) +
                                  ": invalid UTF-8");
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw std::invalid_argument("line " + std::to_string(li + 1) +
                                  ": expected label<TAB>text");
    const std::string_view label_field = line.substr(0, tab);
    if (label_field != "0" && label_field != "1")
      throw std::invalid_argument("line " + std::to_string(li + 1) +
                                  ": label must be 0 or 1, got '" +
                                  std::string(label_field) + "'");
    LabeledExample ex;
    ex.label = label_field == "1" ? 1 : 0;
    std::string_view rest = line.substr(tab + 1);
    const std::size_t tab2 = rest.find('\t');
    if (tab2 != std::string_view::npos && is_language_tag(rest.substr(0, tab2))) {
      ex.language = std::string(rest.substr(0, tab2));
      rest = rest.substr(tab2 + 1);
    }
    ex.text = std::string(rest);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

void save_tsv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::string buf;
  for (const auto& ex : data.examples) {
    if (!ex.language.empty() && !is_language_tag(ex.language))
      throw std::invalid_argument("language tag must be two lowercase letters: '" +
                                  ex.language + "'");
    buf += ex.label == 1 ? '1' : '0';
    buf += '\t';
    if (!ex.language.empty()) {
      buf += ex.language;
      buf += '\t';
    }
    // Tabs and newlines are field/row separators; normalize them away.
    for (char c : ex.text) buf += (c == '\t' || c == '\n' || c == '\r') ? ' ' : c;
    buf += '\n';
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SyntheticTask synthetic_task_from_string(std::string_view s) {
  if (s == "keyword") return SyntheticTask::keyword;
  if (s == "order") return SyntheticTask::order;
  throw std::invalid_argument("unknown synthetic task '" + std::string(s) + "'");
}

const std::vector<std::string>& keyword_triggers() {
  static const std::vector<std::string> triggers = {"help", "refund", "outage",
                                                    "broken", "urgent"};
  return triggers;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string filler_token(Rng& rng, std::size_t vocab_size) {
  return "w" + std::to_string(rng.below(vocab_size));
}

Dataset gen_keyword(std::size_t n, std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  const auto& triggers = keyword_triggers();
  Dataset out;
  out.examples.reserve(n);
  const std::size_t n_pos = n / 2;
  for (std::size_t e = 0; e < n; ++e) {
    const int label = e < n_pos ? 1 : 0;
    const std::size_t len = 5 + rng.below(16);  // 5..20 tokens
    std::vector<std::string> tokens;
    tokens.reserve(len);
    for (std::size_t i = 0; i < len; ++i)
      tokens.push_back(filler_token(rng, vocab_size));
    if (label == 1)
      tokens[rng.below(len)] = triggers[rng.below(triggers.size())];
    out.examples.push_back({label, join_tokens(tokens), ""});
  }
  rng.shuffle(out.examples);
  return out;
}

Dataset gen_order(std::size_t n, std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  Dataset out;
  // Mirrored pairs share fillers, so per-class token multisets are equal by
  // construction; an odd n is rounded down to keep the pairing exact.
  const std::size_t pairs = n / 2;
  out.examples.reserve(pairs * 2);
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t fillers = 5 + rng.below(14);  // total length 7..20
    const std::size_t len = fillers + 2;
    std::vector<std::string> base(len);
    std::size_t p1 = rng.below(len);
    std::size_t p2 = rng.below(len - 1);
    if (p2 >= p1) ++p2;
    const std::size_t lo = std::min(p1, p2), hi = std::max(p1, p2);
    for (std::size_t i = 0; i < len; ++i)
      if (i != lo && i != hi) base[i] = filler_token(rng, vocab_size);
    std::vector<std::string> forward = base;
    forward[lo] = "alpha";
    forward[hi] = "beta";
    std::vector<std::string> reversed = base;
    reversed[lo] = "beta";
    reversed[hi] = "alpha";
    out.examples.push_back({1, join_tokens(forward), ""});
    out.examples.push_back({0, join_tokens(reversed), ""});
  }
  rng.shuffle(out.examples);
  return out;
}

}  // namespace

Dataset gen_synthetic(SyntheticTask task, std::size_t n, std::size_t vocab_size,
                      std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("synthetic corpus needs n >= 2");
  if (vocab_size < 10)
    throw std::invalid_argument("synthetic corpus needs vocab_size >= 10");
  Dataset out = task == SyntheticTask::keyword ? gen_keyword(n, vocab_size, seed)
                                               : gen_order(n, vocab_size, seed);
  out.provenance = std::string("gen:") +
                   (task == SyntheticTask::keyword ? "keyword" : "order") +
                   ":n=" + std::to_string(n) + ":vocab=" + std::to_string(vocab_size) +
                   ":seed=" + std::to_string(seed);
  return out;
}

}  // namespace seqclass
