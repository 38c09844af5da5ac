#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seqclass {

// Splits on Unicode whitespace, lowercases (ASCII range), and separates each
// punctuation character into its own token. Whitespace-delimited spans that
// are @mentions, #hashtags, or URLs (scheme:// or www. prefix) stay whole.
std::vector<std::string> tokenize(std::string_view text);

bool valid_utf8(std::string_view s);

// Frequency-ranked token table. Index 0 is reserved for padding and index
// size()+1 for out-of-vocabulary tokens; real tokens occupy 1..size() in
// descending frequency order, ties broken by ascending byte order.
class Vocabulary {
 public:
  static constexpr std::uint32_t kPadIndex = 0;

  Vocabulary() = default;
  // entries[i] = (token, frequency) for index i+1. Validates the ordering
  // invariants and rejects duplicates, empty tokens, and embedded whitespace.
  explicit Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint32_t oov_index() const { return static_cast<std::uint32_t>(size() + 1); }

  // Returns the token's index, or oov_index() if absent.
  std::uint32_t index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token_at(std::uint32_t index) const;  // index in 1..size()
  std::uint64_t frequency_at(std::uint32_t index) const;

  std::string to_tsv() const;
  static Vocabulary from_tsv(std::string_view text);
  void save_tsv(const std::filesystem::path& path) const;
  static Vocabulary load_tsv(const std::filesystem::path& path);

 private:
  struct TransparentHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view sv) const {
      return std::hash<std::string_view>{}(sv);
    }
  };

  std::vector<std::pair<std::string, std::uint64_t>> entries_;
  std::unordered_map<std::string, std::uint32_t, TransparentHash, std::equal_to<>>
      index_;

  void rebuild_index();
};

struct LabeledExample {
  int label = 0;  // 0 or 1
  std::string text;
  std::string language;  // optional ISO-639-1 tag, empty when absent

  bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  std::string provenance;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

Vocabulary build_vocabulary(const Dataset& corpus, std::size_t max_size);

struct EncodedMessage {
  std::vector<std::uint32_t> indices;  // exactly max_len entries
  std::size_t original_len = 0;        // token count before padding/truncation
};

EncodedMessage encode(const std::vector<std::string>& tokens,
                      const Vocabulary& vocab, std::size_t max_len);

// Equal-sized uniform draw from both classes, then a seeded shuffle.
Dataset balanced_sample(const Dataset& data, std::uint64_t seed);

// Seeded shuffle then partition; train size = floor(train_fraction * n).
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed);

// Rows are `label<TAB>text` or `label<TAB>lang<TAB>text`, UTF-8, LF endings.
Dataset load_tsv(const std::filesystem::path& path);
void save_tsv(const Dataset& data, const std::filesystem::path& path);

enum class SyntheticTask { keyword, order };

SyntheticTask synthetic_task_from_string(std::string_view s);

// keyword: label 1 iff the message contains one of keyword_triggers();
// messages are 5-20 uniform filler tokens with a trigger injected into half
// the examples. order: every message contains "alpha" and "beta" exactly once
// amid fillers; label 1 iff alpha precedes beta. Generated as mirrored pairs
// sharing fillers, so both classes have identical bag-of-words distributions.
Dataset gen_synthetic(SyntheticTask task, std::size_t n, std::size_t vocab_size,
                      std::uint64_t seed);

const std::vector<std::string>& keyword_triggers();

}  // namespace seqclass
