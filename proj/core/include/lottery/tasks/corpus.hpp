#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lottery {

inline constexpr std::uint32_t kPad = 0;
inline constexpr std::uint32_t kMask = 1;
inline constexpr std::uint32_t kCls = 2;
inline constexpr std::uint32_t kSep = 3;
inline constexpr std::uint32_t kUnk = 4;
inline constexpr std::uint32_t kReserved = 5;

inline bool is_special(std::uint32_t id) noexcept {
  return id == kPad || id == kCls || id == kSep || id == kMask;
}

/// Token strings and ids; the first kReserved ids are [PAD] [MASK] [CLS] [SEP] [UNK].
class Vocab {
 public:
  Vocab();
  // Ordinary tokens get ids kReserved, kReserved + 1, ... in order.
  explicit Vocab(const std::vector<std::string>& tokens);
  static Vocab synthetic(std::size_t size);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::uint32_t id) const;
  // Unknown tokens map to kUnk.
  std::uint32_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::uint32_t> ids_;
};

/// Hidden-Markov generator family. Each chain has its own transition matrix;
/// emissions are per chain unless shared.
struct GeneratorSpec {
  std::size_t states = 8;             // K
  std::size_t vocab = 64;             // V, including the reserved ids
  std::size_t chains = 4;
  bool shared_emissions = false;
  std::size_t min_length = 6;
  std::size_t max_length = 20;
  double transition_concentration = 0.2;
  double emission_concentration = 0.1;
  double self_transition = 0.0;       // extra mass added to the diagonal before normalizing
  std::uint64_t seed = 1;

  void validate() const;
  std::string canonical() const;
};

struct Hmm {
  std::vector<double> initial;                 // [K]
  std::vector<std::vector<double>> transition; // [K][K]
  std::vector<std::vector<double>> emission;   // [K][V - kReserved]
};

struct HmmFamily {
  GeneratorSpec spec;
  std::vector<Hmm> chains;

  // Stationary state distribution of one chain (power iteration).
  std::vector<double> stationary(std::size_t chain) const;
};

// Deterministic in spec.seed.
HmmFamily build_family(const GeneratorSpec& spec);

struct GeneratedSequence {
  std::vector<std::uint32_t> tokens;  // ordinary tokens only, no [CLS]
  std::vector<std::uint32_t> states;
  std::uint32_t chain = 0;
};

struct Corpus {
  GeneratorSpec spec;
  Vocab vocab;
  std::vector<GeneratedSequence> sequences;
};

// Samples n sequences; `stream` names an independent sampling substream so
// several corpora can share one family.
Corpus gen_corpus(const HmmFamily& family, std::size_t n, const std::string& stream = "corpus");
Corpus gen_corpus(const GeneratorSpec& spec, std::size_t n, const std::string& stream = "corpus");

struct TextCorpus {
  Vocab vocab;
  std::vector<std::vector<std::uint32_t>> sequences;  // [CLS] + tokens, truncated
  std::size_t skipped_empty = 0;
  std::size_t truncated = 0;
  std::size_t unknown_tokens = 0;
};

// One token per line for the vocab; one whitespace-tokenized document per line.
Vocab load_vocab(const std::filesystem::path& path);
TextCorpus load_text_corpus(const std::filesystem::path& corpus_path,
                            const std::filesystem::path& vocab_path, std::size_t max_seq_len);

}  // namespace lottery
