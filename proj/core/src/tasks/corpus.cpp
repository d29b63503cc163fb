#include "lottery/tasks/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "lottery/errors.hpp"
#include "lottery/numerics/rng.hpp"

namespace lottery {

namespace {

const char* const kReservedNames[kReserved] = {"[PAD]", "[MASK]", "[CLS]", "[SEP]", "[UNK]"};

std::vector<double> dirichlet(Rng& rng, std::size_t n, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> out(n);
  double sum = 0.0;
  for (double& v : out) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    out.assign(n, 1.0 / static_cast<double>(n));
    return out;
  }
  for (double& v : out) {
    v /= sum;
  }
  return out;
}

}  // namespace

Vocab::Vocab() {
  for (const char* name : kReservedNames) {
    ids_.emplace(name, static_cast<std::uint32_t>(tokens_.size()));
    tokens_.emplace_back(name);
  }
}

Vocab::Vocab(const std::vector<std::string>& tokens) : Vocab() {
  for (const auto& t : tokens) {
    if (ids_.count(t) != 0) {
      throw IngestionError("duplicate vocab token '" + t + "'");
    }
    ids_.emplace(t, static_cast<std::uint32_t>(tokens_.size()));
    tokens_.push_back(t);
  }
}

Vocab Vocab::synthetic(std::size_t size) {
  if (size <= kReserved) {
    throw ConfigError("vocab size must exceed the " + std::to_string(kReserved) + " reserved ids");
  }
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i + kReserved < size; ++i) {
    tokens.push_back("t" + std::to_string(i));
  }
  return Vocab(tokens);
}

const std::string& Vocab::token(std::uint32_t id) const {
  if (id >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocab of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::uint32_t Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

void GeneratorSpec::validate() const {
  if (states == 0) {
    throw ConfigError("generator needs at least one hidden state");
  }
  if (vocab <= kReserved) {
    throw ConfigError("generator vocab must exceed the reserved ids");
  }
  if (chains == 0) {
    throw ConfigError("generator needs at least one chain");
  }
  if (min_length == 0 || max_length < min_length) {
    throw ConfigError("generator length range is empty");
  }
  if (!(transition_concentration > 0.0) || !(emission_concentration > 0.0) || self_transition < 0.0) {
    throw ConfigError("generator concentrations must be positive");
  }
}

std::string GeneratorSpec::canonical() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "hmm{K=%zu,V=%zu,C=%zu,shared=%d,len=%zu-%zu,a=%.17g,b=%.17g,self=%.17g,seed=%llu}",
                states, vocab, chains, shared_emissions ? 1 : 0, min_length, max_length,
                transition_concentration, emission_concentration, self_transition,
                static_cast<unsigned long long>(seed));
  return buf;
}

std::vector<double> HmmFamily::stationary(std::size_t chain) const {
  const Hmm& h = chains.at(chain);
  const std::size_t k = h.initial.size();
  std::vector<double> p(k, 1.0 / static_cast<double>(k));
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<double> q(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        q[j] += p[i] * h.transition[i][j];
      }
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      diff += std::abs(q[j] - p[j]);
    }
    p = std::move(q);
    if (diff < 1e-15) {
      break;
    }
  }
  return p;
}

HmmFamily build_family(const GeneratorSpec& spec) {
  spec.validate();
  HmmFamily f;
  f.spec = spec;
  Rng rng = Rng::substream(spec.seed, "hmm-params");
  const std::size_t k = spec.states;
  const std::size_t symbols = spec.vocab - kReserved;
  std::vector<std::vector<double>> shared;
  if (spec.shared_emissions) {
    for (std::size_t s = 0; s < k; ++s) {
      shared.push_back(dirichlet(rng, symbols, spec.emission_concentration));
    }
  }
  for (std::size_t c = 0; c < spec.chains; ++c) {
    Hmm h;
    h.initial = dirichlet(rng, k, 1.0);
    for (std::size_t s = 0; s < k; ++s) {
      std::vector<double> row = dirichlet(rng, k, spec.transition_concentration);
      if (spec.self_transition > 0.0) {
        row[s] += spec.self_transition;
        for (double& v : row) {
          v /= 1.0 + spec.self_transition;
        }
      }
      h.transition.push_back(std::move(row));
    }
    h.emission = spec.shared_emissions ? shared : std::vector<std::vector<double>>{};
    if (!spec.shared_emissions) {
      for (std::size_t s = 0; s < k; ++s) {
        h.emission.push_back(dirichlet(rng, symbols, spec.emission_concentration));
      }
    }
    f.chains.push_back(std::move(h));
  }
  return f;
}

Corpus gen_corpus(const HmmFamily& family, std::size_t n, const std::string& stream) {
  if (n == 0) {
    throw ArgumentError("corpus needs at least one sequence");
  }
  const GeneratorSpec& spec = family.spec;
  Corpus c;
  c.spec = spec;
  c.vocab = Vocab::synthetic(spec.vocab);
  Rng rng = Rng::substream(spec.seed, "sample:" + stream);
  c.sequences.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    GeneratedSequence s;
    s.chain = static_cast<std::uint32_t>(rng.below(spec.chains));
    const Hmm& h = family.chains[s.chain];
    const std::size_t len =
        spec.min_length + static_cast<std::size_t>(rng.below(spec.max_length - spec.min_length + 1));
    std::size_t state = rng.categorical(h.initial);
    for (std::size_t t = 0; t < len; ++t) {
      if (t > 0) {
        state = rng.categorical(h.transition[state]);
      }
      s.states.push_back(static_cast<std::uint32_t>(state));
      s.tokens.push_back(static_cast<std::uint32_t>(kReserved + rng.categorical(h.emission[state])));
    }
    c.sequences.push_back(std::move(s));
  }
  return c;
}

Corpus gen_corpus(const GeneratorSpec& spec, std::size_t n, const std::string& stream) {
  return gen_corpus(build_family(spec), n, stream);
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot read vocab '" + path.string() + "'");
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      tokens.push_back(line);
    }
  }
  if (tokens.empty()) {
    throw IngestionError("vocab '" + path.string() + "' is empty");
  }
  return Vocab(tokens);
}

TextCorpus load_text_corpus(const std::filesystem::path& corpus_path,
                            const std::filesystem::path& vocab_path, std::size_t max_seq_len) {
  if (max_seq_len < 2) {
    throw ArgumentError("max_seq_len must leave room for [CLS] and one token");
  }
  TextCorpus out;
  out.vocab = load_vocab(vocab_path);
  std::ifstream in(corpus_path);
  if (!in) {
    throw IngestionError("cannot read corpus '" + corpus_path.string() + "'");
  }
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::vector<std::uint32_t> seq{kCls};
    std::string w;
    bool any = false;
    while (words >> w) {
      any = true;
      const std::uint32_t id = out.vocab.id(w);
      out.unknown_tokens += id == kUnk ? 1 : 0;
      if (seq.size() < max_seq_len) {
        seq.push_back(id);
      } else if (seq.size() == max_seq_len) {
        ++out.truncated;
        seq.push_back(kPad);  // sentinel, removed below
      }
    }
    if (!any) {
      ++out.skipped_empty;
      continue;
    }
    if (seq.size() > max_seq_len) {
      seq.pop_back();
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

}  // namespace lottery
