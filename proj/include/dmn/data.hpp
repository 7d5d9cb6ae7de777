#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dmn/errors.hpp"
#include "dmn/nn.hpp"

namespace dmn {

// ---------------------------------------------------------------------------
// Stories in the numbered-line QA text format:
//   <id> <statement tokens>
//   <id> <question tokens>\t<answer>\t<supporting line ids>
// An id restarting at 1 begins a new block; every question closes one story
// over all statements seen so far in its block.
// ---------------------------------------------------------------------------

struct Fact {
  int line = 0;                     // line id within the story block
  std::vector<std::string> tokens;

  bool operator==(const Fact&) const = default;
};

struct Story {
  std::vector<Fact> facts;
  std::vector<std::string> question;
  std::vector<std::string> answer;
  std::vector<int> supporting;      // fact line ids, in dataset order

  bool operator==(const Story&) const = default;

  // Position of a supporting line id among this story's facts.
  std::size_t fact_ordinal(int line) const {
    for (std::size_t i = 0; i < facts.size(); ++i) {
      if (facts[i].line == line) return i;
    }
    throw IndexError("no fact with line id " + std::to_string(line));
  }
};

// Lowercases, splits on whitespace, and splits punctuation into separate
// tokens.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.push_back(std::string(1, raw));
    }
  }
  flush();
  return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

// Comma-separated answer field ("garden" or "football,apple").
inline std::vector<std::string> parse_answer_field(const std::string& field) {
  std::vector<std::string> out;
  for (auto& part : detail::split(field, ',')) {
    auto t = detail::trim(detail::lower(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline std::vector<Story> parse_babi(const std::string& text) {
  std::vector<Story> stories;
  std::vector<Fact> block;
  std::istringstream in(text);
  std::string line;
  int file_line = 0;
  while (std::getline(in, line)) {
    ++file_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;

    std::size_t sp = line.find_first_of(" \t");
    const std::string id_text = line.substr(0, sp);
    if (id_text.empty() ||
        !std::all_of(id_text.begin(), id_text.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
      throw ParseError("line " + std::to_string(file_line) +
                       ": expected a numeric line id, got '" + id_text + "'");
    }
    const int id = std::stoi(id_text);
    if (id == 1) block.clear();
    const std::string rest =
        sp == std::string::npos ? std::string() : line.substr(sp + 1);

    if (rest.find('\t') == std::string::npos) {
      auto tokens = tokenize(rest);
      if (tokens.empty()) {
        throw ParseError("line " + std::to_string(file_line) +
                         ": empty statement");
      }
      if (tokens.back() == "?") {
        throw ParseError("line " + std::to_string(file_line) +
                         ": question line is missing its tab-separated"
                         " answer field");
      }
      block.push_back(Fact{id, std::move(tokens)});
      continue;
    }

    auto fields = detail::split(rest, '\t');
    if (fields.size() < 2) {
      throw ParseError("line " + std::to_string(file_line) +
                       ": question line needs an answer field");
    }
    Story story;
    story.facts = block;
    story.question = tokenize(fields[0]);
    story.answer = parse_answer_field(fields[1]);
    if (story.question.empty()) {
      throw ParseError("line " + std::to_string(file_line) + ": empty question");
    }
    if (story.answer.empty()) {
      throw ParseError("line " + std::to_string(file_line) + ": empty answer");
    }
    if (fields.size() >= 3 && !detail::trim(fields[2]).empty()) {
      std::istringstream ids(fields[2]);
      std::string tok;
      while (ids >> tok) {
        if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
              return std::isdigit(c);
            })) {
          throw ParseError("line " + std::to_string(file_line) +
                           ": bad supporting id '" + tok + "'");
        }
        story.supporting.push_back(std::stoi(tok));
      }
    }
    for (int sid : story.supporting) {
      bool found = false;
      for (const auto& f : story.facts) found |= (f.line == sid);
      if (!found) {
        throw ParseError("line " + std::to_string(file_line) +
                         ": supporting id " + std::to_string(sid) +
                         " does not name a statement in this block");
      }
    }
    stories.push_back(std::move(story));
  }
  return stories;
}

inline std::string join(const std::vector<std::string>& tokens,
                        const std::string& sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// Writes each story back as a standalone block. Statement lines keep their
// stored ids; the question takes the next id after the last statement.
inline std::string serialize_babi(const std::vector<Story>& stories) {
  std::string out;
  for (const auto& story : stories) {
    for (const auto& f : story.facts) {
      out += std::to_string(f.line) + " " + join(f.tokens) + "\n";
    }
    const int qid = story.facts.empty() ? 1 : story.facts.back().line + 1;
    out += std::to_string(qid) + " " + join(story.question) + "\t" +
           join(story.answer, ",");
    if (!story.supporting.empty()) {
      out += "\t";
      for (std::size_t i = 0; i < story.supporting.size(); ++i) {
        if (i) out += " ";
        out += std::to_string(story.supporting[i]);
      }
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary: token <-> id bijection with reserved entries.
// ---------------------------------------------------------------------------
class Vocab {
 public:
  static constexpr const char* kEndOfSentence = "<eos>";
  static constexpr const char* kEndOfSequence = "<stop>";
  static constexpr const char* kUnknown = "<unk>";

  Vocab() {
    add(kEndOfSentence);
    add(kEndOfSequence);
    add(kUnknown);
  }

  static Vocab build(const std::vector<Story>& stories) {
    Vocab v;
    for (const auto& s : stories) {
      for (const auto& f : s.facts) {
        for (const auto& t : f.tokens) v.add(t);
      }
      for (const auto& t : s.question) v.add(t);
      for (const auto& t : s.answer) v.add(t);
    }
    return v;
  }

  // Rebuilds a vocab from a previously serialized token list.
  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 3 || tokens[0] != kEndOfSentence ||
        tokens[1] != kEndOfSequence || tokens[2] != kUnknown) {
      throw ParseError("vocab token list is missing its reserved prefix");
    }
    Vocab v;
    for (std::size_t i = 3; i < tokens.size(); ++i) v.add(tokens[i]);
    if (v.size() != tokens.size()) {
      throw ParseError("vocab token list contains duplicates");
    }
    return v;
  }

  // Adds on first occurrence; returns the token's id either way.
  std::size_t add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const std::size_t id = tokens_.size();
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }

  std::size_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? unknown_id() : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token); }

  const std::string& token(std::size_t id) const {
    if (id >= tokens_.size()) {
      throw IndexError("token id " + std::to_string(id) +
                       " out of range for vocab of " +
                       std::to_string(tokens_.size()));
    }
    return tokens_[id];
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t end_of_sentence_id() const { return 0; }
  std::size_t end_of_sequence_id() const { return 1; }
  std::size_t unknown_id() const { return 2; }

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// ---------------------------------------------------------------------------
// Pretrained embedding text: one token per line followed by d reals.
// ---------------------------------------------------------------------------
struct PretrainedEmbeddings {
  std::size_t width = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

inline PretrainedEmbeddings parse_embeddings(const std::string& text) {
  PretrainedEmbeddings emb;
  std::istringstream in(text);
  std::string line;
  int file_line = 0;
  while (std::getline(in, line)) {
    ++file_line;
    if (detail::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) {
      throw ParseError("line " + std::to_string(file_line) +
                       ": malformed embedding value");
    }
    if (values.empty()) {
      throw ParseError("line " + std::to_string(file_line) +
                       ": no values for token '" + token + "'");
    }
    if (emb.width == 0) emb.width = values.size();
    if (values.size() != emb.width) {
      throw ParseError("line " + std::to_string(file_line) + ": expected " +
                       std::to_string(emb.width) + " values, got " +
                       std::to_string(values.size()));
    }
    emb.vectors[token] = std::move(values);
  }
  return emb;
}

// Builds an embedding matrix for the vocab: tokens present in the file get
// their pretrained vector, everything else keeps its random column. The
// result stays trainable.
template <class Real>
EmbeddingMatrix<Real> load_embeddings(const std::string& text,
                                      const Vocab& vocab, Rng& rng) {
  auto pre = parse_embeddings(text);
  if (pre.width == 0) {
    throw ParseError("embedding text contains no vectors");
  }
  auto emb = EmbeddingMatrix<Real>::init(pre.width, vocab.size(), rng);
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    auto it = pre.vectors.find(vocab.token(j));
    if (it == pre.vectors.end()) continue;
    for (std::size_t i = 0; i < pre.width; ++i) {
      emb.weights.value.at(i, j) = static_cast<Real>(it->second[i]);
    }
  }
  return emb;
}

// ---------------------------------------------------------------------------
// Synthetic task generation. Deterministic per seed; every story carries a
// rule-computable answer and its supporting statements.
// ---------------------------------------------------------------------------
enum class SyntheticKind { SingleFact, TwoFact, Counting, Tagging };

inline SyntheticKind synthetic_kind_from(const std::string& name) {
  if (name == "single-fact") return SyntheticKind::SingleFact;
  if (name == "two-fact") return SyntheticKind::TwoFact;
  if (name == "counting") return SyntheticKind::Counting;
  if (name == "tagging") return SyntheticKind::Tagging;
  throw ConfigError("unknown synthetic task '" + name +
                    "' (expected single-fact, two-fact, counting or tagging)");
}

namespace synth {

inline const std::vector<std::string>& persons() {
  static const std::vector<std::string> v{"mary", "john",  "sandra",
                                          "daniel", "julie", "bill"};
  return v;
}

inline const std::vector<std::string>& locations() {
  static const std::vector<std::string> v{"kitchen", "garden",  "hallway",
                                          "bathroom", "bedroom", "office"};
  return v;
}

inline const std::vector<std::string>& objects() {
  static const std::vector<std::string> v{"football", "milk", "apple",
                                          "book",     "ball", "key"};
  return v;
}

inline const std::vector<std::string>& count_words() {
  static const std::vector<std::string> v{"none", "one", "two", "three"};
  return v;
}

// word -> tag lexicon for the toy tagging task
inline const std::vector<std::pair<std::string, std::vector<std::string>>>&
tag_lexicon() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> v{
      {"det", {"the", "a", "every", "this"}},
      {"noun", {"dog", "cat", "ball", "man", "tree", "car"}},
      {"verb", {"ran", "saw", "took", "made", "held"}},
      {"adj", {"big", "red", "old", "fast", "green"}},
      {"adv", {"quickly", "slowly", "often", "never"}},
  };
  return v;
}

inline std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::vector<std::string> move_fact(Rng& rng, const std::string& person,
                                          const std::string& location) {
  static const std::vector<std::vector<std::string>> verbs{
      {"went", "to", "the"},
      {"moved", "to", "the"},
      {"journeyed", "to", "the"},
      {"travelled", "to", "the"},
      {"went", "back", "to", "the"},
  };
  std::vector<std::string> t{person};
  const auto& verb = verbs[pick(rng, verbs.size())];
  t.insert(t.end(), verb.begin(), verb.end());
  t.push_back(location);
  t.push_back(".");
  return t;
}

inline std::vector<std::string> take_fact(Rng& rng, const std::string& person,
                                          const std::string& object) {
  static const std::vector<std::vector<std::string>> verbs{
      {"took", "the"}, {"grabbed", "the"}, {"picked", "up", "the"}};
  std::vector<std::string> t{person};
  const auto& verb = verbs[pick(rng, verbs.size())];
  t.insert(t.end(), verb.begin(), verb.end());
  t.push_back(object);
  t.push_back(".");
  return t;
}

inline std::vector<std::string> drop_fact(Rng& rng, const std::string& person,
                                          const std::string& object) {
  static const std::vector<std::vector<std::string>> verbs{
      {"dropped", "the"}, {"put", "down", "the"}, {"discarded", "the"}};
  std::vector<std::string> t{person};
  const auto& verb = verbs[pick(rng, verbs.size())];
  t.insert(t.end(), verb.begin(), verb.end());
  t.push_back(object);
  t.push_back(".");
  return t;
}

inline Story single_fact_story(Rng& rng, std::size_t index) {
  const auto& P = persons();
  const auto& L = locations();
  const std::string target = L[index % L.size()];
  const std::string who = P[pick(rng, P.size())];
  const std::size_t n_moves = 3 + pick(rng, 5);          // 3..7 statements
  const std::size_t decisive = pick(rng, n_moves);

  Story s;
  for (std::size_t i = 0; i < n_moves; ++i) {
    std::string mover, where;
    if (i == decisive) {
      mover = who;
      where = target;
    } else if (i < decisive) {
      mover = P[pick(rng, P.size())];
      where = L[pick(rng, L.size())];
    } else {
      do {
        mover = P[pick(rng, P.size())];
      } while (mover == who);
      where = L[pick(rng, L.size())];
    }
    s.facts.push_back(Fact{int(i) + 1, move_fact(rng, mover, where)});
  }
  s.question = {"where", "is", who, "?"};
  s.answer = {target};
  s.supporting = {int(decisive) + 1};
  return s;
}

inline Story two_fact_story(Rng& rng, std::size_t index) {
  const auto& P = persons();
  const auto& L = locations();
  const auto& O = objects();
  const std::string target = L[index % L.size()];
  const std::string who = P[pick(rng, P.size())];
  const std::string obj = O[pick(rng, O.size())];
  const bool still_carrying = pick(rng, 2) == 0;

  std::vector<std::vector<std::string>> lines;
  int take_line = -1, drop_line = -1, move_line = -1;

  auto add_distractors = [&](std::size_t max_count) {
    const std::size_t k = pick(rng, max_count + 1);
    for (std::size_t i = 0; i < k; ++i) {
      std::string other;
      do {
        other = P[pick(rng, P.size())];
      } while (other == who);
      if (pick(rng, 4) == 0) {
        std::string other_obj;
        do {
          other_obj = O[pick(rng, O.size())];
        } while (other_obj == obj);
        lines.push_back(take_fact(rng, other, other_obj));
      } else {
        lines.push_back(move_fact(rng, other, L[pick(rng, L.size())]));
      }
    }
  };

  add_distractors(2);
  lines.push_back(move_fact(rng, who, L[pick(rng, L.size())]));
  lines.push_back(take_fact(rng, who, obj));
  take_line = int(lines.size());
  add_distractors(2);
  if (still_carrying) {
    if (pick(rng, 2) == 0) {
      lines.push_back(move_fact(rng, who, L[pick(rng, L.size())]));
    }
    lines.push_back(move_fact(rng, who, target));
    move_line = int(lines.size());
    add_distractors(2);
  } else {
    lines.push_back(move_fact(rng, who, target));
    move_line = int(lines.size());
    lines.push_back(drop_fact(rng, who, obj));
    drop_line = int(lines.size());
    if (pick(rng, 2) == 0) {
      std::string after;
      do {
        after = L[pick(rng, L.size())];
      } while (after == target);
      lines.push_back(move_fact(rng, who, after));
    }
    add_distractors(2);
  }

  Story s;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    s.facts.push_back(Fact{int(i) + 1, std::move(lines[i])});
  }
  s.question = {"where", "is", "the", obj, "?"};
  s.answer = {target};
  // dataset order mirrors the lookup chain: the object transfer first, then
  // the location of the person involved
  s.supporting = still_carrying ? std::vector<int>{take_line, move_line}
                                : std::vector<int>{drop_line, move_line};
  return s;
}

inline Story counting_story(Rng& rng, std::size_t index) {
  const auto& P = persons();
  const auto& L = locations();
  const auto& O = objects();
  const std::size_t final_count = index % count_words().size();  // 0..3
  const std::string who = P[pick(rng, P.size())];
  const std::size_t dropped = final_count == 0 ? 1 + pick(rng, 2) : pick(rng, 2);

  // per-object event chains, then a random order-preserving interleave
  std::vector<std::vector<std::pair<bool, std::string>>> chains;  // (is_take, obj)
  std::vector<std::string> pool = O;
  for (std::size_t i = 0; i < final_count + dropped; ++i) {
    const std::size_t j = pick(rng, pool.size());
    const std::string obj = pool[j];
    pool.erase(pool.begin() + j);
    if (i < dropped) {
      chains.push_back({{true, obj}, {false, obj}});
    } else {
      chains.push_back({{true, obj}});
    }
  }
  std::vector<std::pair<bool, std::string>> events;
  while (!chains.empty()) {
    const std::size_t j = pick(rng, chains.size());
    events.push_back(chains[j].front());
    chains[j].erase(chains[j].begin());
    if (chains[j].empty()) chains.erase(chains.begin() + j);
  }

  Story s;
  std::vector<int> event_lines;
  auto maybe_move = [&]() {
    if (pick(rng, 2) == 0) {
      s.facts.push_back(Fact{int(s.facts.size()) + 1,
                             move_fact(rng, P[pick(rng, P.size())],
                                       L[pick(rng, L.size())])});
    }
  };
  maybe_move();
  for (const auto& [is_take, obj] : events) {
    s.facts.push_back(Fact{int(s.facts.size()) + 1,
                           is_take ? take_fact(rng, who, obj)
                                   : drop_fact(rng, who, obj)});
    event_lines.push_back(s.facts.back().line);
    maybe_move();
  }
  s.question = {"how", "many", "objects", "is", who, "carrying", "?"};
  s.answer = {count_words()[final_count]};
  s.supporting = event_lines;
  return s;
}

inline Story tagging_story(Rng& rng, std::vector<std::size_t>& tag_counts) {
  const auto& lex = tag_lexicon();
  const std::size_t len = 5 + pick(rng, 5);  // 5..9 tokens
  Story s;
  Fact sentence;
  sentence.line = 1;
  for (std::size_t i = 0; i < len; ++i) {
    // keep global tag counts level: draw among the least-used classes
    const std::size_t least =
        *std::min_element(tag_counts.begin(), tag_counts.end());
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < tag_counts.size(); ++c) {
      if (tag_counts[c] == least) candidates.push_back(c);
    }
    const std::size_t cls = candidates[pick(rng, candidates.size())];
    ++tag_counts[cls];
    sentence.tokens.push_back(lex[cls].second[pick(rng, lex[cls].second.size())]);
    s.answer.push_back(lex[cls].first);
  }
  s.facts.push_back(std::move(sentence));
  s.question = {"what", "are", "the", "tags", "?"};
  return s;
}

}  // namespace synth

inline std::vector<Story> generate_synthetic(SyntheticKind kind,
                                             std::uint64_t seed,
                                             std::size_t count) {
  if (count < 1) throw ConfigError("generate_synthetic: count must be >= 1");
  Rng rng(seed);
  std::vector<Story> stories;
  stories.reserve(count);
  std::vector<std::size_t> tag_counts(synth::tag_lexicon().size(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    switch (kind) {
      case SyntheticKind::SingleFact:
        stories.push_back(synth::single_fact_story(rng, i));
        break;
      case SyntheticKind::TwoFact:
        stories.push_back(synth::two_fact_story(rng, i));
        break;
      case SyntheticKind::Counting:
        stories.push_back(synth::counting_story(rng, i));
        break;
      case SyntheticKind::Tagging:
        stories.push_back(synth::tagging_story(rng, tag_counts));
        break;
    }
  }
  return stories;
}

}  // namespace dmn
