#include "ontoext/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ontoext/errors.hpp"
#include "ontoext/log.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

namespace {

std::size_t levenshtein(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  std::vector<std::size_t> prev(b.size() + 1), curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

std::string canon(const std::string& s) { return to_lower(collapse_ws(s)); }

}  // namespace

int fuzzy_ratio(const std::string& a, const std::string& b) {
  std::string ca = canon(a), cb = canon(b);
  if (ca.empty() && cb.empty()) return 100;
  if (ca.empty() || cb.empty()) return 0;
  std::size_t maxlen = std::max(ca.size(), cb.size());
  double score = 100.0 * (1.0 - static_cast<double>(levenshtein(ca, cb)) /
                                    static_cast<double>(maxlen));
  return static_cast<int>(std::lround(score));
}

int scan_occurrence(const std::string& term, const std::string& text) {
  std::string cterm = canon(term);
  if (cterm.empty()) return 0;
  std::vector<std::string> words;
  for (const std::string& token : split_ws(text)) {
    std::string stripped = strip_token_edges(token);
    if (!stripped.empty()) words.push_back(to_lower(stripped));
  }
  if (words.empty()) return 0;

  std::size_t term_words = split_ws(cterm).size();
  std::size_t low = term_words > 1 ? term_words - 1 : 1;
  std::size_t high = term_words + 1;

  int best = 0;
  for (std::size_t width = low; width <= high; ++width) {
    if (width > words.size()) break;
    for (std::size_t start = 0; start + width <= words.size(); ++start) {
      std::string window = words[start];
      for (std::size_t k = 1; k < width; ++k) window += " " + words[start + k];
      // A window whose length is hopelessly off cannot beat `best`; skip the
      // edit-distance work.
      std::size_t maxlen = std::max(window.size(), cterm.size());
      std::size_t diff =
          window.size() > cterm.size() ? window.size() - cterm.size() : cterm.size() - window.size();
      if (100.0 * (1.0 - static_cast<double>(diff) / static_cast<double>(maxlen)) < best)
        continue;
      best = std::max(best, fuzzy_ratio(cterm, window));
      if (best == 100) return best;
    }
  }
  return best;
}

ReferenceSet build_reference(const Ontology& ontology,
                             const std::vector<std::string>& note_texts, int threshold) {
  ReferenceSet reference;
  std::unordered_set<std::string> seen;
  for (const Concept& entry : ontology.all()) {
    if (entry.origin != ConceptOrigin::Seed || entry.obsolete) continue;
    std::string name = canon(entry.name);
    if (name.empty() || seen.count(name)) continue;
    for (const std::string& text : note_texts) {
      if (scan_occurrence(name, text) >= threshold) {
        reference.names.push_back(name);
        seen.insert(name);
        break;
      }
    }
  }
  return reference;
}

PrfResult prf_at(const std::vector<std::string>& predictions,
                 const std::vector<std::string>& reference, int threshold) {
  PrfResult result;
  result.predicted = predictions.size();
  result.reference = reference.size();

  if (reference.empty() && predictions.empty()) {
    result.precision = result.recall = result.f1 = 1.0;
    return result;
  }
  if (reference.empty()) {
    result.degenerate = true;
    return result;
  }

  // Greedy one-to-one pairing by globally best ratio; ties keep the earliest
  // reference, then the earliest prediction.
  std::vector<bool> ref_used(reference.size(), false);
  std::vector<bool> pred_used(predictions.size(), false);
  std::vector<std::vector<int>> ratio(reference.size(),
                                      std::vector<int>(predictions.size(), 0));
  for (std::size_t r = 0; r < reference.size(); ++r)
    for (std::size_t p = 0; p < predictions.size(); ++p)
      ratio[r][p] = fuzzy_ratio(reference[r], predictions[p]);

  for (;;) {
    int best = threshold - 1;
    std::size_t best_r = 0, best_p = 0;
    bool found = false;
    for (std::size_t r = 0; r < reference.size(); ++r) {
      if (ref_used[r]) continue;
      for (std::size_t p = 0; p < predictions.size(); ++p) {
        if (pred_used[p]) continue;
        if (ratio[r][p] > best) {
          best = ratio[r][p];
          best_r = r;
          best_p = p;
          found = true;
        }
      }
    }
    if (!found) break;
    ref_used[best_r] = true;
    pred_used[best_p] = true;
    ++result.true_positives;
  }

  result.precision = predictions.empty()
                         ? 0.0
                         : static_cast<double>(result.true_positives) /
                               static_cast<double>(predictions.size());
  result.recall = static_cast<double>(result.true_positives) /
                  static_cast<double>(reference.size());
  result.f1 = harmonic_f1(result.precision, result.recall);
  return result;
}

PrfResult prf_at(const std::vector<CorpusCandidate>& predictions,
                 const ReferenceSet& reference, int threshold) {
  std::vector<std::string> names;
  names.reserve(predictions.size());
  for (const CorpusCandidate& candidate : predictions) names.push_back(candidate.normalized);
  return prf_at(names, reference.names, threshold);
}

std::string judge_label_name(JudgeLabel label) {
  switch (label) {
    case JudgeLabel::Correct: return "Correct";
    case JudgeLabel::Incorrect: return "Incorrect";
    case JudgeLabel::NotSure: return "Not Sure";
  }
  throw argument_error("unknown judge label value");
}

std::optional<JudgeLabel> judge_label_from(const std::string& text) {
  std::string key = to_lower(collapse_ws(text));
  while (!key.empty() && (key.back() == '.' || key.back() == '!')) key.pop_back();
  if (key == "correct" || key == "yes" || key == "valid" || key == "right")
    return JudgeLabel::Correct;
  if (key == "incorrect" || key == "no" || key == "invalid" || key == "wrong")
    return JudgeLabel::Incorrect;
  if (key == "not sure" || key == "notsure" || key == "unsure" || key == "uncertain" ||
      key == "unclear" || key == "cannot determine" || key == "unknown")
    return JudgeLabel::NotSure;
  return std::nullopt;
}

ChatExchange judge_exchange(const InsertionRecord& record) {
  ChatExchange exchange;
  exchange.system_prompt =
      "You are a biomedical ontology reviewer. You judge whether a proposed "
      "parent-child placement in a disease hierarchy is correct.";
  exchange.user_prompt =
      "Proposed placement: \"" + record.new_entity + "\" is_a \"" +
      record.parent_name + "\".\n\n"
      "Is this placement correct? A placement is correct when the first "
      "condition is a kind of the second.\n"
      "Respond with exactly one of: Correct, Incorrect, Not Sure.";
  return exchange;
}

JudgeVerdict judge_extension(ModelGateway& gateway, const InsertionRecord& record) {
  JudgeVerdict verdict;
  verdict.new_entity = record.new_entity;
  verdict.parent_name = record.parent_name;

  const ChatExchange base = judge_exchange(record);
  ChatExchange exchange = base;
  std::string last_error;
  for (int attempt = 0; attempt <= 2; ++attempt) {
    if (attempt > 0) {
      exchange = base;
      exchange.user_prompt +=
          "\n\nYour previous reply was not one of the three options. Respond "
          "with exactly one of: Correct, Incorrect, Not Sure.";
    }
    std::string raw;
    try {
      raw = gateway.complete(exchange);
    } catch (const error& ex) {
      verdict.label = JudgeLabel::NotSure;
      verdict.note = ex.what();
      warn("judging \"" + record.new_entity + "\" failed (" + ex.what() +
           "); recording Not Sure");
      return verdict;
    }
    try {
      std::string label = parse_structured(raw, PayloadShape::SingleLabel).get<std::string>();
      if (auto parsed = judge_label_from(label)) {
        verdict.label = *parsed;
        return verdict;
      }
      last_error = "\"" + label + "\" is not a judge option";
    } catch (const format_error& ex) {
      last_error = ex.what();
    }
  }
  verdict.label = JudgeLabel::NotSure;
  verdict.note = "unparseable after re-prompts: " + last_error;
  warn("judge verdict for \"" + record.new_entity + "\" stayed unparseable; recording Not Sure");
  return verdict;
}

JudgeTally tally(const std::vector<JudgeVerdict>& verdicts) {
  JudgeTally t;
  for (const JudgeVerdict& verdict : verdicts) {
    switch (verdict.label) {
      case JudgeLabel::Correct: ++t.correct; break;
      case JudgeLabel::Incorrect: ++t.incorrect; break;
      case JudgeLabel::NotSure: ++t.not_sure; break;
    }
  }
  return t;
}

std::optional<double> judge_precision(const JudgeTally& tally) {
  std::size_t decided = tally.correct + tally.incorrect;
  if (decided == 0) return std::nullopt;
  return 100.0 * static_cast<double>(tally.correct) / static_cast<double>(decided);
}

double harmonic_f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace ontoext
