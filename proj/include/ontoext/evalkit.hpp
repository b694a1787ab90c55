#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontoext/entity_extract.hpp"
#include "ontoext/extend.hpp"
#include "ontoext/gateway.hpp"
#include "ontoext/ontology.hpp"

namespace ontoext {

// Similarity ratio in [0,100]: 100·(1 − levenshtein/maxlen) rounded to the
// nearest integer, over lowercase single-spaced strings. Two empties → 100.
int fuzzy_ratio(const std::string& a, const std::string& b);

// Best fuzzy_ratio of `term` against word windows of the text whose width is
// within one word of the term's. 0 for an empty term or empty text.
int scan_occurrence(const std::string& term, const std::string& text);

struct ReferenceSet {
  std::vector<std::string> names;  // normalized, first-occurrence order
};

// Every distinct seed (non-inserted, non-obsolete) concept name that occurs
// fuzzily (>= threshold) in at least one note, in concept order.
ReferenceSet build_reference(const Ontology& ontology,
                             const std::vector<std::string>& note_texts, int threshold);

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t reference = 0;
  // Reference came up empty while predictions did not: scores are zeros by
  // convention and should be read with care.
  bool degenerate = false;
};

// One-to-one greedy matching at the given fuzzy threshold: repeatedly pair
// the globally best (reference, prediction) ratio >= threshold, ties by
// reference order then prediction order. Both sides empty → perfect scores.
PrfResult prf_at(const std::vector<std::string>& predictions,
                 const std::vector<std::string>& reference, int threshold);
PrfResult prf_at(const std::vector<CorpusCandidate>& predictions,
                 const ReferenceSet& reference, int threshold);

enum class JudgeLabel { Correct, Incorrect, NotSure };

std::string judge_label_name(JudgeLabel label);
std::optional<JudgeLabel> judge_label_from(const std::string& text);

struct JudgeVerdict {
  JudgeLabel label = JudgeLabel::NotSure;
  std::string new_entity;
  std::string parent_name;
  std::string relation = "is_a";
  std::string note;  // why a verdict fell back to NotSure, empty otherwise
};

// Prompt pair asking whether parent→entity is a sound is_a placement.
ChatExchange judge_exchange(const InsertionRecord& record);

// One verdict per insertion. Any failure (transport, provider, parsing)
// becomes NotSure with the reason in `note` so a long run never dies on one
// bad answer.
JudgeVerdict judge_extension(ModelGateway& gateway, const InsertionRecord& record);

struct JudgeTally {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t not_sure = 0;

  std::size_t total() const { return correct + incorrect + not_sure; }
};

JudgeTally tally(const std::vector<JudgeVerdict>& verdicts);

// 100·correct/(correct+incorrect); absent when nothing was decided either
// way (all NotSure, or no verdicts at all).
std::optional<double> judge_precision(const JudgeTally& tally);

// Harmonic mean of precision and recall; 0 when both are 0.
double harmonic_f1(double precision, double recall);

}  // namespace ontoext
