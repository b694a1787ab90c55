#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ontoext/deid.hpp"
#include "ontoext/gateway.hpp"

namespace ontoext {

struct EntityMention {
  std::string surface;     // as the model reported it
  std::string normalized;  // lowercase, single-spaced, trailing punctuation removed
};

// Disease mentions recovered from one masked note.
struct CandidateEntitySet {
  std::string note_id;
  std::vector<EntityMention> mentions;

  nlohmann::json to_json() const;
  static CandidateEntitySet from_json(const nlohmann::json& value);
};

// One distinct entity across the corpus with the notes it came from.
struct CorpusCandidate {
  std::string normalized;
  std::string surface;  // first surface form seen
  std::vector<std::string> note_ids;
};

// Lowercases, collapses runs of whitespace, strips trailing punctuation.
// Idempotent: normalize_mention(normalize_mention(s)) == normalize_mention(s).
std::string normalize_mention(const std::string& mention);

// True when the text still carries a masking placeholder like [PERSON].
bool contains_phi_placeholder(const std::string& text);

// Prompt pair asking for every disease or disorder named in the note.
ChatExchange disease_exchange(const ClinicalNote& masked_note);

// Runs disease extraction over one masked note. Empty strings and strings
// carrying masking placeholders are dropped; duplicates (after
// normalization) keep the first surface form.
CandidateEntitySet extract_diseases(ModelGateway& gateway, const ClinicalNote& masked_note);

// Folds per-note candidate sets into distinct corpus candidates, ordered by
// first appearance. note_ids preserve encounter order without duplicates.
std::vector<CorpusCandidate> merge_candidates(const std::vector<CandidateEntitySet>& sets);

}  // namespace ontoext
