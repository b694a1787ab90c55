#include "ontoext/entity_extract.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "ontoext/errors.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

nlohmann::json CandidateEntitySet::to_json() const {
  nlohmann::ordered_json out;
  out["note_id"] = note_id;
  nlohmann::ordered_json list = nlohmann::json::array();
  for (const EntityMention& mention : mentions)
    list.push_back({{"surface", mention.surface}, {"normalized", mention.normalized}});
  out["mentions"] = std::move(list);
  return out;
}

CandidateEntitySet CandidateEntitySet::from_json(const nlohmann::json& value) {
  CandidateEntitySet set;
  set.note_id = value.at("note_id").get<std::string>();
  for (const auto& entry : value.at("mentions"))
    set.mentions.push_back({entry.at("surface").get<std::string>(),
                            entry.at("normalized").get<std::string>()});
  return set;
}

std::string normalize_mention(const std::string& mention) {
  std::string s = to_lower(collapse_ws(mention));
  // Trailing whitespace is consumed along with punctuation so a tail like
  // ". ," strips fully and a second pass is a no-op.
  while (!s.empty()) {
    char c = s.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == ' ')
      s.pop_back();
    else
      break;
  }
  return s;
}

bool contains_phi_placeholder(const std::string& text) {
  for (PhiCategory category : kAllPhiCategories)
    if (text.find(phi_placeholder(category)) != std::string::npos) return true;
  return false;
}

ChatExchange disease_exchange(const ClinicalNote& masked_note) {
  ChatExchange exchange;
  exchange.system_prompt =
      "You are a clinical language expert. You identify disease and disorder "
      "mentions in de-identified clinical notes.";
  exchange.user_prompt =
      "List every disease or disorder mentioned in the clinical note below. "
      "Include the full name of each condition as it appears. Do not include "
      "symptoms, medications, or procedures.\n"
      "Respond with a single JSON array of strings.\n\n"
      "Note:\n" + masked_note.text;
  return exchange;
}

CandidateEntitySet extract_diseases(ModelGateway& gateway, const ClinicalNote& masked_note) {
  nlohmann::json payload =
      request_structured(gateway, disease_exchange(masked_note), PayloadShape::ListOfStrings);

  CandidateEntitySet set;
  set.note_id = masked_note.id;
  std::unordered_set<std::string> seen;
  for (const auto& item : payload) {
    std::string surface = trim(item.get<std::string>());
    std::string normalized = normalize_mention(surface);
    if (normalized.empty()) continue;
    // A placeholder inside a mention means the model swallowed masked
    // context; such strings are not disease names.
    if (contains_phi_placeholder(surface)) continue;
    if (!seen.insert(normalized).second) continue;
    set.mentions.push_back({surface, normalized});
  }
  return set;
}

std::vector<CorpusCandidate> merge_candidates(const std::vector<CandidateEntitySet>& sets) {
  std::vector<CorpusCandidate> merged;
  std::unordered_map<std::string, std::size_t> index;
  for (const CandidateEntitySet& set : sets) {
    for (const EntityMention& mention : set.mentions) {
      auto it = index.find(mention.normalized);
      if (it == index.end()) {
        index.emplace(mention.normalized, merged.size());
        merged.push_back({mention.normalized, mention.surface, {set.note_id}});
      } else {
        auto& ids = merged[it->second].note_ids;
        if (std::find(ids.begin(), ids.end(), set.note_id) == ids.end())
          ids.push_back(set.note_id);
      }
    }
  }
  return merged;
}

}  // namespace ontoext
