#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontoext/gateway.hpp"
#include "ontoext/ontology.hpp"

namespace ontoext {

// How a new entity relates to an existing concept.
enum class RelationLabel { Equivalence, Subsetting, Neither };

std::string relation_label_name(RelationLabel label);

// Accepts canonical names plus close variants ("equivalent", "subset",
// "subclass", "none", ...). Throws format_error for anything else.
RelationLabel relation_label_from(const std::string& text);

struct RelationVerdict {
  RelationLabel label = RelationLabel::Neither;
  std::string raw_response;
};

// Winner of the similarity scan over one candidate layer.
struct AnchorMatch {
  ConceptId candidate_id{""};
  double similarity = 0.0;
  int layer = 0;
};

// One descent step, kept for audit.
struct ExtensionStep {
  int layer = 0;
  std::size_t candidate_count = 0;
  ConceptId anchor_id{""};
  std::string anchor_name;
  double similarity = 0.0;
  RelationLabel verdict = RelationLabel::Neither;
};

struct ExtensionOutcome {
  enum class Kind { Inserted, AlreadyPresent, Failed };
  Kind kind = Kind::Failed;
  std::optional<ConceptId> concept_id;  // matched or newly created concept
  std::string reason;                   // set for Failed
};

struct ExtensionTrace {
  std::string entity;
  std::vector<ExtensionStep> steps;
  ExtensionOutcome outcome;
  std::optional<InsertionRecord> insertion;
};

nlohmann::json trace_to_json(const ExtensionTrace& trace);

struct ExtendOptions {
  // The descent aborts when the layer index exceeds the seed hierarchy depth
  // by more than this. On a well-formed hierarchy the walk cannot get that
  // deep, so the guard only fires on corrupted state.
  int depth_guard_offset = 8;
  // When set, a concept's synonyms also compete in the similarity scan
  // (still attributed to their concept).
  bool match_synonyms = false;
};

// Cosine similarity. Throws argument_error on dimension mismatch or a
// zero-norm side.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Embeds the entity and every candidate name, returns the argmax by cosine.
// Ties keep the earliest candidate in the given order.
AnchorMatch nearest(const Ontology& ontology, const std::string& entity,
                    std::span<const ConceptId> candidates, ModelGateway& embedder, int layer,
                    bool match_synonyms = false);

// Prompt pair for the three-way relation question.
ChatExchange relation_exchange(const std::string& entity, const std::string& anchor_name,
                               const std::string& parent_name);

// Asks the relation question with bounded re-prompting; an answer that never
// parses becomes Neither with a warning rather than aborting the walk.
RelationVerdict classify_relation(ModelGateway& gateway, const std::string& entity,
                                  const std::string& anchor_name, const std::string& parent_name);

// Walks one entity down the hierarchy: at each layer the nearest concept by
// embedding becomes the anchor, the relation verdict picks between stopping
// (Equivalence), descending (Subsetting), and inserting beside (Neither).
// All failures are reported in the outcome, never thrown.
ExtensionTrace extend_one(Ontology& ontology, const std::string& entity, ModelGateway& chat,
                          ModelGateway& embedder, const ExtendOptions& options = {});

struct ExtensionRun {
  std::vector<ExtensionTrace> traces;
  std::vector<InsertionRecord> records;
};

// Processes entities in order, committing each insertion before the next
// entity starts so later walks can land under earlier insertions.
ExtensionRun extend_all(Ontology& ontology, const std::vector<std::string>& entities,
                        ModelGateway& chat, ModelGateway& embedder,
                        const ExtendOptions& options = {});

}  // namespace ontoext
