#include "ontoext/extend.hpp"

#include <algorithm>
#include <cmath>

#include "ontoext/errors.hpp"
#include "ontoext/log.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

std::string relation_label_name(RelationLabel label) {
  switch (label) {
    case RelationLabel::Equivalence: return "Equivalence";
    case RelationLabel::Subsetting: return "Subsetting";
    case RelationLabel::Neither: return "Neither";
  }
  throw argument_error("unknown relation label value");
}

RelationLabel relation_label_from(const std::string& text) {
  std::string key = to_lower(collapse_ws(text));
  while (!key.empty() && (key.back() == '.' || key.back() == '!')) key.pop_back();
  if (key == "equivalence" || key == "equivalent" || key == "equal" || key == "same" ||
      key == "synonym")
    return RelationLabel::Equivalence;
  if (key == "subsetting" || key == "subset" || key == "subclass" || key == "subtype" ||
      key == "is a subset" || key == "narrower")
    return RelationLabel::Subsetting;
  if (key == "neither" || key == "none" || key == "no relation" || key == "unrelated" ||
      key == "other")
    return RelationLabel::Neither;
  throw format_error("\"" + text + "\" is not a relation label");
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw argument_error("cosine over mismatched dimensions " +
                         std::to_string(a.dimension()) + " and " +
                         std::to_string(b.dimension()));
  double dot = 0.0;
  for (int i = 0; i < a.dimension(); ++i) dot += a.values[i] * b.values[i];
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw argument_error("cosine over a zero-norm vector");
  return dot / (na * nb);
}

AnchorMatch nearest(const Ontology& ontology, const std::string& entity,
                    std::span<const ConceptId> candidates, ModelGateway& embedder, int layer,
                    bool match_synonyms) {
  if (candidates.empty()) throw argument_error("nearest over an empty candidate list");
  EmbeddingVector entity_vec = embedder.embed(entity);

  AnchorMatch best;
  bool have_best = false;
  for (const ConceptId& id : candidates) {
    const Concept& entry = ontology.at(id);
    double score = cosine(entity_vec, embedder.embed(entry.name));
    if (match_synonyms)
      for (const std::string& synonym : entry.synonyms)
        score = std::max(score, cosine(entity_vec, embedder.embed(synonym)));
    // Strict > keeps the earliest candidate on exact ties.
    if (!have_best || score > best.similarity) {
      best = {id, score, layer};
      have_best = true;
    }
  }
  return best;
}

ChatExchange relation_exchange(const std::string& entity, const std::string& anchor_name,
                               const std::string& parent_name) {
  ChatExchange exchange;
  exchange.system_prompt =
      "You are a biomedical ontology curator. You judge how a new disease "
      "entity relates to an existing concept.";
  exchange.user_prompt =
      "New entity: \"" + entity + "\"\n"
      "Existing concept: \"" + anchor_name + "\" (a kind of \"" + parent_name + "\")\n\n"
      "Which one statement holds?\n"
      "- Equivalence: the new entity and the existing concept name the same "
      "condition.\n"
      "- Subsetting: the new entity is a narrower kind of the existing "
      "concept.\n"
      "- Neither: neither of the above.\n\n"
      "Respond with exactly one word: Equivalence, Subsetting, or Neither.";
  return exchange;
}

RelationVerdict classify_relation(ModelGateway& gateway, const std::string& entity,
                                  const std::string& anchor_name,
                                  const std::string& parent_name) {
  const ChatExchange base = relation_exchange(entity, anchor_name, parent_name);
  ChatExchange exchange = base;
  std::string last_raw;
  for (int attempt = 0; attempt <= 2; ++attempt) {
    if (attempt > 0) {
      exchange = base;
      exchange.user_prompt +=
          "\n\nYour previous reply was not one of the three labels. Respond "
          "with exactly one word: Equivalence, Subsetting, or Neither.";
    }
    std::string raw = gateway.complete(exchange);
    last_raw = raw;
    try {
      std::string label = parse_structured(raw, PayloadShape::SingleLabel).get<std::string>();
      return {relation_label_from(label), raw};
    } catch (const format_error&) {
    }
  }
  warn("relation for \"" + entity + "\" vs \"" + anchor_name +
       "\" stayed unparseable; treating as Neither");
  return {RelationLabel::Neither, last_raw};
}

nlohmann::json trace_to_json(const ExtensionTrace& trace) {
  nlohmann::ordered_json out;
  out["entity"] = trace.entity;
  nlohmann::ordered_json steps = nlohmann::json::array();
  for (const ExtensionStep& step : trace.steps) {
    steps.push_back({{"layer", step.layer},
                     {"candidates", step.candidate_count},
                     {"anchor_id", step.anchor_id.value},
                     {"anchor_name", step.anchor_name},
                     {"similarity", step.similarity},
                     {"verdict", relation_label_name(step.verdict)}});
  }
  out["steps"] = std::move(steps);
  switch (trace.outcome.kind) {
    case ExtensionOutcome::Kind::Inserted: out["outcome"] = "inserted"; break;
    case ExtensionOutcome::Kind::AlreadyPresent: out["outcome"] = "already_present"; break;
    case ExtensionOutcome::Kind::Failed: out["outcome"] = "failed"; break;
  }
  if (trace.outcome.concept_id) out["concept_id"] = trace.outcome.concept_id->value;
  if (!trace.outcome.reason.empty()) out["reason"] = trace.outcome.reason;
  if (trace.insertion) {
    out["insertion"] = {{"new_entity", trace.insertion->new_entity},
                        {"new_id", trace.insertion->new_id.value},
                        {"parent_id", trace.insertion->parent_id.value},
                        {"parent_name", trace.insertion->parent_name},
                        {"layer", trace.insertion->layer}};
  }
  return out;
}

ExtensionTrace extend_one(Ontology& ontology, const std::string& entity, ModelGateway& chat,
                          ModelGateway& embedder, const ExtendOptions& options) {
  ExtensionTrace trace;
  trace.entity = entity;

  auto fail = [&](const std::string& reason) {
    trace.outcome = {ExtensionOutcome::Kind::Failed, std::nullopt, reason};
    return trace;
  };

  try {
    if (trim(entity).empty()) return fail("empty entity");
    const int seed_depth = ontology.depth();
    std::vector<ConceptId> layer_candidates = ontology.root_layer();
    int layer = 0;

    for (;;) {
      if (layer > seed_depth + options.depth_guard_offset)
        return fail("descent exceeded depth limit " +
                    std::to_string(seed_depth + options.depth_guard_offset));
      if (layer_candidates.empty())
        return fail("no candidates at layer " + std::to_string(layer));

      AnchorMatch anchor = nearest(ontology, entity, layer_candidates, embedder, layer,
                                   options.match_synonyms);
      const Concept& anchor_concept = ontology.at(anchor.candidate_id);
      std::string parent_name = "the hierarchy root";
      {
        auto parents = ontology.parents(anchor.candidate_id);
        if (!parents.empty()) parent_name = ontology.at(parents.front()).name;
      }
      RelationVerdict verdict =
          classify_relation(chat, entity, anchor_concept.name, parent_name);

      trace.steps.push_back({layer, layer_candidates.size(), anchor.candidate_id,
                             anchor_concept.name, anchor.similarity, verdict.label});

      if (verdict.label == RelationLabel::Equivalence) {
        trace.outcome = {ExtensionOutcome::Kind::AlreadyPresent, anchor.candidate_id, ""};
        return trace;
      }
      if (verdict.label == RelationLabel::Subsetting) {
        std::vector<ConceptId> children = ontology.children(anchor.candidate_id);
        if (!children.empty()) {
          layer_candidates = std::move(children);
          ++layer;
          continue;
        }
        // Narrower than a leaf: the entity becomes its first child.
        InsertionRecord record = ontology.insert_child(anchor.candidate_id, entity, entity);
        trace.outcome = {ExtensionOutcome::Kind::Inserted, record.new_id, ""};
        trace.insertion = std::move(record);
        return trace;
      }
      // Neither: nothing at this layer subsumes the entity, so it becomes a
      // new child of the closest concept found so far.
      InsertionRecord record = ontology.insert_child(anchor.candidate_id, entity, entity);
      trace.outcome = {ExtensionOutcome::Kind::Inserted, record.new_id, ""};
      trace.insertion = std::move(record);
      return trace;
    }
  } catch (const error& ex) {
    return fail(ex.what());
  }
}

ExtensionRun extend_all(Ontology& ontology, const std::vector<std::string>& entities,
                        ModelGateway& chat, ModelGateway& embedder,
                        const ExtendOptions& options) {
  ExtensionRun run;
  for (const std::string& entity : entities) {
    ExtensionTrace trace = extend_one(ontology, entity, chat, embedder, options);
    if (trace.insertion) run.records.push_back(*trace.insertion);
    run.traces.push_back(std::move(trace));
  }
  return run;
}

}  // namespace ontoext
