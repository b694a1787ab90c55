#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace ontoext {

// Opaque concept identifier: an accession like "DOID:162" for seed terms,
// "EXT:0000001" for concepts inserted by the extension engine.
struct ConceptId {
  std::string value;

  ConceptId() = default;
  explicit ConceptId(std::string v) : value(std::move(v)) {}

  bool operator==(const ConceptId&) const = default;
  auto operator<=>(const ConceptId&) const = default;
};

enum class ConceptOrigin { Seed, Inserted };

struct Concept {
  ConceptId id;
  std::string name;
  std::vector<std::string> synonyms;
  bool obsolete = false;
  ConceptOrigin origin = ConceptOrigin::Seed;
};

// One committed insertion: the new concept and the parent it went under.
struct InsertionRecord {
  std::string new_entity;
  ConceptId new_id;
  ConceptId parent_id;
  std::string parent_name;
  int layer = 0;  // hierarchy depth of the parent; roots sit at 0
  std::string trace_ref;
};

struct ValidationReport {
  bool acyclic = true;
  int depth = 0;  // layers on the longest root-to-leaf path
  std::vector<std::string> dangling_edges;
  std::vector<std::string> problems;

  bool ok() const { return acyclic && dangling_edges.empty() && problems.empty(); }
};

// Concept hierarchy with is-a edges stored as parent -> ordered children.
// Child lists keep file order for seed terms and append order for inserted
// ones, so downstream tie-breaking is reproducible.
//
// Const queries are safe to run concurrently. Mutation needs exclusive
// access; the extension engine serializes its commits.
class Ontology {
public:
  // Throws duplicate_error when the id is already present.
  void add_concept(Concept c);

  // Endpoints are not required to exist yet; validate() reports edges whose
  // parent never materialized. Parse order in OBO files makes forward
  // references routine.
  void add_edge(const ConceptId& parent, const ConceptId& child);

  bool contains(const ConceptId& id) const;
  const Concept& at(const ConceptId& id) const;  // throws lookup_error
  std::size_t size() const { return concepts_.size(); }
  std::size_t edge_count() const;
  const std::vector<Concept>& all() const { return concepts_; }

  // Direct children in stored order, obsolete concepts excluded.
  std::vector<ConceptId> children(const ConceptId& id) const;

  // Raw child list including obsolete concepts (serialization needs it).
  const std::vector<ConceptId>& stored_children(const ConceptId& id) const;
  const std::vector<ConceptId>& parents(const ConceptId& id) const;

  // Parentless concepts in insertion order.
  std::vector<ConceptId> roots() const;

  // The top-layer candidate set: children of a single universal root, or the
  // roots themselves for a forest. Throws validation_error when empty.
  std::vector<ConceptId> root_layer() const;

  // Longest distance in edges from any root; parents missing from the
  // concept table are ignored. Throws validation_error on a cycle.
  int depth_of(const ConceptId& id) const;

  // Layer count of the longest root-to-leaf path; 0 when empty.
  int depth() const;

  // Adds a concept with origin Inserted under `parent` and returns the
  // record. Throws lookup_error for an unknown parent and duplicate_error
  // when the parent already has a child of the same name (case-insensitive,
  // trimmed).
  InsertionRecord insert_child(const ConceptId& parent, const std::string& name,
                               const std::string& trace_ref = {});

  ValidationReport validate() const;

private:
  int depth_of_locked(const std::string& id, std::unordered_map<std::string, int>& memo,
                      std::unordered_map<std::string, int>& state) const;

  std::vector<Concept> concepts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::vector<ConceptId>> children_;
  std::unordered_map<std::string, std::vector<ConceptId>> parents_;
  long next_generated_ = 1;
};

}  // namespace ontoext

template <>
struct std::hash<ontoext::ConceptId> {
  std::size_t operator()(const ontoext::ConceptId& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};
