#include "ontoext/ontology.hpp"

#include <algorithm>
#include <cstdio>

#include "ontoext/errors.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

namespace {
const std::vector<ConceptId> kNoIds;
}

void Ontology::add_concept(Concept c) {
  if (c.id.value.empty()) throw argument_error("concept id must be non-empty");
  if (trim(c.name).empty()) throw argument_error("concept name must be non-empty: " + c.id.value);
  if (index_.count(c.id.value)) throw duplicate_error("duplicate concept id " + c.id.value);
  c.name = trim(c.name);
  index_.emplace(c.id.value, concepts_.size());
  concepts_.push_back(std::move(c));
}

void Ontology::add_edge(const ConceptId& parent, const ConceptId& child) {
  children_[parent.value].push_back(child);
  parents_[child.value].push_back(parent);
}

bool Ontology::contains(const ConceptId& id) const { return index_.count(id.value) != 0; }

const Concept& Ontology::at(const ConceptId& id) const {
  auto it = index_.find(id.value);
  if (it == index_.end()) throw lookup_error("unknown concept id " + id.value);
  return concepts_[it->second];
}

std::size_t Ontology::edge_count() const {
  std::size_t n = 0;
  for (const auto& [parent, kids] : children_) n += kids.size();
  return n;
}

std::vector<ConceptId> Ontology::children(const ConceptId& id) const {
  if (!contains(id)) throw lookup_error("unknown concept id " + id.value);
  std::vector<ConceptId> out;
  for (const ConceptId& kid : stored_children(id)) {
    auto it = index_.find(kid.value);
    if (it != index_.end() && !concepts_[it->second].obsolete) out.push_back(kid);
  }
  return out;
}

const std::vector<ConceptId>& Ontology::stored_children(const ConceptId& id) const {
  auto it = children_.find(id.value);
  return it == children_.end() ? kNoIds : it->second;
}

const std::vector<ConceptId>& Ontology::parents(const ConceptId& id) const {
  auto it = parents_.find(id.value);
  return it == parents_.end() ? kNoIds : it->second;
}

std::vector<ConceptId> Ontology::roots() const {
  std::vector<ConceptId> out;
  for (const Concept& c : concepts_) {
    auto it = parents_.find(c.id.value);
    if (it == parents_.end() || it->second.empty()) out.push_back(c.id);
  }
  return out;
}

std::vector<ConceptId> Ontology::root_layer() const {
  if (concepts_.empty()) throw validation_error("empty ontology has no top layer");
  std::vector<ConceptId> top = roots();
  if (top.size() == 1) return children(top.front());
  std::vector<ConceptId> out;
  for (const ConceptId& id : top) {
    if (!at(id).obsolete) out.push_back(id);
  }
  return out;
}

int Ontology::depth_of_locked(const std::string& id, std::unordered_map<std::string, int>& memo,
                              std::unordered_map<std::string, int>& state) const {
  auto found = memo.find(id);
  if (found != memo.end()) return found->second;
  if (state[id] == 1) throw validation_error("cycle detected at concept " + id);
  state[id] = 1;
  int best = 0;
  auto pit = parents_.find(id);
  if (pit != parents_.end()) {
    for (const ConceptId& parent : pit->second) {
      if (!index_.count(parent.value)) continue;  // dangling parent, reported by validate()
      best = std::max(best, depth_of_locked(parent.value, memo, state) + 1);
    }
  }
  state[id] = 2;
  memo.emplace(id, best);
  return best;
}

int Ontology::depth_of(const ConceptId& id) const {
  if (!contains(id)) throw lookup_error("unknown concept id " + id.value);
  std::unordered_map<std::string, int> memo, state;
  return depth_of_locked(id.value, memo, state);
}

int Ontology::depth() const {
  if (concepts_.empty()) return 0;
  std::unordered_map<std::string, int> memo, state;
  int deepest = 0;
  for (const Concept& c : concepts_) {
    deepest = std::max(deepest, depth_of_locked(c.id.value, memo, state));
  }
  return deepest + 1;
}

InsertionRecord Ontology::insert_child(const ConceptId& parent, const std::string& name,
                                       const std::string& trace_ref) {
  const Concept& anchor = at(parent);  // throws for unknown parent
  std::string trimmed = trim(name);
  if (trimmed.empty()) throw argument_error("cannot insert a concept with an empty name");

  std::string wanted = to_lower(trimmed);
  for (const ConceptId& kid : stored_children(parent)) {
    auto it = index_.find(kid.value);
    if (it != index_.end() && to_lower(concepts_[it->second].name) == wanted) {
      throw duplicate_error("parent " + parent.value + " already has a child named \"" +
                            trimmed + "\"");
    }
  }

  char buf[16];
  std::snprintf(buf, sizeof(buf), "EXT:%07ld", next_generated_++);
  ConceptId new_id{buf};

  Concept c;
  c.id = new_id;
  c.name = trimmed;
  c.origin = ConceptOrigin::Inserted;
  add_concept(std::move(c));
  add_edge(parent, new_id);

  InsertionRecord rec;
  rec.new_entity = trimmed;
  rec.new_id = new_id;
  rec.parent_id = parent;
  rec.parent_name = anchor.name;
  rec.layer = depth_of(parent);
  rec.trace_ref = trace_ref;
  return rec;
}

ValidationReport Ontology::validate() const {
  ValidationReport report;

  for (const auto& [parent, kids] : children_) {
    bool parent_known = index_.count(parent) != 0;
    for (const ConceptId& kid : kids) {
      bool child_known = index_.count(kid.value) != 0;
      if (!parent_known || !child_known) {
        report.dangling_edges.push_back(parent + " -> " + kid.value);
      }
    }
  }
  std::sort(report.dangling_edges.begin(), report.dangling_edges.end());

  // Kahn's algorithm over known-endpoint edges.
  std::unordered_map<std::string, std::size_t> indegree;
  for (const Concept& c : concepts_) indegree[c.id.value] = 0;
  for (const auto& [parent, kids] : children_) {
    if (!index_.count(parent)) continue;
    for (const ConceptId& kid : kids) {
      auto it = indegree.find(kid.value);
      if (it != indegree.end()) ++it->second;
    }
  }
  std::vector<std::string> queue;
  for (const Concept& c : concepts_) {
    if (indegree[c.id.value] == 0) queue.push_back(c.id.value);
  }
  std::size_t visited = 0;
  while (!queue.empty()) {
    std::string id = queue.back();
    queue.pop_back();
    ++visited;
    auto cit = children_.find(id);
    if (cit == children_.end()) continue;
    for (const ConceptId& kid : cit->second) {
      auto it = indegree.find(kid.value);
      if (it != indegree.end() && --it->second == 0) queue.push_back(kid.value);
    }
  }
  if (visited != concepts_.size()) {
    report.acyclic = false;
    report.problems.push_back("edge graph contains a cycle");
  }

  if (report.acyclic) {
    std::unordered_map<std::string, int> memo, state;
    int deepest = -1;
    for (const Concept& c : concepts_) {
      deepest = std::max(deepest, depth_of_locked(c.id.value, memo, state));
    }
    report.depth = concepts_.empty() ? 0 : deepest + 1;
  }

  return report;
}

}  // namespace ontoext
