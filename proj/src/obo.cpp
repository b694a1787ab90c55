#include "ontoext/obo.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "ontoext/errors.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

namespace {

struct PendingTerm {
  std::string id;
  std::string name;
  std::vector<std::string> synonyms;
  std::vector<std::string> is_a;
  bool obsolete = false;
  std::size_t start_line = 0;
  bool any = false;
};

// OBO trailing comments start at an unquoted " !".
std::string strip_comment(std::string_view value) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < value.size(); ++i) {
    char c = value[i];
    if (c == '"' && (i == 0 || value[i - 1] != '\\')) in_quotes = !in_quotes;
    if (!in_quotes && c == '!') return trim(value.substr(0, i));
  }
  return trim(value);
}

std::string quoted_part(std::string_view value) {
  std::size_t open = value.find('"');
  if (open == std::string::npos) return trim(value);
  std::size_t pos = open + 1;
  while (pos < value.size()) {
    if (value[pos] == '"' && value[pos - 1] != '\\') {
      return std::string(value.substr(open + 1, pos - open - 1));
    }
    ++pos;
  }
  return trim(value);
}

void flush_term(Ontology& o, PendingTerm& term,
                std::vector<std::pair<std::string, std::string>>& edges) {
  if (!term.any) return;
  if (term.id.empty()) {
    throw parse_error("term stanza starting at line " + std::to_string(term.start_line) +
                      " has no id");
  }
  if (trim(term.name).empty()) {
    throw parse_error("term " + term.id + " (line " + std::to_string(term.start_line) +
                      ") has no name");
  }
  Concept c;
  c.id = ConceptId{term.id};
  c.name = term.name;
  c.synonyms = std::move(term.synonyms);
  c.obsolete = term.obsolete;
  c.origin = ConceptOrigin::Seed;
  try {
    o.add_concept(std::move(c));
  } catch (const duplicate_error&) {
    throw parse_error("duplicate term id " + term.id + " at line " +
                      std::to_string(term.start_line));
  }
  for (const std::string& parent : term.is_a) {
    edges.emplace_back(parent, term.id);
  }
  term = PendingTerm{};
}

}  // namespace

Ontology parse_obo(std::istream& in) {
  Ontology o;
  std::vector<std::pair<std::string, std::string>> edges;  // parent -> child
  PendingTerm term;
  bool in_term = false;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string stripped = trim(line);
    if (stripped.empty()) continue;

    if (stripped.front() == '[') {
      flush_term(o, term, edges);
      in_term = stripped == "[Term]";
      if (in_term) {
        term.start_line = lineno;
        term.any = true;
      }
      continue;
    }
    if (!in_term) continue;  // file header or a skipped stanza kind

    std::size_t colon = stripped.find(':');
    if (colon == std::string::npos) {
      throw parse_error("line " + std::to_string(lineno) + ": expected `tag: value`");
    }
    std::string tag = trim(stripped.substr(0, colon));
    std::string value = std::string(stripped.substr(colon + 1));

    if (tag == "id") {
      term.id = strip_comment(value);
    } else if (tag == "name") {
      term.name = strip_comment(value);
    } else if (tag == "is_a") {
      std::string target = strip_comment(value);
      auto tokens = split_ws(target);
      if (tokens.empty()) {
        throw parse_error("line " + std::to_string(lineno) + ": is_a has no target");
      }
      term.is_a.push_back(tokens.front());
    } else if (tag == "synonym") {
      term.synonyms.push_back(quoted_part(value));
    } else if (tag == "is_obsolete") {
      term.obsolete = to_lower(strip_comment(value)) == "true";
    }
    // Every other tag (def, xref, namespace, ...) is out of scope.
  }
  flush_term(o, term, edges);

  for (const auto& [parent, child] : edges) {
    o.add_edge(ConceptId{parent}, ConceptId{child});
  }

  ValidationReport report = o.validate();
  if (!report.acyclic) throw validation_error("loaded ontology has a cycle");
  return o;
}

Ontology parse_obo_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  return parse_obo(in);
}

namespace {

void write_stanza(const Ontology& o, const Concept& c, std::ostream& out) {
  out << "[Term]\n";
  out << "id: " << c.id.value << "\n";
  out << "name: " << c.name << "\n";
  for (const std::string& syn : c.synonyms) {
    out << "synonym: \"" << syn << "\" EXACT []\n";
  }
  for (const ConceptId& parent : o.parents(c.id)) {
    out << "is_a: " << parent.value;
    if (o.contains(parent)) out << " ! " << o.at(parent).name;
    out << "\n";
  }
  if (c.obsolete) out << "is_obsolete: true\n";
  out << "\n";
}

}  // namespace

void serialize_obo(const Ontology& o, std::ostream& out) {
  out << "format-version: 1.2\n\n";
  for (const Concept& c : o.all()) {
    write_stanza(o, c, out);
  }
}

void serialize_extension(const Ontology& o, const std::vector<InsertionRecord>& records,
                         std::ostream& out) {
  out << "# ontology extension: " << records.size() << " insertions\n";
  for (const InsertionRecord& rec : records) {
    nlohmann::ordered_json j;
    j["new_entity"] = rec.new_entity;
    j["new_id"] = rec.new_id.value;
    j["parent_id"] = rec.parent_id.value;
    j["parent_name"] = rec.parent_name;
    j["layer"] = rec.layer;
    out << j.dump() << "\n";
  }
  if (!records.empty()) {
    out << "\n";
    for (const InsertionRecord& rec : records) {
      if (!o.contains(rec.new_id)) continue;
      write_stanza(o, o.at(rec.new_id), out);
    }
  }
}

}  // namespace ontoext
