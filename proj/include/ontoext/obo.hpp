#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ontoext/ontology.hpp"

namespace ontoext {

// Reads the OBO flat-file subset used by disease ontologies: [Term] stanzas
// with id / name / is_a / synonym / is_obsolete tags. Other stanza kinds and
// tags are skipped. Throws parse_error (with a line number) for malformed
// stanzas and duplicate ids, validation_error when the loaded edge graph has
// a cycle.
Ontology parse_obo(std::istream& in);
Ontology parse_obo_file(const std::filesystem::path& path);

// Writes every concept back as a [Term] stanza; round-trips id, name, is_a,
// synonym and is_obsolete content.
void serialize_obo(const Ontology& o, std::ostream& out);

// Extension output: a header comment, one JSON line per insertion
// ({new_entity, new_id, parent_id, parent_name, layer}), then OBO stanzas
// for the inserted concepts. Byte-identical across runs on the same input.
void serialize_extension(const Ontology& o, const std::vector<InsertionRecord>& records,
                         std::ostream& out);

}  // namespace ontoext
