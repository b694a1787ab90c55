#include "demo_corpus.hpp"

#include <string>
#include <vector>

#include <json.hpp>

#include "ontoext/deid.hpp"
#include "ontoext/entity_extract.hpp"
#include "ontoext/evalkit.hpp"
#include "ontoext/extend.hpp"
#include "ontoext/fsio.hpp"
#include "ontoext/gateway.hpp"
#include "ontoext/ontology.hpp"

namespace ontoext::demo {

namespace {

namespace fs = std::filesystem;

constexpr const char* kChatModel = "scripted-chat";
constexpr const char* kEmbedModel = "scripted-embed";
constexpr const char* kJudgeModel = "scripted-judge";

const char* kNote001 =
    "Admission note for John Maxwell, seen at Mercy General Hospital on "
    "03/14/2024.\n"
    "The patient is a 67-year-old retired electrician from Springfield.\n"
    "History of COPD and type 2 diabetes mellitus. Chest imaging on admission "
    "is\nconsistent with community-acquired pneumonia. Contact number "
    "555-0142.\n";

const char* kNote002 =
    "Ms. Sarah Quinn (MRN 88-4412) presented to the oncology clinic on "
    "2024-05-02.\n"
    "She lives in Dover, zip 19901, and works as a school librarian.\n"
    "Biopsy confirmed triple-negative breast cancer. Earlier this season she "
    "was\ntreated for influenza. She also reports longstanding rheumatoid "
    "arthritis\nand stage 3 chronic kidney disease.\n";

const char* kNote003 =
    "Follow-up via patient portal account pdavis2; visit summary sent to\n"
    "p.davis@example.org and posted at https://portal.example.org/v/88231.\n"
    "Seasonal influenza resolved. Imaging review raises concern for small "
    "cell\nlung carcinoma; hematology consult notes acute myeloid leukemia in "
    "remission.\n";

const char* kSeedObo = R"(format-version: 1.2
ontology: demo-disease

[Term]
id: DOID:4
name: disease

[Term]
id: DOID:162
name: cancer
synonym: "malignant tumor" EXACT []
is_a: DOID:4 ! disease

[Term]
id: DOID:1612
name: breast cancer
is_a: DOID:162 ! cancer

[Term]
id: DOID:1324
name: lung cancer
is_a: DOID:162 ! cancer

[Term]
id: DOID:1240
name: leukemia
is_a: DOID:162 ! cancer

[Term]
id: DOID:74
name: disease of metabolism
is_a: DOID:4 ! disease

[Term]
id: DOID:9351
name: diabetes mellitus
is_a: DOID:74 ! disease of metabolism

[Term]
id: DOID:1579
name: respiratory system disease
is_a: DOID:4 ! disease

[Term]
id: DOID:552
name: pneumonia
is_a: DOID:1579 ! respiratory system disease

[Term]
id: DOID:784
name: chronic obstructive pulmonary disease
is_a: DOID:1579 ! respiratory system disease

[Term]
id: DOID:17
name: musculoskeletal system disease
is_a: DOID:4 ! disease

[Term]
id: DOID:7148
name: rheumatoid arthritis
is_a: DOID:17 ! musculoskeletal system disease

[Term]
id: DOID:0050117
name: disease by infectious agent
is_a: DOID:4 ! disease

[Term]
id: DOID:8469
name: influenza
is_a: DOID:0050117 ! disease by infectious agent

[Term]
id: DOID:104
name: bacterial infectious disease
is_a: DOID:0050117 ! disease by infectious agent
)";

// Identifier inventories the scripted masking model reports, one JSON body
// per note. note002 uses the "zipcode" alias and note003 arrives fenced, so a
// live run also exercises the tolerant parsing paths.
const char* kPhiReply001 = R"({
  "person": ["John Maxwell"],
  "location": ["Springfield"],
  "organization": ["Mercy General Hospital"],
  "age": ["67-year-old"],
  "phone number": ["555-0142"],
  "email": [],
  "date and time": ["03/14/2024"],
  "zip": [],
  "profession": ["electrician"],
  "username": [],
  "id": [],
  "url": []
})";

const char* kPhiReply002 = R"({
  "person": ["Sarah Quinn"],
  "location": ["Dover"],
  "organization": ["oncology clinic"],
  "age": [],
  "phone number": [],
  "email": [],
  "date and time": ["2024-05-02"],
  "zipcode": ["19901"],
  "profession": ["school librarian"],
  "username": [],
  "id": ["88-4412"],
  "url": []
})";

const char* kPhiReply003 = R"(```json
{
  "person": [],
  "location": [],
  "organization": [],
  "age": [],
  "phone number": [],
  "email": ["p.davis@example.org"],
  "date and time": [],
  "zip": [],
  "profession": [],
  "username": ["pdavis2"],
  "id": [],
  "url": ["https://portal.example.org/v/88231"]
}
```)";

const char* kDiseaseReply001 =
    R"(["COPD", "type 2 diabetes mellitus", "community-acquired pneumonia"])";
const char* kDiseaseReply002 =
    R"(["triple-negative breast cancer", "influenza", "rheumatoid arthritis", "chronic kidney disease"])";
const char* kDiseaseReply003 =
    R"(["seasonal influenza", "small cell lung carcinoma", "acute myeloid leukemia"])";

struct EmbedFixture {
  const char* text;
  std::vector<double> values;
};

// Eight axes: one per top branch (0-4) plus three discriminators (5-7).
// Shared strings (an entity that is also a concept name) get one vector.
const std::vector<EmbedFixture> kEmbeddings = {
    // branch concepts
    {"cancer", {1, 0, 0, 0, 0, 0, 0, 0}},
    {"disease of metabolism", {0, 1, 0, 0, 0, 0, 0, 0}},
    {"respiratory system disease", {0, 0, 1, 0, 0, 0, 0, 0}},
    {"musculoskeletal system disease", {0, 0, 0, 1, 0, 0, 0, 0}},
    {"disease by infectious agent", {0, 0, 0, 0, 1, 0, 0, 0}},
    // second-layer concepts
    {"breast cancer", {0.6, 0, 0, 0, 0, 0.8, 0, 0}},
    {"lung cancer", {0.6, 0, 0, 0, 0, 0, 0.8, 0}},
    {"leukemia", {0.6, 0, 0, 0, 0, 0, 0, 0.8}},
    {"diabetes mellitus", {0, 1, 0, 0, 0, 0, 0, 0}},
    {"pneumonia", {0, 0, 0.8, 0, 0, 0.5, 0, 0}},
    {"chronic obstructive pulmonary disease", {0, 0, 0.8, 0, 0, 0, 0.5, 0}},
    {"influenza", {0, 0, 0, 0, 0.8, 0.5, 0, 0}},
    {"bacterial infectious disease", {0, 0, 0, 0, 0.8, 0, 0.5, 0}},
    {"rheumatoid arthritis", {0, 0, 0, 0.9, 0, 0.3, 0, 0}},
    // entities that are not concept names
    {"copd", {0, 0, 0.8, 0, 0, 0, 0.55, 0}},
    {"type 2 diabetes mellitus", {0, 1, 0, 0, 0, 0.1, 0, 0}},
    {"community-acquired pneumonia", {0, 0, 0.8, 0, 0, 0.55, 0, 0}},
    {"triple-negative breast cancer", {0.6, 0, 0, 0, 0, 0.85, 0, 0}},
    {"chronic kidney disease", {0.1, 0.5, 0.1, 0, 0, 0, 0, 0.2}},
    {"seasonal influenza", {0, 0, 0, 0, 0.75, 0.6, 0, 0}},
    {"small cell lung carcinoma", {0.6, 0, 0, 0, 0, 0, 0.85, 0}},
    {"acute myeloid leukemia", {0.6, 0, 0, 0, 0, 0, 0, 0.85}},
};

struct RelationFixture {
  const char* entity;
  const char* anchor;
  const char* parent;
  const char* reply;
};

const std::vector<RelationFixture> kRelations = {
    {"copd", "respiratory system disease", "disease", "Subsetting"},
    {"copd", "chronic obstructive pulmonary disease", "respiratory system disease",
     "Equivalence"},
    {"type 2 diabetes mellitus", "disease of metabolism", "disease", "Subsetting"},
    {"type 2 diabetes mellitus", "diabetes mellitus", "disease of metabolism",
     "The relation is: Subsetting"},
    {"community-acquired pneumonia", "respiratory system disease", "disease", "Subsetting"},
    {"community-acquired pneumonia", "pneumonia", "respiratory system disease",
     "Subsetting."},
    {"triple-negative breast cancer", "cancer", "disease", "Subsetting"},
    {"triple-negative breast cancer", "breast cancer", "cancer", "Subsetting"},
    {"influenza", "disease by infectious agent", "disease", "Subsetting"},
    {"influenza", "influenza", "disease by infectious agent", "Equivalence"},
    {"rheumatoid arthritis", "musculoskeletal system disease", "disease", "Subsetting"},
    {"rheumatoid arthritis", "rheumatoid arthritis", "musculoskeletal system disease",
     "Equivalence"},
    {"chronic kidney disease", "disease of metabolism", "disease", "Neither"},
    {"seasonal influenza", "disease by infectious agent", "disease", "Subsetting"},
    {"seasonal influenza", "influenza", "disease by infectious agent", "Subsetting"},
    {"small cell lung carcinoma", "cancer", "disease", "Subsetting"},
    {"small cell lung carcinoma", "lung cancer", "cancer", "Subsetting"},
    {"acute myeloid leukemia", "cancer", "disease", "Subsetting"},
    {"acute myeloid leukemia", "leukemia", "cancer", "Subsetting"},
};

struct JudgeFixture {
  const char* entity;
  const char* parent;
  const char* reply;
};

const std::vector<JudgeFixture> kJudgements = {
    {"type 2 diabetes mellitus", "diabetes mellitus", "Correct"},
    {"community-acquired pneumonia", "pneumonia", "correct."},
    {"triple-negative breast cancer", "breast cancer", "Correct"},
    {"chronic kidney disease", "disease of metabolism", "Incorrect"},
    {"seasonal influenza", "influenza", "Not sure"},
    {"small cell lung carcinoma", "lung cancer", "Correct"},
    {"acute myeloid leukemia", "leukemia", "Correct"},
};

nlohmann::ordered_json gold_inventory(
    const std::string& note_id,
    const std::vector<std::pair<const char*, std::vector<const char*>>>& entries) {
  PhiInventory inventory;
  for (const auto& [category, values] : entries)
    for (const char* value : values)
      inventory[*phi_category_from(category)].push_back(value);
  nlohmann::ordered_json line;
  line["note_id"] = note_id;
  line["identifiers"] = inventory.to_json();
  return line;
}

}  // namespace

DemoLayout write_demo(const fs::path& dir) {
  DemoLayout layout;
  layout.root = dir;
  layout.notes_dir = dir / "notes";
  layout.seed_obo = dir / "seed.obo";
  layout.script_dir = dir / "script";
  layout.config_file = dir / "config.json";
  layout.gold_file = dir / "gold.jsonl";

  fs::create_directories(layout.notes_dir);
  fs::create_directories(layout.script_dir);

  write_file_atomic(layout.notes_dir / "note001.txt", kNote001);
  write_file_atomic(layout.notes_dir / "note002.txt", kNote002);
  write_file_atomic(layout.notes_dir / "note003.txt", kNote003);
  write_file_atomic(layout.seed_obo, kSeedObo);

  const std::vector<std::pair<ClinicalNote, const char*>> phi_replies = {
      {{"note001", kNote001}, kPhiReply001},
      {{"note002", kNote002}, kPhiReply002},
      {{"note003", kNote003}, kPhiReply003},
  };
  for (const auto& [note, reply] : phi_replies)
    ScriptedBackend::script_chat(layout.script_dir, kChatModel, phi_exchange(note), reply);

  // Masked texts must match what the pipeline will produce, so run the real
  // masking path over the fixtures just written.
  ProviderConfig chat_cfg;
  chat_cfg.endpoint = "scripted:" + layout.script_dir.string();
  chat_cfg.model = kChatModel;
  ModelGateway chat(chat_cfg);

  const std::vector<std::pair<std::string, const char*>> disease_replies = {
      {"note001", kDiseaseReply001},
      {"note002", kDiseaseReply002},
      {"note003", kDiseaseReply003},
  };
  for (const auto& [note_id, reply] : disease_replies) {
    const ClinicalNote& raw = note_id == "note001"   ? phi_replies[0].first
                              : note_id == "note002" ? phi_replies[1].first
                                                     : phi_replies[2].first;
    ClinicalNote masked{note_id, mask(raw.text, extract_phi(chat, raw))};
    ScriptedBackend::script_chat(layout.script_dir, kChatModel, disease_exchange(masked), reply);
  }

  for (const EmbedFixture& fixture : kEmbeddings)
    ScriptedBackend::script_embedding(layout.script_dir, kEmbedModel, fixture.text,
                                      fixture.values);

  for (const RelationFixture& fixture : kRelations)
    ScriptedBackend::script_chat(layout.script_dir, kChatModel,
                                 relation_exchange(fixture.entity, fixture.anchor,
                                                   fixture.parent),
                                 fixture.reply);

  for (const JudgeFixture& fixture : kJudgements) {
    InsertionRecord record;
    record.new_entity = fixture.entity;
    record.parent_name = fixture.parent;
    ScriptedBackend::script_chat(layout.script_dir, kJudgeModel, judge_exchange(record),
                                 fixture.reply);
  }

  std::vector<nlohmann::ordered_json> gold_lines = {
      gold_inventory("note001", {{"person", {"John Maxwell"}},
                                 {"location", {"Springfield"}},
                                 {"organization", {"Mercy General Hospital"}},
                                 {"age", {"67-year-old"}},
                                 {"phone number", {"555-0142"}},
                                 {"date and time", {"03/14/2024"}},
                                 {"profession", {"electrician"}}}),
      // The model also reports "oncology clinic"; gold does not, so the
      // identifier metrics show one false positive here.
      gold_inventory("note002", {{"person", {"Sarah Quinn"}},
                                 {"location", {"Dover"}},
                                 {"date and time", {"2024-05-02"}},
                                 {"zip", {"19901"}},
                                 {"profession", {"school librarian"}},
                                 {"id", {"88-4412"}}}),
      // Gold counts the trailing record number as an id; the model misses
      // it, so the metrics also show one false negative.
      gold_inventory("note003", {{"email", {"p.davis@example.org"}},
                                 {"username", {"pdavis2"}},
                                 {"id", {"88231"}},
                                 {"url", {"https://portal.example.org/v/88231"}}}),
  };
  std::string gold_text;
  for (const auto& line : gold_lines) gold_text += line.dump() + "\n";
  write_file_atomic(layout.gold_file, gold_text);

  nlohmann::ordered_json config;
  config["notes"] = "notes";
  config["ontology"] = "seed.obo";
  config["output"] = "out";
  config["pipeline_model"] = {{"endpoint", "scripted:script"}, {"model", kChatModel}};
  config["embedding_model"] = {
      {"endpoint", "scripted:script"}, {"model", kEmbedModel}, {"embedding_dim", 8}};
  config["judge_model"] = {{"endpoint", "scripted:script"}, {"model", kJudgeModel}};
  config["thresholds"] = {{"reference", 90}, {"eval", {60, 70, 80}}};
  config["workers"] = 2;
  config["phi_gold"] = "gold.jsonl";
  config["scripted_only"] = true;
  write_file_atomic(layout.config_file, config.dump(2) + "\n");

  return layout;
}

}  // namespace ontoext::demo
