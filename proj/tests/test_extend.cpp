#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "ontoext/errors.hpp"
#include "ontoext/extend.hpp"
#include "support.hpp"

using namespace ontoext;

namespace {

void add(Ontology& o, const char* id, const char* name) {
  Concept c;
  c.id = ConceptId(id);
  c.name = name;
  o.add_concept(std::move(c));
}

// disease -> {cancer, infectious disease}; cancer -> {lung cancer, breast
// cancer}; infectious disease -> {influenza}. Three layers deep.
Ontology cancer_seed() {
  Ontology o;
  add(o, "R:0", "disease");
  add(o, "R:1", "cancer");
  add(o, "R:2", "infectious disease");
  add(o, "R:3", "lung cancer");
  add(o, "R:4", "breast cancer");
  add(o, "R:5", "influenza");
  o.add_edge(ConceptId("R:0"), ConceptId("R:1"));
  o.add_edge(ConceptId("R:0"), ConceptId("R:2"));
  o.add_edge(ConceptId("R:1"), ConceptId("R:3"));
  o.add_edge(ConceptId("R:1"), ConceptId("R:4"));
  o.add_edge(ConceptId("R:2"), ConceptId("R:5"));
  return o;
}

void script_seed_vectors(const std::filesystem::path& dir) {
  ScriptedBackend::script_embedding(dir, "embed-model", "cancer", {0.9, 0.1, 0, 0});
  ScriptedBackend::script_embedding(dir, "embed-model", "infectious disease", {0, 1, 0, 0});
  ScriptedBackend::script_embedding(dir, "embed-model", "lung cancer", {0.2, 0, 1, 0});
  ScriptedBackend::script_embedding(dir, "embed-model", "breast cancer", {0.85, 0, 0.3, 0});
  ScriptedBackend::script_embedding(dir, "embed-model", "influenza", {0, 0.7, 0.7, 0});
}

void script_relation(const std::filesystem::path& dir, const std::string& entity,
                     const std::string& anchor, const std::string& parent,
                     const std::string& reply) {
  ScriptedBackend::script_chat(dir, "chat-model", relation_exchange(entity, anchor, parent),
                               reply);
}

ModelGateway chat_gateway(const testsup::TempDir& dir) {
  return ModelGateway(testsup::scripted_provider(dir.path(), "chat-model"));
}

ModelGateway embed_gateway(const testsup::TempDir& dir) {
  return ModelGateway(testsup::scripted_provider(dir.path(), "embed-model"));
}

}  // namespace

TEST_CASE("cosine similarity behaves like cosine similarity") {
  EmbeddingVector x{{1, 0}}, y{{0, 1}}, xy{{1, 1}};
  CHECK(cosine(x, x) == doctest::Approx(1.0));
  CHECK(cosine(x, y) == doctest::Approx(0.0));
  CHECK(cosine(xy, x) == doctest::Approx(0.7071067811865475));

  CHECK_THROWS_AS(cosine(x, EmbeddingVector{{1, 0, 0}}), argument_error);
  CHECK_THROWS_AS(cosine(x, EmbeddingVector{{0, 0}}), argument_error);
}

TEST_CASE("cosine ignores vector magnitude") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> coord(0.1, 1.0);
  std::uniform_int_distribution<int> dims(2, 8);
  for (int round = 0; round < 20; ++round) {
    int d = dims(rng);
    EmbeddingVector a, b, scaled;
    for (int i = 0; i < d; ++i) {
      a.values.push_back(coord(rng));
      b.values.push_back(coord(rng));
      scaled.values.push_back(a.values.back() * 17.0);
    }
    CHECK(cosine(a, b) == doctest::Approx(cosine(scaled, b)).epsilon(1e-12));
  }
}

TEST_CASE("nearest keeps the earliest candidate on a tie") {
  Ontology o;
  add(o, "X:0", "root");
  add(o, "X:1", "alpha");
  add(o, "X:2", "beta");
  o.add_edge(ConceptId("X:0"), ConceptId("X:1"));
  o.add_edge(ConceptId("X:0"), ConceptId("X:2"));

  testsup::TempDir dir;
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "alpha", {1, 0});
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "beta", {1, 0});
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "gamma", {1, 0});
  ModelGateway embedder = embed_gateway(dir);

  std::vector<ConceptId> candidates = o.root_layer();
  AnchorMatch match = nearest(o, "gamma", candidates, embedder, 3);
  CHECK(match.candidate_id == ConceptId("X:1"));
  CHECK(match.similarity == doctest::Approx(1.0));
  CHECK(match.layer == 3);

  CHECK_THROWS_AS(nearest(o, "gamma", {}, embedder, 0), argument_error);
}

TEST_CASE("synonym matching can lift a concept to the top") {
  Ontology o;
  add(o, "X:0", "root");
  add(o, "X:1", "alpha");
  Concept beta;
  beta.id = ConceptId("X:2");
  beta.name = "beta";
  beta.synonyms = {"gamma twin"};
  o.add_concept(std::move(beta));
  o.add_edge(ConceptId("X:0"), ConceptId("X:1"));
  o.add_edge(ConceptId("X:0"), ConceptId("X:2"));

  testsup::TempDir dir;
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "alpha", {0, 1});
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "beta", {0.5, 0.5});
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "gamma twin", {1, 0});
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "gamma", {1, 0});
  ModelGateway embedder = embed_gateway(dir);

  std::vector<ConceptId> candidates = o.root_layer();
  AnchorMatch plain = nearest(o, "gamma", candidates, embedder, 0, false);
  CHECK(plain.candidate_id == ConceptId("X:2"));
  CHECK(plain.similarity == doctest::Approx(0.7071067811865475));

  AnchorMatch lifted = nearest(o, "gamma", candidates, embedder, 0, true);
  CHECK(lifted.candidate_id == ConceptId("X:2"));
  CHECK(lifted.similarity == doctest::Approx(1.0));
}

TEST_CASE("relation labels parse from canonical names and close variants") {
  CHECK(relation_label_from("Equivalence") == RelationLabel::Equivalence);
  CHECK(relation_label_from("equivalent") == RelationLabel::Equivalence);
  CHECK(relation_label_from("  SAME. ") == RelationLabel::Equivalence);
  CHECK(relation_label_from("synonym") == RelationLabel::Equivalence);
  CHECK(relation_label_from("Subsetting") == RelationLabel::Subsetting);
  CHECK(relation_label_from("subset") == RelationLabel::Subsetting);
  CHECK(relation_label_from("subclass!") == RelationLabel::Subsetting);
  CHECK(relation_label_from("narrower") == RelationLabel::Subsetting);
  CHECK(relation_label_from("Neither") == RelationLabel::Neither);
  CHECK(relation_label_from("none") == RelationLabel::Neither);
  CHECK(relation_label_from("no  relation") == RelationLabel::Neither);
  CHECK_THROWS_AS(relation_label_from("banana"), format_error);
  CHECK_THROWS_AS(relation_label_from(""), format_error);

  for (RelationLabel label : {RelationLabel::Equivalence, RelationLabel::Subsetting,
                              RelationLabel::Neither})
    CHECK(relation_label_from(relation_label_name(label)) == label);
}

TEST_CASE("the relation question names both the anchor and its parent") {
  ChatExchange exchange = relation_exchange("aml", "cancer", "disease");
  CHECK(exchange.user_prompt.find("New entity: \"aml\"") != std::string::npos);
  CHECK(exchange.user_prompt.find("\"cancer\" (a kind of \"disease\")") != std::string::npos);
  CHECK(exchange.user_prompt.find("exactly one word") != std::string::npos);
}

TEST_CASE("relation classification recovers once and gives up as Neither") {
  testsup::TempDir dir;
  const ChatExchange base = relation_exchange("aml", "cancer", "disease");
  ChatExchange reminded = base;
  reminded.user_prompt +=
      "\n\nYour previous reply was not one of the three labels. Respond with "
      "exactly one word: Equivalence, Subsetting, or Neither.";

  SUBCASE("a parseable second answer wins") {
    ScriptedBackend::script_chat(dir.path(), "chat-model", base,
                                 "Possibly a subset relation here");
    ScriptedBackend::script_chat(dir.path(), "chat-model", reminded, "Subsetting");
    ModelGateway chat = chat_gateway(dir);
    testsup::WarnCapture warnings;
    RelationVerdict verdict = classify_relation(chat, "aml", "cancer", "disease");
    CHECK(verdict.label == RelationLabel::Subsetting);
    CHECK(verdict.raw_response == "Subsetting");
    CHECK(warnings.messages.empty());
  }

  SUBCASE("persistent nonsense falls back to Neither with a warning") {
    ScriptedBackend::script_chat(dir.path(), "chat-model", base,
                                 "hard to say either way today");
    ScriptedBackend::script_chat(dir.path(), "chat-model", reminded,
                                 "truly hard to say either way");
    ModelGateway chat = chat_gateway(dir);
    testsup::WarnCapture warnings;
    RelationVerdict verdict = classify_relation(chat, "aml", "cancer", "disease");
    CHECK(verdict.label == RelationLabel::Neither);
    CHECK(verdict.raw_response == "truly hard to say either way");
    CHECK(warnings.any_contains("stayed unparseable"));
  }
}

TEST_CASE("a narrower-than-leaf entity is inserted under the leaf") {
  Ontology o = cancer_seed();
  testsup::TempDir dir;
  script_seed_vectors(dir.path());
  ScriptedBackend::script_embedding(dir.path(), "embed-model",
                                    "triple-negative breast cancer", {1, 0, 0, 0});
  script_relation(dir.path(), "triple-negative breast cancer", "cancer", "disease",
                  "Subsetting");
  script_relation(dir.path(), "triple-negative breast cancer", "breast cancer", "cancer",
                  "Subsetting");
  ModelGateway chat = chat_gateway(dir), embedder = embed_gateway(dir);

  ExtensionTrace trace = extend_one(o, "triple-negative breast cancer", chat, embedder);

  CHECK(trace.outcome.kind == ExtensionOutcome::Kind::Inserted);
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.steps[0].layer == 0);
  CHECK(trace.steps[0].candidate_count == 2);
  CHECK(trace.steps[0].anchor_name == "cancer");
  CHECK(trace.steps[0].similarity == doctest::Approx(0.993883734673619).epsilon(1e-12));
  CHECK(trace.steps[0].verdict == RelationLabel::Subsetting);
  CHECK(trace.steps[1].layer == 1);
  CHECK(trace.steps[1].anchor_name == "breast cancer");

  REQUIRE(trace.insertion.has_value());
  CHECK(trace.insertion->new_id == ConceptId("EXT:0000001"));
  CHECK(trace.insertion->parent_id == ConceptId("R:4"));
  CHECK(trace.insertion->parent_name == "breast cancer");
  CHECK(trace.insertion->layer == 2);

  CHECK(o.size() == 7);
  CHECK(o.at(ConceptId("EXT:0000001")).name == "triple-negative breast cancer");
  CHECK(o.at(ConceptId("EXT:0000001")).origin == ConceptOrigin::Inserted);
  CHECK(o.children(ConceptId("R:4")) == std::vector<ConceptId>{ConceptId("EXT:0000001")});
  CHECK(o.depth() == 4);
}

TEST_CASE("an entity unrelated to every candidate lands beside them") {
  Ontology o = cancer_seed();
  testsup::TempDir dir;
  script_seed_vectors(dir.path());
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "fungal infection",
                                    {0, 1, 0.2, 0});
  script_relation(dir.path(), "fungal infection", "infectious disease", "disease",
                  "Subsetting");
  script_relation(dir.path(), "fungal infection", "influenza", "infectious disease",
                  "Neither");
  ModelGateway chat = chat_gateway(dir), embedder = embed_gateway(dir);

  ExtensionTrace trace = extend_one(o, "fungal infection", chat, embedder);

  CHECK(trace.outcome.kind == ExtensionOutcome::Kind::Inserted);
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.steps[1].anchor_name == "influenza");
  CHECK(trace.steps[1].candidate_count == 1);
  CHECK(trace.steps[1].verdict == RelationLabel::Neither);
  // Neither at a layer attaches to the nearest concept found there.
  REQUIRE(trace.insertion.has_value());
  CHECK(trace.insertion->parent_id == ConceptId("R:5"));
  CHECK(trace.insertion->layer == 2);
}

TEST_CASE("an equivalent entity is reported as already present") {
  Ontology o = cancer_seed();
  testsup::TempDir dir;
  script_seed_vectors(dir.path());
  script_relation(dir.path(), "cancer", "cancer", "disease", "Equivalence");
  ModelGateway chat = chat_gateway(dir), embedder = embed_gateway(dir);

  ExtensionTrace trace = extend_one(o, "cancer", chat, embedder);

  CHECK(trace.outcome.kind == ExtensionOutcome::Kind::AlreadyPresent);
  CHECK(trace.outcome.concept_id == ConceptId("R:1"));
  CHECK(trace.steps.size() == 1);
  CHECK(trace.steps[0].similarity == doctest::Approx(1.0));
  CHECK_FALSE(trace.insertion.has_value());
  CHECK(o.size() == 6);
  CHECK(o.edge_count() == 5);

  nlohmann::json out = trace_to_json(trace);
  CHECK(out["outcome"] == "already_present");
  CHECK(out["concept_id"] == "R:1");
  CHECK_FALSE(out.contains("insertion"));
  CHECK_FALSE(out.contains("reason"));
}

TEST_CASE("later entities can nest under earlier insertions") {
  Ontology o = cancer_seed();
  testsup::TempDir dir;
  script_seed_vectors(dir.path());
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "aml", {0.6, 0, 0.8, 0});
  ScriptedBackend::script_embedding(dir.path(), "embed-model", "secondary aml",
                                    {0.58, 0, 0.81, 0});
  script_relation(dir.path(), "aml", "cancer", "disease", "Subsetting");
  script_relation(dir.path(), "aml", "lung cancer", "cancer", "Neither");
  script_relation(dir.path(), "secondary aml", "cancer", "disease", "Subsetting");
  script_relation(dir.path(), "secondary aml", "lung cancer", "cancer", "Subsetting");
  script_relation(dir.path(), "secondary aml", "aml", "lung cancer", "Subsetting");
  ModelGateway chat = chat_gateway(dir), embedder = embed_gateway(dir);

  ExtensionRun run = extend_all(o, {"aml", "secondary aml"}, chat, embedder);

  REQUIRE(run.traces.size() == 2);
  REQUIRE(run.records.size() == 2);
  CHECK(run.records[0].new_id == ConceptId("EXT:0000001"));
  CHECK(run.records[0].parent_id == ConceptId("R:3"));

  // The second walk descended into the first walk's insertion.
  const ExtensionTrace& second = run.traces[1];
  REQUIRE(second.steps.size() == 3);
  CHECK(second.steps[2].anchor_id == ConceptId("EXT:0000001"));
  CHECK(second.steps[2].anchor_name == "aml");
  CHECK(run.records[1].new_id == ConceptId("EXT:0000002"));
  CHECK(run.records[1].parent_id == ConceptId("EXT:0000001"));
  CHECK(run.records[1].parent_name == "aml");
  CHECK(run.records[1].layer == 3);

  // Step layers grow strictly down the hierarchy.
  for (const ExtensionTrace& trace : run.traces)
    for (std::size_t i = 1; i < trace.steps.size(); ++i)
      CHECK(trace.steps[i].layer == trace.steps[i - 1].layer + 1);

  nlohmann::json out = trace_to_json(second);
  CHECK(out["outcome"] == "inserted");
  CHECK(out["steps"].size() == 3);
  CHECK(out["steps"][2]["anchor_id"] == "EXT:0000001");
  CHECK(out["insertion"]["parent_id"] == "EXT:0000001");
  CHECK(out["insertion"]["new_id"] == "EXT:0000002");
}

TEST_CASE("extending nothing does nothing") {
  Ontology o = cancer_seed();
  testsup::TempDir dir;
  ModelGateway chat = chat_gateway(dir), embedder = embed_gateway(dir);
  ExtensionRun run = extend_all(o, {}, chat, embedder);
  CHECK(run.traces.empty());
  CHECK(run.records.empty());
  CHECK(o.size() == 6);
}

TEST_CASE("walk failures are reported in the outcome instead of thrown") {
  testsup::TempDir dir;
  ModelGateway chat = chat_gateway(dir), embedder = embed_gateway(dir);

  SUBCASE("a blank entity never starts") {
    Ontology o = cancer_seed();
    ExtensionTrace trace = extend_one(o, "   ", chat, embedder);
    CHECK(trace.outcome.kind == ExtensionOutcome::Kind::Failed);
    CHECK(trace.outcome.reason == "empty entity");
    CHECK(trace.steps.empty());
  }

  SUBCASE("a missing embedding fails that walk only") {
    Ontology o = cancer_seed();
    ExtensionTrace trace = extend_one(o, "mystery syndrome", chat, embedder);
    CHECK(trace.outcome.kind == ExtensionOutcome::Kind::Failed);
    CHECK(trace.outcome.reason.find("no scripted embedding") != std::string::npos);
    CHECK(o.size() == 6);
  }

  SUBCASE("a childless hierarchy has no candidate layer") {
    Ontology o;
    add(o, "R:0", "disease");
    ExtensionTrace trace = extend_one(o, "anything", chat, embedder);
    CHECK(trace.outcome.kind == ExtensionOutcome::Kind::Failed);
    CHECK(trace.outcome.reason == "no candidates at layer 0");
  }

  SUBCASE("the depth guard stops a descent that went too deep") {
    Ontology o = cancer_seed();
    ExtendOptions options;
    options.depth_guard_offset = -(o.depth() + 1);
    ExtensionTrace trace = extend_one(o, "anything", chat, embedder, options);
    CHECK(trace.outcome.kind == ExtensionOutcome::Kind::Failed);
    CHECK(trace.outcome.reason.find("descent exceeded depth limit") != std::string::npos);
  }
}
