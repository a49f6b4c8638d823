#include <gtest/gtest.h>

#include <algorithm>

#include "cpo/concept_graph.hpp"
#include "cpo/error.hpp"
#include "support/expect.hpp"
#include "support/generators.hpp"

namespace cpo {
namespace {

TEST(ConceptGraph, DemoGraphHasTwelveEntitiesAndFiftyThreeAttributes) {
  EXPECT_EQ(demo_graph().entity_count(), 12u);
  EXPECT_EQ(demo_graph().attribute_count(), 53u);
  EXPECT_TRUE(validate(demo_graph()).empty());
}

TEST(ConceptGraph, EmptyDocumentGivesEmptyGraph) {
  const auto graph = build_graph("{}");
  EXPECT_EQ(graph.entity_count(), 0u);
  EXPECT_EQ(graph.attribute_count(), 0u);
  EXPECT_TRUE(graph.relations().empty());
}

TEST(ConceptGraph, SharedAssociationAcrossExclusiveEntitiesIsRejected) {
  const char* doc = R"({
    "entities": [{"name": "emphysema"}, {"name": "atelectasis"}],
    "attributes": [{"name": "hyperinflation", "category": "morphological"}],
    "relations": [
      {"entity": "emphysema", "attribute": "hyperinflation", "kind": "association"},
      {"entity": "atelectasis", "attribute": "hyperinflation", "kind": "association"}],
    "exclusions": [["emphysema", "atelectasis"]]})";
  try {
    build_graph(doc);
    FAIL() << "expected ValidationError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("hyperinflation"), std::string::npos);
  }
}

TEST(ConceptGraph, MalformedDocumentIsParseError) {
  EXPECT_CPO_ERROR(build_graph("{\"entities\": [}"), ErrorCode::kParse);
  EXPECT_CPO_ERROR(build_graph(R"({"entities": "x"})"), ErrorCode::kParse);
  EXPECT_CPO_ERROR(build_graph(R"({"attributes": [{"name": "a", "category": "colour"}]})"), ErrorCode::kParse);
}

TEST(ConceptGraph, RelationLookup) {
  const auto& g = demo_graph();
  EXPECT_EQ(g.relation_of("cardiomegaly", "enlarged cardiac silhouette"),
            RelationKind::kAssociation);
  EXPECT_EQ(g.relation_of("fracture", "enlarged cardiac silhouette"), RelationKind::kIrrelevance);
  EXPECT_CPO_ERROR(g.relation_of("cardiomegaly", "purple spots"), ErrorCode::kUnknownAttribute);
  EXPECT_CPO_ERROR(g.relation_of("gout", "hyperinflation"), ErrorCode::kUnknownEntity);
}

TEST(ConceptGraph, AssociatedAttributesAreSortedAndExact) {
  ConceptGraph g;
  g.add_entity("d");
  g.add_entity("bare");
  for (const char* a : {"zeta", "alpha", "mid", "other"}) {
    g.add_attribute(a, AttributeCategory::kDensity);
  }
  g.set_relation("d", "zeta", RelationKind::kAssociation);
  g.set_relation("d", "alpha", RelationKind::kAssociation);
  g.set_relation("d", "mid", RelationKind::kAssociation);
  g.set_relation("d", "other", RelationKind::kExclusion);
  EXPECT_EQ(g.associated_attributes("d"), (std::vector<std::string>{"alpha", "mid", "zeta"}));
  EXPECT_EQ(g.excluded_attributes("d"), (std::vector<std::string>{"other"}));
  EXPECT_TRUE(g.associated_attributes("bare").empty());
  EXPECT_CPO_ERROR(g.associated_attributes("nobody"), ErrorCode::kUnknownEntity);
}

TEST(ConceptGraph, DemoPneumoniaMentionsFocalConsolidation) {
  const auto assoc = demo_graph().associated_attributes("pneumonia");
  EXPECT_NE(std::find(assoc.begin(), assoc.end(), "focal consolidation"), assoc.end());
}

TEST(ConceptGraph, AsymmetricExclusionIsOneViolation) {
  ConceptGraph g;
  g.add_entity("a");
  g.add_entity("b");
  g.add_directed_exclusion("a", "b");
  const auto violations = validate(g);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_EQ(violations[0].rule, "exclusion-asymmetric");
}

TEST(ConceptGraph, ReflexiveExclusionAndUndeclaredNamesAreViolations) {
  ConceptGraph g;
  g.add_entity("a");
  g.add_exclusion("a", "a");
  EXPECT_FALSE(validate(g).empty());

  ConceptGraph h;
  h.add_entity("a");
  h.set_relation("a", "ghost", RelationKind::kAssociation);
  ASSERT_EQ(validate(h).size(), 1u);
  EXPECT_EQ(validate(h)[0].rule, "relation-undeclared-attribute");
}

TEST(ConceptGraphProperty, RandomGraphsSatisfyInvariants) {
  Rng rng(0x6a09e667);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = testing::random_graph(rng);
    ASSERT_TRUE(validate(g).empty()) << validate(g).front().describe();
    for (const auto& [a, b] : g.exclusions()) {
      EXPECT_TRUE(g.exclusions().contains({b, a}));
      EXPECT_NE(a, b);
    }
    for (const auto& e : g.entities()) {
      const auto assoc = g.associated_attributes(e);
      for (const auto& x : g.excluded_attributes(e)) {
        EXPECT_EQ(std::find(assoc.begin(), assoc.end(), x), assoc.end());
      }
    }
    for (const auto& [a, b] : g.exclusions()) {
      for (const auto& attr : g.associated_attributes(a)) {
        EXPECT_NE(g.relation_of(b, attr), RelationKind::kAssociation);
      }
    }
  }
}

TEST(ConceptGraphProperty, SerializeBuildRoundTrip) {
  Rng rng(0xbb67ae85);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = testing::random_graph(rng);
    EXPECT_EQ(build_graph(serialize_graph(g)), g);
  }
  EXPECT_EQ(build_graph(serialize_graph(demo_graph())), demo_graph());
}

TEST(ConceptGraph, SubgraphKeepsRelationsOfKeptEntities) {
  const auto sub = demo_graph().subgraph({"pneumonia", "consolidation"});
  EXPECT_EQ(sub.entity_count(), 2u);
  EXPECT_EQ(sub.associated_attributes("pneumonia"),
            demo_graph().associated_attributes("pneumonia"));
  EXPECT_TRUE(validate(sub).empty());
}

}  // namespace
}  // namespace cpo
