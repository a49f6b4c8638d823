#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpo {

enum class AttributeCategory { kMorphological, kDensity, kAnatomical, kFunctional };
enum class RelationKind { kAssociation, kIrrelevance, kExclusion };

std::string_view to_string(AttributeCategory category);
std::string_view to_string(RelationKind kind);
AttributeCategory parse_category(std::string_view text);
RelationKind parse_relation_kind(std::string_view text);

struct Attribute {
  std::string name;
  AttributeCategory category;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct Violation {
  std::string rule;
  std::vector<std::string> subjects;

  std::string describe() const;
};

/// Disease entities, radiographic attributes and the triadic relations between
/// them. Entity-attribute pairs without a stored edge are Irrelevant.
///
/// The mutators do not enforce invariants; `build_graph` and `validate` do.
/// Treat a graph as immutable once it has been validated.
class ConceptGraph {
 public:
  void add_entity(std::string name);
  void add_attribute(std::string name, AttributeCategory category);
  /// Overwrites any previous relation for the pair.
  void set_relation(const std::string& entity, const std::string& attribute, RelationKind kind);
  /// Records {a, b} and {b, a}.
  void add_exclusion(const std::string& a, const std::string& b);
  /// Records only (a, b); used to represent one-sided input.
  void add_directed_exclusion(const std::string& a, const std::string& b);

  bool has_entity(std::string_view name) const;
  bool has_attribute(std::string_view name) const;
  const Attribute& attribute(std::string_view name) const;

  /// Lexicographically sorted.
  const std::set<std::string, std::less<>>& entities() const { return entities_; }
  const std::map<std::string, Attribute, std::less<>>& attributes() const { return attributes_; }
  const std::map<std::pair<std::string, std::string>, RelationKind>& relations() const {
    return relations_;
  }
  const std::set<std::pair<std::string, std::string>>& exclusions() const { return exclusions_; }

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t attribute_count() const { return attributes_.size(); }

  RelationKind relation_of(const std::string& entity, const std::string& attribute) const;
  std::vector<std::string> associated_attributes(const std::string& entity) const;
  std::vector<std::string> excluded_attributes(const std::string& entity) const;
  bool entities_exclusive(const std::string& a, const std::string& b) const;

  /// Copy restricted to `keep` entities; attributes and their relations to
  /// kept entities are retained.
  ConceptGraph subgraph(const std::vector<std::string>& keep) const;

  friend bool operator==(const ConceptGraph&, const ConceptGraph&) = default;

 private:
  std::vector<std::string> attributes_with(const std::string& entity, RelationKind kind) const;
  void require_entity(std::string_view name) const;

  std::set<std::string, std::less<>> entities_;
  std::map<std::string, Attribute, std::less<>> attributes_;
  std::map<std::pair<std::string, std::string>, RelationKind> relations_;
  std::set<std::pair<std::string, std::string>> exclusions_;
};

std::vector<Violation> validate(const ConceptGraph& graph);

/// Parses the JSON graph document and validates it. Throws kParse on malformed
/// input and kValidation naming the first offending identifiers.
ConceptGraph build_graph(std::string_view document);
ConceptGraph load_graph(const std::string& path);

std::string serialize_graph(const ConceptGraph& graph);

/// The bundled 12-entity / 53-attribute chest radiography graph.
const ConceptGraph& demo_graph();
std::string_view demo_graph_document();

}  // namespace cpo
