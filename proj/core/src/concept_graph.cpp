#include "cpo/concept_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cpo/error.hpp"
#include "demo_graph_data.hpp"
#include "json.hpp"

namespace cpo {
namespace {

using nlohmann::json;

constexpr std::string_view kCategoryNames[] = {"morphological", "density", "anatomical",
                                               "functional"};
constexpr std::string_view kRelationNames[] = {"association", "irrelevance", "exclusion"};

bool valid_identifier(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

bool valid_phrase(std::string_view name) {
  if (name.empty() || name.front() == ' ' || name.back() == ' ') return false;
  return name.find("  ") == std::string_view::npos &&
         name.find_first_of("\t\r\n") == std::string_view::npos;
}

const std::string& require_string(const json& node, const char* key, const char* where) {
  if (!node.is_object() || !node.contains(key) || !node.at(key).is_string()) {
    throw Error(ErrorCode::kParse, std::string(where) + " entry lacks string field '" + key + "'");
  }
  return node.at(key).get_ref<const std::string&>();
}

const json& require_array(const json& doc, const char* key) {
  static const json kEmpty = json::array();
  if (!doc.contains(key)) return kEmpty;
  if (!doc.at(key).is_array()) {
    throw Error(ErrorCode::kParse, std::string("'") + key + "' must be a list");
  }
  return doc.at(key);
}

}  // namespace

std::string_view to_string(AttributeCategory category) {
  return kCategoryNames[static_cast<int>(category)];
}

std::string_view to_string(RelationKind kind) { return kRelationNames[static_cast<int>(kind)]; }

AttributeCategory parse_category(std::string_view text) {
  for (int i = 0; i < 4; ++i) {
    if (text == kCategoryNames[i]) return static_cast<AttributeCategory>(i);
  }
  throw Error(ErrorCode::kParse, "unknown attribute category '" + std::string(text) + "'");
}

RelationKind parse_relation_kind(std::string_view text) {
  for (int i = 0; i < 3; ++i) {
    if (text == kRelationNames[i]) return static_cast<RelationKind>(i);
  }
  throw Error(ErrorCode::kParse, "unknown relation kind '" + std::string(text) + "'");
}

std::string Violation::describe() const {
  std::string out = rule + ":";
  for (const auto& s : subjects) out += " " + s;
  return out;
}

void ConceptGraph::add_entity(std::string name) { entities_.insert(std::move(name)); }

void ConceptGraph::add_attribute(std::string name, AttributeCategory category) {
  Attribute attr{name, category};
  attributes_.insert_or_assign(std::move(name), std::move(attr));
}

void ConceptGraph::set_relation(const std::string& entity, const std::string& attribute,
                                RelationKind kind) {
  relations_[{entity, attribute}] = kind;
}

void ConceptGraph::add_exclusion(const std::string& a, const std::string& b) {
  exclusions_.insert({a, b});
  exclusions_.insert({b, a});
}

void ConceptGraph::add_directed_exclusion(const std::string& a, const std::string& b) {
  exclusions_.insert({a, b});
}

bool ConceptGraph::has_entity(std::string_view name) const { return entities_.contains(name); }

bool ConceptGraph::has_attribute(std::string_view name) const {
  return attributes_.contains(name);
}

const Attribute& ConceptGraph::attribute(std::string_view name) const {
  auto it = attributes_.find(name);
  if (it == attributes_.end()) {
    throw Error(ErrorCode::kUnknownAttribute, std::string(name));
  }
  return it->second;
}

void ConceptGraph::require_entity(std::string_view name) const {
  if (!has_entity(name)) throw Error(ErrorCode::kUnknownEntity, std::string(name));
}

RelationKind ConceptGraph::relation_of(const std::string& entity,
                                       const std::string& attribute) const {
  require_entity(entity);
  if (!has_attribute(attribute)) throw Error(ErrorCode::kUnknownAttribute, attribute);
  auto it = relations_.find({entity, attribute});
  return it == relations_.end() ? RelationKind::kIrrelevance : it->second;
}

std::vector<std::string> ConceptGraph::attributes_with(const std::string& entity,
                                                       RelationKind kind) const {
  require_entity(entity);
  std::vector<std::string> out;
  // relations_ is ordered by (entity, attribute), so the range is sorted.
  for (auto it = relations_.lower_bound({entity, std::string()});
       it != relations_.end() && it->first.first == entity; ++it) {
    if (it->second == kind) out.push_back(it->first.second);
  }
  return out;
}

std::vector<std::string> ConceptGraph::associated_attributes(const std::string& entity) const {
  return attributes_with(entity, RelationKind::kAssociation);
}

std::vector<std::string> ConceptGraph::excluded_attributes(const std::string& entity) const {
  return attributes_with(entity, RelationKind::kExclusion);
}

bool ConceptGraph::entities_exclusive(const std::string& a, const std::string& b) const {
  return exclusions_.contains({a, b}) || exclusions_.contains({b, a});
}

ConceptGraph ConceptGraph::subgraph(const std::vector<std::string>& keep) const {
  ConceptGraph out;
  for (const auto& e : keep) {
    require_entity(e);
    out.add_entity(e);
  }
  out.attributes_ = attributes_;
  for (const auto& [key, kind] : relations_) {
    if (out.has_entity(key.first)) out.relations_[key] = kind;
  }
  for (const auto& pair : exclusions_) {
    if (out.has_entity(pair.first) && out.has_entity(pair.second)) out.exclusions_.insert(pair);
  }
  return out;
}

std::vector<Violation> validate(const ConceptGraph& graph) {
  std::vector<Violation> out;
  for (const auto& e : graph.entities()) {
    if (!valid_identifier(e)) out.push_back({"entity-name", {e}});
  }
  for (const auto& [name, attr] : graph.attributes()) {
    if (!valid_phrase(name)) out.push_back({"attribute-name", {name}});
  }
  for (const auto& [key, kind] : graph.relations()) {
    if (!graph.has_entity(key.first)) out.push_back({"relation-undeclared-entity", {key.first}});
    if (!graph.has_attribute(key.second)) {
      out.push_back({"relation-undeclared-attribute", {key.second}});
    }
  }
  for (const auto& [a, b] : graph.exclusions()) {
    if (!graph.has_entity(a) || !graph.has_entity(b)) {
      out.push_back({"exclusion-undeclared-entity", {a, b}});
    }
    if (a == b) out.push_back({"exclusion-reflexive", {a}});
    if (!graph.exclusions().contains({b, a})) out.push_back({"exclusion-asymmetric", {a, b}});
  }
  // The relation map holds one kind per key; this restates that no attribute
  // is both associated with and excluded from one entity.
  for (const auto& e : graph.entities()) {
    const auto assoc = graph.associated_attributes(e);
    const auto excl = graph.excluded_attributes(e);
    for (const auto& a : assoc) {
      if (std::find(excl.begin(), excl.end(), a) != excl.end()) {
        out.push_back({"association-exclusion-conflict", {e, a}});
      }
    }
  }
  for (const auto& [a, b] : graph.exclusions()) {
    const bool first_of_pair = a < b || !graph.exclusions().contains({b, a});
    if (!first_of_pair || !graph.has_entity(a) || !graph.has_entity(b)) continue;
    for (const auto& attr : graph.associated_attributes(a)) {
      auto it = graph.relations().find({b, attr});
      if (it != graph.relations().end() && it->second == RelationKind::kAssociation) {
        out.push_back({"exclusive-entities-share-association", {a, b, attr}});
      }
    }
  }
  return out;
}

ConceptGraph build_graph(std::string_view document) {
  json doc = json::object();
  try {
    if (document.find_first_not_of(" \t\r\n") != std::string_view::npos) {
      doc = json::parse(document);
    }
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (doc.is_null()) doc = json::object();
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "graph document must be an object");

  ConceptGraph graph;
  for (const auto& node : require_array(doc, "entities")) {
    const auto& name = require_string(node, "name", "entities");
    if (graph.has_entity(name)) throw Error(ErrorCode::kValidation, "duplicate entity " + name);
    graph.add_entity(name);
  }
  for (const auto& node : require_array(doc, "attributes")) {
    const auto& name = require_string(node, "name", "attributes");
    const auto category = parse_category(require_string(node, "category", "attributes"));
    if (graph.has_attribute(name)) {
      throw Error(ErrorCode::kValidation, "duplicate attribute " + name);
    }
    graph.add_attribute(name, category);
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& node : require_array(doc, "relations")) {
    const auto& entity = require_string(node, "entity", "relations");
    const auto& attribute = require_string(node, "attribute", "relations");
    const auto kind = parse_relation_kind(require_string(node, "kind", "relations"));
    if (!graph.has_entity(entity)) {
      throw Error(ErrorCode::kValidation, "relation references undeclared entity " + entity);
    }
    if (!graph.has_attribute(attribute)) {
      throw Error(ErrorCode::kValidation,
                  "relation references undeclared attribute " + attribute);
    }
    if (!seen.insert({entity, attribute}).second) {
      throw Error(ErrorCode::kValidation,
                  "more than one relation for (" + entity + ", " + attribute + ")");
    }
    graph.set_relation(entity, attribute, kind);
  }
  for (const auto& node : require_array(doc, "exclusions")) {
    if (!node.is_array() || node.size() != 2 || !node[0].is_string() || !node[1].is_string()) {
      throw Error(ErrorCode::kParse, "exclusions entries must be [entity, entity]");
    }
    graph.add_exclusion(node[0].get<std::string>(), node[1].get<std::string>());
  }

  const auto violations = validate(graph);
  if (!violations.empty()) {
    throw Error(ErrorCode::kValidation, violations.front().describe());
  }
  return graph;
}

ConceptGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open graph file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return build_graph(buffer.str());
}

std::string serialize_graph(const ConceptGraph& graph) {
  json doc = json::object();
  doc["entities"] = json::array();
  for (const auto& e : graph.entities()) doc["entities"].push_back({{"name", e}});
  doc["attributes"] = json::array();
  for (const auto& [name, attr] : graph.attributes()) {
    doc["attributes"].push_back({{"name", name}, {"category", to_string(attr.category)}});
  }
  doc["relations"] = json::array();
  for (const auto& [key, kind] : graph.relations()) {
    doc["relations"].push_back(
        {{"entity", key.first}, {"attribute", key.second}, {"kind", to_string(kind)}});
  }
  doc["exclusions"] = json::array();
  for (const auto& [a, b] : graph.exclusions()) {
    if (a < b || !graph.exclusions().contains({b, a})) doc["exclusions"].push_back({a, b});
  }
  return doc.dump(2) + "\n";
}

std::string_view demo_graph_document() { return kDemoGraphDocument; }

const ConceptGraph& demo_graph() {
  static const ConceptGraph graph = build_graph(kDemoGraphDocument);
  return graph;
}

}  // namespace cpo
