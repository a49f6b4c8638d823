#include "cpo/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cpo/error.hpp"
#include "cpo/rng.hpp"
#include "json.hpp"

namespace cpo {
namespace {

using nlohmann::json;

constexpr std::string_view kFillerCue = "v:none";

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::vector<std::string> entity_list(const ConceptGraph& graph) {
  return {graph.entities().begin(), graph.entities().end()};
}

SampleRecord make_record(const WorldSpec& spec, const Vocab& vocab,
                         const std::vector<std::string>& entities,
                         std::span<const double> marginals, int regime, std::uint64_t seed) {
  const ConceptGraph& g = spec.graph;
  Rng rng(seed);
  const std::string& entity = entities[rng.categorical(marginals)];

  std::set<std::string> present;
  const auto associated = g.associated_attributes(entity);
  for (const auto& a : associated) {
    if (rng.bernoulli(spec.mention_rate)) present.insert(a);
  }
  if (present.empty() && !associated.empty()) present.insert(associated[rng.below(associated.size())]);

  const auto excluded = g.excluded_attributes(entity);
  if (spec.comorbidity_rate > 0.0 && rng.bernoulli(spec.comorbidity_rate)) {
    std::vector<std::string> partners;
    std::vector<double> weights;
    for (std::size_t i = 0; i < entities.size(); ++i) {
      if (entities[i] != entity && !g.entities_exclusive(entity, entities[i])) {
        partners.push_back(entities[i]);
        weights.push_back(marginals[i]);
      }
    }
    double mass = 0.0;
    for (double w : weights) mass += w;
    if (!partners.empty() && mass > 0.0) {
      const auto& partner = partners[rng.categorical(weights)];
      std::vector<std::string> extra;
      for (const auto& a : g.associated_attributes(partner)) {
        if (!present.contains(a) && !std::binary_search(excluded.begin(), excluded.end(), a)) {
          extra.push_back(a);
        }
      }
      if (!extra.empty()) present.insert(extra[rng.below(extra.size())]);
    }
  }

  if (spec.attribute_noise > 0.0 && rng.bernoulli(spec.attribute_noise)) {
    std::vector<std::string> irrelevant;
    for (const auto& [name, attr] : g.attributes()) {
      if (!present.contains(name) && g.relation_of(entity, name) == RelationKind::kIrrelevance) {
        irrelevant.push_back(name);
      }
    }
    if (!irrelevant.empty()) present.insert(irrelevant[rng.below(irrelevant.size())]);
  }

  Findings findings;
  for (const auto& a : present) findings.push_back({a, true});
  for (const auto& a : excluded) {
    if (rng.bernoulli(spec.negation_rate)) findings.push_back({a, false});
  }
  canonical_sort(g, findings);

  std::vector<std::string> cues;
  for (const auto& a : present) {
    if (rng.bernoulli(spec.cue_rate)) cues.push_back(cue_token(a));
  }
  rng.shuffle(cues);
  if (cues.size() > spec.observation_length) cues.resize(spec.observation_length);

  SampleRecord record;
  record.regime = regime;
  // Filler goes on the left so cues sit closest to the thinking segment.
  record.observation.assign(spec.observation_length - cues.size(), vocab.id(kFillerCue));
  for (const auto& c : cues) record.observation.push_back(vocab.id(c));
  for (const auto& p : spec.prompt) record.prompt.push_back(vocab.id(p));
  TokenSeq context = record.observation;
  context.insert(context.end(), record.prompt.begin(), record.prompt.end());
  record.trajectory = render_trajectory(findings, entity, vocab, std::move(context));
  return record;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

const std::string& field(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_string()) {
    throw Error(ErrorCode::kSchema, std::string("missing string field '") + key + "'");
  }
  return doc.at(key).get_ref<const std::string&>();
}

Trajectory parse_raw(const std::string& text, const Vocab& vocab, const TokenSeq& context) {
  return parse_trajectory(tokenize(text, vocab), vocab, context);
}

/// Runs `parse` for every non-blank line, rethrowing failures as SchemaError.
template <class T, class Parse>
std::vector<T> load_lines(const std::string& path, Parse parse) {
  std::vector<T> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    try {
      const json doc = json::parse(lines[i]);
      if (!doc.is_object()) throw Error(ErrorCode::kSchema, "record must be an object");
      out.push_back(parse(doc));
    } catch (const json::exception& e) {
      throw SchemaError(i + 1, e.what());
    } catch (const Error& e) {
      throw SchemaError(i + 1, e.what());
    }
  }
  return out;
}

}  // namespace

void check_world(const WorldSpec& spec) {
  const std::size_t n = spec.graph.entity_count();
  if (n == 0) throw Error(ErrorCode::kSpec, "world graph declares no entities");
  if (spec.label_marginals.empty()) throw Error(ErrorCode::kSpec, "no regime marginals");
  for (std::size_t r = 0; r < spec.label_marginals.size(); ++r) {
    const auto& m = spec.label_marginals[r];
    if (m.size() != n) {
      throw Error(ErrorCode::kSpec, "regime " + std::to_string(r) + " marginals have " +
                                        std::to_string(m.size()) + " entries for " +
                                        std::to_string(n) + " entities");
    }
    double sum = 0.0;
    for (double p : m) {
      if (!is_probability(p)) throw Error(ErrorCode::kSpec, "marginal outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kSpec, "regime " + std::to_string(r) + " marginals sum to " +
                                        std::to_string(sum));
    }
  }
  for (double p : {spec.attribute_noise, spec.comorbidity_rate, spec.mention_rate,
                   spec.negation_rate, spec.cue_rate}) {
    if (!is_probability(p)) throw Error(ErrorCode::kSpec, "rate outside [0, 1]");
  }
  if (spec.observation_length == 0) throw Error(ErrorCode::kSpec, "observation length is zero");
  if (spec.prompt.empty()) throw Error(ErrorCode::kSpec, "prompt is empty");
}

std::string cue_token(const std::string& attribute) {
  std::string out = "v:" + attribute;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

Vocab world_vocab(const WorldSpec& spec) {
  std::vector<std::string> extra = {std::string(kFillerCue)};
  for (const auto& [name, attr] : spec.graph.attributes()) extra.push_back(cue_token(name));
  extra.insert(extra.end(), spec.prompt.begin(), spec.prompt.end());
  return Vocab::from_graph(spec.graph, extra);
}

std::vector<double> zipf_marginals(std::size_t n, double s) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::vector<std::vector<double>> shifted_regimes(const std::vector<double>& base,
                                                 std::size_t count, double tv) {
  if (base.size() < 2 && tv > 0.0) throw Error(ErrorCode::kSpec, "cannot shift one entry");
  std::vector<std::vector<double>> out;
  if (count == 0) return out;
  out.push_back(base);
  for (std::size_t r = 1; r < count; ++r) {
    auto next = out.back();
    const auto hi = std::max_element(next.begin(), next.end());
    const auto lo = std::min_element(next.begin(), next.end());
    if (*hi < tv) throw Error(ErrorCode::kSpec, "shift exceeds the largest marginal");
    *hi -= tv;
    *lo += tv;
    out.push_back(std::move(next));
  }
  return out;
}

std::vector<SampleRecord> generate_regime(const WorldSpec& spec, int regime, std::size_t n,
                                          std::uint64_t seed) {
  check_world(spec);
  if (regime < 0 || static_cast<std::size_t>(regime) >= spec.label_marginals.size()) {
    throw Error(ErrorCode::kSpec, "regime " + std::to_string(regime) + " has no marginals");
  }
  const Vocab vocab = world_vocab(spec);
  const auto entities = entity_list(spec.graph);
  std::vector<SampleRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_record(spec, vocab, entities,
                              spec.label_marginals[static_cast<std::size_t>(regime)], regime,
                              mix_seed(seed, i)));
  }
  return out;
}

std::vector<SampleRecord> generate_world(const WorldSpec& spec, std::size_t n,
                                         std::uint64_t seed) {
  check_world(spec);
  const std::size_t regimes = spec.label_marginals.size();
  std::vector<SampleRecord> out;
  out.reserve(n);
  for (std::size_t r = 0; r < regimes; ++r) {
    const std::size_t count = n / regimes + (r < n % regimes ? 1 : 0);
    auto block = generate_regime(spec, static_cast<int>(r), count, mix_seed(seed, r));
    std::move(block.begin(), block.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<std::string> demo_world_entities() {
  // Frequency rank order: the first entity is the most common.
  return {"cardiomegaly", "pleural_effusion", "consolidation", "edema",
          "atelectasis",  "pneumonia",        "pneumothorax",  "emphysema"};
}

std::vector<std::string> confusable_entities() { return {"consolidation", "pneumonia"}; }

WorldSpec demo_world_spec(std::size_t regimes, double shift_tv) {
  WorldSpec spec;
  const auto ranked = demo_world_entities();
  spec.graph = demo_graph().subgraph(ranked);
  const auto by_rank = zipf_marginals(ranked.size(), 1.2);
  const auto sorted = entity_list(spec.graph);
  std::vector<double> base(sorted.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto pos = std::find(sorted.begin(), sorted.end(), ranked[i]) - sorted.begin();
    base[static_cast<std::size_t>(pos)] = by_rank[i];
  }
  spec.label_marginals = shifted_regimes(base, std::max<std::size_t>(regimes, 1), shift_tv);
  return spec;
}

std::string samples_jsonl(const std::vector<SampleRecord>& records, const Vocab& vocab) {
  std::string out;
  for (const auto& r : records) {
    const json doc = {{"observation", detokenize(r.observation, vocab)},
                      {"prompt", detokenize(r.prompt, vocab)},
                      {"trajectory", detokenize(r.trajectory.raw(vocab), vocab)},
                      {"regime", r.regime}};
    out += doc.dump() + "\n";
  }
  return out;
}

std::string pairs_jsonl(const std::vector<PreferencePair>& pairs, const Vocab& vocab) {
  std::string out;
  for (const auto& p : pairs) {
    const json doc = {{"context", detokenize(p.context(), vocab)},
                      {"preferred", detokenize(p.preferred.raw(vocab), vocab)},
                      {"counterfactual", detokenize(p.counterfactual.raw(vocab), vocab)},
                      {"source_entity", p.source_entity},
                      {"target_entity", p.target_entity}};
    out += doc.dump() + "\n";
  }
  return out;
}

void save_samples(const std::vector<SampleRecord>& records, const Vocab& vocab,
                  const std::string& path) {
  write_text(path, samples_jsonl(records, vocab));
}

void save_pairs(const std::vector<PreferencePair>& pairs, const Vocab& vocab,
                const std::string& path) {
  write_text(path, pairs_jsonl(pairs, vocab));
}

std::vector<SampleRecord> load_samples(const std::string& path, const Vocab& vocab) {
  return load_lines<SampleRecord>(path, [&](const json& doc) {
    SampleRecord r;
    r.observation = tokenize(field(doc, "observation"), vocab);
    r.prompt = tokenize(field(doc, "prompt"), vocab);
    if (!doc.contains("regime") || !doc.at("regime").is_number_integer()) {
      throw Error(ErrorCode::kSchema, "missing integer field 'regime'");
    }
    r.regime = doc.at("regime").get<int>();
    TokenSeq context = r.observation;
    context.insert(context.end(), r.prompt.begin(), r.prompt.end());
    r.trajectory = parse_raw(field(doc, "trajectory"), vocab, context);
    return r;
  });
}

std::vector<PreferencePair> load_pairs(const std::string& path, const Vocab& vocab) {
  return load_lines<PreferencePair>(path, [&](const json& doc) {
    const TokenSeq context = tokenize(field(doc, "context"), vocab);
    PreferencePair p;
    p.preferred = parse_raw(field(doc, "preferred"), vocab, context);
    p.counterfactual = parse_raw(field(doc, "counterfactual"), vocab, context);
    p.source_entity = field(doc, "source_entity");
    p.target_entity = field(doc, "target_entity");
    if (vocab.text(p.preferred.answer) != p.source_entity ||
        vocab.text(p.counterfactual.answer) != p.target_entity) {
      throw Error(ErrorCode::kSchema, "entity fields disagree with the trajectory answers");
    }
    if (p.preferred.answer == p.counterfactual.answer) {
      throw Error(ErrorCode::kSchema, "pair answers must differ");
    }
    return p;
  });
}

}  // namespace cpo
