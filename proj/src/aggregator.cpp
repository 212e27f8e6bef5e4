#include "kgclab/aggregator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "kgclab/io.hpp"
#include "kgclab/parallel.hpp"

namespace kgclab {

const char* to_string(SlotType s) {
  switch (s) {
    case SlotType::HeadSame: return "head-same";
    case SlotType::TailSame: return "tail-same";
    case SlotType::HeadInverse: return "head-inverse";
    case SlotType::TailInverse: return "tail-inverse";
  }
  return "?";
}

SlotType parse_slot_type(const std::string& s) {
  for (SlotType t : kSlotTypes)
    if (s == to_string(t)) return t;
  throw ConfigError("unknown slot type '" + s +
                    "' (expected head-same, tail-same, head-inverse or tail-inverse)");
}

bool existence_holds(const Triple& target, SlotType slot, RelationId p, const GraphOverlay& graph) {
  switch (slot) {
    case SlotType::HeadSame: return graph.has_neighbor(p, target.head, Slot::HeadFixed, target);
    case SlotType::TailSame: return graph.has_neighbor(p, target.tail, Slot::TailFixed, target);
    case SlotType::HeadInverse: return graph.has_neighbor(p, target.head, Slot::TailFixed, target);
    case SlotType::TailInverse: return graph.has_neighbor(p, target.tail, Slot::HeadFixed, target);
  }
  return false;
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ExistenceSpec parse_existence_spec(const std::string& text, const Vocabulary& vocab) {
  auto parts = split_on(text, ':');
  if ((parts.size() != 4 && parts.size() != 5) || parts[0] != "single")
    throw ConfigError("bad existence feature spec '" + text +
                      "' (expected single:<relation>:<head|tail>:<slot>[:<relation>])");
  ExistenceSpec spec;
  spec.target = vocab.relation(parts[1]);
  spec.direction = parse_direction(parts[2]);
  spec.slot = parse_slot_type(parts[3]);
  spec.feature_relation = parts.size() == 5 ? vocab.relation(parts[4]) : spec.target;
  return spec;
}

FeatureIndex FeatureIndex::none(const RuleSet& rules, std::size_t num_relations) {
  FeatureIndex idx;
  idx.num_rules_ = rules.size();
  idx.num_relations_ = num_relations;
  return idx;
}

FeatureIndex FeatureIndex::single(const RuleSet& rules, std::size_t num_relations,
                                  std::vector<ExistenceSpec> specs) {
  FeatureIndex idx = none(rules, num_relations);
  idx.mode_ = ExistenceMode::Single;
  idx.single_lookup_.resize(2 * num_relations);
  for (const auto& s : specs) {
    if (s.target >= num_relations || s.feature_relation >= num_relations)
      throw ConfigError("existence feature relation out of range");
    if (std::find(idx.specs_.begin(), idx.specs_.end(), s) != idx.specs_.end()) continue;
    auto id = static_cast<std::uint32_t>(idx.specs_.size());
    idx.specs_.push_back(s);
    idx.single_lookup_[2 * s.target + index_of(s.direction)].push_back(id);
  }
  return idx;
}

FeatureIndex FeatureIndex::all(const RuleSet& rules, std::size_t num_relations, bool shared) {
  FeatureIndex idx = none(rules, num_relations);
  idx.mode_ = ExistenceMode::All;
  idx.shared_ = shared;
  return idx;
}

std::size_t FeatureIndex::num_existence_features() const {
  const std::size_t p = num_relations_;
  switch (mode_) {
    case ExistenceMode::None: return 0;
    case ExistenceMode::Single: return specs_.size();
    case ExistenceMode::All: return shared_ ? 2 * 4 * p : 2 * p * 4 * p;
  }
  return 0;
}

std::optional<std::uint32_t> FeatureIndex::existence_feature(const ExistenceSpec& s) const {
  const std::size_t p = num_relations_;
  if (s.target >= p || s.feature_relation >= p) return std::nullopt;
  const std::size_t d = index_of(s.direction);
  const std::size_t slot = static_cast<std::size_t>(s.slot);
  switch (mode_) {
    case ExistenceMode::None: return std::nullopt;
    case ExistenceMode::Single: {
      auto it = std::find(specs_.begin(), specs_.end(), s);
      if (it == specs_.end()) return std::nullopt;
      return static_cast<std::uint32_t>(it - specs_.begin());
    }
    case ExistenceMode::All:
      if (shared_) return static_cast<std::uint32_t>((d * 4 + slot) * p + s.feature_relation);
      return static_cast<std::uint32_t>(((d * p + s.target) * 4 + slot) * p + s.feature_relation);
  }
  return std::nullopt;
}

ExistenceSpec FeatureIndex::describe_existence(std::uint32_t id) const {
  if (id >= num_existence_features()) throw DefectError("existence feature id out of range");
  if (mode_ == ExistenceMode::Single) return specs_[id];
  const std::size_t p = num_relations_;
  ExistenceSpec s;
  s.feature_relation = static_cast<RelationId>(id % p);
  std::size_t rest = id / p;
  s.slot = static_cast<SlotType>(rest % 4);
  rest /= 4;
  if (!shared_) {
    s.target = static_cast<RelationId>(rest % p);
    rest /= p;
  }
  s.direction = rest == 0 ? Direction::Head : Direction::Tail;
  return s;
}

std::span<const std::uint32_t> FeatureIndex::single_ids(RelationId target, Direction d) const {
  std::size_t k = 2 * static_cast<std::size_t>(target) + index_of(d);
  if (mode_ != ExistenceMode::Single || k >= single_lookup_.size()) return {};
  return single_lookup_[k];
}

void existence_features(const Triple& triple, Direction direction, const GraphOverlay& graph,
                        const FeatureIndex& index, std::vector<std::uint32_t>& out) {
  out.clear();
  if (index.mode() == ExistenceMode::None) return;
  if (index.mode() == ExistenceMode::Single) {
    for (std::uint32_t id : index.single_ids(triple.relation, direction)) {
      const auto& s = index.describe_existence(id);
      if (existence_holds(triple, s.slot, s.feature_relation, graph)) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return;
  }

  // All mode: read the witnesses straight off the incident facts of s and o.
  auto emit = [&](SlotType slot, RelationId p) {
    out.push_back(*index.existence_feature({triple.relation, direction, slot, p}));
  };
  graph.for_each_incident(triple.head, [&](const Triple& t) {
    if (t == triple) return;
    if (t.head == triple.head) emit(SlotType::HeadSame, t.relation);
    if (t.tail == triple.head) emit(SlotType::HeadInverse, t.relation);
  });
  graph.for_each_incident(triple.tail, [&](const Triple& t) {
    if (t == triple) return;
    if (t.tail == triple.tail) emit(SlotType::TailSame, t.relation);
    if (t.head == triple.tail) emit(SlotType::TailInverse, t.relation);
  });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

FeatureVector build_features(const Triple& triple, Direction direction, const GraphOverlay& graph,
                             const FeatureIndex& index, const RuleSet& rules) {
  FeatureVector x;
  for (std::uint32_t j : rules.for_relation(triple.relation))
    if (rule_fires(rules[j], triple, graph, true))
      x.rules.push_back(FeatureIndex::rule_feature(j, direction));
  std::sort(x.rules.begin(), x.rules.end());
  existence_features(triple, direction, graph, index, x.existence);
  return x;
}

LinearModel LinearModel::zeros(const FeatureIndex& index) {
  LinearModel m;
  m.w.assign(index.num_rule_features(), 0.0);
  m.beta.assign(index.num_existence_features(), 0.0);
  m.intercept.assign(index.num_intercepts(), 0.0);
  return m;
}

bool LinearModel::matches(const FeatureIndex& index) const {
  return w.size() == index.num_rule_features() && beta.size() == index.num_existence_features() &&
         intercept.size() == index.num_intercepts();
}

double logit(const LinearModel& model, const FeatureVector& x, RelationId relation, Direction d) {
  double z = model.intercept[FeatureIndex::intercept(relation, d)];
  for (auto id : x.rules) z += model.w[id];
  for (auto id : x.existence) z += model.beta[id];
  return z;
}

double score(const LinearModel& model, const Triple& triple, Direction direction,
             const GraphOverlay& graph, const FeatureIndex& index, const RuleSet& rules) {
  if (!model.matches(index)) throw ConfigError("model dimensions do not match feature index");
  return logit(model, build_features(triple, direction, graph, index, rules), triple.relation,
               direction);
}

// --- training --------------------------------------------------------------

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_index(const FeatureIndex& index, const RuleSet& rules, std::size_t num_relations) {
  if (index.num_rules() != rules.size() || index.num_relations() != num_relations)
    throw ConfigError("feature index was built for a different rule set or vocabulary");
}

}  // namespace

TrainingProblem::TrainingProblem(std::vector<TrainingExample> examples, const FeatureIndex& index,
                                 double l2)
    : index_(&index), l2_(l2), examples_(std::move(examples)) {}

TrainingProblem::TrainingProblem(const KnowledgeGraph& train, const RuleSet& rules,
                                 const FeatureIndex& index, const TrainConfig& cfg)
    : index_(&index), l2_(cfg.l2) {
  check_index(index, rules, train.num_relations());
  const std::size_t n = train.size();
  const std::size_t n_ent = train.num_entities();
  const int k = std::max(0, cfg.negatives_per_positive);
  GraphOverlay view(train);

  // One block per (triple, direction): the positive then its negatives.
  std::vector<std::vector<TrainingExample>> blocks(2 * n);
  parallel_chunks(2 * n, 64, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const Triple& t = train.triple(static_cast<std::uint32_t>(b / 2));
      const Direction d = b % 2 == 0 ? Direction::Head : Direction::Tail;
      auto& block = blocks[b];

      // Sample first, then featurise the whole block against one anchor.
      std::vector<Triple> members{t};
      std::mt19937_64 rng(mix_seed(cfg.seed, b / 2, index_of(d)));
      std::uniform_int_distribution<std::uint64_t> pick(0, n_ent - 1);
      const EntityId original = d == Direction::Head ? t.head : t.tail;
      int made = 0;
      for (int attempt = 0; made < k && attempt < 50 * k; ++attempt) {
        auto e = static_cast<EntityId>(pick(rng));
        if (e == original) continue;
        Triple neg = d == Direction::Head ? Triple{e, t.relation, t.tail} : Triple{t.head, t.relation, e};
        if (train.contains(neg)) continue;
        members.push_back(neg);
        ++made;
      }

      block.resize(members.size());
      const EntityId anchor = d == Direction::Head ? t.tail : t.head;
      for (std::uint32_t j : rules.for_relation(t.relation)) {
        const Rule& rule = rules[j];
        auto preds = rule_predictions(rule, d, anchor, view);
        if (preds.empty()) continue;
        for (std::size_t m = 0; m < members.size(); ++m) {
          const EntityId c = d == Direction::Head ? members[m].head : members[m].tail;
          if (!std::binary_search(preds.begin(), preds.end(), c)) continue;
          // Only the positive is in the graph; it alone needs leave-one-out.
          if (m == 0 && !rule_fires(rule, members[m], view, true)) continue;
          block[m].x.rules.push_back(FeatureIndex::rule_feature(j, d));
        }
      }
      for (std::size_t m = 0; m < members.size(); ++m) {
        auto& ex = block[m];
        std::sort(ex.x.rules.begin(), ex.x.rules.end());
        existence_features(members[m], d, view, index, ex.x.existence);
        ex.triple = members[m];
        ex.relation = t.relation;
        ex.direction = d;
        ex.label = m == 0 ? 1.0 : 0.0;
      }
    }
  });
  for (auto& block : blocks)
    for (auto& ex : block) examples_.push_back(std::move(ex));
}

std::size_t TrainingProblem::dimension() const {
  return index_->num_rule_features() + index_->num_existence_features() + index_->num_intercepts();
}

std::vector<double> TrainingProblem::flatten(const LinearModel& m) const {
  std::vector<double> p;
  p.reserve(dimension());
  p.insert(p.end(), m.w.begin(), m.w.end());
  p.insert(p.end(), m.beta.begin(), m.beta.end());
  p.insert(p.end(), m.intercept.begin(), m.intercept.end());
  return p;
}

LinearModel TrainingProblem::unflatten(std::span<const double> p) const {
  if (p.size() != dimension()) throw DefectError("parameter vector has wrong dimension");
  const std::size_t nw = index_->num_rule_features();
  const std::size_t nb = index_->num_existence_features();
  LinearModel m;
  m.w.assign(p.begin(), p.begin() + nw);
  m.beta.assign(p.begin() + nw, p.begin() + nw + nb);
  m.intercept.assign(p.begin() + nw + nb, p.end());
  return m;
}

double TrainingProblem::loss(std::span<const double> params) const {
  std::vector<double> scratch(params.size());
  return loss_and_gradient(params, scratch);
}

double TrainingProblem::loss_and_gradient(std::span<const double> params,
                                          std::span<double> grad) const {
  if (params.size() != dimension() || grad.size() != dimension())
    throw DefectError("parameter vector has wrong dimension");
  const std::size_t nw = index_->num_rule_features();
  const std::size_t nb = index_->num_existence_features();
  const std::size_t n = examples_.size();

  std::vector<double> residual(n), example_loss(n);
  parallel_chunks(n, 1024, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& ex = examples_[i];
      double z = params[nw + nb + FeatureIndex::intercept(ex.relation, ex.direction)];
      for (auto id : ex.x.rules) z += params[id];
      for (auto id : ex.x.existence) z += params[nw + id];
      residual[i] = sigmoid(z) - ex.label;
      example_loss[i] = softplus(z) - ex.label * z;
    }
  });

  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = examples_[i];
    const double r = residual[i] * inv_n;
    total += example_loss[i];
    grad[nw + nb + FeatureIndex::intercept(ex.relation, ex.direction)] += r;
    for (auto id : ex.x.rules) grad[id] += r;
    for (auto id : ex.x.existence) grad[nw + id] += r;
  }
  double value = total * inv_n;
  for (std::size_t j = 0; j < nw + nb; ++j) {
    value += 0.5 * l2_ * params[j] * params[j];
    grad[j] += l2_ * params[j];
  }
  return value;
}

LinearModel train(const KnowledgeGraph& train_graph, const RuleSet& rules, const FeatureIndex& index,
                  const TrainConfig& cfg, std::vector<double>* loss_history) {
  check_index(index, rules, train_graph.num_relations());
  if (cfg.epochs <= 0) {
    spdlog::warn("training with {} epochs; returning the zero model", cfg.epochs);
    return LinearModel::zeros(index);
  }
  if (train_graph.empty()) throw ConfigError("cannot train on an empty graph");
  if (!(cfg.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (cfg.l2 < 0) throw ConfigError("l2 must be non-negative");
  if (cfg.negatives_per_positive < 0) throw ConfigError("negatives_per_positive must be >= 0");

  TrainingProblem problem(train_graph, rules, index, cfg);
  std::vector<double> params(problem.dimension(), 0.0), grad(params.size());
  spdlog::debug("training on {} examples, {} parameters", problem.examples().size(), params.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double l = problem.loss_and_gradient(params, grad);
    if (loss_history) loss_history->push_back(l);
    for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.learning_rate * grad[j];
  }
  if (loss_history) loss_history->push_back(problem.loss(params));
  return problem.unflatten(params);
}

// --- checkpoints -----------------------------------------------------------

namespace {

std::string format_weight(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Descriptor for every parameter, in flattened order.
std::vector<std::string> descriptors(const FeatureIndex& index, const RuleSet& rules,
                                     const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < rules.size(); ++j) {
    std::string text = format_rule(rules[j], vocab);
    for (Direction d : kDirections) out.push_back(std::string("rule|") + to_string(d) + "|" + text);
  }
  for (std::uint32_t id = 0; id < index.num_existence_features(); ++id) {
    auto s = index.describe_existence(id);
    std::string target = index.shared() ? "*" : vocab.relations.label(s.target);
    out.push_back(std::string("exist|") + to_string(s.direction) + "|" + target + "|" +
                  to_string(s.slot) + "|" + vocab.relations.label(s.feature_relation));
  }
  for (RelationId r = 0; r < index.num_relations(); ++r)
    for (Direction d : kDirections)
      out.push_back(std::string("intercept|") + to_string(d) + "|" + vocab.relations.label(r));
  return out;
}

}  // namespace

std::string serialize_model(const LinearModel& model, const FeatureIndex& index, const RuleSet& rules,
                            const Vocabulary& vocab) {
  if (!model.matches(index)) throw ConfigError("model dimensions do not match feature index");
  TrainingProblem layout({}, index, 0.0);
  auto params = layout.flatten(model);
  auto names = descriptors(index, rules, vocab);
  std::string out;
  for (std::size_t i = 0; i < params.size(); ++i) out += names[i] + "\t" + format_weight(params[i]) + "\n";
  return out;
}

LinearModel parse_model(const std::string& text, const FeatureIndex& index, const RuleSet& rules,
                        const Vocabulary& vocab, const std::string& source) {
  auto names = descriptors(index, rules, vocab);
  std::unordered_map<std::string, std::size_t> slot_of;
  for (std::size_t i = 0; i < names.size(); ++i) slot_of.emplace(names[i], i);

  std::vector<double> params(names.size(), 0.0);
  std::vector<bool> seen(names.size(), false);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "expected descriptor<TAB>weight");
    std::string name = line.substr(0, tab);
    std::string num = line.substr(tab + 1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(v))
      throw ParseError(source, lineno, "bad weight '" + num + "'");
    auto it = slot_of.find(name);
    if (it == slot_of.end()) throw ParseError(source, lineno, "unknown feature '" + name + "'");
    if (seen[it->second]) throw ParseError(source, lineno, "duplicate feature '" + name + "'");
    seen[it->second] = true;
    params[it->second] = v;
  }
  auto missing = std::count(seen.begin(), seen.end(), false);
  if (missing > 0)
    spdlog::warn("{}: {} parameters missing from checkpoint, set to zero", source, missing);
  TrainingProblem layout({}, index, 0.0);
  return layout.unflatten(params);
}

void save_model(const std::filesystem::path& path, const LinearModel& model, const FeatureIndex& index,
                const RuleSet& rules, const Vocabulary& vocab) {
  write_file_atomic(path, serialize_model(model, index, rules, vocab));
}

LinearModel load_model(const std::filesystem::path& path, const FeatureIndex& index,
                       const RuleSet& rules, const Vocabulary& vocab) {
  return parse_model(read_file(path), index, rules, vocab, path.string());
}

// --- scorer ----------------------------------------------------------------

AggregatorScorer::AggregatorScorer(const RuleSet& rules, const FeatureIndex& index, LinearModel model)
    : rules_(&rules), index_(&index), model_(std::move(model)) {
  if (!model_.matches(index)) throw ConfigError("model dimensions do not match feature index");
  if (index.num_rules() != rules.size()) throw ConfigError("feature index was built for another rule set");
}

double AggregatorScorer::score(Direction direction, const Triple& triple,
                               const GraphOverlay& graph) const {
  return logit(model_, build_features(triple, direction, graph, *index_, *rules_), triple.relation,
               direction);
}

void AggregatorScorer::score_all(const Query& q, const GraphOverlay& graph,
                                 std::span<double> scores) const {
  const Direction d = q.direction;
  std::fill(scores.begin(), scores.end(), model_.intercept[FeatureIndex::intercept(q.relation, d)]);

  for (std::uint32_t j : rules_->for_relation(q.relation)) {
    const double wj = model_.w[FeatureIndex::rule_feature(j, d)];
    if (wj == 0.0) continue;
    const Rule& rule = (*rules_)[j];
    const bool self_ref = rule.body_mentions(q.relation);
    for (EntityId c : rule_predictions(rule, d, q.anchor, graph)) {
      if (c >= scores.size()) continue;
      Triple t = q.with_candidate(c);
      // Predictions ignore leave-one-out; recheck where it can matter.
      if (self_ref && graph.contains(t) && !rule_fires(rule, t, graph, true)) continue;
      scores[c] += wj;
    }
  }

  if (index_->mode() == ExistenceMode::None) return;
  std::vector<std::uint32_t> active;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    existence_features(q.with_candidate(static_cast<EntityId>(c)), d, graph, *index_, active);
    for (auto id : active) scores[c] += model_.beta[id];
  }
}

std::optional<Explanation> AggregatorScorer::explain(Direction direction, const Triple& triple,
                                                     const GraphOverlay& graph) const {
  auto x = build_features(triple, direction, graph, *index_, *rules_);
  Explanation e;
  e.intercept = model_.intercept[FeatureIndex::intercept(triple.relation, direction)];
  for (auto id : x.rules) e.features.push_back({ActiveFeature::Kind::Rule, id, model_.w[id]});
  for (auto id : x.existence)
    e.features.push_back({ActiveFeature::Kind::Existence, id, model_.beta[id]});
  return e;
}

}  // namespace kgclab
