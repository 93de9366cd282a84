#include "zsca/vocab_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "zsca/error.hpp"
#include "zsca/text_util.hpp"

namespace zsca {

namespace {

Vocabulary merged(const Vocabulary& a, const Vocabulary& b) {
  Vocabulary out;
  std::ranges::merge(a, b, std::back_inserter(out));
  return out;
}

bool is_directed(Relation r) { return r == Relation::Hypernym || r == Relation::Member; }

LexicalGraph assemble(GraphKind kind, const Vocabulary& classes, std::set<std::string> aux,
                      std::vector<Edge> edges) {
  LexicalGraph g;
  g.kind = kind;
  g.nodes.assign(classes.begin(), classes.end());
  std::ranges::sort(g.nodes);
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  g.class_count = g.nodes.size();
  for (const auto& t : g.nodes) aux.erase(t);
  g.nodes.insert(g.nodes.end(), aux.begin(), aux.end());
  std::ranges::sort(edges, [](const Edge& a, const Edge& b) {
    return std::tie(a.src, a.dst, a.relation) < std::tie(b.src, b.dst, b.relation);
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::erase_if(edges, [](const Edge& e) { return e.src == e.dst; });
  g.edges = std::move(edges);
  return g;
}

}  // namespace

Vocabulary VocabularySplit::verbs() const { return merged(verbs_seen, verbs_unseen); }
Vocabulary VocabularySplit::nouns() const { return merged(nouns_seen, nouns_unseen); }

bool VocabularySplit::verb_seen(std::string_view token) const {
  return vocab_index(verbs_seen, token).has_value();
}

bool VocabularySplit::noun_seen(std::string_view token) const {
  return vocab_index(nouns_seen, token).has_value();
}

void VocabularySplit::validate(bool require_all_nonempty) {
  for (Vocabulary* v : {&verbs_seen, &verbs_unseen, &nouns_seen, &nouns_unseen}) {
    std::ranges::sort(*v);
    if (std::adjacent_find(v->begin(), v->end()) != v->end()) {
      fail(ErrorCode::DuplicateToken, "repeated token in split set");
    }
    if (require_all_nonempty && v->empty()) {
      fail(ErrorCode::EmptyAfterFilter, "a seen/unseen set is empty");
    }
  }
  Vocabulary both;
  std::ranges::set_intersection(verbs_seen, verbs_unseen, std::back_inserter(both));
  std::ranges::set_intersection(nouns_seen, nouns_unseen, std::back_inserter(both));
  if (!both.empty()) fail(ErrorCode::DuplicateToken, both.front() + " is both seen and unseen");
}

VocabularySplit read_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  VocabularySplit split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    const std::string here = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 3) fail(ErrorCode::MalformedLine, here);
    const bool seen = f[2] == "seen";
    if (!seen && f[2] != "unseen") fail(ErrorCode::MalformedLine, here + ": status " + f[2]);
    if (f[0] == "verb") {
      (seen ? split.verbs_seen : split.verbs_unseen).push_back(f[1]);
    } else if (f[0] == "noun") {
      (seen ? split.nouns_seen : split.nouns_unseen).push_back(f[1]);
    } else {
      fail(ErrorCode::MalformedLine, here + ": kind " + f[0]);
    }
  }
  split.validate(false);
  return split;
}

void write_split(const fs::path& path, const VocabularySplit& split) {
  std::string text;
  auto emit = [&](const char* kind, const Vocabulary& v, const char* status) {
    for (const auto& t : v) text += std::string(kind) + "\t" + t + "\t" + status + "\n";
  };
  emit("verb", split.verbs_seen, "seen");
  emit("verb", split.verbs_unseen, "unseen");
  emit("noun", split.nouns_seen, "seen");
  emit("noun", split.nouns_unseen, "unseen");
  write_text_file(path, text);
}

std::string_view graph_kind_name(GraphKind kind) {
  switch (kind) {
    case GraphKind::NounHypernym: return "noun_hypernym";
    case GraphKind::WnDis: return "wn_dis";
    case GraphKind::VnGroup: return "vn_group";
    case GraphKind::VnTree: return "vn_tree";
  }
  return "noun_hypernym";
}

GraphKind parse_graph_kind(std::string_view text) {
  for (GraphKind k : {GraphKind::NounHypernym, GraphKind::WnDis, GraphKind::VnGroup,
                      GraphKind::VnTree}) {
    if (graph_kind_name(k) == text) return k;
  }
  fail(ErrorCode::InvalidConfigValue, "graph kind '" + std::string(text) + "'");
}

std::optional<std::size_t> LexicalGraph::index_of(std::string_view token) const {
  auto it = std::ranges::find(nodes, token);
  if (it == nodes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

Checkpoint LexicalGraph::to_checkpoint() const {
  Checkpoint c;
  c.put_text("graph.kind", std::string(graph_kind_name(kind)));
  c.put_tokens("graph.nodes", nodes);
  c.put_scalar("graph.class_count", static_cast<double>(class_count));
  std::vector<std::string> lines;
  for (const auto& e : edges) lines.push_back(e.src + "\t" + e.dst + "\t" + std::string(relation_name(e.relation)));
  c.put_tokens("graph.edges", lines);
  return c;
}

LexicalGraph LexicalGraph::from_checkpoint(const Checkpoint& ckpt) {
  LexicalGraph g;
  g.kind = parse_graph_kind(ckpt.text("graph.kind"));
  g.nodes = ckpt.tokens("graph.nodes");
  g.class_count = static_cast<std::size_t>(ckpt.scalar("graph.class_count"));
  for (const auto& line : ckpt.tokens("graph.edges")) {
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::MalformedLine, "graph edge '" + line + "'");
    g.edges.push_back({f[0], f[1], parse_relation(f[2])});
  }
  return g;
}

LexicalGraph build_noun_graph(const Vocabulary& vocab, const std::vector<Edge>& edges,
                              const std::vector<std::string>& augment) {
  std::set<std::string> universe;
  std::map<std::string, std::vector<std::string>> parents;
  for (const auto& e : edges) {
    universe.insert(e.src);
    universe.insert(e.dst);
    if (e.relation == Relation::Hypernym) parents[e.src].push_back(e.dst);
  }
  std::vector<std::string> frontier;
  for (const auto& t : vocab) {
    if (!universe.contains(t)) fail(ErrorCode::UncoveredToken, t);
    frontier.push_back(t);
  }
  for (const auto& t : augment) {
    if (!universe.contains(t)) fail(ErrorCode::UncoveredToken, "augment token " + t);
    frontier.push_back(t);
  }
  std::set<std::string> reached;
  while (!frontier.empty()) {
    std::string t = std::move(frontier.back());
    frontier.pop_back();
    if (!reached.insert(t).second) continue;
    if (auto it = parents.find(t); it != parents.end()) {
      for (const auto& p : it->second)
        if (!reached.contains(p)) frontier.push_back(p);
    }
  }
  std::vector<Edge> kept;
  for (const auto& e : edges) {
    if (!reached.contains(e.src) || !reached.contains(e.dst)) continue;
    if (e.relation == Relation::Hypernym) {
      kept.push_back(e);
    } else if (e.relation == Relation::Synonym) {
      kept.push_back({e.src, e.dst, Relation::Synonym});
      kept.push_back({e.dst, e.src, Relation::Synonym});
    }
  }
  return assemble(GraphKind::NounHypernym, vocab, std::move(reached), std::move(kept));
}

LexicalGraph build_verb_graph_wn_dis(const Vocabulary& vocab, const SimilarityTable& scores,
                                     double threshold) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    for (std::size_t j = i + 1; j < vocab.size(); ++j) {
      const auto& a = vocab[i];
      const auto& b = vocab[j];
      auto ab = scores.find({a, b});
      auto ba = scores.find({b, a});
      if (ab == scores.end()) fail(ErrorCode::MissingPairScore, a + " -> " + b);
      if (ba == scores.end()) fail(ErrorCode::MissingPairScore, b + " -> " + a);
      if (ab->second != ba->second) {
        fail(ErrorCode::MissingPairScore, "asymmetric score for " + a + " / " + b);
      }
      if (ab->second > threshold) {
        edges.push_back({a, b, Relation::Similar});
        edges.push_back({b, a, Relation::Similar});
      }
    }
  }
  return assemble(GraphKind::WnDis, vocab, {}, std::move(edges));
}

LexicalGraph build_verb_graph_vn(const Vocabulary& vocab, const ClassMembership& membership,
                                 VnVariant variant) {
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& verb : vocab) {
    auto it = membership.find(verb);
    if (it == membership.end() || it->second.empty()) fail(ErrorCode::UnassignedVerb, verb);
    for (const auto& cls : it->second) members[cls].push_back(verb);
  }
  std::vector<Edge> edges;
  std::set<std::string> meta;
  for (const auto& [cls, verbs] : members) {
    if (variant == VnVariant::Group) {
      for (std::size_t i = 0; i < verbs.size(); ++i)
        for (std::size_t j = 0; j < verbs.size(); ++j)
          if (i != j) edges.push_back({verbs[i], verbs[j], Relation::Group});
    } else {
      const std::string node = std::string(kMetaNodePrefix) + cls;
      meta.insert(node);
      for (const auto& v : verbs) edges.push_back({v, node, Relation::Member});
    }
  }
  return assemble(variant == VnVariant::Group ? GraphKind::VnGroup : GraphKind::VnTree, vocab,
                  std::move(meta), std::move(edges));
}

Matrix PropagationOperator::propagate(const Matrix& z) const {
  Matrix out = z;
  for (const auto& s : stages) out = matmul(s, out);
  return out;
}

Matrix PropagationOperator::propagate_transposed(const Matrix& grad) const {
  Matrix out = grad;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) out = matmul_tn(*it, out);
  return out;
}

void PropagationOperator::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put(prefix + ".adjacency", adjacency);
  ckpt.put_text(prefix + ".mode", mode == PropagationMode::OneWay ? "one_way" : "two_way");
  ckpt.put_text(prefix + ".scheme", scheme == NormScheme::Symmetric ? "sym" : "row");
  for (std::size_t i = 0; i < stages.size(); ++i)
    ckpt.put(prefix + ".stage" + std::to_string(i), stages[i]);
}

PropagationOperator PropagationOperator::load(const Checkpoint& ckpt, const std::string& prefix) {
  PropagationOperator op;
  op.adjacency = ckpt.matrix(prefix + ".adjacency");
  op.mode = ckpt.text(prefix + ".mode") == "two_way" ? PropagationMode::TwoWay
                                                     : PropagationMode::OneWay;
  op.scheme = ckpt.text(prefix + ".scheme") == "row" ? NormScheme::Row : NormScheme::Symmetric;
  const std::size_t n = op.mode == PropagationMode::OneWay ? 1 : 2;
  for (std::size_t i = 0; i < n; ++i) op.stages.push_back(ckpt.matrix(prefix + ".stage" + std::to_string(i)));
  return op;
}

Matrix normalize_adjacency(const Matrix& adjacency, NormScheme scheme) {
  const std::size_t n = adjacency.rows();
  Matrix m = adjacency;
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  std::vector<double> row_deg(n, 0.0), col_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row_deg[i] += m(i, j);
      col_deg[j] += m(i, j);
    }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (m(i, j) == 0.0) continue;
      m(i, j) = scheme == NormScheme::Symmetric ? m(i, j) / std::sqrt(row_deg[i] * col_deg[j])
                                                : m(i, j) / row_deg[i];
    }
  }
  return m;
}

PropagationOperator normalize(const LexicalGraph& graph, PropagationMode mode,
                              NormScheme scheme) {
  const std::size_t n = graph.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[graph.nodes[i]] = i;
  PropagationOperator op;
  op.mode = mode;
  op.scheme = scheme;
  op.adjacency = Matrix(n, n);
  Matrix down(n, n);  // row = child, col = parent
  Matrix up(n, n);    // row = parent, col = child
  for (const auto& e : graph.edges) {
    const std::size_t s = index.at(e.src);
    const std::size_t d = index.at(e.dst);
    op.adjacency(s, d) = op.adjacency(d, s) = 1.0;
    if (is_directed(e.relation)) {
      down(s, d) = 1.0;
      up(d, s) = 1.0;
    } else {
      down(s, d) = down(d, s) = 1.0;
      up(s, d) = up(d, s) = 1.0;
    }
  }
  if (mode == PropagationMode::OneWay) {
    op.stages.push_back(normalize_adjacency(op.adjacency, scheme));
  } else {
    op.stages.push_back(normalize_adjacency(down, scheme));
    op.stages.push_back(normalize_adjacency(up, scheme));
  }
  return op;
}

Matrix node_embeddings(const LexicalGraph& graph, const EmbeddingTable& table) {
  const std::size_t n = graph.size();
  Matrix out(n, table.dim());
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = table.find(graph.nodes[i]);
    if (!row) {
      if (i < graph.class_count) fail(ErrorCode::MissingEmbedding, "class node " + graph.nodes[i]);
      continue;
    }
    std::ranges::copy(table.vectors().row(*row), out.row(i).begin());
    done[i] = true;
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[graph.nodes[i]] = i;
  std::vector<std::vector<std::size_t>> children(n);
  for (const auto& e : graph.edges)
    if (is_directed(e.relation)) children[index.at(e.dst)].push_back(index.at(e.src));

  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = graph.class_count; i < n; ++i) {
      if (done[i] || children[i].empty()) continue;
      if (!std::ranges::all_of(children[i], [&](std::size_t c) { return done[c]; })) continue;
      auto row = out.row(i);
      for (std::size_t c : children[i]) {
        auto src = out.row(c);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += src[j];
      }
      for (double& v : row) v /= static_cast<double>(children[i].size());
      done[i] = true;
      progress = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!done[i]) fail(ErrorCode::MissingEmbedding, "auxiliary node " + graph.nodes[i]);
  }
  return out;
}

double spectral_radius(const Matrix& m, std::size_t iterations) {
  const std::size_t n = m.rows();
  if (n == 0) return 0.0;
  // Power iteration on m^T m bounds the spectral radius by the top singular value.
  Matrix v(n, 1, 1.0 / std::sqrt(static_cast<double>(n)));
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    Matrix w = matmul_tn(m, matmul(m, v));
    const double norm = l2_norm(w.values());
    if (norm == 0.0) return 0.0;
    sigma = std::sqrt(norm);
    v = scaled(w, 1.0 / norm);
  }
  return sigma;
}

}  // namespace zsca
