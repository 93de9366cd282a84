#pragma once

// Lexical knowledge graphs over verb/noun vocabularies and the normalized
// propagation operators the GCN runs on.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsca/corpora_io.hpp"
#include "zsca/numerics.hpp"

namespace zsca {

struct VocabularySplit {
  Vocabulary verbs_seen;
  Vocabulary verbs_unseen;
  Vocabulary nouns_seen;
  Vocabulary nouns_unseen;

  Vocabulary verbs() const;
  Vocabulary nouns() const;
  bool verb_seen(std::string_view token) const;
  bool noun_seen(std::string_view token) const;
  // Sorts each set; throws DuplicateToken on overlap, EmptyAfterFilter when
  // `require_all_nonempty` and a set is empty.
  void validate(bool require_all_nonempty = true);

  bool operator==(const VocabularySplit&) const = default;
};

// TSV lines `verb|noun <TAB> token <TAB> seen|unseen`.
VocabularySplit read_split(const fs::path& path);
void write_split(const fs::path& path, const VocabularySplit& split);

enum class GraphKind { NounHypernym, WnDis, VnGroup, VnTree };
std::string_view graph_kind_name(GraphKind kind);
GraphKind parse_graph_kind(std::string_view text);

struct LexicalGraph {
  GraphKind kind = GraphKind::NounHypernym;
  // Sorted class tokens first, then sorted auxiliary nodes.
  std::vector<std::string> nodes;
  std::size_t class_count = 0;
  // Directed relations (hypernym, member) run child -> parent; undirected
  // relations are stored once per direction. No self-edges.
  std::vector<Edge> edges;

  std::size_t size() const noexcept { return nodes.size(); }
  std::optional<std::size_t> index_of(std::string_view token) const;

  Checkpoint to_checkpoint() const;
  static LexicalGraph from_checkpoint(const Checkpoint& ckpt);
};

inline constexpr std::string_view kMetaNodePrefix = "@";

LexicalGraph build_noun_graph(const Vocabulary& vocab, const std::vector<Edge>& edges,
                              const std::vector<std::string>& augment = {});
LexicalGraph build_verb_graph_wn_dis(const Vocabulary& vocab, const SimilarityTable& scores,
                                     double threshold);
enum class VnVariant { Group, Tree };
LexicalGraph build_verb_graph_vn(const Vocabulary& vocab, const ClassMembership& membership,
                                 VnVariant variant);

enum class PropagationMode { OneWay, TwoWay };
enum class NormScheme { Symmetric, Row };

struct PropagationOperator {
  Matrix adjacency;  // symmetrized 0/1 adjacency without self-loops
  PropagationMode mode = PropagationMode::OneWay;
  NormScheme scheme = NormScheme::Symmetric;
  // one_way: {A_hat}; two_way: {parent->child, child->parent}
  std::vector<Matrix> stages;

  std::size_t size() const noexcept { return adjacency.rows(); }
  // Applies each stage in order: stages.back() * ... * stages.front() * z.
  Matrix propagate(const Matrix& z) const;
  // Transposed application for backpropagation.
  Matrix propagate_transposed(const Matrix& grad) const;

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static PropagationOperator load(const Checkpoint& ckpt, const std::string& prefix);
};

PropagationOperator normalize(const LexicalGraph& graph, PropagationMode mode,
                              NormScheme scheme = NormScheme::Symmetric);
// Normalizes a raw 0/1 matrix (self-loops added here).
Matrix normalize_adjacency(const Matrix& adjacency, NormScheme scheme);

// GCN input rows in graph node order. Class nodes must have embeddings;
// auxiliary nodes use their own embedding when present, otherwise the mean
// of their children's rows.
Matrix node_embeddings(const LexicalGraph& graph, const EmbeddingTable& table);

// Largest |eigenvalue| estimate by power iteration.
double spectral_radius(const Matrix& m, std::size_t iterations = 500);

}  // namespace zsca
