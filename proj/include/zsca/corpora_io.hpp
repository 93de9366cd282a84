#pragma once

// Readers and writers for every on-disk artifact. Readers validate fully and
// throw zsca::Error; no partially-built table is ever returned.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsca/numerics.hpp"

namespace zsca {

namespace fs = std::filesystem;

using Vocabulary = std::vector<std::string>;  // sorted, unique

std::optional<std::size_t> vocab_index(const Vocabulary& vocab, std::string_view token);

enum class SplitTag { Train, Test };

struct FeatureTable {
  Matrix features;  // samples x feature-dim
  std::vector<std::string> sample_ids;
  std::vector<std::size_t> verb_labels;  // indices into the verb vocabulary
  std::vector<std::size_t> noun_labels;  // indices into the noun vocabulary
  std::vector<SplitTag> split_tags;

  std::size_t samples() const noexcept { return features.rows(); }
  std::vector<std::size_t> rows_with(SplitTag tag) const;
};

inline constexpr char kFeatureMagic[8] = {'D', 'A', 'R', 'K', 'F', 'M', 'A', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;

// `features.bin` -> `features.meta.tsv`
fs::path sidecar_path(const fs::path& feature_file);

void write_feature_matrix(const fs::path& path, const Matrix& features);
Matrix read_feature_matrix(const fs::path& path);
void write_feature_file(const fs::path& path, const FeatureTable& table,
                        const Vocabulary& verbs, const Vocabulary& nouns);
FeatureTable read_feature_file(const fs::path& path, const Vocabulary& verbs,
                               const Vocabulary& nouns);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> tokens, Matrix vectors);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  std::size_t size() const noexcept { return tokens_.size(); }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  // Throws MissingEmbedding for unknown tokens.
  std::span<const double> at(std::string_view token) const;
  bool is_zero(std::size_t row) const;

 private:
  std::vector<std::string> tokens_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingTable read_embeddings(const fs::path& path,
                               std::optional<std::size_t> expected_dim = std::nullopt);
EmbeddingTable parse_embeddings(std::istream& in, std::optional<std::size_t> expected_dim,
                                std::string_view source = "<stream>");
void write_embeddings(const fs::path& path, const EmbeddingTable& table);

struct PairEntry {
  std::string verb;
  std::string noun;
  std::size_t count = 1;
  bool operator==(const PairEntry&) const = default;
};

// Entries sorted by (verb, noun) with unique keys and positive counts.
struct PairCorpus {
  std::vector<PairEntry> entries;

  static PairCorpus from_counts(const std::map<std::pair<std::string, std::string>,
                                               std::size_t>& counts);
};

PairCorpus read_pair_corpus(const fs::path& path);
void write_pair_corpus(const fs::path& path, const PairCorpus& corpus);

// Pairs each VB* token with every NN* token at most `window` positions to its
// right on the same line. Tokens are lower-cased and matched verbatim.
PairCorpus extract_pairs(std::istream& tagged_text, std::size_t window = 4);
PairCorpus extract_pairs(const fs::path& tagged_text_path, std::size_t window = 4);

enum class Relation { Hypernym, Synonym, Group, Member, Similar };
std::string_view relation_name(Relation r);
Relation parse_relation(std::string_view text);

struct Edge {
  std::string src;
  std::string dst;
  Relation relation = Relation::Synonym;
  bool operator==(const Edge&) const = default;
};

std::vector<Edge> read_edge_list(const fs::path& path);
void write_edge_list(const fs::path& path, const std::vector<Edge>& edges);

// Ordered (a, b) -> score; asymmetric entries are preserved as given.
using SimilarityTable = std::map<std::pair<std::string, std::string>, double>;
SimilarityTable read_similarity_table(const fs::path& path);

// verb -> class ids (multi-membership allowed)
using ClassMembership = std::map<std::string, std::vector<std::string>>;
ClassMembership read_class_membership(const fs::path& path);

// (verb, noun) -> phrase embedding
using PhraseEmbeddings = std::map<std::pair<std::string, std::string>, std::vector<double>>;
PhraseEmbeddings read_phrase_embeddings(const fs::path& path);

// token -> instance count
using FrequencyTable = std::map<std::string, std::size_t>;
FrequencyTable read_frequency_table(const fs::path& path);
void write_frequency_table(const fs::path& path, const FrequencyTable& table);

std::vector<std::string> read_token_list(const fs::path& path);

// --- checkpoints -----------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'Z', 'S', 'C', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Named matrices and text blobs. Sections are written in name order so the
// byte stream is a pure function of the contents.
class Checkpoint {
 public:
  std::uint64_t fingerprint = 0;

  void put(const std::string& name, Matrix m) { matrices_[name] = std::move(m); }
  void put_text(const std::string& name, std::string text) { texts_[name] = std::move(text); }
  void put_tokens(const std::string& name, const std::vector<std::string>& tokens);
  void put_scalar(const std::string& name, double value);

  bool has(const std::string& name) const;
  const Matrix& matrix(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  std::vector<std::string> tokens(const std::string& name) const;
  double scalar(const std::string& name) const;

  const std::map<std::string, Matrix>& matrices() const noexcept { return matrices_; }
  const std::map<std::string, std::string>& texts() const noexcept { return texts_; }

  bool operator==(const Checkpoint&) const = default;

 private:
  std::map<std::string, Matrix> matrices_;
  std::map<std::string, std::string> texts_;
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt,
                                                std::uint32_t version = kCheckpointVersion);
Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes,
                                  std::string_view source = "<memory>");
void save_checkpoint(const Checkpoint& ckpt, const fs::path& path);
Checkpoint load_checkpoint(const fs::path& path);

enum class Provenance { Trained, Predicted };

// Full-vocabulary classifier weights; each row is flagged as trained on seen
// data or regressed for an unseen class.
struct ClassifierBank {
  Matrix verb_weights;
  std::vector<Provenance> verb_provenance;
  Matrix noun_weights;
  std::vector<Provenance> noun_provenance;

  Checkpoint to_checkpoint(std::uint64_t fingerprint) const;
  static ClassifierBank from_checkpoint(const Checkpoint& ckpt);
  bool operator==(const ClassifierBank&) const = default;
};

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view text);

}  // namespace zsca
