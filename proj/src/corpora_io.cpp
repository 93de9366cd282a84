#include "zsca/corpora_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "zsca/error.hpp"
#include "zsca/text_util.hpp"

namespace zsca {

std::optional<std::size_t> vocab_index(const Vocabulary& vocab, std::string_view token) {
  auto it = std::ranges::lower_bound(vocab, token, std::less<>{});
  if (it == vocab.end() || *it != token) return std::nullopt;
  return static_cast<std::size_t>(it - vocab.begin());
}

std::vector<std::size_t> FeatureTable::rows_with(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_tags.size(); ++i)
    if (split_tags[i] == tag) out.push_back(i);
  return out;
}

fs::path sidecar_path(const fs::path& feature_file) {
  fs::path p = feature_file;
  p.replace_extension(".meta.tsv");
  return p;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::ifstream open_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream create_file(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::string where(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

}  // namespace

void write_feature_matrix(const fs::path& path, const Matrix& features) {
  auto out = create_file(path, true);
  out.write(kFeatureMagic, 8);
  put_u32(out, kFeatureVersion);
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

Matrix read_feature_matrix(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kFeatureMagic, 8) != 0) {
    fail(ErrorCode::BadMagic, path.string());
  }
  if (bytes.size() < 20) fail(ErrorCode::TruncatedFile, path.string() + ": header");
  const std::uint32_t version = get_u32(bytes.data() + 8);
  if (version != kFeatureVersion) {
    fail(ErrorCode::VersionMismatch, path.string() + ": version " + std::to_string(version));
  }
  const std::size_t rows = get_u32(bytes.data() + 12);
  const std::size_t cols = get_u32(bytes.data() + 16);
  const std::size_t expected = 20 + rows * cols * 4;
  if (bytes.size() < expected) {
    fail(ErrorCode::TruncatedFile, path.string() + ": expected " + std::to_string(expected) +
                                       " bytes, found " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    fail(ErrorCode::MetadataMismatch, path.string() + ": trailing bytes after payload");
  }
  std::vector<double> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes.data() + 20 + 4 * i)));
  }
  return Matrix(rows, cols, std::move(data));
}

void write_feature_file(const fs::path& path, const FeatureTable& table,
                        const Vocabulary& verbs, const Vocabulary& nouns) {
  const std::size_t n = table.samples();
  if (table.sample_ids.size() != n || table.verb_labels.size() != n ||
      table.noun_labels.size() != n || table.split_tags.size() != n) {
    fail(ErrorCode::MetadataMismatch, "feature table columns disagree on row count");
  }
  write_feature_matrix(path, table.features);
  auto out = create_file(sidecar_path(path));
  out << "sample_id\tverb\tnoun\tsplit\n";
  for (std::size_t i = 0; i < n; ++i) {
    if (table.verb_labels[i] >= verbs.size() || table.noun_labels[i] >= nouns.size()) {
      fail(ErrorCode::LabelOutOfRange, "row " + std::to_string(i));
    }
    out << table.sample_ids[i] << '\t' << verbs[table.verb_labels[i]] << '\t'
        << nouns[table.noun_labels[i]] << '\t'
        << (table.split_tags[i] == SplitTag::Train ? "train" : "test") << '\n';
  }
}

FeatureTable read_feature_file(const fs::path& path, const Vocabulary& verbs,
                               const Vocabulary& nouns) {
  FeatureTable table;
  table.features = read_feature_matrix(path);
  const fs::path meta = sidecar_path(path);
  auto in = open_text(meta);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorCode::MetadataMismatch, meta.string() + ": empty");
  ++line_no;
  const auto header = split_tabs(strip_cr(line));
  if (header != std::vector<std::string>{"sample_id", "verb", "noun", "split"}) {
    fail(ErrorCode::MalformedLine, where(meta.string(), line_no) + ": bad header");
  }
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) fail(ErrorCode::MalformedLine, where(meta.string(), line_no));
    auto v = vocab_index(verbs, f[1]);
    auto n = vocab_index(nouns, f[2]);
    if (!v || !n) {
      fail(ErrorCode::LabelOutOfRange,
           where(meta.string(), line_no) + ": unknown label " + f[1] + "/" + f[2]);
    }
    SplitTag tag;
    if (f[3] == "train") {
      tag = SplitTag::Train;
    } else if (f[3] == "test") {
      tag = SplitTag::Test;
    } else {
      fail(ErrorCode::MalformedLine, where(meta.string(), line_no) + ": split " + f[3]);
    }
    table.sample_ids.push_back(f[0]);
    table.verb_labels.push_back(*v);
    table.noun_labels.push_back(*n);
    table.split_tags.push_back(tag);
  }
  if (table.sample_ids.size() != table.features.rows()) {
    fail(ErrorCode::MetadataMismatch,
         meta.string() + ": " + std::to_string(table.sample_ids.size()) + " ids for " +
             std::to_string(table.features.rows()) + " feature rows");
  }
  return table;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Matrix vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (tokens_.size() != vectors_.rows()) {
    fail(ErrorCode::DimensionMismatch, "token count differs from vector rows");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) fail(ErrorCode::DuplicateToken, tokens_[i]);
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::at(std::string_view token) const {
  auto i = find(token);
  if (!i) fail(ErrorCode::MissingEmbedding, std::string(token));
  return vectors_.row(*i);
}

bool EmbeddingTable::is_zero(std::size_t row) const {
  return std::ranges::all_of(vectors_.row(row), [](double v) { return v == 0.0; });
}

EmbeddingTable parse_embeddings(std::istream& in, std::optional<std::size_t> expected_dim,
                                std::string_view source) {
  std::vector<std::string> tokens;
  std::vector<double> data;
  std::optional<std::size_t> dim = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::MalformedLine, where(source, line_no));
    std::string token = line.substr(0, tab);
    std::vector<double> vec;
    for (const auto& field : split_ws(std::string_view(line).substr(tab + 1))) {
      auto v = parse_double(field);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorCode::NonNumericValue, where(source, line_no) + ": '" + field + "'");
      }
      vec.push_back(*v);
    }
    if (!dim) dim = vec.size();
    if (vec.size() != *dim || vec.empty()) {
      fail(ErrorCode::DimensionMismatch, where(source, line_no) + ": dim " +
                                             std::to_string(vec.size()) + ", expected " +
                                             std::to_string(*dim));
    }
    if (!seen.emplace(token, tokens.size()).second) {
      fail(ErrorCode::DuplicateToken, where(source, line_no) + ": " + token);
    }
    tokens.push_back(std::move(token));
    data.insert(data.end(), vec.begin(), vec.end());
  }
  const std::size_t d = dim.value_or(0);
  const std::size_t rows = tokens.size();
  return EmbeddingTable(std::move(tokens), Matrix(rows, d, std::move(data)));
}

EmbeddingTable read_embeddings(const fs::path& path, std::optional<std::size_t> expected_dim) {
  auto in = open_text(path);
  return parse_embeddings(in, expected_dim, path.string());
}

void write_embeddings(const fs::path& path, const EmbeddingTable& table) {
  auto out = create_file(path);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i] << '\t';
    auto r = table.vectors().row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out << ' ';
      out << format_double(r[j]);
    }
    out << '\n';
  }
}

PairCorpus PairCorpus::from_counts(
    const std::map<std::pair<std::string, std::string>, std::size_t>& counts) {
  PairCorpus corpus;
  for (const auto& [key, count] : counts) {
    if (count > 0) corpus.entries.push_back({key.first, key.second, count});
  }
  return corpus;
}

PairCorpus read_pair_corpus(const fs::path& path) {
  auto in = open_text(path);
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::MalformedLine, where(path.string(), line_no));
    auto count = parse_size(f[2]);
    if (!count || *count == 0) {
      fail(ErrorCode::NonNumericValue, where(path.string(), line_no) + ": count " + f[2]);
    }
    if (!counts.emplace(std::pair{f[0], f[1]}, *count).second) {
      fail(ErrorCode::DuplicateToken, where(path.string(), line_no) + ": " + f[0] + " " + f[1]);
    }
  }
  return PairCorpus::from_counts(counts);
}

void write_pair_corpus(const fs::path& path, const PairCorpus& corpus) {
  auto out = create_file(path);
  for (const auto& e : corpus.entries) out << e.verb << '\t' << e.noun << '\t' << e.count << '\n';
}

PairCorpus extract_pairs(std::istream& tagged_text, std::size_t window) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(tagged_text, line)) {
    ++line_no;
    struct Tagged {
      std::string word;
      std::string tag;
    };
    std::vector<Tagged> items;
    for (const auto& item : split_ws(strip_cr(line))) {
      const auto slash = item.rfind('/');
      if (slash == std::string::npos || slash == 0 || slash + 1 == item.size()) {
        fail(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": '" + item + "'");
      }
      items.push_back({to_lower(item.substr(0, slash)), item.substr(slash + 1)});
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i].tag.starts_with("VB")) continue;
      for (std::size_t j = i + 1; j < items.size() && j <= i + window; ++j) {
        if (items[j].tag.starts_with("NN")) ++counts[{items[i].word, items[j].word}];
      }
    }
  }
  return PairCorpus::from_counts(counts);
}

PairCorpus extract_pairs(const fs::path& tagged_text_path, std::size_t window) {
  auto in = open_text(tagged_text_path);
  return extract_pairs(in, window);
}

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Hypernym: return "hypernym";
    case Relation::Synonym: return "synonym";
    case Relation::Group: return "group";
    case Relation::Member: return "member";
    case Relation::Similar: return "similar";
  }
  return "synonym";
}

Relation parse_relation(std::string_view text) {
  for (Relation r : {Relation::Hypernym, Relation::Synonym, Relation::Group, Relation::Member,
                     Relation::Similar}) {
    if (relation_name(r) == text) return r;
  }
  fail(ErrorCode::MalformedLine, "unknown relation '" + std::string(text) + "'");
}

std::vector<Edge> read_edge_list(const fs::path& path) {
  auto in = open_text(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::MalformedLine, where(path.string(), line_no));
    edges.push_back({f[0], f[1], parse_relation(f[2])});
  }
  return edges;
}

void write_edge_list(const fs::path& path, const std::vector<Edge>& edges) {
  auto out = create_file(path);
  for (const auto& e : edges) out << e.src << '\t' << e.dst << '\t' << relation_name(e.relation) << '\n';
}

SimilarityTable read_similarity_table(const fs::path& path) {
  auto in = open_text(path);
  SimilarityTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::MalformedLine, where(path.string(), line_no));
    auto v = parse_double(f[2]);
    if (!v) fail(ErrorCode::NonNumericValue, where(path.string(), line_no));
    table[{f[0], f[1]}] = *v;
  }
  return table;
}

ClassMembership read_class_membership(const fs::path& path) {
  auto in = open_text(path);
  ClassMembership membership;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 2) fail(ErrorCode::MalformedLine, where(path.string(), line_no));
    auto& classes = membership[f[0]];
    if (std::ranges::find(classes, f[1]) == classes.end()) classes.push_back(f[1]);
  }
  return membership;
}

PhraseEmbeddings read_phrase_embeddings(const fs::path& path) {
  auto in = open_text(path);
  PhraseEmbeddings out;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::MalformedLine, where(path.string(), line_no));
    std::vector<double> vec;
    for (const auto& field : split_ws(f[2])) {
      auto v = parse_double(field);
      if (!v || !std::isfinite(*v)) fail(ErrorCode::NonNumericValue, where(path.string(), line_no));
      vec.push_back(*v);
    }
    if (!dim) dim = vec.size();
    if (vec.size() != *dim) fail(ErrorCode::DimensionMismatch, where(path.string(), line_no));
    if (!out.emplace(std::pair{f[0], f[1]}, std::move(vec)).second) {
      fail(ErrorCode::DuplicateToken, where(path.string(), line_no));
    }
  }
  return out;
}

FrequencyTable read_frequency_table(const fs::path& path) {
  auto in = open_text(path);
  FrequencyTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 2) fail(ErrorCode::MalformedLine, where(path.string(), line_no));
    auto count = parse_size(f[1]);
    if (!count) fail(ErrorCode::NonNumericValue, where(path.string(), line_no));
    if (!table.emplace(f[0], *count).second) {
      fail(ErrorCode::DuplicateToken, where(path.string(), line_no) + ": " + f[0]);
    }
  }
  return table;
}

void write_frequency_table(const fs::path& path, const FrequencyTable& table) {
  auto out = create_file(path);
  for (const auto& [token, count] : table) out << token << '\t' << count << '\n';
}

std::vector<std::string> read_token_list(const fs::path& path) {
  auto in = open_text(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(strip_cr(line));
    if (!line.empty()) tokens.push_back(line);
  }
  return tokens;
}

std::string read_text_file(const fs::path& path) {
  auto in = open_text(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  auto out = create_file(path);
  out << text;
}

}  // namespace zsca
