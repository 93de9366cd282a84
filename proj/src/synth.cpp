#include "zsca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "zsca/corpora_io.hpp"
#include "zsca/error.hpp"
#include "zsca/gcn.hpp"
#include "zsca/text_util.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

namespace {

// Share of the type component that survives into noun appearance.
constexpr double kNounTypeVisibility = 0.2;

std::string token(char prefix, std::size_t i, std::size_t total) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::to_string(total - 1).size();
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

std::vector<double> unit_vector(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
  return v;
}

struct Category {
  std::vector<std::string> tokens;  // sorted
  std::vector<bool> seen;
  std::vector<std::size_t> group;
  std::vector<std::size_t> type;
};

// Seen and unseen tokens are interleaved in random order; groups run
// round-robin within each half so every group has both kinds. With
// `cross_types` the type cuts across groups, so look-alikes need not share it.
Category make_category(char prefix, std::size_t n_seen, std::size_t n_unseen, std::size_t groups,
                       std::size_t types, bool cross_types, Rng& rng) {
  const std::size_t total = n_seen + n_unseen;
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);
  Category c;
  c.tokens.resize(total);
  c.seen.resize(total);
  c.group.resize(total);
  c.type.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t slot = order[i];
    const bool seen = i < n_seen;
    const std::size_t rank = seen ? i : i - n_seen;
    const std::size_t g = rank % groups;
    c.tokens[slot] = token(prefix, slot, total);
    c.seen[slot] = seen;
    c.group[slot] = g;
    c.type[slot] = (cross_types ? rank / groups + g : g) % types;
  }
  return c;
}

Matrix embed(const Category& c, const std::vector<std::vector<double>>& type_dirs,
             const std::vector<std::vector<double>>& group_dirs, std::size_t dim, Rng& rng) {
  Matrix e(c.tokens.size(), dim);
  for (std::size_t i = 0; i < c.tokens.size(); ++i) {
    const auto r = unit_vector(dim, rng);
    auto row = e.row(i);
    for (std::size_t j = 0; j < dim; ++j) row[j] = 0.6 * type_dirs[c.type[i]][j] + 0.6 * group_dirs[c.group[i]][j] + 0.5 * r[j];
    const double n = l2_norm(row);
    for (double& x : row) x /= n;
  }
  return e;
}

// Class-node rows of a hidden two-layer GCN over the graph, unit-normalized.
// Linear map that keeps only `keep` of each vector's component in the span
// of `dirs`: objects that afford different actions can still look alike.
Matrix damp_span(const std::vector<std::vector<double>>& dirs, std::size_t dim, double keep) {
  std::vector<std::vector<double>> basis;
  for (auto d : dirs) {
    for (const auto& b : basis) {
      const double c = dot(d, b);
      for (std::size_t j = 0; j < dim; ++j) d[j] -= c * b[j];
    }
    const double n = l2_norm(d);
    if (n < 1e-9) continue;
    for (double& x : d) x /= n;
    basis.push_back(std::move(d));
  }
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  for (const auto& b : basis)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) m(i, j) -= (1.0 - keep) * b[i] * b[j];
  return m;
}

Matrix planted_weights(const LexicalGraph& graph, const EmbeddingTable& emb, std::size_t out_dim, Rng& rng) {
  const auto op = normalize(graph, PropagationMode::OneWay);
  GcnConfig cfg;
  cfg.hidden = 32;
  const auto model = init_gcn(op, emb.dim(), out_dim, cfg, rng);
  const Matrix out = gcn_forward(model, node_embeddings(graph, emb));
  std::vector<std::size_t> classes(graph.class_count);
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = i;
  return normalize_rows(select_rows(out, classes));
}

std::string config_text(const SynthSpec& s) {
  std::string t;
  auto kv = [&](const std::string& k, const std::string& v) { t += k + " = " + v + "\n"; };
  t += "# generated benchmark; paths are relative to this file\n";
  kv("seed", std::to_string(s.seed));
  kv("protocol", "all");
  kv("topk", "1,2,3");
  kv("data.verb_features", "verb_features.bin");
  kv("data.noun_features", "noun_features.bin");
  kv("data.split", "split.tsv");
  kv("data.verb_embeddings", "verb_embeddings.txt");
  kv("data.noun_embeddings", "noun_embeddings.txt");
  kv("data.noun_edges", "noun_edges.tsv");
  kv("data.verb_similarity", "verb_similarity.tsv");
  kv("data.verb_classes", "verb_classes.tsv");
  kv("data.pair_corpus", "pairs.tsv");
  kv("graph.verb_kind", "vn_tree");
  kv("heads.hidden", "64");
  kv("heads.out_dim", "16");
  kv("heads.epochs", "40");
  kv("heads.batch_size", "32");
  kv("heads.lr", "0.005");
  kv("gcn.hidden", "64");
  kv("gcn.epochs", "400");
  kv("gcn.lr", "0.005");
  kv("ses.hidden", "64");
  kv("ses.lr", "0.005");
  kv("affordance.epochs", "100");
  kv("affordance.hidden", "32");
  kv("affordance.lr", "0.02");
  // Classifier sigmoids saturate on this data, so the gate has to be nearly
  // binary or it reorders near-ties among compatible nouns.
  kv("affordance.scale_init", "1000");
  kv("affordance.learn_scale", "false");
  kv("mapper.epochs", "600");
  kv("mapper.lr", "0.001");
  kv("eval.chance_trials", "20");
  return t;
}

}  // namespace

SynthSpec synth_spec(const Config& c) {
  SynthSpec s;
  s.seed = c.count("seed");
  s.verbs_seen = c.count("synth.verbs_seen");
  s.verbs_unseen = c.count("synth.verbs_unseen");
  s.nouns_seen = c.count("synth.nouns_seen");
  s.nouns_unseen = c.count("synth.nouns_unseen");
  s.samples_per_class = c.count("synth.samples_per_class");
  s.noise = c.real("synth.noise");
  s.graph_density = c.real("synth.graph_density");
  s.groups = c.count("synth.groups");
  s.compat_types = c.count("synth.compat_types");
  s.embedding_dim = c.count("synth.embedding_dim");
  s.weight_dim = c.count("synth.weight_dim");
  s.feature_dim = c.count("synth.feature_dim");
  s.test_fraction = c.real("synth.test_fraction");
  return s;
}

fs::path make_synth(const SynthSpec& s, const fs::path& out_dir) {
  auto invalid = [](const std::string& m) { fail(ErrorCode::InvalidSizes, m); };
  if (s.verbs_seen < 2 || s.verbs_unseen < 2 || s.nouns_seen < 2 || s.nouns_unseen < 2)
    invalid("need at least 2 seen and 2 unseen verbs and nouns");
  if (s.samples_per_class == 0) invalid("samples_per_class must be positive");
  if (s.groups == 0 || s.compat_types == 0 || s.compat_types > s.groups)
    invalid("need 1 <= compat_types <= groups");
  if (s.groups > std::min({s.verbs_seen, s.verbs_unseen, s.nouns_seen, s.nouns_unseen}))
    invalid("every group needs a seen and an unseen member");
  if (s.embedding_dim == 0 || s.weight_dim == 0 || s.feature_dim == 0) invalid("dims must be positive");
  if (!(s.noise >= 0) || !(s.graph_density >= 0 && s.graph_density <= 1)) invalid("noise / density out of range");
  if (!(s.test_fraction > 0 && s.test_fraction < 1)) invalid("test_fraction must lie in (0, 1)");

  Rng root(s.seed);
  Rng rng = root.fork("synth");
  std::vector<std::vector<double>> type_dirs, group_dirs;
  for (std::size_t t = 0; t < s.compat_types; ++t) type_dirs.push_back(unit_vector(s.embedding_dim, rng));
  for (std::size_t g = 0; g < s.groups; ++g) group_dirs.push_back(unit_vector(s.embedding_dim, rng));

  const auto verbs = make_category('v', s.verbs_seen, s.verbs_unseen, s.groups, s.compat_types, false, rng);
  const auto nouns = make_category('n', s.nouns_seen, s.nouns_unseen, s.groups, s.compat_types, true, rng);
  const EmbeddingTable verb_emb(verbs.tokens, embed(verbs, type_dirs, group_dirs, s.embedding_dim, rng));
  const EmbeddingTable noun_emb(nouns.tokens, embed(nouns, type_dirs, group_dirs, s.embedding_dim, rng));

  // graphs: nouns under hypernyms h<g> under one root; verbs in classes c<g>
  auto other_group = [&](std::size_t g) { return (g + 1 + rng.below(s.groups - 1)) % s.groups; };
  std::vector<Edge> noun_edges;
  ClassMembership verb_classes;
  std::string membership_text;
  for (std::size_t i = 0; i < nouns.tokens.size(); ++i) {
    noun_edges.push_back({nouns.tokens[i], "h" + std::to_string(nouns.group[i]), Relation::Hypernym});
    if (s.groups > 1 && rng.uniform() < s.graph_density)
      noun_edges.push_back({nouns.tokens[i], "h" + std::to_string(other_group(nouns.group[i])), Relation::Hypernym});
  }
  for (std::size_t g = 0; g < s.groups; ++g) noun_edges.push_back({"h" + std::to_string(g), "entity", Relation::Hypernym});
  for (std::size_t i = 0; i < verbs.tokens.size(); ++i) {
    auto& cls = verb_classes[verbs.tokens[i]];
    cls.push_back("c" + std::to_string(verbs.group[i]));
    if (s.groups > 1 && rng.uniform() < s.graph_density) cls.push_back("c" + std::to_string(other_group(verbs.group[i])));
    for (const auto& c : cls) membership_text += verbs.tokens[i] + "\t" + c + "\n";
  }
  std::string similarity_text;
  for (std::size_t a = 0; a < verbs.tokens.size(); ++a)
    for (std::size_t b = 0; b < verbs.tokens.size(); ++b) {
      if (a == b) continue;
      const double sim = verbs.group[a] == verbs.group[b] ? 3.0 : verbs.type[a] == verbs.type[b] ? 2.0 : 1.0;
      similarity_text += verbs.tokens[a] + "\t" + verbs.tokens[b] + "\t" + format_double(sim) + "\n";
    }

  const auto noun_graph = build_noun_graph(nouns.tokens, noun_edges);
  const auto verb_graph = build_verb_graph_vn(verbs.tokens, verb_classes, VnVariant::Tree);
  Rng gcn_rng = root.fork("planted-gcn");
  const Matrix verb_w = planted_weights(verb_graph, verb_emb, s.weight_dim, gcn_rng);
  const Matrix noun_w = planted_weights(noun_graph, noun_emb, s.weight_dim, gcn_rng);

  // features: a fixed random linear image of the class embedding plus noise
  Rng feat_rng = root.fork("features");
  const Matrix verb_map = random_normal(s.feature_dim, s.embedding_dim, 1.0, feat_rng);
  const Matrix noun_map =
      matmul(random_normal(s.feature_dim, s.embedding_dim, 1.0, feat_rng), damp_span(type_dirs, s.embedding_dim, kNounTypeVisibility));
  FeatureTable vt, nt;
  std::vector<double> vrows, nrows;
  std::size_t sample = 0;
  const std::size_t total_guess = verbs.tokens.size() * nouns.tokens.size() * s.samples_per_class;
  std::set<std::pair<std::string, std::string>> compatible;
  for (std::size_t v = 0; v < verbs.tokens.size(); ++v) {
    for (std::size_t n = 0; n < nouns.tokens.size(); ++n) {
      if (verbs.type[v] != nouns.type[n]) continue;
      compatible.insert({verbs.tokens[v], nouns.tokens[n]});
      const bool seen_pair = verbs.seen[v] && nouns.seen[n];
      for (std::size_t r = 0; r < s.samples_per_class; ++r) {
        const bool test = !seen_pair || feat_rng.uniform() < s.test_fraction;
        for (auto [table, rows, map, w, label] :
             {std::tuple{&vt, &vrows, &verb_map, &verb_emb.vectors(), v}, std::tuple{&nt, &nrows, &noun_map, &noun_emb.vectors(), n}}) {
          for (std::size_t i = 0; i < s.feature_dim; ++i) {
            double x = 0;
            for (std::size_t j = 0; j < s.embedding_dim; ++j) x += (*map)(i, j) * (*w)(label, j);
            rows->push_back(x + s.noise * feat_rng.normal());
          }
          table->sample_ids.push_back(token('s', sample, total_guess + 1));
          table->verb_labels.push_back(v);
          table->noun_labels.push_back(n);
          table->split_tags.push_back(test ? SplitTag::Test : SplitTag::Train);
        }
        ++sample;
      }
    }
  }
  vt.features = Matrix(sample, s.feature_dim, std::move(vrows));
  nt.features = Matrix(sample, s.feature_dim, std::move(nrows));

  VocabularySplit split;
  for (std::size_t i = 0; i < verbs.tokens.size(); ++i)
    (verbs.seen[i] ? split.verbs_seen : split.verbs_unseen).push_back(verbs.tokens[i]);
  for (std::size_t i = 0; i < nouns.tokens.size(); ++i)
    (nouns.seen[i] ? split.nouns_seen : split.nouns_unseen).push_back(nouns.tokens[i]);
  split.validate();

  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  Rng corpus_rng = root.fork("corpus");
  for (const auto& p : compatible) counts[p] = 1 + corpus_rng.below(5);

  fs::create_directories(out_dir / "planted");
  write_feature_file(out_dir / "verb_features.bin", vt, verbs.tokens, nouns.tokens);
  write_feature_file(out_dir / "noun_features.bin", nt, verbs.tokens, nouns.tokens);
  write_split(out_dir / "split.tsv", split);
  write_embeddings(out_dir / "verb_embeddings.txt", verb_emb);
  write_embeddings(out_dir / "noun_embeddings.txt", noun_emb);
  write_edge_list(out_dir / "noun_edges.tsv", noun_edges);
  write_text_file(out_dir / "verb_classes.tsv", membership_text);
  write_text_file(out_dir / "verb_similarity.tsv", similarity_text);
  write_pair_corpus(out_dir / "pairs.tsv", PairCorpus::from_counts(counts));

  write_embeddings(out_dir / "planted" / "verb_weights.txt", EmbeddingTable(verbs.tokens, verb_w));
  write_embeddings(out_dir / "planted" / "noun_weights.txt", EmbeddingTable(nouns.tokens, noun_w));
  std::map<std::pair<std::string, std::string>, std::size_t> ones;
  for (const auto& p : compatible) ones[p] = 1;
  write_pair_corpus(out_dir / "planted" / "compatible.tsv", PairCorpus::from_counts(ones));
  std::string types = "token\tgroup\ttype\n";
  for (const auto* c : {&verbs, &nouns})
    for (std::size_t i = 0; i < c->tokens.size(); ++i)
      types += c->tokens[i] + "\t" + std::to_string(c->group[i]) + "\t" + std::to_string(c->type[i]) + "\n";
  write_text_file(out_dir / "planted" / "types.tsv", types);

  const fs::path config = out_dir / "config.cfg";
  write_text_file(config, config_text(s));
  return config;
}

}  // namespace zsca
