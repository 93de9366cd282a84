#include "zsca/affordance.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "zsca/error.hpp"
#include "zsca/text_util.hpp"

namespace zsca {

namespace {

// Keeps sigmoid outputs strictly inside (0, 1) even where double rounding
// would saturate them.
double open_unit(double p) { return std::clamp(p, DBL_MIN, 1.0 - DBL_EPSILON / 2); }

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

Matrix row_matrix(std::span<const double> values) {
  return Matrix(1, values.size(), to_vector(values));
}

Matrix mlp_input(const AffordanceScorer& s, std::span<const double> q, std::span<const double> n,
                 const std::vector<double>* phrase) {
  if (s.variant == AffordanceVariant::ConcatScoring) {
    std::vector<double> x(q.begin(), q.end());
    x.insert(x.end(), n.begin(), n.end());
    const std::size_t width = x.size();
    return Matrix(1, width, std::move(x));
  }
  if (phrase && !phrase->empty()) {
    if (phrase->size() != s.mlp.input_dim())
      fail(ErrorCode::DimensionMismatch, "phrase embedding width");
    return Matrix(1, phrase->size(), *phrase);
  }
  if (q.size() != n.size()) {
    fail(ErrorCode::ShapeMismatch, "context scoring averages verb and noun vectors of equal width");
  }
  Matrix x(1, q.size());
  for (std::size_t i = 0; i < q.size(); ++i) x(0, i) = 0.5 * (q[i] + n[i]);
  return x;
}

Matrix embedding_rows(const EmbeddingTable& table, const std::vector<std::string>& tokens) {
  Matrix m(tokens.size(), table.dim());
  for (std::size_t r = 0; r < tokens.size(); ++r) std::ranges::copy(table.at(tokens[r]), m.row(r).begin());
  return m;
}

}  // namespace

std::string_view affordance_variant_name(AffordanceVariant v) {
  switch (v) {
    case AffordanceVariant::ProjCosine: return "proj_cosine";
    case AffordanceVariant::ConcatScoring: return "concat_scoring";
    case AffordanceVariant::ContextScoring: return "context_scoring";
    case AffordanceVariant::Lookup: return "lookup";
    case AffordanceVariant::GroundTruth: return "ground_truth";
    case AffordanceVariant::Uniform: return "uniform";
  }
  return "uniform";
}

AffordanceVariant parse_affordance_variant(std::string_view text) {
  for (auto v : {AffordanceVariant::ProjCosine, AffordanceVariant::ConcatScoring,
                 AffordanceVariant::ContextScoring, AffordanceVariant::Lookup,
                 AffordanceVariant::GroundTruth, AffordanceVariant::Uniform}) {
    if (affordance_variant_name(v) == text) return v;
  }
  fail(ErrorCode::InvalidConfigValue, "affordance variant '" + std::string(text) + "'");
}

bool is_trainable(AffordanceVariant v) {
  return v == AffordanceVariant::ProjCosine || v == AffordanceVariant::ConcatScoring ||
         v == AffordanceVariant::ContextScoring;
}

double AffordanceScorer::logit(std::span<const double> q, std::span<const double> n) const {
  switch (variant) {
    case AffordanceVariant::ProjCosine: {
      if (q.size() != projection.cols() || n.size() != projection.rows())
        fail(ErrorCode::ShapeMismatch, "projection does not fit query/noun widths");
      const Matrix u = matmul(projection, Matrix::column(q));
      return scale * cosine_similarity(u.values(), n) + offset;
    }
    case AffordanceVariant::ConcatScoring:
    case AffordanceVariant::ContextScoring:
      return mlp.forward(mlp_input(*this, q, n, nullptr))(0, 0);
    default:
      fail(ErrorCode::UntrainableVariant, std::string(affordance_variant_name(variant)) + " has no logit");
  }
}

double AffordanceScorer::score(std::span<const double> verb_query, std::string_view noun) const {
  if (variant == AffordanceVariant::Uniform) return 1.0;
  if (!is_trainable(variant)) {
    fail(ErrorCode::UntrainableVariant,
         std::string(affordance_variant_name(variant)) + " scores verb tokens, not feature queries");
  }
  auto row = noun_embeddings.find(noun);
  if (!row) fail(ErrorCode::OovToken, "noun " + std::string(noun));
  return open_unit(sigmoid(logit(verb_query, noun_embeddings.vectors().row(*row))));
}

double AffordanceScorer::score_words(std::string_view verb, std::string_view noun) const {
  if (variant == AffordanceVariant::Uniform) return 1.0;
  if (!is_trainable(variant)) return table.contains({std::string(verb), std::string(noun)}) ? 1.0 : 0.0;
  auto v = verb_embeddings.find(verb);
  if (!v) fail(ErrorCode::OovToken, "verb " + std::string(verb));
  if (variant == AffordanceVariant::ContextScoring) {
    auto it = phrases.find({std::string(verb), std::string(noun)});
    if (it != phrases.end()) {
      return open_unit(sigmoid(mlp.forward(mlp_input(*this, {}, {}, &it->second))(0, 0)));
    }
  }
  return score(verb_embeddings.vectors().row(*v), noun);
}

void AffordanceScorer::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_text(prefix + ".variant", std::string(affordance_variant_name(variant)));
  ckpt.put(prefix + ".projection", projection);
  ckpt.put_scalar(prefix + ".scale", scale);
  ckpt.put_scalar(prefix + ".offset", offset);
  if (mlp.depth() > 0) mlp.store(ckpt, prefix + ".mlp");
  ckpt.put_tokens(prefix + ".verb_tokens", verb_embeddings.tokens());
  ckpt.put(prefix + ".verb_vectors", verb_embeddings.vectors());
  ckpt.put_tokens(prefix + ".noun_tokens", noun_embeddings.tokens());
  ckpt.put(prefix + ".noun_vectors", noun_embeddings.vectors());
  std::vector<std::string> lines;
  for (const auto& [v, n] : table) lines.push_back(v + "\t" + n);
  ckpt.put_tokens(prefix + ".table", lines);
  std::vector<std::string> keys;
  std::vector<double> values;
  std::size_t width = 0;
  for (const auto& [key, vec] : phrases) {
    keys.push_back(key.first + "\t" + key.second);
    width = vec.size();
    values.insert(values.end(), vec.begin(), vec.end());
  }
  ckpt.put_tokens(prefix + ".phrase_keys", keys);
  ckpt.put(prefix + ".phrase_vectors", Matrix(keys.size(), width, std::move(values)));
}

AffordanceScorer AffordanceScorer::load(const Checkpoint& ckpt, const std::string& prefix) {
  AffordanceScorer s;
  s.variant = parse_affordance_variant(ckpt.text(prefix + ".variant"));
  s.projection = ckpt.matrix(prefix + ".projection");
  s.scale = ckpt.scalar(prefix + ".scale");
  s.offset = ckpt.scalar(prefix + ".offset");
  if (ckpt.has(prefix + ".mlp.depth")) s.mlp = Mlp::load(ckpt, prefix + ".mlp");
  s.verb_embeddings = EmbeddingTable(ckpt.tokens(prefix + ".verb_tokens"), ckpt.matrix(prefix + ".verb_vectors"));
  s.noun_embeddings = EmbeddingTable(ckpt.tokens(prefix + ".noun_tokens"), ckpt.matrix(prefix + ".noun_vectors"));
  for (const auto& line : ckpt.tokens(prefix + ".table")) {
    const auto f = split_tabs(line);
    if (f.size() != 2) fail(ErrorCode::MalformedLine, "affordance table entry");
    s.table.insert({f[0], f[1]});
  }
  const auto keys = ckpt.tokens(prefix + ".phrase_keys");
  const auto& vectors = ckpt.matrix(prefix + ".phrase_vectors");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto f = split_tabs(keys[i]);
    if (f.size() != 2) fail(ErrorCode::MalformedLine, "phrase key");
    s.phrases[{f[0], f[1]}] = to_vector(vectors.row(i));
  }
  return s;
}

AffordanceScorer make_uniform_scorer() { return AffordanceScorer{}; }

AffordanceScorer build_lookup(const std::set<TokenPair>& pairs, AffordanceVariant variant) {
  if (variant != AffordanceVariant::Lookup && variant != AffordanceVariant::GroundTruth)
    fail(ErrorCode::InvalidConfigValue, "build_lookup makes lookup or ground_truth scorers");
  AffordanceScorer s;
  s.variant = variant;
  s.table = pairs;
  return s;
}

AffordanceScorer init_scorer(AffordanceVariant variant, std::size_t verb_dim, std::size_t noun_dim,
                             const AffordanceConfig& config, Rng& rng) {
  if (!is_trainable(variant)) {
    fail(ErrorCode::UntrainableVariant, std::string(affordance_variant_name(variant)));
  }
  AffordanceScorer s;
  s.variant = variant;
  s.scale = config.scale_init;
  s.offset = config.offset_init;
  if (variant == AffordanceVariant::ProjCosine) {
    s.projection = glorot(noun_dim, verb_dim, rng);
  } else {
    const std::size_t in = variant == AffordanceVariant::ConcatScoring ? verb_dim + noun_dim : verb_dim;
    if (variant == AffordanceVariant::ContextScoring && verb_dim != noun_dim) {
      fail(ErrorCode::DimensionMismatch, "context scoring needs equal verb and noun embedding widths");
    }
    s.mlp = Mlp::create({in, config.hidden, 1}, rng);
  }
  return s;
}

AffordanceGradients affordance_loss(const AffordanceScorer& scorer, const PairBatch& batch) {
  const std::size_t b = batch.labels.size();
  if (batch.queries.rows() != b || batch.nouns.rows() != b)
    fail(ErrorCode::ShapeMismatch, "pair batch rows disagree");
  AffordanceGradients g;
  std::vector<double> logits(b);
  if (scorer.variant == AffordanceVariant::ProjCosine) {
    const Matrix u = matmul_nt(batch.queries, scorer.projection);  // b x noun dim
    std::vector<double> cos(b), unorm(b), nnorm(b);
    for (std::size_t r = 0; r < b; ++r) {
      cos[r] = cosine_similarity(u.row(r), batch.nouns.row(r));
      unorm[r] = l2_norm(u.row(r));
      nnorm[r] = l2_norm(batch.nouns.row(r));
      logits[r] = scorer.scale * cos[r] + scorer.offset;
    }
    const auto loss = bce_with_logits(logits, batch.labels);
    g.loss = loss.value;
    Matrix du(b, u.cols());
    for (std::size_t r = 0; r < b; ++r) {
      const double gl = loss.gradient(r, 0);
      g.scale += gl * cos[r];
      g.offset += gl;
      const double dc = gl * scorer.scale;
      for (std::size_t j = 0; j < u.cols(); ++j) {
        du(r, j) = dc * (batch.nouns(r, j) / nnorm[r] - cos[r] * u(r, j) / unorm[r]) / unorm[r];
      }
    }
    g.projection = matmul_tn(du, batch.queries);
    return g;
  }
  if (!is_trainable(scorer.variant)) {
    fail(ErrorCode::UntrainableVariant, std::string(affordance_variant_name(scorer.variant)));
  }
  Matrix x(b, scorer.mlp.input_dim());
  for (std::size_t r = 0; r < b; ++r) {
    const std::vector<double>* phrase = r < batch.phrases.size() ? &batch.phrases[r] : nullptr;
    const Matrix row = mlp_input(scorer, batch.queries.row(r), batch.nouns.row(r), phrase);
    std::ranges::copy(row.values(), x.row(r).begin());
  }
  Mlp::Cache cache;
  const Matrix out = scorer.mlp.forward(x, cache);
  for (std::size_t r = 0; r < b; ++r) logits[r] = out(r, 0);
  const auto loss = bce_with_logits(logits, batch.labels);
  g.loss = loss.value;
  scorer.mlp.backward(cache, loss.gradient, g.mlp);
  return g;
}

ScorerTraining train_scorer(const PairCorpus& corpus, const std::vector<TokenPair>& extra_positives,
                            const std::vector<std::string>& verbs,
                            const std::vector<std::string>& nouns, const EmbeddingTable& verb_emb,
                            const EmbeddingTable& noun_emb, AffordanceVariant variant,
                            const AffordanceConfig& config, std::uint64_t seed,
                            const PhraseEmbeddings& phrases) {
  if (!is_trainable(variant)) {
    fail(ErrorCode::UntrainableVariant, std::string(affordance_variant_name(variant)));
  }
  ScorerTraining result;
  const std::set<std::string> verb_set(verbs.begin(), verbs.end());
  const std::set<std::string> noun_set(nouns.begin(), nouns.end());
  std::vector<std::string> usable_verbs, usable_nouns;
  for (const auto& v : verb_set)
    if (verb_emb.contains(v)) usable_verbs.push_back(v);
  for (const auto& n : noun_set)
    if (noun_emb.contains(n)) usable_nouns.push_back(n);

  std::set<TokenPair> positives;
  auto consider = [&](const std::string& v, const std::string& n) {
    if (!verb_set.contains(v) || !noun_set.contains(n) || !verb_emb.contains(v) || !noun_emb.contains(n)) {
      ++result.dropped_oov;
      return;
    }
    positives.insert({v, n});
  };
  for (const auto& e : corpus.entries)
    if (e.count >= config.min_count) consider(e.verb, e.noun);
  for (const auto& [v, n] : extra_positives) consider(v, n);
  if (positives.empty()) fail(ErrorCode::EmptyPositives, "no usable positive pairs");

  Rng rng = Rng(seed).fork("affordance");
  std::vector<TokenPair> complement;
  for (const auto& v : usable_verbs)
    for (const auto& n : usable_nouns)
      if (!positives.contains({v, n})) complement.push_back({v, n});
  rng.shuffle(complement);
  const std::size_t want = config.neg_ratio * positives.size();
  complement.resize(std::min(want, complement.size()));
  result.positives = positives.size();
  result.negatives = complement.size();
  result.degenerate = complement.empty();

  struct Labelled {
    TokenPair pair;
    double label;
  };
  std::vector<Labelled> data;
  for (const auto& p : positives) data.push_back({p, 1.0});
  for (const auto& p : complement) data.push_back({p, 0.0});
  rng.shuffle(data);
  std::size_t held = static_cast<std::size_t>(std::floor(config.holdout * static_cast<double>(data.size())));
  if (held >= data.size()) held = 0;
  const std::size_t train_n = data.size() - held;

  auto make_batch = [&](std::span<const std::size_t> idx) {
    PairBatch batch;
    std::vector<std::string> vs, ns;
    for (auto i : idx) {
      vs.push_back(data[i].pair.first);
      ns.push_back(data[i].pair.second);
      batch.labels.push_back(data[i].label);
      auto it = phrases.find(data[i].pair);
      batch.phrases.push_back(variant == AffordanceVariant::ContextScoring && it != phrases.end()
                                  ? it->second
                                  : std::vector<double>{});
    }
    batch.queries = embedding_rows(verb_emb, vs);
    batch.nouns = embedding_rows(noun_emb, ns);
    return batch;
  };

  AffordanceScorer scorer = init_scorer(variant, verb_emb.dim(), noun_emb.dim(), config, rng);
  AdamConfig adam;
  adam.learning_rate = config.lr;
  OptimizerState proj_opt(scorer.projection.rows(), scorer.projection.cols(), adam);
  OptimizerState affine_opt(1, 2, adam);
  MlpOptimizer mlp_opt(scorer.mlp, adam);

  std::vector<std::size_t> train_idx(train_n);
  for (std::size_t i = 0; i < train_n; ++i) train_idx[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch_idx : make_batches(train_idx, config.batch_size, rng)) {
      const auto g = affordance_loss(scorer, make_batch(batch_idx));
      if (!std::isfinite(g.loss)) fail(ErrorCode::NonFiniteLoss, "affordance scorer");
      total += g.loss * static_cast<double>(batch_idx.size());
      if (variant == AffordanceVariant::ProjCosine) {
        proj_opt.apply(scorer.projection, g.projection);
        if (config.learn_scale) {
          Matrix params(1, 2, std::vector<double>{scorer.scale, scorer.offset});
          affine_opt.apply(params, Matrix(1, 2, std::vector<double>{g.scale, g.offset}));
          scorer.scale = params(0, 0);
          scorer.offset = params(0, 1);
        }
      } else {
        mlp_opt.apply(scorer.mlp, g.mlp);
      }
    }
    result.loss_trace.push_back(total / static_cast<double>(train_n));
  }

  scorer.verb_embeddings = verb_emb;
  scorer.noun_embeddings = noun_emb;
  if (variant == AffordanceVariant::ContextScoring) scorer.phrases = phrases;

  std::vector<std::size_t> eval_idx;
  for (std::size_t i = held ? train_n : 0; i < (held ? data.size() : train_n); ++i) eval_idx.push_back(i);
  std::size_t correct = 0;
  for (auto i : eval_idx) {
    const double s = scorer.score_words(data[i].pair.first, data[i].pair.second);
    correct += (s > 0.5) == (data[i].label > 0.5);
  }
  result.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
  result.scorer = std::move(scorer);
  return result;
}

void VisualMapper::store(Checkpoint& ckpt, const std::string& prefix) const {
  mlp.store(ckpt, prefix + ".mlp");
  ckpt.put_scalar(prefix + ".final_loss", final_loss);
  ckpt.put(prefix + ".loss_trace", Matrix::column(loss_trace));
}

VisualMapper VisualMapper::load(const Checkpoint& ckpt, const std::string& prefix) {
  VisualMapper m;
  m.mlp = Mlp::load(ckpt, prefix + ".mlp");
  m.final_loss = ckpt.scalar(prefix + ".final_loss");
  const auto& trace = ckpt.matrix(prefix + ".loss_trace");
  m.loss_trace.assign(trace.values().begin(), trace.values().end());
  return m;
}

MapperGradients mapper_loss(const Mlp& mlp, const Matrix& features, const Matrix& targets) {
  Mlp::Cache cache;
  const Matrix pred = mlp.forward(features, cache);
  const auto loss = mse(pred, targets);
  MapperGradients g;
  g.loss = loss.value;
  mlp.backward(cache, loss.gradient, g.mlp);
  return g;
}

VisualMapper train_mapper(const Matrix& features, std::span<const std::size_t> labels,
                          const std::vector<std::string>& label_tokens,
                          const EmbeddingTable& verb_emb, const MapperConfig& config,
                          std::uint64_t seed) {
  if (labels.size() != features.rows()) fail(ErrorCode::ShapeMismatch, "one label per feature row");
  if (labels.empty()) fail(ErrorCode::EmptyTrainSet, "mapper");
  Matrix targets(labels.size(), verb_emb.dim());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= label_tokens.size()) fail(ErrorCode::LabelOutOfRange, "mapper label");
    std::ranges::copy(verb_emb.at(label_tokens[labels[r]]), targets.row(r).begin());
  }
  Rng rng = Rng(seed).fork("mapper");
  std::vector<std::size_t> sizes{features.cols()};
  if (config.hidden > 0) sizes.push_back(config.hidden);
  sizes.push_back(verb_emb.dim());
  VisualMapper mapper{Mlp::create(sizes, rng), 0.0, {}};
  AdamConfig adam;
  adam.learning_rate = config.lr;
  MlpOptimizer opt(mapper.mlp, adam);
  std::vector<std::size_t> rows(labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch : make_batches(rows, config.batch_size, rng)) {
      const auto g = mapper_loss(mapper.mlp, select_rows(features, batch), select_rows(targets, batch));
      if (!std::isfinite(g.loss)) fail(ErrorCode::NonFiniteLoss, "mapper");
      opt.apply(mapper.mlp, g.mlp);
      total += g.loss * static_cast<double>(batch.size());
    }
    mapper.loss_trace.push_back(total / static_cast<double>(rows.size()));
  }
  mapper.final_loss = mse(mapper.mlp.forward(features), targets).value;
  return mapper;
}

double test_time_score(const AffordanceScorer& scorer, const VisualMapper& mapper,
                       std::span<const double> projected_feature, std::string_view noun) {
  if (scorer.variant == AffordanceVariant::Uniform) return 1.0;
  const Matrix q = mapper.map(row_matrix(projected_feature));
  return scorer.score(q.values(), noun);
}

}  // namespace zsca
