#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "test_util.hpp"
#include "zsca/affordance.hpp"

using namespace zsca;
using zsca::testing::code_of;
using zsca::testing::param_check;

namespace {

PairBatch random_batch(std::size_t b, std::size_t vd, std::size_t nd, Rng& rng, bool with_phrases = false) {
  PairBatch batch;
  batch.queries = random_normal(b, vd, 1.0, rng);
  batch.nouns = random_normal(b, nd, 1.0, rng);
  for (std::size_t i = 0; i < b; ++i) {
    batch.labels.push_back(i % 3 == 0 ? 1.0 : 0.0);
    if (with_phrases && i % 2 == 0) {
      std::vector<double> p;
      for (std::size_t j = 0; j < vd; ++j) p.push_back(rng.normal());
      batch.phrases.push_back(p);
    } else {
      batch.phrases.emplace_back();
    }
  }
  return batch;
}

// Verbs and nouns split into two groups; a pair is compatible iff the groups
// match. Embeddings are group centre plus noise.
struct Clustered {
  std::vector<std::string> verbs, nouns;
  EmbeddingTable verb_emb, noun_emb;
  PairCorpus corpus;
  std::vector<std::size_t> verb_group, noun_group;
};

Clustered make_clustered(std::uint64_t seed, std::size_t per_group = 6, std::size_t dim = 6) {
  Rng rng(seed);
  const Matrix vc = random_normal(2, dim, 1.0, rng);
  const Matrix nc = random_normal(2, dim, 1.0, rng);
  Clustered c;
  Matrix ve(2 * per_group, dim), ne(2 * per_group, dim);
  for (std::size_t i = 0; i < 2 * per_group; ++i) {
    const std::size_t g = i % 2;
    c.verbs.push_back("v" + std::to_string(10 + i));
    c.nouns.push_back("n" + std::to_string(10 + i));
    c.verb_group.push_back(g);
    c.noun_group.push_back(g);
    for (std::size_t j = 0; j < dim; ++j) {
      ve(i, j) = vc(g, j) + 0.2 * rng.normal();
      ne(i, j) = nc(g, j) + 0.2 * rng.normal();
    }
  }
  c.verb_emb = EmbeddingTable(c.verbs, ve);
  c.noun_emb = EmbeddingTable(c.nouns, ne);
  std::map<TokenPair, std::size_t> counts;
  for (std::size_t i = 0; i < c.verbs.size(); ++i)
    for (std::size_t j = 0; j < c.nouns.size(); ++j)
      if (c.verb_group[i] == c.noun_group[j]) counts[{c.verbs[i], c.nouns[j]}] = 1;
  c.corpus = PairCorpus::from_counts(counts);
  return c;
}

}  // namespace

TEST_CASE("proj_cosine closed forms") {
  AffordanceScorer s;
  s.variant = AffordanceVariant::ProjCosine;
  s.projection = Matrix::identity(3);
  s.scale = 5.0;
  s.offset = 0.0;
  s.noun_embeddings = EmbeddingTable({"apple", "pan", "zero"}, Matrix::from_rows({{1, 2, 0}, {0, 0, 4}, {0, 0, 0}}));
  const std::vector<double> q{1, 2, 0};
  CHECK(s.score(q, "apple") == doctest::Approx(0.99331).epsilon(1e-5));
  CHECK(std::abs(s.score(q, "apple") - 1.0 / (1.0 + std::exp(-5.0))) < 1e-15);
  CHECK(s.score(q, "pan") == 0.5);
  CHECK(code_of([&] { s.score(q, "pear"); }) == ErrorCode::OovToken);
  CHECK(code_of([&] { s.score(q, "zero"); }) == ErrorCode::ZeroVector);
  const std::vector<double> zero{0, 0, 0};
  CHECK(code_of([&] { s.score(zero, "apple"); }) == ErrorCode::ZeroVector);

  SUBCASE("positive rescaling of the noun vector changes nothing") {
    Rng rng(1);
    AffordanceScorer t = s;
    t.projection = random_normal(3, 3, 1.0, rng);
    AffordanceScorer u = t;
    const Matrix base = random_normal(4, 3, 1.0, rng);
    std::vector<std::string> names{"a", "b", "c", "d"};
    t.noun_embeddings = EmbeddingTable(names, base);
    u.noun_embeddings = EmbeddingTable(names, scaled(base, 3.7));
    const std::vector<double> query{0.3, -1.0, 0.8};
    for (const auto& n : names) CHECK(t.score(query, n) == doctest::Approx(u.score(query, n)).epsilon(1e-14));
  }
}

TEST_CASE("indicator and uniform scorers") {
  const auto u = make_uniform_scorer();
  const std::vector<double> q{1.0, 2.0};
  CHECK(u.score(q, "anything") == 1.0);
  CHECK(u.score_words("cut", "anything") == 1.0);

  const auto l = build_lookup({{"cut", "apple"}});
  CHECK(l.score_words("cut", "apple") == 1.0);
  CHECK(l.score_words("cut", "pan") == 0.0);
  CHECK(code_of([&] { l.score(q, "apple"); }) == ErrorCode::UntrainableVariant);
  const auto g = build_lookup({}, AffordanceVariant::GroundTruth);
  CHECK(g.score_words("cut", "apple") == 0.0);
  CHECK(code_of([&] { build_lookup({}, AffordanceVariant::Uniform); }) == ErrorCode::InvalidConfigValue);

  const auto c = make_clustered(1);
  AffordanceConfig cfg;
  CHECK(code_of([&] {
          train_scorer(c.corpus, {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb, AffordanceVariant::Lookup, cfg, 0);
        }) == ErrorCode::UntrainableVariant);
  CHECK(code_of([&] {
          train_scorer(PairCorpus{}, {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb, AffordanceVariant::ProjCosine,
                       cfg, 0);
        }) == ErrorCode::EmptyPositives);
}

TEST_CASE("variant names round trip") {
  for (auto v : {AffordanceVariant::ProjCosine, AffordanceVariant::ConcatScoring, AffordanceVariant::ContextScoring,
                 AffordanceVariant::Lookup, AffordanceVariant::GroundTruth, AffordanceVariant::Uniform}) {
    CHECK(parse_affordance_variant(affordance_variant_name(v)) == v);
  }
  CHECK(code_of([] { parse_affordance_variant("bert"); }) == ErrorCode::InvalidConfigValue);
}

TEST_CASE("affordance and mapper losses pass finite differences") {
  AffordanceConfig cfg;
  cfg.hidden = 5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    {
      auto s = init_scorer(AffordanceVariant::ProjCosine, 4, 3, cfg, rng);
      s.scale = 2.0 + rng.uniform();
      s.offset = rng.normal();
      const auto batch = random_batch(6, 4, 3, rng);
      const auto g = affordance_loss(s, batch);
      auto loss = [&](const AffordanceScorer& x) { return affordance_loss(x, batch).loss; };
      CHECK(param_check(s, [](AffordanceScorer& x) -> Matrix& { return x.projection; }, loss, g.projection) <= 1e-6);
      struct Affine {
        AffordanceScorer s;
        Matrix p;
      };
      auto affine_loss = [&](const Affine& a) {
        AffordanceScorer t = a.s;
        t.scale = a.p(0, 0);
        t.offset = a.p(0, 1);
        return affordance_loss(t, batch).loss;
      };
      const Affine start{s, Matrix(1, 2, std::vector<double>{s.scale, s.offset})};
      CHECK(param_check(start, [](Affine& a) -> Matrix& { return a.p; }, affine_loss,
                        Matrix(1, 2, std::vector<double>{g.scale, g.offset})) <= 1e-6);
    }
    for (auto variant : {AffordanceVariant::ConcatScoring, AffordanceVariant::ContextScoring}) {
      const auto s = init_scorer(variant, 4, 4, cfg, rng);
      const auto batch = random_batch(6, 4, 4, rng, variant == AffordanceVariant::ContextScoring);
      const auto g = affordance_loss(s, batch);
      auto loss = [&](const AffordanceScorer& x) { return affordance_loss(x, batch).loss; };
      for (std::size_t l = 0; l < s.mlp.depth(); ++l) {
        CHECK(param_check(s, [l](AffordanceScorer& x) -> Matrix& { return x.mlp.layers()[l].weight; }, loss,
                          g.mlp[l].weight) <= 1e-6);
        CHECK(param_check(s, [l](AffordanceScorer& x) -> Matrix& { return x.mlp.layers()[l].bias; }, loss,
                          g.mlp[l].bias) <= 1e-6);
      }
    }
    const Mlp mapper = Mlp::create({5, 4, 3}, rng);
    const Matrix x = random_normal(7, 5, 1.0, rng);
    const Matrix t = random_normal(7, 3, 1.0, rng);
    const auto g = mapper_loss(mapper, x, t);
    auto loss = [&](const Mlp& m) { return mapper_loss(m, x, t).loss; };
    for (std::size_t l = 0; l < mapper.depth(); ++l) {
      CHECK(param_check(mapper, [l](Mlp& m) -> Matrix& { return m.layers()[l].weight; }, loss, g.mlp[l].weight) <= 1e-6);
      CHECK(param_check(mapper, [l](Mlp& m) -> Matrix& { return m.layers()[l].bias; }, loss, g.mlp[l].bias) <= 1e-6);
    }
  }
}

TEST_CASE("clustered fixture is learned by every trainable variant") {
  const auto c = make_clustered(7);
  AffordanceConfig cfg;
  cfg.neg_ratio = 1;
  cfg.hidden = 16;
  for (auto variant : {AffordanceVariant::ProjCosine, AffordanceVariant::ConcatScoring, AffordanceVariant::ContextScoring}) {
    CAPTURE(affordance_variant_name(variant));
    const auto r = train_scorer(c.corpus, {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb, variant, cfg, 3);
    CHECK(r.heldout_accuracy >= 0.9);
    CHECK(r.positives == 72);
    CHECK(r.negatives == 72);
    CHECK_FALSE(r.degenerate);
    for (const auto& v : c.verbs)
      for (const auto& n : c.nouns) {
        const double s = r.scorer.score_words(v, n);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
      }
  }
}

TEST_CASE("corpus handling") {
  const auto c = make_clustered(2);
  AffordanceConfig cfg;
  cfg.epochs = 5;
  SUBCASE("oov pairs are dropped and counted") {
    auto counts = std::map<TokenPair, std::size_t>{{{"v10", "n10"}, 2}, {{"v10", "rock"}, 1}, {{"fly", "n10"}, 1}};
    const auto r = train_scorer(PairCorpus::from_counts(counts), {{"v11", "n11"}}, c.verbs, c.nouns, c.verb_emb,
                                c.noun_emb, AffordanceVariant::ProjCosine, cfg, 0);
    CHECK(r.dropped_oov == 2);
    CHECK(r.positives == 2);
  }
  SUBCASE("count threshold") {
    cfg.min_count = 2;
    auto counts = std::map<TokenPair, std::size_t>{{{"v10", "n10"}, 2}, {{"v11", "n11"}, 1}};
    const auto r = train_scorer(PairCorpus::from_counts(counts), {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb,
                                AffordanceVariant::ProjCosine, cfg, 0);
    CHECK(r.positives == 1);
  }
  SUBCASE("no negatives pushes every pair toward one") {
    cfg.neg_ratio = 0;
    cfg.epochs = 100;
    const auto r = train_scorer(c.corpus, {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb,
                                AffordanceVariant::ConcatScoring, cfg, 0);
    CHECK(r.degenerate);
    CHECK(r.negatives == 0);
    for (const auto& v : c.verbs)
      for (const auto& n : c.nouns) CHECK(r.scorer.score_words(v, n) > 0.9);
  }
}

TEST_CASE("mapper recovers a planted linear map") {
  Rng rng(12);
  const std::size_t classes = 5, edim = 4, fdim = 6;
  const EmbeddingTable emb(zsca::testing::class_names('v', classes), random_normal(classes, edim, 1.0, rng));
  const Matrix a = random_normal(edim, fdim, 1.0, rng);
  std::vector<std::size_t> labels;
  Matrix targets(60, edim);
  for (std::size_t i = 0; i < 60; ++i) {
    labels.push_back(i % classes);
    std::ranges::copy(emb.vectors().row(i % classes), targets.row(i).begin());
  }
  const Matrix features = matmul(targets, a);
  MapperConfig cfg;
  cfg.epochs = 5000;
  cfg.lr = 3e-2;
  const auto m = train_mapper(features, labels, emb.tokens(), emb, cfg, 1);
  CHECK(m.final_loss < 1e-4);
  CHECK(m.map(features).cols() == edim);

  SUBCASE("single sample is memorised") {
    const std::vector<std::size_t> one{2};
    MapperConfig c1;
    c1.hidden = 8;
    c1.epochs = 500;
    const auto s = train_mapper(select_rows(features, one), one, emb.tokens(), emb, c1, 0);
    CHECK(s.final_loss < 1e-6);
  }
  SUBCASE("missing embedding") {
    CHECK(code_of([&] { train_mapper(features, labels, {"v0", "v1", "v2", "v3", "ghost"}, emb, cfg, 0); }) ==
          ErrorCode::MissingEmbedding);
  }
  SUBCASE("checkpoint round trip") {
    Checkpoint ck;
    m.store(ck, "mapper");
    const auto back = VisualMapper::load(ck, "mapper");
    CHECK(back.map(features) == m.map(features));
    CHECK(back.final_loss == m.final_loss);
  }
}

TEST_CASE("test-time scoring through the mapper") {
  const auto c = make_clustered(5);
  AffordanceConfig acfg;
  acfg.neg_ratio = 1;
  const auto trained = train_scorer(c.corpus, {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb,
                                    AffordanceVariant::ProjCosine, acfg, 1);
  // visual features: a planted linear image of the verb embedding plus noise
  Rng rng(6);
  const Matrix a = random_normal(c.verb_emb.dim(), 8, 1.0, rng);
  std::vector<std::size_t> labels;
  Matrix targets(240, c.verb_emb.dim());
  for (std::size_t i = 0; i < 240; ++i) {
    labels.push_back(i % c.verbs.size());
    std::ranges::copy(c.verb_emb.vectors().row(i % c.verbs.size()), targets.row(i).begin());
  }
  Matrix features = matmul(targets, a);
  for (double& v : features.values()) v += 0.05 * rng.normal();
  const auto mapper = train_mapper(features, labels, c.verbs, c.verb_emb, MapperConfig{}, 2);

  std::size_t good = 0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const std::size_t v = labels[i];
    double worst_pos = 1.0, best_neg = 0.0;
    for (std::size_t n = 0; n < c.nouns.size(); ++n) {
      const double s = test_time_score(trained.scorer, mapper, features.row(i), c.nouns[n]);
      if (c.noun_group[n] == c.verb_group[v]) {
        worst_pos = std::min(worst_pos, s);
      } else {
        best_neg = std::max(best_neg, s);
      }
    }
    good += worst_pos > best_neg;
  }
  CHECK(static_cast<double>(good) / static_cast<double>(features.rows()) >= 0.9);

  CHECK(test_time_score(make_uniform_scorer(), mapper, features.row(0), "n10") == 1.0);
  VisualMapper zero = mapper;
  for (auto& layer : zero.mlp.layers()) {
    layer.weight = Matrix(layer.weight.rows(), layer.weight.cols());
    layer.bias = Matrix(1, layer.bias.cols());
  }
  CHECK(code_of([&] { test_time_score(trained.scorer, zero, features.row(0), "n10"); }) == ErrorCode::ZeroVector);
}

TEST_CASE("scorer checkpoint round trip") {
  const auto c = make_clustered(3);
  AffordanceConfig cfg;
  cfg.epochs = 3;
  PhraseEmbeddings phrases{{{"v10", "n10"}, std::vector<double>(6, 0.25)}};
  const auto r = train_scorer(c.corpus, {}, c.verbs, c.nouns, c.verb_emb, c.noun_emb,
                              AffordanceVariant::ContextScoring, cfg, 0, phrases);
  Checkpoint ck;
  r.scorer.store(ck, "aff");
  const auto back = AffordanceScorer::load(ck, "aff");
  for (const auto& v : c.verbs)
    for (const auto& n : c.nouns) CHECK(back.score_words(v, n) == r.scorer.score_words(v, n));
  CHECK(back.phrases == phrases);
  Checkpoint ck2;
  build_lookup({{"a", "b"}}).store(ck2, "lk");
  CHECK(AffordanceScorer::load(ck2, "lk").score_words("a", "b") == 1.0);
}
