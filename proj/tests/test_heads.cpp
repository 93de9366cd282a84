#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "test_util.hpp"
#include "zsca/heads.hpp"

using namespace zsca;
using zsca::testing::code_of;
using zsca::testing::param_check;

namespace {

HeadsConfig small_config() {
  HeadsConfig c;
  c.layers = 2;
  c.hidden = 6;
  c.out_dim = 4;
  return c;
}

double train_accuracy(const BranchModel& m, const FeatureTable& t) {
  const Matrix s = predict_scores(m, t.features);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto row = s.row(r);
    hits += static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) == t.verb_labels[r];
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

}  // namespace

TEST_CASE("branch losses pass finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto model = init_branch(5, 3, Branch::Verb, small_config(), rng);
    const Matrix x = random_normal(7, 5, 1.0, rng);
    const std::vector<std::size_t> y{0, 1, 2, 2, 1, 0, 1};
    const std::vector<std::size_t> opp{1, 0, 0, 1, 1, 0, 1};
    Discriminator disc{random_normal(2, 4, 1.0, rng), random_normal(1, 2, 1.0, rng)};
    const double lambda = 0.7;

    const auto g = branch_loss(model, x, y);
    const auto ga = adversarial_feature_loss(model, disc, x, y, opp, lambda);
    auto plain = [&](const BranchModel& m) { return branch_loss(m, x, y).loss; };
    auto adv = [&](const BranchModel& m) { return adversarial_feature_loss(m, disc, x, y, opp, lambda).loss; };

    CHECK(param_check(model, [](BranchModel& m) -> Matrix& { return m.classifier; }, plain, g.classifier) <= 1e-6);
    CHECK(param_check(model, [](BranchModel& m) -> Matrix& { return m.classifier; }, adv, ga.classifier) <= 1e-6);
    for (std::size_t l = 0; l < model.projection.depth(); ++l) {
      auto w = [l](BranchModel& m) -> Matrix& { return m.projection.layers()[l].weight; };
      auto b = [l](BranchModel& m) -> Matrix& { return m.projection.layers()[l].bias; };
      CHECK(param_check(model, w, plain, g.projection[l].weight) <= 1e-6);
      CHECK(param_check(model, b, plain, g.projection[l].bias) <= 1e-6);
      CHECK(param_check(model, w, adv, ga.projection[l].weight) <= 1e-6);
      CHECK(param_check(model, b, adv, ga.projection[l].bias) <= 1e-6);
    }

    const Matrix h = model.project(x);
    const auto gd = discriminator_loss(disc, h, opp);
    auto dl = [&](const Discriminator& d) { return discriminator_loss(d, h, opp).loss; };
    CHECK(param_check(disc, [](Discriminator& d) -> Matrix& { return d.weights; }, dl, gd.weights) <= 1e-6);
    CHECK(param_check(disc, [](Discriminator& d) -> Matrix& { return d.bias; }, dl, gd.bias) <= 1e-6);
  }
}

TEST_CASE("separable blobs are learned") {
  const auto b = zsca::testing::make_blobs(3, 40, 6, 4.0, 0.3, 5);
  HeadsConfig cfg = small_config();
  cfg.hidden = 16;
  cfg.out_dim = 8;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.lr = 1e-2;
  const auto m = train_branch(b.table, b.split, Branch::Verb, cfg, 11);
  CHECK(train_accuracy(m, b.table) >= 0.99);
  CHECK(m.classifier.rows() == 3);
  CHECK(m.classes == b.split.verbs_seen);
  REQUIRE(m.loss_trace.size() == cfg.epochs);
  CHECK(m.loss_trace.back() < m.loss_trace.front());
  for (std::size_t i = 1; i < m.loss_trace.size(); ++i) CHECK(m.loss_trace[i] <= 1.05 * m.loss_trace[i - 1]);

  SUBCASE("same seed, same model") {
    const auto again = train_branch(b.table, b.split, Branch::Verb, cfg, 11);
    CHECK(again.projection == m.projection);
    CHECK(again.classifier == m.classifier);
  }
  SUBCASE("checkpoint round trip") {
    Checkpoint ck;
    m.store(ck, "verb");
    const auto back = BranchModel::load(ck, "verb");
    CHECK(back.classifier == m.classifier);
    CHECK(back.projection == m.projection);
    CHECK(back.classes == m.classes);
    CHECK(back.loss_trace == m.loss_trace);
  }
}

TEST_CASE("training contract errors") {
  auto b = zsca::testing::make_blobs(3, 4, 3, 1.0, 0.1, 1);
  HeadsConfig cfg = small_config();
  cfg.epochs = 1;
  SUBCASE("unseen verb in train") {
    b.table.verb_labels[0] = 3;  // "vz"
    CHECK(code_of([&] { train_branch(b.table, b.split, Branch::Verb, cfg, 0); }) == ErrorCode::UnseenLabelInTrain);
  }
  SUBCASE("no train rows") {
    std::ranges::fill(b.table.split_tags, SplitTag::Test);
    CHECK(code_of([&] { train_branch(b.table, b.split, Branch::Verb, cfg, 0); }) == ErrorCode::EmptyTrainSet);
  }
  SUBCASE("single seen class") {
    auto s = b.split;
    s.verbs_seen = {"v0"};
    s.verbs_unseen = {"v1", "v2", "vz"};
    std::ranges::fill(b.table.verb_labels, 0);
    CHECK(code_of([&] { train_branch(b.table, s, Branch::Verb, cfg, 0); }) == ErrorCode::TooFewClasses);
  }
  SUBCASE("misaligned branches") {
    auto noun = b.table;
    noun.features = Matrix(b.table.samples() - 1, 3);
    noun.sample_ids.pop_back();
    CHECK(code_of([&] { train_branch_adversarial(b.table, noun, b.split, cfg, 0); }) ==
          ErrorCode::SampleAlignmentMismatch);
  }
}

TEST_CASE("zero adversarial weight reproduces plain training bit for bit") {
  const auto e = zsca::testing::make_entangled(3, 3, 60, 4);
  HeadsConfig cfg = small_config();
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.lambda = 0.0;
  const auto adv = train_branch_adversarial(e.verb, e.noun, e.split, cfg, 9);
  const auto pv = train_branch(e.verb, e.split, Branch::Verb, cfg, 9);
  const auto pn = train_branch(e.noun, e.split, Branch::Noun, cfg, 9);
  CHECK(adv.verb.projection == pv.projection);
  CHECK(adv.verb.classifier == pv.classifier);
  CHECK(adv.verb.loss_trace == pv.loss_trace);
  CHECK(adv.noun.projection == pn.projection);
  CHECK(adv.noun.classifier == pn.classifier);
  CHECK(adv.verb_disc_accuracy.size() == cfg.epochs);
}

TEST_CASE("predict_scores") {
  Rng rng(2);
  auto m = init_branch(3, 2, Branch::Noun, small_config(), rng);
  const Matrix x = random_normal(4, 3, 1.0, rng);
  SUBCASE("zero weights give one half") {
    m.classifier = Matrix(2, 4);
    const Matrix p = predict_scores(m, x);
    for (double v : p.values()) CHECK(v == 0.5);
  }
  SUBCASE("scalar model") {
    BranchModel s;
    s.projection = Mlp({AffineLayer{Matrix::from_rows({{1.5}}), Matrix::from_rows({{-0.25}})}});
    s.classifier = Matrix::from_rows({{0.8}});
    const Matrix f = Matrix::from_rows({{2.0}, {-1.0}});
    const Matrix p = predict_scores(s, f);
    for (std::size_t r = 0; r < 2; ++r) {
      const double expected = 1.0 / (1.0 + std::exp(-0.8 * (1.5 * f(r, 0) - 0.25)));
      CHECK(std::abs(p(r, 0) - expected) < 1e-12);
    }
  }
  SUBCASE("override widens and shape is checked") {
    const Matrix bank = random_normal(5, 4, 1.0, rng);
    CHECK(predict_scores(m, x, bank).cols() == 5);
    CHECK(code_of([&] { predict_scores(m, x, Matrix(5, 3)); }) == ErrorCode::ShapeMismatch);
  }
  SUBCASE("raising one logit moves only its own probability") {
    const Matrix h = m.project(x);
    const Matrix base = predict_scores(m, x);
    for (std::size_t c = 0; c < 2; ++c) {
      // shift row c along h_0 so that sample 0's logit rises
      Matrix w = m.classifier;
      for (std::size_t j = 0; j < 4; ++j) w(c, j) += 0.1 * h(0, j);
      const Matrix moved = predict_scores(m, x, w);
      CHECK(moved(0, c) > base(0, c));
      CHECK(moved(0, 1 - c) == base(0, 1 - c));
    }
  }
  SUBCASE("sigmoid and softmax agree on argmax") {
    const Matrix logits = matmul_nt(m.project(x), m.classifier);
    const Matrix sm = softmax_rows(logits);
    const Matrix sg = predict_scores(m, x);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK((sm(r, 0) > sm(r, 1)) == (sg(r, 0) > sg(r, 1)));
    }
  }
}
