#pragma once

// Brute-force reference implementations for the ranking metrics, written
// without reference to the library's own ranking code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "zsca/eval.hpp"
#include "zsca/numerics.hpp"

namespace zsca::oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Position of the true candidate after adding gamma to every unseen
// candidate; equal biased scores resolve to the lower index.
inline std::size_t biased_position(std::span<const double> s, const std::vector<bool>& seen, std::size_t truth,
                                   double gamma) {
  std::size_t pos = 0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (c == truth) continue;
    const double shift = (seen[c] ? 0.0 : 1.0) - (seen[truth] ? 0.0 : 1.0);
    // (s_c + shift*gamma) vs s_t, evaluated as a difference
    const double key = shift == 0.0 ? s[c] - s[truth] : (s[c] - s[truth]) + shift * gamma;
    if (key > 0.0 || (key == 0.0 && c < truth)) ++pos;
  }
  return pos;
}

struct Point {
  double s, u;
};

inline double anchored_area(std::vector<Point> pts) {
  // gamma descending already orders seen ascending / unseen descending
  double area = pts.front().s * pts.front().u;
  for (std::size_t i = 1; i < pts.size(); ++i) area += (pts[i].s - pts[i - 1].s) * (pts[i].u + pts[i - 1].u) / 2.0;
  return 100.0 * area;
}

// Every difference between two candidates of opposite groups in any sample,
// with both signs, their midpoints, and the infinite endpoints.
inline double auc(const ScoreTensor& t, std::size_t k) {
  std::vector<double> crit;
  const auto& seen = t.space.seen_mask;
  for (std::size_t i = 0; i < t.samples(); ++i) {
    const auto s = t.scores.row(i);
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = 0; b < s.size(); ++b)
        if (seen[a] != seen[b]) crit.push_back(s[a] - s[b]);
  }
  std::sort(crit.begin(), crit.end());
  crit.erase(std::unique(crit.begin(), crit.end()), crit.end());
  std::vector<double> gammas{-kInf, kInf};
  for (std::size_t i = 0; i < crit.size(); ++i) {
    gammas.push_back(crit[i]);
    if (i + 1 < crit.size()) gammas.push_back(crit[i] / 2.0 + crit[i + 1] / 2.0);
  }
  std::sort(gammas.begin(), gammas.end(), std::greater<>());
  double ns = 0, nu = 0;
  for (bool b : t.sample_seen) (b ? ns : nu) += 1;
  std::vector<Point> pts;
  for (double g : gammas) {
    double hs = 0, hu = 0;
    for (std::size_t i = 0; i < t.samples(); ++i) {
      if (t.truth[i] == kNoCandidate) continue;
      if (biased_position(t.scores.row(i), seen, t.truth[i], g) < k) (t.sample_seen[i] ? hs : hu) += 1;
    }
    pts.push_back({hs / ns, hu / nu});
  }
  return anchored_area(pts);
}

inline double topk(const ScoreTensor& t, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < t.samples(); ++i) {
    if (t.truth[i] == kNoCandidate) continue;
    std::vector<std::size_t> order(t.space.size());
    std::iota(order.begin(), order.end(), 0);
    const auto s = t.scores.row(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return s[a] != s[b] ? s[a] > s[b] : a < b;
    });
    hits += static_cast<std::size_t>(std::find(order.begin(), order.end(), t.truth[i]) - order.begin()) < k;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(t.samples());
}

inline double average_precision(const std::vector<std::pair<double, bool>>& ranked) {
  double ap = 0, pos = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (!ranked[r].second) continue;
    pos += 1;
    ap += pos / static_cast<double>(r + 1);
  }
  return pos == 0 ? 0.0 : ap / pos;
}

inline double mean_ap(const ScoreTensor& t, bool zero_shot_only) {
  double total = 0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < t.space.size(); ++c) {
    if (zero_shot_only && t.space.seen_mask[c]) continue;
    std::vector<std::size_t> idx(t.samples());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return t.scores(a, c) != t.scores(b, c) ? t.scores(a, c) > t.scores(b, c) : a < b;
    });
    std::vector<std::pair<double, bool>> ranked;
    bool any = false;
    for (auto i : idx) {
      ranked.push_back({t.scores(i, c), t.truth[i] == c});
      any |= t.truth[i] == c;
    }
    if (!any) continue;
    total += average_precision(ranked);
    ++classes;
  }
  return classes == 0 ? 0.0 : 100.0 * total / static_cast<double>(classes);
}

// Random small benchmark: vocabularies with seen flags, presented
// compositions, and coarse-valued scores so ties are common.
struct Fixture {
  std::vector<bool> verb_seen, noun_seen;
  std::vector<Composition> train, test;
  Matrix verb_scores, noun_scores;
};

inline Fixture random_fixture(Rng& rng, std::size_t max_verbs = 4, std::size_t max_nouns = 4,
                              std::size_t max_samples = 6) {
  Fixture f;
  const std::size_t nv = 2 + rng.below(max_verbs - 1);
  const std::size_t nn = 2 + rng.below(max_nouns - 1);
  for (std::size_t i = 0; i < nv; ++i) f.verb_seen.push_back(i == 0 || (i != 1 && rng.uniform() < 0.5));
  for (std::size_t i = 0; i < nn; ++i) f.noun_seen.push_back(i == 0 || (i != 1 && rng.uniform() < 0.5));
  const std::size_t samples = 2 + rng.below(max_samples - 1);
  // one guaranteed seen and one guaranteed unseen test sample
  f.test.push_back({0, 0});
  f.test.push_back({1, rng.below(nn)});
  while (f.test.size() < samples) f.test.push_back({rng.below(nv), rng.below(nn)});
  const std::size_t ntrain = rng.below(4);
  for (std::size_t i = 0; i < ntrain; ++i) {
    const std::size_t v = rng.below(nv), n = rng.below(nn);
    if (f.verb_seen[v] && f.noun_seen[n]) f.train.push_back({v, n});
  }
  const bool coarse = rng.uniform() < 0.5;
  auto draw = [&] { return coarse ? 0.25 * static_cast<double>(1 + rng.below(4)) : rng.uniform(0.01, 1.0); };
  f.verb_scores = Matrix(samples, nv);
  f.noun_scores = Matrix(samples, nn);
  for (double& v : f.verb_scores.values()) v = draw();
  for (double& v : f.noun_scores.values()) v = draw();
  return f;
}

inline ScoreTensor tensor_for(const Fixture& f, Protocol p,
                              const AffordanceFactors& factors = AffordanceFactors::none()) {
  const auto space = build_label_space(f.verb_seen, f.noun_seen, f.train, f.test, p);
  return compose(f.verb_scores, f.noun_scores, factors, space, f.test);
}

}  // namespace zsca::oracle
