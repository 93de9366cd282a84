#include "zsca/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "zsca/error.hpp"

namespace zsca {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Hit status of one sample as a step function of the bias.
struct HitProfile {
  double tau = kInf;
  bool below = false;
  bool at = false;
  bool above = false;

  bool hit(double gamma) const { return gamma < tau ? below : gamma == tau ? at : above; }
};

std::size_t rank_of(const ScoreTensor& t, std::size_t sample, double gamma) {
  const auto scores = t.scores.row(sample);
  const std::size_t truth = t.truth[sample];
  std::size_t rank = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c != truth && outranks(scores, t.space.seen_mask, c, truth, gamma)) ++rank;
  }
  return rank;
}

HitProfile profile(const ScoreTensor& t, std::size_t sample, std::size_t k) {
  HitProfile p;
  const std::size_t truth = t.truth[sample];
  if (truth == kNoCandidate) return p;  // gated out: never ranked
  const auto s = t.scores.row(sample);
  const auto& mask = t.space.seen_mask;
  const bool truth_seen = mask[truth];
  std::size_t fixed = 0;
  std::vector<double> cross;
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (c == truth) continue;
    if (static_cast<bool>(mask[c]) == truth_seen) {
      fixed += s[c] > s[truth] || (s[c] == s[truth] && c < truth);
    } else {
      // seen truth: unseen c wins once gamma passes -(s_c - s_t)
      // unseen truth: seen c wins while gamma stays below s_c - s_t
      const double d = s[c] - s[truth];
      cross.push_back(truth_seen ? -d : d);
    }
  }
  if (fixed >= k) return p;  // never within top-k
  const std::size_t m = k - fixed;
  if (m > cross.size()) {
    p.below = p.at = p.above = true;
    return p;
  }
  if (truth_seen) {
    std::ranges::sort(cross);
    p.tau = cross[m - 1];
    p.below = true;
    p.above = false;
  } else {
    std::ranges::sort(cross, std::greater<>());
    p.tau = cross[m - 1];
    p.below = false;
    p.above = true;
  }
  p.at = rank_of(t, sample, p.tau) < k;
  return p;
}

}  // namespace

std::string_view protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Close: return "close";
    case Protocol::Open: return "open";
    case Protocol::MacroOpen: return "macro_open";
  }
  return "macro_open";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "close") return Protocol::Close;
  if (text == "open") return Protocol::Open;
  if (text == "macro_open" || text == "macro-open") return Protocol::MacroOpen;
  fail(ErrorCode::InvalidConfigValue, "protocol '" + std::string(text) + "'");
}

std::optional<std::size_t> LabelSpace::index_of(Composition c) const {
  auto it = std::lower_bound(candidates.begin(), candidates.end(), c);
  if (it == candidates.end() || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - candidates.begin());
}

LabelSpace build_label_space(const std::vector<bool>& verb_seen, const std::vector<bool>& noun_seen,
                             std::span<const Composition> train, std::span<const Composition> test,
                             Protocol protocol) {
  LabelSpace space;
  space.protocol = protocol;
  space.verb_seen = verb_seen;
  space.noun_seen = noun_seen;
  std::set<Composition> chosen;
  auto check = [&](Composition c) {
    if (c.verb >= verb_seen.size() || c.noun >= noun_seen.size())
      fail(ErrorCode::LabelOutOfRange, "composition outside the vocabularies");
  };
  switch (protocol) {
    case Protocol::MacroOpen:
      for (std::size_t v = 0; v < verb_seen.size(); ++v)
        for (std::size_t n = 0; n < noun_seen.size(); ++n) chosen.insert({v, n});
      break;
    case Protocol::Open:
      for (auto c : train) check(c), chosen.insert(c);
      for (auto c : test) check(c), chosen.insert(c);
      break;
    case Protocol::Close:
      for (auto c : test) {
        check(c);
        if (!(verb_seen[c.verb] && noun_seen[c.noun])) chosen.insert(c);
      }
      break;
  }
  space.candidates.assign(chosen.begin(), chosen.end());
  for (auto c : space.candidates) space.seen_mask.push_back(space.is_seen(c));
  return space;
}

LabelSpace build_label_space(const VocabularySplit& split, std::span<const Composition> train,
                             std::span<const Composition> test, Protocol protocol) {
  std::vector<bool> vs, ns;
  for (const auto& v : split.verbs()) vs.push_back(split.verb_seen(v));
  for (const auto& n : split.nouns()) ns.push_back(split.noun_seen(n));
  return build_label_space(vs, ns, train, test, protocol);
}

ScoreTensor compose(const Matrix& verb_scores, const Matrix& noun_scores,
                    const AffordanceFactors& factors, const LabelSpace& space,
                    std::span<const Composition> truths) {
  const std::size_t n = truths.size();
  if (verb_scores.rows() != n || noun_scores.rows() != n)
    fail(ErrorCode::ShapeMismatch, "score rows differ from sample count");
  if (verb_scores.cols() != space.verb_seen.size() || noun_scores.cols() != space.noun_seen.size())
    fail(ErrorCode::ShapeMismatch, "score columns must cover the full vocabularies");
  using Kind = AffordanceFactors::Kind;
  if (factors.kind == Kind::PerSample &&
      (factors.values.rows() != n || factors.values.cols() != space.noun_seen.size()))
    fail(ErrorCode::ShapeMismatch, "per-sample affordance must be samples x nouns");
  if ((factors.kind == Kind::PerPair || factors.kind == Kind::Indicator) &&
      (factors.values.rows() != space.verb_seen.size() || factors.values.cols() != space.noun_seen.size()))
    fail(ErrorCode::ShapeMismatch, "pair affordance must be verbs x nouns");
  if (space.empty()) fail(ErrorCode::EmptyLabelSpace, std::string(protocol_name(space.protocol)));

  ScoreTensor t;
  t.space = space;
  if (factors.kind == Kind::Indicator) {
    t.space.candidates.clear();
    t.space.seen_mask.clear();
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto c = space.candidates[i];
      if (factors.values(c.verb, c.noun) != 0.0) {
        t.space.candidates.push_back(c);
        t.space.seen_mask.push_back(space.seen_mask[i]);
      }
    }
    if (t.space.empty()) fail(ErrorCode::AllZeroScores, "affordance table excludes every candidate");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (space.index_of(truths[s])) t.sample_rows.push_back(s);
  }
  if (t.sample_rows.empty()) {
    fail(ErrorCode::EmptyLabelSpace, "no sample's composition lies in the " +
                                         std::string(protocol_name(space.protocol)) + " space");
  }
  t.scores = Matrix(t.sample_rows.size(), t.space.size());
  bool any_nonzero = false;
  for (std::size_t i = 0; i < t.sample_rows.size(); ++i) {
    const std::size_t s = t.sample_rows[i];
    for (std::size_t j = 0; j < t.space.size(); ++j) {
      const auto c = t.space.candidates[j];
      double value = verb_scores(s, c.verb) * noun_scores(s, c.noun);
      if (factors.kind == Kind::PerSample) value *= factors.values(s, c.noun);
      if (factors.kind == Kind::PerPair) value *= factors.values(c.verb, c.noun);
      if (!std::isfinite(value)) fail(ErrorCode::NonFiniteFunction, "composed score");
      any_nonzero |= value != 0.0;
      t.scores(i, j) = value;
    }
    const auto idx = t.space.index_of(truths[s]);
    t.truth.push_back(idx ? *idx : kNoCandidate);
    t.sample_seen.push_back(space.is_seen(truths[s]));
  }
  if (!any_nonzero) fail(ErrorCode::AllZeroScores, "every composed score is zero");
  return t;
}

bool outranks(std::span<const double> scores, const std::vector<bool>& seen_mask, std::size_t c,
              std::size_t t, double gamma) {
  const double d = scores[c] - scores[t];
  const bool tie_wins = c < t;
  if (seen_mask[c] == seen_mask[t]) return d > 0.0 || (d == 0.0 && tie_wins);
  if (!seen_mask[c]) return d > -gamma || (d == -gamma && tie_wins);  // c biased
  return d > gamma || (d == gamma && tie_wins);                       // t biased
}

double trapezoid_auc(std::vector<CurvePoint> points) {
  std::ranges::sort(points, [](const CurvePoint& a, const CurvePoint& b) {
    if (a.seen_acc != b.seen_acc) return a.seen_acc < b.seen_acc;
    return a.unseen_acc > b.unseen_acc;
  });
  if (points.empty()) return 0.0;
  // flat extension to the unseen axis: the area is that of the region every
  // curve point dominates
  double area = points.front().seen_acc * points.front().unseen_acc;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].seen_acc - points[i - 1].seen_acc) *
            (points[i].unseen_acc + points[i - 1].unseen_acc) / 2.0;
  }
  return area * 100.0;
}

AucResult auc_sweep(const ScoreTensor& tensor, std::size_t k, std::size_t grid) {
  std::size_t n_seen = 0;
  std::size_t n_unseen = 0;
  for (bool s : tensor.sample_seen) (s ? n_seen : n_unseen)++;
  if (n_seen == 0 || n_unseen == 0) {
    fail(ErrorCode::MissingSeenOrUnseenSamples, std::to_string(n_seen) + " seen-labelled and " +
                                                    std::to_string(n_unseen) + " unseen-labelled samples");
  }
  if (k == 0) fail(ErrorCode::InvalidConfigValue, "k must be positive");

  std::vector<HitProfile> profiles;
  profiles.reserve(tensor.samples());
  for (std::size_t i = 0; i < tensor.samples(); ++i) profiles.push_back(profile(tensor, i, k));

  std::vector<double> gammas{-kInf, kInf};
  std::vector<double> taus;
  for (const auto& p : profiles)
    if (std::isfinite(p.tau)) taus.push_back(p.tau);
  std::ranges::sort(taus);
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    gammas.push_back(taus[i]);
    if (i + 1 < taus.size()) gammas.push_back(taus[i] + (taus[i + 1] - taus[i]) / 2.0);
  }
  const auto values = tensor.scores.values();
  const auto [lo, hi] = std::ranges::minmax_element(values);
  const double range = values.empty() ? 0.0 : *hi - *lo;
  if (grid == 1) gammas.push_back(0.0);
  for (std::size_t j = 0; grid > 1 && j < grid; ++j) {
    gammas.push_back(-range + 2.0 * range * static_cast<double>(j) / static_cast<double>(grid - 1));
  }
  std::ranges::sort(gammas);
  gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());

  AucResult result;
  for (double g : gammas) {
    std::size_t hs = 0;
    std::size_t hu = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (profiles[i].hit(g)) (tensor.sample_seen[i] ? hs : hu)++;
    }
    result.curve.push_back({g, static_cast<double>(hs) / static_cast<double>(n_seen),
                            static_cast<double>(hu) / static_cast<double>(n_unseen)});
  }
  result.auc = trapezoid_auc(result.curve);
  return result;
}

double topk_precision(const ScoreTensor& tensor, std::size_t k) {
  if (k > tensor.space.size()) {
    fail(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds " +
                                   std::to_string(tensor.space.size()) + " candidates");
  }
  if (tensor.samples() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tensor.samples(); ++i) {
    if (tensor.truth[i] != kNoCandidate && rank_of(tensor, i, 0.0) < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(tensor.samples());
}

double mean_average_precision(const ScoreTensor& tensor, ClassFilter filter) {
  const std::size_t n = tensor.samples();
  double sum = 0.0;
  std::size_t classes = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < tensor.space.size(); ++c) {
    if (filter == ClassFilter::ZeroShot && tensor.space.seen_mask[c]) continue;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) positives += tensor.truth[i] == c;
    if (positives == 0) continue;
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
      return tensor.scores(a, c) > tensor.scores(b, c);
    });
    double ap = 0.0;
    std::size_t seen_pos = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (tensor.truth[order[r]] != c) continue;
      ++seen_pos;
      ap += static_cast<double>(seen_pos) / static_cast<double>(r + 1);
    }
    sum += ap / static_cast<double>(positives);
    ++classes;
  }
  return classes == 0 ? 0.0 : 100.0 * sum / static_cast<double>(classes);
}

double chance_auc(const ScoreTensor& tensor, std::size_t k, std::size_t trials, std::uint64_t seed,
                  std::size_t grid) {
  if (trials == 0) return 0.0;
  Rng rng = Rng(seed).fork("chance");
  ScoreTensor random = tensor;
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& v : random.scores.values()) v = rng.uniform();
    total += auc_sweep(random, k, grid).auc;
  }
  return total / static_cast<double>(trials);
}

EvalReport evaluate(const ScoreTensor& tensor, const ScoreTensor& map_tensor,
                    const std::vector<std::size_t>& ks, std::size_t grid) {
  EvalReport r;
  r.protocol = tensor.space.protocol;
  r.ks = ks;
  r.samples = tensor.samples();
  r.candidates = tensor.space.size();
  for (auto k : ks) {
    if (tensor.space.protocol != Protocol::Close) {
      auto auc = auc_sweep(tensor, k, grid);
      r.auc_top_k.push_back(auc.auc);
      r.curves.push_back(std::move(auc.curve));
    }
    r.topk.push_back(topk_precision(tensor, k));
  }
  r.map_all = mean_average_precision(map_tensor, ClassFilter::All);
  r.map_zero_shot = mean_average_precision(map_tensor, ClassFilter::ZeroShot);
  return r;
}

}  // namespace zsca
