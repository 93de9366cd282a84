#pragma once

// Composition of verb/noun/affordance scores over a candidate label space and
// the ranking metrics computed on it.

#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsca/numerics.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

enum class Protocol { Close, Open, MacroOpen };
std::string_view protocol_name(Protocol p);  // "close", "open", "macro_open"
Protocol parse_protocol(std::string_view text);  // also accepts "macro-open"

struct Composition {
  std::size_t verb = 0;
  std::size_t noun = 0;
  auto operator<=>(const Composition&) const = default;
};

struct LabelSpace {
  Protocol protocol = Protocol::MacroOpen;
  std::vector<bool> verb_seen;  // per verb vocabulary index
  std::vector<bool> noun_seen;
  std::vector<Composition> candidates;  // verb-major, unique
  std::vector<bool> seen_mask;          // verb and noun both seen

  std::size_t size() const noexcept { return candidates.size(); }
  bool empty() const noexcept { return candidates.empty(); }
  std::optional<std::size_t> index_of(Composition c) const;
  bool is_seen(Composition c) const { return verb_seen[c.verb] && noun_seen[c.noun]; }
};

LabelSpace build_label_space(const std::vector<bool>& verb_seen, const std::vector<bool>& noun_seen,
                             std::span<const Composition> train, std::span<const Composition> test,
                             Protocol protocol);
LabelSpace build_label_space(const VocabularySplit& split, std::span<const Composition> train,
                             std::span<const Composition> test, Protocol protocol);

// Multiplicative affordance factor for composition.
struct AffordanceFactors {
  enum class Kind { None, PerSample, PerPair, Indicator };
  Kind kind = Kind::None;
  // PerSample: samples x nouns. PerPair / Indicator: verbs x nouns.
  Matrix values;

  static AffordanceFactors none() { return {}; }
  static AffordanceFactors per_sample(Matrix m) { return {Kind::PerSample, std::move(m)}; }
  static AffordanceFactors per_pair(Matrix m) { return {Kind::PerPair, std::move(m)}; }
  // 0/1 table; zero entries remove the candidate from the space.
  static AffordanceFactors indicator(Matrix m) { return {Kind::Indicator, std::move(m)}; }
};

inline constexpr std::size_t kNoCandidate = std::numeric_limits<std::size_t>::max();

struct ScoreTensor {
  LabelSpace space;
  Matrix scores;                      // evaluated samples x candidates
  std::vector<std::size_t> truth;     // candidate index, or kNoCandidate if gated out
  std::vector<bool> sample_seen;      // true composition in V_s x N_s
  std::vector<std::size_t> sample_rows;  // row of each evaluated sample in the inputs

  std::size_t samples() const noexcept { return scores.rows(); }
};

// P(v,n) = P(v) * P(n) * A. Samples whose truth lies outside the protocol's
// space are not evaluated (close world); candidates with a zero indicator
// are removed. Throws AllZeroScores when nothing nonzero survives.
ScoreTensor compose(const Matrix& verb_scores, const Matrix& noun_scores,
                    const AffordanceFactors& factors, const LabelSpace& space,
                    std::span<const Composition> truths);

// Does candidate c outrank the true candidate t at bias gamma (added to every
// candidate outside V_s x N_s)? Ties go to the lower candidate index.
bool outranks(std::span<const double> scores, const std::vector<bool>& seen_mask, std::size_t c,
              std::size_t t, double gamma);

struct CurvePoint {
  double gamma = 0.0;
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
};

struct AucResult {
  double auc = 0.0;  // percentage
  std::vector<CurvePoint> curve;  // sorted by gamma, endpoints at -inf / +inf
};

// Trapezoids over the (seen, unseen) points sorted by seen accuracy, with
// the first point extended flat to seen = 0; times 100.
double trapezoid_auc(std::vector<CurvePoint> points);

AucResult auc_sweep(const ScoreTensor& tensor, std::size_t k, std::size_t grid = 201);

double topk_precision(const ScoreTensor& tensor, std::size_t k);

enum class ClassFilter { All, ZeroShot };
// Returns 0 when no class passes the filter with a positive sample.
double mean_average_precision(const ScoreTensor& tensor, ClassFilter filter);

// Mean top-k AUC of i.i.d. uniform scores on the same space and truths.
double chance_auc(const ScoreTensor& tensor, std::size_t k, std::size_t trials, std::uint64_t seed,
                  std::size_t grid = 201);

struct EvalReport {
  Protocol protocol = Protocol::MacroOpen;
  std::vector<std::size_t> ks;
  std::vector<double> auc_top_k;       // empty for close world
  std::vector<std::vector<CurvePoint>> curves;
  std::vector<double> topk;            // plain top-k precision
  double map_all = 0.0;
  double map_zero_shot = 0.0;
  std::size_t samples = 0;
  std::size_t candidates = 0;
  std::vector<std::string> notes;
};

// AUC (open / macro_open) and top-k on `tensor`; mAP on `map_tensor`.
EvalReport evaluate(const ScoreTensor& tensor, const ScoreTensor& map_tensor,
                    const std::vector<std::size_t>& ks, std::size_t grid = 201);

}  // namespace zsca
