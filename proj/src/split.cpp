#include "zsca/split.hpp"

#include <algorithm>
#include <cmath>

#include "zsca/error.hpp"

namespace zsca {

SplitHalves split_vocabulary(const FrequencyTable& counts, const std::set<std::string>& protect,
                             double unseen_fraction, std::size_t min_count, std::string_view what) {
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0))
    fail(ErrorCode::InvalidConfigValue, "unseen fraction must lie in (0, 1)");
  SplitHalves out;
  std::vector<std::pair<std::string, std::size_t>> rest;
  for (const auto& [token, n] : counts) {
    if (n < min_count) continue;
    if (protect.contains(token)) {
      out.seen.push_back(token);
    } else {
      rest.emplace_back(token, n);
    }
  }
  if (out.seen.empty() && rest.empty())
    fail(ErrorCode::EmptyAfterFilter, std::string(what) + ": no class has " + std::to_string(min_count) + " instances");
  if (rest.empty()) fail(ErrorCode::AllClassesProtected, std::string(what) + ": nothing left to mark unseen");
  std::ranges::sort(rest, [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const auto unseen = static_cast<std::size_t>(std::ceil(unseen_fraction * static_cast<double>(rest.size())));
  const std::size_t cut = rest.size() - std::min(unseen, rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) (i < cut ? out.seen : out.unseen).push_back(rest[i].first);
  std::ranges::sort(out.seen);
  std::ranges::sort(out.unseen);
  return out;
}

VocabularySplit make_split(const SplitSpec& spec) {
  auto v = split_vocabulary(spec.verb_counts, spec.protected_verbs, spec.unseen_fraction, spec.min_count, "verbs");
  auto n = split_vocabulary(spec.noun_counts, spec.protected_nouns, spec.unseen_fraction, spec.min_count, "nouns");
  VocabularySplit s{std::move(v.seen), std::move(v.unseen), std::move(n.seen), std::move(n.unseen)};
  s.validate(false);
  return s;
}

SplitSpec split_spec(const Config& config) {
  SplitSpec spec;
  spec.verb_counts = read_frequency_table(config.required_path("split.verb_counts"));
  spec.noun_counts = read_frequency_table(config.required_path("split.noun_counts"));
  auto tokens = [&](const char* key) {
    std::set<std::string> out;
    if (const auto p = config.path(key); !p.empty())
      for (auto& t : read_token_list(p)) out.insert(std::move(t));
    return out;
  };
  spec.protected_verbs = tokens("split.protected_verbs");
  spec.protected_nouns = tokens("split.protected_nouns");
  spec.unseen_fraction = config.real("split.unseen_fraction");
  spec.min_count = config.count("split.min_count");
  return spec;
}

}  // namespace zsca
