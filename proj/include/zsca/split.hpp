#pragma once

// Frequency-based seen/unseen split of verb and noun vocabularies.

#include <set>
#include <string>

#include "zsca/config.hpp"
#include "zsca/corpora_io.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

struct SplitSpec {
  FrequencyTable verb_counts;
  FrequencyTable noun_counts;
  std::set<std::string> protected_verbs;
  std::set<std::string> protected_nouns;
  double unseen_fraction = 0.2;  // in (0, 1)
  std::size_t min_count = 10;
};

struct SplitHalves {
  Vocabulary seen;
  Vocabulary unseen;
};

// One vocabulary: drop classes under min_count, keep protected tokens seen,
// sort the rest by count descending (ties by token) and mark the last
// ceil(fraction * remaining) unseen.
SplitHalves split_vocabulary(const FrequencyTable& counts, const std::set<std::string>& protect,
                             double unseen_fraction, std::size_t min_count, std::string_view what);

VocabularySplit make_split(const SplitSpec& spec);

// Reads the split.* keys.
SplitSpec split_spec(const Config& config);

}  // namespace zsca
