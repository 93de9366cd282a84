#pragma once

// Planted synthetic benchmark: every file the pipeline reads, plus the
// generating parameters under planted/ for oracle checks.

#include <cstdint>
#include <filesystem>

#include "zsca/config.hpp"

namespace zsca {

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t verbs_seen = 8, verbs_unseen = 4;
  std::size_t nouns_seen = 10, nouns_unseen = 5;
  std::size_t samples_per_class = 30;  // per compatible composition
  double noise = 0.5;
  double graph_density = 0.2;
  std::size_t groups = 4;
  std::size_t compat_types = 2;
  std::size_t embedding_dim = 16;
  std::size_t weight_dim = 16;
  std::size_t feature_dim = 32;
  double test_fraction = 0.3;
};

// Reads the synth.* keys and the seed.
SynthSpec synth_spec(const Config& config);

// Writes the benchmark into `out_dir` and returns the path of its config.
fs::path make_synth(const SynthSpec& spec, const fs::path& out_dir);

}  // namespace zsca
