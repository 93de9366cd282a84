#pragma once

// Synthetic data shared by unit tests and the acceptance binary.

#include <string>
#include <utility>
#include <vector>

#include "zsca/corpora_io.hpp"
#include "zsca/numerics.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca::testing {

// Names sort in index order for up to 10 classes; the unseen token sorts last.
inline Vocabulary class_names(char prefix, std::size_t n) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(std::string(1, prefix) + std::to_string(i));
  return v;
}

inline VocabularySplit toy_split(std::size_t verbs, std::size_t nouns) {
  VocabularySplit s{class_names('v', verbs), {"vz"}, class_names('n', nouns), {"nz"}};
  s.validate();
  return s;
}

inline Matrix prototypes(std::size_t classes, std::size_t dim, double scale, Rng& rng) {
  return random_normal(classes, dim, scale, rng);
}

// Gaussian blobs labelled on the verb axis; noun labels cycle over two nouns.
struct Blobs {
  FeatureTable table;
  VocabularySplit split;
};

inline Blobs make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double margin,
                        double noise, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix proto = prototypes(classes, dim, margin, rng);
  Blobs b{{}, toy_split(classes, 2)};
  const std::size_t n = classes * per_class;
  b.table.features = Matrix(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    for (std::size_t j = 0; j < dim; ++j) b.table.features(i, j) = proto(c, j) + noise * rng.normal();
    b.table.sample_ids.push_back("s" + std::to_string(i));
    b.table.verb_labels.push_back(c);
    b.table.noun_labels.push_back(i % 2);
    b.table.split_tags.push_back(SplitTag::Train);
  }
  return b;
}

// Each branch's input carries its own label signal concatenated with the
// opposite label's signal.
struct Entangled {
  FeatureTable verb;
  FeatureTable noun;
  VocabularySplit split;
  std::vector<std::size_t> probe_train;  // halves of the train rows
  std::vector<std::size_t> probe_test;
};

inline Entangled make_entangled(std::uint64_t seed, std::size_t classes = 4, std::size_t samples = 400,
                                std::size_t dim = 8, double noise = 0.5) {
  Rng rng(seed);
  const Matrix pv = prototypes(classes, dim, 1.0, rng);
  const Matrix pn = prototypes(classes, dim, 1.0, rng);
  Entangled e;
  e.split = toy_split(classes, classes);
  e.verb.features = Matrix(samples, 2 * dim);
  e.noun.features = Matrix(samples, 2 * dim);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t v = rng.below(classes);
    const std::size_t n = rng.below(classes);
    for (std::size_t j = 0; j < dim; ++j) {
      e.verb.features(i, j) = pv(v, j) + noise * rng.normal();
      e.verb.features(i, dim + j) = pn(n, j) + noise * rng.normal();
      e.noun.features(i, j) = pn(n, j) + noise * rng.normal();
      e.noun.features(i, dim + j) = pv(v, j) + noise * rng.normal();
    }
    for (auto* t : {&e.verb, &e.noun}) {
      t->sample_ids.push_back("s" + std::to_string(i));
      t->verb_labels.push_back(v);
      t->noun_labels.push_back(n);
      t->split_tags.push_back(SplitTag::Train);
    }
    (i % 2 == 0 ? e.probe_train : e.probe_test).push_back(i);
  }
  return e;
}

}  // namespace zsca::testing
