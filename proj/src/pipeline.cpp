#include "zsca/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "zsca/affordance.hpp"
#include "zsca/corpora_io.hpp"
#include "zsca/error.hpp"
#include "zsca/gcn.hpp"
#include "zsca/heads.hpp"
#include "zsca/text_util.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

namespace {

const fs::path kVerbGraph = "graph_verb.ckpt";
const fs::path kNounGraph = "graph_noun.ckpt";
const fs::path kHeads = "heads.ckpt";
const fs::path kZeroShot = "zero_shot.ckpt";
const fs::path kBank = "bank.ckpt";
const fs::path kAffordance = "affordance.ckpt";
const fs::path kMapper = "mapper.ckpt";

void note(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << "\n";
}

const fs::path& need(const fs::path& p, const char* key) {
  if (p.empty()) fail(ErrorCode::MissingConfigKey, std::string(key) + " is required here");
  return p;
}

std::uint64_t stage_seed(const ExperimentConfig& c, Stage s) { return Rng(c.seed).fork(stage_name(s)).next_u64(); }

void save(Checkpoint ck, std::uint64_t fingerprint, const fs::path& path) {
  ck.fingerprint = fingerprint;
  fs::path tmp = path;
  tmp += ".tmp";
  save_checkpoint(ck, tmp);
  fs::rename(tmp, path);
}

Checkpoint load_stage(const fs::path& path, Stage producer) {
  if (!fs::exists(path))
    fail(ErrorCode::MissingPath, path.string() + " (run " + std::string(stage_name(producer)) + " first)");
  return load_checkpoint(path);
}

// Everything a stage reads from the benchmark files.
struct Data {
  VocabularySplit split;
  Vocabulary verbs, nouns;
};

Data load_split(const ExperimentConfig& c) {
  Data d;
  d.split = read_split(need(c.data.split, "data.split"));
  d.verbs = d.split.verbs();
  d.nouns = d.split.nouns();
  return d;
}

FeatureTable load_features(const ExperimentConfig& c, const Data& d, Branch b) {
  const auto& p = b == Branch::Verb ? need(c.data.verb_features, "data.verb_features")
                                    : need(c.data.noun_features, "data.noun_features");
  return read_feature_file(p, d.verbs, d.nouns);
}

EmbeddingTable load_embeddings(const ExperimentConfig& c, Branch b) {
  return b == Branch::Verb ? read_embeddings(need(c.data.verb_embeddings, "data.verb_embeddings"))
                           : read_embeddings(need(c.data.noun_embeddings, "data.noun_embeddings"));
}

std::vector<Composition> compositions(const FeatureTable& t, SplitTag tag) {
  std::vector<Composition> out;
  for (auto r : t.rows_with(tag)) out.push_back({t.verb_labels[r], t.noun_labels[r]});
  return out;
}

// ---------------------------------------------------------------- stages

void build_graph(const ExperimentConfig& c, const RunOptions& o, std::uint64_t fp) {
  const auto d = load_split(c);
  std::vector<std::string> augment;
  if (!c.data.noun_augment.empty()) augment = read_token_list(c.data.noun_augment);
  const auto noun_graph = build_noun_graph(d.nouns, read_edge_list(need(c.data.noun_edges, "data.noun_edges")), augment);
  LexicalGraph verb_graph;
  switch (c.verb_graph) {
    case GraphKind::WnDis:
      verb_graph = build_verb_graph_wn_dis(
          d.verbs, read_similarity_table(need(c.data.verb_similarity, "data.verb_similarity")), c.wn_threshold);
      break;
    case GraphKind::VnGroup:
    case GraphKind::VnTree:
      verb_graph = build_verb_graph_vn(d.verbs, read_class_membership(need(c.data.verb_classes, "data.verb_classes")),
                                       c.verb_graph == GraphKind::VnGroup ? VnVariant::Group : VnVariant::Tree);
      break;
    case GraphKind::NounHypernym:
      fail(ErrorCode::InvalidConfigValue, "graph.verb_kind");
  }
  for (auto [graph, branch, file] : {std::tuple{static_cast<const LexicalGraph*>(&verb_graph), Branch::Verb, kVerbGraph},
                                     std::tuple{&noun_graph, Branch::Noun, kNounGraph}}) {
    Checkpoint ck = graph->to_checkpoint();
    normalize(*graph, c.mode, c.norm).store(ck, "op");
    ck.put("node_features", node_embeddings(*graph, load_embeddings(c, branch)));
    save(std::move(ck), fp, o.out / file);
    note(o, std::string(branch_name(branch)) + " graph: " + std::to_string(graph->size()) + " nodes, " +
                std::to_string(graph->edges.size()) + " edges");
  }
}

void train_heads(const ExperimentConfig& c, const RunOptions& o, std::uint64_t fp) {
  const auto d = load_split(c);
  const auto vt = load_features(c, d, Branch::Verb);
  const auto nt = load_features(c, d, Branch::Noun);
  const auto seed = stage_seed(c, Stage::TrainHeads);
  Checkpoint ck;
  BranchModel verb, noun;
  if (c.adversarial) {
    auto r = train_branch_adversarial(vt, nt, d.split, c.heads, seed);
    verb = std::move(r.verb);
    noun = std::move(r.noun);
    ck.put("verb_disc_accuracy", Matrix::column(r.verb_disc_accuracy));
    ck.put("noun_disc_accuracy", Matrix::column(r.noun_disc_accuracy));
  } else {
    verb = train_branch(vt, d.split, Branch::Verb, c.heads, seed);
    noun = train_branch(nt, d.split, Branch::Noun, c.heads, seed + 1);
  }
  verb.store(ck, "verb");
  noun.store(ck, "noun");
  save(std::move(ck), fp, o.out / kHeads);
  std::string tsv = "epoch\tverb_loss\tnoun_loss\n";
  for (std::size_t e = 0; e < verb.loss_trace.size(); ++e)
    tsv += std::to_string(e + 1) + "\t" + format_double(verb.loss_trace[e]) + "\t" + format_double(noun.loss_trace[e]) + "\n";
  write_text_file(o.out / "heads_loss.tsv", tsv);
  note(o, "heads: final loss verb " + format_double(verb.loss_trace.back()) + ", noun " +
              format_double(noun.loss_trace.back()));
}

struct BranchBank {
  Matrix weights;
  std::vector<Provenance> provenance;
  std::vector<double> loss_trace;
};

BranchBank zero_shot_branch(const ExperimentConfig& c, const RunOptions& o, const Data& d, Branch b,
                            const BranchModel& head, std::uint64_t seed, Checkpoint& out) {
  const auto& vocab = b == Branch::Verb ? d.verbs : d.nouns;
  const bool kg = (b == Branch::Verb ? c.verb_head : c.noun_head) == ZeroShotHead::Graph;
  const std::string name(branch_name(b));
  BranchBank bank;
  bank.weights = Matrix(vocab.size(), head.output_dim());
  bank.provenance.assign(vocab.size(), Provenance::Predicted);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = std::ranges::find(head.classes, vocab[i]);
    if (it == head.classes.end()) continue;
    const auto row = head.classifier.row(static_cast<std::size_t>(it - head.classes.begin()));
    std::ranges::copy(row, bank.weights.row(i).begin());
    bank.provenance[i] = Provenance::Trained;
  }
  if (kg) {
    const auto gck = load_stage(o.out / (b == Branch::Verb ? kVerbGraph : kNounGraph), Stage::BuildGraph);
    const auto graph = LexicalGraph::from_checkpoint(gck);
    const auto op = PropagationOperator::load(gck, "op");
    const Matrix& x = gck.matrix("node_features");
    std::vector<std::size_t> seen_nodes, unseen_nodes, unseen_rows;
    auto node = [&](const std::string& t) {
      const auto i = graph.index_of(t);
      if (!i) fail(ErrorCode::UncoveredToken, t + " is not in the " + name + " graph");
      return *i;
    };
    for (const auto& t : head.classes) seen_nodes.push_back(node(t));
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (bank.provenance[i] == Provenance::Trained) continue;
      unseen_rows.push_back(i);
      unseen_nodes.push_back(node(vocab[i]));
    }
    const auto model = train_gcn(op, x, head.classifier, seen_nodes, c.gcn, seed);
    const Matrix predicted = predict_unseen_weights(model, x, unseen_nodes);
    for (std::size_t j = 0; j < unseen_rows.size(); ++j)
      std::ranges::copy(predicted.row(j), bank.weights.row(unseen_rows[j]).begin());
    model.store(out, name + "_gcn");
    bank.loss_trace = model.loss_trace;
    note(o, name + " gcn: loss " + format_double(model.loss_trace.front()) + " -> " +
                format_double(model.loss_trace.back()));
  } else {
    const auto table = load_features(c, d, b);
    const auto rows = table.rows_with(SplitTag::Train);
    std::vector<std::size_t> labels;
    for (auto r : rows) labels.push_back(b == Branch::Verb ? table.verb_labels[r] : table.noun_labels[r]);
    const auto ses = train_ses(select_rows(table.features, rows), labels, vocab, load_embeddings(c, b), c.ses, seed);
    ses.store(out, name + "_ses");
    note(o, name + " ses head trained");
  }
  return bank;
}

void train_zero_shot(const ExperimentConfig& c, const RunOptions& o, std::uint64_t fp) {
  const auto d = load_split(c);
  const auto hck = load_stage(o.out / kHeads, Stage::TrainHeads);
  const auto seed = stage_seed(c, Stage::TrainGcn);
  Checkpoint models;
  const auto verb = zero_shot_branch(c, o, d, Branch::Verb, BranchModel::load(hck, "verb"), seed, models);
  const auto noun = zero_shot_branch(c, o, d, Branch::Noun, BranchModel::load(hck, "noun"), seed + 1, models);
  save(std::move(models), fp, o.out / kZeroShot);
  ClassifierBank bank{verb.weights, verb.provenance, noun.weights, noun.provenance};
  save(bank.to_checkpoint(fp), fp, o.out / kBank);
  std::string tsv = "epoch\tverb_loss\tnoun_loss\n";
  const std::size_t n = std::max(verb.loss_trace.size(), noun.loss_trace.size());
  auto cell = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? format_double(v[i]) : "-"; };
  for (std::size_t e = 0; e < n; ++e)
    tsv += std::to_string(e + 1) + "\t" + cell(verb.loss_trace, e) + "\t" + cell(noun.loss_trace, e) + "\n";
  write_text_file(o.out / "gcn_loss.tsv", tsv);
}

std::set<TokenPair> token_pairs(const std::vector<Composition>& comps, const Data& d) {
  std::set<TokenPair> out;
  for (auto cp : comps) out.insert({d.verbs[cp.verb], d.nouns[cp.noun]});
  return out;
}

void train_affordance(const ExperimentConfig& c, const RunOptions& o, std::uint64_t fp) {
  const auto d = load_split(c);
  const auto vt = load_features(c, d, Branch::Verb);
  const auto train = token_pairs(compositions(vt, SplitTag::Train), d);
  Checkpoint ck;
  AffordanceScorer scorer;
  switch (c.affordance_variant) {
    case AffordanceVariant::Uniform:
      scorer = make_uniform_scorer();
      break;
    case AffordanceVariant::GroundTruth: {
      auto all = train;
      for (const auto& p : token_pairs(compositions(vt, SplitTag::Test), d)) all.insert(p);
      scorer = build_lookup(all, AffordanceVariant::GroundTruth);
      break;
    }
    case AffordanceVariant::Lookup: {
      auto pairs = train;
      for (const auto& e : read_pair_corpus(need(c.data.pair_corpus, "data.pair_corpus")).entries)
        if (e.count >= c.affordance.min_count) pairs.insert({e.verb, e.noun});
      scorer = build_lookup(pairs, AffordanceVariant::Lookup);
      break;
    }
    default: {
      PhraseEmbeddings phrases;
      if (!c.data.phrases.empty()) phrases = read_phrase_embeddings(c.data.phrases);
      const std::vector<TokenPair> extra(train.begin(), train.end());
      auto r = train_scorer(read_pair_corpus(need(c.data.pair_corpus, "data.pair_corpus")), extra, d.verbs, d.nouns,
                            load_embeddings(c, Branch::Verb), load_embeddings(c, Branch::Noun),
                            c.affordance_variant, c.affordance, stage_seed(c, Stage::TrainAffordance), phrases);
      note(o, "affordance: held-out accuracy " + format_double(r.heldout_accuracy) + ", " +
                  std::to_string(r.positives) + " positives, " + std::to_string(r.negatives) + " negatives");
      if (r.dropped_oov) note(o, "warning: dropped " + std::to_string(r.dropped_oov) + " corpus pairs without embeddings");
      if (r.degenerate) note(o, "warning: no negatives available; scorer is degenerate");
      ck.put_scalar("heldout_accuracy", r.heldout_accuracy);
      ck.put("loss_trace", Matrix::column(r.loss_trace));
      scorer = std::move(r.scorer);
    }
  }
  scorer.store(ck, "scorer");
  save(std::move(ck), fp, o.out / kAffordance);
}

void train_visual_mapper(const ExperimentConfig& c, const RunOptions& o, std::uint64_t fp) {
  const auto d = load_split(c);
  const auto vt = load_features(c, d, Branch::Verb);
  const auto verb = BranchModel::load(load_stage(o.out / kHeads, Stage::TrainHeads), "verb");
  const auto rows = vt.rows_with(SplitTag::Train);
  std::vector<std::size_t> labels;
  for (auto r : rows) labels.push_back(vt.verb_labels[r]);
  const auto mapper = train_mapper(verb.project(select_rows(vt.features, rows)), labels, d.verbs,
                                   load_embeddings(c, Branch::Verb), c.mapper, stage_seed(c, Stage::TrainMapper));
  Checkpoint ck;
  mapper.store(ck, "mapper");
  save(std::move(ck), fp, o.out / kMapper);
  note(o, "mapper: final loss " + format_double(mapper.final_loss));
}

// ---------------------------------------------------------------- evaluate

Matrix branch_scores(const ExperimentConfig& c, const RunOptions& o, Branch b, const Matrix& x, const Data& d,
                     const BranchModel& head, const ClassifierBank& bank) {
  const bool kg = (b == Branch::Verb ? c.verb_head : c.noun_head) == ZeroShotHead::Graph;
  if (kg) return predict_scores(head, x, b == Branch::Verb ? bank.verb_weights : bank.noun_weights);
  const auto ck = load_stage(o.out / kZeroShot, Stage::TrainGcn);
  const auto ses = SesModel::load(ck, std::string(branch_name(b)) + "_ses");
  return ses_predict(ses, x, load_embeddings(c, b), b == Branch::Verb ? d.verbs : d.nouns);
}

AffordanceFactors affordance_factors(const AffordanceScorer& scorer, const RunOptions& o, const Data& d,
                                     const BranchModel& verb, const Matrix& verb_x) {
  switch (scorer.variant) {
    case AffordanceVariant::Uniform:
    case AffordanceVariant::Lookup:
    case AffordanceVariant::GroundTruth: {
      Matrix table(d.verbs.size(), d.nouns.size());
      for (std::size_t v = 0; v < d.verbs.size(); ++v)
        for (std::size_t n = 0; n < d.nouns.size(); ++n) table(v, n) = scorer.score_words(d.verbs[v], d.nouns[n]);
      if (scorer.variant == AffordanceVariant::Uniform) return AffordanceFactors::per_pair(std::move(table));
      return AffordanceFactors::indicator(std::move(table));
    }
    default: {
      const auto mapper = VisualMapper::load(load_stage(o.out / kMapper, Stage::TrainMapper), "mapper");
      const Matrix q = mapper.map(verb.project(verb_x));
      Matrix f(q.rows(), d.nouns.size());
      for (std::size_t s = 0; s < q.rows(); ++s)
        for (std::size_t n = 0; n < d.nouns.size(); ++n) f(s, n) = scorer.score(q.row(s), d.nouns[n]);
      return AffordanceFactors::per_sample(std::move(f));
    }
  }
}

std::string k_label(std::size_t k) { return std::to_string(k); }

std::vector<ProtocolResult> evaluate_stage(const ExperimentConfig& c, const RunOptions& o) {
  const auto d = load_split(c);
  const auto vt = load_features(c, d, Branch::Verb);
  const auto nt = load_features(c, d, Branch::Noun);
  if (vt.sample_ids != nt.sample_ids) fail(ErrorCode::SampleAlignmentMismatch, "verb and noun feature rows differ");
  const auto hck = load_stage(o.out / kHeads, Stage::TrainHeads);
  const auto verb = BranchModel::load(hck, "verb");
  const auto noun = BranchModel::load(hck, "noun");
  const auto bank = ClassifierBank::from_checkpoint(load_stage(o.out / kBank, Stage::TrainGcn));
  const auto scorer = AffordanceScorer::load(load_stage(o.out / kAffordance, Stage::TrainAffordance), "scorer");

  const auto test_rows = vt.rows_with(SplitTag::Test);
  if (test_rows.empty()) fail(ErrorCode::EmptyTrainSet, "no test rows to evaluate");
  const Matrix vx = select_rows(vt.features, test_rows);
  const Matrix nx = select_rows(nt.features, test_rows);
  const Matrix vs = branch_scores(c, o, Branch::Verb, vx, d, verb, bank);
  const Matrix ns = branch_scores(c, o, Branch::Noun, nx, d, noun, bank);
  const auto factors = affordance_factors(scorer, o, d, verb, vx);
  const auto train = compositions(vt, SplitTag::Train);
  const auto test = compositions(vt, SplitTag::Test);

  const auto open_space = build_label_space(d.split, train, test, Protocol::Open);
  const auto map_tensor = compose(vs, ns, factors, open_space, test);
  const auto seed = stage_seed(c, Stage::Evaluate);

  std::vector<ProtocolResult> results;
  for (auto p : c.protocols) {
    const auto space = build_label_space(d.split, train, test, p);
    if (space.empty()) fail(ErrorCode::EmptyLabelSpace, std::string(protocol_name(p)) + " label space is empty");
    const auto tensor = compose(vs, ns, factors, space, test);
    std::vector<std::size_t> ks;
    std::vector<std::string> notes;
    for (auto k : c.ks) {
      if (k <= tensor.space.size()) {
        ks.push_back(k);
      } else {
        notes.push_back("k=" + k_label(k) + " skipped: only " + std::to_string(tensor.space.size()) + " candidates");
      }
    }
    ProtocolResult r;
    r.report = evaluate(tensor, map_tensor, ks, c.grid);
    for (auto& n : notes) r.report.notes.push_back(std::move(n));
    if (p == Protocol::MacroOpen && scorer.variant == AffordanceVariant::GroundTruth)
      r.report.notes.push_back("ground_truth affordance under macro_open equals the open world by construction");
    if (p == Protocol::Close) r.report.notes.push_back("close world: AUC is not defined (no seen-labelled samples)");
    if (p != Protocol::Close && c.chance_trials > 0) {
      for (auto k : ks)
        r.chance_auc.push_back(chance_auc(tensor, k, c.chance_trials,
                                          Rng(seed).fork(std::string(protocol_name(p)) + "/" + k_label(k)).next_u64(),
                                          c.grid));
    }
    results.push_back(std::move(r));
  }

  std::string report = "protocol\tmetric\tk\tvalue\n";
  std::string summary;
  auto row = [&](std::string_view p, std::string_view m, const std::string& k, double v) {
    report += std::string(p) + "\t" + std::string(m) + "\t" + k + "\t" + format_double(v) + "\n";
  };
  for (const auto& r : results) {
    const auto& e = r.report;
    const auto pname = protocol_name(e.protocol);
    summary += std::string(pname) + ": " + std::to_string(e.samples) + " samples, " + std::to_string(e.candidates) +
               " candidates\n";
    for (std::size_t i = 0; i < e.ks.size(); ++i) {
      const auto k = k_label(e.ks[i]);
      if (!e.auc_top_k.empty()) {
        row(pname, "auc", k, e.auc_top_k[i]);
        std::string curve = "gamma\tseen_acc\tunseen_acc\n";
        for (const auto& pt : e.curves[i])
          curve += format_double(pt.gamma) + "\t" + format_double(pt.seen_acc) + "\t" + format_double(pt.unseen_acc) + "\n";
        write_text_file(o.out / ("curve_" + std::string(pname) + "_k" + k + ".tsv"), curve);
        summary += "  AUC@top-" + k + " = " + format_double(e.auc_top_k[i]);
        if (i < r.chance_auc.size()) summary += " (chance " + format_double(r.chance_auc[i]) + ")";
        summary += "\n";
      }
      if (i < r.chance_auc.size()) row(pname, "chance_auc", k, r.chance_auc[i]);
      row(pname, "topk", k, e.topk[i]);
      summary += "  top-" + k + " precision = " + format_double(e.topk[i]) + "\n";
    }
    row(pname, "map_all", "-", e.map_all);
    row(pname, "map_zero_shot", "-", e.map_zero_shot);
    row(pname, "samples", "-", static_cast<double>(e.samples));
    row(pname, "candidates", "-", static_cast<double>(e.candidates));
    summary += "  mAP (open candidates) all = " + format_double(e.map_all) + ", zero-shot = " + format_double(e.map_zero_shot) + "\n";
    for (const auto& n : e.notes) summary += "  note: " + n + "\n";
  }
  write_text_file(o.out / "report.tsv", report);
  write_text_file(o.out / "summary.txt", summary);
  note(o, summary);
  return results;
}

std::vector<std::string> stage_prefixes(Stage s) {
  switch (s) {
    case Stage::BuildGraph: return {"seed", "data.", "graph."};
    case Stage::TrainHeads: return {"seed", "data.", "heads."};
    case Stage::TrainGcn: return {"seed", "data.", "graph.", "heads.", "gcn.", "zero_shot.", "ses."};
    case Stage::TrainAffordance: return {"seed", "data.", "affordance."};
    case Stage::TrainMapper: return {"seed", "data.", "heads.", "mapper."};
    case Stage::Evaluate: return {""};
  }
  return {""};
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::BuildGraph: return "build-graph";
    case Stage::TrainHeads: return "train-heads";
    case Stage::TrainGcn: return "train-gcn";
    case Stage::TrainAffordance: return "train-affordance";
    case Stage::TrainMapper: return "train-mapper";
    case Stage::Evaluate: return "evaluate";
  }
  return "evaluate";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::BuildGraph,      Stage::TrainHeads,  Stage::TrainGcn,
                                         Stage::TrainAffordance, Stage::TrainMapper, Stage::Evaluate};
  return stages;
}

std::vector<fs::path> stage_outputs(Stage s, const fs::path& out) {
  switch (s) {
    case Stage::BuildGraph: return {out / kVerbGraph, out / kNounGraph};
    case Stage::TrainHeads: return {out / kHeads};
    case Stage::TrainGcn: return {out / kZeroShot, out / kBank};
    case Stage::TrainAffordance: return {out / kAffordance};
    case Stage::TrainMapper: return {out / kMapper};
    case Stage::Evaluate: return {};
  }
  return {};
}

std::uint64_t stage_fingerprint(Stage s, const ExperimentConfig& config) {
  std::string relevant(stage_name(s));
  std::istringstream in(config.canonical);
  const auto prefixes = stage_prefixes(s);
  std::string line;
  while (std::getline(in, line)) {
    const std::string key = line.substr(0, line.find(' '));
    for (const auto& p : prefixes) {
      const bool hit = p.empty() || (p.back() == '.' ? key.starts_with(p) : key == p);
      if (hit) {
        relevant += "\n" + line;
        break;
      }
    }
  }
  return fnv1a64(relevant);
}

bool run_stage(Stage s, const ExperimentConfig& config, const RunOptions& options,
               std::vector<ProtocolResult>* results) {
  const auto fp = stage_fingerprint(s, config);
  const auto outputs = stage_outputs(s, options.out);
  if (options.resume && !outputs.empty()) {
    const bool fresh = std::ranges::all_of(outputs, [&](const fs::path& p) {
      if (!fs::exists(p)) return false;
      try {
        return load_checkpoint(p).fingerprint == fp;
      } catch (const Error&) {
        return false;
      }
    });
    if (fresh) {
      note(options, std::string(stage_name(s)) + ": up to date, skipped");
      return false;
    }
  }
  try {
    fs::create_directories(options.out);
    note(options, std::string(stage_name(s)) + ": running");
    switch (s) {
      case Stage::BuildGraph: build_graph(config, options, fp); break;
      case Stage::TrainHeads: train_heads(config, options, fp); break;
      case Stage::TrainGcn: train_zero_shot(config, options, fp); break;
      case Stage::TrainAffordance: train_affordance(config, options, fp); break;
      case Stage::TrainMapper: train_visual_mapper(config, options, fp); break;
      case Stage::Evaluate: {
        auto r = evaluate_stage(config, options);
        if (results) *results = std::move(r);
        break;
      }
    }
  } catch (const Error& e) {
    fail(e.code(), std::string(stage_name(s)) + ": " + e.message());
  } catch (const fs::filesystem_error& e) {
    fail(ErrorCode::IoError, std::string(stage_name(s)) + ": " + e.what());
  }
  return true;
}

std::vector<ProtocolResult> run_all(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<ProtocolResult> results;
  for (auto s : all_stages()) run_stage(s, config, options, &results);
  return results;
}

std::vector<ReportRow> read_report(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<ReportRow> rows;
  std::getline(in, line);
  if (line != "protocol\tmetric\tk\tvalue") fail(ErrorCode::MalformedLine, path.string() + ": header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    const auto v = f.size() == 4 ? parse_double(f[3]) : std::nullopt;
    if (!v) fail(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line_no));
    rows.push_back({f[0], f[1], f[2], *v});
  }
  return rows;
}

double report_value(const std::vector<ReportRow>& rows, std::string_view protocol, std::string_view metric,
                    std::string_view k) {
  for (const auto& r : rows)
    if (r.protocol == protocol && r.metric == metric && r.k == k) return r.value;
  fail(ErrorCode::MissingSection,
       "report row " + std::string(protocol) + "/" + std::string(metric) + "/" + std::string(k));
}

}  // namespace zsca
