#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zsca/config.hpp"
#include "zsca/error.hpp"
#include "zsca/eval.hpp"
#include "zsca/pipeline.hpp"
#include "zsca/split.hpp"
#include "zsca/synth.hpp"

namespace py = pybind11;
using namespace zsca;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a, const char* what) {
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be 2-D");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<Composition> to_pairs(const std::vector<std::pair<std::size_t, std::size_t>>& in) {
  std::vector<Composition> out;
  out.reserve(in.size());
  for (auto [v, n] : in) out.push_back({v, n});
  return out;
}

Config make_config(const std::optional<fs::path>& path, const std::map<std::string, std::string>& overrides) {
  Config cfg = path ? Config::load(*path) : Config();
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

Stage parse_stage(const std::string& name) {
  for (auto s : all_stages())
    if (stage_name(s) == name) return s;
  fail(ErrorCode::InvalidConfigValue, "unknown stage '" + name + "'");
}

py::list rows_to_list(const std::vector<ReportRow>& rows) {
  py::list out;
  for (const auto& r : rows) out.append(py::make_tuple(r.protocol, r.metric, r.k, r.value));
  return out;
}

py::dict report_to_dict(const EvalReport& r) {
  py::dict d;
  d["protocol"] = std::string(protocol_name(r.protocol));
  d["ks"] = r.ks;
  d["auc"] = r.auc_top_k;
  d["topk"] = r.topk;
  d["map_all"] = r.map_all;
  d["map_zero_shot"] = r.map_zero_shot;
  d["samples"] = r.samples;
  d["candidates"] = r.candidates;
  d["notes"] = r.notes;
  py::list curves;
  for (const auto& c : r.curves) {
    py::list pts;
    for (const auto& p : c) pts.append(py::make_tuple(p.gamma, p.seen_acc, p.unseen_acc));
    curves.append(pts);
  }
  d["curves"] = curves;
  return d;
}

AffordanceFactors make_factors(const std::string& kind, const std::optional<Array>& values) {
  if (kind == "none") return AffordanceFactors::none();
  if (!values) throw py::value_error("affordance kind '" + kind + "' needs values");
  Matrix m = to_matrix(*values, "affordance");
  if (kind == "per_sample") return AffordanceFactors::per_sample(std::move(m));
  if (kind == "per_pair") return AffordanceFactors::per_pair(std::move(m));
  if (kind == "indicator") return AffordanceFactors::indicator(std::move(m));
  throw py::value_error("affordance kind must be none, per_sample, per_pair or indicator");
}

}  // namespace

PYBIND11_MODULE(_zsca, m) {
  m.doc() = "Zero-shot compositional action recognition core";

  static py::exception<Error> error(m, "ZscaError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyObject* type = error.ptr();
      py::object instance = py::reinterpret_borrow<py::object>(type)(e.what());
      instance.attr("code") = std::string(error_name(e.code()));
      const char* cat = "data";
      switch (error_category(e.code())) {
        case ErrorCategory::Config: cat = "config"; break;
        case ErrorCategory::Data: cat = "data"; break;
        case ErrorCategory::Numeric: cat = "numeric"; break;
      }
      instance.attr("category") = cat;
      PyErr_SetObject(type, instance.ptr());
    }
  });

  m.def("config_help", &config_help);
  m.def(
      "canonical_config",
      [](std::optional<fs::path> path, std::map<std::string, std::string> overrides) {
        return make_config(path, overrides).canonical();
      },
      py::arg("path") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
      "Fully resolved `key = value` text for a config file plus overrides.");

  m.def(
      "make_synth",
      [](const fs::path& out, std::uint64_t seed, std::map<std::string, std::string> overrides) {
        Config cfg;
        cfg.set("seed", std::to_string(seed));
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        py::gil_scoped_release release;
        return make_synth(synth_spec(cfg), out);
      },
      py::arg("out"), py::arg("seed") = 0, py::arg("overrides") = std::map<std::string, std::string>{},
      "Write a planted synthetic benchmark; returns the path of its config file.");

  m.def(
      "make_split",
      [](FrequencyTable verbs, FrequencyTable nouns, std::set<std::string> protected_verbs,
         std::set<std::string> protected_nouns, double unseen_fraction, std::size_t min_count) {
        const auto s = make_split(SplitSpec{std::move(verbs), std::move(nouns), std::move(protected_verbs),
                                            std::move(protected_nouns), unseen_fraction, min_count});
        py::dict d;
        d["verbs_seen"] = s.verbs_seen;
        d["verbs_unseen"] = s.verbs_unseen;
        d["nouns_seen"] = s.nouns_seen;
        d["nouns_unseen"] = s.nouns_unseen;
        return d;
      },
      py::arg("verb_counts"), py::arg("noun_counts"), py::arg("protected_verbs") = std::set<std::string>{},
      py::arg("protected_nouns") = std::set<std::string>{}, py::arg("unseen_fraction") = 0.2,
      py::arg("min_count") = 10);

  m.def(
      "run_all",
      [](std::optional<fs::path> config, const fs::path& out, std::map<std::string, std::string> overrides,
         bool resume) {
        const auto exp = experiment_config(make_config(config, overrides));
        {
          py::gil_scoped_release release;
          run_all(exp, RunOptions{out, resume, nullptr});
        }
        return rows_to_list(read_report(out / "report.tsv"));
      },
      py::arg("config") = py::none(), py::arg("out") = fs::path("."),
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("resume") = false,
      "Run every stage; returns report rows as (protocol, metric, k, value).");

  m.def(
      "run_stage",
      [](const std::string& stage, std::optional<fs::path> config, const fs::path& out,
         std::map<std::string, std::string> overrides, bool resume) {
        const auto exp = experiment_config(make_config(config, overrides));
        py::gil_scoped_release release;
        return run_stage(parse_stage(stage), exp, RunOptions{out, resume, nullptr});
      },
      py::arg("stage"), py::arg("config") = py::none(), py::arg("out") = fs::path("."),
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("resume") = false,
      "Run one stage by CLI name; returns False when skipped on resume.");

  m.def("stage_names", [] {
    std::vector<std::string> out;
    for (auto s : all_stages()) out.emplace_back(stage_name(s));
    return out;
  });

  m.def("read_report", [](const fs::path& p) { return rows_to_list(read_report(p)); });

  m.def(
      "evaluate_scores",
      [](const Array& verb_scores, const Array& noun_scores, std::vector<bool> verb_seen, std::vector<bool> noun_seen,
         const std::vector<std::pair<std::size_t, std::size_t>>& train,
         const std::vector<std::pair<std::size_t, std::size_t>>& test, const std::string& protocol,
         std::vector<std::size_t> ks, const std::string& affordance, std::optional<Array> affordance_values,
         std::size_t grid) {
        const auto train_pairs = to_pairs(train), test_pairs = to_pairs(test);
        const auto p = parse_protocol(protocol);
        const auto space = build_label_space(verb_seen, noun_seen, train_pairs, test_pairs, p);
        const auto factors = make_factors(affordance, affordance_values);
        const auto tensor = compose(to_matrix(verb_scores, "verb_scores"), to_matrix(noun_scores, "noun_scores"),
                                    factors, space, test_pairs);
        // mAP always over the open space
        const auto map_space = build_label_space(verb_seen, noun_seen, train_pairs, test_pairs, Protocol::Open);
        const auto map_tensor = compose(to_matrix(verb_scores, "verb_scores"),
                                        to_matrix(noun_scores, "noun_scores"), factors, map_space, test_pairs);
        auto d = report_to_dict(evaluate(tensor, map_tensor, ks, grid));
        d["scores"] = to_array(tensor.scores);
        py::list cands;
        for (const auto& c : tensor.space.candidates) cands.append(py::make_tuple(c.verb, c.noun));
        d["candidate_pairs"] = cands;
        return d;
      },
      py::arg("verb_scores"), py::arg("noun_scores"), py::arg("verb_seen"), py::arg("noun_seen"), py::arg("train"),
      py::arg("test"), py::arg("protocol") = "macro_open", py::arg("ks") = std::vector<std::size_t>{1, 2, 3},
      py::arg("affordance") = "none", py::arg("affordance_values") = py::none(), py::arg("grid") = 201,
      "Compose verb and noun scores over a protocol's label space and compute AUC, top-k and mAP.");

  m.def("trapezoid_auc", [](const std::vector<std::pair<double, double>>& seen_unseen) {
    std::vector<CurvePoint> pts;
    for (auto [s, u] : seen_unseen) pts.push_back({0.0, s, u});
    return trapezoid_auc(std::move(pts));
  });
}
