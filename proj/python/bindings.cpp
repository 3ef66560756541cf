#include "mulqg/config.hpp"
#include "mulqg/corpus.hpp"
#include "mulqg/decoder.hpp"
#include "mulqg/diagnostics.hpp"
#include "mulqg/entgraph.hpp"
#include "mulqg/errors.hpp"
#include "mulqg/metrics.hpp"
#include "mulqg/model.hpp"
#include "mulqg/trainer.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

namespace py = pybind11;
using namespace mulqg;
using nlohmann::json;

namespace {

// Structured results cross the boundary as JSON text; the Python package decodes them.
std::string generate_data(std::uint64_t seed, std::size_t count, std::size_t pool, std::size_t distractors,
                          const std::string& out, std::string lexicon) {
  const Dataset data = generate_synthetic(seed, count, pool, distractors);
  save_dataset_jsonl(data, out);
  if (lexicon.empty()) lexicon = out + ".lexicon";
  save_lexicon(data.lexicon, lexicon);
  return json{{"examples", data.examples.size()}, {"data", out}, {"lexicon", lexicon}}.dump();
}

std::string normalize_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config_to_json(config_from_json(j)).dump();
}

std::string train_from_config(const std::string& config_path) {
  const Config config = load_config(config_path);
  const TrainResult result = train(config, load_train_data(config));
  json log = json::array();
  for (const auto& r : result.log) log.push_back(r.to_json());
  return json{{"steps", result.steps},
              {"skipped", result.skipped_examples},
              {"best_checkpoint", result.best_checkpoint},
              {"last_checkpoint", result.last_checkpoint},
              {"log", log}}
      .dump();
}

std::string generate_questions(const std::string& checkpoint, const std::string& data_path, int beam,
                               int max_len) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  const Model model = load_model(ckpt);
  if (beam <= 0) beam = ckpt.config.beam;
  if (max_len <= 0) max_len = ckpt.config.max_question_len;
  json out = json::array();
  for (const auto& ex : load_hotpot_jsonl(data_path).examples) {
    const Generation gen = model.generate(model.prepare(ex), beam, max_len);
    out.push_back({{"id", ex.id}, {"prediction", gen.tokens}, {"logprob", gen.logprob}});
  }
  return out.dump();
}

std::vector<double> reachability(const std::vector<std::vector<bool>>& adj, const std::vector<int>& roots,
                                 int hops) {
  EntityGraph g;
  g.g = static_cast<int>(adj.size());
  for (const auto& row : adj) {
    if (row.size() != adj.size()) throw DimensionError("bfs_mask: adjacency must be square");
  }
  g.adj = adj;
  for (int r : roots) {
    if (r < 0 || r >= g.g) throw ContractError("bfs_mask: root out of range");
    g.answer_entities.insert(r);
  }
  return bfs_mask(g, hops).mask;
}

}  // namespace

PYBIND11_MODULE(_mulqg, m) {
  m.doc() = "Native core of the mulqg question generator";

  // Translators run newest first, so subclasses are registered after the base.
  const auto& base = py::register_exception<Error>(m, "MulqgError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("corpus_metrics",
        [](const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
          return corpus_metrics(hyps, refs).to_json().dump();
        },
        py::arg("hypotheses"), py::arg("references"));
  m.def("maxout_copy_scores", &maxout_copy_scores, py::arg("raw_scores"), py::arg("position_ids"));
  m.def("bfs_mask", &reachability, py::arg("adjacency"), py::arg("roots"), py::arg("hops"));
  m.def("generate_data", &generate_data, py::arg("seed"), py::arg("count"), py::arg("pool") = 50,
        py::arg("distractors") = 0, py::arg("out"), py::arg("lexicon") = "");
  m.def("normalize_config", &normalize_config, py::arg("text"));
  m.def("train", &train_from_config, py::arg("config_path"), py::call_guard<py::gil_scoped_release>());
  m.def("generate", &generate_questions, py::arg("checkpoint"), py::arg("data"), py::arg("beam") = 0,
        py::arg("max_len") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("grad_check",
        [](const std::string& module) { return grad_check_model(module).to_json().dump(); },
        py::arg("module") = "all", py::call_guard<py::gil_scoped_release>());
}
