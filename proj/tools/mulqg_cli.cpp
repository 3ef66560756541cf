// Command-line front end: data generation, graph export, training,
// generation, evaluation, and gradient checking.

#include "mulqg/config.hpp"
#include "mulqg/corpus.hpp"
#include "mulqg/diagnostics.hpp"
#include "mulqg/entgraph.hpp"
#include "mulqg/errors.hpp"
#include "mulqg/metrics.hpp"
#include "mulqg/model.hpp"
#include "mulqg/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
using namespace mulqg;

int fail(const std::string& kind, const std::string& message, int code = 1) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

void gen_data(std::uint64_t seed, std::size_t count, std::size_t pool, std::size_t distractors,
              const std::string& out, std::string lexicon) {
  const Dataset data = generate_synthetic(seed, count, pool, distractors);
  save_dataset_jsonl(data, out);
  if (lexicon.empty()) lexicon = out + ".lexicon";
  save_lexicon(data.lexicon, lexicon);
  std::cout << json{{"examples", data.examples.size()}, {"data", out}, {"lexicon", lexicon}}.dump() << '\n';
}

void build_graphs(const std::string& data_path, const std::string& lexicon_path, const std::string& out_path,
                  const std::string& format, const GraphOptions& opts, int max_context_len, int hops) {
  const Dataset data = load_hotpot_jsonl(data_path);
  const std::vector<Tokens> lexicon = load_lexicon(lexicon_path);
  std::ofstream out = open_out(out_path);
  std::size_t dropped_total = 0;
  std::size_t skipped = data.skipped;
  std::size_t written = 0;
  for (const auto& ex : data.examples) {
    FlatContext flat;
    try {
      flat = flatten_context(ex, static_cast<std::size_t>(max_context_len));
    } catch (const DataError&) {
      ++skipped;
      continue;
    }
    std::size_t dropped = 0;
    const EntityGraph graph = build_example_graph(ex, flat, lexicon, opts, &dropped);
    dropped_total += dropped;
    if (format == "dot") {
      out << graph_to_dot(graph, ex.id) << '\n';
    } else {
      json j = graph_to_json(graph);
      j["id"] = ex.id;
      j["bfs_mask"] = bfs_mask(graph, hops).mask;
      out << j.dump() << '\n';
    }
    ++written;
  }
  std::cout << json{{"graphs", written}, {"skipped", skipped}, {"dropped_mentions", dropped_total}}.dump()
            << '\n';
}

void run_train(const std::string& config_path) {
  const Config config = load_config(config_path);
  const TrainData data = load_train_data(config);
  TrainHooks hooks;
  hooks.on_epoch = [](const EpochRecord& r) { std::cout << r.to_json().dump() << '\n' << std::flush; };
  const TrainResult result = train(config, data, hooks);
  std::cout << json{{"steps", result.steps},
                    {"skipped", result.skipped_examples},
                    {"best_checkpoint", result.best_checkpoint},
                    {"last_checkpoint", result.last_checkpoint}}
                   .dump()
            << '\n';
}

void run_generate(const std::string& checkpoint, const std::string& data_path, int beam, int max_len,
                  const std::string& out_path) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  const Model model = load_model(ckpt);
  if (beam <= 0) beam = ckpt.config.beam;
  if (max_len <= 0) max_len = ckpt.config.max_question_len;
  const Dataset data = load_hotpot_jsonl(data_path);
  std::ofstream out = open_out(out_path);
  std::size_t skipped = data.skipped;
  std::size_t written = 0;
  for (const auto& ex : data.examples) {
    PreparedExample prepared;
    try {
      prepared = model.prepare(ex);
    } catch (const DataError&) {
      ++skipped;
      continue;
    }
    const Generation gen = model.generate(prepared, beam, max_len);
    out << json{{"id", ex.id}, {"prediction", gen.tokens}, {"logprob", gen.logprob}}.dump() << '\n';
    ++written;
  }
  std::cout << json{{"generated", written}, {"skipped", skipped}}.dump() << '\n';
}

void run_evaluate(const std::string& pred_path, const std::string& ref_path) {
  std::ifstream in(pred_path);
  if (!in) throw DataError("cannot open predictions '" + pred_path + "'");
  std::map<std::string, Tokens> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const std::string id = j.at("id").get<std::string>();
      // Token lists are canonical; plain strings are tokenized.
      const json& p = j.at("prediction");
      const Tokens tokens = p.is_string() ? tokenize(p.get<std::string>()) : p.get<Tokens>();
      if (!preds.emplace(id, tokens).second) {
        throw DataError("duplicate prediction id '" + id + "'");
      }
    } catch (const json::exception& e) {
      throw DataError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::map<std::string, Tokens> refs;
  for (const auto& ex : load_hotpot_jsonl(ref_path).examples) refs[ex.id] = ex.question;
  std::cout << evaluate(preds, refs).to_json().dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-hop question generation toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::size_t count = 0;
  std::size_t pool = 50;
  std::size_t distractors = 0;
  std::string out;
  std::string lexicon_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic bridge-question dataset");
  gen->add_option("--seed", seed, "Random seed")->required();
  gen->add_option("--count", count, "Number of examples")->required();
  gen->add_option("--out", out, "Output JSONL path")->required();
  gen->add_option("--pool", pool, "Entity pool size")->capture_default_str();
  gen->add_option("--distractors", distractors, "Unrelated paragraphs per example")->capture_default_str();
  gen->add_option("--lexicon-out", lexicon_out, "Lexicon path (default: <out>.lexicon)");

  std::string data_path;
  std::string lexicon_path;
  std::string format = "json";
  std::string edges = "both";
  int max_entities = 80;
  int max_context_len = 400;
  int hops = 2;
  bool merge = false;
  auto* graph = app.add_subcommand("build-graph", "Annotate entities and export per-example graphs");
  graph->add_option("--data", data_path, "Dataset JSONL")->required();
  graph->add_option("--lexicon", lexicon_path, "Lexicon, one surface form per line")->required();
  graph->add_option("--out", out, "Output path")->required();
  graph->add_option("--format", format, "dot or json")->check(CLI::IsMember({"dot", "json"}))->capture_default_str();
  graph->add_option("--edges", edges, "sentence, paragraph, or both")
      ->check(CLI::IsMember({"sentence", "paragraph", "both"}))
      ->capture_default_str();
  graph->add_option("--max-entities", max_entities)->check(CLI::PositiveNumber)->capture_default_str();
  graph->add_option("--max-context-len", max_context_len)->check(CLI::PositiveNumber)->capture_default_str();
  graph->add_option("--hops", hops, "BFS hop limit for the exported mask")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  graph->add_flag("--merge-same-surface", merge);

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train from a JSON config");
  train_cmd->add_option("--config", config_path, "Config JSON")->required();

  std::string checkpoint;
  int beam = 0;
  int max_len = 0;
  auto* generate = app.add_subcommand("generate", "Beam-search questions from a checkpoint");
  generate->add_option("--checkpoint", checkpoint)->required();
  generate->add_option("--data", data_path)->required();
  generate->add_option("--beam", beam, "Beam width (default: config value)");
  generate->add_option("--max-len", max_len, "Maximum question length (default: config value)");
  generate->add_option("--out", out, "Output JSONL")->required();

  std::string pred_path;
  std::string ref_path;
  auto* eval = app.add_subcommand("evaluate", "Corpus BLEU-1..4 and ROUGE-L");
  eval->add_option("--pred", pred_path, "Predictions JSONL {id, prediction}")->required();
  eval->add_option("--ref", ref_path, "Reference dataset JSONL")->required();

  std::string module = "all";
  double eps = 1e-4;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient check of the full network");
  gc->add_option("--module", module)->check(CLI::IsMember({"all", "encoder", "decoder"}))->capture_default_str();
  gc->add_option("--eps", eps)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*gen) {
      gen_data(seed, count, pool, distractors, out, lexicon_out);
    } else if (*graph) {
      GraphOptions opts;
      opts.max_entities = max_entities;
      opts.edges = parse_edge_mode(edges);
      opts.merge_same_surface = merge;
      build_graphs(data_path, lexicon_path, out, format, opts, max_context_len, hops);
    } else if (*train_cmd) {
      run_train(config_path);
    } else if (*generate) {
      run_generate(checkpoint, data_path, beam, max_len, out);
    } else if (*eval) {
      run_evaluate(pred_path, ref_path);
    } else if (*gc) {
      GradCheckSetup setup;
      setup.eps = eps;
      const ModelGradCheck r = grad_check_model(module, setup);
      std::cout << r.to_json().dump(2) << '\n';
      if (r.max_rel_error > 1e-4) return fail("grad_check", "max relative error " + std::to_string(r.max_rel_error) +
                                                                " in " + r.report.worst);
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
