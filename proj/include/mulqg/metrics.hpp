#pragma once

#include "mulqg/corpus.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace mulqg {

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kRougeBeta = 1.2;

struct Metrics {
  std::array<double, 4> bleu{};       // BLEU-1..4
  std::array<double, 4> precision{};  // clipped corpus n-gram precisions, unsmoothed
  double brevity_penalty = 0.0;
  long hyp_length = 0;
  long ref_length = 0;
  double rouge_l = 0.0;
  std::size_t count = 0;
  std::string smoothing = "add-epsilon 1e-9 on zero n-gram precisions";

  nlohmann::json to_json() const;
};

// Corpus BLEU over aligned (hypothesis, reference) pairs: clipped n-gram
// counts summed over the corpus, geometric mean over orders 1..n, brevity
// penalty exp(1 - r/c) when c <= r. ROUGE-L is the mean per-pair LCS F-score.
Metrics corpus_metrics(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

// Aligns by id; any id present on one side only is an error.
Metrics evaluate(const std::map<std::string, Tokens>& predictions,
                 const std::map<std::string, Tokens>& references);

double rouge_l(const Tokens& hyp, const Tokens& ref, double beta = kRougeBeta);

}  // namespace mulqg
