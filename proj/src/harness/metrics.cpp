#include "mulqg/metrics.hpp"

#include "mulqg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mulqg {

nlohmann::json Metrics::to_json() const {
  return {{"bleu1", bleu[0]},
          {"bleu2", bleu[1]},
          {"bleu3", bleu[2]},
          {"bleu4", bleu[3]},
          {"rouge_l", rouge_l},
          {"precisions", precision},
          {"brevity_penalty", brevity_penalty},
          {"hyp_length", hyp_length},
          {"ref_length", ref_length},
          {"count", count},
          {"smoothing", smoothing}};
}

namespace {

std::map<Tokens, long> ngrams(const Tokens& t, std::size_t n) {
  std::map<Tokens, long> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const Tokens& hyp, const Tokens& ref, double beta) {
  if (hyp.empty() || ref.empty()) return hyp.empty() && ref.empty() ? 1.0 : 0.0;
  const double lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

Metrics corpus_metrics(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  if (hyps.size() != refs.size()) throw DataError("corpus_metrics: hypothesis/reference count mismatch");
  Metrics m;
  m.count = hyps.size();
  std::array<long, 4> matched{};
  std::array<long, 4> total{};
  std::vector<double> rouge;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    m.hyp_length += static_cast<long>(hyps[k].size());
    m.ref_length += static_cast<long>(refs[k].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = ngrams(hyps[k], n);
      const auto r = ngrams(refs[k], n);
      for (const auto& [gram, cnt] : h) {
        const auto it = r.find(gram);
        matched[n - 1] += std::min(cnt, it == r.end() ? 0L : it->second);
        total[n - 1] += cnt;
      }
    }
    rouge.push_back(rouge_l(hyps[k], refs[k]));
  }
  // Sorted summation keeps the mean independent of example order.
  std::sort(rouge.begin(), rouge.end());
  double rouge_sum = 0.0;
  for (double v : rouge) rouge_sum += v;
  m.rouge_l = hyps.empty() ? 0.0 : rouge_sum / static_cast<double>(hyps.size());
  const double c = static_cast<double>(m.hyp_length);
  const double r = static_cast<double>(m.ref_length);
  m.brevity_penalty = c == 0.0 ? 0.0 : (c <= r ? std::exp(1.0 - r / c) : 1.0);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    m.precision[n] = total[n] == 0 ? 0.0 : static_cast<double>(matched[n]) / static_cast<double>(total[n]);
    const double p = m.precision[n] > 0.0 ? m.precision[n] : kBleuEpsilon;
    log_sum += std::log(p);
    m.bleu[n] = m.brevity_penalty * std::exp(log_sum / static_cast<double>(n + 1));
  }
  return m;
}

Metrics evaluate(const std::map<std::string, Tokens>& predictions,
                 const std::map<std::string, Tokens>& references) {
  std::vector<Tokens> hyps;
  std::vector<Tokens> refs;
  for (const auto& [id, pred] : predictions) {
    const auto it = references.find(id);
    if (it == references.end()) throw DataError("evaluate: prediction id '" + id + "' has no reference");
    hyps.push_back(pred);
    refs.push_back(it->second);
  }
  for (const auto& [id, _] : references) {
    if (!predictions.count(id)) throw DataError("evaluate: reference id '" + id + "' has no prediction");
  }
  return corpus_metrics(hyps, refs);
}

}  // namespace mulqg
