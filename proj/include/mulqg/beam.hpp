#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

namespace mulqg {

template <typename State>
struct Hypothesis {
  std::vector<int> tokens;  // excludes the start token; may end with EOS
  double logprob = 0.0;
  State state;

  double normalized() const {
    return tokens.empty() ? logprob : logprob / static_cast<double>(tokens.size());
  }
};

// Higher score first; equal scores fall back to the lexicographically smaller
// token sequence.
template <typename State>
bool better_by(double sa, const Hypothesis<State>& a, double sb, const Hypothesis<State>& b) {
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

struct BeamOptions {
  int beam = 10;
  int max_len = 20;
  int start_token = 2;
  int end_token = 3;
};

// step(state, previous token) -> (log-probabilities over the output space, next state).
// Hypotheses finish on EOS or when max_len tokens have been emitted; the
// survivor with the best length-normalized log-probability is returned.
template <typename State, typename StepFn>
Hypothesis<State> beam_search(const State& initial, StepFn&& step, const BeamOptions& opts) {
  using Hyp = Hypothesis<State>;
  const int beam = std::max(opts.beam, 1);
  std::vector<Hyp> live{Hyp{{}, 0.0, initial}};
  std::vector<Hyp> finished;

  for (int t = 0; t < opts.max_len && !live.empty(); ++t) {
    struct Candidate {
      std::size_t parent;
      int token;
      double logprob;
    };
    std::vector<Candidate> cands;
    std::vector<State> next_states;
    next_states.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const int prev = live[h].tokens.empty() ? opts.start_token : live[h].tokens.back();
      auto [logprobs, next] = step(live[h].state, prev);
      next_states.push_back(std::move(next));
      // Only the top `beam` extensions of one parent can survive selection.
      std::vector<int> order(logprobs.size());
      std::iota(order.begin(), order.end(), 0);
      const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam), order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<long>(keep), order.end(),
                        [&](int a, int b) {
                          if (logprobs[a] != logprobs[b]) return logprobs[a] > logprobs[b];
                          return a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        cands.push_back({h, order[k], live[h].logprob + logprobs[order[k]]});
      }
    }
    auto seq_less = [&](const Candidate& a, const Candidate& b) {
      // Compare parent prefix, then the appended token.
      const auto& pa = live[a.parent].tokens;
      const auto& pb = live[b.parent].tokens;
      if (pa != pb) return pa < pb;
      return a.token < b.token;
    };
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return seq_less(a, b);
    });
    std::vector<Hyp> next_live;
    const bool last_step = t + 1 == opts.max_len;
    for (std::size_t k = 0; k < cands.size() && static_cast<int>(k) < beam; ++k) {
      const Candidate& c = cands[k];
      Hyp h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.logprob = c.logprob;
      h.state = next_states[c.parent];
      if (c.token == opts.end_token || last_step) {
        finished.push_back(std::move(h));
      } else {
        next_live.push_back(std::move(h));
      }
    }
    live = std::move(next_live);
    if (static_cast<int>(finished.size()) >= beam) break;
  }
  for (auto& h : live) finished.push_back(std::move(h));
  return *std::min_element(finished.begin(), finished.end(), [](const Hyp& a, const Hyp& b) {
    return better_by(a.normalized(), a, b.normalized(), b);
  });
}

}  // namespace mulqg
