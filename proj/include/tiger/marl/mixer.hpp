#pragma once

#include <cstddef>
#include <string>
#include <span>
#include <string_view>

#include "tiger/diff/autodiff.hpp"
#include "tiger/diff/nn.hpp"
#include "tiger/diff/rng.hpp"

namespace tiger::marl {

using diff::Tape;
using diff::Tensor2;
using diff::Var;

enum class Algorithm { vdn, qmix, tiger_mix };

std::string_view algorithm_name(Algorithm a);
/// Accepts "vdn", "qmix", "tiger-mix"; throws ConfigError otherwise.
Algorithm parse_algorithm(std::string_view name);

struct MixerDims {
  std::size_t hyper_hidden = 32;
  std::size_t embed = 32;
  friend bool operator==(const MixerDims&, const MixerDims&) = default;
};

/// Monotonic two-layer mixing whose weights come from hypernetworks over the
/// conditioning vector. Weights pass through |·| before use.
struct Mixer {
  diff::Linear hyper_w1_hidden, hyper_w1_out;  // cond -> hidden -> N·E
  diff::Linear hyper_b1;                       // cond -> E
  diff::Linear hyper_w2_hidden, hyper_w2_out;  // cond -> hidden -> E
  diff::Linear value_hidden, value_out;        // cond -> E -> 1
  std::size_t n_agents = 0;

  Mixer() = default;
  Mixer(std::size_t n_agents, std::size_t cond_dim, Rng& rng, const MixerDims& dims = {});

  std::size_t cond_dim() const { return hyper_b1.in_dim(); }
  std::size_t embed_dim() const { return hyper_b1.out_dim(); }

  /// `q` is B×N chosen utilities, `cond` B×cond_dim. Returns B×1.
  Var operator()(Tape& tape, const Var& q, const Var& cond) const;
  void collect(diff::ParamList& out, const std::string& prefix) const;
};

/// Σ_i Q_i per row. B×N -> B×1.
Var vdn_mix(Tape& tape, const Var& q);
double vdn_mix(std::span<const double> q);

Var qmix_mix(Tape& tape, const Mixer& mixer, const Var& q, const Var& state);

/// Mixer conditioned on s ∥ [h_1 … h_N]. `embeddings` stacks N rows per batch
/// element ((B·N)×E).
Var tiger_mix(Tape& tape, const Mixer& mixer, const Var& q, const Var& state, const Var& embeddings);

}  // namespace tiger::marl
