#pragma once

#include <cstddef>
#include <string>

#include "tiger/diff/autodiff.hpp"
#include "tiger/diff/ops.hpp"
#include "tiger/diff/rng.hpp"

namespace tiger::diff {

/// Weight uniform in ±1/√fan_in, zero bias.
Tensor2 uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Dense affine map y = x·W + b. W is in×out, b is 1×out.
struct Linear {
  Var weight;
  Var bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
  Var operator()(Tape& tape, const Var& x) const { return affine(tape, x, weight, bias); }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Gated recurrent unit with update, reset and candidate gates. Input and
/// hidden projections each hold the three gates side by side as [r | z | n].
struct GruCell {
  Linear input;   // in  -> 3H
  Linear hidden;  // H   -> 3H

  GruCell() = default;
  GruCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return input.in_dim(); }
  std::size_t hidden_dim() const { return hidden.in_dim(); }

  /// h' = (1 - z) ⊙ n + z ⊙ h, batched over rows.
  Var operator()(Tape& tape, const Var& x, const Var& h) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

inline constexpr std::size_t kDefaultGruHidden = 64;

}  // namespace tiger::diff
