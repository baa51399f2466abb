#include "tiger/diff/nn.hpp"

#include <cmath>

#include <fmt/format.h>

namespace tiger::diff {

Tensor2 uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor2 w(fan_in, fan_out);
  for (double& v : w.flat()) v = rng.uniform(-bound, bound);
  return w;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(Var::parameter(uniform_init(in, out, rng))), bias(Var::parameter(Tensor2(1, out))) {}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

GruCell::GruCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : input(input_dim, 3 * hidden_dim, rng), hidden(hidden_dim, 3 * hidden_dim, rng) {}

Var GruCell::operator()(Tape& tape, const Var& x, const Var& h) const {
  const std::size_t H = hidden_dim();
  if (x.cols() != input_dim() || h.cols() != H || x.rows() != h.rows()) {
    throw DimensionError(fmt::format("gru_cell: input {} / hidden {} do not match cell ({} -> {})",
                                     x.value().shape_string(), h.value().shape_string(),
                                     input_dim(), H));
  }
  const Var gx = input(tape, x);
  const Var gh = hidden(tape, h);
  const Var r = sigmoid(tape, add(tape, slice_cols(tape, gx, 0, H), slice_cols(tape, gh, 0, H)));
  const Var z = sigmoid(tape, add(tape, slice_cols(tape, gx, H, 2 * H), slice_cols(tape, gh, H, 2 * H)));
  const Var n = tanh(tape, add(tape, slice_cols(tape, gx, 2 * H, 3 * H),
                               mul(tape, r, slice_cols(tape, gh, 2 * H, 3 * H))));
  // (1 - z) ⊙ n + z ⊙ h  ==  n + z ⊙ (h - n)
  return add(tape, n, mul(tape, z, sub(tape, h, n)));
}

void GruCell::collect(ParamList& out, const std::string& prefix) const {
  input.collect(out, prefix + ".input");
  hidden.collect(out, prefix + ".hidden");
}

}  // namespace tiger::diff
