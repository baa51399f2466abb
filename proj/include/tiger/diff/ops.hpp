#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tiger/diff/autodiff.hpp"

namespace tiger::diff {

inline constexpr double kLeakySlope = 0.2;

// Plain-value helpers.
std::vector<double> softmax(std::span<const double> logits);
double leaky_relu(double x, double slope = kLeakySlope) noexcept;
std::vector<double> leaky_relu(std::span<const double> x, double slope = kLeakySlope);

// Differentiable ops. Every op records a backward closure on the tape only
// when at least one operand requires a gradient.
Var matmul(Tape& tape, const Var& a, const Var& b);
/// x·W + b with b a 1×cols row broadcast over the batch.
Var affine(Tape& tape, const Var& x, const Var& weight, const Var& bias);
Var add(Tape& tape, const Var& a, const Var& b);
Var sub(Tape& tape, const Var& a, const Var& b);
Var mul(Tape& tape, const Var& a, const Var& b);
Var add_row(Tape& tape, const Var& a, const Var& row);
/// Multiplies row r of `a` by scale(r, 0); `scale` is rows×1.
Var scale_rows(Tape& tape, const Var& a, const Var& scale);
Var scale(Tape& tape, const Var& a, double s);
Var add_scalar(Tape& tape, const Var& a, double s);

Var sigmoid(Tape& tape, const Var& a);
Var tanh(Tape& tape, const Var& a);
Var relu(Tape& tape, const Var& a);
Var leaky_relu(Tape& tape, const Var& a, double slope = kLeakySlope);
Var elu(Tape& tape, const Var& a);
Var abs(Tape& tape, const Var& a);
Var cos(Tape& tape, const Var& a);
/// Row-wise softmax with max subtraction.
Var softmax_rows(Tape& tape, const Var& a);

Var concat_cols(Tape& tape, std::span<const Var> parts);
Var concat_rows(Tape& tape, std::span<const Var> parts);
Var slice_cols(Tape& tape, const Var& a, std::size_t begin, std::size_t end);
Var gather_rows(Tape& tape, const Var& a, std::span<const std::size_t> rows);
/// out(r, 0) = a(r, cols[r]).
Var pick_cols(Tape& tape, const Var& a, std::span<const std::size_t> cols);
Var reshape(Tape& tape, const Var& a, std::size_t rows, std::size_t cols);

Var sum(Tape& tape, const Var& a);
/// rows×1 vector of per-row sums.
Var sum_cols(Tape& tape, const Var& a);

/// Per-row vector-matrix product: q is B×n, w is B×(n·m) holding one
/// row-major n×m matrix per row; out(b, :) = q(b, :) · W_b.
Var batched_vecmat(Tape& tape, const Var& q, const Var& w, std::size_t m);

/// Copy of the value with no gradient connection.
Var detach(const Var& a);

}  // namespace tiger::diff
