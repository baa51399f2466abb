#include "tiger/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>
#include <fmt/format.h>

namespace tiger::diff {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

MapC view(const Tensor2& t) { return MapC(t.flat().data(), t.rows(), t.cols()); }
Map view(Tensor2& t) { return Map(t.flat().data(), t.rows(), t.cols()); }

using NodePtr = std::shared_ptr<Node>;

/// Wraps an output value; the result needs a gradient iff any input does.
Var result(Tensor2 value, std::initializer_list<const Var*> inputs) {
  bool needs = false;
  for (const Var* v : inputs) needs = needs || v->requires_grad();
  return Var(std::move(value), needs);
}

bool live(const NodePtr& out) { return !out->grad.empty(); }

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", op,
                                     a.value().shape_string(), b.value().shape_string()));
  }
}

template <class Fwd, class Deriv>
Var unary(Tape& tape, const Var& a, Fwd fwd, Deriv deriv) {
  Tensor2 out(a.rows(), a.cols());
  const auto in = a.value().flat();
  auto o = out.flat();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = fwd(in[i]);
  Var r = result(std::move(out), {&a});
  if (r.requires_grad()) {
    tape.record([an = a.node(), on = r.node(), deriv] {
      if (!live(on) || !an->requires_grad) return;
      auto& g = an->grad_buffer();
      const auto x = an->value.flat();
      const auto y = on->value.flat();
      const auto go = on->grad.flat();
      for (std::size_t i = 0; i < x.size(); ++i) g[i] += go[i] * deriv(x[i], y[i]);
    });
  }
  return r;
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax of an empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double leaky_relu(double x, double slope) noexcept { return x >= 0.0 ? x : slope * x; }

std::vector<double> leaky_relu(std::span<const double> x, double slope) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [slope](double v) { return leaky_relu(v, slope); });
  return out;
}

Var matmul(Tape& tape, const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError(fmt::format("matmul: {} cannot multiply {}", a.value().shape_string(),
                                     b.value().shape_string()));
  }
  Tensor2 out(a.rows(), b.cols());
  view(out).noalias() = view(a.value()) * view(b.value());
  Var r = result(std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = r.node()] {
      if (!live(on)) return;
      if (an->requires_grad) view(an->grad_buffer()).noalias() += view(on->grad) * view(bn->value).transpose();
      if (bn->requires_grad) view(bn->grad_buffer()).noalias() += view(an->value).transpose() * view(on->grad);
    });
  }
  return r;
}

Var affine(Tape& tape, const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw DimensionError(fmt::format("linear: input {} incompatible with weight {} / bias {}",
                                     x.value().shape_string(), weight.value().shape_string(),
                                     bias.value().shape_string()));
  }
  Tensor2 out(x.rows(), weight.cols());
  auto o = view(out);
  o.noalias() = view(x.value()) * view(weight.value());
  o.rowwise() += view(bias.value()).row(0);
  Var r = result(std::move(out), {&x, &weight, &bias});
  if (r.requires_grad()) {
    tape.record([xn = x.node(), wn = weight.node(), bn = bias.node(), on = r.node()] {
      if (!live(on)) return;
      const auto go = view(on->grad);
      if (xn->requires_grad) view(xn->grad_buffer()).noalias() += go * view(wn->value).transpose();
      if (wn->requires_grad) view(wn->grad_buffer()).noalias() += view(xn->value).transpose() * go;
      if (bn->requires_grad) view(bn->grad_buffer()).row(0) += go.colwise().sum();
    });
  }
  return r;
}

Var add(Tape& tape, const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor2 out(a.rows(), a.cols());
  view(out) = view(a.value()) + view(b.value());
  Var r = result(std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = r.node()] {
      if (!live(on)) return;
      if (an->requires_grad) view(an->grad_buffer()) += view(on->grad);
      if (bn->requires_grad) view(bn->grad_buffer()) += view(on->grad);
    });
  }
  return r;
}

Var sub(Tape& tape, const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor2 out(a.rows(), a.cols());
  view(out) = view(a.value()) - view(b.value());
  Var r = result(std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = r.node()] {
      if (!live(on)) return;
      if (an->requires_grad) view(an->grad_buffer()) += view(on->grad);
      if (bn->requires_grad) view(bn->grad_buffer()) -= view(on->grad);
    });
  }
  return r;
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor2 out(a.rows(), a.cols());
  view(out) = view(a.value()).cwiseProduct(view(b.value()));
  Var r = result(std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = r.node()] {
      if (!live(on)) return;
      if (an->requires_grad) view(an->grad_buffer()) += view(on->grad).cwiseProduct(view(bn->value));
      if (bn->requires_grad) view(bn->grad_buffer()) += view(on->grad).cwiseProduct(view(an->value));
    });
  }
  return r;
}

Var add_row(Tape& tape, const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError(fmt::format("add_row: row {} does not broadcast over {}",
                                     row.value().shape_string(), a.value().shape_string()));
  }
  Tensor2 out = a.value();
  view(out).rowwise() += view(row.value()).row(0);
  Var r = result(std::move(out), {&a, &row});
  if (r.requires_grad()) {
    tape.record([an = a.node(), rn = row.node(), on = r.node()] {
      if (!live(on)) return;
      if (an->requires_grad) view(an->grad_buffer()) += view(on->grad);
      if (rn->requires_grad) view(rn->grad_buffer()).row(0) += view(on->grad).colwise().sum();
    });
  }
  return r;
}

Var scale_rows(Tape& tape, const Var& a, const Var& scale) {
  if (scale.cols() != 1 || scale.rows() != a.rows()) {
    throw DimensionError(fmt::format("scale_rows: scale {} does not match {}",
                                     scale.value().shape_string(), a.value().shape_string()));
  }
  Tensor2 out(a.rows(), a.cols());
  view(out) = view(scale.value()).col(0).asDiagonal() * view(a.value());
  Var r = result(std::move(out), {&a, &scale});
  if (r.requires_grad()) {
    tape.record([an = a.node(), sn = scale.node(), on = r.node()] {
      if (!live(on)) return;
      const auto go = view(on->grad);
      if (an->requires_grad) view(an->grad_buffer()) += view(sn->value).col(0).asDiagonal() * go;
      if (sn->requires_grad) {
        view(sn->grad_buffer()).col(0) += go.cwiseProduct(view(an->value)).rowwise().sum();
      }
    });
  }
  return r;
}

Var scale(Tape& tape, const Var& a, double s) {
  return unary(tape, a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Tape& tape, const Var& a, double s) {
  return unary(tape, a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var sigmoid(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Tape& tape, const Var& a, double slope) {
  return unary(
      tape, a, [slope](double x) { return leaky_relu(x, slope); },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Var elu(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var abs(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var cos(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var softmax_rows(Tape& tape, const Var& a) {
  if (a.cols() == 0) throw DomainError("softmax of an empty vector");
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto s = softmax(a.value().row_span(r));
    std::copy(s.begin(), s.end(), out.row_span(r).begin());
  }
  Var res = result(std::move(out), {&a});
  if (res.requires_grad()) {
    tape.record([an = a.node(), on = res.node()] {
      if (!live(on) || !an->requires_grad) return;
      auto& g = an->grad_buffer();
      for (std::size_t r = 0; r < on->value.rows(); ++r) {
        const auto y = on->value.row_span(r);
        const auto go = on->grad.row_span(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < y.size(); ++c) dot += y[c] * go[c];
        auto gr = g.row_span(r);
        for (std::size_t c = 0; c < y.size(); ++c) gr[c] += y[c] * (go[c] - dot);
      }
    });
  }
  return res;
}

Var concat_cols(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError(fmt::format("concat_cols: {} vs {}", parts.front().value().shape_string(),
                                       p.value().shape_string()));
    }
    cols += p.cols();
    needs = needs || p.requires_grad();
  }
  Tensor2 out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    view(out).middleCols(offset, p.cols()) = view(p.value());
    offset += p.cols();
  }
  Var r(std::move(out), needs);
  if (needs) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    tape.record([nodes = std::move(nodes), on = r.node()] {
      if (!live(on)) return;
      std::size_t off = 0;
      for (const auto& n : nodes) {
        if (n->requires_grad) view(n->grad_buffer()) += view(on->grad).middleCols(off, n->value.cols());
        off += n->value.cols();
      }
    });
  }
  return r;
}

Var concat_rows(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError(fmt::format("concat_rows: {} vs {}", parts.front().value().shape_string(),
                                       p.value().shape_string()));
    }
    rows += p.rows();
    needs = needs || p.requires_grad();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.value().flat().begin(), p.value().flat().end());
  Var r(Tensor2(rows, cols, std::move(data)), needs);
  if (needs) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    tape.record([nodes = std::move(nodes), on = r.node()] {
      if (!live(on)) return;
      std::size_t off = 0;
      for (const auto& n : nodes) {
        if (n->requires_grad) view(n->grad_buffer()) += view(on->grad).middleRows(off, n->value.rows());
        off += n->value.rows();
      }
    });
  }
  return r;
}

Var slice_cols(Tape& tape, const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw DimensionError(fmt::format("slice_cols: [{}, {}) out of range for {}", begin, end,
                                     a.value().shape_string()));
  }
  Tensor2 out(a.rows(), end - begin);
  view(out) = view(a.value()).middleCols(begin, end - begin);
  Var r = result(std::move(out), {&a});
  if (r.requires_grad()) {
    tape.record([an = a.node(), on = r.node(), begin] {
      if (!live(on) || !an->requires_grad) return;
      view(an->grad_buffer()).middleCols(begin, on->value.cols()) += view(on->grad);
    });
  }
  return r;
}

Var gather_rows(Tape& tape, const Var& a, std::span<const std::size_t> rows) {
  Tensor2 out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw DimensionError(fmt::format("gather_rows: row {} out of range for {}", rows[i],
                                       a.value().shape_string()));
    }
    auto src = a.value().row_span(rows[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  Var r = result(std::move(out), {&a});
  if (r.requires_grad()) {
    tape.record([an = a.node(), on = r.node(), idx = std::vector<std::size_t>(rows.begin(), rows.end())] {
      if (!live(on) || !an->requires_grad) return;
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        auto dst = g.row_span(idx[i]);
        auto src = on->grad.row_span(i);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    });
  }
  return r;
}

Var pick_cols(Tape& tape, const Var& a, std::span<const std::size_t> cols) {
  if (cols.size() != a.rows()) {
    throw DimensionError(fmt::format("pick_cols: {} indices for {}", cols.size(),
                                     a.value().shape_string()));
  }
  Tensor2 out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (cols[r] >= a.cols()) {
      throw DimensionError(fmt::format("pick_cols: column {} out of range for {}", cols[r],
                                       a.value().shape_string()));
    }
    out(r, 0) = a.value()(r, cols[r]);
  }
  Var res = result(std::move(out), {&a});
  if (res.requires_grad()) {
    tape.record([an = a.node(), on = res.node(), idx = std::vector<std::size_t>(cols.begin(), cols.end())] {
      if (!live(on) || !an->requires_grad) return;
      auto& g = an->grad_buffer();
      for (std::size_t r = 0; r < idx.size(); ++r) g(r, idx[r]) += on->grad(r, 0);
    });
  }
  return res;
}

Var reshape(Tape& tape, const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError(fmt::format("reshape: {} cannot become {}", a.value().shape_string(),
                                     shape_string(rows, cols)));
  }
  std::vector<double> data(a.value().flat().begin(), a.value().flat().end());
  Var r = result(Tensor2(rows, cols, std::move(data)), {&a});
  if (r.requires_grad()) {
    tape.record([an = a.node(), on = r.node()] {
      if (!live(on) || !an->requires_grad) return;
      auto g = an->grad_buffer().flat();
      auto go = on->grad.flat();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    });
  }
  return r;
}

Var sum(Tape& tape, const Var& a) {
  const auto f = a.value().flat();
  Var r = result(Tensor2(1, 1, std::accumulate(f.begin(), f.end(), 0.0)), {&a});
  if (r.requires_grad()) {
    tape.record([an = a.node(), on = r.node()] {
      if (!live(on) || !an->requires_grad) return;
      const double go = on->grad[0];
      for (double& g : an->grad_buffer().flat()) g += go;
    });
  }
  return r;
}

Var sum_cols(Tape& tape, const Var& a) {
  Tensor2 out(a.rows(), 1);
  view(out).col(0) = view(a.value()).rowwise().sum();
  Var r = result(std::move(out), {&a});
  if (r.requires_grad()) {
    tape.record([an = a.node(), on = r.node()] {
      if (!live(on) || !an->requires_grad) return;
      view(an->grad_buffer()).colwise() += view(on->grad).col(0);
    });
  }
  return r;
}

Var batched_vecmat(Tape& tape, const Var& q, const Var& w, std::size_t m) {
  const std::size_t n = q.cols();
  if (w.rows() != q.rows() || w.cols() != n * m) {
    throw DimensionError(fmt::format("batched_vecmat: {} against {} with m={}",
                                     q.value().shape_string(), w.value().shape_string(), m));
  }
  Tensor2 out(q.rows(), m);
  for (std::size_t b = 0; b < q.rows(); ++b) {
    const MapC wb(w.value().row_span(b).data(), n, m);
    const MapC qb(q.value().row_span(b).data(), 1, n);
    Map(out.row_span(b).data(), 1, m).noalias() = qb * wb;
  }
  Var r = result(std::move(out), {&q, &w});
  if (r.requires_grad()) {
    tape.record([qn = q.node(), wn = w.node(), on = r.node(), n, m] {
      if (!live(on)) return;
      for (std::size_t b = 0; b < on->value.rows(); ++b) {
        const MapC go(on->grad.row_span(b).data(), 1, m);
        if (qn->requires_grad) {
          const MapC wb(wn->value.row_span(b).data(), n, m);
          Map(qn->grad_buffer().row_span(b).data(), 1, n).noalias() += go * wb.transpose();
        }
        if (wn->requires_grad) {
          const MapC qb(qn->value.row_span(b).data(), 1, n);
          Map(wn->grad_buffer().row_span(b).data(), n, m).noalias() += qb.transpose() * go;
        }
      }
    });
  }
  return r;
}

Var detach(const Var& a) { return Var::constant(a.value()); }

}  // namespace tiger::diff
