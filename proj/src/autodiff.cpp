#include "mmk/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

#include "mmk/error.hpp"

namespace mmk::ad {

const Mat& Var::value() const { return tape->value(*this); }

Var Tape::constant(Mat v) {
  nodes_.push_back(Node{std::move(v), {}, false, nullptr, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, true, &p, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Mat value, std::vector<int> inputs,
                 std::function<void(Tape&, const Mat&)> back) {
  bool needs = false;
  for (int id : inputs) needs = needs || nodes_[id].needs;
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(back) : nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Mat& g) {
  Node& n = nodes_[v.id];
  if (!n.needs) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throwUsage("backward() needs a scalar loss");
  accumulate(loss, Mat::Ones(1, 1));
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.back) {
      // Copy: back() may grow other nodes' grads but never this node's.
      const Mat g = n.grad;
      n.back(*this, g);
    }
  }
}

namespace {

void checkSameTape(Var a, Var b) {
  assert(a.tape == b.tape);
  (void)a;
  (void)b;
}

} // namespace

Var matmul(Var a, Var b) {
  checkSameTape(a, b);
  if (a.cols() != b.rows()) throwUsage("matmul shape mismatch");
  Tape& t = *a.tape;
  return t.record(a.value() * b.value(), {a.id, b.id}, [a, b](Tape& tp, const Mat& g) {
    if (tp.needsGrad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.needsGrad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var matmulNT(Var a, Var b) {
  checkSameTape(a, b);
  if (a.cols() != b.cols()) throwUsage("matmulNT shape mismatch");
  Tape& t = *a.tape;
  return t.record(a.value() * b.value().transpose(), {a.id, b.id},
                  [a, b](Tape& tp, const Mat& g) {
                    if (tp.needsGrad(a)) tp.accumulate(a, g * b.value());
                    if (tp.needsGrad(b)) tp.accumulate(b, g.transpose() * a.value());
                  });
}

Var add(Var a, Var b) {
  checkSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throwUsage("add shape mismatch");
  return a.tape->record(a.value() + b.value(), {a.id, b.id}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  checkSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throwUsage("sub shape mismatch");
  return a.tape->record(a.value() - b.value(), {a.id, b.id}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var addRow(Var a, Var row) {
  checkSameTape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throwUsage("addRow shape mismatch");
  Mat out = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(out), {a.id, row.id}, [a, row](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    if (tp.needsGrad(row)) tp.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  return a.tape->record(a.value() * s, {a.id},
                        [a, s](Tape& tp, const Mat& g) { tp.accumulate(a, g * s); });
}

Var concatRows(std::span<const Var> parts) {
  if (parts.empty()) throwUsage("concatRows of nothing");
  Tape& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  std::vector<int> ids;
  for (Var p : parts) {
    if (p.cols() != cols) throwUsage("concatRows column mismatch");
    rows += p.rows();
    ids.push_back(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return t.record(std::move(out), std::move(ids), [keep](Tape& tp, const Mat& g) {
    Eigen::Index at = 0;
    for (Var p : keep) {
      if (tp.needsGrad(p)) tp.accumulate(p, g.middleRows(at, p.rows()));
      at += p.rows();
    }
  });
}

Var sliceRows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throwUsage("sliceRows out of range");
  return a.tape->record(a.value().middleRows(start, count), {a.id},
                        [a, start, count](Tape& tp, const Mat& g) {
                          Mat full = Mat::Zero(a.rows(), a.cols());
                          full.middleRows(start, count) = g;
                          tp.accumulate(a, full);
                        });
}

Var softmaxRows(Var a) {
  Mat out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  Mat y = out;
  return a.tape->record(std::move(out), {a.id}, [a, y = std::move(y)](Tape& tp, const Mat& g) {
    Mat dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      dx.row(i) = y.row(i).array() * (g.row(i).array() - dot);
    }
    tp.accumulate(a, dx);
  });
}

Var layerNormRows(Var x, Var gain, Var bias, double eps) {
  const Mat& xv = x.value();
  const Eigen::Index n = xv.rows();
  const Eigen::Index d = xv.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throwUsage("layerNorm parameter shape mismatch");
  }
  Mat xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Mat out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape->record(
      std::move(out), {x.id, gain.id, bias.id},
      [x, gain, bias, xhat, inv_std](Tape& tp, const Mat& g) {
        const Eigen::Index d = xhat.cols();
        if (tp.needsGrad(gain)) {
          tp.accumulate(gain, (g.array() * xhat.array()).colwise().sum().matrix());
        }
        if (tp.needsGrad(bias)) tp.accumulate(bias, g.colwise().sum());
        if (tp.needsGrad(x)) {
          Mat gh = (g.array().rowwise() * gain.value().row(0).array()).matrix();
          Mat dx(xhat.rows(), d);
          for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
            const double m1 = gh.row(i).mean();
            const double m2 = (gh.row(i).array() * xhat.row(i).array()).mean();
            dx.row(i) = inv_std(i) * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
          }
          tp.accumulate(x, dx);
        }
      });
}

Var gelu(Var a) {
  // tanh approximation
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const Mat& x = a.value();
  Mat out(x.rows(), x.cols());
  Mat deriv(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    const double u = c * (v + 0.044715 * v * v * v);
    const double th = std::tanh(u);
    out(i) = 0.5 * v * (1.0 + th);
    const double du = c * (1.0 + 3.0 * 0.044715 * v * v);
    deriv(i) = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
  }
  return a.tape->record(std::move(out), {a.id}, [a, deriv](Tape& tp, const Mat& g) {
    tp.accumulate(a, g.cwiseProduct(deriv));
  });
}

Var relu(Var a) {
  Mat out = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(out), {a.id}, [a](Tape& tp, const Mat& g) {
    tp.accumulate(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var gatherRows(Var table, std::span<const int> rows) {
  const Mat& tv = table.value();
  Mat out(static_cast<Eigen::Index>(rows.size()), tv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= tv.rows()) throwUsage("gatherRows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return table.tape->record(std::move(out), {table.id}, [table, idx](Tape& tp, const Mat& g) {
    Mat full = Mat::Zero(table.rows(), table.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    tp.accumulate(table, full);
  });
}

Var stopGradient(Var a) { return a.tape->constant(a.value()); }

Var meanSquaredError(Var a, Var b) {
  checkSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throwUsage("mse shape mismatch");
  const Mat diff = a.value() - b.value();
  const double n = static_cast<double>(diff.size());
  Mat out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return a.tape->record(std::move(out), {a.id, b.id}, [a, b, diff, n](Tape& tp, const Mat& g) {
    const Mat d = diff * (2.0 * g(0, 0) / n);
    tp.accumulate(a, d);
    tp.accumulate(b, -d);
  });
}

Var addScalars(Var a, Var b) { return add(a, b); }

Var crossEntropy(Var logits, std::span<const int> targets) {
  const Mat& z = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != z.rows()) throwUsage("crossEntropy target count mismatch");
  std::vector<int> tg(targets.begin(), targets.end());
  int count = 0;
  for (int t : tg) {
    if (t >= z.cols()) throwUsage("crossEntropy target out of range");
    if (t >= 0) ++count;
  }
  Mat out = Mat::Zero(1, 1);
  if (count == 0) return logits.tape->constant(std::move(out));
  Mat probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - m).exp();
    const double s = probs.row(i).sum();
    probs.row(i) /= s;
    if (tg[i] >= 0) total += -(z(i, tg[i]) - m - std::log(s));
  }
  out(0, 0) = total / count;
  return logits.tape->record(std::move(out), {logits.id},
                             [logits, probs, tg, count](Tape& tp, const Mat& g) {
                               Mat d = Mat::Zero(probs.rows(), probs.cols());
                               const double w = g(0, 0) / count;
                               for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                                 if (tg[i] < 0) continue;
                                 d.row(i) = probs.row(i) * w;
                                 d(i, tg[i]) -= w;
                               }
                               tp.accumulate(logits, d);
                             });
}

} // namespace mmk::ad
