#pragma once

// Minimal reverse-mode differentiation over dense double matrices.
// A Tape records one forward pass; backward() accumulates into Parameter::grad.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mmk::ad {

using Mat = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  Var constant(Mat v);
  Var param(Parameter& p);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates to parameters.
  void backward(Var loss);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Building blocks for ops; `back` receives the node's output gradient.
  Var record(Mat value, std::vector<int> inputs, std::function<void(Tape&, const Mat&)> back);
  bool needsGrad(Var v) const { return nodes_[v.id].needs; }
  void accumulate(Var v, const Mat& g);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, const Mat&)> back;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
// a * b^T
Var matmulNT(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Adds a 1 x c row to every row of a.
Var addRow(Var a, Var row);
Var scale(Var a, double s);
Var concatRows(std::span<const Var> parts);
Var sliceRows(Var a, Eigen::Index start, Eigen::Index count);
Var softmaxRows(Var a);
Var layerNormRows(Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Var a);
Var relu(Var a);
// Row lookup into an embedding table.
Var gatherRows(Var table, std::span<const int> rows);
Var stopGradient(Var a);
// Mean over all elements of (a - b)^2.
Var meanSquaredError(Var a, Var b);
Var addScalars(Var a, Var b);
// Mean softmax cross-entropy over the rows whose target >= 0.
// Returns zero (with no gradient) when no row is selected.
Var crossEntropy(Var logits, std::span<const int> targets);

} // namespace mmk::ad
