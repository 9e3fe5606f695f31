#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pinnflow/errors.hpp"

namespace pinnflow::ad {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

class NotOnTape : public Error {
 public:
  NotOnTape() : Error("output variable is not recorded on this tape") {}
};

class Tape;

/// Handle to a node on a Tape. Values are dense matrices; a 1x1 value acts
/// as a scalar and broadcasts in elementwise operations.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  Tape* tape() const { return tape_; }
  int index() const { return index_; }
  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Append-only record of primitive operations. Parents always precede
/// children, so the backward pass is a single reverse sweep.
class Tape {
 public:
  enum class Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,      // c * a
    Shift,      // a + c
    MatMul,
    SparseMul,  // S * a with S owned by the tape
    AddRow,     // a + broadcast row b
    Tanh,
    Sin,
    Cos,
    Sum,
    Rows,       // gather rows of a by index list
    Slice,      // column-major block of a column vector, reshaped
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    double c = 0.0;
    int aux = -1;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Matrix value;
    Matrix grad;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Matrix value);
  Var variable(double value) { return variable(Matrix::Constant(1, 1, value)); }
  Var constant(Matrix value) { return variable(std::move(value)); }
  Var constant(double value) { return variable(value); }

  /// Registers a sparse operator so SparseMul nodes can refer to it.
  int add_sparse(SparseMatrix op);
  const SparseMatrix& sparse(int id) const { return sparse_.at(id); }

  Var record(Op op, int a, int b, Matrix value, double c = 0.0, int aux = -1);
  int add_indices(std::vector<int> idx);

  const Node& node(int index) const { return nodes_.at(index); }
  const Matrix& value(const Var& v) const { return nodes_.at(v.index()).value; }
  /// Gradient of the last backward() output w.r.t. v (zero if unreached).
  Matrix grad(const Var& v) const;

  /// Reverse sweep from a scalar output; throws NotOnTape otherwise.
  void backward(const Var& output);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  std::vector<Node> nodes_;
  std::vector<SparseMatrix> sparse_;
  std::vector<std::vector<int>> indices_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(double c, const Var& a);
Var operator*(const Var& a, double c);

Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var matmul(const Var& a, const Var& b);
Var sparse_matmul(int sparse_id, const Var& a);
Var add_row(const Var& a, const Var& row);
Var rows(const Var& a, std::vector<int> idx);
Var column(const Var& a, Eigen::Index col);
/// Entries [offset, offset + rows*cols) of column vector a as rows x cols.
Var slice(const Var& a, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols);

/// Convenience wrapper: backward on output's own tape.
void backward(const Var& output);

/// Max relative error between the tape gradient of f at `point` and
/// central differences with the given step. The relative error of a
/// coordinate is |g - fd| / max(|g|, |fd|, floor).
double finite_difference_check(const std::function<Var(Tape&, const Var&)>& f,
                               const Eigen::VectorXd& point, double step, double floor = 1e-8);

}  // namespace pinnflow::ad
