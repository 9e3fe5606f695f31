#include "pinnflow/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace pinnflow::ad {

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw DimensionMismatch("scalar() on non-scalar variable");
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

int Tape::add_sparse(SparseMatrix op) {
  sparse_.push_back(std::move(op));
  return static_cast<int>(sparse_.size()) - 1;
}

int Tape::add_indices(std::vector<int> idx) {
  indices_.push_back(std::move(idx));
  return static_cast<int>(indices_.size()) - 1;
}

Var Tape::record(Op op, int a, int b, Matrix value, double c, int aux) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.aux = aux;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix Tape::grad(const Var& v) const {
  const auto& n = nodes_.at(v.index());
  if (n.grad.size() == 0) return Matrix::Zero(n.rows, n.cols);
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  sparse_.clear();
  indices_.clear();
}

namespace {

// Sum a gradient down to the operand's shape (1x1 operands broadcast).
void accumulate(Tape::Node& target, const Matrix& g) {
  if (target.grad.size() == 0) target.grad = Matrix::Zero(target.rows, target.cols);
  if (target.rows == g.rows() && target.cols == g.cols()) {
    target.grad += g;
  } else {
    target.grad(0, 0) += g.sum();
  }
}

}  // namespace

void Tape::backward(const Var& output) {
  if (output.tape() != this || output.index() < 0 || output.index() >= static_cast<int>(nodes_.size())) {
    throw NotOnTape();
  }
  if (nodes_[output.index()].value.size() != 1) {
    throw DimensionMismatch("backward requires a scalar output");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[output.index()].grad = Matrix::Ones(1, 1);

  for (int i = output.index(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || n.op == Op::Leaf) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate(nodes_[n.a], g);
        accumulate(nodes_[n.b], g);
        break;
      case Op::Sub:
        accumulate(nodes_[n.a], g);
        accumulate(nodes_[n.b], -g);
        break;
      case Op::Mul: {
        const Matrix& va = nodes_[n.a].value;
        const Matrix& vb = nodes_[n.b].value;
        if (vb.size() == 1) {
          accumulate(nodes_[n.a], g * vb(0, 0));
        } else {
          accumulate(nodes_[n.a], g.cwiseProduct(vb));
        }
        if (va.size() == 1) {
          accumulate(nodes_[n.b], g * va(0, 0));
        } else {
          accumulate(nodes_[n.b], g.cwiseProduct(va));
        }
        break;
      }
      case Op::Neg:
        accumulate(nodes_[n.a], -g);
        break;
      case Op::Scale:
        accumulate(nodes_[n.a], n.c * g);
        break;
      case Op::Shift:
        accumulate(nodes_[n.a], g);
        break;
      case Op::MatMul:
        accumulate(nodes_[n.a], g * nodes_[n.b].value.transpose());
        accumulate(nodes_[n.b], nodes_[n.a].value.transpose() * g);
        break;
      case Op::SparseMul:
        accumulate(nodes_[n.a], Matrix(sparse_[n.aux].transpose() * g));
        break;
      case Op::AddRow:
        accumulate(nodes_[n.a], g);
        accumulate(nodes_[n.b], g.colwise().sum());
        break;
      case Op::Tanh:
        accumulate(nodes_[n.a], g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::Sin:
        accumulate(nodes_[n.a], g.cwiseProduct(nodes_[n.a].value.array().cos().matrix()));
        break;
      case Op::Cos:
        accumulate(nodes_[n.a], -g.cwiseProduct(nodes_[n.a].value.array().sin().matrix()));
        break;
      case Op::Sum:
        accumulate(nodes_[n.a], Matrix::Constant(nodes_[n.a].rows, nodes_[n.a].cols, g(0, 0)));
        break;
      case Op::Rows: {
        Node& src = nodes_[n.a];
        if (src.grad.size() == 0) src.grad = Matrix::Zero(src.rows, src.cols);
        const auto& idx = indices_[n.aux];
        for (std::size_t r = 0; r < idx.size(); ++r) src.grad.row(idx[r]) += g.row(r);
        break;
      }
      case Op::Slice: {
        Node& src = nodes_[n.a];
        if (src.grad.size() == 0) src.grad = Matrix::Zero(src.rows, src.cols);
        Eigen::Map<Eigen::VectorXd>(src.grad.data() + n.aux, g.size()) +=
            Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
        break;
      }
    }
  }
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw NotOnTape();
  return *a.tape();
}

void check_broadcast(const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (a.size() == 1 || b.size() == 1) return;
  throw DimensionMismatch("elementwise operands " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

template <class F>
Matrix broadcast(const Matrix& a, const Matrix& b, F f) {
  if (a.size() == 1 && b.size() != 1) {
    return f(Matrix::Constant(b.rows(), b.cols(), a(0, 0)).array(), b.array()).matrix();
  }
  if (b.size() == 1 && a.size() != 1) {
    return f(a.array(), Matrix::Constant(a.rows(), a.cols(), b(0, 0)).array()).matrix();
  }
  return f(a.array(), b.array()).matrix();
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  check_broadcast(a.value(), b.value());
  return t.record(Tape::Op::Add, a.index(), b.index(),
                  broadcast(a.value(), b.value(), [](const auto& x, const auto& y) { return x + y; }));
}

Var operator-(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  check_broadcast(a.value(), b.value());
  return t.record(Tape::Op::Sub, a.index(), b.index(),
                  broadcast(a.value(), b.value(), [](const auto& x, const auto& y) { return x - y; }));
}

Var operator*(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  check_broadcast(a.value(), b.value());
  return t.record(Tape::Op::Mul, a.index(), b.index(),
                  broadcast(a.value(), b.value(), [](const auto& x, const auto& y) { return x * y; }));
}

Var operator-(const Var& a) { return a.tape()->record(Tape::Op::Neg, a.index(), -1, -a.value()); }

Var operator+(const Var& a, double c) {
  return a.tape()->record(Tape::Op::Shift, a.index(), -1, (a.value().array() + c).matrix(), c);
}
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) { return (-a) + c; }

Var operator*(double c, const Var& a) {
  return a.tape()->record(Tape::Op::Scale, a.index(), -1, c * a.value(), c);
}
Var operator*(const Var& a, double c) { return c * a; }

Var tanh(const Var& a) {
  return a.tape()->record(Tape::Op::Tanh, a.index(), -1, a.value().array().tanh().matrix());
}
Var sin(const Var& a) {
  return a.tape()->record(Tape::Op::Sin, a.index(), -1, a.value().array().sin().matrix());
}
Var cos(const Var& a) {
  return a.tape()->record(Tape::Op::Cos, a.index(), -1, a.value().array().cos().matrix());
}
Var square(const Var& a) { return a * a; }

Var sum(const Var& a) {
  return a.tape()->record(Tape::Op::Sum, a.index(), -1, Matrix::Constant(1, 1, a.value().sum()));
}

Var mean(const Var& a) { return (1.0 / static_cast<double>(a.value().size())) * sum(a); }

Var matmul(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul inner dimensions differ");
  return t.record(Tape::Op::MatMul, a.index(), b.index(), a.value() * b.value());
}

Var sparse_matmul(int sparse_id, const Var& a) {
  const SparseMatrix& op = a.tape()->sparse(sparse_id);
  if (op.cols() != a.rows()) throw DimensionMismatch("sparse operator does not match operand rows");
  return a.tape()->record(Tape::Op::SparseMul, a.index(), -1, Matrix(op * a.value()), 0.0, sparse_id);
}

Var add_row(const Var& a, const Var& row) {
  auto& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionMismatch("add_row expects a 1 x cols row");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(Tape::Op::AddRow, a.index(), row.index(), std::move(out));
}

Var rows(const Var& a, std::vector<int> idx) {
  const Matrix& src = a.value();
  Matrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= src.rows()) throw DimensionMismatch("row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = src.row(idx[r]);
  }
  const int aux = a.tape()->add_indices(std::move(idx));
  return a.tape()->record(Tape::Op::Rows, a.index(), -1, std::move(out), 0.0, aux);
}

Var slice(const Var& a, Eigen::Index offset, Eigen::Index r, Eigen::Index c) {
  const Matrix& src = a.value();
  if (offset < 0 || offset + r * c > src.size()) throw DimensionMismatch("slice out of range");
  Matrix out = Eigen::Map<const Matrix>(src.data() + offset, r, c);
  return a.tape()->record(Tape::Op::Slice, a.index(), -1, std::move(out), 0.0, static_cast<int>(offset));
}

Var column(const Var& a, Eigen::Index col) {
  if (col < 0 || col >= a.cols()) throw DimensionMismatch("column out of range");
  return slice(a, col * a.rows(), a.rows(), 1);
}

void backward(const Var& output) {
  if (output.tape() == nullptr) throw NotOnTape();
  output.tape()->backward(output);
}

double finite_difference_check(const std::function<Var(Tape&, const Var&)>& f,
                               const Eigen::VectorXd& point, double step, double floor) {
  if (!(step > 0.0)) throw PreconditionError("finite-difference step must be positive");
  Eigen::VectorXd analytic;
  {
    Tape tape;
    const Var x = tape.variable(Matrix(point));
    const Var y = f(tape, x);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  auto eval = [&](const Eigen::VectorXd& at) {
    Tape tape;
    return f(tape, tape.variable(Matrix(at))).scalar();
  };
  double worst = 0.0;
  Eigen::VectorXd probe = point;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    probe(k) = point(k) + step;
    const double up = eval(probe);
    probe(k) = point(k) - step;
    const double down = eval(probe);
    probe(k) = point(k);
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic(k)), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic(k) - numeric) / denom);
  }
  return worst;
}

}  // namespace pinnflow::ad
