#include "uqsim/tape.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim::ad {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

MapCM as_mat(const Tensor& t) { return MapCM(t.data(), t.rows(), t.cols()); }
MapM as_mat(Tensor& t) { return MapM(t.data(), t.rows(), t.cols()); }

inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

inline double softplus_stable(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// b broadcasts against a when shapes are equal, b is a vector matching a's
// trailing dimension, or b is a scalar.
enum class Bcast { kSame, kTrailing, kScalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (b.rank() == 0) return Bcast::kScalar;
  if (b.rank() == 1 && a.rank() == 2 && b.cols() == a.cols()) return Bcast::kTrailing;
  throw ContractViolation(std::string(op) + ": incompatible shapes");
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kNeg: return "neg";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSin: return "sin";
    case Op::kSoftplus: return "softplus";
    case Op::kSquare: return "square";
    case Op::kAbs: return "abs";
    case Op::kLgamma: return "lgamma";
    case Op::kAffine: return "affine";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
  }
  return "?";
}

double digamma(double x) {
  // Recurrence into the asymptotic region, then a standard series.
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

ValueId Tape::push(Node n, const char* name) {
  if (!n.out.all_finite()) throw NumericError(name, "non-finite value in forward pass");
  nodes_.push_back(std::move(n));
  return static_cast<ValueId>(nodes_.size() - 1);
}

ValueId Tape::leaf(Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.needs_grad = true;
  n.out = std::move(t);
  return push(std::move(n), "leaf");
}

ValueId Tape::constant(Tensor t) {
  Node n;
  n.op = Op::kConst;
  n.out = std::move(t);
  return push(std::move(n), "const");
}

ValueId Tape::unary(Op op, ValueId a, double c0, double c1) {
  const Node& na = at(a);
  Node n;
  n.op = op;
  n.a = a;
  n.c0 = c0;
  n.c1 = c1;
  n.needs_grad = na.needs_grad;

  const std::vector<double>& x = na.out.values();
  if (op == Op::kSum || op == Op::kMean) {
    double acc = 0.0;
    for (double v : x) acc += v;
    if (op == Op::kMean) {
      if (x.empty()) throw ContractViolation("mean: empty tensor");
      acc /= static_cast<double>(x.size());
    }
    n.out = Tensor::scalar(acc);
    return push(std::move(n), op_name(op));
  }

  Tensor out(na.out.shape());
  double* y = out.data();
  const std::size_t m = x.size();
  switch (op) {
    case Op::kNeg:
      for (std::size_t i = 0; i < m; ++i) y[i] = -x[i];
      break;
    case Op::kRelu:
      for (std::size_t i = 0; i < m; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Op::kTanh:
      for (std::size_t i = 0; i < m; ++i) y[i] = std::tanh(x[i]);
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < m; ++i) y[i] = std::exp(x[i]);
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < m; ++i) y[i] = std::log(x[i]);
      break;
    case Op::kSin:
      for (std::size_t i = 0; i < m; ++i) y[i] = std::sin(x[i]);
      break;
    case Op::kSoftplus:
      for (std::size_t i = 0; i < m; ++i) y[i] = softplus_stable(x[i]);
      break;
    case Op::kSquare:
      for (std::size_t i = 0; i < m; ++i) y[i] = x[i] * x[i];
      break;
    case Op::kAbs:
      for (std::size_t i = 0; i < m; ++i) y[i] = std::fabs(x[i]);
      break;
    case Op::kLgamma:
      for (std::size_t i = 0; i < m; ++i) y[i] = std::lgamma(x[i]);
      break;
    case Op::kAffine:
      for (std::size_t i = 0; i < m; ++i) y[i] = c0 * x[i] + c1;
      break;
    default:
      throw ContractViolation("unary: bad op");
  }
  n.out = std::move(out);
  return push(std::move(n), op_name(op));
}

ValueId Tape::binary(Op op, ValueId a, ValueId b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;

  if (op == Op::kMatmul) {
    if (na.out.rank() != 2 || nb.out.rank() != 2 || na.out.cols() != nb.out.rows())
      throw ContractViolation("matmul: incompatible shapes");
    Tensor out({na.out.rows(), nb.out.cols()});
    as_mat(out).noalias() = as_mat(na.out) * as_mat(nb.out);
    n.out = std::move(out);
    return push(std::move(n), "matmul");
  }

  const Bcast kind = broadcast_kind(na.out, nb.out, op_name(op));
  Tensor out(na.out.shape());
  const double* x = na.out.data();
  const double* z = nb.out.data();
  double* y = out.data();
  const std::int64_t rows = na.out.rows();
  const std::int64_t cols = na.out.cols();
  const std::int64_t total = na.out.size();

  auto run = [&](auto apply) {
    if (kind == Bcast::kSame) {
      for (std::int64_t i = 0; i < total; ++i) y[i] = apply(x[i], z[i]);
    } else if (kind == Bcast::kScalar) {
      const double v = z[0];
      for (std::int64_t i = 0; i < total; ++i) y[i] = apply(x[i], v);
    } else {
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) y[r * cols + c] = apply(x[r * cols + c], z[c]);
    }
  };
  switch (op) {
    case Op::kAdd: run([](double u, double v) { return u + v; }); break;
    case Op::kSub: run([](double u, double v) { return u - v; }); break;
    case Op::kMul: run([](double u, double v) { return u * v; }); break;
    default: throw ContractViolation("binary: bad op");
  }
  n.out = std::move(out);
  return push(std::move(n), op_name(op));
}

ValueId Tape::matmul(ValueId a, ValueId b) { return binary(Op::kMatmul, a, b); }
ValueId Tape::add(ValueId a, ValueId b) { return binary(Op::kAdd, a, b); }
ValueId Tape::sub(ValueId a, ValueId b) { return binary(Op::kSub, a, b); }
ValueId Tape::mul(ValueId a, ValueId b) { return binary(Op::kMul, a, b); }
ValueId Tape::neg(ValueId a) { return unary(Op::kNeg, a); }
ValueId Tape::relu(ValueId a) { return unary(Op::kRelu, a); }
ValueId Tape::tanh(ValueId a) { return unary(Op::kTanh, a); }
ValueId Tape::exp(ValueId a) { return unary(Op::kExp, a); }
ValueId Tape::log(ValueId a) { return unary(Op::kLog, a); }
ValueId Tape::sin(ValueId a) { return unary(Op::kSin, a); }
ValueId Tape::softplus(ValueId a) { return unary(Op::kSoftplus, a); }
ValueId Tape::square(ValueId a) { return unary(Op::kSquare, a); }
ValueId Tape::abs(ValueId a) { return unary(Op::kAbs, a); }
ValueId Tape::lgamma(ValueId a) { return unary(Op::kLgamma, a); }
ValueId Tape::affine(ValueId a, double scale, double shift) {
  return unary(Op::kAffine, a, scale, shift);
}
ValueId Tape::sum(ValueId a) { return unary(Op::kSum, a); }
ValueId Tape::mean(ValueId a) { return unary(Op::kMean, a); }

namespace {
// A default-constructed grad has shape {} like a scalar but holds no data.
inline bool grad_ready(const Tensor& grad, const Tensor& out) {
  return grad.same_shape(out) && grad.size() == out.size();
}
}  // namespace

const Tensor& Tape::grad(ValueId id) const {
  const Node& n = at(id);
  if (!grad_ready(n.grad, n.out))
    throw ContractViolation("grad: backward has not populated this node");
  return n.grad;
}

void Tape::backward(ValueId root) {
  Node& r = at(root);
  if (r.out.size() != 1 || r.out.rank() != 0)
    throw ContractViolation("backward: root must be scalar");

  for (Node& n : nodes_) {
    if (!n.needs_grad) continue;
    if (!grad_ready(n.grad, n.out)) n.grad = Tensor(n.out.shape());
    else std::fill(n.grad.values().begin(), n.grad.values().end(), 0.0);
  }
  if (!r.needs_grad) return;  // constant graph; nothing to do
  r.grad[0] = 1.0;

  for (ValueId id = root; id >= 0; --id) {
    Node& n = at(id);
    if (!n.needs_grad || n.op == Op::kLeaf || n.op == Op::kConst) continue;
    const Tensor& g = n.grad;
    Node& na = at(n.a);
    Node* nb = n.b >= 0 ? &at(n.b) : nullptr;

    switch (n.op) {
      case Op::kMatmul: {
        if (na.needs_grad) as_mat(na.grad).noalias() += as_mat(g) * as_mat(nb->out).transpose();
        if (nb->needs_grad) as_mat(nb->grad).noalias() += as_mat(na.out).transpose() * as_mat(g);
        break;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul: {
        const Bcast kind = broadcast_kind(na.out, nb->out, "backward");
        const double sign = n.op == Op::kSub ? -1.0 : 1.0;
        const std::int64_t rows = na.out.rows();
        const std::int64_t cols = na.out.cols();
        const double* gd = g.data();
        if (na.needs_grad) {
          double* ga = na.grad.data();
          if (n.op == Op::kMul) {
            const double* z = nb->out.data();
            if (kind == Bcast::kSame)
              for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += gd[i] * z[i];
            else if (kind == Bcast::kScalar)
              for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += gd[i] * z[0];
            else
              for (std::int64_t r2 = 0; r2 < rows; ++r2)
                for (std::int64_t c = 0; c < cols; ++c) ga[r2 * cols + c] += gd[r2 * cols + c] * z[c];
          } else {
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += gd[i];
          }
        }
        if (nb->needs_grad) {
          double* gb = nb->grad.data();
          const double* x = na.out.data();
          auto run = [&](auto term) {
            if (kind == Bcast::kSame) {
              for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += term(i);
            } else if (kind == Bcast::kScalar) {
              for (std::int64_t i = 0; i < g.size(); ++i) gb[0] += term(i);
            } else {
              for (std::int64_t r2 = 0; r2 < rows; ++r2)
                for (std::int64_t c = 0; c < cols; ++c) gb[c] += term(r2 * cols + c);
            }
          };
          if (n.op == Op::kMul) run([&](std::int64_t i) { return gd[i] * x[i]; });
          else run([&](std::int64_t i) { return sign * gd[i]; });
        }
        break;
      }
      case Op::kSum:
      case Op::kMean: {
        if (!na.needs_grad) break;
        const double scale =
            n.op == Op::kMean ? g[0] / static_cast<double>(na.out.size()) : g[0];
        double* ga = na.grad.data();
        for (std::int64_t i = 0; i < na.out.size(); ++i) ga[i] += scale;
        break;
      }
      default: {
        if (!na.needs_grad) break;
        const double* x = na.out.data();
        const double* y = n.out.data();
        const double* gd = g.data();
        double* ga = na.grad.data();
        const std::int64_t m = na.out.size();
        switch (n.op) {
          case Op::kNeg:
            for (std::int64_t i = 0; i < m; ++i) ga[i] -= gd[i];
            break;
          case Op::kRelu:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += x[i] > 0.0 ? gd[i] : 0.0;
            break;
          case Op::kTanh:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * (1.0 - y[i] * y[i]);
            break;
          case Op::kExp:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * y[i];
            break;
          case Op::kLog:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] / x[i];
            break;
          case Op::kSin:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * std::cos(x[i]);
            break;
          case Op::kSoftplus:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * sigmoid(x[i]);
            break;
          case Op::kSquare:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * 2.0 * x[i];
            break;
          case Op::kAbs:
            for (std::int64_t i = 0; i < m; ++i)
              ga[i] += x[i] > 0.0 ? gd[i] : (x[i] < 0.0 ? -gd[i] : 0.0);
            break;
          case Op::kLgamma:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * digamma(x[i]);
            break;
          case Op::kAffine:
            for (std::int64_t i = 0; i < m; ++i) ga[i] += gd[i] * n.c0;
            break;
          default:
            throw ContractViolation("backward: bad op");
        }
      }
    }
  }
}

}  // namespace uqsim::ad
