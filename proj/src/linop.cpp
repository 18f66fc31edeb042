#include "permin/linop.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace permin {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << ")";
  return os.str();
}

}  // namespace

LinearOperator::LinearOperator(std::vector<std::size_t> domain_shape,
                               std::vector<std::size_t> range_shape,
                               ApplyFn forward, ApplyFn adjoint)
    : domain_shape_(std::move(domain_shape)),
      range_shape_(std::move(range_shape)),
      domain_size_(shape_size(domain_shape_)),
      range_size_(shape_size(range_shape_)),
      forward_(std::move(forward)),
      adjoint_(std::move(adjoint)) {}

std::vector<double> LinearOperator::apply(const std::vector<double>& x) const {
  if (x.size() != domain_size_)
    throw Error("LinearOperator::apply: input size " + std::to_string(x.size()) +
                " does not match domain " + shape_str(domain_shape_));
  auto y = forward_(x);
  if (y.size() != range_size_)
    throw Error("LinearOperator::apply: forward produced wrong size");
  return y;
}

std::vector<double> LinearOperator::apply_adjoint(const std::vector<double>& y) const {
  if (y.size() != range_size_)
    throw Error("LinearOperator::apply_adjoint: input size " +
                std::to_string(y.size()) + " does not match range " +
                shape_str(range_shape_));
  auto x = adjoint_(y);
  if (x.size() != domain_size_)
    throw Error("LinearOperator::apply_adjoint: adjoint produced wrong size");
  return x;
}

LinearOperator LinearOperator::transposed() const {
  return LinearOperator(range_shape_, domain_shape_, adjoint_, forward_);
}

LinearOperator LinearOperator::identity(std::vector<std::size_t> shape) {
  auto id = [](const std::vector<double>& x) { return x; };
  return LinearOperator(shape, shape, id, id);
}

LinearOperator LinearOperator::diagonal(std::vector<double> entries) {
  std::vector<std::size_t> shape{entries.size()};
  auto apply = [entries](const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = entries[i] * x[i];
    return y;
  };
  return LinearOperator(shape, shape, apply, apply);
}

LinearOperator LinearOperator::from_dense(std::size_t rows, std::size_t cols,
                                          std::vector<double> entries) {
  if (entries.size() != rows * cols)
    throw Error("from_dense: entry count does not match rows*cols");
  auto fwd = [rows, cols, entries](const std::vector<double>& x) {
    std::vector<double> y(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) y[i] += entries[i * cols + j] * x[j];
    return y;
  };
  auto adj = [rows, cols, entries](const std::vector<double>& y) {
    std::vector<double> x(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) x[j] += entries[i * cols + j] * y[i];
    return x;
  };
  return LinearOperator({cols}, {rows}, fwd, adj);
}

LinearOperator compose(const LinearOperator& a, const LinearOperator& b) {
  if (b.range_shape() != a.domain_shape())
    throw Error("compose: inner shape mismatch, a.domain " +
                shape_str(a.domain_shape()) + " vs b.range " +
                shape_str(b.range_shape()));
  auto fwd = [a, b](const std::vector<double>& x) { return a.apply(b.apply(x)); };
  auto adj = [a, b](const std::vector<double>& y) {
    return b.apply_adjoint(a.apply_adjoint(y));
  };
  return LinearOperator(b.domain_shape(), a.range_shape(), fwd, adj);
}

double inner(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("inner: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const std::vector<double>& x) { return inner(x, x); }

DotTestReport dot_test(const LinearOperator& a, RngStream& stream, double tol) {
  std::vector<double> x(a.domain_size()), y(a.range_size());
  for (auto& v : x) v = stream.normal();
  for (auto& v : y) v = stream.normal();

  DotTestReport report;
  auto ax = a.apply(x);
  for (std::size_t i = 0; i < ax.size(); ++i) {
    if (!std::isfinite(ax[i])) {
      report.detail = "non-finite forward output at index " + std::to_string(i);
      return report;
    }
  }
  auto aty = a.apply_adjoint(y);
  for (std::size_t i = 0; i < aty.size(); ++i) {
    if (!std::isfinite(aty[i])) {
      report.detail = "non-finite adjoint output at index " + std::to_string(i);
      return report;
    }
  }
  report.forward_inner = inner(ax, y);
  report.adjoint_inner = inner(x, aty);
  double denom = std::max(std::abs(report.forward_inner), std::abs(report.adjoint_inner));
  report.rel_err = denom > 0.0
                       ? std::abs(report.forward_inner - report.adjoint_inner) / denom
                       : 0.0;
  report.passed = report.rel_err < tol;
  return report;
}

}  // namespace permin
