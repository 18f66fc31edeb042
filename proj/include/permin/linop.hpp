#pragma once

#include <functional>
#include <string>
#include <vector>

#include "permin/fieldio.hpp"

namespace permin {

/// Matrix-free linear operator: a pair of closures over immutable state.
/// Operators are value-like; copying copies the closures, not the data
/// they capture.
class LinearOperator {
public:
  using ApplyFn = std::function<std::vector<double>(const std::vector<double>&)>;

  LinearOperator(std::vector<std::size_t> domain_shape,
                 std::vector<std::size_t> range_shape, ApplyFn forward,
                 ApplyFn adjoint);

  const std::vector<std::size_t>& domain_shape() const { return domain_shape_; }
  const std::vector<std::size_t>& range_shape() const { return range_shape_; }
  std::size_t domain_size() const { return domain_size_; }
  std::size_t range_size() const { return range_size_; }

  std::vector<double> apply(const std::vector<double>& x) const;
  std::vector<double> apply_adjoint(const std::vector<double>& y) const;

  /// Swaps forward and adjoint; transposed(transposed(A)) is A.
  LinearOperator transposed() const;

  static LinearOperator identity(std::vector<std::size_t> shape);
  static LinearOperator diagonal(std::vector<double> entries);
  /// Dense row-major matrix, used mainly as a test oracle.
  static LinearOperator from_dense(std::size_t rows, std::size_t cols,
                                   std::vector<double> entries);

private:
  std::vector<std::size_t> domain_shape_;
  std::vector<std::size_t> range_shape_;
  std::size_t domain_size_;
  std::size_t range_size_;
  ApplyFn forward_;
  ApplyFn adjoint_;
};

/// compose(a, b)(x) = a(b(x)); adjoint is the reversed composition.
LinearOperator compose(const LinearOperator& a, const LinearOperator& b);

struct DotTestReport {
  bool passed = false;
  double forward_inner = 0.0;   // <Ax, y>
  double adjoint_inner = 0.0;   // <x, A'y>
  double rel_err = 0.0;
  std::string detail;
};

/// Adjoint consistency check: r = |<Ax,y> - <x,A'y>| / max(|<Ax,y>|, |<x,A'y>|).
DotTestReport dot_test(const LinearOperator& a, RngStream& stream, double tol);

double inner(const std::vector<double>& x, const std::vector<double>& y);
double norm2(const std::vector<double>& x);

}  // namespace permin
