#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace permin {

/// Error type for all user-facing failures (bad input, bad files, broken
/// invariants). Numerical kernels throw this rather than asserting.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Regular-grid scalar field with physical spacing and origin.
///
/// Storage is row-major with the last axis fastest. The container is
/// shape-agnostic; 2D accessors are provided because the solvers are 2D.
class Field {
public:
  Field() = default;
  Field(std::vector<std::size_t> dims, std::vector<double> spacing,
        std::vector<double> origin);
  Field(std::vector<std::size_t> dims, std::vector<double> spacing);
  explicit Field(std::vector<std::size_t> dims);

  static Field constant(std::vector<std::size_t> dims, double value);

  std::size_t ndim() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<double>& spacing() const { return spacing_; }
  const std::vector<double>& origin() const { return origin_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2D access, index = i * dims[1] + j.
  double& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

  bool same_shape(const Field& other) const { return dims_ == other.dims_; }

  /// Throws if any value is NaN or Inf.
  void check_finite(std::string_view context) const;

private:
  std::vector<std::size_t> dims_;
  std::vector<double> spacing_;
  std::vector<double> origin_;
  std::vector<double> data_;
};

/// Counter-based deterministic random stream. Identical seeds give
/// bit-identical sequences on every platform; child streams are derived
/// from the key alone, so they are independent of draw order.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed);

  RngStream child(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal (Box-Muller, two counter draws per pair).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t uniform_below(std::size_t n);

  std::uint64_t seed() const { return seed_; }

private:
  RngStream(std::uint64_t key, std::uint64_t seed);

  std::uint64_t key_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// SGRD v1: magic "SGRD", u16 version, u16 ndim, then ndim u64 extents,
/// ndim f64 spacings, ndim f64 origins, payload as little-endian f64.
void write_field(const Field& field, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path);

/// I.i.d. standard normal field, unit spacing.
Field gaussian_field(const std::vector<std::size_t>& dims, RngStream& stream);

}  // namespace permin
