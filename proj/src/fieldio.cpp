#include "permin/fieldio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace permin {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw Error("Field: dims must be nonempty");
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw Error("Field: zero extent in dims");
    n *= d;
  }
  return n;
}

}  // namespace

Field::Field(std::vector<std::size_t> dims, std::vector<double> spacing,
             std::vector<double> origin)
    : dims_(std::move(dims)), spacing_(std::move(spacing)), origin_(std::move(origin)) {
  std::size_t n = checked_product(dims_);
  if (spacing_.size() != dims_.size())
    throw Error("Field: spacing length does not match ndim");
  for (double h : spacing_)
    if (!(h > 0.0)) throw Error("Field: spacing must be strictly positive");
  if (origin_.empty()) origin_.assign(dims_.size(), 0.0);
  if (origin_.size() != dims_.size())
    throw Error("Field: origin length does not match ndim");
  data_.assign(n, 0.0);
}

Field::Field(std::vector<std::size_t> dims, std::vector<double> spacing)
    : Field(std::move(dims), std::move(spacing), {}) {}

Field::Field(std::vector<std::size_t> dims)
    : Field(dims, std::vector<double>(dims.size(), 1.0),
            std::vector<double>(dims.size(), 0.0)) {}

Field Field::constant(std::vector<std::size_t> dims, double value) {
  Field f(std::move(dims));
  std::fill(f.data_.begin(), f.data_.end(), value);
  return f;
}

void Field::check_finite(std::string_view context) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i]))
      throw Error(std::string(context) + ": non-finite value at index " +
                  std::to_string(i));
  }
}

// ---------------------------------------------------------------------------
// RngStream: splitmix64 finalizer over (key, counter).

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  // FNV-1a, then finalized.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return mix64(h);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : key_(mix64(seed)), seed_(seed) {}
RngStream::RngStream(std::uint64_t key, std::uint64_t seed) : key_(key), seed_(seed) {}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(mix64(key_ ^ hash_label(label)), seed_);
}

std::uint64_t RngStream::next_u64() { return mix64(key_ + 0xD1B54A32D192ED03ull * ++counter_); }

double RngStream::uniform() {
  // 53 random bits into [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::size_t RngStream::uniform_below(std::size_t n) {
  if (n == 0) throw Error("RngStream::uniform_below: n must be positive");
  // Rejection sampling to avoid modulo bias.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % n);
}

// ---------------------------------------------------------------------------
// SGRD binary format.

namespace {

constexpr char kMagic[4] = {'S', 'G', 'R', 'D'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  // Host is assumed little-endian IEEE-754 (checked by golden-byte tests).
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw Error("read_field: truncated file: " + path.string());
  return value;
}

}  // namespace

void write_field(const Field& field, const std::filesystem::path& path) {
  field.check_finite("write_field");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("write_field: cannot open " + path.string());
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(field.ndim()));
  for (std::size_t d : field.dims()) put<std::uint64_t>(os, d);
  for (double h : field.spacing()) put<double>(os, h);
  for (double o : field.origin()) put<double>(os, o);
  os.write(reinterpret_cast<const char*>(field.data().data()),
           static_cast<std::streamsize>(field.size() * sizeof(double)));
  if (!os) throw Error("write_field: I/O failure writing " + path.string());
}

Field read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("read_field: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("read_field: not an SGRD file: " + path.string());
  auto version = get<std::uint16_t>(is, path);
  if (version != kVersion)
    throw Error("read_field: unsupported version " + std::to_string(version));
  auto ndim = get<std::uint16_t>(is, path);
  if (ndim == 0) throw Error("read_field: zero ndim in " + path.string());
  std::vector<std::size_t> dims(ndim);
  for (auto& d : dims) d = get<std::uint64_t>(is, path);
  std::vector<double> spacing(ndim), origin(ndim);
  for (auto& h : spacing) h = get<double>(is, path);
  for (auto& o : origin) o = get<double>(is, path);
  Field f(dims, spacing, origin);
  std::size_t payload = f.size() * sizeof(double);
  is.read(reinterpret_cast<char*>(f.data().data()),
          static_cast<std::streamsize>(payload));
  std::size_t got = static_cast<std::size_t>(is.gcount());
  if (got != payload)
    throw Error("read_field: expected " + std::to_string(payload) +
                " bytes, got " + std::to_string(got) + ": " + path.string());
  return f;
}

Field gaussian_field(const std::vector<std::size_t>& dims, RngStream& stream) {
  Field f(dims);
  for (auto& v : f.data()) v = stream.normal();
  return f;
}

}  // namespace permin
