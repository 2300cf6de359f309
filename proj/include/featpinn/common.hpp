#ifndef FEATPINN_COMMON_HPP
#define FEATPINN_COMMON_HPP

#include <cstdint>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace featpinn {

// ---------------------------------------------------------------------------
// Error taxonomy. Everything user-facing derives from Error so the CLI can
// map failures onto exit codes in one place.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Violated precondition or malformed specification (bad m, sigma<=0, ...).
class SpecError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, division by zero, numerical blow-up.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Point outside a problem domain, impossible geometry.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation not available for the given object (e.g. no analytical solution).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Bad experiment configuration (unknown key, missing section, bad enum).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small dense matrix, row major. Heavier linear algebra is not needed here;
// kernel matrices stay small (N x N over tens of inputs).
// ---------------------------------------------------------------------------

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

// Axis-aligned box domain.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }
  double width(std::size_t j) const { return hi[j] - lo[j]; }
  double mid(std::size_t j) const { return 0.5 * (lo[j] + hi[j]); }
  bool contains(std::span<const double> p, double tol = 0.0) const;
};

// ---------------------------------------------------------------------------
// Deterministic seeding. Every consumer derives its own stream from a master
// seed plus a purpose tag, so adding a new consumer never shifts existing
// streams.
// ---------------------------------------------------------------------------

std::uint64_t hash_tag(std::uint64_t master, std::string_view tag, std::uint64_t k = 0);
std::mt19937_64 make_rng(std::uint64_t master, std::string_view tag, std::uint64_t k = 0);

// ---------------------------------------------------------------------------
// Bounded worker pool for embarrassingly parallel loops. Work is split into
// fixed-size chunks whose results are combined in chunk order, so outputs do
// not depend on thread scheduling. FEATPINN_THREADS caps the pool.
// ---------------------------------------------------------------------------

int worker_count();

// Runs fn(chunk_index, begin, end) over [0, n) in chunks of `chunk` items.
// fn must only write to state owned by its chunk.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Basic sample statistics (n-1 denominator for variance).
double mean_of(std::span<const double> xs);
double sample_variance(std::span<const double> xs);

}  // namespace featpinn

#endif  // FEATPINN_COMMON_HPP
