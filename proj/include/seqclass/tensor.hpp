#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace seqclass {

// Dense row-major array of doubles. Vectors are 1xN. All training math is
// 64-bit; weights are narrowed to 32-bit only on disk (see model_io).
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  void fill(double v) { data_.assign(data_.size(), v); }
  // Throws std::invalid_argument if any entry is NaN or infinite.
  void require_finite(const std::string& what) const;

  bool operator==(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double sigmoid(double x);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise (Hadamard)
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Deterministic seedable generator, identical streams on every platform.
// splitmix64 core with explicit uniform/int/shuffle derivations; the exact
// algorithm is part of the reproducibility contract, so no std::random
// distributions are used anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in the open interval (lo, hi).
  double uniform_open(double lo, double hi) {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  // Uniform integer in [0, n). n must be nonzero.
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Fisher-Yates, in place.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

Tensor zeros(std::size_t rows, std::size_t cols);
Tensor constant(std::size_t rows, std::size_t cols, double c);
// Uniform in (-b, b) with b = sqrt(6 / (fan_in + fan_out)); samples are
// strictly inside the bound.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng);
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace seqclass
