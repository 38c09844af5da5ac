#include "seqclass/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace seqclass {

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor();
  Tensor t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols())
      throw std::invalid_argument("from_rows: ragged input");
    for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) = rows[r][c];
  }
  return t;
}

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Tensor::require_finite(const std::string& what) const {
  for (double v : data_) {
    if (!std::isfinite(v))
      throw std::invalid_argument(what + ": non-finite value");
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() +
                                " * " + b.shape_str());
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

namespace {

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, F&& f) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(name) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out(a.rows(), a.cols());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor sigmoid(const Tensor& x) {
  return map(x, [](double v) { return sigmoid(v); });
}

Tensor tanh(const Tensor& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

Tensor constant(std::size_t rows, std::size_t cols, double c) {
  return Tensor(rows, cols, c);
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor out(rows, cols);
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    p[i] = rng.uniform_open(-bound, bound);
  return out;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  return glorot_uniform(rows, cols, rows, cols, rng);
}

}  // namespace seqclass
