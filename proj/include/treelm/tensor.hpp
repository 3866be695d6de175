#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace treelm {

// Row-major dense matrix.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}

  T* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const T* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  T& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  T at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

namespace kernels {

enum class Exec { Serial, Parallel };

// Process-wide default; tests and the benchmark pass Exec explicitly.
inline std::atomic<Exec>& exec_mode_ref() {
  static std::atomic<Exec> mode{Exec::Parallel};
  return mode;
}
inline Exec exec_mode() { return exec_mode_ref().load(std::memory_order_relaxed); }
inline void set_exec_mode(Exec e) { exec_mode_ref().store(e, std::memory_order_relaxed); }

// All kernels partition work over independent output rows; the per-element
// accumulation order is identical in both modes, so Serial and Parallel
// results are bitwise equal regardless of thread count.

// out = a * b
template <typename T>
void matmul(const Mat<T>& a, const Mat<T>& b, Mat<T>& out, Exec exec = exec_mode()) {
  assert(a.cols == b.rows);
  out = Mat<T>(a.rows, b.cols);
  const int n = a.rows, k = a.cols, m = b.cols;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && n > 1)
  for (int i = 0; i < n; ++i) {
    T* out_row = out.row(i);
    const T* a_row = a.row(i);
    for (int p = 0; p < k; ++p) {
      const T av = a_row[p];
      const T* b_row = b.row(p);
      for (int j = 0; j < m; ++j) out_row[j] += av * b_row[j];
    }
  }
}

// out = a * b^T
template <typename T>
void matmul_nt(const Mat<T>& a, const Mat<T>& b, Mat<T>& out, Exec exec = exec_mode()) {
  assert(a.cols == b.cols);
  out = Mat<T>(a.rows, b.rows);
  const int n = a.rows, k = a.cols, m = b.rows;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && n > 1)
  for (int i = 0; i < n; ++i) {
    const T* a_row = a.row(i);
    T* out_row = out.row(i);
    for (int j = 0; j < m; ++j) {
      const T* b_row = b.row(j);
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      out_row[j] = acc;
    }
  }
}

// out = a^T * b  (a: n x r, b: n x c -> out: r x c)
template <typename T>
void matmul_tn(const Mat<T>& a, const Mat<T>& b, Mat<T>& out, Exec exec = exec_mode()) {
  assert(a.rows == b.rows);
  out = Mat<T>(a.cols, b.cols);
  const int n = a.rows, r = a.cols, c = b.cols;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && r > 1)
  for (int i = 0; i < r; ++i) {
    T* out_row = out.row(i);
    for (int t = 0; t < n; ++t) {
      const T av = a.at(t, i);
      const T* b_row = b.row(t);
      for (int j = 0; j < c; ++j) out_row[j] += av * b_row[j];
    }
  }
}

// out += a^T * b, same shapes as matmul_tn. Used for gradient accumulation.
template <typename T>
void matmul_tn_acc(const Mat<T>& a, const Mat<T>& b, Mat<T>& out, Exec exec = exec_mode()) {
  assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
  const int n = a.rows, r = a.cols, c = b.cols;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && r > 1)
  for (int i = 0; i < r; ++i) {
    T* out_row = out.row(i);
    for (int t = 0; t < n; ++t) {
      const T av = a.at(t, i);
      const T* b_row = b.row(t);
      for (int j = 0; j < c; ++j) out_row[j] += av * b_row[j];
    }
  }
}

template <typename T>
void add_bias(Mat<T>& m, const std::vector<T>& bias, Exec exec = exec_mode()) {
  assert(static_cast<size_t>(m.cols) == bias.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && m.rows > 1)
  for (int i = 0; i < m.rows; ++i) {
    T* row = m.row(i);
    for (int j = 0; j < m.cols; ++j) row[j] += bias[static_cast<size_t>(j)];
  }
}

// In-place row softmax with max subtraction.
template <typename T>
void softmax_rows(Mat<T>& m, Exec exec = exec_mode()) {
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && m.rows > 1)
  for (int i = 0; i < m.rows; ++i) {
    T* row = m.row(i);
    T mx = row[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < m.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const T inv = T(1) / sum;
    for (int j = 0; j < m.cols; ++j) row[j] *= inv;
  }
}

// d_in = (d_out - sum(d_out * y)) * y, rowwise, where y = softmax output.
template <typename T>
void softmax_rows_backward(const Mat<T>& y, const Mat<T>& d_out, Mat<T>& d_in,
                           Exec exec = exec_mode()) {
  d_in = Mat<T>(y.rows, y.cols);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && y.rows > 1)
  for (int i = 0; i < y.rows; ++i) {
    const T* yr = y.row(i);
    const T* dr = d_out.row(i);
    T dot = T(0);
    for (int j = 0; j < y.cols; ++j) dot += yr[j] * dr[j];
    T* out = d_in.row(i);
    for (int j = 0; j < y.cols; ++j) out[j] = (dr[j] - dot) * yr[j];
  }
}

// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
template <typename T>
void gelu(const Mat<T>& in, Mat<T>& out, Exec exec = exec_mode()) {
  out = Mat<T>(in.rows, in.cols);
  constexpr T inv_sqrt2 = T(0.7071067811865475244);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && in.rows > 1)
  for (int i = 0; i < in.rows; ++i) {
    const T* x = in.row(i);
    T* y = out.row(i);
    for (int j = 0; j < in.cols; ++j)
      y[j] = T(0.5) * x[j] * (T(1) + std::erf(x[j] * inv_sqrt2));
  }
}

template <typename T>
void gelu_backward(const Mat<T>& in, const Mat<T>& d_out, Mat<T>& d_in, Exec exec = exec_mode()) {
  d_in = Mat<T>(in.rows, in.cols);
  constexpr T inv_sqrt2 = T(0.7071067811865475244);
  constexpr T inv_sqrt2pi = T(0.3989422804014326779);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && in.rows > 1)
  for (int i = 0; i < in.rows; ++i) {
    const T* x = in.row(i);
    const T* dy = d_out.row(i);
    T* dx = d_in.row(i);
    for (int j = 0; j < in.cols; ++j) {
      const T cdf = T(0.5) * (T(1) + std::erf(x[j] * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[j] * x[j]);
      dx[j] = dy[j] * (cdf + x[j] * pdf);
    }
  }
}

inline constexpr double kLayerNormEps = 1e-5;

// Post-norm layer normalization with per-row cached mean and reciprocal std.
template <typename T>
void layer_norm(const Mat<T>& in, const std::vector<T>& gain, const std::vector<T>& bias,
                Mat<T>& out, std::vector<T>& mean, std::vector<T>& rstd,
                Exec exec = exec_mode()) {
  out = Mat<T>(in.rows, in.cols);
  mean.assign(static_cast<size_t>(in.rows), T(0));
  rstd.assign(static_cast<size_t>(in.rows), T(0));
  const T inv_n = T(1) / T(in.cols);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && in.rows > 1)
  for (int i = 0; i < in.rows; ++i) {
    const T* x = in.row(i);
    T mu = T(0);
    for (int j = 0; j < in.cols; ++j) mu += x[j];
    mu *= inv_n;
    T var = T(0);
    for (int j = 0; j < in.cols; ++j) {
      const T d = x[j] - mu;
      var += d * d;
    }
    var *= inv_n;
    const T rs = T(1) / std::sqrt(var + T(kLayerNormEps));
    mean[static_cast<size_t>(i)] = mu;
    rstd[static_cast<size_t>(i)] = rs;
    T* y = out.row(i);
    for (int j = 0; j < in.cols; ++j)
      y[j] = gain[static_cast<size_t>(j)] * (x[j] - mu) * rs + bias[static_cast<size_t>(j)];
  }
}

// Backward of layer_norm. d_gain/d_bias are accumulated (+=); d_in is written.
template <typename T>
void layer_norm_backward(const Mat<T>& in, const std::vector<T>& gain, const std::vector<T>& mean,
                         const std::vector<T>& rstd, const Mat<T>& d_out, Mat<T>& d_in,
                         std::vector<T>& d_gain, std::vector<T>& d_bias,
                         Exec exec = exec_mode()) {
  d_in = Mat<T>(in.rows, in.cols);
  const T inv_n = T(1) / T(in.cols);
  // Parameter gradients are reductions over rows; accumulate serially in a
  // fixed order so results do not depend on the thread count.
  for (int i = 0; i < in.rows; ++i) {
    const T* x = in.row(i);
    const T* dy = d_out.row(i);
    const T mu = mean[static_cast<size_t>(i)];
    const T rs = rstd[static_cast<size_t>(i)];
    for (int j = 0; j < in.cols; ++j) {
      const T xhat = (x[j] - mu) * rs;
      d_gain[static_cast<size_t>(j)] += dy[j] * xhat;
      d_bias[static_cast<size_t>(j)] += dy[j];
    }
  }
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && in.rows > 1)
  for (int i = 0; i < in.rows; ++i) {
    const T* x = in.row(i);
    const T* dy = d_out.row(i);
    const T mu = mean[static_cast<size_t>(i)];
    const T rs = rstd[static_cast<size_t>(i)];
    T sum_dyg = T(0), sum_dyg_xhat = T(0);
    for (int j = 0; j < in.cols; ++j) {
      const T g = gain[static_cast<size_t>(j)];
      const T xhat = (x[j] - mu) * rs;
      sum_dyg += dy[j] * g;
      sum_dyg_xhat += dy[j] * g * xhat;
    }
    sum_dyg *= inv_n;
    sum_dyg_xhat *= inv_n;
    T* dx = d_in.row(i);
    for (int j = 0; j < in.cols; ++j) {
      const T g = gain[static_cast<size_t>(j)];
      const T xhat = (x[j] - mu) * rs;
      dx[j] = rs * (dy[j] * g - sum_dyg - xhat * sum_dyg_xhat);
    }
  }
}

// Copies columns [begin, end) into a fresh matrix.
template <typename T>
Mat<T> col_block(const Mat<T>& m, int begin, int end) {
  Mat<T> out(m.rows, end - begin);
  for (int i = 0; i < m.rows; ++i) {
    const T* src = m.row(i) + begin;
    T* dst = out.row(i);
    for (int j = 0; j < out.cols; ++j) dst[j] = src[j];
  }
  return out;
}

template <typename T>
void set_col_block(Mat<T>& dst, const Mat<T>& src, int begin) {
  for (int i = 0; i < src.rows; ++i) {
    T* d = dst.row(i) + begin;
    const T* s = src.row(i);
    for (int j = 0; j < src.cols; ++j) d[j] = s[j];
  }
}

template <typename T>
void add_col_block(Mat<T>& dst, const Mat<T>& src, int begin) {
  for (int i = 0; i < src.rows; ++i) {
    T* d = dst.row(i) + begin;
    const T* s = src.row(i);
    for (int j = 0; j < src.cols; ++j) d[j] += s[j];
  }
}

template <typename T>
void scale(Mat<T>& m, T factor) {
  for (T& v : m.data) v *= factor;
}

template <typename T>
void add_inplace(Mat<T>& dst, const Mat<T>& src) {
  assert(dst.rows == src.rows && dst.cols == src.cols);
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace kernels

}  // namespace treelm
