// Compares the serial reference kernels against the OpenMP-parallel ones and
// verifies that both produce bitwise-identical results.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "treelm/rng.hpp"
#include "treelm/tensor.hpp"

using namespace treelm;
using kernels::Exec;

namespace {

Mat<float> random_mat(int rows, int cols, SplitMix64& rng) {
  Mat<float> m(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.normal());
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bitwise_equal(const Mat<float>& a, const Mat<float>& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::max(1, std::atoi(argv[1]));
  std::printf("threads=%d reps=%d\n", omp_get_max_threads(), reps);
  std::printf("%-28s %10s %10s %8s %6s\n", "kernel", "serial-ms", "omp-ms", "speedup", "equal");

  SplitMix64 rng(42);
  struct Case {
    std::string name;
    int n, k, m;
  };
  const std::vector<Case> sizes = {{"small (seq=128,d=64)", 128, 64, 64},
                                   {"medium (seq=512,d=64)", 512, 64, 64},
                                   {"wide (seq=512,ffn=256)", 512, 64, 256},
                                   {"logits (sel=64,|W|=4096)", 64, 64, 4096}};

  for (const auto& c : sizes) {
    Mat<float> a = random_mat(c.n, c.k, rng);
    Mat<float> b = random_mat(c.k, c.m, rng);
    Mat<float> out_s, out_p;
    const double ts = time_ms([&] { kernels::matmul(a, b, out_s, Exec::Serial); }, reps);
    const double tp = time_ms([&] { kernels::matmul(a, b, out_p, Exec::Parallel); }, reps);
    std::printf("matmul %-21s %10.3f %10.3f %7.2fx %6s\n", c.name.c_str(), ts, tp, ts / tp,
                bitwise_equal(out_s, out_p) ? "yes" : "NO");
  }

  {
    Mat<float> a = random_mat(512, 64, rng);
    Mat<float> b = random_mat(512, 64, rng);
    Mat<float> out_s, out_p;
    const double ts = time_ms([&] { kernels::matmul_nt(a, b, out_s, Exec::Serial); }, reps);
    const double tp = time_ms([&] { kernels::matmul_nt(a, b, out_p, Exec::Parallel); }, reps);
    std::printf("matmul_nt %-18s %10.3f %10.3f %7.2fx %6s\n", "(512x64 . t)", ts, tp, ts / tp,
                bitwise_equal(out_s, out_p) ? "yes" : "NO");
  }
  {
    Mat<float> a = random_mat(512, 64, rng);
    Mat<float> b = random_mat(512, 256, rng);
    Mat<float> out_s, out_p;
    const double ts = time_ms([&] { kernels::matmul_tn(a, b, out_s, Exec::Serial); }, reps);
    const double tp = time_ms([&] { kernels::matmul_tn(a, b, out_p, Exec::Parallel); }, reps);
    std::printf("matmul_tn %-18s %10.3f %10.3f %7.2fx %6s\n", "(t . 512x256)", ts, tp, ts / tp,
                bitwise_equal(out_s, out_p) ? "yes" : "NO");
  }
  {
    Mat<float> x = random_mat(512, 512, rng);
    Mat<float> s = x, p = x;
    const double ts = time_ms(
        [&] {
          s = x;
          kernels::softmax_rows(s, Exec::Serial);
        },
        reps);
    const double tp = time_ms(
        [&] {
          p = x;
          kernels::softmax_rows(p, Exec::Parallel);
        },
        reps);
    std::printf("softmax_rows %-15s %10.3f %10.3f %7.2fx %6s\n", "(512x512)", ts, tp, ts / tp,
                bitwise_equal(s, p) ? "yes" : "NO");
  }
  {
    Mat<float> x = random_mat(512, 64, rng);
    std::vector<float> gain(64, 1.0f), bias(64, 0.0f), mean, rstd;
    Mat<float> out_s, out_p;
    const double ts =
        time_ms([&] { kernels::layer_norm(x, gain, bias, out_s, mean, rstd, Exec::Serial); }, reps);
    const double tp = time_ms(
        [&] { kernels::layer_norm(x, gain, bias, out_p, mean, rstd, Exec::Parallel); }, reps);
    std::printf("layer_norm %-17s %10.3f %10.3f %7.2fx %6s\n", "(512x64)", ts, tp, ts / tp,
                bitwise_equal(out_s, out_p) ? "yes" : "NO");
  }
  {
    Mat<float> x = random_mat(512, 256, rng);
    Mat<float> out_s, out_p;
    const double ts = time_ms([&] { kernels::gelu(x, out_s, Exec::Serial); }, reps);
    const double tp = time_ms([&] { kernels::gelu(x, out_p, Exec::Parallel); }, reps);
    std::printf("gelu %-23s %10.3f %10.3f %7.2fx %6s\n", "(512x256)", ts, tp, ts / tp,
                bitwise_equal(out_s, out_p) ? "yes" : "NO");
  }
  return 0;
}
