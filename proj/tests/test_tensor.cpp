#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "treelm/rng.hpp"
#include "treelm/tensor.hpp"

using namespace treelm;
using kernels::Exec;

namespace {

Mat<float> random_mat(int rows, int cols, uint64_t seed) {
  SplitMix64 rng(seed);
  Mat<float> m(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.normal());
  return m;
}

void check_bitwise(const Mat<float>& a, const Mat<float>& b) {
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);
  for (size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  Mat<float> a = random_mat(37, 19, 1);
  Mat<float> b = random_mat(19, 23, 2);
  Mat<float> c = random_mat(37, 23, 3);
  Mat<float> d = random_mat(37, 19, 4);

  Mat<float> s, p;
  kernels::matmul(a, b, s, Exec::Serial);
  kernels::matmul(a, b, p, Exec::Parallel);
  check_bitwise(s, p);

  kernels::matmul_nt(a, d, s, Exec::Serial);
  kernels::matmul_nt(a, d, p, Exec::Parallel);
  check_bitwise(s, p);

  kernels::matmul_tn(a, d, s, Exec::Serial);
  kernels::matmul_tn(a, d, p, Exec::Parallel);
  check_bitwise(s, p);

  Mat<float> soft_s = c, soft_p = c;
  kernels::softmax_rows(soft_s, Exec::Serial);
  kernels::softmax_rows(soft_p, Exec::Parallel);
  check_bitwise(soft_s, soft_p);

  kernels::gelu(c, s, Exec::Serial);
  kernels::gelu(c, p, Exec::Parallel);
  check_bitwise(s, p);

  std::vector<float> gain(19, 1.25f), bias(19, -0.5f), mean_s, rstd_s, mean_p, rstd_p;
  Mat<float> ln_s, ln_p;
  kernels::layer_norm(a, gain, bias, ln_s, mean_s, rstd_s, Exec::Serial);
  kernels::layer_norm(a, gain, bias, ln_p, mean_p, rstd_p, Exec::Parallel);
  check_bitwise(ln_s, ln_p);
  REQUIRE(mean_s == mean_p);
  REQUIRE(rstd_s == rstd_p);

  Mat<float> dg_s, dg_p;
  std::vector<float> dgain_s(19, 0.0f), dbias_s(19, 0.0f), dgain_p(19, 0.0f), dbias_p(19, 0.0f);
  kernels::layer_norm_backward(a, gain, mean_s, rstd_s, d, dg_s, dgain_s, dbias_s, Exec::Serial);
  kernels::layer_norm_backward(a, gain, mean_p, rstd_p, d, dg_p, dgain_p, dbias_p, Exec::Parallel);
  check_bitwise(dg_s, dg_p);
  REQUIRE(dgain_s == dgain_p);
  REQUIRE(dbias_s == dbias_p);
}

TEST_CASE("matmul against hand-computed 2x2") {
  Mat<float> a(2, 2), b(2, 2), out;
  a.at(0, 0) = 1; a.at(0, 1) = 2; a.at(1, 0) = 3; a.at(1, 1) = 4;
  b.at(0, 0) = 5; b.at(0, 1) = 6; b.at(1, 0) = 7; b.at(1, 1) = 8;
  kernels::matmul(a, b, out);
  CHECK(out.at(0, 0) == 19);
  CHECK(out.at(0, 1) == 22);
  CHECK(out.at(1, 0) == 43);
  CHECK(out.at(1, 1) == 50);

  kernels::matmul_nt(a, b, out);
  CHECK(out.at(0, 0) == 17);  // [1,2].[5,6]
  CHECK(out.at(0, 1) == 23);  // [1,2].[7,8]

  kernels::matmul_tn(a, b, out);
  CHECK(out.at(0, 0) == 26);  // [1,3].[5,7]
  CHECK(out.at(1, 1) == 44);  // [2,4].[6,8]
}

TEST_CASE("softmax rows sum to one and keep order") {
  Mat<float> m = random_mat(11, 31, 9);
  Mat<float> soft = m;
  kernels::softmax_rows(soft);
  for (int i = 0; i < soft.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < soft.cols; ++j) {
      sum += soft.at(i, j);
      CHECK(soft.at(i, j) > 0.0f);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    // monotone: larger logit, larger probability
    for (int j = 1; j < soft.cols; ++j)
      if (m.at(i, j) > m.at(i, j - 1)) CHECK(soft.at(i, j) > soft.at(i, j - 1));
  }
}

TEST_CASE("gelu matches formula at reference points") {
  Mat<float> x(1, 3), y;
  x.at(0, 0) = 0.0f;
  x.at(0, 1) = 1.0f;
  x.at(0, 2) = -1.0f;
  kernels::gelu(x, y);
  CHECK(y.at(0, 0) == doctest::Approx(0.0));
  CHECK(y.at(0, 1) == doctest::Approx(0.8413447).epsilon(1e-5));
  CHECK(y.at(0, 2) == doctest::Approx(-0.1586553).epsilon(1e-4));
}

TEST_CASE("layer_norm normalizes rows") {
  Mat<float> x = random_mat(7, 33, 12);
  std::vector<float> gain(33, 1.0f), bias(33, 0.0f), mean, rstd;
  Mat<float> y;
  kernels::layer_norm(x, gain, bias, y, mean, rstd);
  for (int i = 0; i < y.rows; ++i) {
    double mu = 0.0, var = 0.0;
    for (int j = 0; j < y.cols; ++j) mu += y.at(i, j);
    mu /= y.cols;
    for (int j = 0; j < y.cols; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
    var /= y.cols;
    CHECK(mu == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}
