#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "ldn/losses.hpp"
#include "ldn/rng.hpp"

namespace {

ldn::Matrix random_rows(std::size_t r, std::size_t c, std::uint64_t seed,
                        const char* label = "test/loss-rows") {
  ldn::SeededRng rng(seed, label);
  ldn::Matrix m(r, c);
  for (double& v : m.data) v = rng.gaussian();
  return m;
}

// Normwise relative error between a central finite-difference gradient and
// the analytic one.
double fd_rel_error(const std::function<double(const ldn::Matrix&)>& f,
                    const ldn::Matrix& point, const ldn::Matrix& analytic,
                    double h = 1e-5) {
  ldn::Matrix fd(point.rows, point.cols);
  ldn::Matrix p = point;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double keep = p.data[i];
    p.data[i] = keep + h;
    const double up = f(p);
    p.data[i] = keep - h;
    const double dn = f(p);
    p.data[i] = keep;
    fd.data[i] = (up - dn) / (2.0 * h);
  }
  double num = 0.0, a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < fd.data.size(); ++i) {
    const double d = fd.data[i] - analytic.data[i];
    num += d * d;
    a += fd.data[i] * fd.data[i];
    b += analytic.data[i] * analytic.data[i];
  }
  return std::sqrt(num) / std::max({std::sqrt(a), std::sqrt(b), 1e-12});
}

}  // namespace

TEST_CASE("similarity_matrix is symmetric with a unit diagonal and matches cosine") {
  auto f = random_rows(5, 4, 31);
  auto s = ldn::similarity_matrix(f);
  REQUIRE(s.rows == 5);
  REQUIRE(s.cols == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s.at(i, i) == 1.0);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(s.at(i, j) == s.at(j, i));
      CHECK(s.at(i, j) >= -1.0);
      CHECK(s.at(i, j) <= 1.0);
      if (i != j)
        CHECK(s.at(i, j) ==
              Catch::Approx(ldn::cosine(f.row_copy(i), f.row_copy(j))).margin(1e-12));
    }
  }
  ldn::Matrix zero_row(2, 3);
  zero_row.at(0, 0) = 1.0;
  CHECK_THROWS(ldn::similarity_matrix(zero_row));
}

TEST_CASE("loss_rec is zero on aligned rows and matches a direct case") {
  auto y = random_rows(4, 6, 7);
  auto same = ldn::loss_rec(y, y);
  CHECK(same.value == Catch::Approx(0.0).margin(1e-15));

  // positive rescaling of rows changes nothing after normalisation
  ldn::Matrix scaled = y;
  for (std::size_t c = 0; c < scaled.cols; ++c) scaled.at(2, c) *= 7.3;
  CHECK(ldn::loss_rec(scaled, y).value == Catch::Approx(0.0).margin(1e-12));

  // orthogonal unit rows: ||(1,0)-(0,1)||^2 = 2 per row
  ldn::Matrix yhat(2, 2), tgt(2, 2);
  yhat.at(0, 0) = 1.0;
  yhat.at(1, 1) = 1.0;
  tgt.at(0, 1) = 1.0;
  tgt.at(1, 0) = 1.0;
  CHECK(ldn::loss_rec(yhat, tgt).value == Catch::Approx(2.0).margin(1e-14));
}

TEST_CASE("latent losses are invariant to positive row rescaling") {
  auto yhat = random_rows(5, 7, 11);
  auto y = random_rows(5, 7, 12);
  const double rec0 = ldn::loss_rec(yhat, y).value;
  const double rel0 = ldn::loss_rel(yhat, y, 0.10).value;
  const double con0 = ldn::loss_con(yhat, y, 0.07).value;

  ldn::Matrix s = yhat;
  for (std::size_t c = 0; c < s.cols; ++c) {
    s.at(1, c) *= 7.3;
    s.at(3, c) *= 0.002;
  }
  CHECK(std::abs(ldn::loss_rec(s, y).value - rec0) <= 1e-9);
  CHECK(std::abs(ldn::loss_rel(s, y, 0.10).value - rel0) <= 1e-9);
  CHECK(std::abs(ldn::loss_con(s, y, 0.07).value - con0) <= 1e-9);
}

TEST_CASE("loss_rel is non-negative, exact zero at the teacher, degenerate below two rows") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto yhat = random_rows(4, 5, seed, "rel-pos-a");
    auto y = random_rows(4, 5, seed + 100, "rel-pos-b");
    CHECK(ldn::loss_rel(yhat, y, 0.10).value >= 0.0);
  }
  auto y = random_rows(5, 4, 21);
  auto at_teacher = ldn::loss_rel(y, y, 0.10);
  CHECK(at_teacher.value == 0.0);
  for (double g : at_teacher.grad.data) CHECK(g == 0.0);

  auto one = ldn::loss_rel(random_rows(1, 4, 3), random_rows(1, 4, 4), 0.10);
  CHECK(one.value == 0.0);
  CHECK(one.degenerate);
  auto zero = ldn::loss_rel(ldn::Matrix(0, 4), ldn::Matrix(0, 4), 0.10);
  CHECK(zero.value == 0.0);
  CHECK_FALSE(zero.degenerate);
}

TEST_CASE("loss_con matches the closed form on orthogonal pairs") {
  // yhat = y = identity rows: positive cosine 1, negative cosine 0.
  ldn::Matrix y(2, 2);
  y.at(0, 0) = 1.0;
  y.at(1, 1) = 1.0;
  const double temp = 0.07;
  const long double z = std::exp((long double)(1.0 / temp)) + 1.0L;
  const long double oracle = -(1.0L / temp) + std::log(z);
  auto got = ldn::loss_con(y, y, temp);
  // absolute tolerance: the value comes from a cancellation of two O(1/temp)
  // terms, so a few ulps of 1/temp is the honest bound
  CHECK(got.value == Catch::Approx(static_cast<double>(oracle)).margin(1e-13));

  // a single corrupted position has nothing to contrast against
  auto single = ldn::loss_con(random_rows(1, 5, 5), random_rows(1, 5, 6), temp);
  CHECK(single.value == 0.0);
  for (double g : single.grad.data) CHECK(g == 0.0);
}

TEST_CASE("loss_con falls as the decoded row rotates toward its target") {
  ldn::Matrix y(2, 2);
  y.at(0, 0) = 1.0;
  y.at(1, 1) = 1.0;
  double prev = 1e9;
  for (int step = 0; step < 5; ++step) {
    const double theta = (80.0 - 20.0 * step) * 3.14159265358979323846 / 180.0;
    ldn::Matrix yhat(2, 2);
    yhat.at(0, 0) = std::cos(theta);
    yhat.at(0, 1) = std::sin(theta);
    yhat.at(1, 1) = 1.0;
    const double v = ldn::loss_con(yhat, y, 0.07).value;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const double kTol = 1e-5;
  int cases = 0;
  for (std::size_t n : {2u, 3u, 5u}) {
    for (std::size_t d : {3u, 7u}) {
      const std::uint64_t seed = 1000 + n * 10 + d;
      auto yhat = random_rows(n, d, seed, "fd-yhat");
      auto y = random_rows(n, d, seed + 1, "fd-y");

      auto rec = ldn::loss_rec(yhat, y);
      CHECK(fd_rel_error([&](const ldn::Matrix& p) { return ldn::loss_rec(p, y).value; },
                         yhat, rec.grad) < kTol);

      auto rel = ldn::loss_rel(yhat, y, 0.10);
      CHECK(fd_rel_error(
                [&](const ldn::Matrix& p) { return ldn::loss_rel(p, y, 0.10).value; },
                yhat, rel.grad) < kTol);

      auto con = ldn::loss_con(yhat, y, 0.07);
      CHECK(fd_rel_error(
                [&](const ldn::Matrix& p) { return ldn::loss_con(p, y, 0.07).value; },
                yhat, con.grad) < kTol);
      ++cases;
    }
  }
  CHECK(cases == 6);
}

TEST_CASE("gradient steps descend each latent loss") {
  auto yhat = random_rows(4, 6, 77, "descent-a");
  auto y = random_rows(4, 6, 78, "descent-b");
  auto step = [](const ldn::Matrix& p, const ldn::Matrix& g, double eta) {
    ldn::Matrix out = p;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= eta * g.data[i];
    return out;
  };
  auto rec = ldn::loss_rec(yhat, y);
  CHECK(ldn::loss_rec(step(yhat, rec.grad, 1e-3), y).value < rec.value);
  auto rel = ldn::loss_rel(yhat, y, 0.10);
  CHECK(ldn::loss_rel(step(yhat, rel.grad, 1e-3), y, 0.10).value < rel.value);
  auto con = ldn::loss_con(yhat, y, 0.07);
  CHECK(ldn::loss_con(step(yhat, con.grad, 1e-3), y, 0.07).value < con.value);
}

TEST_CASE("empty corrupted sets score zero without error") {
  ldn::Matrix empty(0, 5);
  CHECK(ldn::loss_rec(empty, empty).value == 0.0);
  CHECK(ldn::loss_rel(empty, empty, 0.1).value == 0.0);
  CHECK(ldn::loss_con(empty, empty, 0.07).value == 0.0);
}

TEST_CASE("losses validate shapes, norms, and temperatures") {
  auto a = random_rows(3, 4, 50);
  auto b = random_rows(4, 4, 51);
  CHECK_THROWS(ldn::loss_rec(a, b));
  CHECK_THROWS(ldn::loss_rel(a, b, 0.1));
  CHECK_THROWS(ldn::loss_con(a, b, 0.07));
  auto c = random_rows(3, 4, 52);
  CHECK_THROWS(ldn::loss_rel(a, c, 0.0));
  CHECK_THROWS(ldn::loss_con(a, c, -1.0));
  ldn::Matrix with_zero = a;
  for (std::size_t col = 0; col < with_zero.cols; ++col) with_zero.at(1, col) = 0.0;
  CHECK_THROWS(ldn::loss_rec(with_zero, c));
}

TEST_CASE("total_objective recomposes exactly and validates") {
  ldn::AuxLossValues aux{0.5, 0.25, 0.125};
  ldn::LossWeights w;
  auto b = ldn::total_objective(2.0, aux, w, 0.5);
  CHECK(b.total == 2.0 + 0.5 * (w.rec * 0.5 + w.rel * 0.25 + w.con * 0.125));
  CHECK(b.lang == 2.0);
  CHECK(b.whd == 0.5);

  // whd = 0 silences every auxiliary term
  auto quiet = ldn::total_objective(2.0, aux, w, 0.0);
  CHECK(quiet.total == 2.0);

  CHECK_THROWS(ldn::total_objective(std::nan(""), aux, w, 0.5));
  CHECK_THROWS(ldn::total_objective(1.0, aux, w, 1.5));
  ldn::LossWeights neg;
  neg.rec = -0.1;
  CHECK_THROWS(ldn::total_objective(1.0, aux, neg, 0.5));
}
