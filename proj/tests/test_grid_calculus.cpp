#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "spectv/grid_calculus.hpp"

using namespace spectv;

TEST_CASE("grad matches the explicit difference matrix and div is its negative transpose") {
  for (auto [h, w] : {std::pair{1, 7}, {5, 1}, {4, 6}, {9, 9}}) {
    const int n = h * w;
    const auto g = oracle::gradient_matrix(h, w);
    const Image u = testing::random_image(h, w, 1, 100 + n);
    const auto gu = oracle::multiply(g, u.data(), 2 * n);
    const VectorField2 p = grad(u);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(p.x[i] - (gu[i])) <= 1e-15);
      CHECK(std::abs(p.y[i] - (gu[n + i])) <= 1e-15);
    }
    VectorField2 q(h, w);
    std::mt19937 rng(7 + n);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int i = 0; i < n; ++i) {
      q.x[i] = d(rng);
      q.y[i] = d(rng);
    }
    std::vector<double> stacked(q.x);
    stacked.insert(stacked.end(), q.y.begin(), q.y.end());
    const auto gtq = oracle::multiply_transpose(g, stacked, n);
    const Image dq = div(q);
    for (int i = 0; i < n; ++i) CHECK(dq.data()[i] == doctest::Approx(-gtq[i]).epsilon(1e-14));
  }
}

TEST_CASE("TV agrees with the definition") {
  const Image u = testing::random_image(13, 17, 2, 11);
  CHECK(tv_value(u) == doctest::Approx(oracle::tv(u)).epsilon(1e-13));
  CHECK(tv_value(Image(4, 4, 1, 3.0)) == 0.0);
}

TEST_CASE("TV of an interior s x s square is 4s - 2 + sqrt(2)") {
  // Forward differences see the top and left edges at the pixels outside the
  // square, the bottom and right edges at the pixels inside it; the corner
  // inside the square at the bottom right has both differences and counts sqrt(2).
  for (int s : {1, 2, 4, 7}) {
    Image u(s + 6, s + 6, 1);
    for (int y = 3; y < 3 + s; ++y) {
      for (int x = 3; x < 3 + s; ++x) u.at(0, y, x) = 1.0;
    }
    CHECK(tv_value(u) == doctest::Approx(oracle::tv(u)).epsilon(1e-15));
    CHECK(tv_value(u) == doctest::Approx(4.0 * s - 2.0 + std::sqrt(2.0)));
  }
}

TEST_CASE("grad of a column ramp and TV homogeneity") {
  Image u(5, 6, 1);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) u.at(0, y, x) = x;
  }
  const VectorField2 g = grad(u);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      CHECK(g.x[y * 6 + x] == (x < 5 ? 1.0 : 0.0));
      CHECK(g.y[y * 6 + x] == 0.0);
    }
  }
  const Image r = testing::random_image(9, 8, 1, 21);
  CHECK(tv_value(-2.5 * r) == doctest::Approx(2.5 * tv_value(r)).epsilon(1e-14));
  Image shifted = r;
  for (double& v : shifted.data()) v += 3.0;
  CHECK(tv_value(shifted) == doctest::Approx(tv_value(r)).epsilon(1e-13));
  const Image dgc = div(grad(Image(4, 4, 1, 2.0)));
  for (double v : dgc.data()) CHECK(v == 0.0);
}

TEST_CASE("Dirichlet energy") {
  const Image u = testing::random_image(6, 5, 1, 12);
  const VectorField2 g = grad(u);
  CHECK(dirichlet_energy(u) == doctest::Approx(inner(g, g)).epsilon(1e-14));
}

TEST_CASE("constrained Laplace solve matches a dense direct solve") {
  const int h = 12, w = 10, n = h * w;
  std::vector<int> fixed(n, 0);
  std::vector<double> value(n, 0.0);
  std::vector<PixelConstraint> cons;
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> py(0, h - 1), px(0, w - 1);
  std::uniform_real_distribution<double> val(-3, 3);
  while (cons.size() < 6) {
    const int y = py(rng), x = px(rng);
    if (fixed[y * w + x]) continue;
    const double v = val(rng);
    fixed[y * w + x] = 1;
    value[y * w + x] = v;
    cons.push_back({y, x, v});
  }
  LaplaceOptions o;
  o.tol = 1e-13;
  LaplaceReport rep;
  const Image sol = laplace_solve_with_constraints({h, w}, cons, o, &rep);
  CHECK(rep.converged);
  const auto ref = oracle::dense_constrained_laplace(h, w, fixed, value);
  for (int i = 0; i < n; ++i) CHECK(std::abs(sol.data()[i] - (ref[i])) <= 1e-9);
  for (const auto& c : cons) CHECK(sol.at(0, c.y, c.x) == c.value);
}

TEST_CASE("constrained Laplace solve closed forms") {
  const Image c = laplace_solve_with_constraints({7, 5}, {{2, 3, 1.75}});
  for (double v : c.data()) CHECK(v == doctest::Approx(1.75));
  // Two ends of a strip give a linear ramp.
  const Image ramp = laplace_solve_with_constraints({1, 9}, {{0, 0, 0.0}, {0, 8, 1.0}});
  for (int x = 0; x < 9; ++x) CHECK(ramp.at(0, 0, x) == doctest::Approx(x / 8.0).epsilon(1e-9));
  // Affine data on the whole border ring leaves only interior pixels free,
  // where the 5-point Laplacian of an affine function vanishes.
  std::vector<PixelConstraint> ring;
  const int n = 16;
  auto affine = [](int y, int x) { return 0.3 * x - 0.7 * y + 2.0; };
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (y == 0 || x == 0 || y == n - 1 || x == n - 1) ring.push_back({y, x, affine(y, x)});
    }
  }
  LaplaceOptions o;
  o.tol = 1e-12;
  const Image a = laplace_solve_with_constraints({n, n}, ring, o);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) CHECK(std::abs(a.at(0, y, x) - (affine(y, x))) <= 1e-6);
  }
}

TEST_CASE("constrained minimizer is not improved by feasible perturbations") {
  const std::vector<PixelConstraint> cons{{1, 1, 0.0}, {6, 2, 1.0}, {3, 7, -2.0}};
  LaplaceOptions o;
  o.tol = 1e-12;
  const Image w = laplace_solve_with_constraints({8, 9}, cons, o);
  const double e0 = dirichlet_energy(w);
  for (unsigned seed = 0; seed < 10; ++seed) {
    Image pert = testing::random_image(8, 9, 1, 300 + seed, -1e-2, 1e-2);
    for (const auto& c : cons) pert.at(0, c.y, c.x) = 0.0;
    CHECK(dirichlet_energy(w + pert) >= e0);
  }
}

TEST_CASE("constrained Laplace solve rejects bad constraints") {
  CHECK_THROWS(laplace_solve_with_constraints({3, 3}, {}));
  CHECK_THROWS(laplace_solve_with_constraints({3, 3}, {{1, 1, 0.0}, {1, 1, 1.0}}));
}
