#include <doctest.h>

#include <random>

#include "pfr/errors.hpp"
#include "pfr/simplex.hpp"

using namespace pfr;

namespace {

LpStatus status_of(const LinearProgram& lp, const SimplexOptions& opts = {}) {
  try {
    simplex_solve(lp, opts);
  } catch (const LpError& e) {
    return e.status();
  }
  return LpStatus::Optimal;
}

/// max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18; optimum (2, 6).
LinearProgram textbook() {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, kInf, -3.0);
  const auto y = lp.add_variable("y", 0.0, kInf, -5.0);
  lp.add_row("r1", {{x, 1.0}}, Sense::Le, 4.0);
  lp.add_row("r2", {{y, 2.0}}, Sense::Le, 12.0);
  lp.add_row("r3", {{x, 3.0}, {y, 2.0}}, Sense::Le, 18.0);
  return lp;
}

}  // namespace

TEST_SUITE("simplex") {
  TEST_CASE("single lower-bound row") {
    LinearProgram lp;
    const auto x = lp.add_variable("x", 0.0, kInf, 1.0);
    lp.add_row("floor", {{x, 1.0}}, Sense::Ge, 3.0);
    const LpSolution s = simplex_solve(lp);
    CHECK(s.x[0] == doctest::Approx(3.0));
    CHECK(s.objective == doctest::Approx(3.0));
    CHECK(s.row_duals[0] == doctest::Approx(1.0));
    CHECK(check_certificate(lp, s).passes(1e-9));
  }

  TEST_CASE("textbook maximization") {
    const LinearProgram lp = textbook();
    const LpSolution s = simplex_solve(lp);
    CHECK(s.x[0] == doctest::Approx(2.0));
    CHECK(s.x[1] == doctest::Approx(6.0));
    CHECK(s.objective == doctest::Approx(-36.0));
    CHECK(s.row_duals[0] <= 1e-12);
    CHECK(check_certificate(lp, s).passes(1e-9));
  }

  TEST_CASE("free, upper-only and fixed variables") {
    LinearProgram lp;
    const auto x = lp.add_variable("x", -kInf, kInf, 1.0);
    const auto y = lp.add_variable("y", -kInf, 5.0, 2.0);
    const auto z = lp.add_variable("z", 2.0, 2.0, 3.0);
    lp.add_row("a", {{x, 1.0}, {y, 1.0}}, Sense::Ge, 1.0);
    lp.add_row("b", {{x, 1.0}, {y, -1.0}}, Sense::Le, 4.0);
    lp.add_row("c", {{z, 1.0}, {x, 0.0}}, Sense::Eq, 2.0);
    const LpSolution s = simplex_solve(lp);
    CHECK(s.x[x] == doctest::Approx(2.5));
    CHECK(s.x[y] == doctest::Approx(-1.5));
    CHECK(s.x[z] == 2.0);
    CHECK(s.objective == doctest::Approx(5.5));
    CHECK(check_certificate(lp, s).passes(1e-9));
  }

  TEST_CASE("infeasible rows") {
    LinearProgram lp;
    const auto x = lp.add_variable("x", 0.0, kInf);
    const auto y = lp.add_variable("y", 0.0, kInf);
    lp.add_row("lo", {{x, 1.0}, {y, 1.0}}, Sense::Ge, 2.0);
    lp.add_row("hi", {{x, 1.0}, {y, 1.0}}, Sense::Le, 1.0);
    CHECK(status_of(lp) == LpStatus::Infeasible);
  }

  TEST_CASE("crossed bounds are infeasible") {
    LinearProgram lp;
    lp.add_variable("x", 2.0, 1.0);
    CHECK(status_of(lp) == LpStatus::Infeasible);
  }

  TEST_CASE("unbounded objective") {
    LinearProgram lp;
    const auto x = lp.add_variable("x", 0.0, kInf, -1.0);
    const auto y = lp.add_variable("y", 0.0, kInf);
    lp.add_row("r", {{x, 1.0}, {y, -1.0}}, Sense::Le, 1.0);
    CHECK(status_of(lp) == LpStatus::Unbounded);
  }

  TEST_CASE("cycling example terminates at the optimum") {
    LinearProgram lp;
    const auto a = lp.add_variable("a", 0.0, kInf, -0.75);
    const auto b = lp.add_variable("b", 0.0, kInf, 20.0);
    const auto c = lp.add_variable("c", 0.0, kInf, -0.5);
    const auto d = lp.add_variable("d", 0.0, kInf, 6.0);
    lp.add_row("r1", {{a, 0.25}, {b, -8.0}, {c, -1.0}, {d, 9.0}}, Sense::Le, 0.0);
    lp.add_row("r2", {{a, 0.5}, {b, -12.0}, {c, -0.5}, {d, 3.0}}, Sense::Le, 0.0);
    lp.add_row("r3", {{c, 1.0}}, Sense::Le, 1.0);
    SimplexOptions opts;
    opts.degenerate_streak = 1;
    const LpSolution s = simplex_solve(lp, opts);
    CHECK(s.objective == doctest::Approx(-1.25));
    CHECK(check_certificate(lp, s).passes(1e-9));
  }

  TEST_CASE("iteration limit is reported") {
    SimplexOptions opts;
    opts.max_iter = 1;
    CHECK(status_of(textbook(), opts) == LpStatus::IterationLimit);
  }

  TEST_CASE("invalid data is rejected") {
    LinearProgram lp;
    lp.add_variable("x", 0.0, 1.0, std::nan(""));
    CHECK_THROWS_AS(simplex_solve(lp), PreconditionError);
  }

  TEST_CASE("random feasible programs pass the certificate") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
      LinearProgram lp;
      const int n = 6, m = 5;
      Eigen::VectorXd x0(n);
      for (int j = 0; j < n; ++j) {
        x0[j] = u(rng);
        lp.add_variable("x" + std::to_string(j), -2.0, 2.0, u(rng));
      }
      for (int i = 0; i < m; ++i) {
        std::vector<LpTerm> terms;
        double act = 0.0;
        for (int j = 0; j < n; ++j) {
          const double c = u(rng);
          terms.push_back({static_cast<std::size_t>(j), c});
          act += c * x0[j];
        }
        const Sense sense = i % 3 == 0 ? Sense::Le : (i % 3 == 1 ? Sense::Ge : Sense::Eq);
        const double rhs = sense == Sense::Le ? act + 0.1 : (sense == Sense::Ge ? act - 0.1 : act);
        lp.add_row("r" + std::to_string(i), std::move(terms), sense, rhs);
      }
      const LpSolution s = simplex_solve(lp);
      CHECK(check_certificate(lp, s).passes(1e-9));
      CHECK(s.objective <= lp.objective(x0) + 1e-9);
    }
  }

  TEST_CASE("LP text export") {
    const std::string text = textbook().to_lp_format();
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find("Subject To") != std::string::npos);
    CHECK(text.find("r3:") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);
  }
}
