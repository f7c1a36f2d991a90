#include <doctest.h>

#include <complex>
#include <random>

#include "fixtures.hpp"
#include "pwainv/error.hpp"
#include "pwainv/inversion.hpp"

using namespace pwainv;
using fixtures::v;

namespace {

using Cplx = std::complex<double>;

Cplx transfer(const Mat& A, const Vec& B, const RowVec& C, double D, Cplx z) {
  const long n = A.rows();
  const Eigen::MatrixXcd M = z * Eigen::MatrixXcd::Identity(n, n) - A.cast<Cplx>();
  const Eigen::VectorXcd s = M.partialPivLu().solve(B.cast<Cplx>());
  return (C.cast<Cplx>() * s)(0) + D;
}

// Scalar location (a, b, c, d) with offsets f, g.
LocationMatrices scalar_location(double a, double b, double c, double d, double f = 0.0, double g = 0.0) {
  return {Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), Vec::Constant(1, f),
          Mat::Constant(1, 1, c), Mat::Constant(1, 1, d), Vec::Constant(1, g)};
}

std::shared_ptr<const PwaModel> one_location(const LocationMatrices& l) {
  const int n = static_cast<int>(l.A.rows());
  return std::make_shared<const PwaModel>(n, 1, 1, Partition(Mat::Zero(1, n), Vec::Constant(1, -1.0), {{{1}}}),
                                          MatrixSchedule::constant({l}));
}

// y = |x_{k+1}| with x_{k+1} = u_k: both half-lines have relative degree 1 but the output
// never goes negative.
std::shared_ptr<const PwaModel> absolute_value_model() {
  return std::make_shared<const PwaModel>(
      1, 1, 1, Partition(Mat::Ones(1, 1), Vec::Zero(1), {{{1}}, {{0}}}),
      MatrixSchedule::constant({scalar_location(0, 1, 1, 0), scalar_location(0, 1, -1, 0)}));
}

double round_trip_error(const fixtures::RandomModel& rm, std::mt19937_64& rng, long N) {
  const PwaModel& m = *rm.model;
  const Vec x0 = 0.5 * fixtures::randn(rng, m.n_x(), 1);
  const Vec u = fixtures::randn(rng, N, 1);
  const SimulationResult fwd = simulate(m, x0, Trajectory::scalar(0, u, "u"));
  const InversePwaModel inv = invert(rm.model, rm.mu, 0);
  const InverseRun back = propagate_inverse(inv, x0, fwd.y);
  return (back.u.row() - u.head(N - rm.mu)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("inversion") {
  TEST_CASE("feedthrough gives relative degree zero") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) {
      const auto m = fixtures::lti_model(fixtures::randn(rng, 3, 3), fixtures::randn(rng, 3, 1),
                                         fixtures::randn(rng, 1, 3), fixtures::uniform(rng, 0.1, 2.0));
      CHECK(component_relative_degree(m, 0, 0) == 0);
    }
  }

  TEST_CASE("non-uniqueness system has relative degree two") {
    const PwaModel m = fixtures::non_unique_system();
    // C B = 0 and C A_q B = q + 1 for both locations.
    for (int q = 0; q < 2; ++q) {
      const LocationMatrices l = m.matrices(q, 0);
      CHECK((l.C * l.B)(0, 0) == 0.0);
      CHECK((l.C * l.A * l.B)(0, 0) == q + 1.0);
      CHECK(component_relative_degree(m, q, 0) == 2);
    }
    const RelativeDegreeReport r = global_relative_degree(m, 0);
    CHECK(r.mu_tilde == 2);
    CHECK(r.mu_c == 2);
  }

  TEST_CASE("LTI relative degree equals the first nonzero Markov parameter") {
    std::mt19937_64 rng(2);
    for (int target = 1; target <= 3; ++target) {
      // Companion-form chain: C A^{j} B = 0 for j < target - 1 by construction.
      const int n = 4;
      Mat A = Mat::Zero(n, n);
      for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
      A.row(n - 1) = 0.3 * fixtures::randn(rng, 1, n);
      Vec B = Vec::Zero(n);
      B(target - 1) = 1.0;
      RowVec C = RowVec::Zero(n);
      C(0) = 1.0;
      int first = -1;
      Vec AjB = B;
      for (int j = 1; j <= 6 && first < 0; ++j, AjB = A * AjB)
        if (std::abs(C.dot(AjB)) > 1e-12) first = j;
      const PwaModel m = fixtures::lti_model(A, B, C);
      CHECK(first == target);
      CHECK(component_relative_degree(m, 0, 0) == first);
      CHECK(global_relative_degree(m, 0).mu_tilde == first);
    }
  }

  TEST_CASE("printhead control model has relative degree one") {
    const auto m = fixtures::printhead_model();
    const RelativeDegreeReport r = global_relative_degree(*m, m->horizon()->begin);
    CHECK(r.mu_tilde == 1);
    CHECK(r.mu_q == std::vector<int>{1, 1});
  }

  TEST_CASE("degree above the cap is reported") {
    const auto m = fixtures::lti_model(Mat::Identity(2, 2), Vec::Zero(2), RowVec::Ones(2));
    CHECK_THROWS_AS(component_relative_degree(m, 0, 0, 3), Error);
  }

  TEST_CASE("unequal component degrees violate A4") {
    const PwaModel m(1, 1, 1, Partition(Mat::Ones(1, 1), Vec::Zero(1), {{{1}}, {{0}}}),
                     MatrixSchedule::constant({scalar_location(0.5, 1, 1, 1), scalar_location(0.5, 1, 1, 0)}));
    try {
      global_relative_degree(m, 0);
      FAIL("expected A4 violation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AssumptionViolated);
      CHECK(e.assumption() == "A4");
    }
  }

  TEST_CASE("global degree is never below a component degree") {
    std::mt19937_64 rng(3);
    for (int mu = 0; mu <= 2; ++mu) {
      const auto rm = fixtures::random_model(rng, mu, false);
      const int global = global_relative_degree(*rm.model, 0).mu_tilde;
      for (int q = 0; q < 2; ++q) {
        // Keep only location q.
        const PwaModel sub(rm.model->n_x(), 1, 1, Partition(Mat::Zero(1, rm.model->n_x()), Vec::Constant(1, -1.0), {{{1}}}),
                           MatrixSchedule::constant({rm.model->matrices(q, 0)}));
        CHECK(global >= global_relative_degree(sub, 0).mu_tilde);
      }
    }
  }

  TEST_CASE("preview base case for mu = 1") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
      const auto rm = fixtures::random_model(rng, 1, true);
      for (long k : {0L, 17L}) {
        for (int q0 = 0; q0 < 2; ++q0)
          for (int q1 = 0; q1 < 2; ++q1) {
            const LocationMatrices a = rm.model->matrices(q0, k), b = rm.model->matrices(q1, k + 1);
            const PreviewCoefficients pc = preview_coefficients(*rm.model, k, {q0, q1});
            CHECK((pc.Ccal - b.C * a.A).norm() == 0.0);
            CHECK(pc.Dcal == (b.C * a.B)(0, 0));
            CHECK(pc.Gcal == doctest::Approx((b.C * a.F)(0) + b.G(0)).epsilon(1e-15));
            CHECK(pc.psi.empty());
          }
      }
    }
  }

  TEST_CASE("preview matches hand expansion for a shift chain") {
    // A = I plus a unit superdiagonal, B = e_2 + e_3, C = e_1.
    Mat A = Mat::Identity(3, 3);
    A(0, 1) = 1.0;
    A(1, 2) = 1.0;
    const Vec B = v({0, 1, 1});
    const RowVec C = v({1, 0, 0}).transpose();
    const auto m = fixtures::lti_model(A, B, C);
    // mu = 2: y_{k+2} = C A^2 x + C A B u_k + C B u_{k+1}.
    const PreviewCoefficients p2 = preview_coefficients(m, 0, {0, 0, 0});
    CHECK(p2.Ccal == (RowVec(3) << 1, 2, 1).finished());
    CHECK(p2.Dcal == 1.0);
    CHECK(p2.psi == std::vector<double>{0.0});
    // mu = 3: y_{k+3} = C A^3 x + C A^2 B u_k + C A B u_{k+1} + C B u_{k+2}.
    const PreviewCoefficients p3 = preview_coefficients(m, 0, {0, 0, 0, 0});
    CHECK(p3.Ccal == (RowVec(3) << 1, 3, 3).finished());
    CHECK(p3.Dcal == 3.0);
    CHECK(p3.psi == std::vector<double>{1.0, 0.0});
  }

  TEST_CASE("non-uniqueness system has a vanishing preview coefficient on u_{k+1}") {
    const PwaModel m = fixtures::non_unique_system();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) CHECK(preview_coefficients(m, 0, {a, b, a}).psi == std::vector<double>{0.0});
  }

  TEST_CASE("scalar degree-zero inverse equals hand formulas") {
    const double a = 0.7, b = -1.3, c = 0.4, d = 2.5, f = 0.1, g = -0.6;
    const InversePwaModel inv = invert_rd0(one_location(scalar_location(a, b, c, d, f, g)));
    const InverseMatrices m = inv.matrices(0, 0);
    CHECK(m.Dbar == doctest::Approx(1 / d));
    CHECK(m.Cbar(0) == doctest::Approx(-c / d));
    CHECK(m.Gbar == doctest::Approx(-g / d));
    CHECK(m.Abar(0, 0) == doctest::Approx(a - b * c / d));
    CHECK(m.Bbar(0) == doctest::Approx(b / d));
    CHECK(m.Fbar(0) == doctest::Approx(f - b * g / d));
  }

  TEST_CASE("pass-through feedthrough inverts to u = y") {
    const Mat A = (Mat(2, 2) << 0.5, 0.1, 0, 0.2).finished();
    LocationMatrices l{A, Mat::Ones(2, 1), Vec::Zero(2), Mat::Zero(1, 2), Mat::Ones(1, 1), Vec::Zero(1)};
    const InversePwaModel inv = invert_rd0(one_location(l));
    CHECK(inv.matrices(0, 0).Abar == A);
    const Vec y = v({1, -2, 3.5, 0.25});
    CHECK(propagate_inverse(inv, Vec::Zero(2), Trajectory::scalar(0, y, "y")).u.row() == y);
  }

  TEST_CASE("unit delay inverts to u_k = y_{k+1}") {
    const InversePwaModel inv = invert_rd1(one_location(scalar_location(0, 1, 1, 0)));
    const Vec y = v({9, 1, -2, 3, 5});
    CHECK(propagate_inverse(inv, Vec::Zero(1), Trajectory::scalar(0, y, "y")).u.row() == y.tail(4));
  }

  TEST_CASE("LTI degree-one inverse is the reciprocal transfer function") {
    std::mt19937_64 rng(6);
    const int n = 3;
    const Mat A = fixtures::scaled_to_norm(fixtures::randn(rng, n, n), 0.8);
    const RowVec C = fixtures::randn(rng, 1, n);
    const Vec B = C.transpose() + 0.2 * fixtures::randn(rng, n, 1);
    const auto m = one_location({A, B, Vec::Zero(n), C, Mat::Zero(1, 1), Vec::Zero(1)});
    const InverseMatrices im = invert_rd1(m).matrices(0, 0);
    for (double w : {0.05, 0.7, 2.0, 3.0}) {
      const Cplx z = std::polar(1.0, w);
      // The inverse consumes y_{k+1}, so its input is z Y(z).
      const Cplx loop = transfer(im.Abar, im.Bbar, im.Cbar, im.Dbar, z) * z * transfer(A, B, C, 0.0, z);
      CHECK(std::abs(loop - 1.0) < 1e-10);
    }
  }

  TEST_CASE("structural identities hold for every key") {
    std::mt19937_64 rng(7);
    for (int mu = 0; mu <= 2; ++mu) {
      const auto rm = fixtures::random_model(rng, mu, true);
      const InversePwaModel inv = invert(rm.model, mu);
      CHECK(inv.key_count() == (mu == 2 ? 4 : 2));
      for (long k : {0L, 50L, 150L})
        for (int key = 0; key < inv.key_count(); ++key) {
          const InverseMatrices im = inv.matrices(key, k);
          const LocationMatrices l = rm.model->matrices(inv.key_locations(key)[0], k);
          CHECK((im.Abar - (l.A + l.B * im.Cbar)).norm() < 1e-14);
          CHECK((im.Bbar - l.B * im.Dbar).norm() < 1e-14);
          CHECK((im.Fbar - (l.F + l.B * im.Gbar)).norm() < 1e-14);
        }
    }
  }

  TEST_CASE("round trip recovers the input for degrees 0, 1 and 2") {
    std::mt19937_64 rng(8);
    for (int mu = 0; mu <= 2; ++mu)
      for (bool tv : {false, true})
        for (int i = 0; i < 5; ++i) {
          const auto rm = fixtures::random_model(rng, mu, tv);
          CHECK(round_trip_error(rm, rng, 200) < 1e-8);
        }
  }

  TEST_CASE("double integrator round trip") {
    const Mat A = (Mat(2, 2) << 1, 1, 0, 1).finished();
    const auto m = one_location({A, v({0, 1}), Vec::Zero(2), v({1, 0}).transpose(), Mat::Zero(1, 1), Vec::Zero(1)});
    CHECK(global_relative_degree(*m, 0).mu_tilde == 2);
    const Vec u = v({1, -1, 0.5, 2, 0, -3, 1, 1});
    const SimulationResult fwd = simulate(*m, Vec::Zero(2), Trajectory::scalar(0, u, "u"));
    const InverseRun back = propagate_inverse(invert_rd2(m), Vec::Zero(2), fwd.y);
    CHECK((back.u.row() - u.head(6)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("degree-two selector at k+1 does not depend on u_k") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 10; ++i) {
      const auto rm = fixtures::random_model(rng, 2, false);
      CHECK(check_assumptions(*rm.model).passes("A6"));
      for (int j = 0; j < 20; ++j) {
        const Vec x = fixtures::randn(rng, rm.model->n_x(), 1);
        const Vec x1a = rm.model->step(0, x, v({0.0}));
        const Vec x1b = rm.model->step(0, x, v({fixtures::uniform(rng, -10, 10)}));
        CHECK(localize(x1a, rm.model->partition()) == localize(x1b, rm.model->partition()));
      }
    }
  }

  TEST_CASE("wrong degree requests are rejected") {
    const auto m = fixtures::printhead_model();
    const long k0 = m->horizon()->begin;
    for (int d : {0, 2, 3}) {
      try {
        invert(m, d, k0);
        FAIL("expected WrongDegree");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::WrongDegree);
      }
    }
    CHECK(invert(m, -1, k0).mu_tilde() == 1);
  }

  TEST_CASE("degree-one inverse requires A5") {
    const PwaModel m(1, 1, 1, Partition(Mat::Ones(1, 1), Vec::Zero(1), {{{1}}, {{0}}}),
                     MatrixSchedule::constant({scalar_location(0.5, 1, 1, 0), scalar_location(0.5, 1, 2, 0)}));
    try {
      invert_rd1(std::make_shared<const PwaModel>(m));
      FAIL("expected A5 violation");
    } catch (const Error& e) {
      CHECK(e.assumption() == "A5");
    }
    CHECK_FALSE(check_assumptions(m).passes("A5"));
  }

  TEST_CASE("implicit inverse of the non-uniqueness system returns both inputs") {
    const PwaModel m = fixtures::non_unique_system();
    CHECK(enumerate_implicit_solutions(m, 0, Vec::Zero(2), 2.0, {0.0}) == std::vector<double>{1.0, 2.0});
  }

  TEST_CASE("implicit solution matches the explicit degree-one inverse") {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 10; ++i) {
      const auto rm = fixtures::random_model(rng, 1, false);
      const InversePwaModel inv = invert(rm.model, 1);
      const Vec x = fixtures::randn(rng, rm.model->n_x(), 1);
      const double y = fixtures::uniform(rng, -1, 1);
      const InverseRun run = propagate_inverse(inv, x, Trajectory::scalar(0, v({0.0, y}), "y"));
      const std::vector<double> sols = enumerate_implicit_solutions(*rm.model, 0, x, y);
      REQUIRE(sols.size() == 1);
      CHECK(sols[0] == doctest::Approx(run.u.scalar_at(0)).epsilon(1e-10));
    }
  }

  TEST_CASE("unreachable target gives EmptySolutionSet") {
    const auto m = absolute_value_model();
    // Grid oracle: y_{k+1} = |u| never goes below zero.
    double lowest = INFINITY;
    for (double u = -5; u <= 5; u += 0.01)
      lowest = std::min(lowest, m->output(1, m->step(0, Vec::Zero(1), v({u})), v({0}))(0));
    CHECK(lowest >= 0.0);
    try {
      enumerate_implicit_solutions(*m, 0, Vec::Zero(1), -1.0);
      FAIL("expected EmptySolutionSet");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySolutionSet);
    }
    CHECK(enumerate_implicit_solutions(*m, 0, Vec::Zero(1), 2.0) == std::vector<double>{-2.0, 2.0});
  }

  TEST_CASE("printhead model passes A2 to A5") {
    const auto m = fixtures::printhead_model();
    AssumptionOptions opt;
    opt.anchor_k = m->horizon()->begin;
    const AssumptionReport r = check_assumptions(*m, opt);
    for (const char* id : {"A2", "A3", "A4", "A5"}) CHECK_MESSAGE(r.passes(id), id);
  }

  TEST_CASE("A6 residual on an output-switched model") {
    std::mt19937_64 rng(12);
    const auto rm = fixtures::random_model(rng, 2, false);
    const AssumptionReport r = check_assumptions(*rm.model);
    REQUIRE(r.find("A6"));
    CHECK(r.find("A6")->evidence < 1e-10);
    // P = Po C and w = wo - Po G.
    const LocationMatrices l = rm.model->matrices(0, 0);
    CHECK((rm.model->partition().P() - r.Po * l.C).norm() < 1e-10);
    CHECK((rm.model->partition().w() - (r.wo - r.Po * l.G)).norm() < 1e-12);
  }
}
