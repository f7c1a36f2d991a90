#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <memory>
#include <random>

#include "pwainv/inversion.hpp"
#include "pwainv/model_io.hpp"
#include "pwainv/pwa.hpp"

namespace fixtures {

using pwainv::LocationMatrices;
using pwainv::Mat;
using pwainv::MatrixSchedule;
using pwainv::Partition;
using pwainv::PwaModel;
using pwainv::RowVec;
using pwainv::Vec;

inline Vec v(std::initializer_list<double> values) {
  Vec out(static_cast<long>(values.size()));
  long i = 0;
  for (double x : values) out(i++) = x;
  return out;
}

inline Mat randn(std::mt19937_64& rng, long r, long c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double spectral_norm(const Mat& m) { return Eigen::JacobiSVD<Mat>(m).singularValues()(0); }

inline Mat scaled_to_norm(const Mat& m, double target) { return m * (target / spectral_norm(m)); }

// Two-location system whose inverse has two solutions at the origin: A_1 = [[0,1],[0,0]],
// A_2 = [[0,2],[0,0]], B = [0,1]^T, C = [1,0], P = [0,1], w = 1.5.
inline PwaModel non_unique_system() {
  LocationMatrices l1, l2;
  l1.A = (Mat(2, 2) << 0, 1, 0, 0).finished();
  l2.A = (Mat(2, 2) << 0, 2, 0, 0).finished();
  for (auto* l : {&l1, &l2}) {
    l->B = (Mat(2, 1) << 0, 1).finished();
    l->C = (Mat(1, 2) << 1, 0).finished();
    l->D = Mat::Zero(1, 1);
    l->F = Vec::Zero(2);
    l->G = Vec::Zero(1);
  }
  Partition part((Mat(1, 2) << 0, 1).finished(), Vec::Constant(1, 1.5), {{{1}}, {{0}}});
  return PwaModel(2, 1, 1, std::move(part), MatrixSchedule::constant({l1, l2}));
}

// Single-location LTI model.
inline PwaModel lti_model(const Mat& A, const Vec& B, const RowVec& C, double D = 0.0) {
  LocationMatrices l;
  l.A = A;
  l.B = B;
  l.C = C;
  l.D = Mat::Constant(1, 1, D);
  l.F = Vec::Zero(A.rows());
  l.G = Vec::Zero(1);
  const long n = A.rows();
  Partition part(Mat::Zero(1, n), Vec::Constant(1, -1.0), {{{1}}});
  return PwaModel(static_cast<int>(n), 1, 1, std::move(part), MatrixSchedule::constant({l}));
}

// Largest spectral norm of the inverse state matrix over keys and steps.
inline double inverse_contraction(const pwainv::InversePwaModel& inv, long k_begin, long k_end) {
  double worst = 0.0;
  for (long k = k_begin; k < k_end; ++k)
    for (int key = 0; key < inv.key_count(); ++key) worst = std::max(worst, spectral_norm(inv.matrices(key, k).Abar));
  return worst;
}

#ifdef PWAINV_TEST_DATA
inline std::string data_path(const std::string& name) { return std::string(PWAINV_TEST_DATA) + "/" + name; }

// Monolithic control model of the printhead benchmark with the default reference.
inline std::shared_ptr<const PwaModel> printhead_model() {
  return pwainv::load_model_file(data_path("printhead_control.json")).model;
}
#endif

struct RandomModel {
  std::shared_ptr<const PwaModel> model;
  int mu = 0;
  bool time_varying = false;
};

// Random SISO model with two locations and relative degree mu whose forward and inverse
// state matrices are contractions at every key, so round trips stay well conditioned.
// A5 holds by construction (shared C, D, G); for mu = 2 the hyperplane is a multiple of
// C (A6) and every B is orthogonal to C.
inline RandomModel random_model(std::mt19937_64& rng, int mu, bool time_varying, long horizon = 200, int n = 3) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    RowVec C = randn(rng, 1, n);
    C /= C.norm();
    const double D = mu == 0 ? uniform(rng, 0.5, 2.0) * (rng() % 2 ? 1.0 : -1.0) : 0.0;
    const double G = uniform(rng, -0.5, 0.5);
    LocationMatrices loc[2];
    RowVec shared_row;
    if (mu == 2) {
      // Common first output-visible direction of C A, orthogonal to C.
      shared_row = randn(rng, 1, n);
      shared_row -= (shared_row.dot(C)) * C;
      shared_row /= shared_row.norm();
    }
    for (auto& l : loc) {
      Mat A = randn(rng, n, n);
      Vec B;
      if (mu == 0) {
        B = randn(rng, n, 1);
      } else if (mu == 1) {
        B = C.transpose() * uniform(rng, 0.7, 1.3) + 0.3 * randn(rng, n, 1);
      } else {
        // C A B must not vanish: align B with (C A)^T.
        const Mat Q = (Mat::Identity(n, n) - C.transpose() * C);
        A = A - C.transpose() * (C * A) + C.transpose() * shared_row * uniform(rng, 0.6, 1.0);
        B = Q * (shared_row.transpose() + 0.3 * randn(rng, n, 1));
      }
      l.A = scaled_to_norm(A, uniform(rng, 0.3, 0.6));
      l.B = B;
      l.C = C;
      l.D = Mat::Constant(1, 1, D);
      l.F = 0.2 * randn(rng, n, 1);
      l.G = Vec::Constant(1, G);
    }
    Mat P;
    Vec w(1);
    if (mu == 2) {
      P = C * uniform(rng, 0.5, 2.0);
    } else {
      P = randn(rng, 1, n);
    }
    w(0) = uniform(rng, -0.2, 0.2);
    Partition part(P, w, {{{1}}, {{0}}});

    MatrixSchedule sched;
    if (time_varying) {
      std::vector<std::vector<LocationMatrices>> steps(2);
      for (int q = 0; q < 2; ++q)
        for (long k = 0; k < horizon; ++k) {
          LocationMatrices m = loc[q];
          m.A *= 1.0 + 0.05 * std::sin(k / 7.0 + q);
          m.F *= std::cos(k / 5.0);
          steps[q].push_back(m);
        }
      sched = MatrixSchedule::tabulated(0, std::move(steps));
    } else {
      sched = MatrixSchedule::constant({loc[0], loc[1]});
    }
    auto model = std::make_shared<const PwaModel>(n, 1, 1, std::move(part), std::move(sched));
    try {
      if (pwainv::global_relative_degree(*model, 0).mu_tilde != mu) continue;
      const pwainv::InversePwaModel inv = pwainv::invert(model, mu, 0);
      const long end = time_varying ? horizon - mu : 1;
      if (inverse_contraction(inv, 0, end) > 0.95) continue;
      // Keep the coefficient that is divided by well away from zero.
      bool weak = false;
      for (int key = 0; key < inv.key_count() && !weak; ++key)
        weak = std::abs(inv.matrices(key, 0).Dbar) > 20.0;
      if (weak) continue;
    } catch (const pwainv::Error&) {
      continue;
    }
    return {model, mu, time_varying};
  }
  throw std::runtime_error("random_model: no admissible model found");
}

}  // namespace fixtures
