#include "pwainv/ilc.hpp"

#include <cmath>

#include "pwainv/error.hpp"

namespace pwainv {

Mat exchange_matrix(long n) { return Mat::Identity(n, n).rowwise().reverse(); }

Mat lower_toeplitz(const Vec& h) {
  const long n = h.size();
  Mat F = Mat::Zero(n, n);
  for (long d = 0; d < n; ++d) F.diagonal(-d).setConstant(h(d));
  return F;
}

FilterPair build_filters(const Vec& impulse_response, int n_edge, long N, int mu) {
  const long M = N - mu + 1;
  if (impulse_response.size() != M)
    throw Error(ErrorCode::DimensionMismatch, "impulse response has length " + std::to_string(impulse_response.size()) +
                                                  ", lifted size is " + std::to_string(M));
  if (n_edge < 0 || 2L * n_edge > M) throw Error(ErrorCode::DimensionMismatch, "edge length does not fit the horizon");
  FilterPair f;
  f.n_edge = n_edge;
  f.F = lower_toeplitz(impulse_response);
  // J F J reverses both axes of F.
  f.Q = f.F.reverse() * f.F;
  f.E = Mat::Identity(M, M);
  for (long i = 0; i < n_edge; ++i) {
    f.E(i, i) = 0.0;
    f.E(M - 1 - i, M - 1 - i) = 0.0;
  }
  return f;
}

Vec lowpass_impulse_response(double a1, double a2, double b, long length, bool unit_dc_gain) {
  Vec h = Vec::Zero(length);
  for (long k = 0; k < length; ++k) {
    double v = b * ((k == 0 ? 1.0 : 0.0) + (k == 1 ? 1.0 : 0.0));
    if (k >= 1) v -= a1 * h(k - 1);
    if (k >= 2) v -= a2 * h(k - 2);
    h(k) = v;
  }
  if (unit_dc_gain) {
    const double dc = 2.0 * b / (1.0 + a1 + a2);
    if (dc == 0.0) throw Error(ErrorCode::Generic, "lowpass filter has zero DC gain");
    h /= dc;
  }
  return h;
}

double nrmse(const Vec& r, const Vec& y) {
  if (r.size() != y.size() || r.size() == 0) throw Error(ErrorCode::DimensionMismatch, "nrmse needs equal, non-empty signals");
  const double peak = r.cwiseAbs().maxCoeff();
  if (peak == 0.0) throw Error(ErrorCode::Generic, "nrmse is undefined for an identically zero reference");
  return (r - y).norm() / (std::sqrt(static_cast<double>(r.size())) * peak);
}

double peak_error(const Vec& r, const Vec& y) {
  if (r.size() != y.size() || r.size() == 0) throw Error(ErrorCode::DimensionMismatch, "peak_error needs equal, non-empty signals");
  return (r - y).cwiseAbs().maxCoeff();
}

Mat ililc_learning_matrix(const InversePwaModel& inv, const Decoupling& dec, const Vec& y_measured, long k0,
                          const StableInversionConfig& cfg) {
  const StableInversionResult run = stable_invert_lifted(inv, dec, y_measured, k0, cfg);
  return stable_inverse_jacobian(inv, dec, run.keys, k0);
}

Mat lifted_jacobian(const PwaModel& model, const Vec& x0, const Vec& u_current, int mu, long k0) {
  if (!model.siso()) throw Error(ErrorCode::AssumptionViolated, "lifted Jacobian needs a SISO model", "A2");
  const long M = u_current.size();
  const long steps = M + mu;
  // Frozen switching sequence from the nominal run.
  std::vector<LocationMatrices> mats;
  mats.reserve(steps);
  Vec x = x0;
  for (long t = 0; t < steps; ++t) {
    const long k = k0 + t;
    const int q = model.locate(x, k);
    mats.push_back(model.matrices(q, k));
    const double u = t < M ? u_current(t) : 0.0;
    x = mats.back().A * x + mats.back().B.col(0) * u + mats.back().F;
  }
  Mat J = Mat::Zero(M, M);
  for (long j = 0; j < M; ++j) {
    // Row i of J is y at step mu + i.
    if (mu == 0) J(j, j) = mats[j].D(0, 0);
    Vec s = mats[j].B.col(0);
    for (long t = j + 1; t < steps; ++t) {
      const long i = t - mu;
      if (i >= 0 && i < M) J(i, j) = mats[t].C.row(0).dot(s);
      s = mats[t].A * s;
    }
  }
  return J;
}

Mat gradient_learning_matrix(const PwaModel& model, const Vec& x0, const Vec& u_current, int mu, double gamma,
                             long k0) {
  return gamma * lifted_jacobian(model, x0, u_current, mu, k0).transpose();
}

Mat ptype_learning_matrix(double gamma, long size) { return gamma * Mat::Identity(size, size); }

Vec ilc_iterate(const Vec& u, const Vec& y, const Vec& r, const Mat& L, const FilterPair& filters) {
  const long M = u.size();
  if (y.size() != M || r.size() != M || L.rows() != M || L.cols() != M || filters.Q.rows() != M)
    throw Error(ErrorCode::DimensionMismatch, "ILC signals and matrices must share the lifted size");
  const Vec e = r - filters.Q * y;
  const Vec v = filters.Q * (u + L * e);
  return filters.E.diagonal().cwiseProduct(v);
}

const char* to_string(IlcScheme scheme) {
  switch (scheme) {
    case IlcScheme::Ililc: return "ililc";
    case IlcScheme::Gradient: return "gradient";
    case IlcScheme::PType: return "ptype";
  }
  return "ililc";
}

IlcScheme parse_scheme(const std::string& text) {
  if (text == "ililc") return IlcScheme::Ililc;
  if (text == "gradient") return IlcScheme::Gradient;
  if (text == "ptype" || text == "p-type") return IlcScheme::PType;
  throw Error(ErrorCode::Generic, "unknown ILC scheme '" + text + "'");
}

const std::vector<TrialRecord>& run_trials(IlcSession& session, const Vec& r, int n_trials) {
  if (!session.plant) throw Error(ErrorCode::Generic, "ILC session has no plant executor");
  if (n_trials > 1 && !session.learning_matrix) throw Error(ErrorCode::Generic, "ILC session has no learning matrix");
  session.history.clear();
  Vec u = Vec::Zero(r.size());
  for (int trial = 0; trial < n_trials; ++trial) {
    Vec y;
    try {
      y = session.plant(u, trial);
    } catch (const Error& e) {
      throw Error(e.code(), "trial " + std::to_string(trial) + ": " + e.message(), e.assumption(), e.step());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::Generic, "trial " + std::to_string(trial) + ": " + e.what());
    }
    if (y.size() != r.size()) throw Error(ErrorCode::DimensionMismatch, "plant output has the wrong lifted size");
    TrialRecord rec{trial, u, y, nrmse(r, y), peak_error(r, y)};
    if (!std::isfinite(rec.nrmse)) throw Error(ErrorCode::Generic, "trial " + std::to_string(trial) + " diverged");
    session.history.push_back(std::move(rec));
    if (trial + 1 == n_trials) break;
    const Mat L = session.gain * session.learning_matrix(u, y);
    u = ilc_iterate(u, y, r, L, session.filters);
  }
  return session.history;
}

bool nrmse_non_increasing(const std::vector<TrialRecord>& history) {
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].nrmse > history[i - 1].nrmse) return false;
  return true;
}

}  // namespace pwainv
