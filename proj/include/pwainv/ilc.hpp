#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pwainv/stable_inversion.hpp"

namespace pwainv {

struct FilterPair {
  Mat Q;  // exchange-conjugated zero-phase filter, J F J F
  Mat E;  // diagonal edge mask
  Mat F;  // lower-triangular Toeplitz matrix of the impulse response
  int n_edge = 0;
};

// Exchange (anti-identity) matrix of order n.
Mat exchange_matrix(long n);
Mat lower_toeplitz(const Vec& impulse_response);
// `impulse_response` has length N - mu + 1.
FilterPair build_filters(const Vec& impulse_response, int n_edge, long N, int mu);

// Impulse response of b z (z + 1) / (z^2 + a1 z + a2), scaled to unit DC gain if requested.
Vec lowpass_impulse_response(double a1, double a2, double b, long length, bool unit_dc_gain = true);

double nrmse(const Vec& r, const Vec& y);
double peak_error(const Vec& r, const Vec& y);

// Jacobian of the stable-inverse map y -> u with the switching frozen at y_measured.
// y_measured holds y_{k0+mu} .. y_{k0+mu+M-1}.
Mat ililc_learning_matrix(const InversePwaModel& inv, const Decoupling& dec, const Vec& y_measured, long k0 = 0,
                          const StableInversionConfig& cfg = {});
// Jacobian of the lifted forward map u -> (y_{k0+mu} .. y_{k0+mu+M-1}) with the switching
// frozen along the simulation of u_current from x0.
Mat lifted_jacobian(const PwaModel& model, const Vec& x0, const Vec& u_current, int mu, long k0 = 0);
Mat gradient_learning_matrix(const PwaModel& model, const Vec& x0, const Vec& u_current, int mu, double gamma,
                             long k0 = 0);
Mat ptype_learning_matrix(double gamma, long size);

// u_{l+1} = E Q (u_l + L (r - Q y_l))
Vec ilc_iterate(const Vec& u, const Vec& y, const Vec& r, const Mat& L, const FilterPair& filters);

enum class IlcScheme { Ililc, Gradient, PType };
const char* to_string(IlcScheme scheme);
IlcScheme parse_scheme(const std::string& text);

struct TrialRecord {
  int trial = 0;
  Vec u;
  Vec y;
  double nrmse = 0.0;
  double peak = 0.0;
};

struct IlcSession {
  IlcScheme scheme = IlcScheme::Ililc;
  double gain = 1.0;
  FilterPair filters;
  // Maps a lifted input to the lifted measured output; `trial` selects noise realizations.
  std::function<Vec(const Vec& u, int trial)> plant;
  // Learning matrix for the data of the current trial, before scaling by `gain`.
  std::function<Mat(const Vec& u, const Vec& y)> learning_matrix;
  std::vector<TrialRecord> history;
};

const std::vector<TrialRecord>& run_trials(IlcSession& session, const Vec& r, int n_trials);
bool nrmse_non_increasing(const std::vector<TrialRecord>& history);

}  // namespace pwainv
