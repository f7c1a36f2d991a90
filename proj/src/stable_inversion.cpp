#include "pwainv/stable_inversion.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "pwainv/error.hpp"

namespace pwainv {

namespace {

lapack_logical inside_unit_circle(const double* re, const double* im) {
  return (*re) * (*re) + (*im) * (*im) < 1.0;
}

struct OrderedSchur {
  Mat T, U;
  int n_s;
};

// Real Schur form with the eigenvalues inside the unit circle leading.
OrderedSchur ordered_schur(const Mat& A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  OrderedSchur s{A, Mat(n, n), 0};
  std::vector<double> wr(n), wi(n);
  lapack_int sdim = 0;
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', inside_unit_circle, n, s.T.data(), n, &sdim,
                                        wr.data(), wi.data(), s.U.data(), n);
  if (info != 0) throw Error(ErrorCode::NotDecouplable, "real Schur decomposition failed (dgees info " + std::to_string(info) + ")", "A9");
  s.n_s = static_cast<int>(sdim);
  return s;
}

// Solves T11 Y - Y T22 = -T12 for quasi-triangular T11, T22.
Mat sylvester_split(const Mat& T, int n_s) {
  const int n = static_cast<int>(T.rows());
  const int n_u = n - n_s;
  Mat T11 = T.topLeftCorner(n_s, n_s);
  Mat T22 = T.bottomRightCorner(n_u, n_u);
  Mat Y = -T.topRightCorner(n_s, n_u);
  double scale = 1.0;
  const lapack_int info =
      LAPACKE_dtrsyl(LAPACK_COL_MAJOR, 'N', 'N', -1, n_s, n_u, T11.data(), n_s, T22.data(), n_u, Y.data(), n_s, &scale);
  if (info < 0) throw Error(ErrorCode::NotDecouplable, "Sylvester solve failed", "A9");
  return Y / scale;
}

std::vector<double> eig_magnitudes(const Mat& A) {
  std::vector<double> mags;
  if (A.rows() == 0) return mags;
  Eigen::EigenSolver<Mat> es(A, false);
  for (Eigen::Index i = 0; i < A.rows(); ++i) mags.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(mags.begin(), mags.end());
  return mags;
}

std::string matrix_bytes(const Mat& A) {
  std::string s(reinterpret_cast<const char*>(A.data()), sizeof(double) * A.size());
  return s;
}

bool is_identity(const Mat& V) { return V.isIdentity(0.0); }

// Inverse matrices at one step, in decoupled coordinates.
struct Transformed {
  int key;
  InverseMatrices m;
  Mat Ass, Auu;
  Vec Bs, Bu, Fs, Fu;
  Eigen::PartialPivLU<Mat> Auu_lu;
};

Transformed transform(const InversePwaModel& inv, const Decoupling& dec, int key, long k) {
  Transformed t;
  t.key = key;
  t.m = inv.matrices(key, k);
  if (is_identity(dec.V)) {
    t.Ass = t.m.Abar.topLeftCorner(dec.n_s, dec.n_s);
    t.Auu = t.m.Abar.bottomRightCorner(dec.n_u, dec.n_u);
    t.Bs = t.m.Bbar.head(dec.n_s);
    t.Bu = t.m.Bbar.tail(dec.n_u);
    t.Fs = t.m.Fbar.head(dec.n_s);
    t.Fu = t.m.Fbar.tail(dec.n_u);
  } else {
    const Mat At = dec.V * t.m.Abar * dec.V_inv;
    const Vec Bt = dec.V * t.m.Bbar;
    const Vec Ft = dec.V * t.m.Fbar;
    t.Ass = At.topLeftCorner(dec.n_s, dec.n_s);
    t.Auu = At.bottomRightCorner(dec.n_u, dec.n_u);
    t.Bs = Bt.head(dec.n_s);
    t.Bu = Bt.tail(dec.n_u);
    t.Fs = Ft.head(dec.n_s);
    t.Fu = Ft.tail(dec.n_u);
  }
  if (dec.n_u > 0) t.Auu_lu.compute(t.Auu);
  return t;
}

Vec compose_state(const Decoupling& dec, const Vec& chi_s, const Vec& chi_u) {
  Vec chi(dec.n_s + dec.n_u);
  chi << chi_s, chi_u;
  if (is_identity(dec.V_inv)) return chi;
  return dec.V_inv * chi;
}

}  // namespace

Decoupling compute_decoupling(const InversePwaModel& inv, std::optional<int> anchor_key, long anchor_k,
                              const DecouplingTolerances& tol) {
  const int n = inv.state_dim();
  Decoupling dec;
  dec.anchor_k = anchor_k;
  dec.anchor_key = anchor_key ? *anchor_key : inv.locate(anchor_k, Vec::Zero(n));
  const Mat A0 = inv.matrices(dec.anchor_key, anchor_k).Abar;

  {
    const std::vector<double> mags = eig_magnitudes(A0);
    double margin = INFINITY;
    for (double m : mags) margin = std::min(margin, std::abs(m - 1.0));
    if (margin < tol.hyperbolicity_margin)
      throw Error(ErrorCode::NonHyperbolic, "anchor state matrix has an eigenvalue on the unit circle", "A9",
                  anchor_k)
          .with("hyperbolicity_margin", margin);
  }

  const OrderedSchur schur = ordered_schur(A0);
  dec.n_s = schur.n_s;
  dec.n_u = n - schur.n_s;
  if (dec.n_s == 0 || dec.n_u == 0) {
    dec.V = Mat::Identity(n, n);
    dec.V_inv = Mat::Identity(n, n);
  } else {
    const Mat Y = sylvester_split(schur.T, dec.n_s);
    Mat Uy = Mat::Identity(n, n);
    Uy.topRightCorner(dec.n_s, dec.n_u) = Y;
    dec.V_inv = schur.U * Uy;
    Mat Um = Mat::Identity(n, n);
    Um.topRightCorner(dec.n_s, dec.n_u) = -Y;
    dec.V = Um * schur.U.transpose();
  }

  // Every key and step must share the block structure.
  std::vector<long> steps{anchor_k};
  if (auto h = inv.horizon())
    for (long k = h->begin; k < h->end; ++k)
      if (k != anchor_k) steps.push_back(k);
  std::unordered_set<std::string> seen;
  for (long k : steps) {
    for (int key = 0; key < inv.key_count(); ++key) {
      const Mat A = inv.matrices(key, k).Abar;
      if (!seen.insert(matrix_bytes(A)).second) continue;
      const Mat T = dec.V * A * dec.V_inv;
      const double scale = std::max(A.norm(), 1e-300);
      const double res = std::max(T.topRightCorner(dec.n_s, dec.n_u).norm(), T.bottomLeftCorner(dec.n_u, dec.n_s).norm()) / scale;
      dec.block_residual = std::max(dec.block_residual, res);
      if (res > tol.block_residual)
        throw Error(ErrorCode::NotDecouplable, "transform of the anchor does not block-diagonalize key " + std::to_string(key), "A9", k)
            .with("block_residual", res);
      const std::vector<double> ms = eig_magnitudes(T.topLeftCorner(dec.n_s, dec.n_s));
      const std::vector<double> mu = eig_magnitudes(T.bottomRightCorner(dec.n_u, dec.n_u));
      for (double m : ms) {
        dec.max_stable_eig = std::max(dec.max_stable_eig, m);
        dec.hyperbolicity_margin = std::min(dec.hyperbolicity_margin, std::abs(m - 1.0));
      }
      for (double m : mu) {
        dec.min_unstable_eig = std::min(dec.min_unstable_eig, m);
        dec.hyperbolicity_margin = std::min(dec.hyperbolicity_margin, std::abs(m - 1.0));
      }
      if (dec.hyperbolicity_margin < tol.hyperbolicity_margin)
        throw Error(ErrorCode::NonHyperbolic, "eigenvalue too close to the unit circle for key " + std::to_string(key), "A9", k)
            .with("hyperbolicity_margin", dec.hyperbolicity_margin);
      if (dec.max_stable_eig >= 1.0 || dec.min_unstable_eig <= 1.0)
        throw Error(ErrorCode::NotDecouplable, "stable and unstable modes swap blocks at key " + std::to_string(key), "A9", k)
            .with("max_stable_eig", dec.max_stable_eig)
            .with("min_unstable_eig", dec.min_unstable_eig);
      if (k == anchor_k && key == dec.anchor_key) {
        dec.stable_eigs = ms;
        dec.unstable_eigs = mu;
      }
    }
  }
  dec.distinct_matrices = seen.size();
  return dec;
}

const char* to_string(SwitchDependencyKind kind) {
  switch (kind) {
    case SwitchDependencyKind::StableModes: return "StableModes";
    case SwitchDependencyKind::UnstableModes: return "UnstableModes";
    case SwitchDependencyKind::Unsupported: return "Unsupported";
  }
  return "Unsupported";
}

SwitchDependency classify_switching(const InversePwaModel& inv, const Decoupling& dec, double tol, long k) {
  SwitchDependency out;
  const Mat R = inv.switching_rows(k);
  out.P_tilde = R * dec.V_inv;
  const double scale = std::max(R.norm() * dec.V_inv.norm(), 1e-300);
  out.stable_block_norm = out.P_tilde.leftCols(dec.n_s).norm() / scale;
  out.unstable_block_norm = out.P_tilde.rightCols(dec.n_u).norm() / scale;
  if (out.unstable_block_norm <= tol) {
    out.kind = SwitchDependencyKind::StableModes;
    out.zero_block_residual = out.unstable_block_norm;
  } else if (out.stable_block_norm <= tol) {
    out.kind = SwitchDependencyKind::UnstableModes;
    out.zero_block_residual = out.stable_block_norm;
  } else {
    out.kind = SwitchDependencyKind::Unsupported;
    out.zero_block_residual = std::min(out.stable_block_norm, out.unstable_block_norm);
  }
  return out;
}

const char* to_string(SelectionCost cost) {
  switch (cost) {
    case SelectionCost::StateJump: return "state-jump";
    case SelectionCost::InputNorm: return "input-norm";
    case SelectionCost::InputJump: return "input-jump";
  }
  return "state-jump";
}

SelectionCost parse_selection_cost(const std::string& text) {
  if (text == "state-jump") return SelectionCost::StateJump;
  if (text == "input-norm") return SelectionCost::InputNorm;
  if (text == "input-jump") return SelectionCost::InputJump;
  throw Error(ErrorCode::Generic, "unknown selection cost '" + text + "'");
}

double force_zero_value(const InversePwaModel& inv, long k, double tol) {
  const int key = inv.locate(k, Vec::Zero(inv.state_dim()));
  const InverseMatrices m = inv.matrices(key, k);
  const double fn = m.Fbar.norm();
  if (fn == 0.0) return 0.0;
  const double bb = m.Bbar.squaredNorm();
  if (bb == 0.0)
    throw Error(ErrorCode::NoForceZeroValue, "input matrix of the inverse vanishes at a pad step", "A8", k);
  const double y = -m.Bbar.dot(m.Fbar) / bb;
  const double residual = (m.Bbar * y + m.Fbar).norm();
  if (residual > tol * std::max(fn, 1.0))
    throw Error(ErrorCode::NoForceZeroValue, "no output value cancels the affine forcing", "A8", k)
        .with("residual", residual);
  return y;
}

Trajectory pad_reference(const InversePwaModel& inv, const Trajectory& r, const StableInversionConfig& cfg) {
  if (cfg.lead_pad < 0 || cfg.trail_pad < 0) throw Error(ErrorCode::Generic, "pad lengths must be non-negative");
  if (r.dim() != 1) throw Error(ErrorCode::DimensionMismatch, "reference must be scalar");
  const long n = r.size();
  Vec out(n + cfg.lead_pad + cfg.trail_pad);
  const long start = r.start_k - cfg.lead_pad;
  const int mu = inv.mu_tilde();
  for (long j = 0; j < out.size(); ++j) {
    const long k = start + j;
    if (r.contains(k)) {
      out(j) = r.scalar_at(k);
    } else if (cfg.pad_mode == PadMode::HoldEndpoints || (inv.horizon() && !inv.horizon()->contains(k - mu))) {
      // Samples the inverse never consumes (before its horizon) also hold the endpoint.
      out(j) = k < r.start_k ? r.samples(0, 0) : r.samples(0, n - 1);
    } else {
      // The sample y_k is consumed by the inverse at step k - mu.
      out(j) = force_zero_value(inv, k - mu, cfg.solve_tolerance);
    }
  }
  return Trajectory::scalar(start, out, r.label);
}

int settling_samples(const Decoupling& dec, double fraction) {
  const double lf = std::log(fraction);
  double n = 1.0;
  if (dec.n_s > 0 && dec.max_stable_eig > 0.0) n = std::max(n, lf / std::log(dec.max_stable_eig));
  if (dec.n_u > 0 && std::isfinite(dec.min_unstable_eig)) n = std::max(n, lf / std::log(1.0 / dec.min_unstable_eig));
  return static_cast<int>(std::ceil(n));
}

namespace {

void fill_report(StableInversionReport& rep, const Decoupling& dec, const std::vector<Transformed>& steps,
                 const Vec& y, const StableInversionResult& res, const StableInversionConfig& cfg, long k0) {
  rep.n_s = dec.n_s;
  rep.n_u = dec.n_u;
  rep.block_residual = dec.block_residual;
  rep.hyperbolicity_margin = dec.hyperbolicity_margin;
  rep.max_stable_eig = dec.max_stable_eig;
  rep.min_unstable_eig = std::isfinite(dec.min_unstable_eig) ? dec.min_unstable_eig : 0.0;
  const long M = y.size();
  rep.chi_u_initial_norm = dec.n_u > 0 ? res.chi_u.col(0).norm() : 0.0;
  rep.chi_s_final_norm = dec.n_s > 0 ? res.chi_s.col(M - 1).norm() : 0.0;
  for (const Transformed& t : steps) {
    rep.sup_abar = std::max(rep.sup_abar, t.m.Abar.norm());
    if (dec.n_u > 0) rep.sup_inverse_abar_u = std::max(rep.sup_inverse_abar_u, t.Auu_lu.inverse().norm());
  }
  rep.forcing_start = (steps.front().m.Bbar * y(0) + steps.front().m.Fbar).norm();
  rep.forcing_end = (steps.back().m.Bbar * y(M - 1) + steps.back().m.Fbar).norm();
  for (long j = 0; j < M; ++j) rep.max_state_norm = std::max(rep.max_state_norm, res.x.samples.col(j).norm());
  rep.lead_pad = cfg.lead_pad;
  rep.trail_pad = cfg.trail_pad;
  if (cfg.require_vanishing_forcing) {
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    if (rep.forcing_start > cfg.forcing_tolerance * scale || rep.forcing_end > cfg.forcing_tolerance * scale)
      throw Error(ErrorCode::AssumptionViolated, "forcing does not vanish at the horizon ends; lengthen the pads", "A8",
                  k0)
          .with("forcing_start", rep.forcing_start)
          .with("forcing_end", rep.forcing_end);
  }
}

void finish_outputs(const InversePwaModel& inv, const Decoupling& dec, const std::vector<Transformed>& steps,
                    const Vec& y, long k0, StableInversionResult& res) {
  const long M = y.size();
  const int n = inv.state_dim();
  Vec u(M);
  Mat x(n, M), delta(inv.partition().rows(), M);
  for (long j = 0; j < M; ++j) {
    const Vec xj = compose_state(dec, res.chi_s.col(j), res.chi_u.col(j));
    x.col(j) = xj;
    const InverseMatrices& m = steps[j].m;
    u(j) = m.Cbar.dot(xj) + m.Dbar * y(j) + m.Gbar;
    const Signature d = localize(xj, inv.partition());
    for (std::size_t i = 0; i < d.size(); ++i) delta(i, j) = d[i];
  }
  res.u = Trajectory::scalar(k0, u, "u");
  res.x = Trajectory(k0, std::move(x), "x");
  res.delta = Trajectory(k0, std::move(delta), "delta");
}

void require_kind(const InversePwaModel& inv, const Decoupling& dec, SwitchDependencyKind want, long k0) {
  const SwitchDependency sd = classify_switching(inv, dec, 1e-9, k0);
  if (sd.kind != want) {
    const bool stable = want == SwitchDependencyKind::StableModes;
    throw Error(ErrorCode::AssumptionViolated,
                std::string("switching is not exclusively dependent on ") + (stable ? "stable" : "unstable") + " modes",
                stable ? "A9a" : "A9b", k0)
        .with("stable_block_norm", sd.stable_block_norm)
        .with("unstable_block_norm", sd.unstable_block_norm);
  }
}

Vec lifted_from(const InversePwaModel& inv, const Trajectory& r) {
  if (r.dim() != 1) throw Error(ErrorCode::DimensionMismatch, "reference must be scalar");
  const int mu = inv.mu_tilde();
  if (r.size() <= mu) throw Error(ErrorCode::DimensionMismatch, "reference shorter than the relative degree");
  return r.row().tail(r.size() - mu);
}

}  // namespace

StableInversionResult stable_invert_lifted(const InversePwaModel& inv, const Decoupling& dec, const Vec& y, long k0,
                                           const StableInversionConfig& cfg) {
  const long M = y.size();
  if (M == 0) throw Error(ErrorCode::DimensionMismatch, "empty reference");
  require_kind(inv, dec, SwitchDependencyKind::StableModes, k0);
  StableInversionResult res;
  res.chi_s = Mat::Zero(dec.n_s, M);
  res.chi_u = Mat::Zero(dec.n_u, M);
  res.keys.resize(M);
  std::vector<Transformed> steps;
  steps.reserve(M);

  // Forward pass: locations follow from the stable modes alone.
  const Vec zero_u = Vec::Zero(dec.n_u);
  for (long j = 0; j < M; ++j) {
    const long k = k0 + j;
    const int key = inv.locate(k, compose_state(dec, res.chi_s.col(j), zero_u));
    steps.push_back(transform(inv, dec, key, k));
    res.keys[j] = key;
    const Transformed& t = steps.back();
    if (j + 1 < M && dec.n_s > 0) res.chi_s.col(j + 1) = t.Ass * res.chi_s.col(j) + t.Bs * y(j) + t.Fs;
  }
  // Backward pass with the location sequence held fixed.
  for (long j = M - 2; j >= 0 && dec.n_u > 0; --j) {
    const Transformed& t = steps[j];
    res.chi_u.col(j) = t.Auu_lu.solve(Vec(res.chi_u.col(j + 1) - t.Bu * y(j) - t.Fu));
  }
  finish_outputs(inv, dec, steps, y, k0, res);
  res.report.switching = "StableModes";
  fill_report(res.report, dec, steps, y, res, cfg, k0);
  return res;
}

StableInversionResult stable_invert(const InversePwaModel& inv, const Decoupling& dec, const Trajectory& r,
                                    const StableInversionConfig& cfg) {
  return stable_invert_lifted(inv, dec, lifted_from(inv, r), r.start_k, cfg);
}

std::vector<BackwardCandidate> backward_step_solve(const InversePwaModel& inv, const Decoupling& dec, long k,
                                                   const Vec& chi_u_next, double y_preview, const Vec& chi_s) {
  std::vector<BackwardCandidate> out;
  const Vec cs = chi_s.size() == dec.n_s ? chi_s : Vec(Vec::Zero(dec.n_s));
  for (int key = 0; key < inv.key_count(); ++key) {
    Transformed t;
    try {
      t = transform(inv, dec, key, k);
    } catch (const Error&) {
      continue;
    }
    const Vec cand = dec.n_u > 0 ? Vec(t.Auu_lu.solve(Vec(chi_u_next - t.Bu * y_preview - t.Fu))) : Vec();
    int located;
    try {
      located = inv.locate(k, compose_state(dec, cs, cand));
    } catch (const Error&) {
      continue;
    }
    if (located == key) out.push_back({key, cand});
  }
  return out;
}

StableInversionResult stable_invert_unstable_switching_lifted(const InversePwaModel& inv, const Decoupling& dec,
                                                              const Vec& y, long k0,
                                                              const StableInversionConfig& cfg) {
  const long M = y.size();
  if (M == 0) throw Error(ErrorCode::DimensionMismatch, "empty reference");
  require_kind(inv, dec, SwitchDependencyKind::UnstableModes, k0);
  if (cfg.selection_cost != SelectionCost::StateJump && dec.n_s > 0)
    throw Error(ErrorCode::Generic, std::string("selection cost ") + to_string(cfg.selection_cost) +
                                        " needs an inverse without stable modes");
  StableInversionResult res;
  res.chi_s = Mat::Zero(dec.n_s, M);
  res.chi_u = Mat::Zero(dec.n_u, M);
  res.keys.resize(M);
  std::vector<Transformed> steps(M);

  const Vec zero_s = Vec::Zero(dec.n_s);
  {
    const long k = k0 + M - 1;
    const int key = inv.locate(k, compose_state(dec, zero_s, res.chi_u.col(M - 1)));
    steps[M - 1] = transform(inv, dec, key, k);
    res.keys[M - 1] = key;
  }
  double u_next = 0.0;
  {
    const Vec x = compose_state(dec, zero_s, res.chi_u.col(M - 1));
    const InverseMatrices& m = steps[M - 1].m;
    u_next = m.Cbar.dot(x) + m.Dbar * y(M - 1) + m.Gbar;
  }
  for (long j = M - 2; j >= 0; --j) {
    const long k = k0 + j;
    const std::vector<BackwardCandidate> cands = backward_step_solve(inv, dec, k, res.chi_u.col(j + 1), y(j));
    if (cands.empty())
      throw Error(ErrorCode::EmptySolutionSet, "no location admits a backward solution", "A9b", k);
    std::size_t best = 0;
    double best_cost = INFINITY, best_u = 0.0;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const InverseMatrices m = inv.matrices(cands[c].key, k);
      const double u = m.Cbar.dot(compose_state(dec, zero_s, cands[c].chi_u)) + m.Dbar * y(j) + m.Gbar;
      double cost = 0.0;
      switch (cfg.selection_cost) {
        case SelectionCost::StateJump: cost = (cands[c].chi_u - res.chi_u.col(j + 1)).norm(); break;
        case SelectionCost::InputNorm: cost = std::abs(u); break;
        case SelectionCost::InputJump: cost = std::abs(u - u_next); break;
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = c;
        best_u = u;
      }
    }
    res.chi_u.col(j) = cands[best].chi_u;
    res.keys[j] = cands[best].key;
    steps[j] = transform(inv, dec, cands[best].key, k);
    u_next = best_u;
  }
  // Forward pass with the location sequence held fixed.
  for (long j = 0; j + 1 < M && dec.n_s > 0; ++j) {
    const Transformed& t = steps[j];
    res.chi_s.col(j + 1) = t.Ass * res.chi_s.col(j) + t.Bs * y(j) + t.Fs;
  }
  finish_outputs(inv, dec, steps, y, k0, res);
  res.report.switching = "UnstableModes";
  fill_report(res.report, dec, steps, y, res, cfg, k0);
  return res;
}

StableInversionResult stable_invert_unstable_switching(const InversePwaModel& inv, const Decoupling& dec,
                                                       const Trajectory& r, const StableInversionConfig& cfg) {
  return stable_invert_unstable_switching_lifted(inv, dec, lifted_from(inv, r), r.start_k, cfg);
}

Mat stable_inverse_jacobian(const InversePwaModel& inv, const Decoupling& dec, const std::vector<int>& keys, long k0) {
  const long M = static_cast<long>(keys.size());
  std::vector<Transformed> steps;
  steps.reserve(M);
  for (long j = 0; j < M; ++j) steps.push_back(transform(inv, dec, keys[j], k0 + j));
  Mat L = Mat::Zero(M, M);
  // Output weights on the decoupled coordinates: Cbar V^-1 = [ws wu].
  std::vector<RowVec> ws(M), wu(M);
  for (long j = 0; j < M; ++j) {
    const RowVec w = is_identity(dec.V_inv) ? steps[j].m.Cbar : RowVec(steps[j].m.Cbar * dec.V_inv);
    ws[j] = w.head(dec.n_s);
    wu[j] = w.tail(dec.n_u);
    L(j, j) += steps[j].m.Dbar;
  }
  if (dec.n_s > 0) {
    Mat S = Mat::Zero(dec.n_s, M);  // d chi^s_j / d y
    for (long j = 0; j < M; ++j) {
      if (j > 0) L.row(j).head(j) += ws[j] * S.leftCols(j);
      if (j + 1 < M) {
        S.leftCols(j + 1) = steps[j].Ass * S.leftCols(j + 1);
        S.col(j) += steps[j].Bs;
      }
    }
  }
  if (dec.n_u > 0) {
    Mat U = Mat::Zero(dec.n_u, M);  // d chi^u_j / d y
    for (long j = M - 2; j >= 0; --j) {
      const long w = M - j;  // columns j .. M-1 are nonzero
      Mat rhs = U.rightCols(w);
      rhs.col(0) -= steps[j].Bu;
      U.rightCols(w) = steps[j].Auu_lu.solve(rhs);
      L.row(j).tail(w) += wu[j] * U.rightCols(w);
    }
  }
  return L;
}

}  // namespace pwainv
