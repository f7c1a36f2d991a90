#include "pwainv/inversion.hpp"

#include <algorithm>
#include <cmath>

#include "pwainv/error.hpp"

namespace pwainv {

namespace {

void require_siso(const PwaModel& model) {
  if (!model.siso())
    throw Error(ErrorCode::AssumptionViolated,
                "model has " + std::to_string(model.n_u()) + " inputs and " + std::to_string(model.n_y()) + " outputs",
                "A2");
}

bool nonzero(double value, double scale) { return std::abs(value) > kNonzeroTolerance * scale; }

// Advance a base-|Q| counter; returns false after the last sequence.
bool next_sequence(std::vector<int>& seq, int base, std::size_t first = 0) {
  for (std::size_t i = seq.size(); i-- > first;) {
    if (++seq[i] < base) return true;
    seq[i] = 0;
  }
  return false;
}

struct Markov {
  double value;
  double scale;
};

// C_{q_m,k+m} A_{q_{m-1},k+m-1} ... A_{q_1,k+1} B_{q_0,k}, or D_{q_0,k} for m = 0.
Markov markov_along(const PwaModel& model, long k, const std::vector<int>& seq) {
  const int m = static_cast<int>(seq.size()) - 1;
  const LocationMatrices first = model.matrices(seq[0], k);
  if (m == 0) {
    const double scale = std::max(first.C.norm() * first.B.norm(), std::abs(first.D(0, 0)));
    return {first.D(0, 0), scale};
  }
  Vec v = first.B.col(0);
  double scale = first.B.norm();
  for (int j = 1; j < m; ++j) {
    const Mat A = model.matrices(seq[j], k + j).A;
    v = A * v;
    scale *= A.norm();
  }
  const Mat C = model.matrices(seq[m], k + m).C;
  return {C.row(0).dot(v), scale * C.norm()};
}

}  // namespace

int component_relative_degree(const PwaModel& model, int q, long k, int cap) {
  require_siso(model);
  for (int m = 0; m <= cap; ++m) {
    const Markov c = markov_along(model, k, std::vector<int>(m + 1, q));
    if (nonzero(c.value, c.scale)) return m;
  }
  throw Error(ErrorCode::DegreeExceedsCap,
              "location " + std::to_string(q) + " has no nonzero Markov parameter up to " + std::to_string(cap), {}, k);
}

RelativeDegreeReport global_relative_degree(const PwaModel& model, long k, int cap) {
  require_siso(model);
  RelativeDegreeReport report;
  for (int q = 0; q < model.locations(); ++q) report.mu_q.push_back(component_relative_degree(model, q, k, cap));
  if (std::adjacent_find(report.mu_q.begin(), report.mu_q.end(), std::not_equal_to<>()) != report.mu_q.end())
    throw Error(ErrorCode::AssumptionViolated, "component relative degrees differ between locations", "A4", k);
  report.mu_c = report.mu_q.front();

  const int nq = model.locations();
  for (int m = 0; m <= cap; ++m) {
    std::vector<int> seq(m + 1, 0);
    bool all_nonzero = true;
    SequenceWitness weakest{m, {}, 0.0};
    double weakest_ratio = INFINITY;
    do {
      const Markov c = markov_along(model, k, seq);
      if (!nonzero(c.value, c.scale)) {
        all_nonzero = false;
        report.witnesses.push_back({m, seq, c.value});
        break;
      }
      const double ratio = std::abs(c.value) / c.scale;
      if (ratio < weakest_ratio) {
        weakest_ratio = ratio;
        weakest = {m, seq, c.value};
      }
    } while (next_sequence(seq, nq));
    if (all_nonzero) {
      report.mu_tilde = m;
      report.witnesses.push_back(weakest);
      return report;
    }
  }
  throw Error(ErrorCode::DegreeExceedsCap, "global relative degree exceeds cap " + std::to_string(cap), {}, k);
}

PreviewCoefficients preview_coefficients(const PwaModel& model, long k, const std::vector<int>& locations) {
  require_siso(model);
  if (locations.empty()) throw Error(ErrorCode::DimensionMismatch, "location sequence is empty");
  const int mu = static_cast<int>(locations.size()) - 1;
  std::vector<LocationMatrices> mats;
  for (int j = 0; j <= mu; ++j) mats.push_back(model.matrices(locations[j], k + j));
  const RowVec C = mats[mu].C.row(0);

  // left[s] = C_{k+mu} A_{k+mu-1} ... A_{k+s}; left[mu] = C_{k+mu}.
  std::vector<RowVec> left(mu + 1);
  left[mu] = C;
  for (int s = mu - 1; s >= 0; --s) left[s] = left[s + 1] * mats[s].A;

  PreviewCoefficients pc;
  pc.Ccal = left[0];
  pc.Dcal = mu == 0 ? mats[0].D(0, 0) : left[1].dot(mats[0].B.col(0));
  double g = mats[mu].G(0);
  for (int s = 0; s < mu; ++s) g += left[s + 1].dot(mats[s].F);
  pc.Gcal = g;
  for (int s = 1; s < mu; ++s) pc.psi.push_back(left[s + 1].dot(mats[s].B.col(0)));
  return pc;
}

InversePwaModel::InversePwaModel(std::shared_ptr<const PwaModel> source, int mu_tilde)
    : source_(std::move(source)), mu_(mu_tilde) {
  if (!source_) throw Error(ErrorCode::InvalidModel, "inverse needs a source model");
  require_siso(*source_);
  if (mu_ < 0 || mu_ > 2) throw Error(ErrorCode::WrongDegree, "explicit inverses exist for degrees 0, 1 and 2 only");
}

int InversePwaModel::key_count() const {
  const int nq = source_->locations();
  return mu_ == 2 ? nq * nq : nq;
}

std::vector<int> InversePwaModel::key_locations(int key) const {
  const int nq = source_->locations();
  if (mu_ == 2) return {key / nq, key % nq};
  return {key};
}

std::optional<Horizon> InversePwaModel::horizon() const {
  auto h = source_->horizon();
  if (!h) return std::nullopt;
  return Horizon{h->begin, h->end - mu_};
}

int InversePwaModel::locate(long k, const Vec& x) const {
  const int q = source_->locate(x, k);
  if (mu_ < 2) return q;
  // P B_q = 0 under output-based switching, so x_{k+1}'s location does not depend on u_k.
  const LocationMatrices m = source_->matrices(q, k);
  const int q1 = source_->locate(m.A * x + m.F, k + 1);
  return q * source_->locations() + q1;
}

InverseMatrices InversePwaModel::matrices(int key, long k) const {
  const std::vector<int> qs = key_locations(key);
  const LocationMatrices m = source_->matrices(qs[0], k);
  const Vec B = m.B.col(0);
  InverseMatrices inv;
  double Dcal;
  RowVec Ccal;
  double Gcal;
  if (mu_ == 0) {
    Dcal = m.D(0, 0);
    Ccal = m.C.row(0);
    Gcal = m.G(0);
  } else if (mu_ == 1) {
    const LocationMatrices n1 = source_->matrices(qs[0], k + 1);
    const RowVec C1 = n1.C.row(0);
    Dcal = C1.dot(B);
    Ccal = C1 * m.A;
    Gcal = C1.dot(m.F) + n1.G(0);
  } else {
    const LocationMatrices m1 = source_->matrices(qs[1], k + 1);
    const LocationMatrices n2 = source_->matrices(qs[1], k + 2);
    const RowVec CA = n2.C.row(0) * m1.A;
    Dcal = CA.dot(B);
    Ccal = CA * m.A;
    Gcal = CA.dot(m.F) + n2.C.row(0).dot(m1.F) + n2.G(0);
  }
  if (Dcal == 0.0) throw Error(ErrorCode::WrongDegree, "preview coefficient vanishes", {}, k);
  inv.Dbar = 1.0 / Dcal;
  inv.Cbar = -inv.Dbar * Ccal;
  inv.Gbar = -inv.Dbar * Gcal;
  inv.Abar = m.A + B * inv.Cbar;
  inv.Bbar = B * inv.Dbar;
  inv.Fbar = m.F + B * inv.Gbar;
  return inv;
}

Mat InversePwaModel::switching_rows(long k) const {
  const Mat& P = source_->partition().P();
  if (mu_ < 2) return P;
  const int nq = source_->locations();
  Mat rows(P.rows() * (nq + 1), P.cols());
  rows.topRows(P.rows()) = P;
  for (int q = 0; q < nq; ++q) rows.middleRows(P.rows() * (q + 1), P.rows()) = P * source_->matrices(q, k).A;
  return rows;
}

namespace {

// Spot time steps for checks that must hold across the horizon.
std::vector<long> spot_steps(const PwaModel& model, long anchor, int lookahead) {
  std::vector<long> ks{anchor};
  if (auto h = model.horizon()) {
    const long last = h->end - 1 - lookahead;
    const long mid = (anchor + last) / 2;
    for (long k : {mid, last})
      if (k > anchor && std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }
  return ks;
}

double a5_deviation(const PwaModel& model, long k) {
  const LocationMatrices ref = model.matrices(0, k);
  const double scale = ref.C.norm() + ref.D.norm() + ref.G.norm();
  double dev = 0.0;
  for (int q = 1; q < model.locations(); ++q) {
    const LocationMatrices m = model.matrices(q, k);
    dev = std::max(dev, (m.C - ref.C).norm() + (m.D - ref.D).norm() + (m.G - ref.G).norm());
  }
  return scale > 0.0 ? dev / scale : dev;
}

struct A6Fit {
  Mat Po;
  Vec wo;
  double residual;
};

A6Fit a6_fit(const PwaModel& model, long k) {
  const LocationMatrices m = model.matrices(0, k);
  const Mat& P = model.partition().P();
  const RowVec C = m.C.row(0);
  const double cc = C.squaredNorm();
  A6Fit fit;
  fit.Po = cc > 0.0 ? Mat(P * C.transpose() / cc) : Mat::Zero(P.rows(), 1);
  const double scale = std::max(P.norm(), 1e-300);
  fit.residual = (P - fit.Po * C).norm() / scale;
  fit.wo = model.partition().w() + fit.Po * m.G;
  return fit;
}

void require_a5(const PwaModel& model, long anchor, int lookahead) {
  for (long k : spot_steps(model, anchor, lookahead)) {
    const double dev = a5_deviation(model, k);
    if (dev > 1e-12)
      throw Error(ErrorCode::AssumptionViolated, "output matrices differ between locations", "A5", k)
          .with("relative_deviation", dev);
  }
}

void require_degree(const PwaModel& model, long anchor, int expected) {
  for (long k : spot_steps(model, anchor, expected + 1)) {
    const int mu = global_relative_degree(model, k).mu_tilde;
    if (k == anchor && mu != expected)
      throw Error(ErrorCode::WrongDegree,
                  "global relative degree is " + std::to_string(mu) + ", expected " + std::to_string(expected), {}, k);
    if (mu != expected)
      throw Error(ErrorCode::AssumptionViolated, "relative degree changes along the horizon", "A4", k);
  }
}

}  // namespace

InversePwaModel invert_rd0(std::shared_ptr<const PwaModel> model, long anchor_k) {
  require_siso(*model);
  require_degree(*model, anchor_k, 0);
  return InversePwaModel(std::move(model), 0);
}

InversePwaModel invert_rd1(std::shared_ptr<const PwaModel> model, long anchor_k) {
  require_siso(*model);
  require_degree(*model, anchor_k, 1);
  require_a5(*model, anchor_k, 1);
  return InversePwaModel(std::move(model), 1);
}

InversePwaModel invert_rd2(std::shared_ptr<const PwaModel> model, long anchor_k) {
  require_siso(*model);
  require_degree(*model, anchor_k, 2);
  require_a5(*model, anchor_k, 2);
  for (long k : spot_steps(*model, anchor_k, 2)) {
    const A6Fit fit = a6_fit(*model, k);
    if (fit.residual > 1e-10)
      throw Error(ErrorCode::AssumptionViolated, "partition is not a function of the output", "A6", k)
          .with("factorization_residual", fit.residual);
  }
  {
    // Output matrices must not vary in time for the output-threshold factorization.
    const Mat C0 = model->matrices(0, anchor_k).C;
    for (long k : spot_steps(*model, anchor_k, 2)) {
      const double dev = (model->matrices(0, k).C - C0).norm() / std::max(C0.norm(), 1e-300);
      if (dev > 1e-12)
        throw Error(ErrorCode::AssumptionViolated, "output matrix varies in time", "A6", k).with("deviation", dev);
    }
  }
  return InversePwaModel(std::move(model), 2);
}

InversePwaModel invert(std::shared_ptr<const PwaModel> model, int degree, long anchor_k) {
  if (degree < 0) degree = global_relative_degree(*model, anchor_k).mu_tilde;
  switch (degree) {
    case 0: return invert_rd0(std::move(model), anchor_k);
    case 1: return invert_rd1(std::move(model), anchor_k);
    case 2: return invert_rd2(std::move(model), anchor_k);
    default:
      throw Error(ErrorCode::WrongDegree, "no explicit inverse for relative degree " + std::to_string(degree), {},
                  anchor_k);
  }
}

InverseRun propagate_inverse(const InversePwaModel& inv, const Vec& x0, const Trajectory& y) {
  const int mu = inv.mu_tilde();
  const long n = y.size() - mu;
  if (n <= 0) throw Error(ErrorCode::DimensionMismatch, "output trajectory shorter than the relative degree");
  if (x0.size() != inv.state_dim()) throw Error(ErrorCode::DimensionMismatch, "x0 has wrong dimension");
  Vec u(n);
  Mat x(inv.state_dim(), n + 1);
  std::vector<int> keys(n);
  x.col(0) = x0;
  for (long j = 0; j < n; ++j) {
    const long k = y.start_k + j;
    const Vec xk = x.col(j);
    const int key = inv.locate(k, xk);
    const InverseMatrices m = inv.matrices(key, k);
    const double yk = y.samples(0, j + mu);
    u(j) = m.Cbar.dot(xk) + m.Dbar * yk + m.Gbar;
    x.col(j + 1) = m.Abar * xk + m.Bbar * yk + m.Fbar;
    keys[j] = key;
  }
  return {Trajectory::scalar(y.start_k, u, "u"), Trajectory(y.start_k, std::move(x), "x"), std::move(keys)};
}

std::vector<double> enumerate_implicit_solutions(const PwaModel& model, long k, const Vec& x, double y_target,
                                                 const std::vector<double>& future_u, std::optional<int> mu_opt) {
  require_siso(model);
  const int mu = mu_opt ? *mu_opt : global_relative_degree(model, k).mu_tilde;
  if (mu > 0 && static_cast<int>(future_u.size()) < mu - 1)
    throw Error(ErrorCode::DimensionMismatch, "future inputs must cover u_{k+1} .. u_{k+mu-1}");
  const int q0 = model.locate(x, k);
  const double tol = 1e-9 * std::max(1.0, std::abs(y_target));
  std::vector<double> found;

  std::vector<int> seq(mu + 1, 0);
  seq[0] = q0;
  do {
    const PreviewCoefficients pc = preview_coefficients(model, k, seq);
    if (pc.Dcal == 0.0) continue;
    double rhs = y_target - pc.Ccal.dot(x) - pc.Gcal;
    for (int s = 1; s < mu; ++s) rhs -= pc.psi[s - 1] * future_u[s - 1];
    const double u = rhs / pc.Dcal;

    // Re-simulate and keep the candidate only if it induces the assumed switching.
    bool consistent = true;
    Vec xs = x;
    for (int j = 0; j < mu && consistent; ++j) {
      const LocationMatrices m = model.matrices(seq[j], k + j);
      const double uj = j == 0 ? u : future_u[j - 1];
      xs = m.A * xs + m.B.col(0) * uj + m.F;
      try {
        consistent = model.locate(xs) == seq[j + 1];
      } catch (const Error&) {
        consistent = false;
      }
    }
    if (!consistent) continue;
    const LocationMatrices last = model.matrices(seq[mu], k + mu);
    const double y = last.C.row(0).dot(xs) + last.G(0) + (mu == 0 ? last.D(0, 0) * u : 0.0);
    if (std::abs(y - y_target) > tol) continue;
    if (std::none_of(found.begin(), found.end(), [&](double v) { return std::abs(v - u) <= 1e-12 * std::max(1.0, std::abs(u)); }))
      found.push_back(u);
  } while (next_sequence(seq, model.locations(), 1));

  if (found.empty())
    throw Error(ErrorCode::EmptySolutionSet, "no input reaches the target output", {}, k).with("y_target", y_target);
  std::sort(found.begin(), found.end());
  return found;
}

const AssumptionVerdict* AssumptionReport::find(const std::string& id) const {
  for (const auto& v : verdicts)
    if (v.id == id) return &v;
  return nullptr;
}

bool AssumptionReport::passes(const std::string& id) const {
  const AssumptionVerdict* v = find(id);
  return v && v->pass;
}

AssumptionReport check_assumptions(const PwaModel& model, const AssumptionOptions& options) {
  AssumptionReport report;
  const long k0 = options.anchor_k;
  const bool siso = model.siso();
  report.verdicts.push_back({"A2", siso, static_cast<double>(model.n_u() + model.n_y()),
                             "n_u=" + std::to_string(model.n_u()) + ", n_y=" + std::to_string(model.n_y())});
  report.verdicts.push_back({"A3", true, 0.0, "switching surfaces act on the state only"});
  if (!siso) {
    for (const char* id : {"A4", "A5", "A6"}) report.verdicts.push_back({id, false, 0.0, "requires a SISO model"});
    return report;
  }

  // A4: equal component relative degrees, stable along the horizon.
  try {
    std::vector<int> mus;
    for (int q = 0; q < model.locations(); ++q) mus.push_back(component_relative_degree(model, q, k0, options.cap));
    const auto [lo, hi] = std::minmax_element(mus.begin(), mus.end());
    bool pass = *lo == *hi;
    std::string detail = "mu_q =";
    for (int m : mus) detail += " " + std::to_string(m);
    if (pass) {
      report.degrees = global_relative_degree(model, k0, options.cap);
      for (long k : spot_steps(model, k0, report.degrees->mu_tilde + 1)) {
        if (global_relative_degree(model, k, options.cap).mu_tilde != report.degrees->mu_tilde) {
          pass = false;
          detail += "; relative degree changes at k=" + std::to_string(k);
        }
      }
      detail += "; mu_tilde = " + std::to_string(report.degrees->mu_tilde);
    }
    report.verdicts.push_back({"A4", pass, static_cast<double>(*hi - *lo), detail});
  } catch (const Error& e) {
    report.verdicts.push_back({"A4", false, 0.0, e.what()});
  }

  const int lookahead = report.degrees ? report.degrees->mu_tilde : 0;
  try {
    double dev = 0.0;
    for (long k : spot_steps(model, k0, lookahead)) dev = std::max(dev, a5_deviation(model, k));
    report.verdicts.push_back({"A5", dev <= options.a5_tolerance, dev, "relative spread of C, D, G across locations"});
  } catch (const Error& e) {
    report.verdicts.push_back({"A5", false, 0.0, e.what()});
  }

  try {
    double res = 0.0;
    A6Fit fit = a6_fit(model, k0);
    const Mat C0 = model.matrices(0, k0).C;
    for (long k : spot_steps(model, k0, lookahead)) {
      res = std::max(res, a6_fit(model, k).residual);
      res = std::max(res, (model.matrices(0, k).C - C0).norm() / std::max(C0.norm(), 1e-300));
    }
    report.Po = fit.Po;
    report.wo = fit.wo;
    report.verdicts.push_back(
        {"A6", res <= options.a6_tolerance, res, "least-squares residual of P = Po C (relative to |P|)"});
  } catch (const Error& e) {
    report.verdicts.push_back({"A6", false, 0.0, e.what()});
  }
  return report;
}

}  // namespace pwainv
