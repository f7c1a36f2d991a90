#include "pwainv/printhead.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "pwainv/error.hpp"

namespace pwainv {

namespace {

using cd = std::complex<double>;

// Real coefficients of prod (z - root), highest power first.
std::vector<double> real_poly(const std::vector<cd>& roots) {
  std::vector<cd> c{1.0};
  for (const cd& r : roots) {
    std::vector<cd> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out;
  double scale = 0.0;
  for (const cd& v : c) scale = std::max(scale, std::abs(v));
  for (const cd& v : c) {
    if (std::abs(v.imag()) > 1e-9 * std::max(scale, 1.0))
      throw Error(ErrorCode::InvalidModel, "complex zeros and poles must come in conjugate pairs");
    out.push_back(v.real());
  }
  return out;
}

}  // namespace

StateSpace zpk_to_state_space(const ZpkModel& zpk) {
  const std::size_t n = zpk.poles.size();
  const std::size_t m = zpk.zeros.size();
  if (n == 0) throw Error(ErrorCode::InvalidModel, "transfer function needs at least one pole");
  if (m > n) throw Error(ErrorCode::InvalidModel, "improper transfer function (more zeros than poles)");
  const std::vector<double> den = real_poly(zpk.poles);  // size n + 1, monic
  const std::vector<double> num = real_poly(zpk.zeros);  // size m + 1, monic

  StateSpace ss;
  ss.Ts = zpk.Ts;
  ss.A = Mat::Zero(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) ss.A(i, i + 1) = 1.0;
  for (std::size_t i = 0; i < n; ++i) ss.A(n - 1, i) = -den[n - i];
  ss.B = Vec::Zero(n);
  ss.B(n - 1) = zpk.gain;
  // Numerator coefficients in ascending powers, minus the direct part when m == n.
  std::vector<double> c(n, 0.0);
  for (std::size_t i = 0; i <= m; ++i) {
    const std::size_t power = m - i;
    if (power < n) c[power] = num[i];
  }
  ss.D = 0.0;
  if (m == n) {
    ss.D = zpk.gain;
    for (std::size_t i = 0; i < n; ++i) c[i] -= den[n - i];
  }
  ss.C = RowVec::Map(c.data(), n);
  return ss;
}

std::complex<double> frequency_response(const ZpkModel& zpk, std::complex<double> z) {
  cd h = zpk.gain;
  for (const cd& q : zpk.zeros) h *= (z - q);
  for (const cd& p : zpk.poles) h /= (z - p);
  return h;
}

std::complex<double> frequency_response(const StateSpace& ss, std::complex<double> z) {
  const long n = ss.A.rows();
  const Eigen::MatrixXcd M = z * Eigen::MatrixXcd::Identity(n, n) - ss.A.cast<cd>();
  const Eigen::VectorXcd x = M.partialPivLu().solve(ss.B.cast<cd>());
  return ss.C.cast<cd>().dot(x) + ss.D;
}

int nmp_zero_count(const ZpkModel& zpk) {
  return static_cast<int>(std::count_if(zpk.zeros.begin(), zpk.zeros.end(), [](const cd& z) { return std::abs(z) > 1.0; }));
}

SwitchingController build_feedback_controller(const FeedbackParams& p) {
  if (!(p.e_switch > 0.0)) throw Error(ErrorCode::InvalidModel, "e_switch must be positive");
  SwitchingController c;
  c.e_switch = p.e_switch;
  c.A = Mat::Zero(3, 3);
  c.A(0, 1) = 1.0;
  c.A(1, 0) = -p.a2;
  c.A(1, 1) = -p.a1;
  c.B = Vec(3);
  c.B << 0.0, 1.0, 1.0;
  const double kp[2] = {p.Kp1, p.Kp2};
  for (int q = 0; q < 2; ++q) {
    c.D[q] = p.b * (kp[q] + p.Kd / p.Ts);
    c.C[q] = RowVec(3);
    c.C[q] << -p.b * (p.Kd * (1.0 + p.a2) / p.Ts + kp[q] * p.a2), -p.b * (p.Kd * p.a1 / p.Ts + kp[q] * (p.a1 - 1.0)),
        0.0;
  }
  return c;
}

namespace {

MatrixSchedule monolithic_schedule(const StateSpace& plant, const SwitchingController& ctrl, const Trajectory& r) {
  if (r.dim() != 1) throw Error(ErrorCode::DimensionMismatch, "reference must be scalar");
  const long np = plant.A.rows();
  const long n = np + 3;
  struct Loc {
    Mat A;
    Vec F;  // multiplies r_k
  };
  auto locs = std::make_shared<std::vector<Loc>>();
  for (int q = 0; q < 2; ++q) {
    Loc l;
    l.A = Mat::Zero(n, n);
    l.A.topLeftCorner(np, np) = plant.A - plant.B * ctrl.D[q] * plant.C;
    l.A.topRightCorner(np, 3) = plant.B * ctrl.C[q];
    l.A.bottomLeftCorner(3, np) = -ctrl.B * plant.C;
    l.A.bottomRightCorner(3, 3) = ctrl.A;
    l.F = Vec(n);
    l.F << plant.B * ctrl.D[q], ctrl.B;
    locs->push_back(std::move(l));
  }
  Mat B = Mat::Zero(n, 1);
  B.topRows(np) = plant.B;
  Mat C = Mat::Zero(1, n);
  C.leftCols(np) = plant.C;
  auto ref = std::make_shared<const Trajectory>(r);
  MatrixSchedule::Evaluator eval = [locs, B, C, ref](int q, long k) {
    const Loc& l = (*locs)[q];
    LocationMatrices m;
    m.A = l.A;
    m.B = B;
    m.F = l.F * ref->samples(0, k - ref->start_k);
    m.C = C;
    m.D = Mat::Zero(1, 1);
    m.G = Vec::Zero(1);
    return m;
  };
  MatrixSchedule s(2, std::move(eval), Horizon{r.start_k, r.end_k()}, "monolithic-printhead");
  return s.with_exogenous("reference", r, [plant, ctrl](const Trajectory& rr) { return monolithic_schedule(plant, ctrl, rr); });
}

}  // namespace

PwaModel build_monolithic(const StateSpace& plant, const SwitchingController& controller, const Trajectory& r) {
  if (plant.D != 0.0) throw Error(ErrorCode::DimensionMismatch, "plant must be strictly proper");
  const long n = plant.A.rows() + 3;
  Mat P = Mat::Zero(2, n);
  P(0, n - 1) = -1.0;
  P(1, n - 1) = 1.0;
  Vec w(2);
  w << -controller.e_switch, -controller.e_switch;
  Partition part(P, w, {{{1, 1}}, {{1, 0}, {0, 1}}});
  return PwaModel(static_cast<int>(n), 1, 1, std::move(part), monolithic_schedule(plant, controller, r));
}

Trajectory make_reference(const ReferenceProfile& p) {
  if (p.samples < 2) throw Error(ErrorCode::DimensionMismatch, "reference needs at least two samples");
  auto s = [](double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
  };
  Vec r(p.samples);
  for (long j = 0; j < p.samples; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(p.samples - 1);
    const double up = p.rise_end > p.rise_start ? s((t - p.rise_start) / (p.rise_end - p.rise_start)) : (t >= p.rise_start);
    const double down = p.fall_end > p.fall_start ? s((t - p.fall_start) / (p.fall_end - p.fall_start)) : (t >= p.fall_start);
    r(j) = p.amplitude * (up - down);
  }
  return Trajectory::scalar(0, r, "r");
}

Trajectory downsample2(const Trajectory& t) {
  const long n = (t.size() + 1) / 2;
  Mat out(t.dim(), n);
  for (long j = 0; j < n; ++j) out.col(j) = t.samples.col(2 * j);
  return Trajectory(t.start_k / 2, std::move(out), t.label);
}

Trajectory upsample2_zoh(const Trajectory& t) {
  Mat out(t.dim(), 2 * t.size());
  for (long j = 0; j < t.size(); ++j) {
    out.col(2 * j) = t.samples.col(j);
    out.col(2 * j + 1) = t.samples.col(j);
  }
  return Trajectory(2 * t.start_k, std::move(out), t.label);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Trajectory add_noise(const Trajectory& t, double sigma, std::uint64_t seed) {
  Trajectory out = t;
  if (sigma == 0.0) return out;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (long j = 0; j < out.size(); ++j)
    for (long i = 0; i < out.dim(); ++i) out.samples(i, j) += dist(gen);
  return out;
}

ClosedLoopRun simulate_closed_loop(const StateSpace& plant, const SwitchingController& ctrl, const Vec& r, const Vec& u,
                                   const Vec& process_noise, const Vec& measurement_noise) {
  const long n = r.size();
  if (u.size() != n) throw Error(ErrorCode::DimensionMismatch, "closed-loop input and reference lengths differ");
  if (process_noise.size() != 0 && process_noise.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "process noise has the wrong length");
  if (measurement_noise.size() != 0 && measurement_noise.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "measurement noise has the wrong length");
  ClosedLoopRun run;
  run.y = Vec(n);
  run.y_measured = Vec(n);
  run.locations.resize(n);
  Vec xp = Vec::Zero(plant.A.rows());
  Vec xc = Vec::Zero(3);
  for (long k = 0; k < n; ++k) {
    const double y = plant.C.dot(xp);
    const double ym = y + (measurement_noise.size() ? measurement_noise(k) : 0.0);
    run.y(k) = y;
    run.y_measured(k) = ym;
    const double e = r(k) - ym;
    const int q = ctrl.location(xc(2));
    run.locations[k] = q;
    const double force = ctrl.C[q].dot(xc) + ctrl.D[q] * e + u(k) + (process_noise.size() ? process_noise(k) : 0.0);
    xp = plant.A * xp + plant.B * force;
    xc = ctrl.A * xc + ctrl.B * e;
  }
  return run;
}

BenchConfig default_bench_config() {
  BenchConfig cfg;
  cfg.truth.plant.zeros = {-5.10, -0.44, 0.16};
  cfg.truth.plant.poles = {cd(0.88, 0.37), cd(0.88, -0.37), 1.00, 1.00, 0.0};
  cfg.truth.plant.gain = 2.42e-7;
  cfg.truth.plant.Ts = 0.001;
  cfg.truth.feedback = {-1.65, 0.70, 0.027, 3.0, 40.0, 160.0, 2e-3, 0.001};
  cfg.control.plant.zeros = {33.10, -2.21, 0.16};
  cfg.control.plant.poles = {cd(0.67, 0.61), cd(0.67, -0.61), 0.99, 1.00};
  cfg.control.plant.gain = -2.38e-7;
  cfg.control.plant.Ts = 0.002;
  cfg.control.feedback = {-1.31, 0.50, 0.093, 3.0, 40.0, 160.0, 2e-3, 0.002};
  return cfg;
}

PrintheadBench::PrintheadBench(BenchConfig cfg) : cfg_(std::move(cfg)) {
  if (std::abs(cfg_.control.plant.Ts - 2.0 * cfg_.truth.plant.Ts) > 1e-12 * cfg_.control.plant.Ts)
    throw Error(ErrorCode::InvalidModel, "control sample period must be twice the truth sample period");
  if ((cfg_.n_truth + 1) / 2 != cfg_.n_control)
    throw Error(ErrorCode::InvalidModel, "control horizon must hold the even-index samples of the truth horizon");
  truth_plant_ = zpk_to_state_space(cfg_.truth.plant);
  control_plant_ = zpk_to_state_space(cfg_.control.plant);
  truth_ctrl_ = build_feedback_controller(cfg_.truth.feedback);
  control_ctrl_ = build_feedback_controller(cfg_.control.feedback);

  ReferenceProfile prof = cfg_.reference;
  prof.samples = cfg_.n_truth;
  r_truth_ = make_reference(prof);
  r_control_ = downsample2(r_truth_);
  control_model_ = std::make_shared<const PwaModel>(build_monolithic(control_plant_, control_ctrl_, r_control_));
  truth_model_ = std::make_shared<const PwaModel>(build_monolithic(truth_plant_, truth_ctrl_, r_truth_));
  inverse_ = std::make_unique<InversePwaModel>(invert(control_model_));
  dec_ = compute_decoupling(*inverse_);
  const int mu = inverse_->mu_tilde();
  r_lifted_ = r_control_.row().tail(r_control_.size() - mu);
  const Vec h = lowpass_impulse_response(cfg_.control.feedback.a1, cfg_.control.feedback.a2, cfg_.control.feedback.b,
                                         r_lifted_.size());
  filters_ = build_filters(h, cfg_.n_edge, cfg_.n_control - 1, mu);
}

Vec PrintheadBench::run_truth(const Vec& u_lifted, int trial) const {
  const long M = lifted_size();
  if (u_lifted.size() != M) throw Error(ErrorCode::DimensionMismatch, "lifted input has the wrong length");
  // u_0 .. u_{M-1} at the control rate, held for two truth samples; the truth horizon is
  // one sample longer than 2M, that sample gets zero input (it never reaches a measured output).
  const Trajectory up = upsample2_zoh(Trajectory::scalar(0, u_lifted, "u"));
  Vec ut = Vec::Zero(cfg_.n_truth);
  const long copy = std::min<long>(up.size(), cfg_.n_truth);
  ut.head(copy) = up.row().head(copy);

  const Trajectory zero = Trajectory::scalar(0, Vec::Zero(cfg_.n_truth), "noise");
  const Vec wp = add_noise(zero, cfg_.sigma_process, derive_seed(cfg_.seed, trial, 0)).row();
  const Vec wm = add_noise(zero, cfg_.sigma_measure, derive_seed(cfg_.seed, trial, 1)).row();
  const ClosedLoopRun run = simulate_closed_loop(truth_plant_, truth_ctrl_, r_truth_.row(), ut, wp, wm);
  const Trajectory yc = downsample2(Trajectory::scalar(0, run.y_measured, "y"));
  return yc.row().tail(M);
}

Vec PrintheadBench::run_control(const Vec& u_lifted) const {
  const long M = lifted_size();
  if (u_lifted.size() != M) throw Error(ErrorCode::DimensionMismatch, "lifted input has the wrong length");
  Vec u = Vec::Zero(r_control_.size());
  u.head(M) = u_lifted;
  const SimulationResult sim = simulate(*control_model_, Vec::Zero(control_model_->n_x()), Trajectory::scalar(0, u, "u"));
  return sim.y.row().tail(M);
}

Vec PrintheadBench::stable_inverse_input() const {
  return stable_invert_lifted(*inverse_, dec_, r_lifted_, r_control_.start_k).u.row();
}

IlcSession PrintheadBench::make_session(IlcScheme scheme, double gain) const {
  IlcSession s;
  s.scheme = scheme;
  s.gain = gain;
  s.filters = filters_;
  s.plant = [this](const Vec& u, int trial) { return run_truth(u, trial); };
  const long k0 = r_control_.start_k;
  switch (scheme) {
    case IlcScheme::Ililc:
      s.learning_matrix = [this, k0](const Vec&, const Vec& y) { return ililc_learning_matrix(*inverse_, dec_, y, k0); };
      break;
    case IlcScheme::Gradient:
      s.learning_matrix = [this, k0](const Vec& u, const Vec&) {
        return Mat(lifted_jacobian(*control_model_, Vec::Zero(control_model_->n_x()), u, mu(), k0).transpose());
      };
      break;
    case IlcScheme::PType:
      s.learning_matrix = [this](const Vec&, const Vec&) { return ptype_learning_matrix(1.0, lifted_size()); };
      break;
  }
  return s;
}

std::vector<TrialRecord> PrintheadBench::run_scheme(IlcScheme scheme, double gain, int trials) const {
  IlcSession s = make_session(scheme, gain);
  run_trials(s, r_lifted_, trials);
  return s.history;
}

GainSearchResult tune_gain_line_search(const std::function<bool(double)>& monotone_at, std::vector<double> candidates,
                                       bool integer_refine) {
  if (candidates.empty()) throw Error(ErrorCode::Generic, "gain line search needs candidates");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  GainSearchResult res;
  auto eval = [&](double g) {
    const bool ok = monotone_at(g);
    res.evaluated.emplace_back(g, ok);
    return ok;
  };
  long idx = -1;
  for (long i = static_cast<long>(candidates.size()) - 1; i >= 0; --i) {
    if (eval(candidates[i])) {
      idx = i;
      break;
    }
  }
  if (idx < 0) throw Error(ErrorCode::Generic, "no candidate gain yields a monotonically decreasing NRMSE");
  double lo = candidates[idx];
  if (integer_refine && idx + 1 < static_cast<long>(candidates.size())) {
    double hi = candidates[idx + 1];
    lo = std::floor(lo);
    hi = std::ceil(hi);
    while (hi - lo > 1.0) {
      const double mid = std::floor((lo + hi) / 2.0);
      if (eval(mid))
        lo = mid;
      else
        hi = mid;
    }
  }
  res.gain = lo;
  return res;
}

GainSearchResult tune_gain_line_search(const PrintheadBench& bench, IlcScheme scheme,
                                       const std::vector<double>& candidates, bool integer_refine) {
  const int trials = bench.config().trials;
  return tune_gain_line_search(
      [&](double g) { return nrmse_non_increasing(bench.run_scheme(scheme, g, trials)); }, candidates, integer_refine);
}

const ScenarioResult& BenchResults::find(const std::string& name) const {
  for (const auto& s : scenarios)
    if (s.name == name) return s;
  throw Error(ErrorCode::Generic, "no scenario named '" + name + "'");
}

BenchResults run_benchmark(const BenchConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const PrintheadBench bench(cfg);
  BenchResults out;
  out.gains = cfg.gains;
  if (cfg.tune_gains) {
    out.gains.ililc = tune_gain_line_search(bench, IlcScheme::Ililc, cfg.ililc_candidates, false).gain;
    out.gains.gradient = tune_gain_line_search(bench, IlcScheme::Gradient, cfg.gradient_candidates, true).gain;
    out.gains.ptype = tune_gain_line_search(bench, IlcScheme::PType, cfg.ptype_candidates, true).gain;
  }
  const Vec& r = bench.lifted_reference();

  auto scheme_result = [&](const std::string& name, IlcScheme scheme, double gain) {
    ScenarioResult s;
    s.name = name;
    s.gain = gain;
    try {
      s.trials = bench.run_scheme(scheme, gain, cfg.trials);
    } catch (const Error& e) {
      throw Error(e.code(), "scenario " + name + ": " + e.message(), e.assumption(), e.step());
    }
    s.nrmse = s.trials.back().nrmse;
    s.peak = s.trials.back().peak;
    s.u = s.trials.back().u;
    s.y = s.trials.back().y;
    return s;
  };
  auto single_run = [&](const std::string& name, const Vec& u) {
    ScenarioResult s;
    s.name = name;
    s.u = u;
    s.y = bench.run_truth(u, 0);
    s.nrmse = nrmse(r, s.y);
    s.peak = peak_error(r, s.y);
    return s;
  };

  Vec u_si;
  try {
    u_si = bench.stable_inverse_input();
  } catch (const Error& e) {
    throw Error(e.code(), "scenario stable-inversion: " + e.message(), e.assumption(), e.step());
  }
  out.scenarios.push_back(scheme_result("ililc", IlcScheme::Ililc, out.gains.ililc));
  out.scenarios.push_back(single_run("stable-inversion", u_si));
  out.scenarios.push_back(single_run("feedback-only", Vec::Zero(bench.lifted_size())));
  out.scenarios.push_back(scheme_result("gradient", IlcScheme::Gradient, out.gains.gradient));
  out.scenarios.push_back(scheme_result("ptype", IlcScheme::PType, out.gains.ptype));

  const Vec y_self = bench.run_control(u_si);
  out.self_inversion_nrmse = nrmse(r, y_self);
  out.self_inversion_peak = peak_error(r, y_self);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace pwainv
