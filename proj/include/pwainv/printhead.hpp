#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pwainv/ilc.hpp"

namespace pwainv {

struct ZpkModel {
  std::vector<std::complex<double>> zeros;
  std::vector<std::complex<double>> poles;
  double gain = 1.0;
  double Ts = 1.0;
};

struct StateSpace {
  Mat A;
  Vec B;
  RowVec C;
  double D = 0.0;
  double Ts = 1.0;
};

// Controllable canonical form; the gain sits in B and C holds the monic numerator.
StateSpace zpk_to_state_space(const ZpkModel& zpk);
std::complex<double> frequency_response(const ZpkModel& zpk, std::complex<double> z);
std::complex<double> frequency_response(const StateSpace& ss, std::complex<double> z);
int nmp_zero_count(const ZpkModel& zpk);

struct FeedbackParams {
  double a1 = 0.0, a2 = 0.0, b = 0.0;
  double Kd = 0.0, Kp1 = 0.0, Kp2 = 0.0;
  double e_switch = 0.0;
  double Ts = 1.0;
};

// Lowpass filter in series with a PD controller whose proportional gain switches on the
// stored previous error (third state).
struct SwitchingController {
  Mat A;
  Vec B;
  RowVec C[2];
  double D[2] = {0.0, 0.0};
  double e_switch = 0.0;

  // 0 selects Kp1 (|e_{k-1}| <= e_switch), 1 selects Kp2.
  int location(double previous_error) const { return std::abs(previous_error) <= e_switch ? 0 : 1; }
  double proportional_gain(double previous_error, const FeedbackParams& p) const {
    return location(previous_error) == 0 ? p.Kp1 : p.Kp2;
  }
};

SwitchingController build_feedback_controller(const FeedbackParams& p);

// Plant and controller closed around the reference, with feedforward input u entering at the
// plant input. The reference is an exogenous signal that can be rebound.
PwaModel build_monolithic(const StateSpace& plant, const SwitchingController& controller, const Trajectory& r);

struct ReferenceProfile {
  double amplitude = 0.15;  // m
  double rise_start = 0.2;  // fractions of the horizon
  double rise_end = 0.4;
  double fall_start = 0.6;
  double fall_end = 0.8;
  long samples = 1999;
};

Trajectory make_reference(const ReferenceProfile& profile);
// Keeps even indices.
Trajectory downsample2(const Trajectory& t);
// Repeats every sample twice.
Trajectory upsample2_zoh(const Trajectory& t);
Trajectory add_noise(const Trajectory& t, double sigma, std::uint64_t seed);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

struct ClosedLoopRun {
  Vec y;           // noise-free plant output
  Vec y_measured;  // with measurement noise
  std::vector<int> locations;
};

// Sample-by-sample closed loop with additive input and output noise sequences (may be empty).
ClosedLoopRun simulate_closed_loop(const StateSpace& plant, const SwitchingController& controller, const Vec& r,
                                   const Vec& u, const Vec& process_noise, const Vec& measurement_noise);

struct ModelConfig {
  ZpkModel plant;
  FeedbackParams feedback;
};

// Defaults are the line-search results for the default bench configuration.
struct GainSet {
  double ililc = 0.6;
  double gradient = 3964.0;
  double ptype = 34.0;
};

struct BenchConfig {
  ModelConfig truth;
  ModelConfig control;
  double sigma_process = 0.03;   // V
  double sigma_measure = 50e-6;  // m
  std::uint64_t seed = 1;
  ReferenceProfile reference;
  long n_truth = 1999;
  long n_control = 1000;
  int n_edge = 35;
  int trials = 9;
  GainSet gains;
  bool tune_gains = false;
  std::vector<double> ililc_candidates{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> gradient_candidates{1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000};
  std::vector<double> ptype_candidates{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
};

BenchConfig default_bench_config();

// Models, reference, filters and the control-model inverse shared by every scenario.
class PrintheadBench {
 public:
  explicit PrintheadBench(BenchConfig cfg);

  const BenchConfig& config() const { return cfg_; }
  const Trajectory& reference_truth() const { return r_truth_; }
  const Trajectory& reference_control() const { return r_control_; }
  const Vec& lifted_reference() const { return r_lifted_; }
  std::shared_ptr<const PwaModel> control_model() const { return control_model_; }
  std::shared_ptr<const PwaModel> truth_model() const { return truth_model_; }
  const InversePwaModel& control_inverse() const { return *inverse_; }
  const Decoupling& decoupling() const { return dec_; }
  const FilterPair& filters() const { return filters_; }
  int mu() const { return inverse_->mu_tilde(); }
  long lifted_size() const { return r_lifted_.size(); }

  // Truth closed loop driven by a control-rate lifted input; returns lifted measured output.
  Vec run_truth(const Vec& u_lifted, int trial) const;
  // Noise-free control model driven by a lifted input; returns lifted output.
  Vec run_control(const Vec& u_lifted) const;
  // Learning-free feedforward from stable inversion of the control model.
  Vec stable_inverse_input() const;

  IlcSession make_session(IlcScheme scheme, double gain) const;
  std::vector<TrialRecord> run_scheme(IlcScheme scheme, double gain, int trials) const;

 private:
  BenchConfig cfg_;
  StateSpace truth_plant_, control_plant_;
  SwitchingController truth_ctrl_, control_ctrl_;
  Trajectory r_truth_, r_control_;
  Vec r_lifted_;
  std::shared_ptr<const PwaModel> control_model_, truth_model_;
  std::unique_ptr<InversePwaModel> inverse_;
  Decoupling dec_;
  FilterPair filters_;
};

struct GainSearchResult {
  double gain = 0.0;
  std::vector<std::pair<double, bool>> evaluated;  // (gain, monotone)
};

// Largest candidate whose NRMSE never increases over the trials; with integer_refine the
// gap to the next (failing) candidate is bisected over whole numbers.
GainSearchResult tune_gain_line_search(const std::function<bool(double)>& monotone_at, std::vector<double> candidates,
                                       bool integer_refine);
GainSearchResult tune_gain_line_search(const PrintheadBench& bench, IlcScheme scheme,
                                       const std::vector<double>& candidates, bool integer_refine);

struct ScenarioResult {
  std::string name;
  double nrmse = 0.0;
  double peak = 0.0;
  double gain = 0.0;
  std::vector<TrialRecord> trials;  // empty for single-run scenarios
  Vec u;
  Vec y;
};

struct BenchResults {
  std::vector<ScenarioResult> scenarios;
  GainSet gains;
  double self_inversion_nrmse = 0.0;
  double self_inversion_peak = 0.0;
  double seconds = 0.0;
  const ScenarioResult& find(const std::string& name) const;
};

BenchResults run_benchmark(const BenchConfig& cfg);

}  // namespace pwainv
