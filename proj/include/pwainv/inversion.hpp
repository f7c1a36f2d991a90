#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pwainv/pwa.hpp"

namespace pwainv {

constexpr int kDefaultDegreeCap = 6;
constexpr double kNonzeroTolerance = 1e-12;

struct SequenceWitness {
  int degree;                  // candidate preview length m
  std::vector<int> locations;  // q_k .. q_{k+m}
  double coefficient;          // C (prod A) B along the sequence
};

struct RelativeDegreeReport {
  std::vector<int> mu_q;
  std::optional<int> mu_c;  // set when all mu_q agree
  int mu_tilde = 0;
  // Sequences that ruled out each smaller candidate, plus the weakest sequence at mu_tilde.
  std::vector<SequenceWitness> witnesses;
};

struct PreviewCoefficients {
  RowVec Ccal;
  double Dcal = 0.0;
  double Gcal = 0.0;
  std::vector<double> psi;  // multiplies u_{k+1} .. u_{k+mu-1}
};

int component_relative_degree(const PwaModel& model, int q, long k, int cap = kDefaultDegreeCap);
RelativeDegreeReport global_relative_degree(const PwaModel& model, long k, int cap = kDefaultDegreeCap);
// Preview of y_{k+mu} along the location sequence q_k .. q_{k+mu}, mu = size - 1.
PreviewCoefficients preview_coefficients(const PwaModel& model, long k, const std::vector<int>& locations);

struct InverseMatrices {
  Mat Abar;
  Vec Bbar;
  Vec Fbar;
  RowVec Cbar;
  double Dbar = 0.0;
  double Gbar = 0.0;
};

// Explicit inverse of a SISO PWA model. Its input is y_{k+mu}, its output u_k.
// Location keys equal forward locations for mu <= 1. For mu = 2 a key encodes the
// pair (q_k, q_{k+1}) as q_k * |Q| + q_{k+1}; both are explicit functions of x_k.
class InversePwaModel {
 public:
  InversePwaModel(std::shared_ptr<const PwaModel> source, int mu_tilde);

  int mu_tilde() const { return mu_; }
  int state_dim() const { return source_->n_x(); }
  int key_count() const;
  std::vector<int> key_locations(int key) const;
  const PwaModel& source() const { return *source_; }
  std::shared_ptr<const PwaModel> source_ptr() const { return source_; }
  const Partition& partition() const { return source_->partition(); }
  // Steps at which the inverse can be evaluated (forward horizon shortened by mu).
  std::optional<Horizon> horizon() const;

  int locate(long k, const Vec& x) const;
  InverseMatrices matrices(int key, long k) const;
  // State directions the key depends on: P, stacked with P A_{q,k} for every q when mu = 2.
  Mat switching_rows(long k) const;

 private:
  std::shared_ptr<const PwaModel> source_;
  int mu_;
};

InversePwaModel invert_rd0(std::shared_ptr<const PwaModel> model, long anchor_k = 0);
InversePwaModel invert_rd1(std::shared_ptr<const PwaModel> model, long anchor_k = 0);
InversePwaModel invert_rd2(std::shared_ptr<const PwaModel> model, long anchor_k = 0);
// degree < 0 selects the degree from global_relative_degree at anchor_k.
InversePwaModel invert(std::shared_ptr<const PwaModel> model, int degree = -1, long anchor_k = 0);

struct InverseRun {
  Trajectory u;
  Trajectory x;
  std::vector<int> keys;
};

// Plain forward propagation of the inverse from x0. y must cover y_{k0} .. y_{k0+N};
// the result covers u_{k0} .. u_{k0+N-mu}.
InverseRun propagate_inverse(const InversePwaModel& inv, const Vec& x0, const Trajectory& y);

// Every u_k that reaches y_target at step k+mu from x, ascending. Candidates are
// checked by re-simulating the assumed switching sequence.
// future_u supplies u_{k+1} .. u_{k+mu-1}.
std::vector<double> enumerate_implicit_solutions(const PwaModel& model, long k, const Vec& x, double y_target,
                                                 const std::vector<double>& future_u = {},
                                                 std::optional<int> mu = std::nullopt);

struct AssumptionVerdict {
  std::string id;
  bool pass = false;
  double evidence = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionVerdict> verdicts;
  std::optional<RelativeDegreeReport> degrees;
  Mat Po;  // A6 factor P = Po C (empty when not computed)
  Vec wo;  // A6 offset w = wo - Po G
  const AssumptionVerdict* find(const std::string& id) const;
  bool passes(const std::string& id) const;
};

struct AssumptionOptions {
  long anchor_k = 0;
  int cap = kDefaultDegreeCap;
  double a5_tolerance = 1e-12;
  double a6_tolerance = 1e-10;
};

AssumptionReport check_assumptions(const PwaModel& model, const AssumptionOptions& options = {});

}  // namespace pwainv
