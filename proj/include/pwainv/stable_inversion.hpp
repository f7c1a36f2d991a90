#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pwainv/inversion.hpp"

namespace pwainv {

struct DecouplingTolerances {
  double block_residual = 1e-8;  // relative to |Abar|
  double hyperbolicity_margin = 1e-6;
};

// Constant similarity transform chi = V x splitting the inverse state into stable
// (first n_s entries) and unstable modes.
struct Decoupling {
  Mat V;
  Mat V_inv;
  int n_s = 0;
  int n_u = 0;
  std::vector<double> stable_eigs;    // magnitudes at the anchor
  std::vector<double> unstable_eigs;  // magnitudes at the anchor
  double max_stable_eig = 0.0;        // over every (key, k) checked
  double min_unstable_eig = INFINITY;
  double block_residual = 0.0;
  double hyperbolicity_margin = INFINITY;
  int anchor_key = 0;
  long anchor_k = 0;
  std::size_t distinct_matrices = 0;
};

// Uses the key of the origin at anchor_k when anchor_key is not given.
Decoupling compute_decoupling(const InversePwaModel& inv, std::optional<int> anchor_key = std::nullopt,
                              long anchor_k = 0, const DecouplingTolerances& tol = {});

enum class SwitchDependencyKind { StableModes, UnstableModes, Unsupported };

struct SwitchDependency {
  SwitchDependencyKind kind = SwitchDependencyKind::Unsupported;
  Mat P_tilde;                     // switching rows times V^-1
  double stable_block_norm = 0.0;  // columns acting on stable modes
  double unstable_block_norm = 0.0;
  double zero_block_residual = 0.0;  // relative norm of the block required to vanish
};

const char* to_string(SwitchDependencyKind kind);
SwitchDependency classify_switching(const InversePwaModel& inv, const Decoupling& dec, double tol = 1e-9,
                                    long k = 0);

enum class SelectionCost { StateJump, InputNorm, InputJump };
enum class PadMode { ForceZero, HoldEndpoints };

const char* to_string(SelectionCost cost);
SelectionCost parse_selection_cost(const std::string& text);

struct StableInversionConfig {
  int lead_pad = 0;
  int trail_pad = 0;
  PadMode pad_mode = PadMode::ForceZero;
  double solve_tolerance = 1e-9;
  double forcing_tolerance = 1e-9;  // end-of-horizon forcing check
  bool require_vanishing_forcing = false;
  SelectionCost selection_cost = SelectionCost::StateJump;
};

struct StableInversionReport {
  std::string switching;  // StableModes / UnstableModes
  int n_s = 0;
  int n_u = 0;
  double block_residual = 0.0;
  double hyperbolicity_margin = 0.0;
  double max_stable_eig = 0.0;
  double min_unstable_eig = 0.0;
  double chi_u_initial_norm = 0.0;  // |chi^u_0|
  double chi_s_final_norm = 0.0;    // |chi^s_{N-mu}|
  double sup_abar = 0.0;            // bounded-matrix evidence over the run
  double sup_inverse_abar_u = 0.0;
  double forcing_start = 0.0;  // |Bbar y + Fbar| at the horizon ends
  double forcing_end = 0.0;
  double max_state_norm = 0.0;
  long lead_pad = 0;
  long trail_pad = 0;
};

struct StableInversionResult {
  Trajectory u;      // u_{k0} .. u_{k0+M-1}
  Trajectory x;      // inverse state at the same steps
  Trajectory delta;  // forward-model signature at the same steps
  std::vector<int> keys;
  Mat chi_s;  // n_s x M
  Mat chi_u;  // n_u x M
  StableInversionReport report;
};

// Values that make Bbar_k y + Fbar_k vanish at the origin's key.
double force_zero_value(const InversePwaModel& inv, long k, double tol = 1e-9);
// Pads r (covering y_{k0} .. y_{k0+N}) with lead/trail samples; the padded trajectory
// starts lead_pad steps earlier.
Trajectory pad_reference(const InversePwaModel& inv, const Trajectory& r, const StableInversionConfig& cfg);
// Samples for the slowest mode to decay to `fraction`, forward for stable modes and
// backward for unstable ones.
int settling_samples(const Decoupling& dec, double fraction = 0.02);

// Switching on stable modes. `y` holds y_{k0+mu} .. y_{k0+mu+M-1}; u covers u_{k0} ..
// u_{k0+M-1}. Boundary conditions chi^s_{k0} = 0 and chi^u_{k0+M-1} = 0.
StableInversionResult stable_invert_lifted(const InversePwaModel& inv, const Decoupling& dec, const Vec& y, long k0,
                                           const StableInversionConfig& cfg = {});
// r covers y_{k0} .. y_{k0+N}; no padding is applied here (see pad_reference).
StableInversionResult stable_invert(const InversePwaModel& inv, const Decoupling& dec, const Trajectory& r,
                                    const StableInversionConfig& cfg = {});

// Jacobian d u / d y of the stable-inverse map with the key sequence held fixed.
Mat stable_inverse_jacobian(const InversePwaModel& inv, const Decoupling& dec, const std::vector<int>& keys, long k0);

struct BackwardCandidate {
  int key;
  Vec chi_u;
};

// One candidate per key whose backward solution lies in that key's region when
// combined with the given stable part.
std::vector<BackwardCandidate> backward_step_solve(const InversePwaModel& inv, const Decoupling& dec, long k,
                                                   const Vec& chi_u_next, double y_preview,
                                                   const Vec& chi_s = Vec());

// Switching on unstable modes: backward pass with per-step candidate search.
StableInversionResult stable_invert_unstable_switching_lifted(const InversePwaModel& inv, const Decoupling& dec,
                                                              const Vec& y, long k0,
                                                              const StableInversionConfig& cfg = {});
StableInversionResult stable_invert_unstable_switching(const InversePwaModel& inv, const Decoupling& dec,
                                                       const Trajectory& r, const StableInversionConfig& cfg = {});

}  // namespace pwainv
