#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pwainv/trajectory.hpp"

namespace pwainv {

using Signature = std::vector<int>;

// Hyperplane arrangement P x - w with explicit per-location signature sets.
class Partition {
 public:
  Partition() = default;
  Partition(Mat P, Vec w, std::vector<std::vector<Signature>> signatures);

  const Mat& P() const { return P_; }
  const Vec& w() const { return w_; }
  const std::vector<std::vector<Signature>>& signatures() const { return signatures_; }
  int location_count() const { return static_cast<int>(signatures_.size()); }
  int rows() const { return static_cast<int>(P_.rows()); }
  int state_dim() const { return static_cast<int>(P_.cols()); }

  // Location owning a signature, or -1.
  int find(const Signature& delta) const;

 private:
  Mat P_;
  Vec w_;
  std::vector<std::vector<Signature>> signatures_;
  std::vector<std::pair<Signature, int>> index_;
};

// Heaviside step applied row-wise to P x - w, with H(0) = 1.
Signature localize(const Vec& x, const Partition& partition);
Signature localize_rows(const Mat& P, const Vec& w, const Vec& x);
int select_location(const Signature& delta, const Partition& partition);

struct LocationMatrices {
  Mat A, B;
  Vec F;
  Mat C, D;
  Vec G;
};

struct Horizon {
  long begin = 0;
  long end = 0;  // exclusive
  bool contains(long k) const { return k >= begin && k < end; }
};

class MatrixSchedule {
 public:
  using Evaluator = std::function<LocationMatrices(int q, long k)>;
  using Rebinder = std::function<MatrixSchedule(const Trajectory&)>;

  MatrixSchedule() = default;
  MatrixSchedule(int locations, Evaluator evaluator, std::optional<Horizon> horizon, std::string kind);

  static MatrixSchedule constant(std::vector<LocationMatrices> per_location);
  // steps[q][j] holds the matrices of location q at time start_k + j.
  static MatrixSchedule tabulated(long start_k, std::vector<std::vector<LocationMatrices>> steps);

  int locations() const { return locations_; }
  const std::optional<Horizon>& horizon() const { return horizon_; }
  const std::string& kind() const { return kind_; }
  LocationMatrices evaluate(int q, long k) const;

  // Optional exogenous signal binding (e.g. a reference entering F_k).
  const std::string& exogenous_name() const { return exogenous_name_; }
  const std::optional<Trajectory>& exogenous() const { return exogenous_; }
  bool rebindable() const { return static_cast<bool>(rebinder_); }
  MatrixSchedule rebind(const Trajectory& signal) const;
  MatrixSchedule with_exogenous(std::string name, Trajectory signal, Rebinder rebinder) const;

  // Serialized schedule description (JSON text) used when writing model files.
  const std::string& description() const { return description_; }
  MatrixSchedule with_description(std::string json) const;

 private:
  int locations_ = 0;
  Evaluator evaluator_;
  std::optional<Horizon> horizon_;
  std::string kind_;
  std::string exogenous_name_;
  std::optional<Trajectory> exogenous_;
  Rebinder rebinder_;
  std::string description_;
};

class PwaModel {
 public:
  PwaModel(int n_x, int n_u, int n_y, Partition partition, MatrixSchedule schedule,
           std::optional<int> declared_mu_c = std::nullopt);

  int n_x() const { return n_x_; }
  int n_u() const { return n_u_; }
  int n_y() const { return n_y_; }
  bool siso() const { return n_u_ == 1 && n_y_ == 1; }
  int locations() const { return partition_.location_count(); }
  const Partition& partition() const { return partition_; }
  const MatrixSchedule& schedule() const { return schedule_; }
  const std::optional<Horizon>& horizon() const { return schedule_.horizon(); }
  std::optional<int> declared_mu_c() const { return declared_mu_c_; }

  // Dimension-checked schedule evaluation; throws HorizonOverflow outside the horizon.
  LocationMatrices matrices(int q, long k) const;
  int locate(const Vec& x, std::optional<long> k = std::nullopt) const;

  Vec step(long k, const Vec& x, const Vec& u) const;
  Vec output(long k, const Vec& x, const Vec& u) const;

  PwaModel with_schedule(MatrixSchedule schedule) const;

 private:
  int n_x_, n_u_, n_y_;
  Partition partition_;
  MatrixSchedule schedule_;
  std::optional<int> declared_mu_c_;
};

struct SimulationResult {
  Trajectory y;
  Trajectory x;      // x_{k0} .. x_{k0+N}, one more sample than u
  Trajectory delta;  // signature used at each step
  std::vector<int> locations;
};

SimulationResult simulate(const PwaModel& model, const Vec& x0, const Trajectory& u);

}  // namespace pwainv
