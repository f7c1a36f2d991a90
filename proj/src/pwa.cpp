#include "pwainv/pwa.hpp"

#include <algorithm>

#include "pwainv/error.hpp"

namespace pwainv {

Partition::Partition(Mat P, Vec w, std::vector<std::vector<Signature>> signatures)
    : P_(std::move(P)), w_(std::move(w)), signatures_(std::move(signatures)) {
  if (P_.rows() != w_.size())
    throw Error(ErrorCode::DimensionMismatch, "partition P has " + std::to_string(P_.rows()) + " rows but w has " +
                                                  std::to_string(w_.size()) + " entries");
  if (signatures_.empty()) throw Error(ErrorCode::InvalidModel, "partition needs at least one location");
  for (int q = 0; q < location_count(); ++q) {
    for (const auto& s : signatures_[q]) {
      if (static_cast<long>(s.size()) != P_.rows())
        throw Error(ErrorCode::InvalidModel, "signature of location " + std::to_string(q) + " has wrong length");
      for (int b : s)
        if (b != 0 && b != 1) throw Error(ErrorCode::InvalidModel, "signature entries must be 0 or 1");
      if (find(s) >= 0)
        throw Error(ErrorCode::InvalidModel, "signature listed for more than one location (or twice)");
      index_.emplace_back(s, q);
    }
  }
}

int Partition::find(const Signature& delta) const {
  for (const auto& [s, q] : index_)
    if (s == delta) return q;
  return -1;
}

Signature localize_rows(const Mat& P, const Vec& w, const Vec& x) {
  if (P.cols() != x.size())
    throw Error(ErrorCode::DimensionMismatch,
                "state has dimension " + std::to_string(x.size()) + ", partition expects " + std::to_string(P.cols()));
  Signature delta(P.rows());
  for (Eigen::Index i = 0; i < P.rows(); ++i) delta[i] = (P.row(i).dot(x) - w(i)) >= 0.0 ? 1 : 0;
  return delta;
}

Signature localize(const Vec& x, const Partition& partition) { return localize_rows(partition.P(), partition.w(), x); }

static std::string signature_text(const Signature& s) {
  std::string t = "[";
  for (std::size_t i = 0; i < s.size(); ++i) t += (i ? "," : "") + std::to_string(s[i]);
  return t + "]";
}

int select_location(const Signature& delta, const Partition& partition) {
  if (static_cast<int>(delta.size()) != partition.rows())
    throw Error(ErrorCode::DimensionMismatch, "signature length does not match partition");
  int q = partition.find(delta);
  if (q < 0) throw Error(ErrorCode::NoLocation, "signature " + signature_text(delta) + " matches no location", "A1");
  return q;
}

MatrixSchedule::MatrixSchedule(int locations, Evaluator evaluator, std::optional<Horizon> horizon, std::string kind)
    : locations_(locations), evaluator_(std::move(evaluator)), horizon_(horizon), kind_(std::move(kind)) {}

MatrixSchedule MatrixSchedule::constant(std::vector<LocationMatrices> per_location) {
  const int n = static_cast<int>(per_location.size());
  auto data = std::make_shared<const std::vector<LocationMatrices>>(std::move(per_location));
  return MatrixSchedule(n, [data](int q, long) { return (*data)[q]; }, std::nullopt, "constant");
}

MatrixSchedule MatrixSchedule::tabulated(long start_k, std::vector<std::vector<LocationMatrices>> steps) {
  if (steps.empty() || steps.front().empty()) throw Error(ErrorCode::InvalidModel, "tabulated schedule is empty");
  const std::size_t len = steps.front().size();
  for (const auto& s : steps)
    if (s.size() != len) throw Error(ErrorCode::InvalidModel, "tabulated schedule locations differ in length");
  const int n = static_cast<int>(steps.size());
  auto data = std::make_shared<const std::vector<std::vector<LocationMatrices>>>(std::move(steps));
  return MatrixSchedule(
      n, [data, start_k](int q, long k) { return (*data)[q][k - start_k]; },
      Horizon{start_k, start_k + static_cast<long>(len)}, "tabulated");
}

LocationMatrices MatrixSchedule::evaluate(int q, long k) const {
  if (q < 0 || q >= locations_) throw Error(ErrorCode::InvalidModel, "location index out of range", {}, k);
  if (horizon_ && !horizon_->contains(k))
    throw Error(ErrorCode::HorizonOverflow, "time step outside schedule horizon [" + std::to_string(horizon_->begin) +
                                                ", " + std::to_string(horizon_->end) + ")",
                {}, k);
  return evaluator_(q, k);
}

MatrixSchedule MatrixSchedule::rebind(const Trajectory& signal) const {
  if (!rebinder_)
    throw Error(ErrorCode::InvalidModel, "schedule of kind '" + kind_ + "' has no exogenous signal to rebind");
  return rebinder_(signal);
}

MatrixSchedule MatrixSchedule::with_exogenous(std::string name, Trajectory signal, Rebinder rebinder) const {
  MatrixSchedule s = *this;
  s.exogenous_name_ = std::move(name);
  s.exogenous_ = std::move(signal);
  s.rebinder_ = std::move(rebinder);
  return s;
}

MatrixSchedule MatrixSchedule::with_description(std::string json) const {
  MatrixSchedule s = *this;
  s.description_ = std::move(json);
  return s;
}

PwaModel::PwaModel(int n_x, int n_u, int n_y, Partition partition, MatrixSchedule schedule,
                   std::optional<int> declared_mu_c)
    : n_x_(n_x),
      n_u_(n_u),
      n_y_(n_y),
      partition_(std::move(partition)),
      schedule_(std::move(schedule)),
      declared_mu_c_(declared_mu_c) {
  if (n_x_ <= 0 || n_u_ <= 0 || n_y_ <= 0) throw Error(ErrorCode::InvalidModel, "model dimensions must be positive");
  if (partition_.state_dim() != n_x_)
    throw Error(ErrorCode::DimensionMismatch, "partition P has " + std::to_string(partition_.state_dim()) +
                                                  " columns but n_x = " + std::to_string(n_x_));
  if (schedule_.locations() != partition_.location_count())
    throw Error(ErrorCode::InvalidModel, "schedule and partition disagree on the number of locations");
}

LocationMatrices PwaModel::matrices(int q, long k) const {
  LocationMatrices m = schedule_.evaluate(q, k);
  auto check = [&](const Mat& M, long r, long c, const char* name) {
    if (M.rows() != r || M.cols() != c)
      throw Error(ErrorCode::DimensionMismatch,
                  std::string("matrix ") + name + " of location " + std::to_string(q) + " has wrong shape", {}, k);
  };
  check(m.A, n_x_, n_x_, "A");
  check(m.B, n_x_, n_u_, "B");
  check(m.F, n_x_, 1, "F");
  check(m.C, n_y_, n_x_, "C");
  check(m.D, n_y_, n_u_, "D");
  check(m.G, n_y_, 1, "G");
  return m;
}

int PwaModel::locate(const Vec& x, std::optional<long> k) const {
  try {
    return select_location(localize(x, partition_), partition_);
  } catch (const Error& e) {
    if (k) throw e.at_step(*k);
    throw;
  }
}

Vec PwaModel::step(long k, const Vec& x, const Vec& u) const {
  const LocationMatrices m = matrices(locate(x, k), k);
  return m.A * x + m.B * u + m.F;
}

Vec PwaModel::output(long k, const Vec& x, const Vec& u) const {
  const LocationMatrices m = matrices(locate(x, k), k);
  return m.C * x + m.D * u + m.G;
}

PwaModel PwaModel::with_schedule(MatrixSchedule schedule) const {
  return PwaModel(n_x_, n_u_, n_y_, partition_, std::move(schedule), declared_mu_c_);
}

SimulationResult simulate(const PwaModel& model, const Vec& x0, const Trajectory& u) {
  if (x0.size() != model.n_x()) throw Error(ErrorCode::DimensionMismatch, "x0 has wrong dimension");
  if (u.dim() != model.n_u()) throw Error(ErrorCode::DimensionMismatch, "input trajectory has wrong dimension");
  const long n = u.size();
  Mat y(model.n_y(), n), x(model.n_x(), n + 1), delta(model.partition().rows(), n);
  std::vector<int> locs(n);
  x.col(0) = x0;
  for (long j = 0; j < n; ++j) {
    const long k = u.start_k + j;
    const Vec xk = x.col(j);
    const Signature d = localize(xk, model.partition());
    int q;
    try {
      q = select_location(d, model.partition());
    } catch (const Error& e) {
      throw e.at_step(k);
    }
    const LocationMatrices m = model.matrices(q, k);
    const Vec uk = u.samples.col(j);
    y.col(j) = m.C * xk + m.D * uk + m.G;
    x.col(j + 1) = m.A * xk + m.B * uk + m.F;
    for (std::size_t i = 0; i < d.size(); ++i) delta(i, j) = d[i];
    locs[j] = q;
  }
  return {Trajectory(u.start_k, std::move(y), "y"), Trajectory(u.start_k, std::move(x), "x"),
          Trajectory(u.start_k, std::move(delta), "delta"), std::move(locs)};
}

}  // namespace pwainv
