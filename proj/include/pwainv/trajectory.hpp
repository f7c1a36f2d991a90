#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

namespace pwainv {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

// Finite time series. Column j holds the sample at time step start_k + j.
struct Trajectory {
  long start_k = 0;
  Mat samples;
  std::string label;

  Trajectory() = default;
  Trajectory(long start, Mat values, std::string tag);

  static Trajectory scalar(long start, const Vec& values, std::string tag);

  long size() const { return samples.cols(); }
  long dim() const { return samples.rows(); }
  long end_k() const { return start_k + size(); }
  bool contains(long k) const { return k >= start_k && k < end_k(); }

  Vec at(long k) const;
  double scalar_at(long k) const;
  // First row as a vector (SISO signals).
  Vec row(int i = 0) const { return samples.row(i).transpose(); }
};

// CSV with header `k,<label>_0,...`; values written with 17 significant digits.
void write_csv(std::ostream& out, const Trajectory& t);
void write_csv(const std::string& path, const Trajectory& t);
Trajectory read_csv(std::istream& in);
Trajectory read_csv(const std::string& path);

}  // namespace pwainv
