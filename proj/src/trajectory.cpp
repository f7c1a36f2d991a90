#include "pwainv/trajectory.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "pwainv/error.hpp"

namespace pwainv {

Trajectory::Trajectory(long start, Mat values, std::string tag)
    : start_k(start), samples(std::move(values)), label(std::move(tag)) {
  if (samples.cols() == 0 || samples.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "trajectory '" + label + "' has no samples");
}

Trajectory Trajectory::scalar(long start, const Vec& values, std::string tag) {
  return Trajectory(start, values.transpose(), std::move(tag));
}

Vec Trajectory::at(long k) const {
  if (!contains(k))
    throw Error(ErrorCode::HorizonOverflow, "trajectory '" + label + "' has no sample", {}, k);
  return samples.col(k - start_k);
}

double Trajectory::scalar_at(long k) const {
  if (!contains(k))
    throw Error(ErrorCode::HorizonOverflow, "trajectory '" + label + "' has no sample", {}, k);
  return samples(0, k - start_k);
}

static std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const Trajectory& t) {
  out << "k";
  for (long i = 0; i < t.dim(); ++i) out << ',' << t.label << '_' << i;
  out << '\n';
  for (long j = 0; j < t.size(); ++j) {
    out << t.start_k + j;
    for (long i = 0; i < t.dim(); ++i) out << ',' << fmt17(t.samples(i, j));
    out << '\n';
  }
}

void write_csv(const std::string& path, const Trajectory& t) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_csv(out, t);
}

Trajectory read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "empty trajectory CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "k") throw Error(ErrorCode::Io, "trajectory CSV must start with a k column");
  std::string label = header[1];
  if (auto pos = label.rfind('_'); pos != std::string::npos) label = label.substr(0, pos);
  const std::size_t dim = header.size() - 1;

  std::vector<long> ks;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (col == 0)
          ks.push_back(std::stol(cell));
        else
          vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::Io, "malformed CSV cell '" + cell + "'");
      }
      ++col;
    }
    if (col != dim + 1) throw Error(ErrorCode::Io, "CSV row has wrong number of columns");
  }
  if (ks.empty()) throw Error(ErrorCode::Io, "trajectory CSV has no rows");
  for (std::size_t j = 1; j < ks.size(); ++j)
    if (ks[j] != ks[j - 1] + 1) throw Error(ErrorCode::Io, "CSV time steps are not consecutive");
  Mat m(dim, ks.size());
  for (std::size_t j = 0; j < ks.size(); ++j)
    for (std::size_t i = 0; i < dim; ++i) m(i, j) = vals[j * dim + i];
  return Trajectory(ks.front(), std::move(m), label);
}

Trajectory read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  return read_csv(in);
}

}  // namespace pwainv
