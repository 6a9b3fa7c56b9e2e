#pragma once

// CSV serialization of trajectories. Numbers are written in their shortest
// round-trip decimal form, so re-parsing reproduces every double bit for
// bit and identical runs produce byte-identical files. Writes go through a
// temp file plus rename.

#include "flowmap/core.hpp"
#include "flowmap/flows.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>

namespace flowmap {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general);
  return std::string(buf, res.ptr);
}

/// Writes content to path atomically (temp file in the same directory,
/// then rename).
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Header "tau,t,comp_1..comp_2n"; one row per grid point.
/// t_of_tau supplies the second column.
inline std::string state_trajectory_csv(const StateTrajectory& traj,
                                        const std::function<double(double)>& t_of_tau) {
  const int dim = traj.samples.front().dim();
  std::string out = "tau,t";
  for (int i = 1; i <= dim; ++i) out += ",comp_" + std::to_string(i);
  out += "\n";
  for (int k = 0; k <= traj.grid.steps(); ++k) {
    const double tau = traj.grid.point(k);
    out += format_double(tau);
    out += ",";
    out += format_double(t_of_tau(tau));
    const Vec& v = traj.samples[static_cast<std::size_t>(k)].values();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out += ",";
      out += format_double(v[i]);
    }
    out += "\n";
  }
  return out;
}

/// Header "tau,t_11,..,t_2n2n" (row-major entries); one row per grid point.
inline std::string matrix_trajectory_csv(const MatrixTrajectory& traj) {
  const int dim = traj.samples.front().dim();
  std::string out = "tau";
  for (int i = 1; i <= dim; ++i)
    for (int j = 1; j <= dim; ++j)
      out += ",t_" + std::to_string(i) + std::to_string(j);
  out += "\n";
  for (int k = 0; k <= traj.grid.steps(); ++k) {
    out += format_double(traj.grid.point(k));
    const Mat& m = traj.samples[static_cast<std::size_t>(k)].data();
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        out += ",";
        out += format_double(m(i, j));
      }
    out += "\n";
  }
  return out;
}

}  // namespace flowmap
