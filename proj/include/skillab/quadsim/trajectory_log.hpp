#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "skillab/quadsim/quadsim.hpp"

namespace skillab::quadsim {

inline constexpr const char* kTrajectoryHeader = "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,u1,u2,u3,u4,reward";

/// One row per control step, 9 significant digits.
class TrajectoryLog {
 public:
  explicit TrajectoryLog(const std::filesystem::path& path);

  void append(double t, const QuadState& s, const Action& u, double reward);
  void flush() { out_.flush(); }

  static std::string format_row(double t, const QuadState& s, const Action& u, double reward);

 private:
  std::ofstream out_;
};

}  // namespace skillab::quadsim
