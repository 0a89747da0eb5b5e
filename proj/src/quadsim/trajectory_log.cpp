#include "skillab/quadsim/trajectory_log.hpp"

#include <cstdio>
#include <stdexcept>

namespace skillab::quadsim {

TrajectoryLog::TrajectoryLog(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot open trajectory log " + path.string());
  out_ << kTrajectoryHeader << '\n';
}

void TrajectoryLog::append(double t, const QuadState& s, const Action& u, double reward) {
  out_ << format_row(t, s, u, reward) << '\n';
}

std::string TrajectoryLog::format_row(double t, const QuadState& s, const Action& u, double reward) {
  const double fields[] = {t,      s.p[0], s.p[1], s.p[2], s.q.w,  s.q.x, s.q.y, s.q.z, s.v[0], s.v[1],
                           s.v[2], s.w[0], s.w[1], s.w[2], u[0],   u[1],  u[2],  u[3],  reward};
  std::string row;
  char buf[32];
  for (double f : fields) {
    if (!row.empty()) row += ',';
    std::snprintf(buf, sizeof buf, "%.9g", f);
    row += buf;
  }
  return row;
}

}  // namespace skillab::quadsim
