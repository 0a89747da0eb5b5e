#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skillab/mellinger/control_law.hpp"
#include "skillab/numkit/mlp.hpp"
#include "skillab/numkit/random.hpp"
#include "skillab/quadsim/quadsim.hpp"

namespace skillab::mellinger {

using geo::Mat3d;
using geo::Vec3d;
using numkit::ParamMode;
using numkit::Tensor;
using numkit::Var;
using quadsim::Action;
using quadsim::Observation;
using quadsim::QuadState;

class SingularThrustError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Firmware-style parameter names in gain_index order.
extern const std::array<std::string_view, kNumGains> kGainNames;

struct MellingerGains {
  std::array<double, kNumGains> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double get(Family f, Term t, Axis a) const { return values[gain_index(f, t, a)]; }
  void set(Family f, Term t, Axis a, double v) { values[gain_index(f, t, a)] = v; }

  /// Built-in baseline gains.
  static MellingerGains defaults();

  std::string to_json() const;
  static MellingerGains from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static MellingerGains load(const std::filesystem::path& path);
};

struct Reference {
  Vec3d pos{};
  Vec3d vel{};
  Vec3d acc{};
  double yaw = 0.0;
  Vec3d rates{};
};

struct ControllerMemory {
  Vec3d int_pos{}, int_vel{}, int_att{}, int_rate{};
  Vec3d prev_pos{}, prev_vel{}, prev_att{}, prev_rate{};
  Vec3d diff_pos{}, diff_att{}, diff_rate{};
  Mat3d prev_r_des = geo::kIdentity;

  void reset() { *this = ControllerMemory{}; }
  quadsim::TrackingErrorSummary summary() const;
};

struct ControlDetail {
  Action action{};  // squashed into bounds
  Action raw{};
  Vec3d f_des{};
  double thrust = 0.0;
  Mat3d r_des{};
  Vec3d e_att{};
};

/// One controller step on the measured state. Updates `mem`.
ControlDetail compute_control_detail(const QuadState& measured, const Reference& ref, const MellingerGains& gains,
                                     ControllerMemory& mem, const ControllerConfig& cfg);

inline Action compute_control(const QuadState& measured, const Reference& ref, const MellingerGains& gains,
                              ControllerMemory& mem, const ControllerConfig& cfg) {
  return compute_control_detail(measured, ref, gains, mem, cfg).action;
}

/// Holds `previous` if both the heading and the body-x fallback are degenerate.
Mat3d desired_rotation(const Vec3d& f_des, double yaw, const Mat3d& r_current, const Mat3d& previous = geo::kIdentity);
Vec3d rotation_error(const Mat3d& r_des, const Mat3d& r);

Action squash_action(const Action& raw, const quadsim::ActionBounds& b);

// Controller context: everything compute_control reads, flattened so a batch of
// past steps can be replayed through the taped law.
inline constexpr std::size_t kCtxPos = 0;
inline constexpr std::size_t kCtxQuat = 3;
inline constexpr std::size_t kCtxVel = 7;
inline constexpr std::size_t kCtxOmega = 10;
inline constexpr std::size_t kCtxRefPos = 13;
inline constexpr std::size_t kCtxRefVel = 16;
inline constexpr std::size_t kCtxRefAcc = 19;
inline constexpr std::size_t kCtxRefYaw = 22;
inline constexpr std::size_t kCtxRefRates = 23;
inline constexpr std::size_t kCtxMemory = 26;  // int pos/vel/att/rate, then prev pos/vel/att/rate
inline constexpr std::size_t kCtxWidth = 50;

using Context = std::array<double, kCtxWidth>;

Context make_context(const QuadState& measured, const Reference& ref, const ControllerMemory& mem);

/// Columns of an n x kCtxWidth batch as taped constants.
ControlInputsT<Var> inputs_from_context(const Tensor& ctx);

/// Taped n x 4 raw action for a batch of contexts; gains is a 1 x 24 row.
Var control_raw_batch(const Tensor& ctx, const Var& gains, const ControllerConfig& cfg);

// Squashed diagonal Gaussian over the pre-squash action z = raw + sigma * eps.

struct Draw {
  Action action{};
  Action pre_squash{};
  double log_prob = 0.0;
};

/// std entries may be zero, in which case the action is the squashed mean and log_prob is +inf.
Draw draw_squashed(const Action& mean_raw, const Action& std, const quadsim::ActionBounds& b, numkit::Rng& rng);
double squashed_log_prob(const Action& pre_squash, const Action& mean_raw, const Action& std,
                         const quadsim::ActionBounds& b);

struct ActorConfig {
  std::vector<std::size_t> hidden{64, 64};
  double init_log_std = -3.5;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

/// Smallest gain the actor represents.
inline constexpr double kGainFloor = 1e-4;

class StochasticActor {
 public:
  StochasticActor() = default;
  StochasticActor(const MellingerGains& init, const ControllerConfig& ctl, const ActorConfig& cfg, numkit::Rng& rng);

  MellingerGains gains() const;
  void set_gains(const MellingerGains& g);
  numkit::Parameter& raw_gains() { return raw_gains_; }
  const numkit::Parameter& raw_gains() const { return raw_gains_; }
  numkit::Mlp& std_head() { return head_; }
  const numkit::Mlp& std_head() const { return head_; }
  std::vector<numkit::Parameter*> parameters();
  std::vector<const numkit::Parameter*> parameters() const;
  const ControllerConfig& controller() const { return ctl_; }
  void set_controller(const ControllerConfig& c) { ctl_ = c; }
  const ActorConfig& config() const { return cfg_; }

  Action log_std(const Observation& obs) const;

  /// Deterministic mean path.
  Action act(const QuadState& measured, const Reference& ref, ControllerMemory& mem) const;
  Draw sample_action(const Observation& obs, const QuadState& measured, const Reference& ref, ControllerMemory& mem,
                     numkit::Rng& rng) const;

  /// softplus(raw) as a taped 1 x 24 row.
  Var gains_var(ParamMode mode);
  Var mean_raw(const Tensor& ctx, ParamMode mode);
  Var log_std(const Tensor& obs, ParamMode mode);

  struct Batch {
    Var action;    // n x 4, squashed
    Var log_prob;  // n x 1
    Var mean;      // n x 4, pre-squash mean
    Var log_std;   // n x 4
  };
  /// Reparameterized batch draw with caller-supplied standard normal noise (n x 4).
  Batch sample_batch(const Tensor& obs, const Tensor& ctx, const Tensor& eps, ParamMode mode);

 private:
  Var map_log_std(const Var& h) const;

  ControllerConfig ctl_{};
  ActorConfig cfg_{};
  numkit::Parameter raw_gains_{};
  numkit::Mlp head_{};
};

/// Row-wise closed-form KL(N(m_a, e^{2 l_a}) || N(m_b, e^{2 l_b})) over diagonal Gaussians, n x 1.
Var gaussian_kl(const Var& mean_a, const Var& log_std_a, const Var& mean_b, const Var& log_std_b);

}  // namespace skillab::mellinger
