#include "skillab/mellinger/mellinger.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace skillab::mellinger {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// log(1 - tanh(u)^2), stable for large |u|.
double log_dtanh(double u) {
  return 2.0 * (std::numbers::ln2 - u - numkit::softplus(-2.0 * u));
}

Var log_dtanh(const Var& u) {
  return (std::numbers::ln2 - u - numkit::softplus(u * -2.0)) * 2.0;
}

geo::Vec3<Var> ctx_vec3(const Tensor& ctx, std::size_t at) {
  return {numkit::constant(numkit::cols_slice(ctx, at, 1)), numkit::constant(numkit::cols_slice(ctx, at + 1, 1)),
          numkit::constant(numkit::cols_slice(ctx, at + 2, 1))};
}

void put3(Context& c, std::size_t at, const Vec3d& v) {
  for (int i = 0; i < 3; ++i) c[at + i] = v[i];
}

}  // namespace

const std::array<std::string_view, kNumGains> kGainNames{
    "kp_xy",  "kp_z",    "ki_xy",  "ki_z",   "kdp_xy", "kdp_z",  "kd_xy", "kd_z",   "kiv_xy",      "kiv_z",
    "kdv_xy", "kdv_z",   "kR_xy",  "kR_z",   "ki_m_xy", "ki_m_z", "kdR_xy", "kdR_z", "kw_xy",      "kw_z",
    "kiw_xy", "kiw_z",   "kd_omega_rp", "kd_omega_y"};

ControllerConfig ControllerConfig::from_params(const quadsim::PhysicalParams& p) {
  ControllerConfig c;
  c.mass = p.mass;
  c.gravity = p.gravity;
  c.force_scale = p.force_scale;
  c.dt = p.control_period;
  c.bounds.hi[0] = p.max_normalized_force();
  return c;
}

MellingerGains MellingerGains::defaults() {
  MellingerGains g;
  auto set = [&g](Family f, double p_xy, double p_z, double i_xy, double i_z, double d_xy, double d_z) {
    g.set(f, Term::kP, Axis::kXY, p_xy);
    g.set(f, Term::kP, Axis::kZ, p_z);
    g.set(f, Term::kI, Axis::kXY, i_xy);
    g.set(f, Term::kI, Axis::kZ, i_z);
    g.set(f, Term::kD, Axis::kXY, d_xy);
    g.set(f, Term::kD, Axis::kZ, d_z);
  };
  //                       P_xy  P_z    I_xy   I_z    D_xy   D_z
  set(Family::kPosition,   0.78, 0.875, 0.024, 0.096, 0.148, 2.31);
  set(Family::kVelocity,   0.28, 0.4,   0.0,   0.0,   0.0,   0.0);
  set(Family::kAttitude,   1.4,  0.137, 0.0,   0.0,   26.5,  0.0);
  set(Family::kRate,       0.2,  0.049, 0.0,   0.0,   2.37,  0.0);
  return g;
}

std::string MellingerGains::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kNumGains; ++i) j[std::string(kGainNames[i])] = values[i];
  return j.dump(2);
}

MellingerGains MellingerGains::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("gains JSON must be an object");
  MellingerGains g;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < kNumGains; ++i) {
    const auto it = j.find(std::string(kGainNames[i]));
    if (it == j.end()) throw std::invalid_argument("gains JSON missing '" + std::string(kGainNames[i]) + "'");
    g.values[i] = it->get<double>();
    if (!(g.values[i] >= 0.0) || !std::isfinite(g.values[i]))
      throw std::invalid_argument("gain '" + std::string(kGainNames[i]) + "' must be finite and nonnegative");
    ++seen;
  }
  if (j.size() != seen) throw std::invalid_argument("gains JSON has unknown keys");
  return g;
}

void MellingerGains::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json() << '\n';
}

MellingerGains MellingerGains::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

quadsim::TrackingErrorSummary ControllerMemory::summary() const {
  return {int_pos, diff_pos, int_att, diff_att, int_rate, diff_rate};
}

ControlDetail compute_control_detail(const QuadState& m, const Reference& ref, const MellingerGains& gains,
                                     ControllerMemory& mem, const ControllerConfig& cfg) {
  ControlInputsT<double> in{m.p,         m.v,          m.w,          m.q,           ref.pos,
                            ref.vel,     ref.acc,      ref.yaw,      ref.rates,     mem.int_pos,
                            mem.int_vel, mem.int_att,  mem.int_rate, mem.prev_pos,  mem.prev_vel,
                            mem.prev_att, mem.prev_rate, &mem.prev_r_des};
  const auto out = control_law(in, gains.values, cfg);
  if (!(geo::norm(out.f_des) > 0.0) || !std::isfinite(geo::norm(out.f_des)))
    throw SingularThrustError("desired force vanished");

  mem.int_pos = out.int_pos;
  mem.int_vel = out.int_vel;
  mem.int_att = out.int_att;
  mem.int_rate = out.int_rate;
  mem.prev_pos = out.err_pos;
  mem.prev_vel = out.err_vel;
  mem.prev_att = out.e_att;
  mem.prev_rate = out.e_rate;
  mem.diff_pos = out.diff_pos;
  mem.diff_att = out.diff_att;
  mem.diff_rate = out.diff_rate;
  mem.prev_r_des = out.r_des;

  ControlDetail d;
  d.raw = out.raw;
  d.action = squash_action(out.raw, cfg.bounds);
  d.f_des = out.f_des;
  d.thrust = out.thrust;
  d.r_des = out.r_des;
  d.e_att = out.e_att;
  return d;
}

Mat3d desired_rotation(const Vec3d& f_des, double yaw, const Mat3d& r_current, const Mat3d& previous) {
  if (!(geo::norm(f_des) > 0.0)) throw SingularThrustError("desired force vanished");
  return desired_rotation_generic(f_des, yaw, r_current, &previous);
}

Vec3d rotation_error(const Mat3d& r_des, const Mat3d& r) { return rotation_error_generic(r_des, r); }

Action squash_action(const Action& raw, const quadsim::ActionBounds& b) {
  const Action c = b.center(), h = b.half_width();
  Action a{};
  for (int i = 0; i < 4; ++i) a[i] = squash(raw[i], c[i], h[i]);
  return a;
}

Context make_context(const QuadState& m, const Reference& ref, const ControllerMemory& mem) {
  Context c{};
  put3(c, kCtxPos, m.p);
  c[kCtxQuat] = m.q.w;
  c[kCtxQuat + 1] = m.q.x;
  c[kCtxQuat + 2] = m.q.y;
  c[kCtxQuat + 3] = m.q.z;
  put3(c, kCtxVel, m.v);
  put3(c, kCtxOmega, m.w);
  put3(c, kCtxRefPos, ref.pos);
  put3(c, kCtxRefVel, ref.vel);
  put3(c, kCtxRefAcc, ref.acc);
  c[kCtxRefYaw] = ref.yaw;
  put3(c, kCtxRefRates, ref.rates);
  const Vec3d* blocks[] = {&mem.int_pos,  &mem.int_vel,  &mem.int_att,  &mem.int_rate,
                           &mem.prev_pos, &mem.prev_vel, &mem.prev_att, &mem.prev_rate};
  for (std::size_t b = 0; b < 8; ++b) put3(c, kCtxMemory + 3 * b, *blocks[b]);
  return c;
}

ControlInputsT<Var> inputs_from_context(const Tensor& ctx) {
  if (ctx.cols() != kCtxWidth)
    throw numkit::DimensionError("controller context must have " + std::to_string(kCtxWidth) + " columns");
  auto col = [&ctx](std::size_t c) { return numkit::constant(numkit::cols_slice(ctx, c, 1)); };
  ControlInputsT<Var> in;
  in.p = ctx_vec3(ctx, kCtxPos);
  in.q = {col(kCtxQuat), col(kCtxQuat + 1), col(kCtxQuat + 2), col(kCtxQuat + 3)};
  in.v = ctx_vec3(ctx, kCtxVel);
  in.w = ctx_vec3(ctx, kCtxOmega);
  in.ref_pos = ctx_vec3(ctx, kCtxRefPos);
  in.ref_vel = ctx_vec3(ctx, kCtxRefVel);
  in.ref_acc = ctx_vec3(ctx, kCtxRefAcc);
  in.ref_yaw = col(kCtxRefYaw);
  in.ref_rates = ctx_vec3(ctx, kCtxRefRates);
  geo::Vec3<Var>* blocks[] = {&in.int_pos,  &in.int_vel,  &in.int_att,  &in.int_rate,
                              &in.prev_pos, &in.prev_vel, &in.prev_att, &in.prev_rate};
  for (std::size_t b = 0; b < 8; ++b) *blocks[b] = ctx_vec3(ctx, kCtxMemory + 3 * b);
  return in;
}

Var control_raw_batch(const Tensor& ctx, const Var& gains, const ControllerConfig& cfg) {
  std::array<Var, kNumGains> g;
  for (std::size_t i = 0; i < kNumGains; ++i) g[i] = numkit::slice_cols(gains, i, 1);
  const auto out = control_law(inputs_from_context(ctx), g, cfg);
  return numkit::hcat(std::vector<Var>{out.raw[0], out.raw[1], out.raw[2], out.raw[3]});
}

Draw draw_squashed(const Action& mean_raw, const Action& std, const quadsim::ActionBounds& b, numkit::Rng& rng) {
  Draw d;
  for (int i = 0; i < 4; ++i) d.pre_squash[i] = mean_raw[i] + std[i] * rng.normal();
  d.action = squash_action(d.pre_squash, b);
  d.log_prob = squashed_log_prob(d.pre_squash, mean_raw, std, b);
  return d;
}

double squashed_log_prob(const Action& z, const Action& mean_raw, const Action& std, const quadsim::ActionBounds& b) {
  const Action c = b.center(), h = b.half_width();
  double lp = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (std[i] <= 0.0) return z[i] == mean_raw[i] ? std::numeric_limits<double>::infinity()
                                                   : -std::numeric_limits<double>::infinity();
    const double e = (z[i] - mean_raw[i]) / std[i];
    lp += -0.5 * e * e - std::log(std[i]) - kHalfLog2Pi;
    lp -= log_dtanh((z[i] - c[i]) / h[i]);
  }
  return lp;
}

StochasticActor::StochasticActor(const MellingerGains& init, const ControllerConfig& ctl, const ActorConfig& cfg,
                                 numkit::Rng& rng)
    : ctl_(ctl), cfg_(cfg) {
  if (!(cfg.log_std_min < cfg.init_log_std && cfg.init_log_std < cfg.log_std_max))
    throw std::invalid_argument("initial log-std must lie strictly inside the log-std bounds");
  raw_gains_ = numkit::Parameter(Tensor::zeros(1, kNumGains));
  set_gains(init);
  std::vector<std::size_t> widths{quadsim::kObsWidth};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(quadsim::kActionWidth);
  head_ = numkit::Mlp(widths, rng);
  const std::size_t last = head_.num_layers() - 1;
  head_.weight(last).value *= 0.1;
  const double t = 2.0 * (cfg.init_log_std - cfg.log_std_min) / (cfg.log_std_max - cfg.log_std_min) - 1.0;
  head_.bias(last).value.fill(std::atanh(t));
}

MellingerGains StochasticActor::gains() const {
  MellingerGains g;
  for (std::size_t i = 0; i < kNumGains; ++i) g.values[i] = numkit::softplus(raw_gains_.value[i]);
  return g;
}

void StochasticActor::set_gains(const MellingerGains& g) {
  for (std::size_t i = 0; i < kNumGains; ++i) {
    // softplus cannot reach zero; the floor keeps switched-off terms trainable.
    raw_gains_.value[i] = numkit::softplus_inverse(std::max(g.values[i], kGainFloor));
  }
}

std::vector<numkit::Parameter*> StochasticActor::parameters() {
  std::vector<numkit::Parameter*> out{&raw_gains_};
  for (auto* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<const numkit::Parameter*> StochasticActor::parameters() const {
  std::vector<const numkit::Parameter*> out{&raw_gains_};
  for (const auto* p : head_.parameters()) out.push_back(p);
  return out;
}

Action StochasticActor::log_std(const Observation& obs) const {
  const Tensor h = head_.eval(Tensor::row(std::vector<double>(obs.begin(), obs.end())));
  Action out{};
  const double span = cfg_.log_std_max - cfg_.log_std_min;
  for (int i = 0; i < 4; ++i) out[i] = cfg_.log_std_min + 0.5 * span * (std::tanh(h[i]) + 1.0);
  return out;
}

Action StochasticActor::act(const QuadState& measured, const Reference& ref, ControllerMemory& mem) const {
  return compute_control(measured, ref, gains(), mem, ctl_);
}

Draw StochasticActor::sample_action(const Observation& obs, const QuadState& measured, const Reference& ref,
                                    ControllerMemory& mem, numkit::Rng& rng) const {
  const Action mean = compute_control_detail(measured, ref, gains(), mem, ctl_).raw;
  const Action ls = log_std(obs);
  Action sd{};
  for (int i = 0; i < 4; ++i) sd[i] = std::exp(ls[i]);
  return draw_squashed(mean, sd, ctl_.bounds, rng);
}

Var StochasticActor::gains_var(ParamMode mode) {
  const Var raw = mode == ParamMode::kTrack ? numkit::leaf(raw_gains_) : numkit::constant(raw_gains_.value);
  return numkit::softplus(raw);
}

Var StochasticActor::mean_raw(const Tensor& ctx, ParamMode mode) {
  return control_raw_batch(ctx, gains_var(mode), ctl_);
}

Var StochasticActor::map_log_std(const Var& h) const {
  const double span = cfg_.log_std_max - cfg_.log_std_min;
  return (numkit::tanh(h) + 1.0) * (0.5 * span) + cfg_.log_std_min;
}

Var StochasticActor::log_std(const Tensor& obs, ParamMode mode) {
  return map_log_std(head_.forward(numkit::constant(obs), mode));
}

StochasticActor::Batch StochasticActor::sample_batch(const Tensor& obs, const Tensor& ctx, const Tensor& eps,
                                                     ParamMode mode) {
  if (obs.rows() != ctx.rows() || eps.rows() != obs.rows() || eps.cols() != quadsim::kActionWidth)
    throw numkit::DimensionError("sample_batch: obs, ctx and noise must share the batch size");
  Batch b;
  b.mean = mean_raw(ctx, mode);
  b.log_std = log_std(obs, mode);
  const Var e = numkit::constant(eps);
  const Var z = b.mean + numkit::exp(b.log_std) * e;
  const Action c = ctl_.bounds.center(), h = ctl_.bounds.half_width();
  const Var center = numkit::constant(Tensor::row(c));
  const Var half = numkit::constant(Tensor::row(h));
  const Var u = (z - center) / half;
  b.action = numkit::tanh(u) * half + center;
  const Var gauss = numkit::square(e) * -0.5 - b.log_std - kHalfLog2Pi;
  b.log_prob = numkit::row_sums(gauss - log_dtanh(u));
  return b;
}

Var gaussian_kl(const Var& mean_a, const Var& log_std_a, const Var& mean_b, const Var& log_std_b) {
  const Var var_a = numkit::exp(log_std_a * 2.0);
  const Var inv_var_b = numkit::exp(log_std_b * -2.0);
  const Var term = log_std_b - log_std_a + (var_a + numkit::square(mean_a - mean_b)) * inv_var_b * 0.5 - 0.5;
  return numkit::row_sums(term);
}

}  // namespace skillab::mellinger
