#include "skillab/pipeline/agent.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <utility>

namespace skillab::pipeline {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'K', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

using ConstParams = std::vector<const numkit::Parameter*>;

void add(std::vector<NamedTensor>& out, const std::string& prefix, const ConstParams& params) {
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back({prefix + "." + std::to_string(i), params[i]->value});
}

void fill(const Checkpoint& ckpt, const std::string& prefix, const std::vector<numkit::Parameter*>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = prefix + "." + std::to_string(i);
    const auto* t = ckpt.find(name);
    if (t == nullptr) throw std::runtime_error("checkpoint: missing block " + name);
    if (!t->same_shape(params[i]->value)) throw std::runtime_error("checkpoint: shape mismatch in block " + name);
    params[i]->value = *t;
  }
}

bool has_prefix(const Checkpoint& ckpt, const std::string& prefix) {
  for (const auto& b : ckpt.blocks)
    if (b.name.rfind(prefix + ".", 0) == 0) return true;
  return false;
}

void set(numkit::Tensor& dst, const Checkpoint& ckpt, const std::string& name) {
  const auto* t = ckpt.find(name);
  if (t == nullptr) throw std::runtime_error("checkpoint: missing block " + name);
  if (!t->same_shape(dst)) throw std::runtime_error("checkpoint: shape mismatch in block " + name);
  dst = *t;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

std::string_view stage_name(Stage s) { return s == Stage::kSimulator ? "simulator" : "real"; }

Agent::Agent(const ExperimentConfig& c) : cfg(c) {
  cfg.validate();
  const numkit::Rng init = numkit::Rng(cfg.seed).derive("init");
  auto feature_rng = init.derive("sim_features");
  sim = spectral::FeaturePair(quadsim::kObsWidth, quadsim::kActionWidth, cfg.dim, cfg.feature_hidden, feature_rng);
  q = planner::LinearQ(&sim);
  target = planner::TargetQ(q);
  auto actor_rng = init.derive("actor");
  actor = mellinger::StochasticActor(mellinger::MellingerGains::defaults(), cfg.controller(), cfg.actor(), actor_rng);
}

void Agent::begin_real_stage() {
  stage = Stage::kReal;
  anchor = actor;
  if (!cfg.skill_transfer_only) {
    auto rng = numkit::Rng(cfg.seed).derive("init").derive("residual");
    res.emplace(quadsim::kObsWidth, quadsim::kActionWidth, cfg.residual_dim, cfg.feature_hidden, rng);
    q.attach_residual(&*res);
  }
  target = planner::TargetQ(q);
}

const numkit::Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b.value;
  return nullptr;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint8_t>(stage));
  const char pad[3] = {0, 0, 0};
  out.write(pad, 3);
  put(out, config_hash);
  put(out, counters.transitions);
  put(out, counters.episodes);
  put(out, counters.gradient_steps);
  put(out, static_cast<std::uint32_t>(config_text.size()));
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  put(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    put(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put(out, static_cast<std::uint32_t>(b.value.rows()));
    put(out, static_cast<std::uint32_t>(b.value.cols()));
    const auto d = b.value.data();
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw UsageError("not a checkpoint file: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw UsageError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  const auto stage = get<std::uint8_t>(in);
  if (stage != 1 && stage != 2) throw UsageError("checkpoint has an unknown stage tag");
  c.stage = static_cast<Stage>(stage);
  char pad[3];
  in.read(pad, 3);
  c.config_hash = get<std::uint64_t>(in);
  c.counters.transitions = get<std::uint64_t>(in);
  c.counters.episodes = get<std::uint64_t>(in);
  c.counters.gradient_steps = get<std::uint64_t>(in);
  c.config_text = get_string(in);
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor b;
    b.name = get_string(in);
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    b.value = numkit::Tensor::zeros(rows, cols);
    auto d = b.value.data();
    in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    c.blocks.push_back(std::move(b));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  if (c.config().hash() != c.config_hash) throw std::runtime_error("checkpoint: config hash mismatch");
  return c;
}

Checkpoint capture(const Agent& a) {
  Checkpoint c;
  c.stage = a.stage;
  c.config_text = a.cfg.to_text();
  c.config_hash = a.cfg.hash();
  c.counters = a.counters;
  auto& b = c.blocks;
  add(b, "sim", std::as_const(a.sim).parameters());
  if (a.res) add(b, "res", std::as_const(*a.res).parameters());
  b.push_back({"q.w1", a.q.w1().value});
  b.push_back({"q.w2", a.q.w2().value});
  add(b, "target.sim", a.target.sim().parameters());
  if (a.target.res()) add(b, "target.res", a.target.res()->parameters());
  b.push_back({"target.w1", a.target.w1()});
  b.push_back({"target.w2", a.target.w2()});
  add(b, "actor", std::as_const(a.actor).parameters());
  if (a.anchor) add(b, "anchor", std::as_const(*a.anchor).parameters());
  return c;
}

std::unique_ptr<Agent> restore(const Checkpoint& ckpt) {
  auto a = std::make_unique<Agent>(ckpt.config());
  a->stage = ckpt.stage;
  a->counters = ckpt.counters;
  fill(ckpt, "sim", a->sim.parameters());
  if (has_prefix(ckpt, "anchor")) a->anchor = a->actor;
  if (has_prefix(ckpt, "res")) {
    auto rng = numkit::Rng(a->cfg.seed).derive("init").derive("residual");
    a->res.emplace(quadsim::kObsWidth, quadsim::kActionWidth, a->cfg.residual_dim, a->cfg.feature_hidden, rng);
    fill(ckpt, "res", a->res->parameters());
    a->q.attach_residual(&*a->res);
  }
  set(a->q.w1().value, ckpt, "q.w1");
  set(a->q.w2().value, ckpt, "q.w2");
  a->target = planner::TargetQ(a->q);
  fill(ckpt, "target.sim", a->target.sim().parameters());
  if (a->target.res()) fill(ckpt, "target.res", a->target.res()->parameters());
  set(a->target.w1(), ckpt, "target.w1");
  set(a->target.w2(), ckpt, "target.w2");
  fill(ckpt, "actor", a->actor.parameters());
  if (a->anchor) fill(ckpt, "anchor", a->anchor->parameters());
  return a;
}

}  // namespace skillab::pipeline
