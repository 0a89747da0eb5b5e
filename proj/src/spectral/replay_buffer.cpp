#include "skillab/spectral/replay_buffer.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace skillab::spectral {

static_assert(std::endian::native == std::endian::little, "snapshot layout assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'K', 'R', 'B'};
constexpr std::uint32_t kVersion = 1;

Tensor rows_of(const std::vector<const Transition*>& rows, const std::vector<double> Transition::*field) {
  const std::size_t width = rows.empty() ? 0 : (rows.front()->*field).size();
  Tensor out = Tensor::zeros(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = rows[i]->*field;
    if (v.size() != width) throw numkit::DimensionError("stack: ragged transition field");
    std::copy(v.begin(), v.end(), out.row_span(i).begin());
  }
  return out;
}

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_vec(std::string& buf, const std::vector<double>& v) {
  put(buf, static_cast<std::uint32_t>(v.size()));
  buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::string body) : body_(std::move(body)) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, body_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<double> get_vec() {
    const auto n = get<std::uint32_t>();
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), body_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  bool done() const { return pos_ == body_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > body_.size()) throw std::runtime_error("replay snapshot: truncated record");
  }
  std::string body_;
  std::size_t pos_ = 0;
};

std::string encode(const Transition& t) {
  std::string buf;
  put_vec(buf, t.obs);
  put_vec(buf, t.action);
  put(buf, t.reward);
  put_vec(buf, t.next_obs);
  put(buf, static_cast<std::uint8_t>(t.done ? 1 : 0));
  put_vec(buf, t.ctx);
  put_vec(buf, t.next_ctx);
  return buf;
}

Transition decode(std::string body) {
  Reader r(std::move(body));
  Transition t;
  t.obs = r.get_vec();
  t.action = r.get_vec();
  t.reward = r.get<double>();
  t.next_obs = r.get_vec();
  t.done = r.get<std::uint8_t>() != 0;
  t.ctx = r.get_vec();
  t.next_ctx = r.get_vec();
  if (!r.done()) throw std::runtime_error("replay snapshot: trailing bytes in record");
  return t;
}

}  // namespace

Batch stack(const std::vector<const Transition*>& rows) {
  Batch b;
  b.obs = rows_of(rows, &Transition::obs);
  b.action = rows_of(rows, &Transition::action);
  b.next_obs = rows_of(rows, &Transition::next_obs);
  b.ctx = rows_of(rows, &Transition::ctx);
  b.next_ctx = rows_of(rows, &Transition::next_ctx);
  b.reward = Tensor::zeros(rows.size(), 1);
  b.done = Tensor::zeros(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.reward(i, 0) = rows[i]->reward;
    b.done(i, 0) = rows[i]->done ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  slots_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

ReplayBuffer::ReplayBuffer(const ReplayBuffer& other) {
  std::lock_guard lock(other.mutex_);
  capacity_ = other.capacity_;
  inserted_ = other.inserted_;
  slots_ = other.slots_;
}

ReplayBuffer& ReplayBuffer::operator=(const ReplayBuffer& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  capacity_ = other.capacity_;
  inserted_ = other.inserted_;
  slots_ = other.slots_;
  return *this;
}

void ReplayBuffer::push(Transition t) {
  std::lock_guard lock(mutex_);
  if (slots_.size() < capacity_) {
    slots_.push_back(std::move(t));
  } else {
    slots_[inserted_ % capacity_] = std::move(t);
  }
  ++inserted_;
}

void ReplayBuffer::clear() {
  std::lock_guard lock(mutex_);
  slots_.clear();
  inserted_ = 0;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return slots_.size();
}

std::uint64_t ReplayBuffer::inserted() const {
  std::lock_guard lock(mutex_);
  return inserted_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  std::lock_guard lock(mutex_);
  if (i >= slots_.size()) throw std::out_of_range("ReplayBuffer::at");
  const std::size_t oldest = slots_.size() < capacity_ ? 0 : inserted_ % capacity_;
  return slots_[(oldest + i) % slots_.size()];
}

std::vector<std::size_t> ReplayBuffer::draw_indices(std::size_t n, numkit::Rng& rng, bool replace) const {
  const std::size_t count = size();
  if (count == 0 || (!replace && n > count)) throw std::invalid_argument("ReplayBuffer: draw larger than contents");
  std::vector<std::size_t> out(n);
  if (replace) {
    for (auto& i : out) i = rng.index(count);
    return out;
  }
  std::vector<std::size_t> all(count);
  std::iota(all.begin(), all.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k + rng.index(count - k);
    std::swap(all[k], all[j]);
    out[k] = all[k];
  }
  return out;
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  std::lock_guard lock(mutex_);
  std::vector<const Transition*> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) rows.push_back(&slots_.at(i));
  return stack(rows);
}

void ReplayBuffer::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("replay snapshot: cannot write " + path.string());
  std::string head(kMagic, 4);
  put(head, kVersion);
  put(head, static_cast<std::uint64_t>(capacity_));
  put(head, inserted_);
  put(head, static_cast<std::uint64_t>(slots_.size()));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Transition& t : slots_) {
    const std::string body = encode(t);
    const auto len = static_cast<std::uint64_t>(body.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
  }
  if (!out) throw std::runtime_error("replay snapshot: write failed for " + path.string());
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("replay snapshot: cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t capacity = 0, inserted = 0, count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&capacity), sizeof capacity);
  in.read(reinterpret_cast<char*>(&inserted), sizeof inserted);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("replay snapshot: bad header");
  if (version != kVersion) throw std::runtime_error("replay snapshot: unsupported version " + std::to_string(version));
  if (count > capacity) throw std::runtime_error("replay snapshot: count exceeds capacity");
  ReplayBuffer buf(capacity);
  buf.inserted_ = inserted;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string body(len, '\0');
    in.read(body.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("replay snapshot: truncated file");
    buf.slots_.push_back(decode(std::move(body)));
  }
  return buf;
}

std::optional<Sample> sample_batch(const ReplayBuffer& buffer, std::size_t n, numkit::Rng& rng, bool replace) {
  if (n == 0 || buffer.size() < n) return std::nullopt;
  Sample s;
  s.batch = buffer.gather(buffer.draw_indices(n, rng, replace));
  s.negatives = buffer.gather(buffer.draw_indices(n, rng, replace)).next_obs;
  return s;
}

}  // namespace skillab::spectral
