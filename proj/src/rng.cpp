#include "elfit/rng.hpp"

#include <cmath>
#include <numbers>

namespace elfit {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kStreamMul = 0xd1342543de82ef95ull;
}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), key_(mix64(mix64(seed ^ kGolden) ^ (stream_id * kStreamMul + 1))) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double RngStream::sign() {
  return (next_u64() >> 63) ? 1.0 : -1.0;
}

RngStream RngStream::split(std::uint64_t tag) const {
  return RngStream(key_, mix64(tag + kGolden) ^ stream_);
}

}  // namespace elfit
