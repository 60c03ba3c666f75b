#include "distlift/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "distlift/errors.hpp"

namespace distlift {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b * 0x9e3779b97f4a7c15ULL);
  std::uint64_t m = splitmix64(state);
  return splitmix64(state) ^ m;
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t state = seed;
  // Seed the engine from splitmix64 output so that small consecutive user
  // seeds still give well-separated engine states.
  engine_.seed(splitmix64(state));
}

std::uint64_t RngStream::raw() { return engine_(); }

double RngStream::uniform() {
  // Top 53 bits -> [0, 1) with every value representable exactly.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw InvalidInputError("uniform: lo > hi");
  return lo + (hi - lo) * uniform();
}

double RngStream::gaussian() {
  if (have_cached_gaussian_) {
    have_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // Box-Muller; u1 is kept away from zero so the log is finite.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 == 0.0);
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  cached_gaussian_ = mag * std::sin(ang);
  have_cached_gaussian_ = true;
  return mag * std::cos(ang);
}

double RngStream::gaussian(double mean, double sigma) {
  return mean + sigma * gaussian();
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw InvalidInputError("uniform_index: n == 0");
  // Rejection sampling over the largest multiple of n that fits in 64 bits.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

RngStream RngStream::derive(std::uint64_t salt) const {
  return RngStream(mix_seed(seed_, salt));
}

std::string RngStream::save_state() const {
  std::ostringstream out;
  out << seed_ << ' ' << (have_cached_gaussian_ ? 1 : 0) << ' ';
  out.precision(17);
  out << cached_gaussian_ << ' ' << engine_;
  return out.str();
}

void RngStream::load_state(const std::string& state) {
  std::istringstream in(state);
  int have = 0;
  if (!(in >> seed_ >> have >> cached_gaussian_ >> engine_))
    throw ParseError("rng state: malformed");
  have_cached_gaussian_ = have != 0;
}

}  // namespace distlift
