#include "fedsim/random.hpp"

#include <cmath>
#include <numbers>

#include "fedsim/errors.hpp"

namespace fedsim {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::mt19937_64 make_engine(std::uint64_t root, std::uint64_t key) {
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SeededStream::SeededStream(std::uint64_t root_seed)
    : SeededStream(root_seed, {}, mix64(root_seed ^ 0x5eedULL)) {}

SeededStream::SeededStream(std::uint64_t root_seed, std::vector<std::string> path,
                           std::uint64_t key)
    : root_seed_(root_seed),
      path_(std::move(path)),
      path_key_(key),
      engine_(make_engine(root_seed, key)) {}

SeededStream SeededStream::derive(std::string_view label) {
  if (drawn_) {
    throw ContractViolation("SeededStream: cannot split '" + path_string() +
                            "' after drawing from it");
  }
  split_ = true;
  auto path = path_;
  path.emplace_back(label);
  // Length-prefix the label so ("ab","c") and ("a","bc") hash apart.
  const std::uint64_t key =
      mix64(path_key_ ^ mix64(fnv1a64(label) + 0x100000001b3ULL * label.size()));
  return SeededStream(root_seed_, std::move(path), key);
}

SeededStream SeededStream::derive(std::uint64_t index) { return derive(std::to_string(index)); }

SeededStream SeededStream::derive(std::string_view label, std::uint64_t index) {
  return derive(std::string(label) + "#" + std::to_string(index));
}

void SeededStream::check_can_draw() const {
  if (split_) {
    throw ContractViolation("SeededStream: '" + path_string() +
                            "' was split and can no longer draw");
  }
}

std::uint64_t SeededStream::next_u64() {
  check_can_draw();
  drawn_ = true;
  return engine_();
}

double SeededStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededStream::normal() {
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SeededStream::below(std::uint64_t n) {
  if (n == 0) throw ContractViolation("SeededStream::below: n must be >= 1");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::string SeededStream::path_string() const {
  std::string out = "/";
  for (std::size_t i = 0; i < path_.size(); ++i) {
    if (i) out += '/';
    out += path_[i];
  }
  return out;
}

}  // namespace fedsim
