#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace lrplab {

/// Identifies one random stream: all randomness of an experiment flows from
/// `master_seed`, and job `index` owns the stream keyed by both.
struct StreamId {
  std::uint64_t master_seed = 0;
  std::uint64_t index = 0;
};

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit master seed is the key; the 128-bit counter is
/// (stream index, block counter). Distinct indices therefore never share a
/// block, and any stream can be re-created from its StreamId alone.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(StreamId id) noexcept
      : key_{static_cast<std::uint32_t>(id.master_seed),
             static_cast<std::uint32_t>(id.master_seed >> 32)},
        stream_(id.index) {}

  Philox(std::uint64_t master_seed, std::uint64_t index) noexcept
      : Philox(StreamId{master_seed, index}) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() noexcept {
    if (slot_ == 2) {
      refill();
    }
    return buffer_[slot_++];
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1], safe as a logarithm argument.
  double uniform_open0() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard exponential by inversion.
  double exponential() noexcept { return -std::log(uniform_open0()); }

  std::uint64_t blocks_used() const noexcept { return block_; }

  /// One Philox4x32-10 bijection of `ctr` under `key`.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  void refill() noexcept {
    const auto ctr = block(
        {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        key_);
    buffer_[0] = (static_cast<std::uint64_t>(ctr[1]) << 32) | ctr[0];
    buffer_[1] = (static_cast<std::uint64_t>(ctr[3]) << 32) | ctr[2];
    ++block_;
    slot_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int slot_ = 2;
};

/// Per-job generator: xoshiro256++ whose 256-bit state is the first two
/// Philox blocks of the job's StreamId. Stream derivation is counter-based
/// and stateless; generation inside a stream is the fast xoshiro recurrence.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(StreamId id) noexcept {
    Philox seeder(id);
    for (auto& word : state_) {
      word = seeder();
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
      state_[0] = 1;
    }
  }
  Rng(std::uint64_t master_seed, std::uint64_t index) noexcept
      : Rng(StreamId{master_seed, index}) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t out = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return out;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  double uniform_open0() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard exponential by inversion.
  double exponential() noexcept { return -std::log(uniform_open0()); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace lrplab
