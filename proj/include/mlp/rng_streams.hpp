// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file rng_streams.hpp
 * \brief Multi-index keyed counter-based random streams.
 *
 * Every member of an independent random family is addressed by a MultiIndex
 * (a finite sequence of signed integers). A StreamKey binds an experiment
 * seed, a MultiIndex and a purpose tag to a 128-bit BLAKE2b digest; the
 * digest keys a Philox4x32-10 block cipher whose counter is the draw ordinal.
 * Derivation and sampling are pure functions with no shared state.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include <sodium.h>

#include "mlp/errors.hpp"

namespace mlp {

/// Recorded in every output header.
inline constexpr const char* generator_name =
    "philox4x32-10/blake2b-128/box-muller";
inline constexpr int generator_version = 1;

//---------------------------------------------------------------------------//
// MultiIndex
//---------------------------------------------------------------------------//
class MultiIndex {
  public:
    using value_type = std::int64_t;

    MultiIndex() : path_{0} {}
    MultiIndex(std::initializer_list<value_type> path) : path_(path) {
        detail::require(!path_.empty(), "MultiIndex must have length >= 1");
    }
    explicit MultiIndex(std::vector<value_type> path) : path_(std::move(path)) {
        detail::require(!path_.empty(), "MultiIndex must have length >= 1");
    }

    //! The root experiment index (0).
    static MultiIndex root() { return MultiIndex{}; }

    std::span<const value_type> path() const { return path_; }
    std::size_t size() const { return path_.size(); }
    value_type operator[](std::size_t i) const { return path_[i]; }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

  private:
    std::vector<value_type> path_;
};

inline std::ostream& operator<<(std::ostream& os, const MultiIndex& idx) {
    os << '(';
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) os << ',';
        os << idx[i];
    }
    return os << ')';
}

/// Append \p suffix to \p parent. Throws UsageError on an empty suffix.
inline MultiIndex derive(const MultiIndex& parent,
                         std::span<const MultiIndex::value_type> suffix) {
    detail::require(!suffix.empty(), "derive: suffix must be non-empty");
    std::vector<MultiIndex::value_type> path(parent.path().begin(),
                                             parent.path().end());
    path.insert(path.end(), suffix.begin(), suffix.end());
    return MultiIndex(std::move(path));
}

inline MultiIndex derive(const MultiIndex& parent,
                         std::initializer_list<MultiIndex::value_type> suffix) {
    return derive(parent, std::span<const MultiIndex::value_type>(
                              suffix.begin(), suffix.size()));
}

//---------------------------------------------------------------------------//
// StreamKey
//---------------------------------------------------------------------------//
/// Purpose separation for draws attached to one MultiIndex.
enum class StreamTag : std::uint8_t {
    time_uniform = 1,    //!< the uniform behind R^theta
    field_increment = 2, //!< Brownian increments of X^theta
    auxiliary = 3,       //!< estimator-external sampling (constants, tests)
};

struct StreamKey {
    std::uint64_t seed = 0;
    std::array<std::uint32_t, 4> digest{};

    friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

namespace detail {

inline void put_le64(unsigned char*& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) *out++ = static_cast<unsigned char>(v >> (8 * b));
}

inline void ensure_sodium() {
    static const int status = sodium_init();
    (void)status;
}

} // namespace detail

/*!
 * Key for (seed, index, tag).
 *
 * Hashed message: seed (LE64) | tag (1 byte) | length (LE64) | path entries
 * (LE64 two's complement). The length prefix makes the encoding prefix-free.
 */
inline StreamKey make_key(std::uint64_t seed,
                          std::span<const MultiIndex::value_type> path,
                          StreamTag tag) {
    detail::ensure_sodium();
    constexpr std::size_t inline_cap = 8 + 1 + 8 + 8 * 32;
    unsigned char small[inline_cap];
    std::vector<unsigned char> large;
    std::size_t const len = 17 + 8 * path.size();
    unsigned char* buf = small;
    if (len > inline_cap) {
        large.resize(len);
        buf = large.data();
    }
    unsigned char* out = buf;
    detail::put_le64(out, seed);
    *out++ = static_cast<unsigned char>(tag);
    detail::put_le64(out, path.size());
    for (auto v : path) detail::put_le64(out, static_cast<std::uint64_t>(v));

    unsigned char hash[16];
    crypto_generichash(hash, sizeof hash, buf, len, nullptr, 0);

    StreamKey key;
    key.seed = seed;
    for (int w = 0; w < 4; ++w) {
        key.digest[w] = std::uint32_t(hash[4 * w]) |
                        std::uint32_t(hash[4 * w + 1]) << 8 |
                        std::uint32_t(hash[4 * w + 2]) << 16 |
                        std::uint32_t(hash[4 * w + 3]) << 24;
    }
    return key;
}

inline StreamKey make_key(std::uint64_t seed, const MultiIndex& idx,
                          StreamTag tag) {
    return make_key(seed, idx.path(), tag);
}

//---------------------------------------------------------------------------//
// Philox4x32-10
//---------------------------------------------------------------------------//
using PhiloxBlock = std::array<std::uint32_t, 4>;

inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t const p0 = std::uint64_t(m0) * ctr[0];
        std::uint64_t const p1 = std::uint64_t(m1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

namespace detail {

inline PhiloxBlock block(const StreamKey& key, std::uint64_t ordinal) {
    return philox4x32_10({std::uint32_t(ordinal), std::uint32_t(ordinal >> 32),
                          key.digest[2], key.digest[3]},
                         {key.digest[0], key.digest[1]});
}

// 53-bit uniform in [0,1) from two words.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t const bits = (std::uint64_t(hi) << 21) ^ (std::uint64_t(lo) >> 11);
    return double(bits) * 0x1.0p-53;
}

} // namespace detail

/// Uniform in [0,1), deterministic in (key, ordinal).
inline double uniform01(const StreamKey& key, std::uint64_t ordinal) {
    auto const b = detail::block(key, ordinal);
    return detail::to_unit(b[0], b[1]);
}

/// Writes out.size() standard normals, one Philox block per normal
/// (Box-Muller, cosine branch), starting at block \p ordinal.
inline void std_normals(const StreamKey& key, std::uint64_t ordinal,
                        std::span<double> out) {
    detail::require(!out.empty(), "std_normals: count must be >= 1");
    for (std::size_t j = 0; j < out.size(); ++j) {
        auto const b = detail::block(key, ordinal + j);
        double const u1 = 1.0 - detail::to_unit(b[0], b[1]); // (0, 1]
        double const u2 = detail::to_unit(b[2], b[3]);
        out[j] = std::sqrt(-2.0 * std::log(u1)) *
                 std::cos(2.0 * std::numbers::pi * u2);
    }
}

inline std::vector<double> std_normals(const StreamKey& key,
                                       std::uint64_t ordinal,
                                       std::size_t count) {
    detail::require(count >= 1, "std_normals: count must be >= 1");
    std::vector<double> z(count);
    std_normals(key, ordinal, z);
    return z;
}

} // namespace mlp
