// Copyright 2026 The optperf-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace optperf {

// Philox4x32-10 counter-based generator. A stream is addressed by (seed, stream id);
// the block counter walks words 0-1, the stream id fills words 2-3, so streams never
// overlap and adding a stream leaves every other stream untouched.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block encrypt(Block ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9U;
                key[1] += 0xBB67AE85U;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53U) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57U) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

class RandomStream {
public:
    RandomStream() = default;
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream_id) {}

    std::uint32_t next_u32() {
        if (used_ == 4) refill();
        return buffer_[used_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Open interval (0, 1), 53-bit resolution.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Mean exactly 1, coefficient of variation cv. Always consumes one normal so
    // that cv = 0 keeps streams aligned with the noisy case.
    double lognormal_unit_mean(double cv) {
        const double z = normal();
        const double s2 = std::log1p(cv * cv);
        return std::exp(-0.5 * s2 + std::sqrt(s2) * z);
    }

    std::uint64_t blocks_used() const { return counter_; }

private:
    void refill() {
        buffer_ = Philox4x32::encrypt({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                       static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                      key_);
        ++counter_;
        used_ = 0;
    }

    Philox4x32::Key key_{0, 0};
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    Philox4x32::Block buffer_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

enum class StreamPurpose : std::uint32_t { Timing = 1, GammaMeasurement = 2, Gradients = 3, MonteCarlo = 4 };

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint32_t index) {
    return (static_cast<std::uint64_t>(purpose) << 32) | index;
}

}  // namespace optperf
