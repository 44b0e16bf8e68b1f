#include "medsens/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "medsens/prob.hpp"

namespace medsens {

namespace {

constexpr unsigned __int128 kPcgMult =
    ((unsigned __int128)0x2360ed051fc65da4ULL << 64) | 0x4385df649fccf645ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t output_xsl_rr(unsigned __int128 state) {
    std::uint64_t xored = (std::uint64_t)(state >> 64) ^ (std::uint64_t)state;
    unsigned rot = (unsigned)(state >> 122);
    return (xored >> rot) | (xored << ((64u - rot) & 63u));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    // increment must be odd; mix the stream id so that small consecutive ids
    // land on well-separated increments
    std::uint64_t hi = splitmix64(stream_id ^ 0xda3e39cb94b95bdbULL);
    std::uint64_t lo = (splitmix64(stream_id) << 1) | 1u;
    inc_ = ((unsigned __int128)hi << 64) | lo;

    std::uint64_t shi = splitmix64(seed ^ 0x853c49e6748fea9bULL);
    std::uint64_t slo = splitmix64(seed + 0x9e3779b97f4a7c15ULL);
    state_ = 0;
    state_ = state_ * kPcgMult + inc_;
    state_ += ((unsigned __int128)shi << 64) | slo;
    state_ = state_ * kPcgMult + inc_;
}

std::uint64_t RngStream::next_u64() {
    state_ = state_ * kPcgMult + inc_;
    return output_xsl_rr(state_);
}

double RngStream::uniform01() {
    // 53-bit mantissa, centered so the result is strictly inside (0,1)
    return ((next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal01() {
    return std_normal_quantile(uniform01());
}

std::uint64_t substream(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (std::uint64_t p : parts) {
        h = splitmix64(h ^ p);
    }
    return h;
}

double sample_normal(double mean, double sd, RngStream& rng) {
    if (!(sd >= 0.0)) {
        throw std::invalid_argument("sample_normal: sd must be nonnegative");
    }
    double z = rng.normal01();
    return mean + sd * z;
}

int sample_bernoulli(double p, RngStream& rng) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("sample_bernoulli: p must lie in [0,1]");
    }
    return rng.uniform01() < p ? 1 : 0;
}

std::size_t sample_categorical(std::span<const double> probs, RngStream& rng) {
    if (probs.empty()) {
        throw std::invalid_argument("sample_categorical: empty probability list");
    }
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) {
            throw std::invalid_argument("sample_categorical: negative probability");
        }
        total += p;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("sample_categorical: probabilities sum to zero");
    }
    double u = rng.uniform01() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return i;
    }
    return probs.size() - 1;
}

}  // namespace medsens
