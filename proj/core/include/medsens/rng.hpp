#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace medsens {

// PCG64 (XSL-RR 128/64) with stream selection. A stream is identified by
// (seed, stream_id); identical pairs reproduce identical draw sequences and
// distinct stream_ids select distinct, statistically independent sequences
// of the generator family. Streams are values: copy freely, never share one
// instance across threads.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t next_u64();

    // uniform on the open interval (0,1)
    double uniform01();

    // standard normal by inversion (one uniform per draw)
    double normal01();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

  private:
    unsigned __int128 state_;
    unsigned __int128 inc_;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

// Deterministic combiner for building substream ids out of structured keys,
// e.g. substream({kPurposeImpute, replication, imputation}). SplitMix64 chain.
std::uint64_t substream(std::initializer_list<std::uint64_t> parts);

// substream purpose tags used across the library
inline constexpr std::uint64_t kPurposeGenerate = 1;
inline constexpr std::uint64_t kPurposeImpute = 2;
inline constexpr std::uint64_t kPurposeBootstrap = 3;
inline constexpr std::uint64_t kPurposeTruth = 4;
inline constexpr std::uint64_t kPurposeAnalysis = 5;

// Draw from Normal(mean, sd^2); sd = 0 returns mean exactly. Negative sd
// throws std::invalid_argument. Always consumes one variate.
double sample_normal(double mean, double sd, RngStream& rng);

// Returns 1 with probability p; p outside [0,1] throws.
int sample_bernoulli(double p, RngStream& rng);

// Index draw from a finite distribution (probabilities need not be
// normalized exactly; they must be nonnegative).
std::size_t sample_categorical(std::span<const double> probs, RngStream& rng);

}  // namespace medsens
