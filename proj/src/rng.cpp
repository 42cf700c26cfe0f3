#include "cfuse/rng.hpp"

#include <cmath>

namespace cfuse {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id),
      counter_(mix64(seed ^ 0x6A09E667F3BCC908ULL) ^ mix64(stream_id + kGolden))
{
}

SeededRng SeededRng::substream(std::uint64_t key) const
{
    return SeededRng(seed_, mix64(stream_ * 0xD1B54A32D192ED03ULL + mix64(key + 1)));
}

std::uint64_t SeededRng::next_u64()
{
    counter_ += kGolden;
    return mix64(counter_);
}

double SeededRng::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform_open()
{
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u;
    double v;
    double s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double const scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * scale;
    has_spare_ = true;
    return u * scale;
}

bool SeededRng::bernoulli(double p)
{
    return uniform() < p;
}

std::uint64_t SeededRng::below(std::uint64_t n)
{
    // Lemire's nearly divisionless method.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        std::uint64_t const threshold = (0 - n) % n;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace cfuse
