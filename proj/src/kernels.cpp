#include "cfuse/kernels.hpp"

#include <cstdint>

#include "cfuse/rct_infer.hpp"

namespace cfuse {

namespace {

struct Weights {
    std::vector<double> y1, y0, b1, b0;
};

Weights weights(RctDesign const& design)
{
    Weights w;
    double total = 0.0;
    for (auto const& u : design.units()) {
        total += u.copies;
    }
    for (auto const& u : design.units()) {
        double const c = u.copies / total;
        w.y1.push_back(c * u.y / u.theta);
        w.y0.push_back(c * u.y / (1.0 - u.theta));
        w.b1.push_back(u.z ? c / u.theta : 0.0);
        w.b0.push_back(u.z ? c / (1.0 - u.theta) : 0.0);
    }
    return w;
}

inline void one_draw(RctDesign const& design, Weights const& w, SeededRng const& rng,
                     std::size_t s, std::vector<std::uint8_t>& z,
                     std::vector<std::size_t>& scratch, double& a, double& b)
{
    SeededRng local = rng.substream(s);
    design.draw(local, z, scratch);
    // Arms are summed separately, so assignments that move equal values
    // between units give bit-identical statistics (exact ties stay ties).
    double at = 0.0, ac = 0.0, bt = 0.0, bc = 0.0;
    for (std::size_t m = 0; m < z.size(); ++m) {
        if (z[m]) {
            at += w.y1[m];
            bt += w.b1[m];
        } else {
            ac += w.y0[m];
            bc += w.b0[m];
        }
    }
    a = at - ac;
    b = bt - bc;
}

}  // namespace

NullStats null_stats_serial(RctDesign const& design, SeededRng const& rng, std::size_t samples)
{
    Weights const w = weights(design);
    NullStats out;
    out.a.resize(samples);
    out.b.resize(samples);
    std::vector<std::uint8_t> z;
    std::vector<std::size_t> scratch;
    for (std::size_t s = 0; s < samples; ++s) {
        one_draw(design, w, rng, s, z, scratch, out.a[s], out.b[s]);
    }
    return out;
}

NullStats null_stats_parallel(RctDesign const& design, SeededRng const& rng, std::size_t samples)
{
    Weights const w = weights(design);
    NullStats out;
    out.a.resize(samples);
    out.b.resize(samples);
    auto const n = static_cast<std::int64_t>(samples);
#pragma omp parallel
    {
        std::vector<std::uint8_t> z;
        std::vector<std::size_t> scratch;
#pragma omp for schedule(static)
        for (std::int64_t s = 0; s < n; ++s) {
            auto const i = static_cast<std::size_t>(s);
            one_draw(design, w, rng, i, z, scratch, out.a[i], out.b[i]);
        }
    }
    return out;
}

void eval_curve_serial(std::function<double(double)> const& f, std::vector<double> const& x,
                       std::vector<double>& out)
{
    out.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = f(x[i]);
    }
}

void eval_curve_parallel(std::function<double(double)> const& f, std::vector<double> const& x,
                         std::vector<double>& out)
{
    out.resize(x.size());
    auto const n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = f(x[static_cast<std::size_t>(i)]);
    }
}

}  // namespace cfuse
