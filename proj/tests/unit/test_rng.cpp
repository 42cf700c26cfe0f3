#include <doctest.h>

#include <cmath>
#include <vector>

#include "cfuse/rng.hpp"

using namespace cfuse;

TEST_SUITE("rng")
{
    TEST_CASE("same seed and stream reproduce the sequence")
    {
        SeededRng a(42, 3);
        SeededRng b(42, 3);
        for (int i = 0; i < 1000; ++i) {
            REQUIRE(a.next_u64() == b.next_u64());
        }
        SeededRng c(42, 3);
        SeededRng d(42, 3);
        for (int i = 0; i < 1000; ++i) {
            REQUIRE(c.normal() == d.normal());
        }
    }

    TEST_CASE("distinct streams differ")
    {
        SeededRng a(42, 0);
        SeededRng b(42, 1);
        SeededRng c(43, 0);
        int same_ab = 0;
        int same_ac = 0;
        for (int i = 0; i < 1000; ++i) {
            auto const x = a.next_u64();
            same_ab += x == b.next_u64();
            same_ac += x == c.next_u64();
        }
        CHECK(same_ab == 0);
        CHECK(same_ac == 0);
    }

    TEST_CASE("substreams are independent of parent consumption")
    {
        SeededRng a(9, 0);
        SeededRng const child1 = a.substream(5);
        for (int i = 0; i < 100; ++i) (void)a.next_u64();
        SeededRng const child2 = a.substream(5);
        SeededRng x = child1;
        SeededRng y = child2;
        for (int i = 0; i < 100; ++i) REQUIRE(x.next_u64() == y.next_u64());
        SeededRng z = a.substream(6);
        SeededRng w = a.substream(5);
        CHECK(z.next_u64() != w.next_u64());
    }

    TEST_CASE("uniform and normal moments")
    {
        SeededRng r(1, 0);
        int const n = 200000;
        double su = 0.0;
        double sn = 0.0;
        double sn2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double const u = r.uniform();
            REQUIRE(u >= 0.0);
            REQUIRE(u < 1.0);
            su += u;
            double const z = r.normal();
            sn += z;
            sn2 += z * z;
        }
        CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12.0 / n));
        CHECK(std::abs(sn / n) < 5 / std::sqrt(n));
        CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
    }

    TEST_CASE("below is unbiased")
    {
        SeededRng r(2, 0);
        std::vector<int> counts(7, 0);
        int const n = 70000;
        for (int i = 0; i < n; ++i) ++counts[r.below(7)];
        for (int c : counts) {
            CHECK(std::abs(c - n / 7.0) < 5 * std::sqrt(n * (1.0 / 7) * (6.0 / 7)));
        }
    }
}
