#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sparsekg/sparsity.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace sparsekg;

namespace {

// Full 2^p enumeration oracle, sorted by weight descending with the library's
// tie order unspecified; used for weight multisets and totals.
std::vector<double> all_weights(const std::vector<BetaCounts>& counts) {
    const int p = static_cast<int>(counts.size());
    std::vector<double> out;
    for (int mask = 0; mask < (1 << p); ++mask) {
        double w = 1.0;
        for (int j = 0; j < p; ++j) {
            const double q = counts[static_cast<size_t>(j)].q();
            w *= (mask >> j) & 1 ? q : 1.0 - q;
        }
        out.push_back(w);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace

TEST_CASE("uniform marginals enumerate everything") {
    std::vector<BetaCounts> counts(2);  // (1,1) each, q = 1/2
    const auto reals = enumerate_realizations(counts, 4);
    REQUIRE(reals.size() == 4);
    double total = 0.0;
    for (const auto& r : reals) {
        CHECK(r.weight == doctest::Approx(0.25));
        total += r.weight;
    }
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("single confident group") {
    std::vector<BetaCounts> counts{{3.0, 1.0}};
    const auto reals = enumerate_realizations(counts, 1);
    REQUIRE(reals.size() == 1);
    CHECK(reals[0].zeta == std::vector<std::uint8_t>{1});
    CHECK(reals[0].weight == doctest::Approx(0.75));
}

TEST_CASE("top-2 of three near-certain groups") {
    std::vector<BetaCounts> counts(3, BetaCounts{9.0, 1.0});  // q = 0.9 each
    const auto reals = enumerate_realizations(counts, 2);
    REQUIRE(reals.size() == 2);
    CHECK(reals[0].zeta == std::vector<std::uint8_t>({1, 1, 1}));
    CHECK(reals[0].weight == doctest::Approx(0.729));
    // Runner-up: exactly one group off.
    CHECK(reals[1].weight == doctest::Approx(0.081));
    int ones = 0;
    for (auto z : reals[1].zeta) ones += z;
    CHECK(ones == 2);
}

TEST_CASE("matches full enumeration for p up to 10") {
    for (int p = 1; p <= 10; ++p) {
        std::vector<BetaCounts> counts;
        for (int j = 0; j < p; ++j)
            counts.push_back({1.0 + j % 4, 1.0 + (j * 3) % 5});
        const auto want = all_weights(counts);
        const auto reals = enumerate_realizations(counts, 1 << p);
        REQUIRE(reals.size() == want.size());
        double prev = 2.0;
        for (size_t i = 0; i < reals.size(); ++i) {
            CHECK(reals[i].weight == doctest::Approx(want[i]).epsilon(1e-12));
            CHECK(reals[i].weight <= prev + 1e-15);  // nonincreasing
            prev = reals[i].weight;
        }
        // Distinct realizations, weights sum to 1 when untruncated.
        double total = 0.0;
        for (const auto& r : reals) total += r.weight;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("truncation keeps the heaviest realizations unrenormalized") {
    std::vector<BetaCounts> counts(5, BetaCounts{2.0, 1.0});
    const auto full = all_weights(counts);
    const auto reals = enumerate_realizations(counts, 7);
    REQUIRE(reals.size() == 7);
    double total = 0.0;
    for (size_t i = 0; i < reals.size(); ++i) {
        CHECK(reals[i].weight == doctest::Approx(full[i]).epsilon(1e-12));
        total += reals[i].weight;
    }
    CHECK(total < 1.0);  // deliberately not renormalized
}

TEST_CASE("boundary counts pin the indicator") {
    // xi = 0: certainly out. Every returned realization has that flag off.
    std::vector<BetaCounts> counts{{0.0, 1.0}, {1.0, 1.0}};
    auto reals = enumerate_realizations(counts, 4);
    REQUIRE(!reals.empty());
    for (const auto& r : reals) CHECK(r.zeta[0] == 0);
    // eta = 0: certainly in.
    counts[0] = {1.0, 0.0};
    reals = enumerate_realizations(counts, 4);
    REQUIRE(!reals.empty());
    for (const auto& r : reals) CHECK(r.zeta[0] == 1);
}

TEST_CASE("max_terms of one returns the modal realization") {
    std::vector<BetaCounts> counts{{1.0, 4.0}, {5.0, 1.0}, {1.0, 1.0}};
    const auto reals = enumerate_realizations(counts, 1);
    REQUIRE(reals.size() == 1);
    CHECK(reals[0].zeta[0] == 0);  // q = 0.2
    CHECK(reals[0].zeta[1] == 1);  // q = 5/6
    const double want = 0.8 * (5.0 / 6.0) * 0.5;
    CHECK(reals[0].weight == doctest::Approx(want).epsilon(1e-12));
}
