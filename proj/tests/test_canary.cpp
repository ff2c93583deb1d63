#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "heavysgd/analysis.hpp"
#include "heavysgd/lemmas.hpp"

using namespace heavysgd;

// Built against the library compiled with the sign flip in signed_power.
TEST_CASE("injected signed_power fault is caught by the vector-expansion oracle") {
    const auto sweep = vecexpandp_sweep(10000, RngStream(1, 1));
    CHECK(sweep.violations > 0);
    const auto suite = run_lemma_suite(Budget::quick);
    CHECK_FALSE(suite.rows.front().pass);
    CHECK_FALSE(suite.all_pass());
}
