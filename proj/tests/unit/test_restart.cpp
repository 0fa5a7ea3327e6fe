#include <gtest/gtest.h>

#include "restart.hpp"
#include "support.hpp"

TEST(KillRestart, RecoversAndMatchesControl) {
    hita::test::TempDir dir("hita-restart");
    const auto r = hita::test::kill_and_restart(dir.path(), 11, 5, 120);
    for (const auto& f : r.failures) ADD_FAILURE() << f;
    EXPECT_EQ(r.recovered, 5u);
    EXPECT_GT(r.suffix, 0u);
}
