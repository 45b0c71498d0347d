// acceptance gate: one line per criterion. Exit 0 iff the only gated failures
// are the documented desk-scale ones, matched clause by clause; any new
// failure, or drift in a documented one, exits nonzero.

#include <cstdio>
#include <string>

#include <anderson/verify.hpp>

int main() {
    const std::string fixtures = std::string(ANDERSON_SOURCE_DIR) + "/fixtures/golden.json";
    const anderson::AcceptanceSuite suite = anderson::run_acceptance(fixtures);
    int documented = 0;
    for (const auto& c : suite.checks) {
        const char* tag = !c.gated ? "[INFO]" : (c.passed ? "[PASS]" : "[FAIL]");
        std::printf("%s %s (%.1fs)\n", tag, c.name.c_str(), c.seconds);
        std::printf("       measured: %s\n", c.measured.dump().c_str());
        if (!c.notes.empty()) std::printf("       note: %s\n", c.notes.c_str());
        std::string reason;
        if (anderson::matches_documented_failure(c, &reason)) {
            ++documented;
            std::printf("       documented failure: %s\n", reason.c_str());
        }
    }
    const auto bad = anderson::undocumented_failures(suite);
    if (suite.all_gated_passed())
        std::printf("acceptance: all gated criteria passed\n");
    else if (bad.empty())
        std::printf("acceptance: %d documented failure(s), all other gated criteria passed\n",
                    documented);
    else {
        std::printf("acceptance: %zu undocumented FAILURE(s):", bad.size());
        for (const auto* c : bad) std::printf(" %s", c->name.c_str());
        std::printf("\n");
    }
    return bad.empty() ? 0 : 1;
}
