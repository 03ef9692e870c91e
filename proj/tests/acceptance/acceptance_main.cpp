// Runs the invariant suite and prints one line per acceptance criterion.
#include <cstdio>
#include <cstdlib>

#include "wlf/runner.hpp"

int main(int argc, char** argv) {
    std::uint64_t seed = 0;
    if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
    const auto result = wlf::run_suite({wlf::worker_count(), seed});
    const auto& keys = wlf::suite_keys();
    int failed = 0;
    for (size_t i = 0; i < keys.size(); ++i) {
        const auto& v = result.verdicts.at(keys[i]);
        const bool pass = v.outcome == wlf::Outcome::pass;
        if (!pass) ++failed;
        std::printf("criterion %2zu %-22s %s  worst=%.3e limit=%.3e  %s%s%s\n", i + 1, keys[i].c_str(),
                    pass ? "PASS" : "FAIL", v.worst, v.limit, v.invariant.c_str(), v.detail.empty() ? "" : "  ",
                    v.detail.c_str());
    }
    std::printf("%zu/%zu criteria pass\n", keys.size() - failed, keys.size());
    return failed ? 1 : 0;
}
