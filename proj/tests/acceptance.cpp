// Runs every verification suite at full scale and prints one line per criterion.
#include <iostream>
#include <map>

#include "cpplab/suites.hpp"

using namespace cpplab;

int main() {
    SuiteOptions o;
    std::map<int, bool> verdict;
    std::map<int, std::vector<std::string>> detail;
    for (int c = 1; c <= 11; ++c) verdict[c] = false;
    std::map<int, bool> seen;
    for (const auto& s : suites()) {
        std::vector<TestReport> reps;
        try {
            reps = run_suite(s.name, o);
        } catch (const std::exception& e) {
            for (int c : s.criteria) detail[c].push_back(s.name + ": error: " + e.what());
            continue;
        }
        for (const auto& r : reps) {
            const bool first = !seen[r.criterion];
            seen[r.criterion] = true;
            verdict[r.criterion] = (first || verdict[r.criterion]) && r.pass();
            for (const auto& ch : r.checks)
                if (!ch.pass) detail[r.criterion].push_back(r.experiment + ": " + ch.to_json().dump());
            std::cerr << (r.pass() ? "  pass " : "  FAIL ") << r.experiment << " (" << r.runtime_seconds << " s)\n";
        }
    }
    bool all = true;
    for (const auto& [c, ok] : verdict) {
        const bool pass = ok && seen[c];
        all = all && pass;
        std::cout << "Criterion " << c << ": " << (pass ? "PASS" : "FAIL") << "\n";
        for (const auto& d : detail[c]) std::cout << "    " << d << "\n";
    }
    return all ? 0 : 1;
}
