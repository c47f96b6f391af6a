#include <backstep/acceptance.hpp>

#include <iostream>
#include <string>
#include <vector>

/// Runs every acceptance criterion (or the ids given as arguments) and prints one line each.
int main(int argc, char** argv) {
    using namespace backstep::acceptance;
    Suite suite;
    const auto& res = suite.resolution();
    std::cout << "closed-form variant " << backstep::to_string(res.variant) << " (pde residual printed "
              << res.residual_printed << ", swapped " << res.residual_swapped << ")" << std::endl;

    std::vector<int> ids;
    for (int k = 1; k < argc; ++k) ids.push_back(std::stoi(argv[k]));
    if (ids.empty())
        for (const auto& c : catalogue()) ids.push_back(c.id);

    int failed = 0;
    for (int id : ids) {
        const CriterionResult r = suite.run_guarded(id);
        std::cout << r.line() << std::endl;
        if (!r.pass()) ++failed;
    }
    std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
