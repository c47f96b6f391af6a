#pragma once

#include <catch_amalgamated.hpp>

#include <backstep/backstep.hpp>

#include <map>
#include <numbers>

namespace fixtures {

using namespace backstep;

/// Kernels are costly; every test binary shares one solve per (system, N).
inline const ControllerKernels& hetero_kernels(int N) {
    static std::map<int, ControllerKernels> cache;
    auto it = cache.find(N);
    if (it == cache.end()) {
        const auto sys = reference::heterodirectional();
        it = cache.emplace(N, synthesize_controller(sys, TriangularGrid(N), ArtificialBoundary(sys.m))).first;
    }
    return it->second;
}

inline const ControllerKernels& two_state_kernels(int N) {
    static std::map<int, ControllerKernels> cache;
    auto it = cache.find(N);
    if (it == cache.end()) {
        const auto p = reference::two_state_parameters();
        const auto art = reference::two_state_artificial(p, resolve_closed_form_variant(p).variant);
        it = cache.emplace(N, synthesize_controller(reference::two_state(p), TriangularGrid(N), art)).first;
    }
    return it->second;
}

inline const ObserverKernels& hetero_observer(int N) {
    static std::map<int, ObserverKernels> cache;
    auto it = cache.find(N);
    if (it == cache.end()) it = cache.emplace(N, solve_observer_kernels(reference::heterodirectional(), TriangularGrid(N))).first;
    return it->second;
}

/// Uncoupled system with unit boundary reflections switched off.
inline HyperbolicSystem uncoupled(int n, int m) {
    HyperbolicSystem s = HyperbolicSystem::zeros(n, m);
    for (int j = 0; j < m; ++j) s.mu(j) = 1.0 / (j + 1);
    return s;
}

inline double field_max(const std::vector<KernelField>& fs) {
    double r = 0.0;
    for (const auto& f : fs) r = std::max(r, f.max_abs());
    return r;
}

}  // namespace fixtures
