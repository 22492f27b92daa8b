#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "covr/covr.hpp"

namespace covr::test {

inline Tensor random_tensor(Shape dims, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(dims));
    std::normal_distribution<double> n(0.0, scale);
    for (double& v : t.values()) v = n(rng);
    return t;
}

inline Embedding random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    double s = 0.0;
    for (double& x : v) {
        x = n(rng);
        s += x * x;
    }
    for (double& x : v) x /= std::sqrt(s);
    return Embedding{v, true};
}

inline Embedding random_raw(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    return Embedding{v, false};
}

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("covr_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline FusionConfig small_config(std::size_t dim = 8, std::size_t layers = 1, std::size_t heads = 2,
                                 std::uint32_t seed = 3) {
    return FusionConfig{dim, layers, heads, 40, 8, seed};
}

}  // namespace covr::test
