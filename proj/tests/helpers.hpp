#ifndef HINTS_TEST_HELPERS_HPP
#define HINTS_TEST_HELPERS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "hints/mat.hpp"
#include "hints/rng.hpp"

namespace test {

inline hints::Mat random_mat(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             double scale = 1.0) {
    auto rng = hints::make_rng(seed, "test.random_mat");
    hints::Mat m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * hints::gauss(rng);
    return m;
}

// Scratch directory for checkpoint/CSV tests; fresh per call site name.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hints_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

} // namespace test

#endif
