#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "segkit/core.hpp"

namespace testutil {

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("segkit_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline segkit::GrayImage random_image(int w, int h, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    segkit::GrayImage img(w, h);
    for (auto& v : img.data)
        v = dist(rng);
    return img;
}

/// Random mask with both classes present (and hence a boundary).
inline segkit::BinaryMask random_mask(int w, int h, std::mt19937& rng, double p = 0.5) {
    std::bernoulli_distribution dist(p);
    for (;;) {
        segkit::BinaryMask mask(w, h);
        bool any0 = false, any1 = false;
        for (auto& v : mask.data) {
            v = dist(rng) ? 1 : 0;
            (v ? any1 : any0) = true;
        }
        if (any0 && any1)
            return mask;
    }
}

inline segkit::LabelMap random_labels(int w, int h, int n_labels, std::mt19937& rng) {
    std::uniform_int_distribution<int> dist(0, n_labels - 1);
    segkit::LabelMap map(w, h);
    for (auto& v : map.data)
        v = dist(rng);
    return map;
}

}  // namespace testutil
