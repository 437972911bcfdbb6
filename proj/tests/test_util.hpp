#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "termclust/matrix.hpp"
#include "termclust/rng.hpp"
#include "termclust/vocab.hpp"

namespace termclust::testing {

inline Matrix<float> random_unit_rows(std::size_t n, std::size_t dim, Rng& rng) {
    Matrix<float> m(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (auto& v : m.row(i)) {
            v = static_cast<float>(rng.normal());
            norm += static_cast<double>(v) * v;
        }
        for (auto& v : m.row(i)) v = static_cast<float>(v / std::sqrt(norm));
    }
    return m;
}

/// Random partition of n terms into clusters of size 1..max_size.
inline ClusterMap random_clusters(std::size_t n, std::size_t max_size, Rng& rng) {
    Vocabulary v;
    std::size_t concept_no = 0;
    std::vector<std::string> labels;
    while (labels.size() < n) {
        const auto size = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(max_size)));
        for (std::size_t s = 0; s < size && labels.size() < n; ++s) labels.push_back("C" + std::to_string(concept_no));
        ++concept_no;
    }
    rng.shuffle(labels.begin(), labels.end());
    for (std::size_t i = 0; i < n; ++i) v.add(labels[i], "t" + std::to_string(i));
    return concept_clusters(v);
}

/// Embeddings where cluster members sit near a shared center, so
/// similarities spread over the evaluation range.
inline Matrix<float> clustered_unit_rows(const ClusterMap& clusters, std::size_t dim, double noise, Rng& rng) {
    const std::size_t n = clusters.term_count();
    Matrix<float> centers = random_unit_rows(clusters.cluster_count(), dim, rng);
    Matrix<float> m(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = centers.row(clusters.cluster_of[i]);
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            m(i, d) = static_cast<float>(c[d] + noise * rng.normal());
            norm += static_cast<double>(m(i, d)) * m(i, d);
        }
        for (auto& v : m.row(i)) v = static_cast<float>(v / std::sqrt(norm));
    }
    return m;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("termclust_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace termclust::testing
