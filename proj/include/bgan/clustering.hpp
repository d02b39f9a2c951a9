#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bgan/image_stack.hpp"

namespace bgan {

enum class EmbedMethod { Isomap, Mds, Tsne, Spectral };

std::string to_string(EmbedMethod m);
/// Case-insensitive; the error lists the valid names.
EmbedMethod parse_embed_method(const std::string& text);

struct EmbeddingSpec {
    EmbedMethod method = EmbedMethod::Isomap;
    std::size_t k_nn = 10;
    std::size_t dim = 2;
    double perplexity = 15.0;  // t-SNE
    int tsne_iterations = 1000;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static EmbeddingSpec from_json(const nlohmann::json& j);
};

/// Rows are points.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x);

/// Shortest-path distances over the symmetrized k-NN graph. Throws ValidationError naming
/// the smallest connected component when the graph is disconnected.
Eigen::MatrixXd geodesic_distances(const Eigen::MatrixXd& dist, std::size_t k);

/// Classical (Torgerson) MDS of a distance matrix.
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& dist, std::size_t dim);

Eigen::MatrixXd isomap(const Eigen::MatrixXd& x, std::size_t k, std::size_t dim);
Eigen::MatrixXd tsne(const Eigen::MatrixXd& x, std::size_t dim, double perplexity, int iterations,
                     std::uint64_t seed);
/// Laplacian eigenmap with a Gaussian affinity whose width is the median k-th neighbor distance.
Eigen::MatrixXd spectral_embedding(const Eigen::MatrixXd& x, std::size_t k, std::size_t dim);

/// Flattened pixels, one row per image.
Eigen::MatrixXd stack_features(const ImageStack& stack);

Eigen::MatrixXd embed(const Eigen::MatrixXd& x, const EmbeddingSpec& spec);
Eigen::MatrixXd embed(const ImageStack& stack, const EmbeddingSpec& spec);

struct KMeansResult {
    std::vector<int> labels;
    Eigen::MatrixXd centers;
    double inertia = 0.0;
    /// Best inertia so far after each restart; never increases.
    std::vector<double> best_inertia_trace;
    /// All points identical: a single cluster is returned.
    bool single_cluster = false;
};

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, int restarts, std::uint64_t seed,
                    int max_iter = 300);
KMeansResult cluster_two(const Eigen::MatrixXd& points, std::uint64_t seed = 0);

/// Matched fraction, maximized over the two ways of pairing predicted clusters with the
/// two ground-truth classes.
double accuracy(const std::vector<int>& labels, const std::vector<std::int32_t>& truth);

/// index,x1..xd,truth,cluster
std::string embedding_csv(const Eigen::MatrixXd& points, const std::vector<std::int32_t>& truth,
                          const std::vector<int>& labels);

}  // namespace bgan
