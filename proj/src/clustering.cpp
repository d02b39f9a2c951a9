#include "bgan/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "bgan/errors.hpp"
#include "bgan/rng.hpp"

namespace bgan {

std::string to_string(EmbedMethod m) {
    switch (m) {
        case EmbedMethod::Isomap: return "isomap";
        case EmbedMethod::Mds: return "mds";
        case EmbedMethod::Tsne: return "tsne";
        case EmbedMethod::Spectral: return "spectral";
    }
    return "?";
}

EmbedMethod parse_embed_method(const std::string& text) {
    std::string s = text;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "isomap") return EmbedMethod::Isomap;
    if (s == "mds") return EmbedMethod::Mds;
    if (s == "tsne" || s == "t-sne") return EmbedMethod::Tsne;
    if (s == "spectral") return EmbedMethod::Spectral;
    throw ValidationError("unknown embedding method '" + text + "' (valid: isomap, mds, tsne, spectral)");
}

void EmbeddingSpec::validate() const {
    if (k_nn < 1) throw ValidationError("embedding.k_nn must be >= 1");
    if (dim < 1) throw ValidationError("embedding.dim must be >= 1");
    if (!(perplexity > 0.0)) throw ValidationError("embedding.perplexity must be > 0");
    if (tsne_iterations < 1) throw ValidationError("embedding.tsne_iterations must be >= 1");
}

nlohmann::json EmbeddingSpec::to_json() const {
    return {{"method", to_string(method)}, {"k_nn", k_nn},     {"dim", dim},
            {"perplexity", perplexity},   {"tsne_iterations", tsne_iterations}, {"seed", seed}};
}

EmbeddingSpec EmbeddingSpec::from_json(const nlohmann::json& j) {
    EmbeddingSpec s;
    if (j.contains("method")) s.method = parse_embed_method(j.at("method").get<std::string>());
    s.k_nn = j.value("k_nn", s.k_nn);
    s.dim = j.value("dim", s.dim);
    s.perplexity = j.value("perplexity", s.perplexity);
    s.tsne_iterations = j.value("tsne_iterations", s.tsne_iterations);
    s.seed = j.value("seed", s.seed);
    return s;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
    return d;
}

namespace {

using Graph = std::vector<std::vector<std::pair<Eigen::Index, double>>>;

Graph knn_graph(const Eigen::MatrixXd& dist, std::size_t k) {
    const auto n = dist.rows();
    std::vector<std::set<Eigen::Index>> nb(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> order;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist(i, a) < dist(i, b); });
        for (std::size_t m = 0; m < std::min(k, order.size()); ++m) {
            nb[static_cast<std::size_t>(i)].insert(order[m]);
            nb[static_cast<std::size_t>(order[m])].insert(i);
        }
    }
    Graph g(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (auto j : nb[static_cast<std::size_t>(i)]) g[static_cast<std::size_t>(i)].emplace_back(j, dist(i, j));
    return g;
}

std::vector<double> dijkstra(const Graph& g, Eigen::Index src) {
    std::vector<double> d(g.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, Eigen::Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d[static_cast<std::size_t>(src)] = 0.0;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
        const auto [du, u] = pq.top();
        pq.pop();
        if (du > d[static_cast<std::size_t>(u)]) continue;
        for (const auto& [v, w] : g[static_cast<std::size_t>(u)]) {
            if (du + w < d[static_cast<std::size_t>(v)]) {
                d[static_cast<std::size_t>(v)] = du + w;
                pq.emplace(du + w, v);
            }
        }
    }
    return d;
}

void check_embed_input(Eigen::Index n, std::size_t k, std::size_t dim, const char* what) {
    if (static_cast<std::size_t>(n) < k + 1)
        throw ValidationError(std::string(what) + ": need at least k_nn + 1 = " + std::to_string(k + 1) +
                              " points, got " + std::to_string(n));
    if (dim < 1 || dim >= static_cast<std::size_t>(n))
        throw ValidationError(std::string(what) + ": target dimension must be in [1, n)");
}

}  // namespace

Eigen::MatrixXd geodesic_distances(const Eigen::MatrixXd& dist, std::size_t k) {
    const auto n = dist.rows();
    if (k < 1 || static_cast<std::size_t>(n) < k + 1)
        throw ValidationError("geodesic_distances: need k >= 1 and at least k + 1 points");
    const auto g = knn_graph(dist, k);
    Eigen::MatrixXd geo(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto d = dijkstra(g, i);
        for (Eigen::Index j = 0; j < n; ++j) geo(i, j) = d[static_cast<std::size_t>(j)];
    }
    if (!geo.allFinite()) {
        // Components by reachability from each unassigned point.
        std::vector<int> comp(static_cast<std::size_t>(n), -1);
        std::vector<std::vector<Eigen::Index>> members;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (comp[static_cast<std::size_t>(i)] >= 0) continue;
            members.emplace_back();
            for (Eigen::Index j = 0; j < n; ++j)
                if (std::isfinite(geo(i, j))) {
                    comp[static_cast<std::size_t>(j)] = static_cast<int>(members.size() - 1);
                    members.back().push_back(j);
                }
        }
        const auto smallest = std::min_element(members.begin(), members.end(),
                                               [](const auto& a, const auto& b) { return a.size() < b.size(); });
        std::ostringstream os;
        os << "k-NN graph (k=" << k << ") is disconnected into " << members.size()
           << " components; smallest has " << smallest->size() << " point(s): {";
        for (std::size_t m = 0; m < smallest->size(); ++m) os << (m ? ", " : "") << (*smallest)[m];
        os << "}";
        throw ValidationError(os.str());
    }
    return geo;
}

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& dist, std::size_t dim) {
    const auto n = dist.rows();
    if (dist.cols() != n) throw ValidationError("classical_mds: distance matrix must be square");
    if (dim < 1 || dim > static_cast<std::size_t>(n)) throw ValidationError("classical_mds: bad target dimension");
    const Eigen::MatrixXd d2 = dist.array().square();
    const Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd B = -0.5 * J * d2 * J;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(dim));
    for (std::size_t c = 0; c < dim; ++c) {
        const auto idx = n - 1 - static_cast<Eigen::Index>(c);  // eigenvalues ascend
        const double lambda = std::max(es.eigenvalues()[idx], 0.0);
        Eigen::VectorXd v = es.eigenvectors().col(idx);
        // Fix the sign so the largest-magnitude entry is positive.
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        out.col(static_cast<Eigen::Index>(c)) = v * std::sqrt(lambda);
    }
    return out;
}

Eigen::MatrixXd isomap(const Eigen::MatrixXd& x, std::size_t k, std::size_t dim) {
    check_embed_input(x.rows(), k, dim, "isomap");
    return classical_mds(geodesic_distances(pairwise_distances(x), k), dim);
}

Eigen::MatrixXd tsne(const Eigen::MatrixXd& x, std::size_t dim, double perplexity, int iterations,
                     std::uint64_t seed) {
    const auto n = x.rows();
    if (n < 3) throw ValidationError("tsne: need at least three points");
    const Eigen::MatrixXd d = pairwise_distances(x).array().square();

    // Conditional affinities with per-point bandwidth matched to the perplexity.
    const double target = std::log(std::min(perplexity, static_cast<double>(n - 1) / 3.0 + 1e-9));
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), beta = 1.0;
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, d(i, j));
        for (int it = 0; it < 100; ++it) {
            double sum = 0.0, hsum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double e = std::exp(-beta * (d(i, j) - dmin));
                P(i, j) = e;
                sum += e;
                hsum += beta * (d(i, j) - dmin) * e;
            }
            const double H = std::log(sum) + hsum / sum;
            P.row(i) /= sum;
            if (std::abs(H - target) < 1e-5) break;
            if (H > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
    }
    P = (P + P.transpose()) / (2.0 * static_cast<double>(n));
    P = P.cwiseMax(1e-12);

    auto rng = make_rng(seed, streams::clustering, 1);
    std::normal_distribution<double> z(0.0, 1e-4);
    const auto m = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd Y(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < m; ++c) Y(i, c) = z(rng);
    Eigen::MatrixXd vel = Eigen::MatrixXd::Zero(n, m), gains = Eigen::MatrixXd::Ones(n, m);
    const double lr = std::max(static_cast<double>(n) / 12.0, 50.0);
    const int exaggeration_iters = std::min(250, iterations / 4);

    for (int it = 0; it < iterations; ++it) {
        const double exag = it < exaggeration_iters ? 12.0 : 1.0;
        const double momentum = it < exaggeration_iters ? 0.5 : 0.8;
        Eigen::MatrixXd num(n, n);
        double qsum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
                qsum += num(i, j);
            }
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num(i, j) / qsum, 1e-12);
                grad.row(i) += 4.0 * (exag * P(i, j) - q) * num(i, j) * (Y.row(i) - Y.row(j));
            }
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < m; ++c) {
                const bool same = (grad(i, c) > 0) == (vel(i, c) > 0);
                gains(i, c) = std::max(same ? gains(i, c) * 0.8 : gains(i, c) + 0.2, 0.01);
            }
        vel = momentum * vel - lr * gains.cwiseProduct(grad);
        Y += vel;
        Y.rowwise() -= Y.colwise().mean();
    }
    return Y;
}

Eigen::MatrixXd spectral_embedding(const Eigen::MatrixXd& x, std::size_t k, std::size_t dim) {
    check_embed_input(x.rows(), k, dim, "spectral");
    const auto n = x.rows();
    const Eigen::MatrixXd dist = pairwise_distances(x);
    std::vector<double> kth;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
        std::sort(row.begin(), row.end());
        kth.push_back(row[k]);
    }
    std::nth_element(kth.begin(), kth.begin() + static_cast<std::ptrdiff_t>(kth.size() / 2), kth.end());
    const double sigma = std::max(kth[kth.size() / 2], 1e-12);
    Eigen::MatrixXd W = (-dist.array().square() / (2.0 * sigma * sigma)).exp();
    W.diagonal().setZero();
    const Eigen::VectorXd deg = W.rowwise().sum().cwiseMax(1e-300);
    const Eigen::VectorXd inv_sqrt = deg.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd S = inv_sqrt.asDiagonal() * W * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(dim));
    for (std::size_t c = 0; c < dim; ++c) {
        // Skip the trivial top eigenvector.
        const auto idx = n - 2 - static_cast<Eigen::Index>(c);
        Eigen::VectorXd v = inv_sqrt.cwiseProduct(es.eigenvectors().col(idx));
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        out.col(static_cast<Eigen::Index>(c)) = v;
    }
    return out;
}

Eigen::MatrixXd stack_features(const ImageStack& stack) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(stack.count()), static_cast<Eigen::Index>(stack.image_size()));
    for (std::size_t i = 0; i < stack.count(); ++i) {
        const auto img = stack.image(i);
        for (std::size_t k = 0; k < img.size(); ++k)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = img[k];
    }
    return x;
}

Eigen::MatrixXd embed(const Eigen::MatrixXd& x, const EmbeddingSpec& spec) {
    spec.validate();
    check_embed_input(x.rows(), spec.k_nn, spec.dim, "embed");
    switch (spec.method) {
        case EmbedMethod::Isomap: return isomap(x, spec.k_nn, spec.dim);
        case EmbedMethod::Mds: return classical_mds(pairwise_distances(x), spec.dim);
        case EmbedMethod::Tsne: return tsne(x, spec.dim, spec.perplexity, spec.tsne_iterations, spec.seed);
        case EmbedMethod::Spectral: return spectral_embedding(x, spec.k_nn, spec.dim);
    }
    throw ValidationError("embed: unknown method");
}

Eigen::MatrixXd embed(const ImageStack& stack, const EmbeddingSpec& spec) {
    return embed(stack_features(stack), spec);
}

namespace {

double lloyd(const Eigen::MatrixXd& pts, Eigen::MatrixXd& centers, std::vector<int>& labels, int max_iter) {
    const auto n = pts.rows();
    const auto k = centers.rows();
    labels.assign(static_cast<std::size_t>(n), 0);
    double inertia = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        bool changed = it == 0;
        inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < k; ++c) {
                const double dd = (pts.row(i) - centers.row(c)).squaredNorm();
                if (dd < bd) {
                    bd = dd;
                    best = static_cast<int>(c);
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) changed = true;
            labels[static_cast<std::size_t>(i)] = best;
            inertia += bd;
        }
        if (!changed) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += pts.row(i);
            ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        }
        for (Eigen::Index c = 0; c < k; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
    return inertia;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, int restarts, std::uint64_t seed, int max_iter) {
    const auto n = points.rows();
    if (k < 1) throw ValidationError("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(n) < k) throw ValidationError("kmeans: fewer points than clusters");
    if (restarts < 1) throw ValidationError("kmeans: restarts must be >= 1");
    KMeansResult best;
    bool all_same = true;
    for (Eigen::Index i = 1; i < n && all_same; ++i) all_same = points.row(i) == points.row(0);
    if (all_same) {
        best.labels.assign(static_cast<std::size_t>(n), 0);
        best.centers = points.topRows(1);
        best.single_cluster = true;
        best.best_inertia_trace.assign(static_cast<std::size_t>(restarts), 0.0);
        return best;
    }
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        auto rng = make_rng(seed, streams::clustering, static_cast<std::uint64_t>(r) + 100);
        // k-means++ seeding.
        Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
        std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
        centers.row(0) = points.row(first(rng));
        std::vector<double> d2(static_cast<std::size_t>(n));
        for (std::size_t c = 1; c < k; ++c) {
            for (Eigen::Index i = 0; i < n; ++i) {
                double m = std::numeric_limits<double>::infinity();
                for (std::size_t q = 0; q < c; ++q)
                    m = std::min(m, (points.row(i) - centers.row(static_cast<Eigen::Index>(q))).squaredNorm());
                d2[static_cast<std::size_t>(i)] = m;
            }
            std::discrete_distribution<Eigen::Index> pick(d2.begin(), d2.end());
            centers.row(static_cast<Eigen::Index>(c)) = points.row(pick(rng));
        }
        std::vector<int> labels;
        const double inertia = lloyd(points, centers, labels, max_iter);
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = labels;
            best.centers = centers;
        }
        best.best_inertia_trace.push_back(best.inertia);
    }
    return best;
}

KMeansResult cluster_two(const Eigen::MatrixXd& points, std::uint64_t seed) { return kmeans(points, 2, 10, seed); }

double accuracy(const std::vector<int>& labels, const std::vector<std::int32_t>& truth) {
    if (labels.size() != truth.size()) throw ValidationError("accuracy: label and truth lengths differ");
    if (labels.empty()) throw ValidationError("accuracy: no labels");
    std::set<std::int32_t> classes(truth.begin(), truth.end());
    if (classes.size() != 2) throw ValidationError("accuracy: truth must contain exactly two classes");
    std::set<int> clusters(labels.begin(), labels.end());
    if (clusters.size() > 2) throw ValidationError("accuracy: more than two predicted clusters");
    const auto t0 = *classes.begin();
    const int c0 = *clusters.begin();
    std::size_t match = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) match += (labels[i] == c0) == (truth[i] == t0);
    return static_cast<double>(std::max(match, labels.size() - match)) / static_cast<double>(labels.size());
}

std::string embedding_csv(const Eigen::MatrixXd& points, const std::vector<std::int32_t>& truth,
                          const std::vector<int>& labels) {
    std::ostringstream os;
    os.precision(17);
    os << "index";
    for (Eigen::Index c = 0; c < points.cols(); ++c) os << ",x" << c + 1;
    os << ",truth,cluster\n";
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        os << i;
        for (Eigen::Index c = 0; c < points.cols(); ++c) os << ',' << points(i, c);
        os << ',' << (static_cast<std::size_t>(i) < truth.size() ? std::to_string(truth[static_cast<std::size_t>(i)]) : "")
           << ',' << (static_cast<std::size_t>(i) < labels.size() ? std::to_string(labels[static_cast<std::size_t>(i)]) : "")
           << '\n';
    }
    return os.str();
}

}  // namespace bgan
