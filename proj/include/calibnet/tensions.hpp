#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "calibnet/geometry.hpp"

namespace calibnet {

inline constexpr double kRankTolerance = 1e-10;  // relative to the largest Gram eigenvalue
inline constexpr double kEmbedTolerance = 1e-9;

struct SurfaceTensionMatrix {
    int P = 0;
    std::vector<std::vector<double>> sigma;

    double operator()(int i, int j) const { return sigma[i][j]; }

    static SurfaceTensionMatrix equal(int P, double s = 1.0) {
        SurfaceTensionMatrix m{P, std::vector<std::vector<double>>(P, std::vector<double>(P, s))};
        for (int i = 0; i < P; ++i) m.sigma[i][i] = 0.0;
        return m;
    }
};

// Throws InputError naming the first offending entry.
inline void check_well_formed(const SurfaceTensionMatrix& m) {
    if (m.P < 2) throw InputError("tensions: P must be at least 2");
    if (static_cast<int>(m.sigma.size()) != m.P)
        throw InputError("tensions: sigma must have P rows");
    for (int i = 0; i < m.P; ++i) {
        if (static_cast<int>(m.sigma[i].size()) != m.P)
            throw InputError("tensions: row " + std::to_string(i + 1) + " must have P entries");
    }
    for (int i = 0; i < m.P; ++i) {
        for (int j = 0; j < m.P; ++j) {
            double v = m.sigma[i][j];
            std::string at = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
            if (!std::isfinite(v)) throw InputError("tensions: non-finite entry at " + at);
            if (i == j && v != 0.0) throw InputError("tensions: nonzero diagonal at " + at);
            if (i != j && v <= 0.0) throw InputError("tensions: non-positive entry at " + at);
            if (v != m.sigma[j][i]) throw InputError("tensions: asymmetric entry at " + at);
        }
    }
}

// Ordered triples (i,j,k), pairwise distinct, with sigma_ij >= sigma_ik + sigma_kj. Zero-based.
inline std::vector<std::array<int, 3>> check_strict_triangle(const SurfaceTensionMatrix& m) {
    check_well_formed(m);
    std::vector<std::array<int, 3>> out;
    for (int i = 0; i < m.P; ++i)
        for (int j = 0; j < m.P; ++j)
            for (int k = 0; k < m.P; ++k) {
                if (i == j || j == k || i == k) continue;
                if (m.sigma[i][j] >= m.sigma[i][k] + m.sigma[k][j]) out.push_back({i, j, k});
            }
    return out;
}

struct SimplexEmbedding {
    int dim = 0;                              // P - 1
    std::vector<Eigen::VectorXd> points;      // q_1 = 0, ..., q_P
    std::vector<double> gram_eigenvalues;     // ascending

    double max_distance_error(const SurfaceTensionMatrix& m) const {
        double e = 0.0;
        for (int i = 0; i < m.P; ++i)
            for (int j = 0; j < m.P; ++j)
                e = std::max(e, std::abs((points[i] - points[j]).norm() - m.sigma[i][j]));
        return e;
    }
};

struct NotAdmissible {
    double eigenvalue = 0.0;       // the offending (smallest) Gram eigenvalue
    double threshold = 0.0;        // rank tolerance it was compared against
    std::vector<double> gram_eigenvalues;
    std::string reason;
};

using EmbeddingResult = std::variant<SimplexEmbedding, NotAdmissible>;

inline EmbeddingResult embed_simplex(const SurfaceTensionMatrix& m) {
    check_well_formed(m);
    const int n = m.P - 1;
    Eigen::MatrixXd G(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            double s0a = m.sigma[0][a + 1], s0b = m.sigma[0][b + 1], sab = m.sigma[a + 1][b + 1];
            G(a, b) = 0.5 * (s0a * s0a + s0b * s0b - sab * sab);
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    Eigen::VectorXd lam = es.eigenvalues();
    std::vector<double> eig(lam.data(), lam.data() + n);
    double lmax = lam.maxCoeff();
    double thr = kRankTolerance * std::max(lmax, 0.0);
    if (lmax <= 0.0 || lam.minCoeff() <= thr) {
        NotAdmissible na;
        na.eigenvalue = lam.minCoeff();
        na.threshold = thr;
        na.gram_eigenvalues = eig;
        na.reason = "Gram matrix is not positive definite";
        return na;
    }
    Eigen::MatrixXd V = es.eigenvectors();
    Eigen::MatrixXd root = V * lam.cwiseSqrt().asDiagonal() * V.transpose();
    SimplexEmbedding emb;
    emb.dim = n;
    emb.gram_eigenvalues = eig;
    emb.points.push_back(Eigen::VectorXd::Zero(n));
    for (int a = 0; a < n; ++a) emb.points.push_back(root.row(a).transpose());
    double err = emb.max_distance_error(m);
    if (err > kEmbedTolerance) {
        NotAdmissible na;
        na.eigenvalue = lam.minCoeff();
        na.threshold = thr;
        na.gram_eigenvalues = eig;
        na.reason = "round-trip distance error " + std::to_string(err) + " exceeds tolerance";
        return na;
    }
    return emb;
}

inline const SimplexEmbedding& require_embedding(const EmbeddingResult& r) {
    if (const auto* na = std::get_if<NotAdmissible>(&r))
        throw InputError("tensions not admissible: " + na->reason);
    return std::get<SimplexEmbedding>(r);
}

}  // namespace calibnet
