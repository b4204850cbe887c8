#include "hsir/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace hsir {

std::vector<double> sym_eigenvalues(const std::vector<double>& m, int n) {
    std::vector<double> a = m;
    auto at = [&](int r, int c) -> double& { return a[static_cast<size_t>(r) * n + c]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
        if (off < 1e-30) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> eig(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = at(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

std::vector<double> singular_values(const Tensor& a) {
    if (a.rank() != 2) throw ConfigError("singular_values: rank-2 tensor required");
    int rows = a.dim(0), cols = a.dim(1);
    int n = std::min(rows, cols);
    std::vector<double> gram(static_cast<size_t>(n) * n, 0.0);
    if (rows <= cols) {
        // G = A A^T
        for (int i = 0; i < rows; ++i)
            for (int j = i; j < rows; ++j) {
                double s = 0.0;
                for (int k = 0; k < cols; ++k) s += a.at2(i, k) * a.at2(j, k);
                gram[static_cast<size_t>(i) * n + j] = s;
                gram[static_cast<size_t>(j) * n + i] = s;
            }
    } else {
        // G = A^T A
        for (int i = 0; i < cols; ++i)
            for (int j = i; j < cols; ++j) {
                double s = 0.0;
                for (int k = 0; k < rows; ++k) s += a.at2(k, i) * a.at2(k, j);
                gram[static_cast<size_t>(i) * n + j] = s;
                gram[static_cast<size_t>(j) * n + i] = s;
            }
    }
    std::vector<double> eig = sym_eigenvalues(gram, n);
    for (double& v : eig) v = std::sqrt(std::max(0.0, v));
    return eig;
}

}  // namespace hsir
