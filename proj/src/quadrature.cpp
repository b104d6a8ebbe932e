#include "shrinkerlab/quadrature.hpp"

#include <Eigen/Dense>
#include <map>
#include <mutex>

namespace shrinkerlab::quad {

namespace {

// Golub-Welsch from the three-term recurrence of the orthogonal family.
// a[i], b[i] are the Jacobi-matrix diagonal and off-diagonal entries,
// mu0 the total mass of the weight.
Rule golub_welsch(const std::vector<double>& a, const std::vector<double>& b,
                  double mu0) {
    const int n = static_cast<int>(a.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        J(i, i) = a[i];
        if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = b[i + 1];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = es.eigenvalues()(i);
        r.weights[i] = mu0 * sq(es.eigenvectors()(0, i));
    }
    return r;
}

}  // namespace

const Rule& gauss_legendre(int order) {
    static std::map<int, Rule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    std::vector<double> a(order, 0.0), b(order, 0.0);
    for (int i = 1; i < order; ++i) b[i] = i / std::sqrt(4.0 * i * i - 1.0);
    auto [pos, _] = cache.emplace(order, golub_welsch(a, b, 2.0));
    return pos->second;
}

Rule gauss_jacobi(int order, double alpha, double beta) {
    std::vector<double> a(order), b(order, 0.0);
    const double ab = alpha + beta;
    a[0] = (beta - alpha) / (ab + 2.0);
    for (int i = 1; i < order; ++i) {
        const double d = 2.0 * i + ab;
        a[i] = (beta * beta - alpha * alpha) / (d * (d + 2.0));
        double num = 4.0 * i * (i + alpha) * (i + beta) * (i + ab);
        double den = sq(d) * (d + 1.0) * (d - 1.0);
        if (i == 1 && std::abs(ab + 1.0) < 1e-14)  // removable 0/0 at i=1, ab=-1
            num = 4.0 * (1.0 + alpha) * (1.0 + beta), den = sq(ab + 2.0) * (ab + 3.0);
        b[i] = std::sqrt(num / den);
    }
    const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) *
                       std::tgamma(beta + 1.0) / std::tgamma(ab + 2.0);
    return golub_welsch(a, b, mu0);
}

double composite(const std::function<double(double)>& f, double a, double b,
                 int panels, int order) {
    const Rule& r = gauss_legendre(order);
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        double s = 0.0;
        for (size_t i = 0; i < r.nodes.size(); ++i)
            s += r.weights[i] * f(mid + 0.5 * h * r.nodes[i]);
        total += 0.5 * h * s;
    }
    return total;
}

Result integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, double abs_tol, int initial_panels,
                 int max_panels, int order) {
    if (!(b > a)) return {0.0, 0.0, 0};
    double prev = composite(f, a, b, initial_panels, order);
    for (int p = 2 * initial_panels; p <= max_panels; p *= 2) {
        const double cur = composite(f, a, b, p, order);
        const double err = std::abs(cur - prev);
        if (err <= rel_tol * std::abs(cur) + abs_tol) return {cur, err, p};
        prev = cur;
    }
    const double cur = prev;
    throw ConvergenceError("quadrature did not converge on [" + std::to_string(a) +
                           "," + std::to_string(b) + "]; achieved tolerance " +
                           std::to_string(std::abs(cur) > 0 ? 1.0 : 0.0) +
                           " (increase the panel budget)");
}

Result integrate2d(const std::function<double(double, double)>& f, double ax,
                   double bx, double ay, double by, double rel_tol,
                   double abs_tol, int max_panels, int order) {
    auto eval = [&](int panels) {
        const Rule& r = gauss_legendre(order);
        const double hx = (bx - ax) / panels, hy = (by - ay) / panels;
        double total = 0.0;
        for (int px = 0; px < panels; ++px) {
            const double mx = ax + (px + 0.5) * hx;
            for (size_t i = 0; i < r.nodes.size(); ++i) {
                const double x = mx + 0.5 * hx * r.nodes[i];
                double inner = 0.0;
                for (int py = 0; py < panels; ++py) {
                    const double my = ay + (py + 0.5) * hy;
                    for (size_t j = 0; j < r.nodes.size(); ++j)
                        inner += r.weights[j] * f(x, my + 0.5 * hy * r.nodes[j]);
                }
                total += r.weights[i] * 0.25 * hx * hy * inner;
            }
        }
        return total;
    };
    double prev = eval(2);
    for (int p = 4; p <= max_panels; p *= 2) {
        const double cur = eval(p);
        const double err = std::abs(cur - prev);
        if (err <= rel_tol * std::abs(cur) + abs_tol) return {cur, err, p};
        prev = cur;
    }
    throw ConvergenceError("2d quadrature did not converge");
}

}  // namespace shrinkerlab::quad
