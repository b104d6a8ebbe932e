#include "shrinkerlab/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shrinkerlab::models {

RigidityResult rigidity_condition(const CurvatureSpectrum& spectrum, double R) {
    const int cn = static_cast<int>(spectrum.eigenvalues.size());
    // recover n from c_n = n(n-1)/2
    int n = 2;
    while (n * (n - 1) / 2 < cn) ++n;
    if (n * (n - 1) / 2 != cn)
        throw InvalidArgument("spectrum length is not of the form n(n-1)/2");
    if (n == 2)
        throw InvalidArgument("rigidity threshold undefined for n = 2 (c_n - 2 < 0)");
    if (R < 0) throw InvalidArgument("rigidity test requires R >= 0");

    RigidityResult r{};
    r.epsilon = 1.0 / ((1.0 + std::sqrt(2.0)) * (cn - 2));
    r.lambda1 = spectrum.eigenvalues.front();
    r.lambda2 = cn > 1 ? spectrum.eigenvalues[1] : r.lambda1;
    if (r.lambda1 >= 0.0) {
        r.threshold = 0.0;
        r.passes = true;
        return r;
    }
    const double denom = std::abs(R - 2.0 * r.lambda1);
    if (denom < 1e-300) {
        r.threshold = -std::numeric_limits<double>::infinity();
        r.passes = r.lambda2 >= 0.0;
        return r;
    }
    r.threshold = -r.epsilon * sq(r.lambda1) / denom;
    r.passes = r.lambda2 >= r.threshold;
    return r;
}

double rigidity_quadratic_oracle(double lambda1, double lambda2, double R, int n,
                                 int trials, std::uint64_t seed) {
    if (lambda1 > lambda2) throw InvalidArgument("need lambda1 <= lambda2");
    if (trials < 1) throw InvalidArgument("need trials >= 1");
    const int cn = n * (n - 1) / 2;
    if (cn < 3) throw InvalidArgument("oracle needs c_n >= 3");

    const int rest = cn - 2;                          // lambda_3..lambda_{c_n}
    const double budget = 0.5 * R - lambda1 - lambda2;  // their required sum
    // shift so the remaining eigenvalues are lambda2 + nonnegative masses
    const double mass_total = budget - rest * lambda2;
    if (mass_total < -1e-12)
        throw InvalidArgument("no completion: sum constraint incompatible with ordering");

    RngStream rng = RngStream(seed).fork("rigidity-oracle");
    std::vector<double> lam(cn);
    lam[0] = lambda1;
    lam[1] = lambda2;

    auto eval_min_over_C = [&](const std::vector<double>& l) {
        // optimal |C_ij| is 2 on negative products and 0 otherwise
        double p = 2.0 * sq(l[0]);
        for (int i = 1; i < cn; ++i)
            for (int j = i + 1; j < cn; ++j)
                if (l[i] * l[j] < 0.0) p += 8.0 * l[i] * l[j];
        return p;
    };

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> expo(rest);
    for (int t = 0; t < trials; ++t) {
        // uniform point on the simplex of masses summing to mass_total
        double s = 0.0;
        for (int i = 0; i < rest; ++i) {
            expo[i] = -std::log(std::max(rng.uniform(), 1e-300));
            s += expo[i];
        }
        for (int i = 0; i < rest; ++i)
            lam[2 + i] = lambda2 + mass_total * expo[i] / s;
        std::sort(lam.begin() + 2, lam.end());
        double p = eval_min_over_C(lam);
        // a few random coefficient draws; never better than the closed form,
        // kept as an independent probe of the same minimum
        for (int d = 0; d < 2; ++d) {
            double pr = 2.0 * sq(lam[0]);
            for (int i = 1; i < cn; ++i)
                for (int j = i + 1; j < cn; ++j)
                    pr += 2.0 * sq(2.0 * rng.uniform()) * lam[i] * lam[j];
            p = std::min(p, pr);
        }
        best = std::min(best, p);
    }
    // include the corner completions: all mass on one eigenvalue
    for (int i = 0; i < rest && mass_total >= 0; ++i) {
        std::fill(lam.begin() + 2, lam.end(), lambda2);
        lam[cn - 1] = lambda2 + mass_total;
        best = std::min(best, eval_min_over_C(lam));
        break;
    }
    return best;
}

}  // namespace shrinkerlab::models
