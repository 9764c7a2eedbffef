#include "sindex/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "sindex/error_models.hpp"

namespace sindex {

double integrate(const std::function<double(double)>& f, double a, double b,
                 const std::vector<double>& breaks, double tol) {
    if (!(b > a)) return 0.0;
    // Slivers between near-duplicate breakpoints stall the error estimate.
    const double gap = 1e-2 * (b - a);
    std::vector<double> inner;
    for (double x : breaks)
        if (x > a + gap && x < b - gap) inner.push_back(x);
    std::sort(inner.begin(), inner.end());
    std::vector<double> pts{a};
    for (double x : inner)
        if (x - pts.back() > gap) pts.push_back(x);
    pts.push_back(b);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        if (pts[k + 1] <= pts[k]) continue;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, pts[k], pts[k + 1], 12, tol, &err);
        if (!std::isfinite(total)) throw NumericalError("quadrature failed");
    }
    return total;
}

MinResult brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                         int bits, int max_iter) {
    std::uintmax_t it = max_iter;
    auto r = boost::math::tools::brent_find_minima(f, lo, hi, bits, it);
    return {r.first, r.second, static_cast<int>(it)};
}

double bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                      double rel_tol, int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw NumericalError("root not bracketed");
    std::uintmax_t it = max_iter;
    auto tol = [rel_tol](double x, double y) {
        return std::abs(x - y) <= rel_tol * std::max(std::abs(x), std::abs(y)) + 1e-300;
    };
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
    return 0.5 * (r.first + r.second);
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opt) {
    const int d = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> s(d + 1, x0);
    std::vector<double> fs(d + 1);
    for (int k = 0; k < d; ++k) s[k + 1](k) += opt.step;
    int evals = 0;
    for (int k = 0; k <= d; ++k) {
        fs[k] = f(s[k]);
        ++evals;
    }
    std::vector<int> idx(d + 1);
    bool converged = false;
    while (evals < opt.max_evals) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = idx[0], worst = idx[d], second = idx[d - 1];
        double size = 0.0;
        for (int k = 1; k <= d; ++k) size = std::max(size, (s[idx[k]] - s[best]).cwiseAbs().maxCoeff());
        if (std::abs(fs[worst] - fs[best]) <= opt.f_tol * (std::abs(fs[best]) + 1e-30) && size <= opt.x_tol) {
            converged = true;
            break;
        }
        if (size <= 1e-3 * opt.x_tol) {
            converged = true;
            break;
        }
        Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < d; ++k) c += s[idx[k]];
        c /= d;
        Eigen::VectorXd xr = c + (c - s[worst]);
        double fr = f(xr);
        ++evals;
        if (fr < fs[best]) {
            Eigen::VectorXd xe = c + 2.0 * (c - s[worst]);
            double fe = f(xe);
            ++evals;
            if (fe < fr) {
                s[worst] = xe;
                fs[worst] = fe;
            } else {
                s[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            s[worst] = xr;
            fs[worst] = fr;
        } else {
            Eigen::VectorXd xc = fr < fs[worst] ? Eigen::VectorXd(c + 0.5 * (xr - c))
                                                : Eigen::VectorXd(c + 0.5 * (s[worst] - c));
            double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fs[worst])) {
                s[worst] = xc;
                fs[worst] = fc;
            } else {
                for (int k = 1; k <= d; ++k) {
                    s[idx[k]] = s[best] + 0.5 * (s[idx[k]] - s[best]);
                    fs[idx[k]] = f(s[idx[k]]);
                    ++evals;
                }
            }
        }
    }
    int b = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    return {s[b], fs[b], evals, converged};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    auto mid = v.begin() + v.size() / 2;
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

}  // namespace sindex
