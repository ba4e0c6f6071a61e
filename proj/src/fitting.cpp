#include "grasslens/fitting.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace grasslens::fitting {

namespace {

constexpr double kPenalty = 1e300;
// log-parameters are kept inside [-kLogBound, kLogBound]
constexpr double kLogBound = 12.0;

// Search coordinates: positive parameters are optimized as logs, mu as is.
std::vector<double> to_natural(Family f, std::span<const double> z) {
    std::vector<double> p(z.begin(), z.end());
    switch (f) {
        case Family::Beta:
        case Family::Kumaraswamy:
            p[0] = std::exp(z[0]);
            p[1] = std::exp(z[1]);
            break;
        case Family::GNorm:
            p[1] = std::exp(z[1]);
            p[2] = std::exp(z[2]);
            break;
        case Family::AGNorm:
            p[1] = std::exp(z[1]);
            p[2] = std::exp(z[2]);
            p[3] = std::exp(z[3]);
            break;
    }
    return p;
}

std::vector<double> to_search(Family f, std::span<const double> p) {
    std::vector<double> z(p.begin(), p.end());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const bool is_mu = (f == Family::GNorm || f == Family::AGNorm) && i == 0;
        if (!is_mu) z[i] = std::log(p[i]);
    }
    return z;
}

bool search_in_bounds(Family f, std::span<const double> z) {
    for (std::size_t i = 0; i < z.size(); ++i) {
        const bool is_mu = (f == Family::GNorm || f == Family::AGNorm) && i == 0;
        if (!std::isfinite(z[i])) return false;
        if (is_mu ? std::abs(z[i]) > 10.0 : std::abs(z[i]) > kLogBound) return false;
    }
    return true;
}

// Deterministic multi-start grid, natural parameters.
std::vector<std::vector<double>> seed_grid(Family f) {
    switch (f) {
        case Family::Beta:
        case Family::Kumaraswamy:
            return {{2.0, 2.0}, {1.5, 1.5}, {3.0, 3.0}, {6.0, 6.0}, {2.0, 5.0}, {5.0, 2.0}, {1.2, 3.0}, {3.0, 1.2}};
        case Family::GNorm:
            return {{0.5, 0.25, 2.0}, {0.5, 0.35, 4.0}, {0.4, 0.2, 2.0}, {0.6, 0.2, 2.0},
                    {0.5, 0.1, 1.5}, {0.5, 0.4, 8.0}, {0.3, 0.3, 3.0}, {0.7, 0.3, 3.0}};
        case Family::AGNorm:
            return {{0.5, 0.25, 0.25, 2.0}, {0.5, 0.35, 0.35, 4.0}, {0.4, 0.2, 0.3, 2.0}, {0.6, 0.3, 0.2, 2.0},
                    {0.5, 0.1, 0.1, 1.5},   {0.5, 0.4, 0.4, 8.0},   {0.3, 0.2, 0.4, 3.0}, {0.7, 0.4, 0.2, 3.0}};
    }
    return {};
}

struct LinearSolve {
    double amplitude = 0.0;
    double offset = 0.0;
    double ss_res = kPenalty;
};

// Best c, beta0 for fixed basis values f.
LinearSolve solve_linear(std::span<const double> s, std::span<const double> f) {
    const double n = static_cast<double>(s.size());
    double mf = 0.0;
    double ms = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(f[i])) return {};
        mf += f[i];
        ms += s[i];
    }
    mf /= n;
    ms /= n;
    double sff = 0.0;
    double sfs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        sff += (f[i] - mf) * (f[i] - mf);
        sfs += (f[i] - mf) * (s[i] - ms);
    }
    LinearSolve r;
    r.amplitude = sff > 0.0 ? sfs / sff : 0.0;
    r.offset = ms - r.amplitude * mf;
    r.ss_res = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double e = s[i] - (r.amplitude * f[i] + r.offset);
        r.ss_res += e * e;
    }
    if (!std::isfinite(r.ss_res)) r.ss_res = kPenalty;
    return r;
}

std::vector<double> grid(std::size_t length) {
    const double L = static_cast<double>(length + 1);
    std::vector<double> xs(length);
    for (std::size_t i = 0; i < length; ++i) xs[i] = static_cast<double>(i + 1) / L;
    return xs;
}

std::vector<double> basis(Family f, std::span<const double> params, std::span<const double> xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = density(f, params, xs[i]);
    return out;
}

}  // namespace

const std::vector<Family>& all_families() {
    static const std::vector<Family> families{Family::Beta, Family::GNorm, Family::AGNorm, Family::Kumaraswamy};
    return families;
}

const char* to_string(Family f) {
    switch (f) {
        case Family::Beta: return "beta";
        case Family::GNorm: return "gnorm";
        case Family::AGNorm: return "agnorm";
        case Family::Kumaraswamy: return "kumaraswamy";
    }
    return "?";
}

std::size_t shape_parameter_count(Family f) {
    switch (f) {
        case Family::Beta:
        case Family::Kumaraswamy: return 2;
        case Family::GNorm: return 3;
        case Family::AGNorm: return 4;
    }
    return 0;
}

std::vector<std::string> parameter_names(Family f) {
    switch (f) {
        case Family::Beta:
        case Family::Kumaraswamy: return {"a", "b"};
        case Family::GNorm: return {"mu", "alpha", "beta"};
        case Family::AGNorm: return {"mu", "alpha_left", "alpha_right", "beta"};
    }
    return {};
}

double density(Family f, std::span<const double> p, double x) {
    if (p.size() != shape_parameter_count(f)) throw ValidationError("wrong parameter count for family");
    switch (f) {
        case Family::Beta: {
            const double a = p[0], b = p[1];
            if (!(a > 0.0 && b > 0.0) || !(x > 0.0 && x < 1.0)) return 0.0;
            const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
            return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta);
        }
        case Family::Kumaraswamy: {
            const double a = p[0], b = p[1];
            if (!(a > 0.0 && b > 0.0) || !(x > 0.0 && x < 1.0)) return 0.0;
            const double xa = std::pow(x, a);
            return a * b * std::pow(x, a - 1.0) * std::pow(1.0 - xa, b - 1.0);
        }
        case Family::GNorm: {
            const double mu = p[0], alpha = p[1], beta = p[2];
            if (!(alpha > 0.0 && beta > 0.0)) return 0.0;
            const double norm = beta / (2.0 * alpha * std::tgamma(1.0 / beta));
            return norm * std::exp(-std::pow(std::abs(x - mu) / alpha, beta));
        }
        case Family::AGNorm: {
            const double mu = p[0], al = p[1], ar = p[2], beta = p[3];
            if (!(al > 0.0 && ar > 0.0 && beta > 0.0)) return 0.0;
            const double norm = beta / ((al + ar) * std::tgamma(1.0 / beta));
            const double scale = x < mu ? al : ar;
            return norm * std::exp(-std::pow(std::abs(x - mu) / scale, beta));
        }
    }
    return 0.0;
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> start, const NelderMeadOptions& opt) {
    const std::size_t n = start.size();
    if (n == 0) throw ValidationError("Nelder-Mead needs at least one parameter");
    std::vector<std::vector<double>> simplex(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opt.initial_step;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = objective(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    NelderMeadResult res;
    auto point = [n](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> p(n);
        for (std::size_t j = 0; j < n; ++j) p[j] = a[j] + t * (b[j] - a[j]);
        return p;
    };

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        {
            std::vector<std::vector<double>> s2;
            std::vector<double> f2;
            for (auto i : order) {
                s2.push_back(simplex[i]);
                f2.push_back(fv[i]);
            }
            simplex.swap(s2);
            fv.swap(f2);
        }
        double diameter = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) d2 += (simplex[i][j] - simplex[0][j]) * (simplex[i][j] - simplex[0][j]);
            diameter = std::max(diameter, std::sqrt(d2));
        }
        if (diameter < opt.diameter_tol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

        const auto& worst = simplex[n];
        auto xr = point(centroid, worst, -1.0);
        const double fr = objective(xr);
        if (fr < fv[0]) {
            auto xe = point(centroid, worst, -2.0);
            const double fe = objective(xe);
            if (fe < fr) {
                simplex[n] = std::move(xe);
                fv[n] = fe;
            } else {
                simplex[n] = std::move(xr);
                fv[n] = fr;
            }
            continue;
        }
        if (fr < fv[n - 1]) {
            simplex[n] = std::move(xr);
            fv[n] = fr;
            continue;
        }
        if (fr < fv[n]) {
            auto xc = point(centroid, worst, -0.5);
            const double fc = objective(xc);
            if (fc <= fr) {
                simplex[n] = std::move(xc);
                fv[n] = fc;
                continue;
            }
        } else {
            auto xc = point(centroid, worst, 0.5);
            const double fc = objective(xc);
            if (fc < fv[n]) {
                simplex[n] = std::move(xc);
                fv[n] = fc;
                continue;
            }
        }
        for (std::size_t i = 1; i <= n; ++i) {
            simplex[i] = point(simplex[0], simplex[i], 0.5);
            fv[i] = objective(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.value = fv[best];
    return res;
}

FitResult fit_distribution(std::span<const double> values, Family family) {
    const std::size_t free_params = shape_parameter_count(family) + 2;
    if (values.size() < free_params + 2)
        throw ValidationError(std::string("fitting ") + to_string(family) + " needs a profile of length >= " +
                              std::to_string(free_params + 2));
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("profile has non-finite values");

    const auto xs = grid(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss_tot = 0.0;
    for (double v : values) ss_tot += (v - mean) * (v - mean);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) ss_tot = 0.0;

    auto objective = [&](std::span<const double> z) {
        if (!search_in_bounds(family, z)) return kPenalty;
        const auto p = to_natural(family, z);
        return solve_linear(values, basis(family, p, xs)).ss_res;
    };

    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    for (const auto& seed : seed_grid(family)) {
        auto r = nelder_mead(objective, to_search(family, seed));
        iterations += r.iterations;
        if (r.value < best.value) best = std::move(r);
    }
    // one more run from the incumbent refreshes a possibly collapsed simplex
    {
        NelderMeadOptions polish;
        polish.initial_step = 0.05;
        auto r = nelder_mead(objective, best.x, polish);
        iterations += r.iterations;
        if (r.value <= best.value) best = std::move(r);
    }

    FitResult fit;
    fit.family = family;
    fit.params = to_natural(family, best.x);
    const auto lin = solve_linear(values, basis(family, fit.params, xs));
    fit.amplitude = lin.amplitude;
    fit.offset = lin.offset;
    fit.ss_res = lin.ss_res;
    fit.converged = best.converged && lin.ss_res < kPenalty;
    fit.iterations = iterations;
    if (ss_tot == 0.0) {
        fit.constant_profile = true;
        if (fit.ss_res == 0.0) fit.r_squared = 1.0;
    } else if (lin.ss_res < kPenalty) {
        fit.r_squared = std::min(1.0, 1.0 - lin.ss_res / ss_tot);
    }
    return fit;
}

std::vector<FitResult> fit_all_families(std::span<const double> values) {
    std::vector<FitResult> out;
    for (Family f : all_families()) {
        try {
            out.push_back(fit_distribution(values, f));
        } catch (const std::exception& e) {
            FitResult failed;
            failed.family = f;
            failed.error = e.what();
            out.push_back(std::move(failed));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const FitResult& a, const FitResult& b) {
        const double ra = a.r_squared.value_or(-std::numeric_limits<double>::infinity());
        const double rb = b.r_squared.value_or(-std::numeric_limits<double>::infinity());
        return ra > rb;
    });
    return out;
}

std::vector<double> fitted_curve(const FitResult& fit, std::size_t length) {
    const auto xs = grid(length);
    auto f = basis(fit.family, fit.params, xs);
    for (double& v : f) v = fit.amplitude * v + fit.offset;
    return f;
}

}  // namespace grasslens::fitting
