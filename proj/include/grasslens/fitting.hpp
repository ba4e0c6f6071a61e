#pragma once

// Parametric unimodality fits of RSS profiles: s_l ~ c * f(l / L; theta) + beta0
// for the Beta, generalized normal, asymmetric generalized normal and
// Kumaraswamy densities on (0, 1).

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace grasslens::fitting {

enum class Family { Beta, GNorm, AGNorm, Kumaraswamy };

const std::vector<Family>& all_families();
const char* to_string(Family f);
std::size_t shape_parameter_count(Family f);
/// Names of the shape parameters, in the order FitResult::params uses.
std::vector<std::string> parameter_names(Family f);

/// Density of the family at x. Parameters in their natural domain:
///   Beta (a, b), GNorm (mu, alpha, beta), AGNorm (mu, alpha_left,
///   alpha_right, beta), Kumaraswamy (a, b).
double density(Family f, std::span<const double> params, double x);

struct NelderMeadOptions {
    std::size_t max_iterations = 2000;
    double diameter_tol = 1e-10;
    double initial_step = 0.25;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> start, const NelderMeadOptions& options = {});

struct FitResult {
    Family family = Family::Beta;
    std::vector<double> params;      // natural-domain shape parameters
    double amplitude = 0.0;          // c
    double offset = 0.0;             // beta0
    double ss_res = 0.0;
    std::optional<double> r_squared; // empty when undefined
    bool constant_profile = false;   // SS_tot == 0
    bool converged = false;
    std::size_t iterations = 0;
    std::string error;               // set when the family could not be fitted at all
};

/// Least-squares fit with x_l = l / L, L = values.size() + 1. Amplitude and
/// offset are solved in closed form for each candidate shape; the shape is
/// searched by Nelder-Mead from 8 fixed starting points.
FitResult fit_distribution(std::span<const double> values, Family family);

/// All four families, best R^2 first. A failing family is still reported.
std::vector<FitResult> fit_all_families(std::span<const double> values);

/// c * f(x_l) + beta0 on the profile grid.
std::vector<double> fitted_curve(const FitResult& fit, std::size_t length);

}  // namespace grasslens::fitting
