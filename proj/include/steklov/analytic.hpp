#pragma once

#include "steklov/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace steklov {

enum class ClosedFormShape { disk, ball3, circle, sphere2 };

/// First k eigenvalues (with multiplicity) of the shapes with separable
/// spectra: Steklov for disk/ball3, Laplace-Beltrami for circle/sphere2.
/// `size` is the radius, or the circumference for `circle`.
inline std::vector<double> closed_form_spectrum(ClosedFormShape shape, double size, int k)
{
    if (!(size > 0))
        throw Error(ErrorCode::invalid_input, "size parameter must be positive");
    if (k < 0)
        throw Error(ErrorCode::invalid_input, "k must be non-negative");
    std::vector<double> out;
    auto push = [&](double value, int multiplicity) {
        for (int m = 0; m < multiplicity && static_cast<int>(out.size()) < k; ++m)
            out.push_back(value);
    };
    for (int j = 0; static_cast<int>(out.size()) < k; ++j) {
        switch (shape) {
        case ClosedFormShape::disk: push(j / size, j == 0 ? 1 : 2); break;
        case ClosedFormShape::ball3: push(j / size, 2 * j + 1); break;
        case ClosedFormShape::circle: {
            double w = 2.0 * std::numbers::pi * j / size;
            push(w * w, j == 0 ? 1 : 2);
            break;
        }
        case ClosedFormShape::sphere2: push(j * (j + 1.0) / (size * size), 2 * j + 1); break;
        }
    }
    return out;
}

/// Product cylinder [-L, L] x Sigma described by the Laplace spectrum of its
/// cross-section.
struct CylinderSpec {
    std::vector<double> cross_spectrum; // 0 = lambda_1 < lambda_2 <= ...
    double half_length = 1.0;
    double cross_boundary_measure = 1.0; // |Sigma|, so the boundary has 2 |Sigma|
    int n_bdim = 1;
    /// The list is the whole cross-section spectrum rather than a prefix of it.
    bool exhaustive = false;
};

/// One tanh/coth branch pair of the cylinder spectrum.
struct CylinderBranch {
    double lambda;
    double even; // sqrt(lambda) tanh(sqrt(lambda) L)
    double odd;  // sqrt(lambda) coth(sqrt(lambda) L)
};

inline std::vector<CylinderBranch> cylinder_branches(const CylinderSpec& spec)
{
    std::vector<CylinderBranch> out;
    for (std::size_t j = 1; j < spec.cross_spectrum.size(); ++j) {
        double s = std::sqrt(spec.cross_spectrum[j]);
        double x = s * spec.half_length;
        out.push_back({spec.cross_spectrum[j], s * std::tanh(x), s / std::tanh(x)});
    }
    return out;
}

inline void validate(const CylinderSpec& spec)
{
    if (spec.cross_spectrum.empty() || spec.cross_spectrum.front() != 0.0)
        throw Error(ErrorCode::invalid_input, "cross-section spectrum must start with 0");
    if (!std::is_sorted(spec.cross_spectrum.begin(), spec.cross_spectrum.end()))
        throw Error(ErrorCode::invalid_input, "cross-section spectrum must be nondecreasing");
    if (spec.cross_spectrum.size() > 1 && !(spec.cross_spectrum[1] > 0))
        throw Error(ErrorCode::invalid_input, "cross-section must be connected (lambda_2 > 0)");
    if (!(spec.half_length > 0) || !(spec.cross_boundary_measure > 0) || spec.n_bdim < 1)
        throw Error(ErrorCode::invalid_input, "cylinder parameters must be positive");
}

/// First k Steklov eigenvalues of the cylinder: {0, 1/L} together with
/// sqrt(l) tanh(sqrt(l) L) and sqrt(l) coth(sqrt(l) L) for every nonzero
/// cross-section eigenvalue l. For a truncated cross spectrum the k-th value
/// must not exceed the smallest value an unlisted eigenvalue could produce.
inline std::vector<double> cylinder_steklov(const CylinderSpec& spec, int k)
{
    validate(spec);
    if (k < 1)
        throw Error(ErrorCode::invalid_input, "k must be positive");
    std::vector<double> values{0.0, 1.0 / spec.half_length};
    for (const auto& b : cylinder_branches(spec)) {
        values.push_back(b.even);
        values.push_back(b.odd);
    }
    std::sort(values.begin(), values.end());
    if (static_cast<int>(values.size()) < k)
        throw Error(ErrorCode::truncation, "cross-section spectrum too short for " + std::to_string(k) + " values");
    values.resize(k);
    if (!spec.exhaustive) {
        double top = std::sqrt(spec.cross_spectrum.back());
        double threshold = top * std::tanh(top * spec.half_length);
        if (values.back() > threshold)
            throw Error(ErrorCode::truncation, "value " + std::to_string(k)
                                                   + " is not certified by the supplied cross-section spectrum");
    }
    return values;
}

struct NormalizedQuantities {
    std::vector<double> normalized;
    double iso_ratio;
    double mean_density;
};

/// sigma_bar_k = sigma_k m |Sigma|^{1/n} and I = |Sigma| / |Omega|^{n/(n+1)}.
inline NormalizedQuantities normalized_quantities(const std::vector<double>& raw, double sigma_area,
                                                  double omega_volume, int n_bdim, double mean_density)
{
    if (!(sigma_area > 0) || !(omega_volume > 0) || n_bdim < 1 || !(mean_density > 0))
        throw Error(ErrorCode::invalid_input, "geometry must be positive");
    NormalizedQuantities out;
    const double factor = mean_density * std::pow(sigma_area, 1.0 / n_bdim);
    for (double v : raw)
        out.normalized.push_back(v * factor);
    out.iso_ratio = sigma_area / std::pow(omega_volume, static_cast<double>(n_bdim) / (n_bdim + 1));
    out.mean_density = mean_density;
    return out;
}

inline double iso_ratio(double sigma_area, double omega_volume, int n_bdim)
{
    return sigma_area / std::pow(omega_volume, static_cast<double>(n_bdim) / (n_bdim + 1));
}

struct LargeSigmaEntry {
    double lambda2;
    double half_length;       // L = 1 / sqrt(lambda2)
    double sigma2;            // sqrt(lambda2) tanh(1)
    double normalized_sigma2; // sigma2 |boundary|^{1/n}
};

/// Short cylinders over cross-sections with growing lambda_2: choosing
/// L = 1/sqrt(lambda_2) gives sigma_2 = sqrt(lambda_2) tanh(1).
inline std::vector<LargeSigmaEntry> large_sigma_sequence(const std::vector<double>& lambda2_values,
                                                         double cross_measure = 1.0, int n_bdim = 3)
{
    if (!(cross_measure > 0) || n_bdim < 1)
        throw Error(ErrorCode::invalid_input, "cross-section measure and dimension must be positive");
    std::vector<LargeSigmaEntry> out;
    for (double l2 : lambda2_values) {
        if (!(l2 > 1))
            throw Error(ErrorCode::out_of_regime, "lambda_2 must exceed 1");
        double s = std::sqrt(l2);
        double half = 1.0 / s;
        // sigma_2 is the smaller of 1/L and the first tanh branch
        double sigma2 = std::min(1.0 / half, s * std::tanh(s * half));
        out.push_back({l2, half, sigma2, sigma2 * std::pow(2.0 * cross_measure, 1.0 / n_bdim)});
    }
    return out;
}

} // namespace steklov
