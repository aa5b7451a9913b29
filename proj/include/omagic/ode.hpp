#ifndef OMAGIC_ODE_HPP
#define OMAGIC_ODE_HPP

#include "omagic/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace omagic {

/// A D-dimensional autonomous-in-form vector field dx/dt = f(x, theta, psi, t)
/// with P time-varying parameters theta and Q constant parameters psi.
struct OdeSystem {
    using Rhs = std::function<Vec(const Vec&, const Vec&, const Vec&, double)>;
    using Jac = std::function<Mat(const Vec&, const Vec&, const Vec&, double)>;

    std::string name;
    int dim_states = 0;
    int dim_theta = 0;
    int dim_psi = 0;
    Rhs rhs;
    Jac jac_x;       // D x D; empty -> central finite differences
    Jac jac_theta;   // D x P
    Jac jac_psi;     // D x Q
    Vec theta_min, theta_max;
    Vec psi_min, psi_max;
};

Vec eval_rhs(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t);
Mat eval_jac_x(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t);
Mat eval_jac_theta(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t);
Mat eval_jac_psi(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t);

/// Right-continuous piecewise-constant parameter path over [0, T].
struct StepFunction {
    std::vector<double> breakpoints;  // strictly increasing
    std::vector<Vec> values;          // breakpoints.size() + 1 segments

    static StepFunction constant(Vec v) { return StepFunction{{}, {std::move(v)}}; }

    int segment_index(double t) const;
    const Vec& value(double t) const { return values[static_cast<size_t>(segment_index(t))]; }
    void validate() const;
};

struct NoiseSpec {
    enum class Kind { MultiplicativeLognormal, AdditiveGaussian };
    Kind kind = Kind::MultiplicativeLognormal;
    double level = 0.05;  // std of log-noise, or additive std
};

/// Per-component observation times and values; components may be unobserved.
struct ObservationSet {
    int dim = 0;
    std::vector<std::vector<double>> times;
    std::vector<std::vector<double>> values;
    NoiseSpec noise;

    int n_obs(int d) const { return static_cast<int>(times[static_cast<size_t>(d)].size()); }
    void validate() const;
};

/// Classical fixed-step RK4 over `grid`, splitting substeps at StepFunction
/// breakpoints so no substep straddles a parameter discontinuity.
/// Returns one row per grid time; row 0 equals x0.
Mat integrate_rk4(const OdeSystem& sys, const Vec& x0, const StepFunction& theta,
                  const Vec& psi, const std::vector<double>& grid, int substeps);

ObservationSet generate_observations(const Mat& trajectory, const std::vector<double>& grid,
                                     const NoiseSpec& noise, std::uint64_t seed);

/// Poisson-process arrivals on [t_begin, t_end], thinned so consecutive kept
/// points are at least min_separation apart.
std::vector<double> sample_change_points(double rate, double t_begin, double t_end,
                                         double min_separation, std::uint64_t seed);

OdeSystem seird_system(double total_population);
OdeSystem lv_system();
OdeSystem lorenz_system();

/// State transform z = log(x): dz_d/dt = f_d(exp z) / exp(z_d).
/// Feeds inference on strictly positive systems observed with multiplicative
/// log-normal noise, which becomes exactly additive Gaussian in z.
OdeSystem log_transformed_system(const OdeSystem& sys);

ObservationSet log_transformed_observations(const ObservationSet& obs);
ObservationSet drop_component(const ObservationSet& obs, int component);

std::vector<double> linspace(double a, double b, int n);

}  // namespace omagic

#endif
