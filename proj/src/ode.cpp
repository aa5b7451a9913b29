#include "omagic/ode.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace omagic {

namespace {

void check_dims(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi) {
    require(x.size() == sys.dim_states, sys.name + ": state dimension mismatch");
    require(theta.size() == sys.dim_theta, sys.name + ": theta dimension mismatch");
    require(psi.size() == sys.dim_psi, sys.name + ": psi dimension mismatch");
    require(x.allFinite() && theta.allFinite() && psi.allFinite(),
            sys.name + ": non-finite input");
}

}  // namespace

Vec eval_rhs(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t) {
    check_dims(sys, x, theta, psi);
    Vec f = sys.rhs(x, theta, psi, t);
    for (int d = 0; d < f.size(); ++d) {
        if (!std::isfinite(f[d])) {
            std::ostringstream os;
            os << sys.name << ": rhs component " << d << " non-finite at t=" << t;
            throw NumericError(os.str());
        }
    }
    return f;
}

Mat eval_jac_x(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t) {
    if (sys.jac_x) return sys.jac_x(x, theta, psi, t);
    const int d = sys.dim_states;
    Mat j(d, d);
    Vec xp = x, xm = x;
    for (int i = 0; i < d; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        j.col(i) = (sys.rhs(xp, theta, psi, t) - sys.rhs(xm, theta, psi, t)) / (2 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return j;
}

Mat eval_jac_theta(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t) {
    if (sys.jac_theta) return sys.jac_theta(x, theta, psi, t);
    Mat j(sys.dim_states, sys.dim_theta);
    Vec tp = theta, tm = theta;
    for (int i = 0; i < sys.dim_theta; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
        tp[i] = theta[i] + h;
        tm[i] = theta[i] - h;
        j.col(i) = (sys.rhs(x, tp, psi, t) - sys.rhs(x, tm, psi, t)) / (2 * h);
        tp[i] = theta[i];
        tm[i] = theta[i];
    }
    return j;
}

Mat eval_jac_psi(const OdeSystem& sys, const Vec& x, const Vec& theta, const Vec& psi, double t) {
    if (sys.jac_psi) return sys.jac_psi(x, theta, psi, t);
    Mat j(sys.dim_states, sys.dim_psi);
    Vec pp = psi, pm = psi;
    for (int i = 0; i < sys.dim_psi; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(psi[i]));
        pp[i] = psi[i] + h;
        pm[i] = psi[i] - h;
        j.col(i) = (sys.rhs(x, theta, pp, t) - sys.rhs(x, theta, pm, t)) / (2 * h);
        pp[i] = psi[i];
        pm[i] = psi[i];
    }
    return j;
}

int StepFunction::segment_index(double t) const {
    // value is right-continuous: segment i covers [breakpoints[i-1], breakpoints[i])
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    return static_cast<int>(it - breakpoints.begin());
}

void StepFunction::validate() const {
    require(values.size() == breakpoints.size() + 1, "StepFunction: segment count mismatch");
    for (size_t i = 1; i < breakpoints.size(); ++i)
        require(breakpoints[i] > breakpoints[i - 1], "StepFunction: breakpoints not increasing");
    for (size_t i = 1; i < values.size(); ++i)
        require(values[i].size() == values[0].size(), "StepFunction: value dimension mismatch");
}

void ObservationSet::validate() const {
    require(static_cast<int>(times.size()) == dim && static_cast<int>(values.size()) == dim,
            "ObservationSet: component count mismatch");
    for (int d = 0; d < dim; ++d) {
        const auto& td = times[static_cast<size_t>(d)];
        require(td.size() == values[static_cast<size_t>(d)].size(),
                "ObservationSet: times/values length mismatch");
        for (size_t i = 1; i < td.size(); ++i)
            require(td[i] > td[i - 1], "ObservationSet: times not strictly increasing");
    }
}

namespace {

Vec rk4_step(const OdeSystem& sys, const Vec& x, const Vec& th, const Vec& psi,
             double t, double h) {
    const Vec k1 = sys.rhs(x, th, psi, t);
    const Vec k2 = sys.rhs(x + 0.5 * h * k1, th, psi, t + 0.5 * h);
    const Vec k3 = sys.rhs(x + 0.5 * h * k2, th, psi, t + 0.5 * h);
    const Vec k4 = sys.rhs(x + h * k3, th, psi, t + h);
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

Mat integrate_rk4(const OdeSystem& sys, const Vec& x0, const StepFunction& theta,
                  const Vec& psi, const std::vector<double>& grid, int substeps) {
    require(substeps >= 1, "integrate_rk4: substeps must be >= 1");
    require(grid.size() >= 1, "integrate_rk4: empty grid");
    for (size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], "integrate_rk4: grid not strictly increasing");
    require(x0.allFinite(), "integrate_rk4: non-finite x0");
    theta.validate();

    const int n = static_cast<int>(grid.size());
    Mat traj(n, sys.dim_states);
    traj.row(0) = x0.transpose();

    Vec x = x0;
    for (int i = 0; i + 1 < n; ++i) {
        const double a = grid[static_cast<size_t>(i)];
        const double b = grid[static_cast<size_t>(i + 1)];
        // split at parameter breakpoints inside (a, b)
        std::vector<double> knots{a};
        for (double bp : theta.breakpoints)
            if (bp > a && bp < b) knots.push_back(bp);
        knots.push_back(b);

        for (size_t s = 0; s + 1 < knots.size(); ++s) {
            const double sa = knots[s], sb = knots[s + 1];
            const Vec& th = theta.value(sa);
            const int nsub = std::max(
                1, static_cast<int>(std::ceil(substeps * (sb - sa) / (b - a) - 1e-12)));
            const double h = (sb - sa) / nsub;
            for (int k = 0; k < nsub; ++k) {
                x = rk4_step(sys, x, th, psi, sa + k * h, h);
                if (!x.allFinite()) {
                    std::ostringstream os;
                    os << sys.name << ": integration diverged near t=" << sa + (k + 1) * h;
                    throw NumericError(os.str());
                }
            }
        }
        traj.row(i + 1) = x.transpose();
    }
    return traj;
}

ObservationSet generate_observations(const Mat& trajectory, const std::vector<double>& grid,
                                     const NoiseSpec& noise, std::uint64_t seed) {
    require(noise.level >= 0, "generate_observations: negative noise level");
    require(trajectory.rows() == static_cast<Eigen::Index>(grid.size()),
            "generate_observations: trajectory/grid size mismatch");

    const int dim = static_cast<int>(trajectory.cols());
    ObservationSet obs;
    obs.dim = dim;
    obs.noise = noise;
    obs.times.assign(static_cast<size_t>(dim), grid);
    obs.values.assign(static_cast<size_t>(dim), std::vector<double>(grid.size(), 0.0));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int d = 0; d < dim; ++d) {
        for (size_t j = 0; j < grid.size(); ++j) {
            const double x = trajectory(static_cast<Eigen::Index>(j), d);
            double y;
            if (noise.kind == NoiseSpec::Kind::MultiplicativeLognormal) {
                if (x <= 0) {
                    std::ostringstream os;
                    os << "multiplicative noise on non-positive value x=" << x
                       << " (component " << d << ", t=" << grid[j] << ")";
                    throw NumericError(os.str());
                }
                y = x * std::exp(noise.level * gauss(rng));
            } else {
                y = x + noise.level * gauss(rng);
            }
            obs.values[static_cast<size_t>(d)][j] = y;
        }
    }
    return obs;
}

std::vector<double> sample_change_points(double rate, double t_begin, double t_end,
                                         double min_separation, std::uint64_t seed) {
    require(rate > 0, "sample_change_points: rate must be positive");
    require(min_separation >= 0, "sample_change_points: negative min_separation");
    require(t_end > t_begin, "sample_change_points: empty horizon");

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(rate);
    std::vector<double> kept;
    double t = t_begin;
    while (true) {
        t += gap(rng);
        if (t > t_end) break;
        if (kept.empty() || t - kept.back() >= min_separation) kept.push_back(t);
    }
    return kept;
}

OdeSystem seird_system(double total_population) {
    require(total_population > 0, "seird_system: population must be positive");
    OdeSystem sys;
    sys.name = "seird";
    sys.dim_states = 4;  // S, E, I, D; R recovered by conservation
    sys.dim_theta = 2;   // beta, pd
    sys.dim_psi = 2;     // ve, vi
    const double N = total_population;
    sys.rhs = [N](const Vec& x, const Vec& th, const Vec& ps, double) {
        const double S = x[0], E = x[1], I = x[2];
        const double beta = th[0], pd = th[1], ve = ps[0], vi = ps[1];
        Vec f(4);
        f[0] = -beta * I * S / N;
        f[1] = beta * I * S / N - ve * E;
        f[2] = ve * E - vi * I;
        f[3] = vi * I * pd;
        return f;
    };
    sys.jac_x = [N](const Vec& x, const Vec& th, const Vec& ps, double) {
        const double S = x[0], I = x[2];
        const double beta = th[0], pd = th[1], ve = ps[0], vi = ps[1];
        Mat j = Mat::Zero(4, 4);
        j(0, 0) = -beta * I / N;
        j(0, 2) = -beta * S / N;
        j(1, 0) = beta * I / N;
        j(1, 1) = -ve;
        j(1, 2) = beta * S / N;
        j(2, 1) = ve;
        j(2, 2) = -vi;
        j(3, 2) = vi * pd;
        return j;
    };
    sys.jac_theta = [N](const Vec& x, const Vec&, const Vec& ps, double) {
        const double S = x[0], I = x[2], vi = ps[1];
        Mat j = Mat::Zero(4, 2);
        j(0, 0) = -I * S / N;
        j(1, 0) = I * S / N;
        j(3, 1) = vi * I;
        return j;
    };
    sys.jac_psi = [](const Vec& x, const Vec& th, const Vec&, double) {
        const double E = x[1], I = x[2], pd = th[1];
        Mat j = Mat::Zero(4, 2);
        j(1, 0) = -E;
        j(2, 0) = E;
        j(2, 1) = -I;
        j(3, 1) = I * pd;
        return j;
    };
    sys.theta_min = Vec::Constant(2, 0.0);
    sys.theta_max = Vec::Constant(2, 1.0);
    sys.psi_min = Vec::Constant(2, 1e-3);
    sys.psi_max = Vec::Constant(2, 1.0);
    return sys;
}

OdeSystem lv_system() {
    OdeSystem sys;
    sys.name = "lotka_volterra";
    sys.dim_states = 2;  // prey, predator
    sys.dim_theta = 1;   // gamma (predator death rate, time-varying)
    sys.dim_psi = 3;     // alpha, beta, delta
    sys.rhs = [](const Vec& x, const Vec& th, const Vec& ps, double) {
        const double u = x[0], v = x[1];
        const double gamma = th[0], alpha = ps[0], beta = ps[1], delta = ps[2];
        Vec f(2);
        f[0] = alpha * u - beta * u * v;
        f[1] = delta * u * v - gamma * v;
        return f;
    };
    sys.jac_x = [](const Vec& x, const Vec& th, const Vec& ps, double) {
        const double u = x[0], v = x[1];
        const double gamma = th[0], alpha = ps[0], beta = ps[1], delta = ps[2];
        Mat j(2, 2);
        j(0, 0) = alpha - beta * v;
        j(0, 1) = -beta * u;
        j(1, 0) = delta * v;
        j(1, 1) = delta * u - gamma;
        return j;
    };
    sys.jac_theta = [](const Vec& x, const Vec&, const Vec&, double) {
        Mat j(2, 1);
        j(0, 0) = 0;
        j(1, 0) = -x[1];
        return j;
    };
    sys.jac_psi = [](const Vec& x, const Vec&, const Vec&, double) {
        const double u = x[0], v = x[1];
        Mat j = Mat::Zero(2, 3);
        j(0, 0) = u;
        j(0, 1) = -u * v;
        j(1, 2) = u * v;
        return j;
    };
    sys.theta_min = Vec::Constant(1, 1e-3);
    sys.theta_max = Vec::Constant(1, 3.0);
    sys.psi_min = Vec::Constant(3, 1e-3);
    sys.psi_max = Vec::Constant(3, 3.0);
    return sys;
}

OdeSystem lorenz_system() {
    OdeSystem sys;
    sys.name = "lorenz";
    sys.dim_states = 3;
    sys.dim_theta = 1;  // rho
    sys.dim_psi = 2;    // sigma, beta
    sys.rhs = [](const Vec& x, const Vec& th, const Vec& ps, double) {
        const double rho = th[0], sigma = ps[0], beta = ps[1];
        Vec f(3);
        f[0] = sigma * (x[1] - x[0]);
        f[1] = x[0] * (rho - x[2]) - x[1];
        f[2] = x[0] * x[1] - beta * x[2];
        return f;
    };
    sys.jac_x = [](const Vec& x, const Vec& th, const Vec& ps, double) {
        const double rho = th[0], sigma = ps[0], beta = ps[1];
        Mat j(3, 3);
        j << -sigma, sigma, 0, rho - x[2], -1, -x[0], x[1], x[0], -beta;
        return j;
    };
    sys.jac_theta = [](const Vec& x, const Vec&, const Vec&, double) {
        Mat j = Mat::Zero(3, 1);
        j(1, 0) = x[0];
        return j;
    };
    sys.jac_psi = [](const Vec& x, const Vec&, const Vec&, double) {
        Mat j = Mat::Zero(3, 2);
        j(0, 0) = x[1] - x[0];
        j(2, 1) = -x[2];
        return j;
    };
    sys.theta_min = Vec::Constant(1, 1.0);
    sys.theta_max = Vec::Constant(1, 50.0);
    sys.psi_min = (Vec(2) << 0.1, 0.1).finished();
    sys.psi_max = (Vec(2) << 50.0, 10.0).finished();
    return sys;
}

OdeSystem log_transformed_system(const OdeSystem& sys) {
    require(static_cast<bool>(sys.rhs), "log_transformed_system: missing rhs");
    OdeSystem out;
    out.name = sys.name + "_log";
    out.dim_states = sys.dim_states;
    out.dim_theta = sys.dim_theta;
    out.dim_psi = sys.dim_psi;
    out.theta_min = sys.theta_min;
    out.theta_max = sys.theta_max;
    out.psi_min = sys.psi_min;
    out.psi_max = sys.psi_max;

    OdeSystem base = sys;  // captured by value; systems are cheap closures
    out.rhs = [base](const Vec& z, const Vec& th, const Vec& ps, double t) {
        const Vec x = z.array().exp();
        const Vec f = base.rhs(x, th, ps, t);
        return Vec(f.array() / x.array());
    };
    if (base.jac_x) {
        out.jac_x = [base](const Vec& z, const Vec& th, const Vec& ps, double t) {
            const Vec x = z.array().exp();
            const Vec f = base.rhs(x, th, ps, t);
            const Mat jx = base.jac_x(x, th, ps, t);
            // d/dz_j [f_d(exp z) exp(-z_d)] = (J_dj x_j - delta_dj f_d) / x_d
            Mat j = jx.array().rowwise() * x.transpose().array();
            j -= f.asDiagonal() * Mat::Identity(x.size(), x.size());
            j.array().colwise() /= x.array();
            return j;
        };
    }
    if (base.jac_theta) {
        out.jac_theta = [base](const Vec& z, const Vec& th, const Vec& ps, double t) {
            const Vec x = z.array().exp();
            Mat j = base.jac_theta(x, th, ps, t);
            j.array().colwise() /= x.array();
            return j;
        };
    }
    if (base.jac_psi) {
        out.jac_psi = [base](const Vec& z, const Vec& th, const Vec& ps, double t) {
            const Vec x = z.array().exp();
            Mat j = base.jac_psi(x, th, ps, t);
            j.array().colwise() /= x.array();
            return j;
        };
    }
    return out;
}

ObservationSet log_transformed_observations(const ObservationSet& obs) {
    ObservationSet out = obs;
    for (auto& comp : out.values)
        for (auto& v : comp) {
            if (v <= 0) throw NumericError("log transform of non-positive observation");
            v = std::log(v);
        }
    return out;
}

ObservationSet drop_component(const ObservationSet& obs, int component) {
    require(component >= 0 && component < obs.dim, "drop_component: index out of range");
    ObservationSet out = obs;
    out.times[static_cast<size_t>(component)].clear();
    out.values[static_cast<size_t>(component)].clear();
    return out;
}

std::vector<double> linspace(double a, double b, int n) {
    require(n >= 2, "linspace: need at least 2 points");
    std::vector<double> g(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = a + (b - a) * i / (n - 1);
    g.back() = b;
    return g;
}

}  // namespace omagic
