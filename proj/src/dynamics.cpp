#include "trimer/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <fftw3.h>

namespace trimer {

namespace ode = boost::numeric::odeint;

namespace {

// flat layout per site: (Re alpha, Im alpha, X, Y, Z)
using Packed = std::array<double, 15>;

Packed pack(const SemiclassicalState& s) {
  Packed x{};
  for (int n = 0; n < n_sites; ++n) {
    x[5 * n + 0] = s.alpha[n].real();
    x[5 * n + 1] = s.alpha[n].imag();
    x[5 * n + 2] = s.sx[n];
    x[5 * n + 3] = s.sy[n];
    x[5 * n + 4] = s.sz[n];
  }
  return x;
}

SemiclassicalState unpack(const Packed& x) {
  SemiclassicalState s;
  for (int n = 0; n < n_sites; ++n) {
    s.alpha[n] = {x[5 * n + 0], x[5 * n + 1]};
    s.sx[n] = x[5 * n + 2];
    s.sy[n] = x[5 * n + 3];
    s.sz[n] = x[5 * n + 4];
  }
  return s;
}

struct Couplings {
  double kappa, w0, wa, lam, etap, etam, jc, js;
  explicit Couplings(const ModelParams& p) {
    const auto d = p.derived();
    kappa = p.kappa;
    w0 = p.omega0;
    wa = p.omega_a;
    lam = d.lambda;
    etap = d.eta_plus;
    etam = d.eta_minus;
    jc = d.j * std::cos(p.phi);
    js = d.j * std::sin(p.phi);
  }
};

void rhs_packed(const Couplings& c, const Packed& v, Packed& dv) {
  for (int n = 0; n < n_sites; ++n) {
    const int i = 5 * n, ip = 5 * site_next(n), im = 5 * site_prev(n);
    const double x = v[i], y = v[i + 1];
    const double sx = v[i + 2], sy = v[i + 3], sz = v[i + 4];
    dv[i] = -c.kappa * x + c.w0 * y - 2.0 * c.lam * c.etam * sy +
            c.js * (v[ip] - v[im]) + c.jc * (v[ip + 1] + v[im + 1]);
    dv[i + 1] = -c.kappa * y - c.w0 * x - 2.0 * c.lam * c.etap * sx -
                c.jc * (v[ip] + v[im]) + c.js * (v[ip + 1] - v[im + 1]);
    dv[i + 2] = -c.wa * sy - 4.0 * c.lam * c.etam * sz * y;
    dv[i + 3] = c.wa * sx - 4.0 * c.lam * c.etap * sz * x;
    dv[i + 4] = 4.0 * c.lam * c.etap * sy * x + 4.0 * c.lam * c.etam * sx * y;
  }
}

double norm_error_packed(const Packed& v) {
  double worst = 0.0;
  for (int n = 0; n < n_sites; ++n) {
    const int i = 5 * n;
    const double r2 =
        v[i + 2] * v[i + 2] + v[i + 3] * v[i + 3] + v[i + 4] * v[i + 4];
    worst = std::max(worst, std::abs(r2 - 0.25));
  }
  return worst;
}

void project_spins(Packed& v) {
  for (int n = 0; n < n_sites; ++n) {
    const int i = 5 * n;
    const double r = std::sqrt(v[i + 2] * v[i + 2] + v[i + 3] * v[i + 3] +
                               v[i + 4] * v[i + 4]);
    if (r > 0.0) {
      const double f = 0.5 / r;
      v[i + 2] *= f;
      v[i + 3] *= f;
      v[i + 4] *= f;
    }
  }
}

}  // namespace

double SemiclassicalState::spin_norm_error() const {
  return norm_error_packed(pack(*this));
}

void SemiclassicalState::renormalize_spins() {
  Packed v = pack(*this);
  project_spins(v);
  *this = unpack(v);
}

SemiclassicalState apply_parity(const SemiclassicalState& s) {
  SemiclassicalState out = s;
  for (int n = 0; n < n_sites; ++n) {
    out.alpha[n] = -s.alpha[n];
    out.sx[n] = -s.sx[n];
    out.sy[n] = -s.sy[n];
  }
  return out;
}

SemiclassicalState apply_translation(const SemiclassicalState& s) {
  SemiclassicalState out;
  for (int n = 0; n < n_sites; ++n) {
    const int m = site_next(n);
    out.alpha[m] = s.alpha[n];
    out.sx[m] = s.sx[n];
    out.sy[m] = s.sy[n];
    out.sz[m] = s.sz[n];
  }
  return out;
}

SemiclassicalState normal_state(int pole_sign) {
  SemiclassicalState s;
  for (int n = 0; n < n_sites; ++n) s.sz[n] = pole_sign < 0 ? -0.5 : 0.5;
  return s;
}

SemiclassicalState state_from_fields(const ModelParams& p,
                                     const FieldConfiguration& f) {
  const auto d = p.derived();
  SemiclassicalState s;
  const double unscale = std::sqrt(p.omega_a / p.omega0);
  for (int n = 0; n < n_sites; ++n) {
    const cplx a = unscale * f.alpha[n];
    s.alpha[n] = a;
    const double ax = d.eta_plus * a.real(), ay = d.eta_minus * a.imag();
    const double omega = std::sqrt(p.omega_a * p.omega_a +
                                   16.0 * d.lambda * d.lambda * (ax * ax + ay * ay));
    s.sx[n] = -2.0 * d.lambda * d.eta_plus * a.real() / omega;
    s.sy[n] = 2.0 * d.lambda * d.eta_minus * a.imag() / omega;
    s.sz[n] = -0.5 * p.omega_a / omega;
  }
  return s;
}

SemiclassicalState rhs(const ModelParams& p, const SemiclassicalState& s) {
  if (s.spin_norm_error() > 1e-6)
    throw std::invalid_argument("rhs: spins are off the sphere");
  const Couplings c(p);
  Packed dv{};
  const Packed v = pack(s);
  rhs_packed(c, v, dv);
  return unpack(dv);
}

double rhs_norm(const ModelParams& p, const SemiclassicalState& s) {
  const Couplings c(p);
  Packed dv{};
  const Packed v = pack(s);
  rhs_packed(c, v, dv);
  double m = 0.0;
  for (double d : dv) m = std::max(m, std::abs(d));
  return m;
}

double mean_field_energy(const ModelParams& p, const SemiclassicalState& s) {
  const auto d = p.derived();
  double e = 0.0;
  for (int n = 0; n < n_sites; ++n) {
    const cplx a = s.alpha[n];
    e += p.omega0 * std::norm(a) + p.omega_a * s.sz[n] +
         4.0 * d.lambda * (d.eta_plus * s.sx[n] * a.real() -
                           d.eta_minus * s.sy[n] * a.imag());
    e += 2.0 * d.j *
         (std::conj(a) * std::polar(1.0, p.phi) * s.alpha[site_next(n)]).real();
  }
  return e;
}

Trajectory integrate(const ModelParams& p, const SemiclassicalState& s0,
                     double t_end, const IntegrateOptions& opts) {
  p.validate();
  if (s0.spin_norm_error() > 1e-6)
    throw std::invalid_argument("integrate: initial spins are off the sphere");
  if (!(t_end >= 0.0))
    throw std::invalid_argument("integrate: t_end must be nonnegative");

  const Couplings c(p);
  auto sys = [&c](const Packed& v, Packed& dv, double) { rhs_packed(c, v, dv); };

  Trajectory traj;
  traj.params = p;
  traj.uniform_sampling = opts.sample_dt > 0.0;
  traj.sample_dt = opts.sample_dt;

  Packed v = pack(s0);
  project_spins(v);
  traj.times.push_back(0.0);
  traj.states.push_back(unpack(v));
  if (t_end == 0.0) return traj;

  auto dense =
      ode::make_dense_output(opts.tol, opts.tol, ode::runge_kutta_dopri5<Packed>());
  dense.initialize(v, 0.0, std::min(1e-3, t_end));

  double next_sample = opts.sample_dt;
  while (dense.current_time() < t_end) {
    dense.do_step(sys);
    if (std::abs(dense.current_time_step()) <
        1e-13 * std::max(1.0, std::abs(dense.current_time()))) {
      std::ostringstream os;
      os << "integrate: step size underflow at t = " << dense.current_time();
      throw StiffnessError(os.str(), std::move(traj));
    }
    const double t1 = std::min(dense.current_time(), t_end);
    if (traj.uniform_sampling) {
      Packed xi;
      while (next_sample <= t1 + 1e-12 * std::max(1.0, t1)) {
        const double ts = std::min(next_sample, t1);
        dense.calc_state(ts, xi);
        traj.times.push_back(ts);
        traj.states.push_back(unpack(xi));
        next_sample += opts.sample_dt;
      }
    } else if (dense.current_time() <= t_end) {
      traj.times.push_back(dense.current_time());
      traj.states.push_back(unpack(dense.current_state()));
    }
    const double drift = norm_error_packed(dense.current_state());
    traj.norm_drift = std::max(traj.norm_drift, drift);
    if (drift > 1e-12 && dense.current_time() < t_end) {
      Packed fixed = dense.current_state();
      project_spins(fixed);
      dense.initialize(fixed, dense.current_time(), dense.current_time_step());
    }
  }
  // close the per-step record exactly at t_end; uniform grids keep their
  // spacing instead
  if (!traj.uniform_sampling &&
      traj.times.back() < t_end - 1e-12 * std::max(1.0, t_end)) {
    Packed xf;
    dense.calc_state(t_end, xf);
    traj.times.push_back(t_end);
    traj.states.push_back(unpack(xf));
  }
  return traj;
}

namespace {

std::mutex fftw_plan_mutex;

// magnitude series of one site, mean kept (the zero-frequency bin carries it)
std::vector<double> magnitude_series(const Trajectory& traj, int site) {
  std::vector<double> m(traj.states.size());
  for (size_t i = 0; i < traj.states.size(); ++i)
    m[i] = std::abs(traj.states[i].alpha[static_cast<size_t>(site)]);
  return m;
}

}  // namespace

PowerSpectrum power_spectrum(const Trajectory& traj, int site) {
  if (site < 0 || site >= n_sites)
    throw std::invalid_argument("power_spectrum: site index out of range");
  if (!traj.uniform_sampling || traj.sample_dt <= 0.0)
    throw std::invalid_argument("power_spectrum: trajectory must be uniformly sampled");
  const int n = static_cast<int>(traj.states.size());
  if (n < 16) throw std::invalid_argument("power_spectrum: sample too short");

  std::vector<double> sig = magnitude_series(traj, site);
  for (int i = 0; i < n; ++i) {
    const double hann = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
    sig[i] *= hann;
  }
  std::vector<std::complex<double>> out(static_cast<size_t>(n / 2 + 1));
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_plan plan = fftw_plan_dft_r2c_1d(
        n, sig.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }
  PowerSpectrum ps;
  const double dw = 2.0 * M_PI / (n * traj.sample_dt);
  ps.freq.resize(out.size());
  ps.power.resize(out.size());
  for (size_t k = 0; k < out.size(); ++k) {
    ps.freq[k] = dw * static_cast<double>(k);
    ps.power[k] = std::norm(out[k]);
  }
  return ps;
}

namespace {

// uniform-grid trajectory as a matrix for interpolation, column = sample
Eigen::MatrixXd as_matrix(const Trajectory& traj) {
  Eigen::MatrixXd m(15, static_cast<Eigen::Index>(traj.states.size()));
  for (size_t i = 0; i < traj.states.size(); ++i) {
    const Packed v = pack(traj.states[i]);
    for (int r = 0; r < 15; ++r) m(r, static_cast<Eigen::Index>(i)) = v[r];
  }
  return m;
}

// Catmull-Rom in the sample index coordinate
Eigen::VectorXd interp_column(const Eigen::MatrixXd& m, double idx) {
  const Eigen::Index n = m.cols();
  idx = std::clamp(idx, 0.0, static_cast<double>(n - 1));
  Eigen::Index i1 = static_cast<Eigen::Index>(std::floor(idx));
  i1 = std::clamp(i1, Eigen::Index(0), n - 2);
  const double u = idx - static_cast<double>(i1);
  const Eigen::Index i0 = std::max(Eigen::Index(0), i1 - 1);
  const Eigen::Index i2 = i1 + 1, i3 = std::min(n - 1, i1 + 2);
  const double u2 = u * u, u3 = u2 * u;
  return 0.5 * ((2.0 * m.col(i1)) + (-m.col(i0) + m.col(i2)) * u +
                (2.0 * m.col(i0) - 5.0 * m.col(i1) + 4.0 * m.col(i2) - m.col(i3)) * u2 +
                (-m.col(i0) + 3.0 * m.col(i1) - 3.0 * m.col(i2) + m.col(i3)) * u3);
}

struct Peak {
  double freq;
  double power;
};

// local maxima with parabolic refinement, ignoring the window-broadened
// zero-frequency lobe
std::vector<Peak> find_peaks(const PowerSpectrum& ps, double rel_floor) {
  std::vector<Peak> peaks;
  double pmax = 0.0;
  for (size_t k = 3; k + 1 < ps.power.size(); ++k) pmax = std::max(pmax, ps.power[k]);
  if (pmax <= 0.0) return peaks;
  for (size_t k = 3; k + 1 < ps.power.size(); ++k) {
    if (ps.power[k] < rel_floor * pmax) continue;
    if (ps.power[k] <= ps.power[k - 1] || ps.power[k] < ps.power[k + 1]) continue;
    // parabola through log power of the three bins
    const double l0 = std::log(std::max(ps.power[k - 1], 1e-300));
    const double l1 = std::log(std::max(ps.power[k], 1e-300));
    const double l2 = std::log(std::max(ps.power[k + 1], 1e-300));
    const double denom = l0 - 2.0 * l1 + l2;
    const double shift = std::abs(denom) > 1e-12 ? 0.5 * (l0 - l2) / denom : 0.0;
    const double dw = ps.freq[1] - ps.freq[0];
    peaks.push_back({ps.freq[k] + std::clamp(shift, -0.5, 0.5) * dw, ps.power[k]});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.power > b.power; });
  // drop window sidelobes: anything within a few bins of a stronger peak
  const double dw = ps.freq[1] - ps.freq[0];
  std::vector<Peak> kept;
  for (const Peak& pk : peaks) {
    bool shadowed = false;
    for (const Peak& strong : kept)
      if (std::abs(pk.freq - strong.freq) < 4.0 * dw) shadowed = true;
    if (!shadowed) kept.push_back(pk);
  }
  return kept;
}

// recurrence distance of the trajectory against itself shifted by `lag`
// samples (fractional), relative to the overall excursion scale
double recurrence_distance(const Eigen::MatrixXd& m, double lag) {
  const Eigen::Index n = m.cols();
  const Eigen::Index usable = n - static_cast<Eigen::Index>(std::ceil(lag)) - 2;
  if (usable < 8) return std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (int r = 0; r < 15; ++r)
    scale = std::max(scale, m.row(r).maxCoeff() - m.row(r).minCoeff());
  if (scale <= 0.0) return 0.0;
  double worst = 0.0;
  const Eigen::Index stride = std::max(Eigen::Index(1), usable / 400);
  for (Eigen::Index i = 0; i < usable; i += stride) {
    const Eigen::VectorXd a = m.col(i);
    const Eigen::VectorXd b = interp_column(m, static_cast<double>(i) + lag);
    worst = std::max(worst, (a - b).lpNorm<Eigen::Infinity>());
  }
  return worst / scale;
}

// candidate periods from two independent heuristics: upward mean-level
// crossings of the magnitude and maxima of its autocorrelation (the latter
// finds envelope repeats even when each repeat contains many crossings)
std::vector<double> period_candidates(const std::vector<double>& mag, double dt) {
  std::vector<double> periods;
  const double lo = *std::min_element(mag.begin(), mag.end());
  const double hi = *std::max_element(mag.begin(), mag.end());
  if (hi - lo <= 0.0) return periods;

  const double level = 0.5 * (lo + hi);
  std::vector<double> crossings;
  for (size_t i = 1; i < mag.size(); ++i) {
    if (mag[i - 1] < level && mag[i] >= level) {
      const double frac = (level - mag[i - 1]) / (mag[i] - mag[i - 1]);
      crossings.push_back((static_cast<double>(i - 1) + frac) * dt);
    }
  }
  if (crossings.size() >= 3) {
    // multiples of the base interval catch multi-crossing cycles
    for (size_t mult = 1; mult <= 6 && mult + 1 < crossings.size(); ++mult) {
      std::vector<double> gaps;
      for (size_t i = 0; i + mult < crossings.size(); ++i)
        gaps.push_back(crossings[i + mult] - crossings[i]);
      periods.push_back(std::accumulate(gaps.begin(), gaps.end(), 0.0) /
                        static_cast<double>(gaps.size()));
    }
  }

  const size_t n = mag.size();
  size_t padded = 1;
  while (padded < 2 * n) padded *= 2;
  const double mean = std::accumulate(mag.begin(), mag.end(), 0.0) /
                      static_cast<double>(n);
  std::vector<double> buf(padded, 0.0);
  for (size_t i = 0; i < n; ++i) buf[i] = mag[i] - mean;
  std::vector<std::complex<double>> spec(padded / 2 + 1);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(
        static_cast<int>(padded), buf.data(),
        reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
    fftw_execute(fwd);
    fftw_destroy_plan(fwd);
    for (auto& z : spec) z = std::norm(z);
    fftw_plan bwd = fftw_plan_dft_c2r_1d(
        static_cast<int>(padded), reinterpret_cast<fftw_complex*>(spec.data()),
        buf.data(), FFTW_ESTIMATE);
    fftw_execute(bwd);
    fftw_destroy_plan(bwd);
  }
  if (buf[0] > 0.0) {
    size_t found = 0;
    for (size_t k = 2; k + 1 < n / 2 && found < 8; ++k) {
      const double overlap = static_cast<double>(n - k) / static_cast<double>(n);
      if (buf[k] > buf[k - 1] && buf[k] >= buf[k + 1] &&
          buf[k] > 0.3 * buf[0] * overlap) {
        periods.push_back(static_cast<double>(k) * dt);
        ++found;
      }
    }
  }
  return periods;
}

bool nearly_integer(double x, double tol) {
  return std::abs(x - std::round(x)) < tol * std::max(1.0, std::abs(x));
}

}  // namespace

double lyapunov_max(const ModelParams& p, const SemiclassicalState& s0,
                    double t, double tol) {
  if (!(t > 0.0)) throw std::invalid_argument("lyapunov_max: t must be positive");
  const Couplings c(p);
  using Joint = std::array<double, 30>;
  auto sys = [&c](const Joint& v, Joint& dv, double) {
    Packed base, dbase;
    std::copy(v.begin(), v.begin() + 15, base.begin());
    rhs_packed(c, base, dbase);
    std::copy(dbase.begin(), dbase.end(), dv.begin());
    // tangent flow: same bilinear structure with one factor linearized
    for (int n = 0; n < n_sites; ++n) {
      const int i = 5 * n, ip = 5 * site_next(n), im = 5 * site_prev(n);
      const int j = 15 + i, jp = 15 + ip, jm = 15 + im;
      const double x = v[i], y = v[i + 1];
      const double sx = v[i + 2], sy = v[i + 3], sz = v[i + 4];
      const double dx = v[j], dy = v[j + 1];
      const double dsx = v[j + 2], dsy = v[j + 3], dsz = v[j + 4];
      dv[j] = -c.kappa * dx + c.w0 * dy - 2.0 * c.lam * c.etam * dsy +
              c.js * (v[jp] - v[jm]) + c.jc * (v[jp + 1] + v[jm + 1]);
      dv[j + 1] = -c.kappa * dy - c.w0 * dx - 2.0 * c.lam * c.etap * dsx -
                  c.jc * (v[jp] + v[jm]) + c.js * (v[jp + 1] - v[jm + 1]);
      dv[j + 2] = -c.wa * dsy - 4.0 * c.lam * c.etam * (dsz * y + sz * dy);
      dv[j + 3] = c.wa * dsx - 4.0 * c.lam * c.etap * (dsz * x + sz * dx);
      dv[j + 4] = 4.0 * c.lam * c.etap * (dsy * x + sy * dx) +
                  4.0 * c.lam * c.etam * (dsx * y + sx * dy);
    }
  };

  Joint v{};
  {
    Packed base = pack(s0);
    project_spins(base);
    std::copy(base.begin(), base.end(), v.begin());
    // arbitrary fixed tangent direction, projected off the spin radii
    for (int k = 15; k < 30; ++k) v[k] = 1.0 / std::sqrt(15.0);
  }
  auto project_tangent = [](Joint& w) {
    for (int n = 0; n < n_sites; ++n) {
      const int i = 5 * n + 2, j = 15 + i;
      const double dot = w[i] * w[j] + w[i + 1] * w[j + 1] + w[i + 2] * w[j + 2];
      const double r2 =
          w[i] * w[i] + w[i + 1] * w[i + 1] + w[i + 2] * w[i + 2];
      for (int k = 0; k < 3; ++k) w[j + k] -= dot / r2 * w[i + k];
    }
  };
  project_tangent(v);

  auto dense = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<Joint>());
  dense.initialize(v, 0.0, 1e-3);
  const double renorm_dt = 1.0;
  const double burn = 0.1 * t;
  double t_now = 0.0, log_sum = 0.0, measured = 0.0;
  while (t_now < t) {
    const double t_next = std::min(t_now + renorm_dt, t);
    while (dense.current_time() < t_next) dense.do_step(sys);
    Joint cur;
    dense.calc_state(t_next, cur);
    {
      Packed base;
      std::copy(cur.begin(), cur.begin() + 15, base.begin());
      project_spins(base);
      std::copy(base.begin(), base.end(), cur.begin());
    }
    project_tangent(cur);
    double norm = 0.0;
    for (int k = 15; k < 30; ++k) norm += cur[k] * cur[k];
    norm = std::sqrt(norm);
    if (norm <= 0.0) return -std::numeric_limits<double>::infinity();
    if (t_next > burn) {
      log_sum += std::log(norm);
      measured += t_next - t_now;
    }
    for (int k = 15; k < 30; ++k) cur[k] /= norm;
    dense.initialize(cur, t_next, dense.current_time_step());
    t_now = t_next;
  }
  return measured > 0.0 ? log_sum / measured : 0.0;
}

AttractorReport classify_attractor(const ModelParams& p,
                                   const SemiclassicalState& s0,
                                   const ClassifyOptions& opts) {
  IntegrateOptions iopts;
  iopts.tol = opts.tol;
  iopts.sample_dt = std::max(1.0, opts.t_transient / 100.0);
  const Trajectory settle = integrate(p, s0, opts.t_transient, iopts);

  iopts.sample_dt = opts.sample_dt;
  const Trajectory traj =
      integrate(p, settle.states.back(), opts.t_measure, iopts);
  const Eigen::MatrixXd m = as_matrix(traj);

  AttractorReport rep;
  rep.final_state = traj.states.back();

  double scale = 0.0;
  for (int r = 0; r < 15; ++r)
    scale = std::max(scale, m.row(r).maxCoeff() - m.row(r).minCoeff());

  if (scale < 1e-8) {
    rep.kind = AttractorKind::equilibrium;
    for (int site = 0; site < n_sites; ++site)
      rep.extrema[static_cast<size_t>(site)].push_back(
          std::abs(rep.final_state.alpha[static_cast<size_t>(site)]));
    rep.lyapunov_max = lyapunov_max(p, rep.final_state, 300.0, opts.tol);
    rep.synchrony = Synchrony::uniform;
    double pair12 = 0.0, pair23 = 0.0, pair31 = 0.0;
    for (const auto& st : traj.states) {
      pair12 = std::max(pair12, std::abs(st.alpha[0] - st.alpha[1]));
      pair23 = std::max(pair23, std::abs(st.alpha[1] - st.alpha[2]));
      pair31 = std::max(pair31, std::abs(st.alpha[2] - st.alpha[0]));
    }
    if (std::max({pair12, pair23, pair31}) > 1e-8) rep.synchrony = Synchrony::none;
    return rep;
  }

  for (int site = 0; site < n_sites; ++site) {
    const std::vector<double> mag = magnitude_series(traj, site);
    for (size_t i = 1; i + 1 < mag.size(); ++i) {
      const bool maxi = mag[i] >= mag[i - 1] && mag[i] > mag[i + 1];
      const bool mini = mag[i] <= mag[i - 1] && mag[i] < mag[i + 1];
      if (maxi || mini) rep.extrema[static_cast<size_t>(site)].push_back(mag[i]);
    }
  }

  rep.lyapunov_max =
      lyapunov_max(p, settle.states.back(), std::min(opts.t_measure, 1500.0), opts.tol);

  // period search: spectral peaks and time-domain heuristics both feed the
  // recurrence check on the full state
  const PowerSpectrum ps = power_spectrum(traj, 0);
  const std::vector<Peak> peaks = find_peaks(ps, 1e-8);
  std::vector<double> candidates = period_candidates(magnitude_series(traj, 0),
                                                     traj.sample_dt);
  if (!peaks.empty() && peaks[0].freq > 0.0)
    candidates.push_back(2.0 * M_PI / peaks[0].freq);

  double best_period = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (double cand : candidates) {
    if (!(cand > 2.0 * traj.sample_dt)) continue;
    // refine the candidate by minimizing the recurrence distance locally
    double period = cand;
    double dist = recurrence_distance(m, period / traj.sample_dt);
    double step = 0.02 * period;
    for (int it = 0; it < 40 && step > 1e-6 * period; ++it) {
      bool moved = false;
      for (double trial : {period - step, period + step}) {
        if (!(trial > 2.0 * traj.sample_dt)) continue;
        const double d = recurrence_distance(m, trial / traj.sample_dt);
        if (d < dist) {
          dist = d;
          period = trial;
          moved = true;
        }
      }
      if (!moved) step *= 0.5;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best_period = period;
    }
  }

  // spectral comb against the recurrence period
  bool comb_ok = false;
  if (best_period > 0.0 && !peaks.empty()) {
    const double base = 2.0 * M_PI / best_period;
    comb_ok = true;
    for (const Peak& pk : peaks) {
      if (pk.power < 1e-4 * peaks[0].power) continue;
      if (!nearly_integer(pk.freq / base, 1e-3)) comb_ok = false;
    }
  }

  const bool recurrent = best_dist < 1e-3;
  if (recurrent && comb_ok && rep.lyapunov_max < 1e-3 * p.omega0) {
    rep.kind = AttractorKind::periodic;
    rep.period = best_period;
    rep.base_frequencies = {2.0 * M_PI / best_period};
  } else if (rep.lyapunov_max > 1e-2 * p.omega0) {
    rep.kind = AttractorKind::chaotic;
  } else if (!recurrent && rep.lyapunov_max < 1e-3 * p.omega0 && peaks.size() >= 2) {
    // two incommensurate bases: strongest pair with a ratio far from small
    // rationals
    const double f1 = peaks[0].freq;
    for (size_t i = 1; i < peaks.size() && rep.kind != AttractorKind::quasiperiodic;
         ++i) {
      if (peaks[i].power < 1e-4 * peaks[0].power) continue;
      const double ratio = peaks[i].freq / f1;
      bool commensurate = false;
      for (int q = 1; q <= 8 && !commensurate; ++q)
        commensurate = nearly_integer(ratio * q, 2e-3 * q);
      if (!commensurate) {
        rep.kind = AttractorKind::quasiperiodic;
        rep.base_frequencies = {f1, peaks[i].freq};
      }
    }
    if (rep.kind != AttractorKind::quasiperiodic) {
      rep.kind = AttractorKind::inconclusive;
      rep.diagnostics = "bounded aperiodic signal without a second base frequency";
    }
  } else {
    rep.kind = AttractorKind::inconclusive;
    std::ostringstream os;
    os << "recurrence=" << best_dist << " comb=" << (comb_ok ? "yes" : "no")
       << " lyapunov=" << rep.lyapunov_max;
    rep.diagnostics = os.str();
  }

  // synchrony of the cavity fields over the window
  double pair12 = 0.0, pair23 = 0.0, pair31 = 0.0;
  for (const auto& st : traj.states) {
    pair12 = std::max(pair12, std::abs(st.alpha[0] - st.alpha[1]));
    pair23 = std::max(pair23, std::abs(st.alpha[1] - st.alpha[2]));
    pair31 = std::max(pair31, std::abs(st.alpha[2] - st.alpha[0]));
  }
  const double sync_tol = 1e-4 * std::max(scale, 1e-12);
  const int equal_pairs = (pair12 < sync_tol) + (pair23 < sync_tol) + (pair31 < sync_tol);
  if (equal_pairs == 3) {
    rep.synchrony = Synchrony::uniform;
  } else if (equal_pairs == 1) {
    rep.synchrony = Synchrony::two_one;
  } else if (rep.kind == AttractorKind::periodic) {
    const BurstRecord br = detect_burst(traj);
    rep.synchrony = br.lag_error < 0.05 ? Synchrony::lagged : Synchrony::none;
  } else {
    rep.synchrony = Synchrony::none;
  }
  return rep;
}

namespace {

// best cyclic shift (in samples) aligning b(t) with a(t + shift)
double best_shift(const std::vector<double>& a, const std::vector<double>& b,
                  double period_samples, double* residual) {
  const size_t n = a.size();
  const long avail =
      static_cast<long>(n) - static_cast<long>(std::ceil(period_samples)) - 2;
  if (avail < 8) {
    if (residual) *residual = std::numeric_limits<double>::infinity();
    return 0.0;
  }
  const size_t usable = static_cast<size_t>(avail);
  auto mismatch = [&](double shift) {
    double acc = 0.0;
    size_t cnt = 0;
    const size_t stride = std::max<size_t>(1, usable / 500);
    for (size_t i = 0; i < usable; i += stride) {
      const double idx = static_cast<double>(i) + shift;
      const size_t i0 = static_cast<size_t>(idx);
      const double u = idx - static_cast<double>(i0);
      if (i0 + 1 >= n) break;
      const double av = a[i0] * (1.0 - u) + a[i0 + 1] * u;
      acc += (av - b[i]) * (av - b[i]);
      ++cnt;
    }
    return cnt > 0 ? std::sqrt(acc / static_cast<double>(cnt)) : 1e300;
  };
  double best = 0.0, bestval = std::numeric_limits<double>::infinity();
  const int grid = 240;
  for (int k = 0; k < grid; ++k) {
    const double shift = period_samples * k / grid;
    const double v = mismatch(shift);
    if (v < bestval) {
      bestval = v;
      best = shift;
    }
  }
  double step = period_samples / grid;
  while (step > 1e-4) {
    bool moved = false;
    for (double trial : {best - step, best + step}) {
      if (trial < 0.0 || trial > period_samples) continue;
      const double v = mismatch(trial);
      if (v < bestval) {
        bestval = v;
        best = trial;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  if (residual) *residual = bestval;
  return best;
}

}  // namespace

BurstRecord detect_burst(const Trajectory& traj) {
  BurstRecord rec;
  if (!traj.uniform_sampling || traj.states.size() < 64) {
    rec.diagnostics = "needs a uniformly sampled trajectory";
    return rec;
  }
  const Eigen::MatrixXd m = as_matrix(traj);
  const std::vector<double> m1 = magnitude_series(traj, 0);
  const double dt = traj.sample_dt;

  // verified period via recurrence
  double period = 0.0, dist = std::numeric_limits<double>::infinity();
  for (double cand : period_candidates(m1, dt)) {
    if (!(cand > 4.0 * dt)) continue;
    double local = cand;
    double d = recurrence_distance(m, local / dt);
    double step = 0.02 * local;
    for (int it = 0; it < 40 && step > 1e-6 * local; ++it) {
      bool moved = false;
      for (double trial : {local - step, local + step}) {
        const double dd = recurrence_distance(m, trial / dt);
        if (dd < d) {
          d = dd;
          local = trial;
          moved = true;
        }
      }
      if (!moved) step *= 0.5;
    }
    if (d < dist) {
      dist = d;
      period = local;
    }
  }
  if (!(period > 0.0) || dist > 5e-3) {
    rec.diagnostics = "no recurrent period found";
    return rec;
  }

  const double lo = *std::min_element(m1.begin(), m1.end());
  const double hi = *std::max_element(m1.begin(), m1.end());
  const std::vector<double> m2 = magnitude_series(traj, 1);
  const std::vector<double> m3 = magnitude_series(traj, 2);

  // symmetric orbits (parity images of themselves half a period later, say)
  // repeat their field magnitudes at a fraction of the state period; the
  // burst clock is the magnitude period, so divide out any such factor
  auto self_mismatch = [&](const std::vector<double>& a, double shift) {
    const long avail =
        static_cast<long>(a.size()) - static_cast<long>(std::ceil(shift)) - 2;
    if (avail < 8) return std::numeric_limits<double>::infinity();
    double acc = 0.0;
    size_t cnt = 0;
    const size_t usable = static_cast<size_t>(avail);
    const size_t stride = std::max<size_t>(1, usable / 800);
    for (size_t i = 0; i < usable; i += stride) {
      const double idx = static_cast<double>(i) + shift;
      const size_t i0 = static_cast<size_t>(idx);
      const double u = idx - static_cast<double>(i0);
      if (i0 + 1 >= a.size()) break;
      const double av = a[i0] * (1.0 - u) + a[i0 + 1] * u;
      acc += (av - a[i]) * (av - a[i]);
      ++cnt;
    }
    return cnt > 0 ? std::sqrt(acc / static_cast<double>(cnt)) : 1e300;
  };
  for (int k = 6; k >= 2; --k) {
    const double cand = period / k;
    if (cand < 8.0 * dt) continue;
    const double worst = std::max({self_mismatch(m1, cand / dt),
                                   self_mismatch(m2, cand / dt),
                                   self_mismatch(m3, cand / dt)});
    if (worst < 0.02 * (hi - lo)) {
      period = cand;
      break;
    }
  }
  rec.period = period;

  // plateau structure: rolling amplitude against the global excursion
  const size_t w = std::max<size_t>(4, static_cast<size_t>(period / dt / 25.0));
  std::vector<char> quiet(m1.size(), 0);
  size_t n_quiet = 0;
  for (size_t i = 0; i + w < m1.size(); ++i) {
    double wlo = m1[i], whi = m1[i];
    for (size_t k = 1; k < w; ++k) {
      wlo = std::min(wlo, m1[i + k]);
      whi = std::max(whi, m1[i + k]);
    }
    quiet[i] = (whi - wlo) < 0.08 * (hi - lo);
    n_quiet += quiet[i];
  }
  const double quiet_frac = static_cast<double>(n_quiet) / static_cast<double>(m1.size());
  if (quiet_frac < 0.3) {
    rec.diagnostics = "no plateau structure";
    return rec;
  }
  double plateau = 0.0;
  {
    std::vector<double> vals;
    for (size_t i = 0; i < m1.size(); ++i)
      if (quiet[i]) vals.push_back(m1[i]);
    std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
    plateau = vals[vals.size() / 2];
    // the quiet stretches must share one level, or this is just a slow
    // oscillation loitering near both turning points
    double spread = 0.0;
    for (double v : vals) spread += (v - plateau) * (v - plateau);
    spread = std::sqrt(spread / static_cast<double>(vals.size()));
    if (spread > 0.1 * (hi - lo)) {
      rec.diagnostics = "quiet stretches sit at different levels";
      return rec;
    }
  }
  rec.amplitude = hi - plateau;

  // cyclic lag: site 3 should replay site 1 shifted by a third of a period
  double res3 = 0.0, res2 = 0.0;
  const double shift3 = best_shift(m1, m3, period / dt, &res3) * dt;
  const double shift2 = best_shift(m1, m2, period / dt, &res2) * dt;
  const double third = period / 3.0;
  // two orientations, depending on which symmetry-broken attractor was hit
  const double err_fwd = std::max(std::abs(shift3 - third), std::abs(shift2 - 2.0 * third));
  const double err_bwd = std::max(std::abs(shift3 - 2.0 * third), std::abs(shift2 - third));
  rec.lag = shift3;
  rec.lag_error = std::min(err_fwd, err_bwd) / period;
  const double wave_tol = 0.05 * (hi - lo);
  rec.is_burst = rec.lag_error < 0.05 && res3 < wave_tol && res2 < wave_tol;
  if (!rec.is_burst && rec.diagnostics.empty()) {
    std::ostringstream os;
    os << "lag error " << rec.lag_error << ", waveform residuals " << res2 << ", "
       << res3;
    rec.diagnostics = os.str();
  }
  return rec;
}

EscapeRecord detect_transient_chaos(const ModelParams& p,
                                    const std::vector<SemiclassicalState>& ics,
                                    double t_max) {
  EscapeRecord rec;
  rec.t_max = t_max;
  const double hold = 50.0 / p.omega0;  // quiet time that counts as settled
  for (const auto& ic : ics) {
    IntegrateOptions opts;
    opts.tol = 1e-8;
    opts.sample_dt = 0.5;
    const Trajectory traj = integrate(p, ic, t_max, opts);
    double quiet_since = -1.0;
    double escape = t_max;
    bool found = false;
    for (size_t i = 0; i < traj.states.size(); ++i) {
      double amp = 0.0;
      for (const auto& a : traj.states[i].alpha) amp = std::max(amp, std::abs(a));
      if (amp < 1e-4) {
        if (quiet_since < 0.0) quiet_since = traj.times[i];
        if (traj.times[i] - quiet_since >= hold) {
          escape = quiet_since;
          found = true;
          break;
        }
      } else {
        quiet_since = -1.0;
      }
    }
    rec.escape_times.push_back(escape);
    rec.escaped.push_back(found);
  }
  return rec;
}

SemiclassicalState random_state(double radius, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SemiclassicalState s;
  for (int n = 0; n < n_sites; ++n) {
    const double r = radius * std::sqrt(u01(rng));
    const double ph = 2.0 * M_PI * u01(rng);
    s.alpha[n] = std::polar(r, ph);
    const double z = 2.0 * u01(rng) - 1.0;
    const double az = 2.0 * M_PI * u01(rng);
    const double sxy = 0.5 * std::sqrt(std::max(0.0, 1.0 - z * z));
    s.sx[n] = sxy * std::cos(az);
    s.sy[n] = sxy * std::sin(az);
    s.sz[n] = 0.5 * z;
  }
  return s;
}

}  // namespace trimer
