// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/dsp.hpp"
#include "dasp/rng.hpp"
#include "dasp/tensor.hpp"

namespace dasp::spatial {

using dsp::cplx;

// ---------------------------------------------------------------------------
// Geometry and directions
// ---------------------------------------------------------------------------

struct ArrayGeometry {
  std::vector<std::array<double, 3>> positions;  // meters
  double speed_of_sound = 343.0;

  std::size_t mics() const { return positions.size(); }

  void validate() const {
    if (positions.size() < 2)
      throw std::invalid_argument("ArrayGeometry: need at least 2 mics");
    for (std::size_t a = 0; a < positions.size(); ++a)
      for (std::size_t b = a + 1; b < positions.size(); ++b) {
        double d2 = 0.0;
        for (int i = 0; i < 3; ++i)
          d2 += (positions[a][i] - positions[b][i]) *
                (positions[a][i] - positions[b][i]);
        if (d2 == 0.0)
          throw std::invalid_argument("ArrayGeometry: duplicate positions");
      }
  }

  double max_spacing() const {
    double best = 0.0;
    for (std::size_t a = 0; a < positions.size(); ++a)
      for (std::size_t b = a + 1; b < positions.size(); ++b) {
        double d2 = 0.0;
        for (int i = 0; i < 3; ++i)
          d2 += (positions[a][i] - positions[b][i]) *
                (positions[a][i] - positions[b][i]);
        best = std::max(best, d2);
      }
    return std::sqrt(best);
  }

  /// Spatial-aliasing limit: angular frequencies at or above
  /// pi * c / max spacing are ambiguous.
  double aliasing_limit() const {
    return dsp::kPi * speed_of_sound / max_spacing();
  }

  /// Square array of the given side in the xy-plane, centered at origin.
  static ArrayGeometry square(double side) {
    ArrayGeometry g;
    const double h = side / 2.0;
    g.positions = {{-h, -h, 0.0}, {h, -h, 0.0}, {h, h, 0.0}, {-h, h, 0.0}};
    return g;
  }

  /// Regular tetrahedron with the given circumradius (non-coplanar).
  static ArrayGeometry tetrahedron(double radius) {
    ArrayGeometry g;
    const double s = radius / std::sqrt(3.0);
    g.positions = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
    return g;
  }
};

/// Elevation theta in [0, pi], azimuth phi in [0, 2 pi); the unit vector is
/// [sin th cos ph, sin th sin ph, cos th].
struct Direction {
  double elevation = dsp::kPi / 2.0;
  double azimuth = 0.0;

  std::array<double, 3> unit() const {
    return {std::sin(elevation) * std::cos(azimuth),
            std::sin(elevation) * std::sin(azimuth), std::cos(elevation)};
  }

  static Direction from_azimuth_deg(double deg) {
    Direction d;
    d.azimuth = deg * dsp::kPi / 180.0;
    d.elevation = dsp::kPi / 2.0;
    return d;
  }

  static Direction from_unit(const std::array<double, 3>& u) {
    Direction d;
    d.elevation = std::acos(std::clamp(u[2], -1.0, 1.0));
    d.azimuth = std::atan2(u[1], u[0]);
    if (d.azimuth < 0.0) d.azimuth += 2.0 * dsp::kPi;
    return d;
  }

  double angle_to(const Direction& o) const {
    auto a = unit(), b = o.unit();
    double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return std::acos(std::clamp(dot, -1.0, 1.0));
  }
};

/// Azimuth ring of J equally spaced directions (default 72, i.e. 5 deg).
inline std::vector<Direction> azimuth_ring_grid(std::size_t count = 72) {
  std::vector<Direction> grid;
  for (std::size_t j = 0; j < count; ++j)
    grid.push_back(Direction::from_azimuth_deg(360.0 * double(j) /
                                               double(count)));
  return grid;
}

/// Array manifold vector: element m is exp(-j w (r_1 - r_m)^T phi / c).
/// Element 1 is exactly 1; all elements have unit modulus.
inline std::vector<cplx> steering_vector(double omega,
                                         const ArrayGeometry& geometry,
                                         const Direction& direction) {
  geometry.validate();
  if (omega < 0.0) throw std::invalid_argument("steering_vector: omega < 0");
  const auto u = direction.unit();
  std::vector<cplx> d(geometry.mics());
  for (std::size_t m = 0; m < geometry.mics(); ++m) {
    double proj = 0.0;
    for (int i = 0; i < 3; ++i)
      proj += (geometry.positions[0][i] - geometry.positions[m][i]) * u[i];
    const double phase = -omega * proj / geometry.speed_of_sound;
    d[m] = m == 0 ? cplx(1.0, 0.0) : std::polar(1.0, phase);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Scene simulation
// ---------------------------------------------------------------------------

struct SceneSource {
  Direction direction;
  std::vector<double> signal;
};

/// Microphone geometry + plane-wave sources + white observation noise.
struct ArrayScene {
  ArrayGeometry geometry;
  std::vector<SceneSource> sources;
  double noise_std = 0.0;
  double sample_rate = 8000.0;

  void validate() const {
    geometry.validate();
    if (sources.empty())
      throw std::invalid_argument("ArrayScene: no sources");
    for (const auto& s : sources)
      if (s.signal.size() != sources[0].signal.size())
        throw std::invalid_argument("ArrayScene: source lengths differ");
  }
};

struct MultiSpectrogram {
  std::vector<dsp::Spectrogram> channels;

  std::size_t mics() const { return channels.size(); }
  std::size_t frames() const { return channels.at(0).frames; }
  std::size_t bins() const { return channels.at(0).bins; }
  double omega(std::size_t k) const { return channels.at(0).omega(k); }
};

struct SimulatedScene {
  MultiSpectrogram observation;
  std::vector<dsp::Spectrogram> source_spectra;  // reference-channel STFTs
};

/// Direct-path frequency-domain model: per bin,
/// p(w, t) = sum_q d(w, phi_q) S'_q(w, t) + v with v complex Gaussian of
/// per-bin variance noise_std^2 ||window||^2 (the STFT of white noise).
inline SimulatedScene simulate_scene(const ArrayScene& scene,
                                     const dsp::FrameConfig& cfg, Rng& rng) {
  scene.validate();
  SimulatedScene out;
  for (const auto& src : scene.sources)
    out.source_spectra.push_back(
        dsp::stft(src.signal, cfg, scene.sample_rate));
  const std::size_t M = scene.geometry.mics();
  const std::size_t T = out.source_spectra[0].frames;
  const std::size_t K = out.source_spectra[0].bins;
  double wnorm2 = 0.0;
  for (double w : cfg.window) wnorm2 += w * w;
  const double bin_std = scene.noise_std * std::sqrt(wnorm2 / 2.0);

  out.observation.channels.assign(M, dsp::Spectrogram{});
  for (std::size_t m = 0; m < M; ++m) {
    auto& ch = out.observation.channels[m];
    ch.config = cfg;
    ch.sample_rate = scene.sample_rate;
    ch.frames = T;
    ch.bins = K;
    ch.data.assign(T * K, cplx(0.0));
  }
  // Steering per (source, bin).
  for (std::size_t q = 0; q < scene.sources.size(); ++q) {
    for (std::size_t k = 0; k < K; ++k) {
      const double omega = out.source_spectra[q].omega(k);
      std::vector<cplx> d =
          steering_vector(omega, scene.geometry, scene.sources[q].direction);
      for (std::size_t t = 0; t < T; ++t) {
        const cplx s = out.source_spectra[q].at(t, k);
        for (std::size_t m = 0; m < M; ++m)
          out.observation.channels[m].at(t, k) += d[m] * s;
      }
    }
  }
  if (scene.noise_std > 0.0) {
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k)
          out.observation.channels[m].at(t, k) +=
              cplx(bin_std * rng.gaussian(), bin_std * rng.gaussian());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

enum class RawAlignment { none, reference };

/// Stacked real/imaginary observation rows for one frame:
/// rows 0..M-1 hold Re p_m, rows M..2M-1 hold Im p_m. With reference
/// alignment each channel is rotated by the conjugate phase of channel 1;
/// drop_reference removes the (now nonnegative real) reference rows,
/// giving 2(M-1) x K.
inline Tensor raw_features(const MultiSpectrogram& obs, std::size_t frame,
                           RawAlignment align,
                           bool drop_reference = false) {
  const std::size_t M = obs.mics(), K = obs.bins();
  if (M < 2) throw std::invalid_argument("raw_features: need M >= 2");
  if (drop_reference && align == RawAlignment::none)
    throw std::invalid_argument(
        "raw_features: dropping the reference requires alignment");
  std::vector<std::vector<cplx>> p(M, std::vector<cplx>(K));
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < K; ++k)
      p[m][k] = obs.channels[m].at(frame, k);
  if (align == RawAlignment::reference) {
    for (std::size_t k = 0; k < K; ++k) {
      const cplx ref = p[0][k];
      const double mag = std::abs(ref);
      if (mag == 0.0) continue;
      const cplx rot = std::conj(ref) / mag;
      for (std::size_t m = 0; m < M; ++m) p[m][k] *= rot;
    }
  }
  const std::size_t first = drop_reference ? 1 : 0;
  const std::size_t rows = M - first;
  Tensor out({2 * rows, K});
  for (std::size_t m = first; m < M; ++m)
    for (std::size_t k = 0; k < K; ++k) {
      out.at(m - first, k) = p[m][k].real();
      out.at(rows + m - first, k) = p[m][k].imag();
    }
  return out;
}

namespace detail {

/// Block-averaged spatial covariance at one bin over frames
/// [start, start+count).
inline Eigen::MatrixXcd covariance(const MultiSpectrogram& obs,
                                   std::size_t bin, std::size_t start,
                                   std::size_t count) {
  const std::size_t M = obs.mics();
  Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(M, M);
  for (std::size_t t = start; t < start + count; ++t) {
    Eigen::VectorXcd p(M);
    for (std::size_t m = 0; m < M; ++m) p(m) = obs.channels[m].at(t, bin);
    phi += p * p.adjoint();
  }
  return phi / double(count);
}

}  // namespace detail

struct SpatialSpectrumOptions {
  std::size_t block_frames = 50;  // covariance block average length
  std::size_t min_bin = 1;        // skip DC by default
  /// Scanning maps default to the full band: summing over many bins washes
  /// out per-frequency grating ambiguity and sharpens the beam enough to
  /// resolve separated sources. The strict omega < pi c / spacing rule
  /// stays in force for the phase-unwrapping eigenvector solve.
  bool respect_aliasing_limit = false;
};

/// Delay-and-sum scanning map (J x blocks): for block b and direction j,
/// sum over usable bins of h_j^H Phi h_j with h_j = d_j / M and Phi
/// trace-normalized. Bins at or above the aliasing limit are excluded.
inline Tensor spatial_spectrum(const MultiSpectrogram& obs,
                               const ArrayGeometry& geometry,
                               const std::vector<Direction>& grid,
                               const SpatialSpectrumOptions& opt = {}) {
  if (grid.empty()) throw std::invalid_argument("spatial_spectrum: no grid");
  geometry.validate();
  const std::size_t M = obs.mics();
  if (M != geometry.mics())
    throw std::invalid_argument("spatial_spectrum: geometry mismatch");
  const std::size_t block_len = std::min(opt.block_frames, obs.frames());
  const std::size_t blocks = obs.frames() / block_len;
  const double limit = opt.respect_aliasing_limit
                           ? geometry.aliasing_limit()
                           : std::numeric_limits<double>::infinity();
  std::vector<std::size_t> bins;
  for (std::size_t k = opt.min_bin; k < obs.bins(); ++k)
    if (obs.omega(k) > 0.0 && obs.omega(k) < limit) bins.push_back(k);
  if (bins.empty())
    throw std::invalid_argument("spatial_spectrum: no usable bins below the "
                                "aliasing limit");
  Tensor map({grid.size(), blocks}, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t k : bins) {
      Eigen::MatrixXcd phi =
          detail::covariance(obs, k, b * block_len, block_len);
      const double tr = phi.trace().real();
      if (tr <= 0.0) continue;
      phi /= tr;  // normalization psi(w, t) = 1 / trace
      const double omega = obs.omega(k);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<cplx> d = steering_vector(omega, geometry, grid[j]);
        Eigen::VectorXcd h(M);
        for (std::size_t m = 0; m < M; ++m) h(m) = d[m] / double(M);
        map.at(j, b) += (h.adjoint() * phi * h).real()(0, 0);
      }
    }
  }
  return map;
}

enum class CorrelationWeighting { phat, magnitude };

/// Correlation-coefficient scanning map: sum over usable bins of
/// Re[d^H Phi d] with [Phi]_{nm} = w_{nm} P_n P_m^*; the phase transform
/// normalizes each element to unit modulus, the magnitude kind keeps the
/// raw cross-spectrum.
inline Tensor correlation_feature(const MultiSpectrogram& obs,
                                  const ArrayGeometry& geometry,
                                  const std::vector<Direction>& grid,
                                  CorrelationWeighting weighting,
                                  const SpatialSpectrumOptions& opt = {}) {
  if (grid.empty())
    throw std::invalid_argument("correlation_feature: no grid");
  geometry.validate();
  const std::size_t M = obs.mics();
  const std::size_t block_len = std::min(opt.block_frames, obs.frames());
  const std::size_t blocks = obs.frames() / block_len;
  const double limit = opt.respect_aliasing_limit
                           ? geometry.aliasing_limit()
                           : std::numeric_limits<double>::infinity();
  std::vector<std::size_t> bins;
  for (std::size_t k = opt.min_bin; k < obs.bins(); ++k)
    if (obs.omega(k) > 0.0 && obs.omega(k) < limit) bins.push_back(k);
  if (bins.empty())
    throw std::invalid_argument("correlation_feature: no usable bins");
  Tensor map({grid.size(), blocks}, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t k : bins) {
      Eigen::MatrixXcd phi =
          detail::covariance(obs, k, b * block_len, block_len);
      if (weighting == CorrelationWeighting::phat) {
        for (std::size_t r = 0; r < M; ++r)
          for (std::size_t c = 0; c < M; ++c) {
            const double mag = std::abs(phi(r, c));
            if (mag > 0.0) phi(r, c) /= mag;
          }
      }
      const double omega = obs.omega(k);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<cplx> d = steering_vector(omega, geometry, grid[j]);
        Eigen::VectorXcd dv(M);
        for (std::size_t m = 0; m < M; ++m) dv(m) = d[m];
        map.at(j, b) += (dv.adjoint() * phi * dv).real()(0, 0);
      }
    }
  }
  return map;
}

/// Principal eigenvector of the covariance at (bin, block).
inline std::vector<cplx> principal_eigenvector(const MultiSpectrogram& obs,
                                               std::size_t bin,
                                               std::size_t start,
                                               std::size_t count) {
  Eigen::MatrixXcd phi = detail::covariance(obs, bin, start, count);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(phi);
  const Eigen::Index last = phi.rows() - 1;
  std::vector<cplx> u(std::size_t(phi.rows()));
  for (Eigen::Index m = 0; m < phi.rows(); ++m)
    u[std::size_t(m)] = es.eigenvectors()(m, last);
  return u;
}

struct DirectionSolve {
  std::array<double, 3> raw{0.0, 0.0, 0.0};  // least-squares solution
  Direction direction;                        // normalized when usable
  double residual = 0.0;
  std::size_t rank = 0;
  bool usable = false;   // raw norm above threshold
  bool aliased = false;  // omega at or above the spatial aliasing limit
};

/// Solves [r_m - r_1]^T phi = (c/w) angle(u_m / u_1) in the least-squares
/// sense (minimum-norm via SVD). The eigenvector is first normalized by the
/// phase of its reference element; phases stay within (-pi, pi].
inline DirectionSolve solve_direction_from_phase(const std::vector<cplx>& u,
                                                 const ArrayGeometry& geometry,
                                                 double omega,
                                                 bool require_full_rank = false) {
  geometry.validate();
  const std::size_t M = geometry.mics();
  if (u.size() != M)
    throw std::invalid_argument("solve_direction_from_phase: eigenvector "
                                "size mismatch");
  if (!(omega > 0.0))
    throw std::invalid_argument("solve_direction_from_phase: omega <= 0");
  if (std::abs(u[0]) == 0.0)
    throw std::invalid_argument("solve_direction_from_phase: zero reference "
                                "element");
  DirectionSolve out;
  out.aliased = omega >= geometry.aliasing_limit();

  const cplx ref_rot = std::conj(u[0]) / std::abs(u[0]);
  Eigen::MatrixXd A(M - 1, 3);
  Eigen::VectorXd b(M - 1);
  const double c = geometry.speed_of_sound;
  for (std::size_t m = 1; m < M; ++m) {
    for (int i = 0; i < 3; ++i)
      A(Eigen::Index(m - 1), i) =
          geometry.positions[m][i] - geometry.positions[0][i];
    b(Eigen::Index(m - 1)) = (c / omega) * std::arg(u[m] * ref_rot);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  out.rank = std::size_t(svd.rank());
  if (require_full_rank && out.rank < 3)
    throw std::runtime_error(
        "solve_direction_from_phase: rank-deficient geometry (rank " +
        std::to_string(out.rank) + " < 3)");
  Eigen::Vector3d phi = svd.solve(b);
  out.residual = (A * phi - b).norm();
  for (int i = 0; i < 3; ++i) out.raw[std::size_t(i)] = phi(i);
  const double norm = phi.norm();
  if (norm > 1e-9) {
    out.usable = true;
    out.direction = Direction::from_unit(
        {phi(0) / norm, phi(1) / norm, phi(2) / norm});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// Nearest grid index by angular distance.
inline std::size_t nearest_grid_index(const std::vector<Direction>& grid,
                                      const Direction& d) {
  std::size_t best = 0;
  double best_angle = grid[0].angle_to(d);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double a = grid[j].angle_to(d);
    if (a < best_angle) {
      best_angle = a;
      best = j;
    }
  }
  return best;
}

inline Tensor onehot_labels(const std::vector<Direction>& grid,
                            const std::vector<Direction>& truths) {
  Tensor y({grid.size()}, 0.0);
  for (const auto& d : truths) y[nearest_grid_index(grid, d)] = 1.0;
  return y;
}

/// [y]_l = max_q exp(-||phi_q - phi_l||^2 / sigma^2) over the unit vectors.
inline Tensor smoothed_labels(const std::vector<Direction>& grid,
                              const std::vector<Direction>& truths,
                              double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("smoothed_labels: sigma");
  Tensor y({grid.size()}, 0.0);
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const auto gl = grid[l].unit();
    double best = 0.0;
    for (const auto& t : truths) {
      const auto tu = t.unit();
      double d2 = 0.0;
      for (int i = 0; i < 3; ++i) d2 += (tu[i] - gl[i]) * (tu[i] - gl[i]);
      best = std::max(best, std::exp(-d2 / (sigma * sigma)));
    }
    y[l] = best;
  }
  return y;
}

struct AccdoaClass {
  double probability = 0.0;  // column norm in [0, 1]
  Direction direction;
  bool active = false;  // norm above 1e-9; direction undefined otherwise
};

/// 3 x L matrix: column l is probability * unit direction of class l.
inline Tensor accdoa_encode(const std::vector<AccdoaClass>& classes) {
  Tensor y({3, classes.size()}, 0.0);
  for (std::size_t l = 0; l < classes.size(); ++l) {
    if (!classes[l].active) continue;
    if (classes[l].probability < 0.0 || classes[l].probability > 1.0)
      throw std::invalid_argument("accdoa_encode: probability outside [0,1]");
    const auto u = classes[l].direction.unit();
    for (int i = 0; i < 3; ++i)
      y.at(std::size_t(i), l) = classes[l].probability * u[i];
  }
  return y;
}

inline std::vector<AccdoaClass> accdoa_decode(const Tensor& y) {
  if (y.ndim() != 2 || y.rows() != 3)
    throw std::invalid_argument("accdoa_decode: need a 3 x L matrix");
  std::vector<AccdoaClass> out(y.cols());
  for (std::size_t l = 0; l < y.cols(); ++l) {
    double n2 = 0.0;
    for (std::size_t i = 0; i < 3; ++i) n2 += y.at(i, l) * y.at(i, l);
    const double norm = std::sqrt(n2);
    out[l].probability = norm;
    if (norm >= 1e-9) {
      out[l].active = true;
      out[l].direction = Direction::from_unit(
          {y.at(0, l) / norm, y.at(1, l) / norm, y.at(2, l) / norm});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene description file
// ---------------------------------------------------------------------------

struct SceneFile {
  ArrayGeometry geometry;
  std::vector<std::pair<std::string, Direction>> sources;  // wav path, angle
  double noise_std = 0.0;
  double sample_rate = 8000.0;
  std::uint64_t seed = 0;
};

/// Line-oriented scene description:
///   rate <hz>         noise_std <std>      seed <u64>
///   mic <x> <y> <z>
///   source <wav path> <azimuth deg> [elevation deg]
/// '#' starts a comment.
inline SceneFile parse_scene_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene file: " + path);
  SceneFile scene;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string keyword;
    if (!(ss >> keyword)) continue;
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               what);
    };
    if (keyword == "rate") {
      if (!(ss >> scene.sample_rate)) fail("rate needs a number");
    } else if (keyword == "noise_std") {
      if (!(ss >> scene.noise_std)) fail("noise_std needs a number");
    } else if (keyword == "seed") {
      if (!(ss >> scene.seed)) fail("seed needs an integer");
    } else if (keyword == "mic") {
      std::array<double, 3> p{};
      if (!(ss >> p[0] >> p[1] >> p[2])) fail("mic needs x y z");
      scene.geometry.positions.push_back(p);
    } else if (keyword == "source") {
      std::string wav;
      double az = 0.0, el = 90.0;
      if (!(ss >> wav >> az)) fail("source needs a path and azimuth");
      ss >> el;
      Direction d = Direction::from_azimuth_deg(az);
      d.elevation = el * dsp::kPi / 180.0;
      scene.sources.push_back({wav, d});
    } else {
      fail("unknown keyword '" + keyword + "'");
    }
  }
  scene.geometry.validate();
  if (scene.sources.empty())
    throw std::runtime_error(path + ": no sources defined");
  return scene;
}

}  // namespace dasp::spatial
