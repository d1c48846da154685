// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp::dsp {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// ---------------------------------------------------------------------------
// DFT: radix-2 FFT for power-of-two lengths, direct matrix DFT otherwise.
// ---------------------------------------------------------------------------

inline bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

inline void fft_inplace(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw std::logic_error("fft_inplace: n not 2^k");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / double(len) * (inverse ? 1.0 : -1.0);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (cplx& v : a) v /= double(n);
}

inline std::vector<cplx> dft(const std::vector<cplx>& x, bool inverse) {
  const std::size_t n = x.size();
  if (is_power_of_two(n)) {
    std::vector<cplx> a = x;
    fft_inplace(a, inverse);
    return a;
  }
  std::vector<cplx> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc(0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * kPi * double(k) * double(j) / double(n);
      acc += x[j] * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = inverse ? acc / double(n) : acc;
  }
  return out;
}

/// Forward DFT of a real signal, one-sided: K = n/2 + 1 bins.
inline std::vector<cplx> rdft(const std::vector<double>& x) {
  std::vector<cplx> a(x.begin(), x.end());
  std::vector<cplx> full = dft(a, false);
  full.resize(x.size() / 2 + 1);
  return full;
}

/// Inverse of rdft: reconstructs the length-n real signal from K = n/2 + 1
/// bins using conjugate symmetry.
inline std::vector<double> irdft(const std::vector<cplx>& bins,
                                 std::size_t n) {
  if (bins.size() != n / 2 + 1)
    throw std::invalid_argument("irdft: bin count does not match length");
  std::vector<cplx> full(n);
  for (std::size_t k = 0; k < bins.size(); ++k) full[k] = bins[k];
  for (std::size_t k = bins.size(); k < n; ++k)
    full[k] = std::conj(full[n - k]);
  std::vector<cplx> time = dft(full, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = time[i].real();
  return out;
}

// ---------------------------------------------------------------------------
// Framing with constant-overlap-add windows
// ---------------------------------------------------------------------------

enum class WindowShape { rect, hann };

/// Max-norm residual of the overlap-add constraint sum_i psi(t - i*hop) = 1,
/// evaluated per residue class of the hop.
inline double cola_residual(const std::vector<double>& window,
                            std::size_t hop) {
  if (hop == 0 || window.size() % hop != 0)
    throw std::invalid_argument("cola_residual: window length must be a "
                                "multiple of the hop");
  double worst = 0.0;
  for (std::size_t r = 0; r < hop; ++r) {
    double s = 0.0;
    for (std::size_t q = r; q < window.size(); q += hop) s += window[q];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

/// Window solving the overlap-add constraint A psi = 1 for the given
/// length/hop. The hann base returns the scaled periodic Hann whenever that
/// is itself COLA for the hop; otherwise the least-squares solution closest
/// to the base shape (which forces the rectangular window when hop ==
/// length).
inline std::vector<double> solve_cola_window(std::size_t length,
                                             std::size_t hop,
                                             WindowShape base = WindowShape::hann) {
  if (length == 0 || hop == 0 || length % hop != 0)
    throw std::invalid_argument(
        "solve_cola_window: length must be a positive multiple of the hop");
  const std::size_t q_count = length / hop;
  std::vector<double> psi(length);
  if (base == WindowShape::rect) {
    std::fill(psi.begin(), psi.end(), 1.0);
  } else {
    for (std::size_t i = 0; i < length; ++i)
      psi[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(length));
  }
  // Per-residue sums of the base shape.
  std::vector<double> sums(hop, 0.0);
  for (std::size_t r = 0; r < hop; ++r)
    for (std::size_t q = r; q < length; q += hop) sums[r] += psi[q];
  bool uniform = true;
  for (std::size_t r = 1; r < hop; ++r)
    if (std::abs(sums[r] - sums[0]) > 1e-12 * std::max(1.0, sums[0]))
      uniform = false;
  if (uniform && sums[0] > 1e-12) {
    // Pure rescale keeps the base shape exactly.
    for (double& v : psi) v /= sums[0];
  } else {
    // Least squares: A A^T = Q I because residue classes are disjoint, so
    // psi <- psi + A^T (1 - A psi) / Q.
    for (std::size_t r = 0; r < hop; ++r) {
      const double corr = (1.0 - sums[r]) / double(q_count);
      for (std::size_t q = r; q < length; q += hop) psi[q] += corr;
    }
  }
  const double residual = cola_residual(psi, hop);
  if (residual > 1e-10)
    throw std::runtime_error("solve_cola_window: overlap-add residual " +
                             std::to_string(residual));
  return psi;
}

/// Window length, hop, and the analysis window. The window is applied once
/// at framing; synthesis is plain overlap-add, so the window must satisfy
/// the overlap-add constraint.
struct FrameConfig {
  std::size_t length = 0;
  std::size_t hop = 0;
  std::vector<double> window;

  FrameConfig() = default;
  FrameConfig(std::size_t length_, std::size_t hop_,
              WindowShape base = WindowShape::hann)
      : length(length_), hop(hop_),
        window(solve_cola_window(length_, hop_, base)) {}
  FrameConfig(std::size_t length_, std::size_t hop_,
              std::vector<double> window_)
      : length(length_), hop(hop_), window(std::move(window_)) {
    if (window.size() != length)
      throw std::invalid_argument("FrameConfig: window length mismatch");
    const double r = cola_residual(window, hop);
    if (r > 1e-10)
      throw std::invalid_argument("FrameConfig: window violates overlap-add "
                                  "constraint, residual " + std::to_string(r));
  }

  std::size_t bins() const { return length / 2 + 1; }

  std::size_t frame_count(std::size_t samples) const {
    if (samples < length)
      throw std::invalid_argument("FrameConfig: signal of " +
                                  std::to_string(samples) +
                                  " samples shorter than one frame");
    return (samples - length) / hop + 1;
  }
};

/// Windowed frames as an L_w x T matrix (column t = frame t).
inline Tensor frame_matrix(const std::vector<double>& x,
                           const FrameConfig& cfg) {
  const std::size_t T = cfg.frame_count(x.size());
  Tensor out({cfg.length, T});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < cfg.length; ++i)
      out.at(i, t) = x[t * cfg.hop + i] * cfg.window[i];
  return out;
}

// ---------------------------------------------------------------------------
// Spectrogram
// ---------------------------------------------------------------------------

/// One-sided complex STFT frames (T x K) with framing metadata. Immutable
/// value after construction.
struct Spectrogram {
  FrameConfig config;
  double sample_rate = 0.0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<cplx> data;  // row-major [frame][bin]

  cplx& at(std::size_t t, std::size_t k) { return data[t * bins + k]; }
  cplx at(std::size_t t, std::size_t k) const { return data[t * bins + k]; }

  /// Angular frequency (rad/s) of bin k.
  double omega(std::size_t k) const {
    return 2.0 * kPi * double(k) * sample_rate / double(config.length);
  }

  Tensor magnitude() const {
    Tensor m({frames, bins});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t k = 0; k < bins; ++k) m.at(t, k) = std::abs(at(t, k));
    return m;
  }

  Tensor power() const {
    Tensor m({frames, bins});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t k = 0; k < bins; ++k) m.at(t, k) = std::norm(at(t, k));
    return m;
  }
};

/// Per-bin multiplicative gains (T x K). Wiener/ideal masks live in [0, 1];
/// set `bounded = false` for unconstrained (e.g. learned) masks.
struct MaskSeq {
  Tensor values;  // T x K
  bool bounded = true;

  MaskSeq() = default;
  explicit MaskSeq(Tensor v, bool bounded_ = true)
      : values(std::move(v)), bounded(bounded_) {
    if (values.ndim() != 2)
      throw std::invalid_argument("MaskSeq: values must be 2-D");
    if (bounded)
      for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] < -1e-12 || values[i] > 1.0 + 1e-12)
          throw std::invalid_argument(
              "MaskSeq: bounded mask value outside [0,1]");
  }
};

inline Spectrogram stft(const std::vector<double>& x, const FrameConfig& cfg,
                        double sample_rate) {
  Spectrogram spec;
  spec.config = cfg;
  spec.sample_rate = sample_rate;
  spec.frames = cfg.frame_count(x.size());
  spec.bins = cfg.bins();
  spec.data.resize(spec.frames * spec.bins);
  std::vector<double> frame(cfg.length);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t i = 0; i < cfg.length; ++i)
      frame[i] = x[t * cfg.hop + i] * cfg.window[i];
    std::vector<cplx> bins = rdft(frame);
    std::copy(bins.begin(), bins.end(), spec.data.begin() + t * spec.bins);
  }
  return spec;
}

/// Inverse STFT by plain overlap-add of per-frame inverse transforms; a mask
/// given here is applied per bin before reconstruction.
inline std::vector<double> istft(const Spectrogram& spec,
                                 const MaskSeq* mask = nullptr) {
  if (mask) {
    if (mask->values.rows() != spec.frames ||
        mask->values.cols() != spec.bins)
      throw std::invalid_argument("istft: mask " + mask->values.shape_str() +
                                  " does not match spectrogram");
  }
  const std::size_t L = spec.config.length, H = spec.config.hop;
  std::vector<double> out((spec.frames - 1) * H + L, 0.0);
  std::vector<cplx> bins(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      bins[k] = spec.at(t, k);
      if (mask) bins[k] *= mask->values.at(t, k);
    }
    std::vector<double> frame = irdft(bins, L);
    for (std::size_t i = 0; i < L; ++i) out[t * H + i] += frame[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mel filter bank and MFCC
// ---------------------------------------------------------------------------

inline double hz_to_mel(double hz) {
  return 1125.0 * std::log(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  return 700.0 * (std::exp(mel / 1125.0) - 1.0);
}

/// Triangle filters over K one-sided bins at uniformly spaced Mel centers
/// between 0 Hz and Nyquist; adjacent filters overlap at half height.
struct MelBank {
  Tensor weights;  // F x K
  double sample_rate = 0.0;

  std::size_t filters() const { return weights.rows(); }
  std::size_t bins() const { return weights.cols(); }
};

inline MelBank mel_bank(std::size_t filter_count, std::size_t bins,
                        double sample_rate) {
  if (filter_count < 2)
    throw std::invalid_argument("mel_bank: need at least 2 filters");
  const double nyquist = sample_rate / 2.0;
  const std::size_t fft_len = 2 * (bins - 1);
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(filter_count + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * double(i) / double(filter_count + 1));
  MelBank bank;
  bank.sample_rate = sample_rate;
  bank.weights = Tensor({filter_count, bins});
  for (std::size_t f = 0; f < filter_count; ++f) {
    const double lo = edges[f], mid = edges[f + 1], hi = edges[f + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double freq = double(k) * sample_rate / double(fft_len);
      double w = 0.0;
      if (freq >= lo && freq <= mid && mid > lo)
        w = (freq - lo) / (mid - lo);
      else if (freq > mid && freq <= hi && hi > mid)
        w = (hi - freq) / (hi - mid);
      bank.weights.at(f, k) = std::max(0.0, w);
    }
  }
  return bank;
}

/// Mel-weighted power per frame: T x F.
inline Tensor mel_spectrum(const Spectrogram& spec, const MelBank& bank) {
  if (bank.bins() != spec.bins)
    throw std::invalid_argument("mel_spectrum: bank bins mismatch");
  Tensor power = spec.power();
  Tensor out({spec.frames, bank.filters()});
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t f = 0; f < bank.filters(); ++f) {
      double acc = 0.0;
      for (std::size_t k = 0; k < spec.bins; ++k)
        acc += bank.weights.at(f, k) * power.at(t, k);
      out.at(t, f) = acc;
    }
  return out;
}

inline Tensor log_mel(const Spectrogram& spec, const MelBank& bank,
                      double floor = 1e-12) {
  Tensor m = mel_spectrum(spec, bank);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = std::log(std::max(m[i], floor));
  return m;
}

/// Type-II cosine transform over the filter axis, first `coeffs` points.
inline Tensor dct2(const Tensor& log_energies, std::size_t coeffs) {
  const std::size_t T = log_energies.rows(), F = log_energies.cols();
  if (coeffs > F)
    throw std::invalid_argument("dct2: more coefficients than filters");
  Tensor out({T, coeffs});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t l = 0; l < coeffs; ++l) {
      double acc = 0.0;
      for (std::size_t f = 0; f < F; ++f)
        acc += log_energies.at(t, f) *
               std::cos(kPi * double(l) * (2.0 * double(f) + 1.0) /
                        (2.0 * double(F)));
      out.at(t, l) = acc;
    }
  return out;
}

/// First `coeffs` cepstral coefficients of the log Mel energies, T x L.
/// The default of 20 follows common practice for spectral envelopes.
inline Tensor mfcc(const Spectrogram& spec, const MelBank& bank,
                   std::size_t coeffs = 20) {
  return dct2(log_mel(spec, bank), coeffs);
}

// ---------------------------------------------------------------------------
// Wiener gains, ideal masks, learned analysis/reconstruction
// ---------------------------------------------------------------------------

/// H = phi_SS / (phi_SS + phi_VV) = iSNR / (1 + iSNR), elementwise; defined
/// as 0 where both powers vanish.
inline Tensor wiener_gain(const Tensor& phi_ss, const Tensor& phi_vv) {
  phi_ss.require_same_shape(phi_vv, "wiener_gain");
  Tensor h(phi_ss.shape());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (phi_ss[i] < 0.0 || phi_vv[i] < 0.0)
      throw std::invalid_argument("wiener_gain: negative power");
    const double denom = phi_ss[i] + phi_vv[i];
    h[i] = denom > 0.0 ? phi_ss[i] / denom : 0.0;
  }
  return h;
}

/// Per-source masks |s_j|^2 / (eps0 + sum_i |s_i|^2). With eps0 = 0 the
/// masks partition unity wherever total power is positive and are 0 where it
/// vanishes.
inline std::vector<MaskSeq> ideal_masks(const std::vector<Tensor>& powers,
                                        double eps0 = 0.0) {
  if (powers.empty()) throw std::invalid_argument("ideal_masks: no sources");
  if (eps0 < 0.0) throw std::invalid_argument("ideal_masks: eps0 < 0");
  for (const Tensor& p : powers) {
    p.require_same_shape(powers[0], "ideal_masks");
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] < 0.0) throw std::invalid_argument("ideal_masks: negative power");
  }
  Tensor total(powers[0].shape());
  for (const Tensor& p : powers) total += p;
  std::vector<MaskSeq> out;
  for (const Tensor& p : powers) {
    Tensor m(p.shape());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double denom = eps0 + total[i];
      m[i] = denom > 0.0 ? p[i] / denom : 0.0;
    }
    out.emplace_back(std::move(m));
  }
  return out;
}

/// Learned analysis/reconstruction: s_hat = U_tilde diag(h) U^T x. With
/// U_tilde U^T = I and h = 1 this reproduces x.
inline Tensor learned_analysis(const Tensor& U, const Tensor& U_tilde,
                               const Tensor& x, const Tensor& h) {
  if (U.ndim() != 2 || U_tilde.ndim() != 2 || !U.same_shape(U_tilde))
    throw std::invalid_argument("learned_analysis: U and U_tilde must be "
                                "equal-shape matrices");
  if (x.size() != U.rows() || h.size() != U.cols())
    throw std::invalid_argument("learned_analysis: x/h sizes do not match U");
  Tensor coeffs = matmul(U.transpose(), x.reshape({x.size(), 1}));
  for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= h[k];
  Tensor out = matmul(U_tilde, coeffs);
  return out.reshape({U.rows()});
}

}  // namespace dasp::dsp
