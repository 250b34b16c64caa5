#include "pnp/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"

namespace pnp {
namespace {

std::vector<double> padded(const AudioBuffer& x, std::size_t n) {
  std::vector<double> out(n, 0.0);
  std::copy_n(x.samples.begin(), std::min(n, x.samples.size()), out.begin());
  return out;
}

// |(x * psi)(t)| on a decimated grid of `grid` points spanning the padded signal. The selected bins
// are shifted to baseband, which leaves the modulus unchanged.
void band_modulus(std::span<const cplx> spectrum, std::size_t n, std::size_t start, std::span<const double> response,
                  std::size_t grid, std::vector<cplx>& work, std::vector<cplx>& out, std::span<double> modulus) {
  work.assign(grid, cplx(0.0, 0.0));
  out.resize(grid);
  for (std::size_t j = 0; j < response.size(); ++j) work[j] = spectrum[start + j] * response[j];
  fft_inverse(work, out);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < grid; ++j) modulus[j] = std::abs(out[j]) * scale;
}

std::vector<double> periodic_hann(std::size_t w) {
  std::vector<double> win(w);
  for (std::size_t i = 0; i < w; ++i) win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / w);
  return win;
}

}  // namespace

std::string JtfsConfig::describe() const {
  std::ostringstream s;
  s.precision(17);
  s << "jtfs sr=" << sample_rate << " n=" << length << " q1=" << q1 << " oct1=" << octaves1 << " rate_min=" << rate_min_hz
    << " n_rates=" << n_rates << " scale_min=" << scale_min_cpo << " n_scales=" << n_scales
    << " support=" << support_sigmas << " oversample=" << time_oversample;
  return s.str();
}

std::uint64_t JtfsConfig::hash() const { return fnv1a64(describe()); }

JtfsConfig jtfs_config_for(double sample_rate, std::size_t length) {
  JtfsConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.length = next_pow2(length);
  return cfg;
}

Jtfs::Jtfs(const JtfsConfig& cfg) : cfg_(cfg) {
  require(cfg.length >= 64, ErrorKind::kInvalidSpec, "JTFS length too short");
  require(cfg.n_rates >= 1 && cfg.n_scales >= 1, ErrorKind::kInvalidSpec, "empty second-order bank");
  n_ = next_pow2(cfg.length);
  const double bin = cfg.sample_rate / static_cast<double>(n_);

  bank1_ = morlet_filterbank(top_anchored_spec(cfg.sample_rate, n_, cfg.q1, cfg.octaves1, cfg.sample_rate / 4));
  const double sigma_top = bank1_.filters.back().sigma;
  const double rate_max = cfg.rate_min_hz * std::exp2(cfg.n_rates - 1);
  const double rate_reach = rate_max + cfg.support_sigmas * morlet_sigma(rate_max, 1);
  const double need = std::max(2.0 * cfg.support_sigmas * sigma_top, 2.0 * rate_reach) / bin;
  frames_ = std::min(n_, next_pow2(static_cast<std::size_t>(std::ceil(need))));

  const auto half = static_cast<std::ptrdiff_t>(n_ / 2);
  for (const Morlet& psi : bank1_.filters) {
    const auto k0 = static_cast<std::ptrdiff_t>(std::llround(psi.center / bin));
    const auto lo = std::max<std::ptrdiff_t>(0, k0 - static_cast<std::ptrdiff_t>(frames_ / 2));
    const auto hi = std::min<std::ptrdiff_t>(half, k0 + static_cast<std::ptrdiff_t>(frames_ / 2) - 1);
    Band b;
    b.start = static_cast<std::size_t>(lo);
    b.grid = frames_;
    for (auto k = lo; k <= hi; ++k) b.response.push_back(psi(static_cast<double>(k) * bin));
    first_.push_back(std::move(b));
  }

  for (int r = 0; r < cfg.n_rates; ++r) {
    const double mu = cfg.rate_min_hz * std::exp2(r);
    const Morlet psi{mu, morlet_sigma(mu, 1)};
    const auto kmax = std::min<std::size_t>(frames_ / 2, static_cast<std::size_t>((mu + cfg.support_sigmas * psi.sigma) / bin));
    Band b;
    for (std::size_t k = 0; k <= kmax; ++k) b.response.push_back(psi(static_cast<double>(k) * bin));
    b.grid = std::max<std::size_t>(8, next_pow2(static_cast<std::size_t>(std::ceil(cfg.time_oversample * (kmax + 1)))));
    rates_.push_back(std::move(b));
  }

  const std::size_t n_lambda = bank1_.filters.size();
  lambda_pad_ = next_pow2(n_lambda);
  const double dq = static_cast<double>(cfg.q1) / static_cast<double>(lambda_pad_);  // cycles/octave per bin
  const auto nyq_bin = static_cast<std::ptrdiff_t>(lambda_pad_ / 2);

  auto add_band = [&](std::ptrdiff_t lo, std::vector<double> response) {
    Band b;
    b.grid = next_pow2(response.size());
    b.response = std::move(response);
    freq_.push_back(std::move(b));
    freq_start_.push_back(lo);
  };
  {
    const double sigma = morlet_sigma(cfg.scale_min_cpo, 1);
    const auto reach = std::min<std::ptrdiff_t>(nyq_bin - 1, static_cast<std::ptrdiff_t>(cfg.support_sigmas * sigma / dq));
    std::vector<double> resp;
    for (auto w = -reach; w <= reach; ++w) resp.push_back(std::exp(-0.5 * (w * dq / sigma) * (w * dq / sigma)));
    add_band(-reach, std::move(resp));
  }
  for (int s = 0; s < cfg.n_scales; ++s) {
    const double scale = cfg.scale_min_cpo * std::exp2(s);
    const Morlet psi{scale, morlet_sigma(scale, 1)};
    const auto jlo = std::max<std::ptrdiff_t>(1, static_cast<std::ptrdiff_t>(std::ceil((scale - cfg.support_sigmas * psi.sigma) / dq)));
    const auto jhi = std::min<std::ptrdiff_t>(nyq_bin - 1, static_cast<std::ptrdiff_t>((scale + cfg.support_sigmas * psi.sigma) / dq));
    require(jhi >= jlo, ErrorKind::kInvalidSpec, "frequential wavelet outside the log-frequency band");
    // spin +1 (upward) lives at negative log-frequency modulation, spin -1 at positive.
    std::vector<double> up, down;
    for (auto j = jhi; j >= jlo; --j) up.push_back(psi(static_cast<double>(j) * dq));
    for (auto j = jlo; j <= jhi; ++j) down.push_back(psi(static_cast<double>(j) * dq));
    add_band(-jhi, std::move(up));
    add_band(jlo, std::move(down));
  }

  auto layout = std::make_shared<PathLayout>();
  for (std::size_t i = 0; i < n_lambda; ++i) {
    PathInfo p;
    p.order = 1;
    p.lambda = static_cast<std::int16_t>(i);
    p.center_hz = bank1_.filters[i].center;
    layout->paths.push_back(p);
  }
  for (int r = 0; r < cfg.n_rates; ++r) {
    PathInfo p;
    p.order = 2;
    p.rate_hz = cfg.rate_min_hz * std::exp2(r);
    layout->paths.push_back(p);
    for (int s = 0; s < cfg.n_scales; ++s) {
      p.scale_cpo = cfg.scale_min_cpo * std::exp2(s);
      p.spin = +1;
      layout->paths.push_back(p);
      p.spin = -1;
      layout->paths.push_back(p);
    }
  }
  layout->hash = cfg.hash();
  layout_ = std::move(layout);
}

FeatureVector Jtfs::operator()(const AudioBuffer& x) const {
  validate(x);
  require(x.sample_rate == cfg_.sample_rate, ErrorKind::kInvalidArgument, "sample rate does not match JTFS config");
  require(x.length() <= n_, ErrorKind::kInvalidArgument, "signal longer than JTFS config length");

  const std::vector<double> signal = padded(x, n_);
  std::vector<cplx> spectrum(n_ / 2 + 1);
  fft_real(signal, spectrum);

  const std::size_t n_lambda = first_.size();
  const std::size_t m1 = frames_;
  FeatureVector out;
  out.layout = layout_;
  out.coeffs.reserve(layout_->paths.size());

  // First order: U1 rows on the decimated grid, then their temporal spectra.
  std::vector<double> u1(m1);
  std::vector<std::vector<cplx>> u1_hat(n_lambda, std::vector<cplx>(m1));
  std::vector<cplx> work, tmp(m1);
  for (std::size_t l = 0; l < n_lambda; ++l) {
    band_modulus(spectrum, n_, first_[l].start, first_[l].response, m1, work, tmp, u1);
    double sum = 0.0;
    for (double v : u1) sum += v;
    out.coeffs.push_back(sum / static_cast<double>(m1));
    std::vector<cplx> row(u1.begin(), u1.end());
    fft_forward(row, u1_hat[l]);
  }

  // Second order: temporal wavelet, then one 2-D inverse transform per frequential band.
  const std::size_t lp = lambda_pad_;
  const double norm = 1.0 / (static_cast<double>(lp) * static_cast<double>(m1));
  std::vector<cplx> column(lp), column_hat(lp), grid, result;
  for (const Band& rate : rates_) {
    const std::size_t nk = rate.response.size();
    std::vector<std::vector<cplx>> b(nk, std::vector<cplx>(lp));
    for (std::size_t k = 0; k < nk; ++k) {
      std::fill(column.begin(), column.end(), cplx(0.0, 0.0));
      for (std::size_t l = 0; l < n_lambda; ++l) column[l] = u1_hat[l][k] * rate.response[k];
      fft_forward(column, b[k]);
    }
    for (std::size_t f = 0; f < freq_.size(); ++f) {
      const Band& band = freq_[f];
      const std::size_t lf = band.grid;
      const std::size_t mt = rate.grid;
      grid.assign(mt * lf, cplx(0.0, 0.0));
      result.resize(mt * lf);
      for (std::size_t k = 0; k < nk; ++k) {
        for (std::size_t j = 0; j < band.response.size(); ++j) {
          const std::ptrdiff_t w = freq_start_[f] + static_cast<std::ptrdiff_t>(j);
          const auto idx = static_cast<std::size_t>((w % static_cast<std::ptrdiff_t>(lp) + static_cast<std::ptrdiff_t>(lp)) %
                                                    static_cast<std::ptrdiff_t>(lp));
          grid[k * lf + j] = b[k][idx] * band.response[j];
        }
      }
      fft_inverse_2d(grid, result, mt, lf);
      double sum = 0.0;
      for (const cplx& v : result) sum += std::abs(v);
      out.coeffs.push_back(norm * sum / static_cast<double>(mt * lf));
    }
  }
  return out;
}

FeatureVector jtfs(const AudioBuffer& x, const JtfsConfig& cfg) { return Jtfs(cfg)(x); }

FeatureVector log_compress(const FeatureVector& f, double eps) {
  require(eps > 0, ErrorKind::kInvalidArgument, "eps must be positive");
  require(!f.log_compressed, ErrorKind::kInvalidState, "features are already log-compressed");
  FeatureVector out = f;
  for (double& c : out.coeffs) {
    require(c >= 0.0, ErrorKind::kInvalidState, "negative scattering coefficient before log");
    c = std::log1p(c / eps);
  }
  out.log_compressed = true;
  return out;
}

double feature_distance(const FeatureVector& a, const FeatureVector& b) {
  require(a.size() == b.size(), ErrorKind::kInvalidArgument, "feature sizes differ");
  if (a.layout && b.layout) {
    require(a.layout->hash == b.layout->hash && a.layout->paths == b.layout->paths, ErrorKind::kInvalidArgument,
            "feature path layouts differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a.coeffs[i] - b.coeffs[i]) * (a.coeffs[i] - b.coeffs[i]);
  return std::sqrt(sum);
}

TimeFreqImage scalogram(const AudioBuffer& x, const FilterbankSpec& spec, std::size_t hop) {
  validate(x);
  require(hop >= 1, ErrorKind::kInvalidArgument, "hop must be >= 1");
  require(hop <= x.length(), ErrorKind::kInvalidArgument, "hop exceeds signal length");
  FilterbankSpec s = spec;
  s.sample_rate = x.sample_rate;
  s.signal_length = next_pow2(x.length());
  const Filterbank bank = morlet_filterbank(s);
  const std::size_t n = s.signal_length;
  const double bin = x.sample_rate / static_cast<double>(n);

  // Decimation step d (a power of two dividing hop) keeps every filter band within the grid.
  const double need = 8.0 * bank.filters.back().sigma / bin;
  const std::size_t min_grid = std::min(n, next_pow2(static_cast<std::size_t>(std::ceil(need))));
  std::size_t d = 1;
  while (hop % (2 * d) == 0 && n / (2 * d) >= min_grid) d *= 2;
  const std::size_t grid = n / d;
  const std::size_t per_frame = hop / d;

  const std::vector<double> signal = padded(x, n);
  std::vector<cplx> spectrum(n / 2 + 1);
  fft_real(signal, spectrum);

  TimeFreqImage img;
  img.bins = bank.filters.size();
  img.frames = x.length() / hop;
  img.hop = hop;
  img.data.assign(img.bins * img.frames, 0.0);
  std::vector<double> modulus(grid);
  std::vector<cplx> work, tmp;
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  for (std::size_t i = 0; i < img.bins; ++i) {
    const Morlet& psi = bank.filters[i];
    img.centers_hz.push_back(psi.center);
    const auto k0 = static_cast<std::ptrdiff_t>(std::llround(psi.center / bin));
    const auto lo = std::max<std::ptrdiff_t>(0, k0 - static_cast<std::ptrdiff_t>(grid / 2));
    const auto hi = std::min<std::ptrdiff_t>(half, k0 + static_cast<std::ptrdiff_t>(grid / 2) - 1);
    std::vector<double> response;
    for (auto k = lo; k <= hi; ++k) response.push_back(psi(static_cast<double>(k) * bin));
    band_modulus(spectrum, n, static_cast<std::size_t>(lo), response, grid, work, tmp, modulus);
    for (std::size_t f = 0; f < img.frames; ++f) {
      double sum = 0.0;
      for (std::size_t j = 0; j < per_frame; ++j) sum += modulus[f * per_frame + j];
      img.data[i * img.frames + f] = sum / static_cast<double>(per_frame);
    }
  }
  return img;
}

MssMagnitudes mss_magnitudes(const AudioBuffer& x) {
  validate(x);
  MssMagnitudes out;
  out.length = x.length();
  out.sample_rate = x.sample_rate;
  std::vector<double> frames_buf;
  std::vector<cplx> spec;
  for (int k = 5; k <= 10; ++k) {
    const std::size_t w = std::size_t{1} << k;
    const std::size_t hop = w / 4;
    const std::vector<double> win = periodic_hann(w);
    std::vector<double> mags;
    if (x.length() >= w) {
      const std::size_t frames = (x.length() - w) / hop + 1;
      frames_buf.resize(frames * w);
      for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t i = 0; i < w; ++i) frames_buf[f * w + i] = x.samples[f * hop + i] * win[i];
      spec.resize(frames * (w / 2 + 1));
      fft_real_batch(frames_buf, spec, w, frames);
      mags.resize(spec.size());
      for (std::size_t i = 0; i < spec.size(); ++i) mags[i] = std::sqrt(std::norm(spec[i]));
    }
    out.scales.push_back(std::move(mags));
  }
  return out;
}

double mss_distance(const MssMagnitudes& a, const MssMagnitudes& b) {
  require(a.length == b.length, ErrorKind::kInvalidArgument, "MSS inputs differ in length");
  require(a.sample_rate == b.sample_rate, ErrorKind::kInvalidArgument, "MSS inputs differ in sample rate");
  double total = 0.0;
  for (std::size_t s = 0; s < a.scales.size(); ++s) {
    const auto& u = a.scales[s];
    const auto& v = b.scales[s];
    for (std::size_t i = 0; i < u.size(); ++i) total += (u[i] - v[i]) * (u[i] - v[i]);
  }
  return total;
}

double mss_distance(const AudioBuffer& x, const AudioBuffer& y) {
  require(x.length() == y.length(), ErrorKind::kInvalidArgument, "MSS inputs differ in length");
  return mss_distance(mss_magnitudes(x), mss_magnitudes(y));
}

}  // namespace pnp
