#pragma once

// 64-bit mirror of the discretized logistic mixture, kept formula-for-formula
// in sync with the float implementation: 256-level grid in [-1,1], bin edges
// at x +- 1/255, open tails at the extreme levels, log scales clamped at -7,
// green/blue means shifted by tanh-squashed couplings times the observed
// redder channels, and the same density*binwidth fallback when a bin's CDF
// difference underflows 1e-5. Decomposed per mixture component so the
// per-channel normalization can be summed over the grid, which the public
// channel-summed API cannot expose.

#include <cmath>
#include <vector>

namespace refdist {

inline double grid_value(int level) { return 2.0 * level / 255.0 - 1.0; }

// log P_l(channel c = xv | observed x[0..2]) for mixture component l,
// excluding the component weight. p is the 10*L parameter block of one pixel,
// laid out [logits | means (3 per comp) | log scales | couplings].
inline double component_channel_logpmf(const std::vector<double>& p, int L,
                                       int l, int c, const double x[3],
                                       double xv) {
  double mean = p[size_t(L + c * L + l)];
  if (c == 1) mean += std::tanh(p[size_t(7 * L + l)]) * x[0];
  if (c == 2)
    mean += std::tanh(p[size_t(7 * L + L + l)]) * x[0] +
            std::tanh(p[size_t(7 * L + 2 * L + l)]) * x[1];
  double log_scale = std::max(p[size_t(4 * L + c * L + l)], -7.0);
  double inv_s = std::exp(-log_scale);
  const double h = 1.0 / 255.0;
  double centered = xv - mean;
  double plus_in = (centered + h) * inv_s;
  double minus_in = (centered - h) * inv_s;
  auto sig = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  auto sp = [](double t) {  // softplus without overflow
    return t > 30.0 ? t : std::log1p(std::exp(t));
  };
  if (xv > 0.999) return -sp(minus_in);   // top bin: survival function
  if (xv < -0.999) return -sp(-plus_in);  // bottom bin: CDF
  double cdf_delta = sig(plus_in) - sig(minus_in);
  if (cdf_delta > 1e-5) return std::log(std::max(cdf_delta, 1e-12));
  double mid_in = centered * inv_s;
  double log_pdf_mid = mid_in - log_scale - 2.0 * sp(mid_in);
  return log_pdf_mid - std::log(127.5);
}

// Component log weights: log softmax of the first L parameters.
inline std::vector<double> component_log_weights(const std::vector<double>& p,
                                                 int L) {
  std::vector<double> logw(size_t(L), 0.0);
  if (L > 1) {
    double mx = p[0];
    for (int l = 1; l < L; ++l) mx = std::max(mx, p[size_t(l)]);
    double se = 0.0;
    for (int l = 0; l < L; ++l) se += std::exp(p[size_t(l)] - mx);
    double log_norm = mx + std::log(se);
    for (int l = 0; l < L; ++l) logw[size_t(l)] = p[size_t(l)] - log_norm;
  }
  return logw;
}

// Joint log pmf of one RGB pixel: logsumexp over components of the weight
// plus the three channel conditionals. Matches the implementation's value.
inline double mixture_pixel_logpmf(const std::vector<double>& p, int L,
                                   const double x[3]) {
  std::vector<double> logw = component_log_weights(p, L);
  std::vector<double> comp(size_t(L), 0.0);
  double mx = -1e300;
  for (int l = 0; l < L; ++l) {
    double lp = logw[size_t(l)];
    for (int c = 0; c < 3; ++c)
      lp += component_channel_logpmf(p, L, l, c, x, x[c]);
    comp[size_t(l)] = lp;
    mx = std::max(mx, lp);
  }
  double se = 0.0;
  for (double v : comp) se += std::exp(v - mx);
  return mx + std::log(se);
}

// Mass of one component's channel conditional over the full 256-level grid.
// Joint normalization follows: each factor of the per-component chain sums
// to 1, so the weighted mixture does too.
inline double component_channel_mass(const std::vector<double>& p, int L,
                                     int l, int c, const double x[3]) {
  double mass = 0.0;
  for (int v = 0; v < 256; ++v)
    mass += std::exp(component_channel_logpmf(p, L, l, c, x, grid_value(v)));
  return mass;
}

}  // namespace refdist
