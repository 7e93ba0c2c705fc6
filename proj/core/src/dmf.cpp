#include "e2edet/dmf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "e2edet/error.hpp"
#include "e2edet/rng.hpp"

namespace e2edet {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

}  // namespace

DmfWeights DmfWeights::zeros(int channels, int groups, FilterParams filter) {
  DmfWeights w;
  w.channels = channels;
  w.groups = groups;
  w.filter = filter;
  w.conv1_weight.assign(sz(channels) * sz(channels) * 9, 0.0);
  w.conv1_bias.assign(sz(channels), 0.0);
  w.gn_gamma.assign(sz(channels), 0.0);
  w.gn_beta.assign(sz(channels), 0.0);
  w.conv2_weight.assign(sz(channels) * 9, 0.0);
  w.conv2_bias.assign(1, 0.0);
  return w;
}

DmfWeights DmfWeights::random(int channels, int groups, FilterParams filter,
                              std::uint64_t seed) {
  DmfWeights w = zeros(channels, groups, filter);
  Rng rng(seed, 0xD3F);
  const double bound = 1.0 / std::sqrt(9.0 * channels);
  for (double& v : w.conv1_weight) v = rng.uniform(-bound, bound);
  for (double& v : w.conv1_bias) v = rng.uniform(-bound, bound);
  for (double& v : w.gn_gamma) v = rng.uniform(0.5, 1.5);
  for (double& v : w.gn_beta) v = rng.uniform(-0.5, 0.5);
  for (double& v : w.conv2_weight) v = rng.uniform(-bound, bound);
  for (double& v : w.conv2_bias) v = rng.uniform(-bound, bound);
  return w;
}

void DmfWeights::validate() const {
  filter.validate();
  if (channels <= 0) throw ValidationError("dmf weights: channel count must be positive");
  if (groups <= 0 || channels % groups != 0) {
    throw ValidationError("dmf weights: channels (" + std::to_string(channels) +
                          ") must be divisible by groups (" + std::to_string(groups) + ")");
  }
  const std::size_t c = sz(channels);
  if (conv1_weight.size() != c * c * 9 || conv1_bias.size() != c || gn_gamma.size() != c ||
      gn_beta.size() != c || conv2_weight.size() != c * 9 || conv2_bias.size() != 1) {
    throw ValidationError("dmf weights: parameter blocks do not match channel count");
  }
}

std::vector<std::vector<double>*> DmfWeights::blocks() {
  return {&conv1_weight, &conv1_bias, &gn_gamma, &gn_beta, &conv2_weight, &conv2_bias};
}

std::vector<const std::vector<double>*> DmfWeights::blocks() const {
  return {&conv1_weight, &conv1_bias, &gn_gamma, &gn_beta, &conv2_weight, &conv2_bias};
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Grid conv3x3(const Grid& input, const std::vector<double>& weight,
             const std::vector<double>& bias, int out_channels) {
  const int cin = input.channels;
  if (weight.size() != sz(out_channels) * sz(cin) * 9 || bias.size() != sz(out_channels)) {
    throw ValidationError("conv3x3: weight shape does not match input channels");
  }
  Grid out(out_channels, input.height, input.width);
  for (int o = 0; o < out_channels; ++o) {
    for (int y = 0; y < input.height; ++y) {
      for (int x = 0; x < input.width; ++x) {
        double acc = bias[sz(o)];
        for (int i = 0; i < cin; ++i) {
          const double* w = &weight[(sz(o) * sz(cin) + sz(i)) * 9];
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= input.height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= input.width) continue;
              acc += w[ky * 3 + kx] * input.at(i, yy, xx);
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
  return out;
}

namespace {

// Accumulates d(input), d(weight), d(bias) for conv3x3.
void conv3x3_backward(const Grid& input, const std::vector<double>& weight, int out_channels,
                      const Grid& upstream, Grid& grad_input, std::vector<double>& grad_weight,
                      std::vector<double>& grad_bias) {
  const int cin = input.channels;
  for (int o = 0; o < out_channels; ++o) {
    for (int y = 0; y < input.height; ++y) {
      for (int x = 0; x < input.width; ++x) {
        const double g = upstream.at(o, y, x);
        grad_bias[sz(o)] += g;
        for (int i = 0; i < cin; ++i) {
          const std::size_t base = (sz(o) * sz(cin) + sz(i)) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= input.height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= input.width) continue;
              const std::size_t k = base + sz(ky * 3 + kx);
              grad_weight[k] += g * input.at(i, yy, xx);
              grad_input.at(i, yy, xx) += g * weight[k];
            }
          }
        }
      }
    }
  }
}

struct GroupStats {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

GroupStats group_stats(const Grid& input, int groups) {
  const int per = input.channels / groups;
  const std::size_t plane = sz(input.height) * sz(input.width);
  GroupStats st;
  st.mean.resize(sz(groups));
  st.inv_std.resize(sz(groups));
  for (int g = 0; g < groups; ++g) {
    const double* begin = &input.values[sz(g * per) * plane];
    const std::size_t n = sz(per) * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += begin[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (begin[i] - mean) * (begin[i] - mean);
    var /= static_cast<double>(n);
    st.mean[sz(g)] = mean;
    st.inv_std[sz(g)] = 1.0 / std::sqrt(var + kGroupNormEps);
  }
  return st;
}

}  // namespace

Grid group_norm(const Grid& input, int groups, const std::vector<double>& gamma,
                const std::vector<double>& beta) {
  if (groups <= 0 || input.channels % groups != 0) {
    throw ValidationError("group_norm: channels must be divisible by groups");
  }
  const GroupStats st = group_stats(input, groups);
  const int per = input.channels / groups;
  const std::size_t plane = sz(input.height) * sz(input.width);
  Grid out(input.channels, input.height, input.width);
  for (int c = 0; c < input.channels; ++c) {
    const int g = c / per;
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t o = sz(c) * plane + i;
      out.values[o] =
          (input.values[o] - st.mean[sz(g)]) * st.inv_std[sz(g)] * gamma[sz(c)] + beta[sz(c)];
    }
  }
  return out;
}

namespace {

void check_inputs(const FeaturePyramid& features, const FeaturePyramid& logits,
                  const DmfWeights& weights) {
  weights.validate();
  if (features.levels.empty()) throw ValidationError("dmf: empty feature pyramid");
  if (features.levels.size() != logits.levels.size()) {
    throw ValidationError("dmf: features and logits have different level counts");
  }
  for (std::size_t l = 0; l < features.levels.size(); ++l) {
    const Grid& f = features.levels[l];
    const Grid& z = logits.levels[l];
    if (f.channels != weights.channels) {
      throw ValidationError("dmf: level " + std::to_string(l) + " has " +
                            std::to_string(f.channels) + " channels, weights expect " +
                            std::to_string(weights.channels));
    }
    if (f.height != z.height || f.width != z.width || z.channels <= 0) {
      throw ValidationError("dmf: logits level " + std::to_string(l) +
                            " does not match feature spatial size");
    }
  }
}

struct LevelCache {
  Grid conv1;  // pre-norm
  Grid z;      // x + m
  Grid refine;  // sigmoid(conv2(z)), single channel
};

struct ForwardCache {
  FeaturePyramid normed;
  MaxFilterResult filtered;
  std::vector<LevelCache> levels;
  FeaturePyramid output;
};

ForwardCache run_forward(const FeaturePyramid& features, const FeaturePyramid& logits,
                         const DmfWeights& w) {
  check_inputs(features, logits, w);
  ForwardCache cache;
  const std::size_t L = features.levels.size();
  cache.normed.strides = features.strides;
  cache.levels.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    cache.levels[l].conv1 = conv3x3(features.levels[l], w.conv1_weight, w.conv1_bias, w.channels);
    cache.normed.levels.push_back(
        group_norm(cache.levels[l].conv1, w.groups, w.gn_gamma, w.gn_beta));
  }
  cache.filtered = max_filter_3d_routed(cache.normed, w.filter);
  cache.output.strides = logits.strides;
  for (std::size_t l = 0; l < L; ++l) {
    LevelCache& lc = cache.levels[l];
    lc.z = features.levels[l];
    const auto& m = cache.filtered.output.levels[l].values;
    for (std::size_t i = 0; i < m.size(); ++i) lc.z.values[i] += m[i];
    lc.refine = conv3x3(lc.z, w.conv2_weight, w.conv2_bias, 1);
    for (double& v : lc.refine.values) v = sigmoid(v);

    const Grid& zl = logits.levels[l];
    Grid out(zl.channels, zl.height, zl.width);
    for (int k = 0; k < zl.channels; ++k) {
      for (int y = 0; y < zl.height; ++y) {
        for (int x = 0; x < zl.width; ++x) {
          out.at(k, y, x) = sigmoid(zl.at(k, y, x)) * lc.refine.at(0, y, x);
        }
      }
    }
    cache.output.levels.push_back(std::move(out));
  }
  return cache;
}

}  // namespace

FeaturePyramid dmf_forward(const FeaturePyramid& features, const FeaturePyramid& logits,
                           const DmfWeights& weights) {
  return run_forward(features, logits, weights).output;
}

DmfTrace dmf_forward_traced(const FeaturePyramid& features, const FeaturePyramid& logits,
                            const DmfWeights& weights) {
  ForwardCache cache = run_forward(features, logits, weights);
  return {std::move(cache.output), std::move(cache.filtered.winners)};
}

DmfGradients dmf_backward(const FeaturePyramid& features, const FeaturePyramid& logits,
                          const DmfWeights& w, const FeaturePyramid& upstream) {
  const ForwardCache cache = run_forward(features, logits, w);
  if (!upstream.same_shape(cache.output)) {
    throw ValidationError("dmf_backward: upstream gradient shape mismatch");
  }
  const std::size_t L = features.levels.size();
  DmfGradients grads{features.zeros_like(), logits.zeros_like(),
                     DmfWeights::zeros(w.channels, w.groups, w.filter)};
  FeaturePyramid grad_m = cache.normed.zeros_like();

  for (std::size_t l = 0; l < L; ++l) {
    const LevelCache& lc = cache.levels[l];
    const Grid& zl = logits.levels[l];
    const Grid& up = upstream.levels[l];
    Grid grad_pre2(1, zl.height, zl.width);
    for (int y = 0; y < zl.height; ++y) {
      for (int x = 0; x < zl.width; ++x) {
        const double r = lc.refine.at(0, y, x);
        double grad_r = 0.0;
        for (int k = 0; k < zl.channels; ++k) {
          const double s = sigmoid(zl.at(k, y, x));
          const double g = up.at(k, y, x);
          grad_r += g * s;
          grads.logits.levels[l].at(k, y, x) = g * r * s * (1.0 - s);
        }
        grad_pre2.at(0, y, x) = grad_r * r * (1.0 - r);
      }
    }
    Grid grad_z(w.channels, zl.height, zl.width);
    conv3x3_backward(lc.z, w.conv2_weight, 1, grad_pre2, grad_z, grads.weights.conv2_weight,
                     grads.weights.conv2_bias);
    auto& gx = grads.features.levels[l].values;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += grad_z.values[i];
    grad_m.levels[l] = std::move(grad_z);
  }

  const FeaturePyramid grad_h = max_filter_3d_backward(cache.normed, w.filter, grad_m);

  const int per = w.channels / w.groups;
  for (std::size_t l = 0; l < L; ++l) {
    const Grid& a = cache.levels[l].conv1;
    const Grid& gh = grad_h.levels[l];
    const GroupStats st = group_stats(a, w.groups);
    const std::size_t plane = sz(a.height) * sz(a.width);
    Grid grad_a(a.channels, a.height, a.width);
    for (int g = 0; g < w.groups; ++g) {
      const std::size_t n = sz(per) * plane;
      const double mean = st.mean[sz(g)];
      const double inv = st.inv_std[sz(g)];
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      for (int c = g * per; c < (g + 1) * per; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t o = sz(c) * plane + i;
          const double xhat = (a.values[o] - mean) * inv;
          const double dy = gh.values[o];
          grads.weights.gn_gamma[sz(c)] += dy * xhat;
          grads.weights.gn_beta[sz(c)] += dy;
          const double dxhat = dy * w.gn_gamma[sz(c)];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
      }
      const double mean_dxhat = sum_dxhat / static_cast<double>(n);
      const double mean_dxhat_xhat = sum_dxhat_xhat / static_cast<double>(n);
      for (int c = g * per; c < (g + 1) * per; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t o = sz(c) * plane + i;
          const double xhat = (a.values[o] - mean) * inv;
          const double dxhat = gh.values[o] * w.gn_gamma[sz(c)];
          grad_a.values[o] = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
    }
    conv3x3_backward(features.levels[l], w.conv1_weight, w.channels, grad_a,
                     grads.features.levels[l], grads.weights.conv1_weight,
                     grads.weights.conv1_bias);
  }
  return grads;
}

namespace {

FeaturePyramid random_pyramid(Rng& rng, int channels, int height, int width, int levels,
                              double lo, double hi) {
  FeaturePyramid p;
  int h = height;
  int w = width;
  double stride = 8.0;
  for (int l = 0; l < levels; ++l) {
    Grid g(channels, h, w);
    for (double& v : g.values) v = rng.uniform(lo, hi);
    p.levels.push_back(std::move(g));
    p.strides.push_back(stride);
    h = (h + 1) / 2;
    w = (w + 1) / 2;
    stride *= 2.0;
  }
  return p;
}

double weighted_sum(const FeaturePyramid& out, const FeaturePyramid& upstream) {
  double acc = 0.0;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    const auto& a = out.levels[l].values;
    const auto& b = upstream.levels[l].values;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  }
  return acc;
}

}  // namespace

GradcheckReport gradcheck_dmf(const GradcheckOptions& opt) {
  if (opt.levels <= 0 || opt.height <= 0 || opt.width <= 0 || opt.classes <= 0) {
    throw ValidationError("gradcheck: sizes must be positive");
  }
  if (!(opt.step > 0.0)) throw ValidationError("gradcheck: step must be positive");
  Rng rng(opt.seed, 0x6C);
  FeaturePyramid features =
      random_pyramid(rng, opt.channels, opt.height, opt.width, opt.levels, -1.0, 1.0);
  FeaturePyramid logits =
      random_pyramid(rng, opt.classes, opt.height, opt.width, opt.levels, -2.0, 2.0);
  FeaturePyramid upstream =
      random_pyramid(rng, opt.classes, opt.height, opt.width, opt.levels, -1.0, 1.0);
  DmfWeights weights = DmfWeights::random(opt.channels, opt.groups, opt.filter, opt.seed);
  if (opt.tie_adversarial) {
    // A zero first conv makes every normalised map flat, so each tube holds exact ties.
    std::fill(weights.conv1_weight.begin(), weights.conv1_weight.end(), 0.0);
    std::fill(weights.conv1_bias.begin(), weights.conv1_bias.end(), 0.0);
  }

  const DmfGradients analytic = dmf_backward(features, logits, weights, upstream);
  const auto base_winners = dmf_forward_traced(features, logits, weights).winners;

  GradcheckReport report;
  auto check_block = [&](const std::string& name, std::vector<double>& values,
                         const std::vector<double>& grad) {
    GradcheckBlock block{name};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + opt.step;
      const DmfTrace plus = dmf_forward_traced(features, logits, weights);
      values[i] = saved - opt.step;
      const DmfTrace minus = dmf_forward_traced(features, logits, weights);
      values[i] = saved;
      if (plus.winners != base_winners || minus.winners != base_winners) {
        ++block.skipped;
        continue;
      }
      const double numeric =
          (weighted_sum(plus.output, upstream) - weighted_sum(minus.output, upstream)) /
          (2.0 * opt.step);
      const double a = grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.denominator_floor});
      block.max_rel_error = std::max(block.max_rel_error, std::abs(a - numeric) / denom);
      ++block.checked;
    }
    report.checked += block.checked;
    report.skipped += block.skipped;
    report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
    report.blocks.push_back(block);
  };

  for (std::size_t l = 0; l < features.levels.size(); ++l) {
    check_block("features[" + std::to_string(l) + "]", features.levels[l].values,
                analytic.features.levels[l].values);
  }
  for (std::size_t l = 0; l < logits.levels.size(); ++l) {
    check_block("logits[" + std::to_string(l) + "]", logits.levels[l].values,
                analytic.logits.levels[l].values);
  }
  static const char* const kNames[] = {"conv1.weight", "conv1.bias", "gn.gamma",
                                       "gn.beta",      "conv2.weight", "conv2.bias"};
  auto params = weights.blocks();
  const auto grads = analytic.weights.blocks();
  for (std::size_t b = 0; b < params.size(); ++b) check_block(kNames[b], *params[b], *grads[b]);

  report.tie_flagged = report.skipped > 0;
  report.passed = report.checked > 0 && report.max_rel_error < opt.tolerance;
  return report;
}

std::string format_report(const GradcheckReport& report) {
  std::ostringstream os;
  char line[160];
  for (const GradcheckBlock& b : report.blocks) {
    std::snprintf(line, sizeof line, "%-14s checked=%-5zu skipped=%-5zu max_rel_err=%.3e\n",
                  b.name.c_str(), b.checked, b.skipped, b.max_rel_error);
    os << line;
  }
  std::snprintf(line, sizeof line, "total          checked=%-5zu skipped=%-5zu max_rel_err=%.3e\n",
                report.checked, report.skipped, report.max_rel_error);
  os << line;
  if (report.tie_flagged) {
    os << "flagged: " << report.skipped
       << " coordinates skipped: a +/-step perturbation changes the max-filter routing (tie or near-tie)\n";
  }
  os << (report.passed ? "PASS" : "FAIL") << '\n';
  return os.str();
}

}  // namespace e2edet
