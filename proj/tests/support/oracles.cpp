/*
 * Copyright 2026 The cfhrm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cfhrm/ops.hpp"
#include "cfhrm/rng.hpp"

namespace cfhrm::oracle {

Vec to_double(std::span<const float> v) { return Vec(v.begin(), v.end()); }

Vec matmul_nt(const Vec& a, const Vec& b, std::int64_t m, std::int64_t k, std::int64_t n) {
  Vec out(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t t = 0; t < k; ++t) s += a[i * k + t] * b[j * k + t];
      out[i * n + j] = s;
    }
  }
  return out;
}

double log_sum_exp(const Vec& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s);
}

Vec softmax(const Vec& logits) {
  const double lse = log_sum_exp(logits);
  Vec p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

double cross_entropy(const Vec& logits, std::int64_t vocab, const std::vector<std::int32_t>& targets) {
  double total = 0.0;
  std::int64_t n = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    Vec row(logits.begin() + static_cast<std::ptrdiff_t>(r * vocab),
            logits.begin() + static_cast<std::ptrdiff_t>((r + 1) * vocab));
    total += log_sum_exp(row) - row[static_cast<std::size_t>(targets[r])];
    ++n;
  }
  return total / static_cast<double>(n);
}

Vec rms_norm(const Vec& x, std::int64_t d, const Vec& gamma, double eps) {
  Vec out(x.size());
  for (std::size_t r = 0; r < x.size() / static_cast<std::size_t>(d); ++r) {
    double ms = 0.0;
    for (std::int64_t i = 0; i < d; ++i) ms += x[r * d + i] * x[r * d + i];
    const double inv = 1.0 / std::sqrt(ms / static_cast<double>(d) + eps);
    for (std::int64_t i = 0; i < d; ++i) out[r * d + i] = x[r * d + i] * inv * gamma[i];
  }
  return out;
}

void rope_rotate(double* v, std::int64_t head_dim, std::int64_t position, double theta) {
  for (std::int64_t i = 0; i < head_dim / 2; ++i) {
    const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
    const double angle = static_cast<double>(position) * freq;
    const double c = std::cos(angle), s = std::sin(angle);
    const double a = v[2 * i], b = v[2 * i + 1];
    v[2 * i] = a * c - b * s;
    v[2 * i + 1] = a * s + b * c;
  }
}

Vec multi_head_attention(const Vec& x, std::int64_t B, std::int64_t T, std::int64_t d, const BlockWeights& w,
                         std::int64_t n_heads, double theta, bool causal) {
  const std::int64_t dh = d / n_heads;
  const Vec wq = to_double(w.wq.values()), wk = to_double(w.wk.values()), wv = to_double(w.wv.values()),
            wo = to_double(w.wo.values());
  Vec out(static_cast<std::size_t>(B * T * d), 0.0);
  for (std::int64_t b = 0; b < B; ++b) {
    Vec xb(x.begin() + b * T * d, x.begin() + (b + 1) * T * d);
    Vec q = matmul_nt(xb, wq, T, d, d), k = matmul_nt(xb, wk, T, d, d), v = matmul_nt(xb, wv, T, d, d);
    Vec ctx(static_cast<std::size_t>(T * d), 0.0);
    for (std::int64_t h = 0; h < n_heads; ++h) {
      for (std::int64_t t = 0; t < T; ++t) {
        rope_rotate(&q[t * d + h * dh], dh, t, theta);
        rope_rotate(&k[t * d + h * dh], dh, t, theta);
      }
      for (std::int64_t t = 0; t < T; ++t) {
        const std::int64_t limit = causal ? t + 1 : T;
        Vec scores(static_cast<std::size_t>(limit));
        for (std::int64_t s = 0; s < limit; ++s) {
          double dot = 0.0;
          for (std::int64_t i = 0; i < dh; ++i) dot += q[t * d + h * dh + i] * k[s * d + h * dh + i];
          scores[s] = dot / std::sqrt(static_cast<double>(dh));
        }
        const Vec p = softmax(scores);
        for (std::int64_t s = 0; s < limit; ++s) {
          for (std::int64_t i = 0; i < dh; ++i) ctx[t * d + h * dh + i] += p[s] * v[s * d + h * dh + i];
        }
      }
    }
    const Vec o = matmul_nt(ctx, wo, T, d, d);
    std::copy(o.begin(), o.end(), out.begin() + b * T * d);
  }
  return out;
}

namespace {

double weighted_sum(const Tensor& out, const Vec& r) {
  double s = 0.0;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) s += static_cast<double>(v[i]) * r[i];
  return s;
}

std::vector<GradCheck> run_checks(const std::string& name, const std::function<double()>& eval,
                                  const std::function<void()>& run_backward,
                                  const std::vector<std::pair<std::string, Tensor>>& inputs, double eps,
                                  std::int64_t max_coords, bool fourth_order, Rng& rng) {
  for (const auto& [n, t] : inputs) Tensor(t).zero_grad();
  run_backward();
  std::vector<GradCheck> results;
  for (const auto& [input_name, input] : inputs) {
    Tensor t = input;
    const auto numel = t.numel();
    std::vector<std::int64_t> coords(static_cast<std::size_t>(numel));
    std::iota(coords.begin(), coords.end(), 0);
    if (numel > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng.engine());
      coords.resize(static_cast<std::size_t>(max_coords));
    }
    auto analytic = t.grad();
    double diff = 0.0, ref = 0.0;
    for (auto c : coords) {
      float& x = t.values()[static_cast<std::size_t>(c)];
      const float saved = x;
      auto at = [&](double offset) {
        x = static_cast<float>(saved + offset);
        const double v = eval();
        x = saved;
        return v;
      };
      double numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      if (fourth_order) numeric = (4.0 * numeric - (at(2.0 * eps) - at(-2.0 * eps)) / (4.0 * eps)) / 3.0;
      const double a = analytic.empty() ? 0.0 : analytic[static_cast<std::size_t>(c)];
      diff += (a - numeric) * (a - numeric);
      ref += numeric * numeric;
    }
    GradCheck g;
    g.name = name + "/" + input_name;
    g.coords = static_cast<std::int64_t>(coords.size());
    const double denom = std::sqrt(ref);
    g.rel_error = denom > 1e-12 ? std::sqrt(diff) / denom : std::sqrt(diff);
    results.push_back(g);
  }
  return results;
}

}  // namespace

std::vector<GradCheck> check_gradients(const std::string& name, const std::function<Tensor()>& f,
                                       const std::vector<std::pair<std::string, Tensor>>& inputs, double eps,
                                       std::int64_t max_coords, std::uint64_t seed) {
  Rng rng(seed);
  Tensor probe;
  {
    NoGradGuard guard;
    probe = f();
  }
  Vec r(static_cast<std::size_t>(probe.numel()));
  for (auto& v : r) v = rng.normal(0.0f, 1.0f);
  Tensor weights(probe.shape(), std::vector<float>(r.begin(), r.end()));
  auto eval = [&] {
    NoGradGuard guard;
    return weighted_sum(f(), r);
  };
  auto run_backward = [&] { backward(sum(mul(f(), weights))); };
  return run_checks(name, eval, run_backward, inputs, eps, max_coords, false, rng);
}

std::vector<GradCheck> check_scalar_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                              const std::vector<std::pair<std::string, Tensor>>& inputs, double eps,
                                              std::int64_t max_coords, std::uint64_t seed, bool fourth_order) {
  Rng rng(seed);
  auto eval = [&] {
    NoGradGuard guard;
    return static_cast<double>(loss().item());
  };
  auto run_backward = [&] { backward(loss()); };
  return run_checks(name, eval, run_backward, inputs, eps, max_coords, fourth_order, rng);
}

double chi_square_uniform_p(const std::vector<std::int64_t>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double ks_uniform_p(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    dmax = std::max({dmax, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * dmax;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double welch_t_p(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  double va = 0.0, vb = 0.0;
  for (double x : a) va += (x - ma) * (x - ma);
  for (double x : b) vb += (x - mb) * (x - mb);
  va /= na - 1.0;
  vb /= nb - 1.0;
  const double se2 = va / na + vb / nb;
  if (se2 <= 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

}  // namespace cfhrm::oracle
