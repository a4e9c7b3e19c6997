#pragma once

// Closed-form region, pattern and boundary counts, initialization constants,
// and a Monte Carlo estimate of the gradient-moment constant.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "maxout/enumerate.hpp"
#include "maxout/error.hpp"
#include "maxout/net.hpp"
#include "maxout/rng.hpp"

namespace maxout {

using BigInt = boost::multiprecision::cpp_int;

enum class DistShape { Normal, Uniform };

namespace detail {

inline void require_nonneg(long long v, const char* what) {
  if (v < 0) throw Error(ErrorKind::Precondition, std::string(what) + " must be non-negative");
}

inline double to_real(const BigInt& v) {
  // Values past the double range saturate to infinity.
  if (v > BigInt(std::numeric_limits<double>::max())) return std::numeric_limits<double>::infinity();
  return v.convert_to<double>();
}

}  // namespace detail

/// Binomial coefficient; zero when k < 0 or k > n.
inline BigInt binom(long long n, long long k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (long long i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

inline BigInt ipow(BigInt base, long long e) {
  BigInt r = 1;
  while (e > 0) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

/// Real binomial; switches to log-Gamma when the arguments are large.
inline double binom_real(long long n, long long k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  if (n <= 1000) return detail::to_real(binom(n, k));
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

inline double factorial_real(long long n) { return std::exp(std::lgamma(n + 1.0)); }

// ---------------------------------------------------------------------------
// Pattern counts

/// Upper bound C(rK, 2r)·C(N, r)·K^(N−r) on the number of r-partial patterns.
inline BigInt trivial_pattern_bound(long long N, long long K, long long r) {
  detail::require_nonneg(N, "N");
  detail::require_nonneg(r, "r");
  if (K < 1) throw Error(ErrorKind::Precondition, "K must be at least 1");
  if (r > N) return 0;
  return binom(r * K, 2 * r) * binom(N, r) * ipow(K, N - r);
}

/// Exact number of r-partial patterns: a sum over how many units have each
/// active-set size, weighted by multinomials and subset counts.
inline BigInt exact_pattern_count(long long N, long long K, long long r) {
  detail::require_nonneg(N, "N");
  detail::require_nonneg(r, "r");
  if (K < 1) throw Error(ErrorKind::Precondition, "K must be at least 1");
  // counts[s] = number of units whose active set has s+1 elements.
  BigInt total = 0;
  std::vector<long long> counts(static_cast<std::size_t>(K), 0);
  auto rec = [&](auto&& self, long long s, long long units_left, long long excess_left, BigInt ways) -> void {
    if (s == 0) {
      // The remaining units are singletons.
      counts[0] = units_left;
      if (excess_left == 0) total += ways * ipow(K, units_left);
      return;
    }
    for (long long c = 0; c <= units_left && c * s <= excess_left; ++c) {
      counts[s] = c;
      self(self, s - 1, units_left - c, excess_left - c * s, ways * binom(units_left, c) * ipow(binom(K, s + 1), c));
    }
  };
  rec(rec, K - 1, N, r, BigInt(1));
  return total;
}

// ---------------------------------------------------------------------------
// Region counts

struct GenericLowerBound {
  BigInt regions;
  BigInt bounded_regions;
};

/// Σ_{j≤n0} C(n1, j) regions, of which at least C(n1−1, n0) are bounded.
inline GenericLowerBound generic_lower_bound(long long n0, long long n1) {
  detail::require_nonneg(n0, "n0");
  detail::require_nonneg(n1, "n1");
  GenericLowerBound out{0, binom(n1 - 1, n0)};
  for (long long j = 0; j <= n0; ++j) out.regions += binom(n1, j);
  return out;
}

/// Σ_{j≤n0} Σ_{|S|=j} Π_{i∈S}(k_i − 1), via elementary symmetric polynomials.
inline BigInt layer_positive_measure_count(long long n0, const std::vector<long long>& ks) {
  detail::require_nonneg(n0, "n0");
  std::vector<BigInt> e(static_cast<std::size_t>(n0) + 1, 0);
  e[0] = 1;
  for (long long k : ks) {
    if (k < 1) throw Error(ErrorKind::Precondition, "every k_i must be at least 1");
    for (long long j = n0; j >= 1; --j) e[j] += e[j - 1] * (k - 1);
  }
  BigInt total = 0;
  for (const auto& v : e) total += v;
  return total;
}

/// Π_l Π_i ((n_l/n0)(k_li − 1) + 1), each n_l/n0 an even integer.
inline BigInt deep_grid_count(long long n0, const std::vector<std::vector<long long>>& k_matrix,
                              const std::vector<long long>& widths) {
  if (n0 < 1) throw Error(ErrorKind::Precondition, "n0 must be positive");
  if (k_matrix.size() != widths.size())
    throw Error(ErrorKind::Precondition, "k_matrix needs one row per layer");
  BigInt total = 1;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] % n0 != 0 || (widths[l] / n0) % 2 != 0)
      throw Error(ErrorKind::Precondition, "layer " + std::to_string(l + 1) + ": width/n0 must be an even integer");
    if (static_cast<long long>(k_matrix[l].size()) != n0)
      throw Error(ErrorKind::Precondition, "layer " + std::to_string(l + 1) + ": needs n0 ranks");
    for (long long k : k_matrix[l]) {
      if (k < 1) throw Error(ErrorKind::Precondition, "ranks must be at least 1");
      total *= (widths[l] / n0) * (k - 1) + 1;
    }
  }
  return total;
}

/// Σ_{j≤n0} C(n1, j)(K−1)^j.
inline BigInt max_regions_shallow(long long n0, long long n1, long long K) {
  detail::require_nonneg(n0, "n0");
  detail::require_nonneg(n1, "n1");
  if (K < 1) throw Error(ErrorKind::Precondition, "K must be at least 1");
  BigInt total = 0;
  for (long long j = 0; j <= n0; ++j) total += binom(n1, j) * ipow(K - 1, j);
  return total;
}

struct RegionRange {
  BigInt lower;
  BigInt upper;
};

/// Lower Π_l ((n_l/n)(K−1)+1)^n and upper Π_l Σ_{j≤e_l} C(n_l, j)(K−1)^j with
/// e_l = min(n0, …, n_{l−1}); requires n ≤ n0 and each n_l/n even.
inline RegionRange max_regions_deep_bounds(long long n0, const std::vector<long long>& widths, long long K,
                                           long long n) {
  if (n < 1 || n > n0) throw Error(ErrorKind::Precondition, "n must satisfy 1 <= n <= n0");
  if (K < 1) throw Error(ErrorKind::Precondition, "K must be at least 1");
  RegionRange out{1, 1};
  long long e = n0;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const long long nl = widths[l];
    if (nl % n != 0 || (nl / n) % 2 != 0)
      throw Error(ErrorKind::Precondition, "layer " + std::to_string(l + 1) + ": width/n must be an even integer");
    out.lower *= ipow((nl / n) * (K - 1) + 1, n);
    BigInt s = 0;
    for (long long j = 0; j <= e; ++j) s += binom(nl, j) * ipow(K - 1, j);
    out.upper *= s;
    e = std::min(e, nl);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expected-value bounds

struct BoundParams {
  double c_grad = 1.0;
  double c_bias = 1.0;
  long long M = 2;
  long long n0 = 1;
  long long N = 1;
  long long K = 2;
  long long r = 0;

  double T() const { return 32.0 * c_grad * c_bias; }

  void validate() const {
    if (!(c_grad > 0) || !(c_bias > 0)) throw Error(ErrorKind::Precondition, "C_grad and C_bias must be positive");
    if (n0 < 1) throw Error(ErrorKind::Precondition, "n0 must be positive");
    if (N < 0 || M < 1 || K < 1) throw Error(ErrorKind::Precondition, "N >= 0, M >= 1 and K >= 1 are required");
    if (r < 0 || r > n0) throw Error(ErrorKind::Precondition, "r must satisfy 0 <= r <= n0");
  }
};

/// Expected r-partial regions per unit volume in a cube of side above δ0;
/// the caller asserts that condition through `delta_ok`.
inline double expected_regions_upper(const BoundParams& bp, bool delta_ok) {
  bp.validate();
  if (!delta_ok) throw Error(ErrorKind::Precondition, "cube side must exceed delta0 (set delta_ok)");
  if (bp.N <= bp.n0) return detail::to_real(trivial_pattern_bound(bp.N, bp.K, bp.r));
  const double tkn = bp.T() * static_cast<double>(bp.K) * static_cast<double>(bp.N);
  return std::pow(tkn, static_cast<double>(bp.n0)) * binom_real(bp.n0 * bp.K, 2 * bp.n0) /
         (std::pow(2.0 * bp.K, static_cast<double>(bp.r)) * factorial_real(bp.n0));
}

/// Expected (n0−r)-volume of the r-partial non-linear locus per unit volume.
inline double volume_upper(const BoundParams& bp, long long r) {
  BoundParams p = bp;
  p.r = r;
  p.validate();
  return std::pow(2.0 * bp.c_grad * bp.c_bias, static_cast<double>(r)) * binom_real(r * bp.K, 2 * r) *
         binom_real(bp.N, r);
}

/// Σ_{i=1}^{min(M−1,r)} C(M, i+1)·C(K(r−i), 2(r−i))·C(N, r−i)·K^(N−r+i).
inline BigInt db_pattern_bound(long long N, long long K, long long r, long long M) {
  detail::require_nonneg(N, "N");
  if (r < 1) throw Error(ErrorKind::Precondition, "r must be at least 1");
  if (K < 1 || M < 1) throw Error(ErrorKind::Precondition, "K and M must be at least 1");
  BigInt total = 0;
  for (long long i = 1; i <= std::min(M - 1, r); ++i) {
    if (N - r + i < 0) continue;
    total += binom(M, i + 1) * binom(K * (r - i), 2 * (r - i)) * binom(N, r - i) * ipow(K, N - r + i);
  }
  return total;
}

/// Expected decision-boundary pieces per unit volume.
inline double db_expected_upper(const BoundParams& bp) {
  bp.validate();
  const double pairs = binom_real(bp.M, 2);
  if (pairs == 0.0) return 0.0;
  if (bp.N <= bp.n0) return pairs * detail::to_real(ipow(bp.K, bp.N));
  const double m = static_cast<double>(bp.n0 - 1);
  return std::pow(16.0 * bp.c_grad * bp.c_bias, static_cast<double>(bp.n0)) *
         std::pow(2.0 * bp.K * bp.N, m) / factorial_real(bp.n0 - 1) * pairs *
         binom_real(bp.K * (bp.n0 - 1), 2 * (bp.n0 - 1));
}

/// Expected (n0−r)-volume of the decision boundary's r-skeleton per unit volume.
inline double db_volume_upper(const BoundParams& bp, long long r) {
  BoundParams p = bp;
  p.r = r;
  p.validate();
  if (r < 1) throw Error(ErrorKind::Precondition, "r must be at least 1");
  double sum = 0.0;
  for (long long i = 1; i <= std::min(bp.M - 1, r); ++i)
    sum += binom_real(bp.M, i + 1) * binom_real(bp.K * (r - i), 2 * (r - i)) * binom_real(bp.N, r - i);
  return std::pow(2.0 * bp.c_grad * bp.c_bias, static_cast<double>(r)) * sum;
}

/// Lower bound c / (2·C_grad·C_bias·M^(m+1)·m), m = min(M−1, n0), on the
/// expected distance to the decision boundary. Infinite when M = 1.
inline double db_distance_lower(const BoundParams& bp, double c) {
  bp.validate();
  if (!(c >= 0)) throw Error(ErrorKind::Precondition, "c must be non-negative");
  const long long m = std::min(bp.M - 1, bp.n0);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return c / (2.0 * bp.c_grad * bp.c_bias * std::pow(static_cast<double>(bp.M), static_cast<double>(m + 1)) *
              static_cast<double>(m));
}

/// Expected region count of a zero-bias network.
inline double zero_bias_upper(long long n0, long long N, long long K, double t_prime) {
  if (n0 < 1 || N < 0 || K < 1) throw Error(ErrorKind::Precondition, "n0 >= 1, N >= 0 and K >= 1 are required");
  if (!(t_prime > 0)) throw Error(ErrorKind::Precondition, "T' must be positive");
  if (N <= n0) return detail::to_real(ipow(K, N));
  return 2.0 * n0 * std::pow(t_prime * K * N, static_cast<double>(n0 - 1)) *
         binom_real(K * (n0 - 1), 2 * (n0 - 1)) / factorial_real(n0 - 1);
}

// ---------------------------------------------------------------------------
// Initialization constants

/// Weight std preserving the second moment of activations through maxout layers.
/// Normal: tabulated for K = 2…5. Uniform: closed form for every K.
inline double maxout_he_std(int K, int fan_in, DistShape shape) {
  if (fan_in < 1) throw Error(ErrorKind::Precondition, "fan_in must be positive");
  const double n = fan_in;
  if (shape == DistShape::Uniform) {
    if (K < 1) throw Error(ErrorKind::Config, "maxout-He: K must be at least 1");
    // The gain is measured relative to a unit-variance uniform response, hence the factor 12.
    const double k = K;
    const double c = 12.0 * (0.25 - k / ((k + 2.0) * (k + 1.0)));
    return std::sqrt(1.0 / (c * n));
  }
  constexpr double pi = std::numbers::pi;
  switch (K) {
    case 2: return std::sqrt(1.0 / n);
    case 3: return std::sqrt(2.0 * pi / ((std::sqrt(3.0) + 2.0 * pi) * n));
    case 4: return std::sqrt(pi / ((std::sqrt(3.0) + pi) * n));
    case 5: return std::sqrt(0.5555 / n);
    default:
      throw Error(ErrorKind::Config, "maxout-He normal is tabulated only for K in {2,3,4,5}; got K=" +
                                         std::to_string(K) + " (use the uniform shape)");
  }
}

inline double relu_he_std(int fan_in) {
  if (fan_in < 1) throw Error(ErrorKind::Precondition, "fan_in must be positive");
  return std::sqrt(2.0 / fan_in);
}

/// Density supremum of iid N(0, s²) biases.
inline double c_bias_normal(double s) {
  if (!(s > 0)) throw Error(ErrorKind::Precondition, "std must be positive");
  return 1.0 / (s * std::sqrt(2.0 * std::numbers::pi));
}

// ---------------------------------------------------------------------------
// Gradient-moment constant

struct CgradEstimate {
  double value = 0.0;              // the full product
  double input_factor = 0.0;       // (c/n0)^(1/2)
  double chi_factor = 0.0;         // (M (M+t)^(t/2−1))^(1/t)
  std::vector<double> layer_moments;  // E[((c/n_l) Σ_i max_k χ²_{n_{l−1}})^(t/2)] per hidden layer
  std::vector<double> layer_factors;  // layer_moments^(1/t)
};

/// Monte Carlo evaluation of the moment bound; each layer's expectation uses
/// `samples` draws from its own seeded stream.
inline CgradEstimate estimate_cgrad_bound(const Architecture& arch, double c, double t, std::size_t samples,
                                          std::uint64_t seed = 0) {
  arch.validate();
  if (!(c > 0) || !(t > 0)) throw Error(ErrorKind::Precondition, "c and t must be positive");
  if (samples < 1) throw Error(ErrorKind::Precondition, "samples must be positive");
  CgradEstimate est;
  const double M = arch.out_dim;
  est.input_factor = std::sqrt(c / arch.n0);
  est.chi_factor = std::pow(M * std::pow(M + t, t / 2.0 - 1.0), 1.0 / t);
  est.value = est.input_factor * est.chi_factor;
  for (int l = 0; l < arch.depth(); ++l) {
    const int nl = arch.widths[l];
    Engine eng = make_stream(seed, {0x63677261ULL, static_cast<std::uint64_t>(l)});
    std::chi_squared_distribution<double> chi(arch.fan_in(l));
    double acc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      double sum = 0.0;
      for (int i = 0; i < nl; ++i) {
        double m = chi(eng);
        for (int k = 1; k < arch.rank; ++k) m = std::max(m, chi(eng));
        sum += m;
      }
      acc += std::pow(c / nl * sum, t / 2.0);
    }
    const double moment = acc / static_cast<double>(samples);
    est.layer_moments.push_back(moment);
    est.layer_factors.push_back(std::pow(moment, 1.0 / t));
    est.value *= est.layer_factors.back();
  }
  return est;
}

// ---------------------------------------------------------------------------
// Single-unit growth in K

struct ScanRow {
  int K = 0;
  double mean = 0.0;
  double std = 0.0;  // sample std (n − 1)
  std::vector<std::size_t> counts;
};

/// Mean exact region count of one rank-K unit with iid standard-normal weights
/// and biases, for each K in `ks`.
inline std::vector<ScanRow> single_unit_expected_scan(int n0, const std::vector<int>& ks, int trials,
                                                      std::uint64_t seed, const Window& window,
                                                      const EnumOptions& opt = {}) {
  if (trials < 1) throw Error(ErrorKind::Precondition, "trials must be positive");
  std::vector<ScanRow> out;
  for (int K : ks) {
    Architecture arch{n0, {1}, K, 1};
    arch.validate();
    ScanRow row;
    row.K = K;
    for (int t = 0; t < trials; ++t) {
      Parameters p = Parameters::zeros(arch);
      for (int k = 0; k < K; ++k) {
        Engine eng = make_stream(seed, {0x7363616eULL, static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(t),
                                        static_cast<std::uint64_t>(k)});
        std::normal_distribution<double> nd(0.0, 1.0);
        for (int j = 0; j < n0; ++j) p.hidden[0].weights(k, j) = nd(eng);
        p.hidden[0].biases(k) = nd(eng);
      }
      p.out_weights(0, 0) = 1.0;
      row.counts.push_back(count_regions_exact(Network(arch, std::move(p)), window, opt).report.regions);
    }
    double sum = 0.0;
    for (auto c : row.counts) sum += static_cast<double>(c);
    row.mean = sum / trials;
    double ss = 0.0;
    for (auto c : row.counts) ss += (static_cast<double>(c) - row.mean) * (static_cast<double>(c) - row.mean);
    row.std = trials > 1 ? std::sqrt(ss / (trials - 1)) : 0.0;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace maxout
