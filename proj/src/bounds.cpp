#include "clucert/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace clucert {
namespace {

// Minimal unsigned bignum: just enough for telescoping binomial products and
// one correctly rounded division at the end.
class BigUint {
 public:
  BigUint() = default;
  explicit BigUint(uint64_t v) {
    if (v) words_.push_back(v);
  }

  bool is_zero() const { return words_.empty(); }

  void mul_u64(uint64_t m) {
    if (m == 0) {
      words_.clear();
      return;
    }
    unsigned __int128 carry = 0;
    for (auto& w : words_) {
      unsigned __int128 prod = static_cast<unsigned __int128>(w) * m + carry;
      w = static_cast<uint64_t>(prod);
      carry = prod >> 64;
    }
    if (carry) words_.push_back(static_cast<uint64_t>(carry));
  }

  void shl1() {
    uint64_t carry = 0;
    for (auto& w : words_) {
      const uint64_t next_carry = w >> 63;
      w = (w << 1) | carry;
      carry = next_carry;
    }
    if (carry) words_.push_back(carry);
  }

  void shl(size_t bits) {
    if (is_zero() || bits == 0) return;
    const size_t word_shift = bits / 64;
    const size_t bit_shift = bits % 64;
    const size_t old_size = words_.size();
    words_.resize(old_size + word_shift + (bit_shift ? 1 : 0), 0);
    for (size_t i = old_size; i-- > 0;) {
      const uint64_t w = words_[i];
      if (bit_shift) {
        words_[i + word_shift + 1] |= w >> (64 - bit_shift);
        words_[i + word_shift] = w << bit_shift;
      } else {
        words_[i + word_shift] = w;
      }
    }
    for (size_t i = 0; i < word_shift; ++i) words_[i] = 0;
    trim();
  }

  size_t bit_length() const {
    if (words_.empty()) return 0;
    return (words_.size() - 1) * 64 +
           static_cast<size_t>(64 - std::countl_zero(words_.back()));
  }

  static int cmp(const BigUint& a, const BigUint& b) {
    if (a.words_.size() != b.words_.size())
      return a.words_.size() < b.words_.size() ? -1 : 1;
    for (size_t i = a.words_.size(); i-- > 0;) {
      if (a.words_[i] != b.words_[i]) return a.words_[i] < b.words_[i] ? -1 : 1;
    }
    return 0;
  }

  // this -= b, requires *this >= b.
  void sub(const BigUint& b) {
    uint64_t borrow = 0;
    for (size_t i = 0; i < words_.size(); ++i) {
      const uint64_t rhs = i < b.words_.size() ? b.words_[i] : 0;
      const uint64_t before = words_[i];
      const uint64_t mid = before - rhs;
      const uint64_t after = mid - borrow;
      borrow = (before < rhs) || (mid < borrow) ? 1 : 0;
      words_[i] = after;
    }
    trim();
  }

 private:
  void trim() {
    while (!words_.empty() && words_.back() == 0) words_.pop_back();
  }
  std::vector<uint64_t> words_;  // little-endian
};

// Correctly rounded double of num/den for 0 <= num <= den, den > 0. The only
// rounding in the whole delta computation happens here.
double big_ratio_to_double(const BigUint& num, const BigUint& den) {
  if (num.is_zero()) return 0.0;
  const int c = BigUint::cmp(num, den);
  if (c == 0) return 1.0;
  if (c > 0) throw std::logic_error("big_ratio_to_double: num > den");

  BigUint r = num;
  long sigma = 0;
  const long coarse =
      static_cast<long>(den.bit_length()) - static_cast<long>(r.bit_length());
  if (coarse > 0) {
    r.shl(static_cast<size_t>(coarse));
    sigma += coarse;
  }
  while (BigUint::cmp(r, den) < 0) {
    r.shl1();
    ++sigma;
  }
  // den <= r < 2*den: extract 54 quotient bits of r/den in [1,2).
  uint64_t mant = 0;
  for (int i = 0; i < 54; ++i) {
    mant <<= 1;
    if (BigUint::cmp(r, den) >= 0) {
      mant |= 1;
      r.sub(den);
    }
    r.shl1();
  }
  const bool sticky = !r.is_zero();
  const uint64_t guard = mant & 1;
  mant >>= 1;
  if (guard && (sticky || (mant & 1))) ++mant;  // round half to even
  return std::ldexp(static_cast<double>(mant), static_cast<int>(-sigma - 52));
}

void validate_shift_params(const ShiftParams& p) {
  if (p.n < 1) throw std::invalid_argument("delta_shift: n must be positive");
  if (p.s < 0 || p.s > p.n)
    throw std::invalid_argument("delta_shift: s must satisfy 0 <= s <= n");
  if (p.d < 0) throw std::invalid_argument("delta_shift: d must be non-negative");
}

// log C(n,k) + k log p + (n-k) log(1-p), grouped so that pmf(k) and pmf(n-k)
// are bitwise equal when p = 0.5.
double log_pmf(long n, long k, double log_p, double log_q) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         (std::lgamma(static_cast<double>(k) + 1.0) +
          std::lgamma(static_cast<double>(n - k) + 1.0)) +
         (static_cast<double>(k) * log_p + static_cast<double>(n - k) * log_q);
}

// P[X >= k] for X ~ Binomial(n, p).
double binom_upper_tail(long n, long k, double p) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double lp = std::log(p);
  const double lq = std::log(1.0 - p);
  double term = std::exp(log_pmf(n, k, lp, lq));
  double acc = term;
  const double ratio_base = p / (1.0 - p);
  for (long i = k; i < n; ++i) {
    term *= static_cast<double>(n - i) / static_cast<double>(i + 1) * ratio_base;
    acc += term;
    if (term < acc * 1e-18 && static_cast<double>(i) > p * static_cast<double>(n))
      break;
  }
  return std::min(acc, 1.0);
}

// P[X <= k] for X ~ Binomial(n, p).
double binom_lower_tail(long n, long k, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  const double lp = std::log(p);
  const double lq = std::log(1.0 - p);
  double term = std::exp(log_pmf(n, k, lp, lq));
  double acc = term;
  const double ratio_base = (1.0 - p) / p;
  for (long i = k; i > 0; --i) {
    term *= static_cast<double>(i) / static_cast<double>(n - i + 1) * ratio_base;
    acc += term;
    if (term < acc * 1e-18 && static_cast<double>(i) < p * static_cast<double>(n))
      break;
  }
  return std::min(acc, 1.0);
}

}  // namespace

double delta_shift(const ShiftParams& p) {
  validate_shift_params(p);
  if (p.d == 0) return 0.0;
  if (p.d > p.n - p.s) return 1.0;
  BigUint num(1), den(1);
  for (long i = 0; i < p.d; ++i) {
    num.mul_u64(static_cast<uint64_t>(p.n - p.s - i));
    den.mul_u64(static_cast<uint64_t>(p.n - i));
  }
  BigUint diff = den;
  diff.sub(num);
  return big_ratio_to_double(diff, den);
}

double delta_shift_asymptotic(const ShiftParams& p) {
  validate_shift_params(p);
  const double denom = static_cast<double>(p.n) - static_cast<double>(p.s) / 2.0;
  if (denom <= 0.0)
    throw std::invalid_argument("delta_shift_asymptotic: n - s/2 must be positive");
  const double v =
      static_cast<double>(p.s) * static_cast<double>(p.d) / denom;
  return std::min(1.0, v);
}

ConfidenceBound clopper_pearson(long successes, long trials, double alpha) {
  if (trials < 1) throw std::invalid_argument("clopper_pearson: trials must be >= 1");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("clopper_pearson: successes out of range");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("clopper_pearson: alpha must be in (0,1)");

  ConfidenceBound b;
  b.successes = successes;
  b.trials = trials;
  b.alpha = alpha;
  const double half = alpha / 2.0;

  if (successes == 0) {
    b.lower = 0.0;
  } else {
    // upper tail P[X >= k] is increasing in p; root of tail = alpha/2
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (binom_upper_tail(trials, successes, mid) < half)
        lo = mid;
      else
        hi = mid;
    }
    b.lower = 0.5 * (lo + hi);
  }

  if (successes == trials) {
    b.upper = 1.0;
  } else {
    // lower tail P[X <= k] is decreasing in p
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (binom_lower_tail(trials, successes, mid) > half)
        lo = mid;
      else
        hi = mid;
    }
    b.upper = 0.5 * (lo + hi);
  }
  return b;
}

double binom_p_value(long count_a, long total, double p0) {
  if (total < 1) throw std::invalid_argument("binom_p_value: total must be >= 1");
  if (count_a < 0 || count_a > total)
    throw std::invalid_argument("binom_p_value: count out of range");
  if (!(p0 >= 0.0 && p0 <= 1.0))
    throw std::invalid_argument("binom_p_value: p0 must be in [0,1]");

  if (p0 == 0.0) return count_a == 0 ? 1.0 : 0.0;
  if (p0 == 1.0) return count_a == total ? 1.0 : 0.0;

  const double lp = std::log(p0);
  const double lq = std::log(1.0 - p0);
  const double obs = log_pmf(total, count_a, lp, lq);
  // relative slack absorbs rounding in the equal-probability comparisons
  const double threshold = obs + 1e-7;
  double acc = 0.0;
  for (long i = 0; i <= total; ++i) {
    const double lpi = log_pmf(total, i, lp, lq);
    if (lpi <= threshold) acc += std::exp(lpi);
  }
  return std::min(acc, 1.0);
}

RadiusOutcome certified_radius(const std::map<std::string, ConfidenceBound>& bounds,
                               const std::string& top_label, double gamma, long n,
                               long s) {
  if (bounds.empty()) throw std::invalid_argument("certified_radius: empty bounds map");
  const auto top_it = bounds.find(top_label);
  if (top_it == bounds.end())
    throw std::invalid_argument("certified_radius: top label missing from bounds");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("certified_radius: gamma must be in [0,1]");
  if (n < 1 || s < 0 || s > n)
    throw std::invalid_argument("certified_radius: invalid n/s");

  bool have_competitor = false;
  double max_upper = 0.0;
  for (const auto& [label, cb] : bounds) {
    if (label == top_label) continue;
    max_upper = have_competitor ? std::max(max_upper, cb.upper) : cb.upper;
    have_competitor = true;
  }
  if (!have_competitor)
    throw std::invalid_argument("certified_radius: no competitor bounds");

  RadiusOutcome out;
  out.gap = top_it->second.lower - max_upper;
  out.gamma = gamma;
  if (!(out.gap > 0.0)) {
    out.kind = RadiusOutcome::Kind::Abstain;
    return out;
  }

  const auto holds = [&](long t) {
    return out.gap > 2.0 * gamma * delta_shift({n, s, t});
  };
  out.kind = RadiusOutcome::Kind::Certified;
  if (holds(n)) {
    out.radius = n;
    out.capped_at_length = true;
    return out;
  }
  long lo = 0, hi = n;  // holds(lo) true, holds(hi) false
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (holds(mid))
      lo = mid;
    else
      hi = mid;
  }
  out.radius = lo;
  return out;
}

long predict_improved_radius(long r_star, double slack_delta, double epsilon,
                             double gamma, long n, long s) {
  if (r_star < 0) throw std::invalid_argument("predict_improved_radius: r* < 0");
  if (s < 1) throw std::invalid_argument("predict_improved_radius: s must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("predict_improved_radius: gamma must be > 0");
  if (epsilon < 0.0 || slack_delta < 0.0)
    throw std::invalid_argument("predict_improved_radius: negative shift");
  const double inc = (static_cast<double>(n) - static_cast<double>(s) / 2.0) *
                     (slack_delta + 2.0 * epsilon) /
                     (2.0 * gamma * static_cast<double>(s));
  return r_star + static_cast<long>(std::floor(inc));
}

double brute_force_delta(const ShiftParams& p, const std::vector<int>& differing_positions) {
  if (p.n < 1 || p.n > 20)
    throw std::invalid_argument("brute_force_delta: n must be in [1,20]");
  if (p.s < 0 || p.s > p.n)
    throw std::invalid_argument("brute_force_delta: s out of range");
  uint32_t diff_mask = 0;
  for (int pos : differing_positions) {
    if (pos < 0 || pos >= p.n)
      throw std::invalid_argument("brute_force_delta: position out of range");
    diff_mask |= 1u << pos;
  }
  if (p.s == 0) return 0.0;  // the empty retention set never intersects

  long total = 0, hit = 0;
  const uint32_t limit = 1u << p.n;
  uint32_t v = (1u << p.s) - 1;
  while (v < limit) {
    ++total;
    if (v & diff_mask) ++hit;
    // Gosper's hack: next subset of the same popcount
    const uint32_t c = v & (0u - v);
    const uint32_t r = v + c;
    v = (((r ^ v) >> 2) / c) | r;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace clucert
