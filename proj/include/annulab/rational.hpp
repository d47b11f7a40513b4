#pragma once

// Exact rational helpers on top of GMP. Everything mass-related in the
// workbench is an mpq_class; comparisons against powers of two with rational
// exponents are done in integer arithmetic so no branch of a subdivision
// scheme can ever be flipped by rounding.

#include <gmpxx.h>
#include <mpfr.h>

#include <cstdint>
#include <string>
#include <utility>

#include "annulab/errors.hpp"

namespace annulab {

using Rat = mpq_class;
using Int = mpz_class;

enum class Cmp { Less, Equal, Greater };

inline Rat make_rat(const Int& num, const Int& den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  Rat q(num, den);
  q.canonicalize();
  return q;
}

inline Rat make_rat(long num, long den) { return make_rat(Int(num), Int(den)); }

// 2^e for any integer e.
inline Rat pow2(long e) {
  Rat q;
  if (e >= 0) {
    mpz_ui_pow_ui(q.get_num_mpz_t(), 2, static_cast<unsigned long>(e));
  } else {
    q = 1;
    mpz_ui_pow_ui(q.get_den_mpz_t(), 2, static_cast<unsigned long>(-e));
  }
  return q;
}

inline Rat rat_pow(const Rat& base, unsigned long e) {
  Rat r;
  mpz_pow_ui(r.get_num_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(r.get_den_mpz_t(), base.get_den_mpz_t(), e);
  return r;  // base canonical => power canonical
}

inline Cmp cmp_of(int c) { return c < 0 ? Cmp::Less : (c == 0 ? Cmp::Equal : Cmp::Greater); }

// Compare q against 2^{-a/b} where exponent = a/b in lowest terms, b >= 1.
// Decided by comparing q^b * 2^a with 1 in exact integer arithmetic.
inline Cmp threshold_compare(const Rat& q, const Rat& exponent) {
  if (sgn(q) <= 0) throw DomainError("threshold_compare: q must be positive");
  const Int& a = exponent.get_num();
  const Int& b = exponent.get_den();
  if (!b.fits_ulong_p()) throw DomainError("threshold_compare: exponent denominator too large");
  unsigned long bu = b.get_ui();
  Int lhs, rhs;
  mpz_pow_ui(lhs.get_mpz_t(), q.get_num().get_mpz_t(), bu);
  mpz_pow_ui(rhs.get_mpz_t(), q.get_den().get_mpz_t(), bu);
  // lhs/rhs vs 2^{-a}: move the power of two to whichever side keeps integers.
  if (!a.fits_slong_p()) throw DomainError("threshold_compare: exponent numerator too large");
  long ai = a.get_si();
  if (ai >= 0) {
    mpz_mul_2exp(lhs.get_mpz_t(), lhs.get_mpz_t(), static_cast<unsigned long>(ai));
  } else {
    mpz_mul_2exp(rhs.get_mpz_t(), rhs.get_mpz_t(), static_cast<unsigned long>(-ai));
  }
  return cmp_of(cmp(lhs, rhs));
}

// Compare q against 2^x with rational x (i.e. threshold_compare with a/b = -x).
inline Cmp compare_pow2(const Rat& q, const Rat& x) { return threshold_compare(q, Rat(-x)); }

inline bool rat_ge_pow2(const Rat& q, const Rat& x) { return compare_pow2(q, x) != Cmp::Less; }
inline bool rat_le_pow2(const Rat& q, const Rat& x) { return compare_pow2(q, x) != Cmp::Greater; }
inline bool rat_lt_pow2(const Rat& q, const Rat& x) { return compare_pow2(q, x) == Cmp::Less; }
inline bool rat_gt_pow2(const Rat& q, const Rat& x) { return compare_pow2(q, x) == Cmp::Greater; }

// Exact floor(log2(q)) for q > 0: the unique L with 2^L <= q < 2^{L+1}.
inline long floor_log2(const Rat& q) {
  if (sgn(q) <= 0) throw DomainError("floor_log2: q must be positive");
  long bn = static_cast<long>(mpz_sizeinbase(q.get_num().get_mpz_t(), 2));
  long bd = static_cast<long>(mpz_sizeinbase(q.get_den().get_mpz_t(), 2));
  long guess = bn - bd;  // within 1 of the truth
  for (long L = guess - 1; L <= guess + 1; ++L) {
    // test 2^L <= q < 2^{L+1}
    if (rat_ge_pow2(q, Rat(L)) && rat_lt_pow2(q, Rat(L + 1))) return L;
  }
  throw DomainError("floor_log2: internal bracketing failure");
}

inline Int floor_rat(const Rat& q) {
  Int r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num().get_mpz_t(), q.get_den().get_mpz_t());
  return r;
}

inline Int ceil_rat(const Rat& q) {
  Int r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num().get_mpz_t(), q.get_den().get_mpz_t());
  return r;
}

// k / 2^n.
inline Rat dyadic(long k, long n) {
  Rat q(Int(k), Int(1));
  return q * pow2(-n);
}

// Certified enclosure of base^expo for rational base > 0 and rational expo.
// Exact (lo == hi) when the exponent is an integer; otherwise correctly
// rounded MPFR endpoints at `bits` precision.
inline std::pair<Rat, Rat> bracket_pow(const Rat& base, const Rat& expo, long bits = 192) {
  if (sgn(base) <= 0) throw DomainError("bracket_pow: base must be positive");
  if (expo.get_den() == 1) {
    const Int& e = expo.get_num();
    if (!e.fits_slong_p()) throw DomainError("bracket_pow: exponent too large");
    long ei = e.get_si();
    Rat v = ei >= 0 ? rat_pow(base, static_cast<unsigned long>(ei))
                    : Rat(1) / rat_pow(base, static_cast<unsigned long>(-ei));
    return {v, v};
  }
  mpfr_t b, e, lo, hi;
  mpfr_init2(b, static_cast<mpfr_prec_t>(bits));
  mpfr_init2(e, static_cast<mpfr_prec_t>(bits));
  mpfr_init2(lo, static_cast<mpfr_prec_t>(bits));
  mpfr_init2(hi, static_cast<mpfr_prec_t>(bits));
  // base^expo is monotone in base with the sign of expo, and monotone in expo
  // with the sign of (base - 1); round each input accordingly per endpoint.
  const bool expo_pos = sgn(expo) >= 0;
  const bool base_gt1 = base > 1;
  mpfr_set_q(b, base.get_mpq_t(), expo_pos ? MPFR_RNDD : MPFR_RNDU);
  mpfr_set_q(e, expo.get_mpq_t(), base_gt1 ? MPFR_RNDD : MPFR_RNDU);
  mpfr_pow(lo, b, e, MPFR_RNDD);
  mpfr_set_q(b, base.get_mpq_t(), expo_pos ? MPFR_RNDU : MPFR_RNDD);
  mpfr_set_q(e, expo.get_mpq_t(), base_gt1 ? MPFR_RNDU : MPFR_RNDD);
  mpfr_pow(hi, b, e, MPFR_RNDU);

  auto to_rat = [](mpfr_t x) {
    mpz_class z;
    mpfr_exp_t ex = mpfr_get_z_2exp(z.get_mpz_t(), x);
    Rat r(z);
    return Rat(r * pow2(static_cast<long>(ex)));
  };
  Rat rlo = to_rat(lo), rhi = to_rat(hi);
  mpfr_clears(b, e, lo, hi, static_cast<mpfr_ptr>(nullptr));
  if (rlo > rhi) std::swap(rlo, rhi);
  return {rlo, rhi};
}

// Accepts "p/q", a plain integer, or a terminating decimal such as "0.75".
inline Rat parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw SchemaError("empty rational literal");
  auto slash = s.find('/');
  try {
    if (slash != std::string::npos) {
      Int num(s.substr(0, slash), 10);
      Int den(s.substr(slash + 1), 10);
      return make_rat(num, den);
    }
    auto dot = s.find('.');
    if (dot == std::string::npos) {
      Rat q{Int(s, 10)};
      return q;
    }
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    Int num(digits, 10);
    Int den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, s.size() - dot - 1);
    return make_rat(num, den);
  } catch (const std::invalid_argument&) {
    throw SchemaError("cannot parse rational literal: '" + text + "'");
  }
}

inline std::string format_rational(const Rat& q) {
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

}  // namespace annulab
