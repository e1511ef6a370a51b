//! Exact arithmetic for sizes of the form `base + Σ c_j · k^(-e_j)`.
//!
//! The adversary constructions use item sizes such as `ε · k^(-x)` where the
//! exponent `x` is on the order of `2^(N+3)`. Those values can never be
//! materialized as plain rationals; instead we keep the exponents symbolic
//! and decide every comparison through a dominance rule: when exponent gaps
//! are large enough, the term with the smallest exponent outweighs the sum
//! of everything behind it. All exponents produced by this crate are
//! multiples of the gap multiplier `B`, which makes the rule checkable with
//! a handful of big-integer comparisons. The check is asserted per
//! comparison, never assumed.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised by symbolic-size arithmetic.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    /// A sum produced a coefficient too heavy for the dominance comparator.
    /// Signals use outside the bin-sum context the representation supports.
    #[error("dominance precondition broken: coefficient mass {0} exceeds bound {1}")]
    DominanceBroken(String, String),
    /// The configured gap multiplier cannot decide the sign of this value.
    /// Never occurs for values generated by this crate.
    #[error("dominance undecidable under configured gap multiplier")]
    DominanceUndecidable,
    /// `to_exact_rational` was asked to expand an exponent above the limit.
    #[error("materialization too large: exponent {0} exceeds limit {1}")]
    MaterializationTooLarge(BigUint, u64),
    #[error("mixed radix: {0} vs {1}")]
    RadixMismatch(u32, u32),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Sign of an exact value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

/// Configuration of the exponent scaling scheme.
///
/// Every exponent emitted by the procedures is a multiple of `B`. This keeps
/// the ratio between consecutive powers at least `k^B`, which dwarfs any
/// coefficient mass a bin sum can accumulate, so sign decisions reduce to
/// looking at the smallest exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapConfig {
    /// Gap multiplier applied to every exponent.
    pub gap_multiplier: u64,
    /// Largest exponent `to_exact_rational` is willing to expand.
    pub materialization_limit: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            gap_multiplier: 8,
            materialization_limit: 1 << 13,
        }
    }
}

impl GapConfig {
    /// Checks that `k^B` exceeds the worst coefficient mass ratio a bin sum
    /// can produce (coefficients up to `2k²` against a lead coefficient as
    /// small as `1/2`, at most `2(k+1)` terms).
    pub fn validate(&self, k: u32) -> bool {
        let mass_ratio = BigUint::from(16u32 * k * k * (k + 1));
        let gap = BigUint::from(k).pow(self.gap_multiplier.min(64) as u32);
        gap > mass_ratio
    }
}

/// Coefficient magnitude bound enforced by [`SymbolicSize::add`].
pub fn coefficient_bound(k: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(4u64 * k as u64 * k as u64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Term {
    coeff: BigRational,
    exponent: BigUint,
}

/// An exact value `base + Σ coeff_j · k^(-exponent_j)`.
///
/// Terms are kept canonical: sorted by ascending exponent, equal exponents
/// merged, zero coefficients dropped. Values are immutable; all operations
/// return fresh values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicSize {
    base: BigRational,
    terms: Vec<Term>,
    radix: u32,
}

impl SymbolicSize {
    /// A plain rational value (no power terms).
    pub fn from_rational(base: BigRational, k: u32) -> Self {
        SymbolicSize {
            base,
            terms: Vec::new(),
            radix: k,
        }
    }

    /// Convenience constructor for `p/q`.
    pub fn from_ratio(p: i64, q: i64, k: u32) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(p), BigInt::from(q)), k)
    }

    pub fn zero(k: u32) -> Self {
        Self::from_rational(BigRational::zero(), k)
    }

    pub fn one(k: u32) -> Self {
        Self::from_rational(BigRational::one(), k)
    }

    /// `coeff · k^(-exponent)`.
    pub fn scaled_power(coeff: BigRational, k: u32, exponent: BigUint) -> Self {
        let mut s = SymbolicSize {
            base: BigRational::zero(),
            terms: vec![Term { coeff, exponent }],
            radix: k,
        };
        s.canonicalize();
        s
    }

    /// `k^(-exponent)`.
    pub fn power(k: u32, exponent: BigUint) -> Self {
        Self::scaled_power(BigRational::one(), k, exponent)
    }

    /// `1 - self`.
    pub fn one_minus(&self) -> Self {
        let mut s = self.clone();
        s.base = BigRational::one() - &s.base;
        for t in &mut s.terms {
            t.coeff = -t.coeff.clone();
        }
        s
    }

    pub fn negate(&self) -> Self {
        let mut s = self.clone();
        s.base = -s.base;
        for t in &mut s.terms {
            t.coeff = -t.coeff.clone();
        }
        s
    }

    /// Multiplies by a small rational scalar (used for sizes like `kδ` or `ζ/2`).
    pub fn scale(&self, factor: &BigRational) -> Self {
        let mut s = self.clone();
        s.base *= factor;
        for t in &mut s.terms {
            t.coeff *= factor;
        }
        s.canonicalize();
        s
    }

    pub fn radix(&self) -> u32 {
        self.radix
    }

    pub fn base(&self) -> &BigRational {
        &self.base
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Smallest exponent among the power terms, if any.
    pub fn min_exponent(&self) -> Option<&BigUint> {
        self.terms.first().map(|t| &t.exponent)
    }

    pub fn max_exponent(&self) -> Option<&BigUint> {
        self.terms.last().map(|t| &t.exponent)
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.exponent.cmp(&b.exponent));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.exponent == t.exponent => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| !t.coeff.is_zero());
        self.terms = merged;
    }

    /// Exact sum in canonical form.
    ///
    /// Errors when a merged coefficient leaves the mass budget the dominance
    /// comparator is validated for; sums of at most `k` item sizes stay well
    /// inside it.
    pub fn add(&self, other: &SymbolicSize) -> Result<SymbolicSize, ExactError> {
        if self.radix != other.radix {
            return Err(ExactError::RadixMismatch(self.radix, other.radix));
        }
        let mut out = SymbolicSize {
            base: &self.base + &other.base,
            terms: self
                .terms
                .iter()
                .chain(other.terms.iter())
                .cloned()
                .collect(),
            radix: self.radix,
        };
        out.canonicalize();
        let bound = coefficient_bound(self.radix);
        for t in &out.terms {
            if t.coeff.abs() > bound {
                return Err(ExactError::DominanceBroken(
                    format_rational(&t.coeff),
                    format_rational(&bound),
                ));
            }
        }
        Ok(out)
    }

    /// `self - other`, for comparisons. Not subject to the bin-sum
    /// coefficient budget; the sign decision carries its own check.
    pub fn sub(&self, other: &SymbolicSize) -> Result<SymbolicSize, ExactError> {
        if self.radix != other.radix {
            return Err(ExactError::RadixMismatch(self.radix, other.radix));
        }
        let mut out = SymbolicSize {
            base: &self.base - &other.base,
            terms: self
                .terms
                .iter()
                .cloned()
                .chain(other.terms.iter().map(|t| Term {
                    coeff: -t.coeff.clone(),
                    exponent: t.exponent.clone(),
                }))
                .collect(),
            radix: self.radix,
        };
        out.canonicalize();
        Ok(out)
    }

    /// Sign of the exact value, decided by dominance:
    ///
    /// * nonzero base: the base wins if the total coefficient mass at the
    ///   smallest exponent cannot reach it;
    /// * zero base: the coefficient at the smallest exponent wins if the
    ///   remaining mass cannot reach it across the gap to the next exponent.
    ///
    /// Both conditions are verified exactly; if neither holds the value came
    /// from outside this crate and the sign is refused rather than guessed.
    pub fn sign(&self) -> Result<Sign, ExactError> {
        if self.base.is_zero() {
            let Some(lead) = self.terms.first() else {
                return Ok(Sign::Zero);
            };
            if self.terms.len() == 1 {
                return Ok(rational_sign(&lead.coeff));
            }
            let rest_mass: BigRational = self.terms[1..]
                .iter()
                .map(|t| t.coeff.abs())
                .fold(BigRational::zero(), |a, b| a + b);
            let gap = &self.terms[1].exponent - &lead.exponent;
            let q = rest_mass / lead.coeff.abs();
            if rational_lt_radix_pow(&q, self.radix, &gap)? {
                Ok(rational_sign(&lead.coeff))
            } else {
                Err(ExactError::DominanceUndecidable)
            }
        } else {
            let Some(lead) = self.terms.first() else {
                return Ok(rational_sign(&self.base));
            };
            let mass: BigRational = self
                .terms
                .iter()
                .map(|t| t.coeff.abs())
                .fold(BigRational::zero(), |a, b| a + b);
            let q = mass / self.base.abs();
            if rational_lt_radix_pow(&q, self.radix, &lead.exponent)? {
                Ok(rational_sign(&self.base))
            } else {
                Err(ExactError::DominanceUndecidable)
            }
        }
    }

    /// Exact ordering of two values via the sign of their difference.
    pub fn cmp_exact(&self, other: &SymbolicSize) -> Result<Ordering, ExactError> {
        Ok(match self.sub(other)?.sign()? {
            Sign::Negative => Ordering::Less,
            Sign::Zero => Ordering::Equal,
            Sign::Positive => Ordering::Greater,
        })
    }

    /// Fully materialized rational value. Only valid while every exponent
    /// stays under the configured limit; used as a test oracle.
    pub fn to_exact_rational(&self, config: &GapConfig) -> Result<BigRational, ExactError> {
        let mut value = self.base.clone();
        for t in &self.terms {
            let e = t.exponent.to_u64().filter(|&e| e <= config.materialization_limit);
            let Some(e) = e else {
                return Err(ExactError::MaterializationTooLarge(
                    t.exponent.clone(),
                    config.materialization_limit,
                ));
            };
            let denom = BigInt::from(self.radix).pow(e as u32);
            value += &t.coeff / BigRational::from_integer(denom);
        }
        Ok(value)
    }
}

/// Is `q < k^e`, decided without materializing `k^e` unless `e` is small.
///
/// With `q = p/s` (positive), `p < s·k^e` certainly holds once `2^e > p`,
/// i.e. once `e` reaches the bit length of `p`. Below that threshold `e`
/// is small enough to expand exactly.
fn rational_lt_radix_pow(q: &BigRational, k: u32, e: &BigUint) -> Result<bool, ExactError> {
    debug_assert!(!q.is_negative());
    let p = q.numer().magnitude();
    let s = q.denom().magnitude();
    if *e >= BigUint::from(p.bits()) {
        return Ok(true);
    }
    // e < bits(p); refuse absurd expansions on foreign input.
    let e_small = e.to_u64().filter(|&v| v <= 1 << 20);
    let Some(e_small) = e_small else {
        return Err(ExactError::DominanceUndecidable);
    };
    let pow = BigUint::from(k).pow(e_small as u32);
    Ok(p < &(s * pow))
}

fn rational_sign(r: &BigRational) -> Sign {
    if r.is_zero() {
        Sign::Zero
    } else if r.is_negative() {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

/// True iff the sizes fit one bin: at most `k` items and total at most 1.
pub fn fits_in_bin(sizes: &[SymbolicSize], k: u32) -> Result<bool, ExactError> {
    if sizes.len() > k as usize {
        return Ok(false);
    }
    let mut total = SymbolicSize::zero(k);
    for s in sizes {
        total = total.add(s)?;
    }
    let slack = total.sub(&SymbolicSize::one(k))?;
    Ok(matches!(slack.sign()?, Sign::Negative | Sign::Zero))
}

/// Renders a rational as `p/q` (or just `p` when integral).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q` or `-p/q`.
pub fn parse_rational(s: &str) -> Result<BigRational, ExactError> {
    let bad = |_| ExactError::Parse(format!("invalid rational {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(bad)?;
            let q: BigInt = q.trim().parse().map_err(bad)?;
            if q.is_zero() {
                return Err(ExactError::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = s.trim().parse().map_err(bad)?;
            Ok(BigRational::from_integer(p))
        }
    }
}

/// Decimal rendering of a rational, truncated to `digits` fractional digits.
pub fn decimal_string(r: &BigRational, digits: u32) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let a = r.abs();
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = (a.numer() * &scale) / a.denom();
    let int_part = &scaled / &scale;
    let frac_part = &scaled % &scale;
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{frac:0>width$}",
            frac = frac_part,
            width = digits as usize
        )
    }
}

// --- serialization -------------------------------------------------------
//
// Wire form: {"base":"p/q","k":3,"terms":[["p/q","<decimal exponent>"],...]}
// Exponents travel as decimal strings because they exceed 64-bit range.

impl Serialize for SymbolicSize {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            base: String,
            k: u32,
            terms: Vec<(String, String)>,
        }
        Wire {
            base: format_rational(&self.base),
            k: self.radix,
            terms: self
                .terms
                .iter()
                .map(|t| (format_rational(&t.coeff), t.exponent.to_string()))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymbolicSize {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            base: String,
            k: u32,
            terms: Vec<(String, String)>,
        }
        let w = Wire::deserialize(deserializer)?;
        if w.k < 2 {
            return Err(D::Error::custom("radix must be at least 2"));
        }
        let base = parse_rational(&w.base).map_err(D::Error::custom)?;
        let mut terms = Vec::with_capacity(w.terms.len());
        for (c, e) in &w.terms {
            let coeff = parse_rational(c).map_err(D::Error::custom)?;
            let exponent: BigUint = e
                .trim()
                .parse()
                .map_err(|_| D::Error::custom(format!("invalid exponent {e:?}")))?;
            terms.push(Term { coeff, exponent });
        }
        let mut s = SymbolicSize {
            base,
            terms,
            radix: w.k,
        };
        s.canonicalize();
        Ok(s)
    }
}

impl fmt::Display for SymbolicSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rational(&self.base))?;
        for t in &self.terms {
            write!(
                f,
                " + ({})*{}^-{}",
                format_rational(&t.coeff),
                self.radix,
                t.exponent
            )?;
        }
        Ok(())
    }
}
