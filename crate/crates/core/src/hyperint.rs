//! Exact nonnegative integers stored as sparse sums of powers of two.
//!
//! A value below 2^64 is held as a machine word. Anything larger is a strictly
//! decreasing list of exponents `e_1 > e_2 > ...` denoting `Σ 2^(e_i)`, where
//! every exponent is itself a [`HyperInt`]. This keeps numbers such as
//! `2^(2048·2^2048)` small in memory while comparison, addition and shifts stay
//! exact. Exponent lists sit behind an [`Arc`], so repeated sub-exponents are
//! shared instead of copied.
//!
//! The canonical form is unique: two values are equal exactly when their
//! representations are structurally equal.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct HyperInt(Repr);

/// Values below `2^DENSE_BITS` take a limb-array fast path.
const DENSE_BITS: u64 = 1 << 16;

#[derive(Clone)]
enum Repr {
    Small(u64),
    /// Exponents in strictly decreasing order; the value is at least 2^64.
    Tower(Arc<[HyperInt]>),
}

impl HyperInt {
    pub const ZERO: HyperInt = HyperInt(Repr::Small(0));
    pub const ONE: HyperInt = HyperInt(Repr::Small(1));

    pub const fn small(v: u64) -> Self {
        HyperInt(Repr::Small(v))
    }

    /// `2^e`.
    pub fn pow2(e: &HyperInt) -> Self {
        match e.0 {
            Repr::Small(s) if s < 64 => HyperInt(Repr::Small(1u64 << s)),
            _ => HyperInt(Repr::Tower(Arc::from(vec![e.clone()]))),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0))
    }

    pub fn to_u64(&self) -> Option<u64> {
        match self.0 {
            Repr::Small(v) => Some(v),
            Repr::Tower(_) => None,
        }
    }

    /// Number of power-of-two terms.
    pub fn term_count(&self) -> usize {
        match &self.0 {
            Repr::Small(v) => v.count_ones() as usize,
            Repr::Tower(t) => t.len(),
        }
    }

    /// Exponents in decreasing order.
    pub fn exponents(&self) -> Vec<HyperInt> {
        let mut v = self.ascending_terms();
        v.reverse();
        v
    }

    /// Nesting depth of the exponent tower; machine-range values have height 0.
    /// Height is monotone in value, so the leading exponent decides it.
    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut cur = self;
        while let Repr::Tower(t) = &cur.0 {
            h += 1;
            cur = &t[0];
        }
        h
    }

    /// Builds the canonical value from a strictly decreasing exponent list.
    /// Returns `None` if the list is not strictly decreasing.
    pub fn from_exponents(exps: Vec<HyperInt>) -> Option<Self> {
        if exps.windows(2).any(|w| w[0] <= w[1]) {
            return None;
        }
        let mut asc = exps;
        asc.reverse();
        Some(Self::from_ascending_terms(asc))
    }

    /// Little-endian 64-bit limbs.
    pub fn from_u64_limbs(limbs: &[u64]) -> Self {
        let mut asc = Vec::new();
        for (i, &limb) in limbs.iter().enumerate() {
            let mut w = limb;
            while w != 0 {
                let b = w.trailing_zeros() as u64;
                asc.push(HyperInt::small(i as u64 * 64 + b));
                w &= w - 1;
            }
        }
        Self::from_ascending_terms(asc)
    }

    /// Little-endian limbs, when the value has at most `max_bits` bits.
    pub fn to_u64_limbs(&self, max_bits: u64) -> Option<Vec<u64>> {
        match &self.0 {
            Repr::Small(v) => Some(vec![*v]),
            Repr::Tower(t) => {
                let top = t[0].to_u64()?;
                if top >= max_bits {
                    return None;
                }
                let mut limbs = vec![0u64; (top / 64 + 1) as usize];
                for e in t.iter() {
                    let e = e.to_u64()?;
                    limbs[(e / 64) as usize] |= 1u64 << (e % 64);
                }
                Some(limbs)
            }
        }
    }

    /// If the value is `2^e`, returns `e`.
    pub fn log2_exact(&self) -> Option<HyperInt> {
        match &self.0 {
            Repr::Small(v) if v.is_power_of_two() => Some(HyperInt::small(v.trailing_zeros() as u64)),
            Repr::Small(_) => None,
            Repr::Tower(t) if t.len() == 1 => Some(t[0].clone()),
            Repr::Tower(_) => None,
        }
    }

    fn ascending_terms(&self) -> Vec<HyperInt> {
        match &self.0 {
            Repr::Small(v) => {
                let mut out = Vec::with_capacity(v.count_ones() as usize);
                let mut w = *v;
                while w != 0 {
                    out.push(HyperInt::small(w.trailing_zeros() as u64));
                    w &= w - 1;
                }
                out
            }
            Repr::Tower(t) => t.iter().rev().cloned().collect(),
        }
    }

    /// `asc` must be strictly increasing.
    fn from_ascending_terms(mut asc: Vec<HyperInt>) -> Self {
        match asc.last() {
            None => HyperInt::ZERO,
            Some(top) if top.to_u64().is_some_and(|t| t < 64) => {
                let v = asc.iter().fold(0u64, |acc, e| acc | (1u64 << e.to_u64().unwrap()));
                HyperInt::small(v)
            }
            Some(_) => {
                asc.reverse();
                HyperInt(Repr::Tower(Arc::from(asc)))
            }
        }
    }

    /// Limbs of a value whose exponents all fit below `DENSE_BITS`.
    fn dense(&self) -> Option<Vec<u64>> {
        self.to_u64_limbs(DENSE_BITS)
    }

    pub fn succ(&self) -> HyperInt {
        self.add(&HyperInt::ONE)
    }

    /// Exact sum. Equal exponents merge with carry, recursively.
    pub fn add(&self, other: &HyperInt) -> HyperInt {
        if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &other.0) {
            if let Some(s) = a.checked_add(*b) {
                return HyperInt::small(s);
            }
        }
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(mut x), Some(y)) = (self.dense(), other.dense()) {
            if x.len() < y.len() {
                x.resize(y.len(), 0);
            }
            let mut carry = false;
            for (i, xi) in x.iter_mut().enumerate() {
                let (s1, c1) = xi.overflowing_add(y.get(i).copied().unwrap_or(0));
                let (s2, c2) = s1.overflowing_add(u64::from(carry));
                *xi = s2;
                carry = c1 || c2;
            }
            if carry {
                x.push(1);
            }
            return HyperInt::from_u64_limbs(&x);
        }
        let xs = self.ascending_terms();
        let ys = other.ascending_terms();
        let mut out = Vec::with_capacity(xs.len().max(ys.len()) + 1);
        let (mut i, mut j) = (0, 0);
        let mut carry: Option<HyperInt> = None;
        loop {
            let mut min: Option<&HyperInt> = None;
            for cand in [xs.get(i), ys.get(j), carry.as_ref()].into_iter().flatten() {
                if min.is_none_or(|m| cand < m) {
                    min = Some(cand);
                }
            }
            let Some(min) = min.cloned() else { break };
            let mut count = 0;
            if xs.get(i) == Some(&min) {
                i += 1;
                count += 1;
            }
            if ys.get(j) == Some(&min) {
                j += 1;
                count += 1;
            }
            if carry.as_ref() == Some(&min) {
                carry = None;
                count += 1;
            }
            match count {
                1 => out.push(min),
                2 => carry = Some(min.succ()),
                _ => {
                    carry = Some(min.succ());
                    out.push(min);
                }
            }
        }
        HyperInt::from_ascending_terms(out)
    }

    /// Multiplies by `2^e`.
    pub fn shift(&self, e: &HyperInt) -> HyperInt {
        if self.is_zero() {
            return HyperInt::ZERO;
        }
        if let (Repr::Small(a), Some(s)) = (&self.0, e.to_u64()) {
            if s < 64 && (a.leading_zeros() as u64) >= s {
                return HyperInt::small(a << s);
            }
        }
        if let (Some(x), Some(s)) = (self.dense(), e.to_u64()) {
            if s < DENSE_BITS {
                let (words, bits) = ((s / 64) as usize, s % 64);
                let mut out = vec![0u64; words];
                let mut carry = 0u64;
                for xi in x {
                    out.push((xi << bits) | carry);
                    carry = if bits == 0 { 0 } else { xi >> (64 - bits) };
                }
                out.push(carry);
                return HyperInt::from_u64_limbs(&out);
            }
        }
        let asc = self.ascending_terms().iter().map(|t| t.add(e)).collect();
        HyperInt::from_ascending_terms(asc)
    }

    /// Exact product with a machine-range factor.
    pub fn mul_small(&self, m: u64) -> HyperInt {
        if let Repr::Small(a) = self.0 {
            if let Some(p) = a.checked_mul(m) {
                return HyperInt::small(p);
            }
        }
        if let Some(x) = self.dense() {
            let mut out = Vec::with_capacity(x.len() + 1);
            let mut carry = 0u128;
            for xi in x {
                let v = xi as u128 * m as u128 + carry;
                out.push(v as u64);
                carry = v >> 64;
            }
            out.push(carry as u64);
            return HyperInt::from_u64_limbs(&out);
        }
        let mut acc = HyperInt::ZERO;
        let mut w = m;
        while w != 0 {
            let b = w.trailing_zeros() as u64;
            acc = acc.add(&self.shift(&HyperInt::small(b)));
            w &= w - 1;
        }
        acc
    }

    /// `self^m` for `self = 2^e`, i.e. `2^(m·e)`.
    pub fn pow_of_pow2(&self, m: u64) -> Result<HyperInt> {
        let e = self
            .log2_exact()
            .ok_or_else(|| Error::NotPowerOfTwo(self.to_string()))?;
        Ok(HyperInt::pow2(&e.mul_small(m)))
    }

    /// Product of two values when at least one is a single power of two.
    pub fn mul_pow2(&self, pow: &HyperInt) -> Result<HyperInt> {
        match pow.log2_exact() {
            Some(e) => Ok(self.shift(&e)),
            None => match self.log2_exact() {
                Some(e) => Ok(pow.shift(&e)),
                None => Err(Error::NotPowerOfTwo(pow.to_string())),
            },
        }
    }

    pub fn compare(&self, other: &HyperInt) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            (Repr::Small(_), Repr::Tower(_)) => Ordering::Less,
            (Repr::Tower(_), Repr::Small(_)) => Ordering::Greater,
            (Repr::Tower(a), Repr::Tower(b)) => {
                if Arc::ptr_eq(a, b) {
                    return Ordering::Equal;
                }
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.compare(y) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                a.len().cmp(&b.len())
            }
        }
    }

    fn fmt_exponent(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(v) if *v >= 4 && v.is_power_of_two() => {
                write!(f, "(2^")?;
                HyperInt::small(v.trailing_zeros() as u64).fmt_exponent(f)?;
                write!(f, ")")
            }
            Repr::Small(v) => write!(f, "{v}"),
            Repr::Tower(_) => write!(f, "({self})"),
        }
    }
}

impl HyperInt {
    /// The exact rendering if it fits in `max_len` bytes, otherwise the
    /// leading term with the rest elided as `+...`.
    pub fn brief(&self, max_len: usize) -> String {
        use fmt::Write;
        let mut w = Capped { buf: String::new(), max: max_len };
        if write!(w, "{self}").is_ok() {
            return w.buf;
        }
        let Repr::Tower(t) = &self.0 else { unreachable!("small values always fit") };
        if max_len < 12 {
            return "2^(...)".into();
        }
        let lead = t[0].brief(max_len / 2);
        let tail = if t.len() > 1 { "+..." } else { "" };
        match t[0].0 {
            Repr::Small(_) => format!("2^{lead}{tail}"),
            Repr::Tower(_) => format!("2^({lead}){tail}"),
        }
    }
}

struct Capped {
    buf: String,
    max: usize,
}

impl fmt::Write for Capped {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        if self.buf.len() + s.len() > self.max {
            return Err(fmt::Error);
        }
        self.buf.push_str(s);
        Ok(())
    }
}

impl Default for HyperInt {
    fn default() -> Self {
        HyperInt::ZERO
    }
}

impl From<u64> for HyperInt {
    fn from(v: u64) -> Self {
        HyperInt::small(v)
    }
}

impl From<usize> for HyperInt {
    fn from(v: usize) -> Self {
        HyperInt::small(v as u64)
    }
}

impl PartialEq for HyperInt {
    fn eq(&self, other: &Self) -> bool {
        self.compare(other) == Ordering::Equal
    }
}

impl Eq for HyperInt {}

impl PartialOrd for HyperInt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HyperInt {
    fn cmp(&self, other: &Self) -> Ordering {
        self.compare(other)
    }
}

impl Hash for HyperInt {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(v) => {
                0u8.hash(state);
                v.hash(state);
            }
            Repr::Tower(t) => {
                1u8.hash(state);
                t.len().hash(state);
                // Only the leading exponent: a full walk is exponential on shared towers.
                t[0].hash(state);
            }
        }
    }
}

impl fmt::Display for HyperInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(v) => write!(f, "{v}"),
            Repr::Tower(t) => {
                for (i, e) in t.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "2^")?;
                    e.fmt_exponent(f)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for HyperInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HyperInt({self})")
    }
}

impl FromStr for HyperInt {
    type Err = Error;

    /// Accepts the rendering produced by `Display`: decimal numbers, `2^e`
    /// terms with `e` a number or a parenthesised expression, joined by `+`.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let v = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(v)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &'static str) -> Error {
        Error::Parse {
            input: self.src.to_string(),
            position: self.pos,
            reason,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<HyperInt> {
        let mut acc = self.term()?;
        while self.eat(b'+') {
            acc = acc.add(&self.term()?);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<HyperInt> {
        self.skip_ws();
        let start = self.pos;
        let n = self.number()?;
        if n == 2 && self.eat(b'^') {
            let e = self.atom()?;
            return Ok(HyperInt::pow2(&e));
        }
        if self.pos == start {
            return Err(self.error("expected a number"));
        }
        Ok(HyperInt::small(n))
    }

    fn atom(&mut self) -> Result<HyperInt> {
        if self.eat(b'(') {
            let v = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            Ok(v)
        } else {
            self.skip_ws();
            let start = self.pos;
            let n = self.number()?;
            if self.pos == start {
                return Err(self.error("expected an exponent"));
            }
            Ok(HyperInt::small(n))
        }
    }

    fn number(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a digit"));
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| self.error("number does not fit in 64 bits"))
    }
}

impl serde::Serialize for HyperInt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for HyperInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: u64) -> HyperInt {
        HyperInt::small(v)
    }

    #[test]
    fn single_carry() {
        assert_eq!(h(8).add(&h(8)), h(16));
        assert_eq!(h(5).add(&HyperInt::ZERO), h(5));
    }

    #[test]
    fn carry_across_machine_boundary() {
        let top = HyperInt::pow2(&h(63));
        let sum = top.add(&top);
        assert_eq!(sum, HyperInt::pow2(&h(64)));
        assert!(sum.to_u64().is_none());
        assert_eq!(sum.to_string(), "2^(2^6)");
    }

    #[test]
    fn equal_towers_compare_equal() {
        let a = HyperInt::pow2(&HyperInt::pow2(&h(11)));
        let b = HyperInt::pow2(&h(2048));
        assert_eq!(a.compare(&b), Ordering::Equal);
        assert!(h(256) < b);
    }

    #[test]
    fn shift_basics() {
        assert_eq!(h(1).shift(&h(11)), h(2048));
        let x = HyperInt::pow2(&h(300)).add(&h(7));
        assert_eq!(x.shift(&HyperInt::ZERO), x);
    }

    #[test]
    fn mul_small_basics() {
        assert_eq!(h(16).mul_small(3), h(48));
        assert_eq!(HyperInt::pow2(&h(900)).mul_small(0), HyperInt::ZERO);
    }

    #[test]
    fn pow_of_single_terms() {
        assert_eq!(h(8).pow_of_pow2(3).unwrap(), h(512));
        let p4 = h(2048);
        assert_eq!(p4.pow_of_pow2(1).unwrap(), p4);
        let sq = p4.pow_of_pow2(2).unwrap();
        assert_eq!(sq, h(1 << 22));
        assert!(sq < HyperInt::pow2(&h(2048)));
        assert!(matches!(h(6).pow_of_pow2(2), Err(Error::NotPowerOfTwo(_))));
        assert!(HyperInt::ZERO.pow_of_pow2(2).is_err());
    }

    #[test]
    fn render_and_parse() {
        let n5 = HyperInt::pow2(&HyperInt::pow2(&h(2059)));
        assert_eq!(n5.to_string(), "2^(2^2059)");
        let mixed = n5.add(&HyperInt::pow2(&h(70))).add(&h(3));
        let back: HyperInt = mixed.to_string().parse().unwrap();
        assert_eq!(back, mixed);
        assert_eq!("2^11".parse::<HyperInt>().unwrap(), h(2048));
        assert!("2^(3".parse::<HyperInt>().is_err());
        assert!("".parse::<HyperInt>().is_err());
    }

    #[test]
    fn exponent_lists_must_decrease() {
        assert!(HyperInt::from_exponents(vec![h(3), h(3)]).is_none());
        assert_eq!(HyperInt::from_exponents(vec![h(3), h(0)]).unwrap(), h(9));
    }

    #[test]
    fn limbs_round_trip() {
        let limbs = [5u64, 0, 1 << 40];
        let v = HyperInt::from_u64_limbs(&limbs);
        assert_eq!(v.to_u64_limbs(4096).unwrap(), limbs.to_vec());
        assert_eq!(v.term_count(), 3);
    }
}
