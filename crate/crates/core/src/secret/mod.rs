//! n-out-of-n additive secret sharing over `Z_{2^ℓ}` with fixed-point
//! encoding of reals.
//!
//! A secret `x` is split into `I` shares: `I − 1` uniform ring elements and
//! one balancing share, so that the shares sum to `x` mod `2^ℓ`. Any strict
//! subset of the shares is uniformly distributed.

mod wire;

use rand::Rng;

use crate::error::{Error, Result};

pub use wire::{Endpoint, Envelope, Message, PayloadKind, Transport};

/// Fractional bits of the fixed-point encoding.
pub const FRAC_BITS: u32 = 20;

/// The ring `Z_{2^ℓ}` for `1 ≤ ℓ ≤ 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ring {
    bits: u32,
}

/// An element of a [`Ring`], always reduced below `2^ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RingElem(pub u64);

impl Ring {
    pub const Z64: Ring = Ring { bits: 64 };

    pub fn new(bits: u32) -> Result<Ring> {
        if !(1..=64).contains(&bits) {
            return Err(Error::InvalidArgument(format!("ring width {bits} not in 1..=64")));
        }
        Ok(Ring { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn mask(&self) -> u64 {
        u64::MAX >> (64 - self.bits)
    }

    pub fn elem(&self, v: u64) -> RingElem {
        RingElem(v & self.mask())
    }

    pub fn add(&self, a: RingElem, b: RingElem) -> RingElem {
        self.elem(a.0.wrapping_add(b.0))
    }

    pub fn sub(&self, a: RingElem, b: RingElem) -> RingElem {
        self.elem(a.0.wrapping_sub(b.0))
    }

    pub fn sum(&self, xs: impl IntoIterator<Item = RingElem>) -> RingElem {
        xs.into_iter().fold(RingElem(0), |acc, x| self.add(acc, x))
    }

    pub fn random(&self, rng: &mut impl Rng) -> RingElem {
        self.elem(rng.random())
    }

    /// Two's-complement reading in `[−2^{ℓ−1}, 2^{ℓ−1})`.
    pub fn to_signed(&self, a: RingElem) -> i64 {
        let shift = 64 - self.bits;
        ((a.0 << shift) as i64) >> shift
    }

    pub fn from_signed(&self, v: i64) -> RingElem {
        self.elem(v as u64)
    }
}

/// Fixed-point codec: `x ↦ round(x·2^f)` in two's complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPoint {
    pub ring: Ring,
    pub frac_bits: u32,
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint {
            ring: Ring::Z64,
            frac_bits: FRAC_BITS,
        }
    }
}

impl FixedPoint {
    pub fn new(ring: Ring, frac_bits: u32) -> Result<FixedPoint> {
        if frac_bits + 1 >= ring.bits() {
            return Err(Error::InvalidArgument(format!(
                "{frac_bits} fractional bits leave no integer range in a {}-bit ring",
                ring.bits()
            )));
        }
        Ok(FixedPoint { ring, frac_bits })
    }

    fn unit(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// Largest magnitude accepted by [`FixedPoint::encode`] (exclusive).
    pub fn limit(&self) -> f64 {
        ((self.ring.bits() - 1 - self.frac_bits) as f64).exp2()
    }

    pub fn encode(&self, x: f64) -> Result<RingElem> {
        if !x.is_finite() || x.abs() >= self.limit() {
            return Err(Error::Overflow(x));
        }
        Ok(self.ring.from_signed((x * self.unit()).round() as i64))
    }

    pub fn decode(&self, r: RingElem) -> f64 {
        self.ring.to_signed(r) as f64 / self.unit()
    }
}

/// Encodes with ℓ = 64, f = 20.
pub fn encode_fixed(x: f64) -> Result<RingElem> {
    FixedPoint::default().encode(x)
}

pub fn decode_fixed(r: RingElem) -> f64 {
    FixedPoint::default().decode(r)
}

/// Splits `x` into `parties` additive shares.
pub fn shr(ring: Ring, x: RingElem, parties: usize, rng: &mut impl Rng) -> Result<Vec<RingElem>> {
    if parties < 2 {
        return Err(Error::InvalidArgument(format!(
            "sharing needs at least 2 parties, got {parties}"
        )));
    }
    let mut shares: Vec<RingElem> = (0..parties - 1).map(|_| ring.random(rng)).collect();
    let used = ring.sum(shares.iter().copied());
    shares.push(ring.sub(ring.elem(x.0), used));
    Ok(shares)
}

/// Reconstructs a secret from exactly `parties` shares.
pub fn rec(ring: Ring, shares: &[RingElem], parties: usize) -> Result<RingElem> {
    if shares.len() != parties {
        return Err(Error::Protocol(format!(
            "expected {parties} shares, got {}",
            shares.len()
        )));
    }
    Ok(ring.sum(shares.iter().copied()))
}

/// A fixed-point vector split into one share vector per party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedVector {
    pub shares: Vec<Vec<RingElem>>,
    pub scale: u32,
}

impl SharedVector {
    pub fn share(
        codec: FixedPoint,
        values: &[f64],
        parties: usize,
        rng: &mut impl Rng,
    ) -> Result<SharedVector> {
        if parties < 2 {
            return Err(Error::InvalidArgument(format!(
                "sharing needs at least 2 parties, got {parties}"
            )));
        }
        let mut shares = vec![Vec::with_capacity(values.len()); parties];
        for &v in values {
            let parts = shr(codec.ring, codec.encode(v)?, parties, rng)?;
            for (dst, p) in shares.iter_mut().zip(parts) {
                dst.push(p);
            }
        }
        Ok(SharedVector {
            shares,
            scale: codec.frac_bits,
        })
    }

    pub fn len(&self) -> usize {
        self.shares.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parties(&self) -> usize {
        self.shares.len()
    }

    /// Plaintext reconstruction (test helper and single-vector path).
    pub fn reveal(&self, codec: FixedPoint) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|j| {
                let col: Vec<RingElem> = self.shares.iter().map(|s| s[j]).collect();
                rec(codec.ring, &col, self.parties()).map(|r| codec.decode(r))
            })
            .collect()
    }
}

fn check_inputs(inputs: &[SharedVector]) -> Result<(usize, u32)> {
    let parties = inputs.len();
    if parties < 2 {
        return Err(Error::InvalidArgument(format!(
            "secure aggregation needs at least 2 clients, got {parties}"
        )));
    }
    let len = inputs[0].len();
    let scale = inputs[0].scale;
    for (i, v) in inputs.iter().enumerate() {
        if v.parties() != parties || v.shares.iter().any(|s| s.len() != len) {
            return Err(Error::Shape(format!(
                "input {i}: expected {parties} share vectors of length {len}"
            )));
        }
        if v.scale != scale {
            return Err(Error::Shape(format!(
                "input {i}: scale {} differs from {scale}",
                v.scale
            )));
        }
    }
    Ok((len, scale))
}

/// What party `k` forwards to the server: the sum of the `k`-th shares of
/// every input.
pub fn party_sum(ring: Ring, inputs: &[SharedVector], k: usize) -> Result<Vec<RingElem>> {
    let (len, _) = check_inputs(inputs)?;
    let mut acc = vec![RingElem(0); len];
    for v in inputs {
        for (a, &s) in acc.iter_mut().zip(&v.shares[k]) {
            *a = ring.add(*a, s);
        }
    }
    Ok(acc)
}

/// Server side: reconstructs the sum from per-party partial sums, decodes,
/// and divides by `divisor` in real arithmetic.
pub fn reconstruct_mean(codec: FixedPoint, partials: &[Vec<RingElem>], divisor: usize) -> Result<Vec<f64>> {
    let len = partials.first().map_or(0, Vec::len);
    if partials.iter().any(|p| p.len() != len) {
        return Err(Error::Shape("partial sums differ in length".into()));
    }
    let d = divisor as f64;
    Ok((0..len)
        .map(|j| codec.decode(codec.ring.sum(partials.iter().map(|p| p[j]))) / d)
        .collect())
}

/// Mean of `I` secret-shared vectors, each shared among the same `I` parties.
pub fn aggregate_shared_sum(codec: FixedPoint, inputs: &[SharedVector]) -> Result<Vec<f64>> {
    let (_, scale) = check_inputs(inputs)?;
    if scale != codec.frac_bits {
        return Err(Error::Shape(format!(
            "inputs use scale {scale}, codec expects {}",
            codec.frac_bits
        )));
    }
    let partials = (0..inputs.len())
        .map(|k| party_sum(codec.ring, inputs, k))
        .collect::<Result<Vec<_>>>()?;
    reconstruct_mean(codec, &partials, inputs.len())
}
