// SPDX-License-Identifier: Apache-2.0

//! Arithmetic in the BN254 scalar field, the native `Field` of the ownership
//! circuit.
//!
//! `p = 21888242871839275222246405745257275088548364400416034343698204186575808495617`
//!
//! Elements are held in Montgomery form over four little-endian 64-bit limbs.
//! Every constructor reduces or rejects, so a [`FieldElement`] is always the
//! canonical representative in `[0, p)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use core::str::FromStr;

use rand_core::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The field modulus, little-endian limbs.
const MODULUS: [u64; 4] = [
    0x43e1_f593_f000_0001,
    0x2833_e848_79b9_7091,
    0xb850_45b6_8181_585d,
    0x3064_4e72_e131_a029,
];

/// `2^256 mod p`
const R: [u64; 4] = [
    0xac96_341c_4fff_fffb,
    0x36fc_7695_9f60_cd29,
    0x666e_a36f_7879_462e,
    0x0e0a_77c1_9a07_df2f,
];

/// `2^512 mod p`
const R2: [u64; 4] = [
    0x1bb8_e645_ae21_6da7,
    0x53fe_3ab1_e35c_59e3,
    0x8c49_833d_53bb_8085,
    0x0216_d0b1_7f4e_44a5,
];

/// `2^768 mod p`
const R3: [u64; 4] = [
    0x5e94_d8e1_b4bf_0040,
    0x2a48_9cbe_1cfb_b6b8,
    0x893c_c664_a19f_cfed,
    0x0cf8_594b_7fcc_657c,
];

/// `-p^{-1} mod 2^64`
const INV: u64 = 0xc2e1_f593_efff_ffff;

/// Decimal digits of the modulus, for error messages and docs.
pub const MODULUS_DECIMAL: &str =
    "21888242871839275222246405745257275088548364400416034343698204186575808495617";

#[inline(always)]
const fn adc(a: u64, b: u64, carry: u64) -> (u64, u64) {
    let t = (a as u128) + (b as u128) + (carry as u128);
    (t as u64, (t >> 64) as u64)
}

/// `a - b - borrow`, borrow in {0, 1}.
#[inline(always)]
const fn sbb(a: u64, b: u64, borrow: u64) -> (u64, u64) {
    let t = (a as u128).wrapping_sub((b as u128) + (borrow as u128));
    (t as u64, ((t >> 64) as u64) & 1)
}

/// `a + b * c + carry`
#[inline(always)]
const fn mac(a: u64, b: u64, c: u64, carry: u64) -> (u64, u64) {
    let t = (a as u128) + (b as u128) * (c as u128) + (carry as u128);
    (t as u64, (t >> 64) as u64)
}

/// Subtracts the modulus once if `v >= p`. Requires `v < 2p`.
#[inline]
const fn reduce_once(v: [u64; 4]) -> [u64; 4] {
    let (d0, b) = sbb(v[0], MODULUS[0], 0);
    let (d1, b) = sbb(v[1], MODULUS[1], b);
    let (d2, b) = sbb(v[2], MODULUS[2], b);
    let (d3, b) = sbb(v[3], MODULUS[3], b);
    if b == 1 {
        v
    } else {
        [d0, d1, d2, d3]
    }
}

const fn lt_modulus(v: &[u64; 4]) -> bool {
    let mut i = 4;
    while i > 0 {
        i -= 1;
        if v[i] < MODULUS[i] {
            return true;
        }
        if v[i] > MODULUS[i] {
            return false;
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
#[inline]
const fn montgomery_reduce(
    r0: u64,
    r1: u64,
    r2: u64,
    r3: u64,
    r4: u64,
    r5: u64,
    r6: u64,
    r7: u64,
) -> [u64; 4] {
    let k = r0.wrapping_mul(INV);
    let (_, carry) = mac(r0, k, MODULUS[0], 0);
    let (r1, carry) = mac(r1, k, MODULUS[1], carry);
    let (r2, carry) = mac(r2, k, MODULUS[2], carry);
    let (r3, carry) = mac(r3, k, MODULUS[3], carry);
    let (r4, carry2) = adc(r4, 0, carry);

    let k = r1.wrapping_mul(INV);
    let (_, carry) = mac(r1, k, MODULUS[0], 0);
    let (r2, carry) = mac(r2, k, MODULUS[1], carry);
    let (r3, carry) = mac(r3, k, MODULUS[2], carry);
    let (r4, carry) = mac(r4, k, MODULUS[3], carry);
    let (r5, carry2) = adc(r5, carry2, carry);

    let k = r2.wrapping_mul(INV);
    let (_, carry) = mac(r2, k, MODULUS[0], 0);
    let (r3, carry) = mac(r3, k, MODULUS[1], carry);
    let (r4, carry) = mac(r4, k, MODULUS[2], carry);
    let (r5, carry) = mac(r5, k, MODULUS[3], carry);
    let (r6, carry2) = adc(r6, carry2, carry);

    let k = r3.wrapping_mul(INV);
    let (_, carry) = mac(r3, k, MODULUS[0], 0);
    let (r4, carry) = mac(r4, k, MODULUS[1], carry);
    let (r5, carry) = mac(r5, k, MODULUS[2], carry);
    let (r6, carry) = mac(r6, k, MODULUS[3], carry);
    let (r7, _) = adc(r7, carry2, carry);

    // p < 2^254, so the intermediate stays below 2p and fits in four limbs.
    reduce_once([r4, r5, r6, r7])
}

#[inline]
const fn mont_mul(a: &[u64; 4], b: &[u64; 4]) -> [u64; 4] {
    let (r0, carry) = mac(0, a[0], b[0], 0);
    let (r1, carry) = mac(0, a[0], b[1], carry);
    let (r2, carry) = mac(0, a[0], b[2], carry);
    let (r3, r4) = mac(0, a[0], b[3], carry);

    let (r1, carry) = mac(r1, a[1], b[0], 0);
    let (r2, carry) = mac(r2, a[1], b[1], carry);
    let (r3, carry) = mac(r3, a[1], b[2], carry);
    let (r4, r5) = mac(r4, a[1], b[3], carry);

    let (r2, carry) = mac(r2, a[2], b[0], 0);
    let (r3, carry) = mac(r3, a[2], b[1], carry);
    let (r4, carry) = mac(r4, a[2], b[2], carry);
    let (r5, r6) = mac(r5, a[2], b[3], carry);

    let (r3, carry) = mac(r3, a[3], b[0], 0);
    let (r4, carry) = mac(r4, a[3], b[1], carry);
    let (r5, carry) = mac(r5, a[3], b[2], carry);
    let (r6, r7) = mac(r6, a[3], b[3], carry);

    montgomery_reduce(r0, r1, r2, r3, r4, r5, r6, r7)
}

/// An element of the BN254 scalar field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FieldElement([u64; 4]);

impl FieldElement {
    pub const ZERO: Self = FieldElement([0, 0, 0, 0]);
    pub const ONE: Self = FieldElement(R);

    /// Builds an element from canonical little-endian limbs. `None` if the
    /// value is not below the modulus.
    pub const fn from_canonical_limbs(limbs: [u64; 4]) -> Option<Self> {
        if lt_modulus(&limbs) {
            Some(FieldElement(mont_mul(&limbs, &R2)))
        } else {
            None
        }
    }

    pub const fn from_u64(v: u64) -> Self {
        FieldElement(mont_mul(&[v, 0, 0, 0], &R2))
    }

    pub const fn from_u128(v: u128) -> Self {
        FieldElement(mont_mul(&[v as u64, (v >> 64) as u64, 0, 0], &R2))
    }

    /// Reduces a 512-bit little-endian integer modulo `p`.
    pub fn from_u512(limbs: [u64; 8]) -> Self {
        // lo * R + hi * 2^256 * R, each brought into Montgomery form.
        let lo = mont_mul(&[limbs[0], limbs[1], limbs[2], limbs[3]], &R2);
        let hi = mont_mul(&[limbs[4], limbs[5], limbs[6], limbs[7]], &R3);
        FieldElement(lo) + FieldElement(hi)
    }

    /// Reduces 64 big-endian bytes modulo `p`.
    pub fn from_be_bytes_wide(bytes: &[u8; 64]) -> Self {
        let mut limbs = [0u64; 8];
        for (i, chunk) in bytes.rchunks_exact(8).enumerate() {
            limbs[i] = u64::from_be_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Self::from_u512(limbs)
    }

    /// Parses 32 big-endian bytes, rejecting non-canonical values.
    pub fn from_be_bytes(bytes: &[u8; 32]) -> Option<Self> {
        let mut limbs = [0u64; 4];
        for (i, chunk) in bytes.rchunks_exact(8).enumerate() {
            limbs[i] = u64::from_be_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Self::from_canonical_limbs(limbs)
    }

    /// Uniformly random element (64 bytes of entropy reduced mod `p`).
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Self::from_be_bytes_wide(&wide)
    }

    /// Canonical little-endian limbs.
    pub const fn to_canonical_limbs(&self) -> [u64; 4] {
        let v = &self.0;
        montgomery_reduce(v[0], v[1], v[2], v[3], 0, 0, 0, 0)
    }

    /// Canonical value as 32 big-endian bytes.
    pub fn to_be_bytes(&self) -> [u8; 32] {
        let limbs = self.to_canonical_limbs();
        let mut out = [0u8; 32];
        for (i, chunk) in out.rchunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&limbs[i].to_be_bytes());
        }
        out
    }

    /// Canonical value if it fits in 128 bits.
    pub fn to_u128(&self) -> Option<u128> {
        let l = self.to_canonical_limbs();
        if l[2] == 0 && l[3] == 0 {
            Some((l[0] as u128) | ((l[1] as u128) << 64))
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn square(&self) -> Self {
        *self * *self
    }

    pub fn double(&self) -> Self {
        *self + *self
    }

    /// Decimal string of the canonical representative.
    pub fn to_decimal(&self) -> String {
        let mut limbs = self.to_canonical_limbs();
        if limbs == [0; 4] {
            return String::from("0");
        }
        const CHUNK: u64 = 10_000_000_000_000_000_000; // 10^19
        let mut chunks: Vec<u64> = Vec::new();
        while limbs != [0; 4] {
            let mut rem: u128 = 0;
            for limb in limbs.iter_mut().rev() {
                let cur = (rem << 64) | (*limb as u128);
                *limb = (cur / CHUNK as u128) as u64;
                rem = cur % CHUNK as u128;
            }
            chunks.push(rem as u64);
        }
        let mut out = String::new();
        let mut iter = chunks.iter().rev();
        if let Some(first) = iter.next() {
            out.push_str(&alloc::format!("{first}"));
        }
        for chunk in iter {
            out.push_str(&alloc::format!("{chunk:019}"));
        }
        out
    }

    /// Parses a canonical decimal string: ASCII digits only, no sign, no
    /// leading zeros, value below the modulus.
    pub fn from_decimal(s: &str) -> Result<Self, Error> {
        let bytes = s.as_bytes();
        if bytes.is_empty() || (bytes.len() > 1 && bytes[0] == b'0') {
            return Err(Error::InvalidFieldElement);
        }
        let mut limbs = [0u64; 4];
        for &c in bytes {
            if !c.is_ascii_digit() {
                return Err(Error::InvalidFieldElement);
            }
            let mut carry = (c - b'0') as u128;
            for limb in limbs.iter_mut() {
                let t = (*limb as u128) * 10 + carry;
                *limb = t as u64;
                carry = t >> 64;
            }
            if carry != 0 {
                return Err(Error::InvalidFieldElement);
            }
        }
        Self::from_canonical_limbs(limbs).ok_or(Error::InvalidFieldElement)
    }
}

impl Add for FieldElement {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (d0, c) = adc(self.0[0], rhs.0[0], 0);
        let (d1, c) = adc(self.0[1], rhs.0[1], c);
        let (d2, c) = adc(self.0[2], rhs.0[2], c);
        let (d3, _) = adc(self.0[3], rhs.0[3], c);
        FieldElement(reduce_once([d0, d1, d2, d3]))
    }
}

impl Sub for FieldElement {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let (d0, b) = sbb(self.0[0], rhs.0[0], 0);
        let (d1, b) = sbb(self.0[1], rhs.0[1], b);
        let (d2, b) = sbb(self.0[2], rhs.0[2], b);
        let (d3, b) = sbb(self.0[3], rhs.0[3], b);
        if b == 0 {
            return FieldElement([d0, d1, d2, d3]);
        }
        let (d0, c) = adc(d0, MODULUS[0], 0);
        let (d1, c) = adc(d1, MODULUS[1], c);
        let (d2, c) = adc(d2, MODULUS[2], c);
        let (d3, _) = adc(d3, MODULUS[3], c);
        FieldElement([d0, d1, d2, d3])
    }
}

impl Neg for FieldElement {
    type Output = Self;

    fn neg(self) -> Self {
        FieldElement::ZERO - self
    }
}

impl Mul for FieldElement {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        FieldElement(mont_mul(&self.0, &rhs.0))
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElement({})", self.to_decimal())
    }
}

impl FromStr for FieldElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::from_decimal(s)
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal())
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::from_decimal(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn modulus() -> BigUint {
        MODULUS_DECIMAL.parse().unwrap()
    }

    fn to_big(x: &FieldElement) -> BigUint {
        BigUint::from_bytes_be(&x.to_be_bytes())
    }

    fn from_big(x: &BigUint) -> FieldElement {
        let mut buf = [0u8; 32];
        let b = x.to_bytes_be();
        buf[32 - b.len()..].copy_from_slice(&b);
        FieldElement::from_be_bytes(&buf).unwrap()
    }

    #[test]
    fn modulus_limbs_match_decimal() {
        let mut bytes = [0u8; 32];
        for (i, chunk) in bytes.rchunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&MODULUS[i].to_be_bytes());
        }
        assert_eq!(BigUint::from_bytes_be(&bytes), modulus());
        assert!(FieldElement::from_be_bytes(&bytes).is_none());
    }

    #[test]
    fn montgomery_constants() {
        let p = modulus();
        let limbs = |l: [u64; 4]| {
            let mut b = [0u8; 32];
            for (i, chunk) in b.rchunks_exact_mut(8).enumerate() {
                chunk.copy_from_slice(&l[i].to_be_bytes());
            }
            BigUint::from_bytes_be(&b)
        };
        assert_eq!(limbs(R), (BigUint::from(1u8) << 256) % &p);
        assert_eq!(limbs(R2), (BigUint::from(1u8) << 512) % &p);
        assert_eq!(limbs(R3), (BigUint::from(1u8) << 768) % &p);
        assert_eq!(MODULUS[0].wrapping_mul(INV), u64::MAX);
    }

    #[test]
    fn add_identity_and_wraparound() {
        let x = FieldElement::from_u64(12345);
        assert_eq!(FieldElement::ZERO + x, x);
        let p_minus_one = from_big(&(modulus() - 1u8));
        assert_eq!(p_minus_one + FieldElement::ONE, FieldElement::ZERO);
        assert_eq!(-FieldElement::ONE, p_minus_one);
    }

    #[test]
    fn mul_identity_and_annihilator() {
        let x = FieldElement::from_u128(0xdead_beef_cafe_babe_0123_4567_89ab_cdef);
        assert_eq!(FieldElement::ONE * x, x);
        assert_eq!(FieldElement::ZERO * x, FieldElement::ZERO);
    }

    #[test]
    fn decimal_round_trip_edges() {
        assert_eq!(FieldElement::ZERO.to_decimal(), "0");
        assert_eq!(FieldElement::from_u64(32).to_decimal(), "32");
        let big = from_big(&(modulus() - 1u8));
        assert_eq!(big.to_decimal(), (modulus() - 1u8).to_string());
        assert_eq!(FieldElement::from_decimal(&big.to_decimal()).unwrap(), big);
        assert_eq!(
            FieldElement::from_decimal("10000000000000000000").unwrap(),
            FieldElement::from_u128(10_000_000_000_000_000_000)
        );
    }

    #[test]
    fn decimal_rejects_non_canonical() {
        for bad in ["", "01", "-1", "+1", "1a", " 1", MODULUS_DECIMAL] {
            assert!(FieldElement::from_decimal(bad).is_err(), "{bad:?}");
        }
        let overflow = "1".repeat(90);
        assert!(FieldElement::from_decimal(&overflow).is_err());
    }

    #[test]
    fn wide_reduction_matches_bigint() {
        let bytes = [0xffu8; 64];
        let expected = BigUint::from_bytes_be(&bytes) % modulus();
        assert_eq!(to_big(&FieldElement::from_be_bytes_wide(&bytes)), expected);
    }

    fn arb_element() -> impl Strategy<Value = FieldElement> {
        prop::array::uniform32(any::<u8>()).prop_map(|b| {
            let mut wide = [0u8; 64];
            wide[32..].copy_from_slice(&b);
            FieldElement::from_be_bytes_wide(&wide)
        })
    }

    proptest! {
        #[test]
        fn add_sub_mul_match_bigint(a in arb_element(), b in arb_element()) {
            let p = modulus();
            let (x, y) = (to_big(&a), to_big(&b));
            prop_assert_eq!(to_big(&(a + b)), (&x + &y) % &p);
            prop_assert_eq!(to_big(&(a * b)), (&x * &y) % &p);
            prop_assert_eq!(to_big(&(a - b)), (&x + &p - &y) % &p);
        }

        #[test]
        fn decimal_round_trip(a in arb_element()) {
            let s = a.to_decimal();
            prop_assert_eq!(&s, &to_big(&a).to_string());
            prop_assert_eq!(FieldElement::from_decimal(&s).unwrap(), a);
        }
    }
}
