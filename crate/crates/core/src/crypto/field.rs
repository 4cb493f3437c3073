//! Fixed-width 256-bit integers and Montgomery arithmetic modulo an odd
//! modulus below 2^256.
//!
//! The same code serves the 5-bit toy field and 256-bit standard curves, so
//! nothing here assumes the modulus has a special shape.

use std::cmp::Ordering;
use std::fmt;

/// Unsigned 256-bit integer, little-endian 64-bit limbs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U256(pub [u64; 4]);

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);

    pub const fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    /// Parses a big-endian hex string of at most 64 digits.
    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.trim_start_matches("0x");
        if s.is_empty() || s.len() > 64 {
            return None;
        }
        let mut limbs = [0u64; 4];
        for (i, c) in s.bytes().rev().enumerate() {
            let d = (c as char).to_digit(16)? as u64;
            limbs[i / 16] |= d << ((i % 16) * 4);
        }
        Some(U256(limbs))
    }

    /// Reads a big-endian byte string of at most 32 bytes.
    pub fn from_be_slice(bytes: &[u8]) -> Option<Self> {
        if bytes.len() > 32 {
            return None;
        }
        let mut limbs = [0u64; 4];
        for (i, b) in bytes.iter().rev().enumerate() {
            limbs[i / 8] |= (*b as u64) << ((i % 8) * 8);
        }
        Some(U256(limbs))
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, limb) in self.0.iter().enumerate() {
            out[24 - 8 * i..32 - 8 * i].copy_from_slice(&limb.to_be_bytes());
        }
        out
    }

    /// Big-endian encoding truncated to the low `width` bytes.
    pub fn to_be_width(&self, width: usize) -> Vec<u8> {
        self.to_be_bytes()[32 - width..].to_vec()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Position of the highest set bit plus one; zero for zero.
    pub fn bits(&self) -> usize {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i + 64 - self.0[i].leading_zeros() as usize;
            }
        }
        0
    }

    /// Wrapping addition, returning the carry out.
    pub fn adc(&self, other: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut carry = 0u64;
        for i in 0..4 {
            let t = self.0[i] as u128 + other.0[i] as u128 + carry as u128;
            out[i] = t as u64;
            carry = (t >> 64) as u64;
        }
        (U256(out), carry != 0)
    }

    /// Wrapping subtraction, returning the borrow out.
    pub fn sbb(&self, other: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut borrow = false;
        for i in 0..4 {
            let (d1, b1) = self.0[i].overflowing_sub(other.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            out[i] = d2;
            borrow = b1 || b2;
        }
        (U256(out), borrow)
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        let bytes = self.to_be_bytes();
        let first = bytes.iter().position(|b| *b != 0).unwrap_or(31);
        for b in &bytes[first..] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Montgomery context for an odd modulus `m` with R = 2^256.
///
/// Residues handed out by this type are in Montgomery form; convert with
/// [`Modulus::to_mont`] and [`Modulus::from_mont`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Modulus {
    m: U256,
    /// -m^{-1} mod 2^64
    inv: u64,
    /// R^2 mod m
    r2: U256,
    /// R mod m, i.e. one in Montgomery form
    one: U256,
}

impl Modulus {
    /// Returns `None` for an even modulus or one smaller than 3.
    pub fn new(m: U256) -> Option<Self> {
        if m.0[0] & 1 == 0 || m < U256::from_u64(3) {
            return None;
        }
        // Newton iteration for m^{-1} mod 2^64; each step doubles the correct bits.
        let mut x: u64 = 1;
        for _ in 0..6 {
            x = x.wrapping_mul(2u64.wrapping_sub(m.0[0].wrapping_mul(x)));
        }
        let inv = x.wrapping_neg();

        let mut ctx = Modulus { m, inv, r2: U256::ZERO, one: U256::ZERO };
        let mut acc = U256::ONE;
        for _ in 0..256 {
            acc = ctx.add(&acc, &acc);
        }
        ctx.one = acc;
        for _ in 0..256 {
            acc = ctx.add(&acc, &acc);
        }
        ctx.r2 = acc;
        Some(ctx)
    }

    pub fn value(&self) -> &U256 {
        &self.m
    }

    /// Modular addition of two values already below the modulus.
    /// Works identically on canonical and Montgomery representatives.
    pub fn add(&self, a: &U256, b: &U256) -> U256 {
        let (sum, carry) = a.adc(b);
        if carry || sum >= self.m {
            sum.sbb(&self.m).0
        } else {
            sum
        }
    }

    pub fn sub(&self, a: &U256, b: &U256) -> U256 {
        let (diff, borrow) = a.sbb(b);
        if borrow {
            diff.adc(&self.m).0
        } else {
            diff
        }
    }

    pub fn neg(&self, a: &U256) -> U256 {
        if a.is_zero() {
            U256::ZERO
        } else {
            self.m.sbb(a).0
        }
    }

    /// Montgomery product a·b·R^{-1} mod m (CIOS). Requires a·b < m·R.
    pub fn mul(&self, a: &U256, b: &U256) -> U256 {
        let m = &self.m.0;
        let mut t = [0u64; 6];
        for i in 0..4 {
            let mut carry = 0u64;
            for j in 0..4 {
                let uv = t[j] as u128 + a.0[j] as u128 * b.0[i] as u128 + carry as u128;
                t[j] = uv as u64;
                carry = (uv >> 64) as u64;
            }
            let uv = t[4] as u128 + carry as u128;
            t[4] = uv as u64;
            t[5] = (uv >> 64) as u64;

            let q = t[0].wrapping_mul(self.inv);
            let uv = t[0] as u128 + q as u128 * m[0] as u128;
            let mut carry = (uv >> 64) as u64;
            for j in 1..4 {
                let uv = t[j] as u128 + q as u128 * m[j] as u128 + carry as u128;
                t[j - 1] = uv as u64;
                carry = (uv >> 64) as u64;
            }
            let uv = t[4] as u128 + carry as u128;
            t[3] = uv as u64;
            t[4] = t[5] + (uv >> 64) as u64;
        }
        let r = U256([t[0], t[1], t[2], t[3]]);
        if t[4] != 0 || r >= self.m {
            r.sbb(&self.m).0
        } else {
            r
        }
    }

    pub fn square(&self, a: &U256) -> U256 {
        self.mul(a, a)
    }

    /// Converts any 256-bit integer into Montgomery form, reducing it first.
    pub fn to_mont(&self, a: &U256) -> U256 {
        self.mul(a, &self.r2)
    }

    pub fn from_mont(&self, a: &U256) -> U256 {
        self.mul(a, &U256::ONE)
    }

    /// Canonical residue of an arbitrary 256-bit integer.
    pub fn reduce(&self, a: &U256) -> U256 {
        self.from_mont(&self.to_mont(a))
    }

    pub fn one(&self) -> U256 {
        self.one
    }

    /// Montgomery-form exponentiation by a canonical exponent.
    pub fn pow(&self, base: &U256, exp: &U256) -> U256 {
        let mut acc = self.one;
        for i in (0..exp.bits()).rev() {
            acc = self.square(&acc);
            if exp.bit(i) {
                acc = self.mul(&acc, base);
            }
        }
        acc
    }

    /// Inverse of a Montgomery-form value via Fermat; only valid for a prime
    /// modulus. Zero maps to zero.
    pub fn invert(&self, a: &U256) -> U256 {
        let exp = self.m.sbb(&U256::from_u64(2)).0;
        self.pow(a, &exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    const P256: &str = "ffffffff00000001000000000000000000000000ffffffffffffffffffffffff";

    fn big(x: &U256) -> BigUint {
        BigUint::from_bytes_be(&x.to_be_bytes())
    }

    fn arb_u256() -> impl Strategy<Value = U256> {
        any::<[u64; 4]>().prop_map(U256)
    }

    #[test]
    fn hex_and_bytes_agree() {
        let x = U256::from_hex(P256).unwrap();
        assert_eq!(x.bits(), 256);
        assert_eq!(U256::from_be_slice(&x.to_be_bytes()), Some(x));
        assert_eq!(U256::from_hex("11").unwrap(), U256::from_u64(17));
        assert_eq!(U256::from_u64(17).bits(), 5);
        assert_eq!(U256::from_u64(17).to_be_width(1), vec![17]);
        assert!(U256::from_hex("").is_none());
        assert!(U256::from_be_slice(&[0u8; 33]).is_none());
    }

    #[test]
    fn even_modulus_rejected() {
        assert!(Modulus::new(U256::from_u64(16)).is_none());
        assert!(Modulus::new(U256::from_u64(1)).is_none());
    }

    #[test]
    fn toy_field_matches_small_arithmetic() {
        let f = Modulus::new(U256::from_u64(17)).unwrap();
        for a in 0..17u64 {
            for b in 0..17u64 {
                let am = f.to_mont(&U256::from_u64(a));
                let bm = f.to_mont(&U256::from_u64(b));
                assert_eq!(f.from_mont(&f.mul(&am, &bm)), U256::from_u64(a * b % 17));
                assert_eq!(f.add(&U256::from_u64(a), &U256::from_u64(b)), U256::from_u64((a + b) % 17));
                assert_eq!(f.sub(&U256::from_u64(a), &U256::from_u64(b)), U256::from_u64((a + 17 - b) % 17));
            }
            if a != 0 {
                let am = f.to_mont(&U256::from_u64(a));
                let inv = f.from_mont(&f.invert(&am)).0[0];
                assert_eq!(a * inv % 17, 1);
            }
        }
    }

    proptest! {
        #[test]
        fn p256_mul_matches_bigint(a in arb_u256(), b in arb_u256()) {
            let m = U256::from_hex(P256).unwrap();
            let f = Modulus::new(m).unwrap();
            let prod = f.from_mont(&f.mul(&f.to_mont(&a), &f.to_mont(&b)));
            let expect = big(&a) * big(&b) % big(&m);
            prop_assert_eq!(big(&prod), expect);
        }

        #[test]
        fn odd_modulus_add_sub_reduce(m in arb_u256(), a in arb_u256(), b in arb_u256()) {
            let mut m = m;
            m.0[0] |= 1;
            m.0[3] |= 1 << 40;
            let f = Modulus::new(m).unwrap();
            let (ra, rb) = (f.reduce(&a), f.reduce(&b));
            prop_assert_eq!(big(&ra), big(&a) % big(&m));
            let bm = big(&m);
            prop_assert_eq!(big(&f.add(&ra, &rb)), (big(&ra) + big(&rb)) % &bm);
            prop_assert_eq!(big(&f.sub(&ra, &rb)), (big(&ra) + &bm - big(&rb)) % &bm);
            let prod = f.from_mont(&f.mul(&f.to_mont(&a), &f.to_mont(&b)));
            prop_assert_eq!(big(&prod), big(&a) * big(&b) % &bm);
        }
    }
}
