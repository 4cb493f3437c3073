//! Short-Weierstrass curves y² = x³ + ax + b over a prime field, ECDH.
//!
//! Public points are affine with canonical coordinates. Scalar
//! multiplication runs in Jacobian coordinates internally and does not try
//! to be constant time.

use rand::RngCore;

use super::field::{Modulus, U256};
use super::hash::{count_curve_op, hash, HASH_LEN};
use super::CryptoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Infinity,
    Affine { x: U256, y: U256 },
}

impl CurvePoint {
    pub fn affine(x: u64, y: u64) -> Self {
        CurvePoint::Affine { x: U256::from_u64(x), y: U256::from_u64(y) }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }
}

/// Built-in parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveId {
    /// y² = x³ + 2x + 2 over F₁₇, G = (5, 1), order 19.
    Toy17,
    /// NIST P-256 / secp256r1.
    Std256,
}

impl CurveId {
    pub fn params(self) -> CurveParams {
        match self {
            CurveId::Toy17 => CurveParams::toy17(),
            CurveId::Std256 => CurveParams::std256(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveId::Toy17 => "toy17",
            CurveId::Std256 => "std256",
        }
    }
}

impl std::str::FromStr for CurveId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toy17" => Ok(CurveId::Toy17),
            "std256" => Ok(CurveId::Std256),
            other => Err(format!("unknown curve '{other}' (expected toy17 or std256)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveParams {
    pub p: U256,
    pub a: U256,
    pub b: U256,
    pub g: CurvePoint,
    pub n: U256,
    pub h: u64,
    field: Modulus,
    order: Modulus,
    a_mont: U256,
    b_mont: U256,
    width: usize,
}

impl CurveParams {
    /// Validates the discriminant, that `g` lies on the curve and that
    /// n·g is the identity. Both `p` and `n` must be odd primes; primality
    /// itself is not checked.
    pub fn new(p: U256, a: U256, b: U256, g: (U256, U256), n: U256, h: u64) -> Result<Self, CryptoError> {
        let field = Modulus::new(p).ok_or(CryptoError::InvalidCurve("modulus must be odd and at least 3"))?;
        let order = Modulus::new(n).ok_or(CryptoError::InvalidCurve("group order must be odd and at least 3"))?;
        if a >= p || b >= p || g.0 >= p || g.1 >= p {
            return Err(CryptoError::InvalidCurve("coefficients must be reduced mod p"));
        }
        let a_mont = field.to_mont(&a);
        let b_mont = field.to_mont(&b);
        let four = field.to_mont(&U256::from_u64(4));
        let twenty_seven = field.to_mont(&U256::from_u64(27));
        let a3 = field.mul(&field.square(&a_mont), &a_mont);
        let disc = field.add(&field.mul(&four, &a3), &field.mul(&twenty_seven, &field.square(&b_mont)));
        if disc.is_zero() {
            return Err(CryptoError::InvalidCurve("singular curve: 4a³ + 27b² ≡ 0"));
        }
        let width = p.bits().div_ceil(8);
        let curve = CurveParams {
            p,
            a,
            b,
            g: CurvePoint::Affine { x: g.0, y: g.1 },
            n,
            h,
            field,
            order,
            a_mont,
            b_mont,
            width,
        };
        if !curve.on_curve(&curve.g) {
            return Err(CryptoError::InvalidCurve("generator is not on the curve"));
        }
        if !curve.mul_unchecked(&n, &curve.g).is_infinity() {
            return Err(CryptoError::InvalidCurve("n·G is not the identity"));
        }
        Ok(curve)
    }

    pub fn toy17() -> Self {
        let u = U256::from_u64;
        Self::new(u(17), u(2), u(2), (u(5), u(1)), u(19), 1).expect("toy curve constants")
    }

    pub fn std256() -> Self {
        let h = |s| U256::from_hex(s).expect("curve constant");
        Self::new(
            h("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff"),
            h("ffffffff00000001000000000000000000000000fffffffffffffffffffffffc"),
            h("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
            (
                h("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
                h("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
            ),
            h("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551"),
            1,
        )
        .expect("P-256 constants")
    }

    /// Byte width of an encoded field element or scalar.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn order_modulus(&self) -> &Modulus {
        &self.order
    }

    /// Checks the curve equation; counted as one curve operation.
    pub fn is_on_curve(&self, pt: &CurvePoint) -> bool {
        count_curve_op();
        self.on_curve(pt)
    }

    fn on_curve(&self, pt: &CurvePoint) -> bool {
        match pt {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                if *x >= self.p || *y >= self.p {
                    return false;
                }
                let f = &self.field;
                let (xm, ym) = (f.to_mont(x), f.to_mont(y));
                let lhs = f.square(&ym);
                let rhs = f.add(&f.add(&f.mul(&f.square(&xm), &xm), &f.mul(&self.a_mont, &xm)), &self.b_mont);
                lhs == rhs
            }
        }
    }

    /// 0x00 for the identity, otherwise 0x04 ‖ x ‖ y big-endian at [`Self::width`].
    pub fn encode_point(&self, pt: &CurvePoint) -> Vec<u8> {
        match pt {
            CurvePoint::Infinity => vec![0x00],
            CurvePoint::Affine { x, y } => {
                let mut out = Vec::with_capacity(1 + 2 * self.width);
                out.push(0x04);
                out.extend_from_slice(&x.to_be_width(self.width));
                out.extend_from_slice(&y.to_be_width(self.width));
                out
            }
        }
    }

    pub fn encoded_point_len(&self, tag: u8) -> Option<usize> {
        match tag {
            0x00 => Some(1),
            0x04 => Some(1 + 2 * self.width),
            _ => None,
        }
    }

    /// Structural decode: coordinates must be below p, but the curve
    /// equation is checked where the point is used, not here.
    pub fn decode_point(&self, bytes: &[u8]) -> Result<CurvePoint, CryptoError> {
        match bytes.first() {
            Some(0x00) if bytes.len() == 1 => Ok(CurvePoint::Infinity),
            Some(0x04) if bytes.len() == 1 + 2 * self.width => {
                let x = U256::from_be_slice(&bytes[1..1 + self.width]).ok_or(CryptoError::MalformedPoint)?;
                let y = U256::from_be_slice(&bytes[1 + self.width..]).ok_or(CryptoError::MalformedPoint)?;
                if x >= self.p || y >= self.p {
                    return Err(CryptoError::MalformedPoint);
                }
                Ok(CurvePoint::Affine { x, y })
            }
            _ => Err(CryptoError::MalformedPoint),
        }
    }

    fn to_jacobian(&self, pt: &CurvePoint) -> Jacobian {
        match pt {
            CurvePoint::Infinity => Jacobian::infinity(),
            CurvePoint::Affine { x, y } => {
                Jacobian { x: self.field.to_mont(x), y: self.field.to_mont(y), z: self.field.one() }
            }
        }
    }

    fn to_affine(&self, pt: &Jacobian) -> CurvePoint {
        if pt.z.is_zero() {
            return CurvePoint::Infinity;
        }
        let f = &self.field;
        let zinv = f.invert(&pt.z);
        let zinv2 = f.square(&zinv);
        let x = f.mul(&pt.x, &zinv2);
        let y = f.mul(&pt.y, &f.mul(&zinv2, &zinv));
        CurvePoint::Affine { x: f.from_mont(&x), y: f.from_mont(&y) }
    }

    // dbl-2007-bl, valid for any a.
    fn double(&self, pt: &Jacobian) -> Jacobian {
        let f = &self.field;
        if pt.z.is_zero() || pt.y.is_zero() {
            return Jacobian::infinity();
        }
        let xx = f.square(&pt.x);
        let yy = f.square(&pt.y);
        let yyyy = f.square(&yy);
        let zz = f.square(&pt.z);
        let t = f.square(&f.add(&pt.x, &yy));
        let s = f.sub(&f.sub(&t, &xx), &yyyy);
        let s = f.add(&s, &s);
        let m = f.add(&f.add(&xx, &xx), &xx);
        let m = f.add(&m, &f.mul(&self.a_mont, &f.square(&zz)));
        let x3 = f.sub(&f.square(&m), &f.add(&s, &s));
        let y8 = f.add(&yyyy, &yyyy);
        let y8 = f.add(&y8, &y8);
        let y8 = f.add(&y8, &y8);
        let y3 = f.sub(&f.mul(&m, &f.sub(&s, &x3)), &y8);
        let yz = f.add(&pt.y, &pt.z);
        let z3 = f.sub(&f.sub(&f.square(&yz), &yy), &zz);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    // add-2007-bl with the doubling and inverse cases routed explicitly.
    fn add(&self, p1: &Jacobian, p2: &Jacobian) -> Jacobian {
        if p1.z.is_zero() {
            return *p2;
        }
        if p2.z.is_zero() {
            return *p1;
        }
        let f = &self.field;
        let z1z1 = f.square(&p1.z);
        let z2z2 = f.square(&p2.z);
        let u1 = f.mul(&p1.x, &z2z2);
        let u2 = f.mul(&p2.x, &z1z1);
        let s1 = f.mul(&p1.y, &f.mul(&p2.z, &z2z2));
        let s2 = f.mul(&p2.y, &f.mul(&p1.z, &z1z1));
        let h = f.sub(&u2, &u1);
        let r = f.sub(&s2, &s1);
        if h.is_zero() {
            return if r.is_zero() { self.double(p1) } else { Jacobian::infinity() };
        }
        let r = f.add(&r, &r);
        let h2 = f.add(&h, &h);
        let i = f.square(&h2);
        let j = f.mul(&h, &i);
        let v = f.mul(&u1, &i);
        let x3 = f.sub(&f.sub(&f.square(&r), &j), &f.add(&v, &v));
        let s1j = f.mul(&s1, &j);
        let y3 = f.sub(&f.mul(&r, &f.sub(&v, &x3)), &f.add(&s1j, &s1j));
        let zs = f.add(&p1.z, &p2.z);
        let z3 = f.mul(&f.sub(&f.sub(&f.square(&zs), &z1z1), &z2z2), &h);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn mul_unchecked(&self, k: &U256, pt: &CurvePoint) -> CurvePoint {
        let base = self.to_jacobian(pt);
        let mut acc = Jacobian::infinity();
        for i in (0..k.bits()).rev() {
            acc = self.double(&acc);
            if k.bit(i) {
                acc = self.add(&acc, &base);
            }
        }
        self.to_affine(&acc)
    }
}

#[derive(Clone, Copy, Debug)]
struct Jacobian {
    x: U256,
    y: U256,
    z: U256,
}

impl Jacobian {
    fn infinity() -> Self {
        Jacobian { x: U256::ZERO, y: U256::ZERO, z: U256::ZERO }
    }
}

/// Integer modulo the group order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Scalar(U256);

impl Scalar {
    pub fn new(value: U256, curve: &CurveParams) -> Self {
        Scalar(curve.order.reduce(&value))
    }

    pub fn from_u64(value: u64, curve: &CurveParams) -> Self {
        Self::new(U256::from_u64(value), curve)
    }

    pub fn value(&self) -> &U256 {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Uniform in [1, n−1] by rejection sampling.
    pub fn random_nonzero<R: RngCore + ?Sized>(rng: &mut R, curve: &CurveParams) -> Self {
        let bits = curve.n.bits();
        loop {
            let mut limbs = [0u64; 4];
            for (i, limb) in limbs.iter_mut().enumerate() {
                let lo = 64 * i;
                if lo >= bits {
                    break;
                }
                let v = rng.next_u64();
                *limb = if bits - lo >= 64 { v } else { v & ((1u64 << (bits - lo)) - 1) };
            }
            let candidate = U256(limbs);
            if !candidate.is_zero() && candidate < curve.n {
                return Scalar(candidate);
            }
        }
    }

    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        self.0.to_be_width(curve.width())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub sk: Scalar,
    pub pk: CurvePoint,
}

impl KeyPair {
    /// Builds the pair for a given private scalar, which must be nonzero.
    pub fn from_scalar(sk: Scalar, curve: &CurveParams) -> Result<Self, CryptoError> {
        if sk.is_zero() {
            return Err(CryptoError::ZeroScalar);
        }
        let pk = scalar_mul(&sk, &curve.g, curve)?;
        Ok(KeyPair { sk, pk })
    }
}

/// Hashed x-coordinate of the ECDH point.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SharedSecret(pub [u8; HASH_LEN]);

impl std::fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

/// Group law in affine coordinates.
pub fn point_add(p1: &CurvePoint, p2: &CurvePoint, curve: &CurveParams) -> Result<CurvePoint, CryptoError> {
    count_curve_op();
    if !curve.on_curve(p1) || !curve.on_curve(p2) {
        return Err(CryptoError::PointNotOnCurve);
    }
    let (x1, y1, x2, y2) = match (p1, p2) {
        (CurvePoint::Infinity, q) | (q, CurvePoint::Infinity) => return Ok(*q),
        (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
    };
    let f = &curve.field;
    let (x1, y1, x2, y2) = (f.to_mont(x1), f.to_mont(y1), f.to_mont(x2), f.to_mont(y2));
    let lambda = if x1 == x2 {
        if y1 != y2 || y1.is_zero() {
            return Ok(CurvePoint::Infinity);
        }
        // (3x² + a) / 2y
        let x_sq = f.square(&x1);
        let num = f.add(&f.add(&f.add(&x_sq, &x_sq), &x_sq), &curve.a_mont);
        f.mul(&num, &f.invert(&f.add(&y1, &y1)))
    } else {
        f.mul(&f.sub(&y2, &y1), &f.invert(&f.sub(&x2, &x1)))
    };
    let x3 = f.sub(&f.sub(&f.square(&lambda), &x1), &x2);
    let y3 = f.sub(&f.mul(&lambda, &f.sub(&x1, &x3)), &y1);
    Ok(CurvePoint::Affine { x: f.from_mont(&x3), y: f.from_mont(&y3) })
}

/// Additive inverse of a point.
pub fn point_neg(pt: &CurvePoint, curve: &CurveParams) -> CurvePoint {
    match pt {
        CurvePoint::Infinity => CurvePoint::Infinity,
        CurvePoint::Affine { x, y } => CurvePoint::Affine { x: *x, y: curve.field.neg(y) },
    }
}

/// k·p by double-and-add.
pub fn scalar_mul(k: &Scalar, pt: &CurvePoint, curve: &CurveParams) -> Result<CurvePoint, CryptoError> {
    count_curve_op();
    if !curve.on_curve(pt) {
        return Err(CryptoError::PointNotOnCurve);
    }
    Ok(curve.mul_unchecked(&k.0, pt))
}

pub fn keypair_gen<R: RngCore + ?Sized>(rng: &mut R, curve: &CurveParams) -> KeyPair {
    let sk = Scalar::random_nonzero(rng, curve);
    KeyPair::from_scalar(sk, curve).expect("nonzero scalar times generator")
}

/// H(x-coordinate of sk·peer_pk), x encoded big-endian at the field width.
pub fn ecdh_shared(sk: &Scalar, peer_pk: &CurvePoint, curve: &CurveParams) -> Result<SharedSecret, CryptoError> {
    match scalar_mul(sk, peer_pk, curve)? {
        CurvePoint::Infinity => Err(CryptoError::IdentityPoint),
        CurvePoint::Affine { x, .. } => Ok(SharedSecret(hash(&[&x.to_be_width(curve.width())]))),
    }
}
