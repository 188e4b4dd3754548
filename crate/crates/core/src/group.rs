//! Prime-order subgroups of `Z_p^*`.
//!
//! A [`GroupParams`] fixes a prime `p`, a prime `q | p - 1` and two generators
//! `g`, `h` of the order-`q` subgroup. Ciphertext components are
//! [`GroupElement`]s of that subgroup and plaintexts live in the exponent
//! group `Z_q`, represented by [`Scalar`].
//!
//! Arithmetic is not constant time.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ops::{self, Op};

/// Miller-Rabin rounds used for every primality decision.
pub const PRIMALITY_ROUNDS: usize = 64;

const HASH_ATTEMPTS: u32 = 256;
const MAX_PRIME_SEARCH: usize = 4096;
const H_DOMAIN: &[u8] = b"blindtm/h-generator/v1";
const HASH_DOMAIN: &[u8] = b"blindtm/hash-to-subgroup/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("{0} is not prime")]
    NotPrime(&'static str),
    #[error("q does not divide p - 1")]
    OrderMismatch,
    #[error("invalid generator {0}: must lie in the order-q subgroup and differ from 1")]
    BadGenerator(&'static str),
    #[error("h does not match the value derived from (p, q, g)")]
    UnexpectedH,
    #[error("value out of range for modulus")]
    OutOfRange,
    #[error("value is not in the order-q subgroup")]
    NotInSubgroup,
    #[error("hash to subgroup failed after {0} attempts")]
    HashExhausted(u32),
    #[error("requested {0} bits; at least 16 are required")]
    TooFewBits(u64),
    #[error("parameter search for {0}-bit modulus exceeded its iteration cap")]
    GenerationFailed(u64),
    #[error("malformed hex: {0}")]
    BadHex(String),
}

/// Element of the exponent group `Z_q`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

/// Element of the order-`q` subgroup of `Z_p^*`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(BigUint);

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", self.0)
    }
}

/// Lowercase big-endian hex without leading zeros (`0` for zero).
pub fn to_hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

pub fn from_hex(s: &str) -> Result<BigUint, GroupError> {
    let canonical = !s.is_empty()
        && (s == "0" || !s.starts_with('0'))
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
    if !canonical {
        return Err(GroupError::BadHex(s.to_string()));
    }
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| GroupError::BadHex(s.to_string()))
}

#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: GroupElement,
    h: GroupElement,
    cofactor: BigUint,
    width: usize,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("p_bits", &self.p.bits())
            .field("q_bits", &self.q.bits())
            .field("fingerprint", &self.fingerprint())
            .finish()
    }
}

impl GroupParams {
    /// Validates `(p, q, g)` and derives `h` by hashing into the subgroup.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_9e0a);
        if !is_probable_prime(&p, PRIMALITY_ROUNDS, &mut rng) {
            return Err(GroupError::NotPrime("p"));
        }
        if !is_probable_prime(&q, PRIMALITY_ROUNDS, &mut rng) {
            return Err(GroupError::NotPrime("q"));
        }
        Self::assemble(p, q, g)
    }

    /// Validates a full parameter set, including that `h` is the derived one.
    pub fn with_h(p: BigUint, q: BigUint, g: BigUint, h: BigUint) -> Result<Self, GroupError> {
        let params = Self::new(p, q, g)?;
        if params.h.0 != h {
            return Err(GroupError::UnexpectedH);
        }
        Ok(params)
    }

    fn assemble(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        let p_minus_1 = &p - 1u32;
        let (cofactor, rem) = p_minus_1.div_rem(&q);
        if !rem.is_zero() {
            return Err(GroupError::OrderMismatch);
        }
        if g <= BigUint::one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(GroupError::BadGenerator("g"));
        }
        let h = derive_h(&p, &q, &cofactor, &g)?;
        let width = p.bits().div_ceil(8) as usize;
        Ok(GroupParams {
            p,
            q,
            g: GroupElement(g),
            h: GroupElement(h),
            cofactor,
            width,
        })
    }

    /// Searches for fresh parameters with a `bits`-bit modulus. Deterministic
    /// for a given RNG state.
    pub fn generate<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, GroupError> {
        if bits < 16 {
            return Err(GroupError::TooFewBits(bits));
        }
        let q_bits = subgroup_bits(bits);
        let lo = BigUint::one() << (bits - 1);
        let hi = BigUint::one() << bits;
        for _ in 0..MAX_PRIME_SEARCH {
            let q = random_prime(q_bits, rng);
            // p = k q + 1 with k even, lo <= p < hi
            let k_lo = (&lo - 1u32).div_ceil(&q);
            let k_hi = (&hi - 2u32) / &q;
            if k_lo > k_hi {
                continue;
            }
            for _ in 0..(4 * bits) {
                let mut k = rng.gen_biguint_range(&k_lo, &(&k_hi + 1u32));
                if k.is_odd() {
                    k += 1u32;
                    if k > k_hi {
                        continue;
                    }
                }
                let p = &k * &q + 1u32;
                if !is_probable_prime(&p, 1, rng) || !is_probable_prime(&p, PRIMALITY_ROUNDS, rng) {
                    continue;
                }
                let g = loop {
                    let a = rng.gen_biguint_range(&BigUint::from(2u32), &(&p - 1u32));
                    let g = a.modpow(&k, &p);
                    if !g.is_one() {
                        break g;
                    }
                };
                match Self::assemble(p, q.clone(), g) {
                    Ok(params) => return Ok(params),
                    Err(GroupError::HashExhausted(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
        Err(GroupError::GenerationFailed(bits))
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &GroupElement {
        &self.g
    }

    pub fn h(&self) -> &GroupElement {
        &self.h
    }

    /// Bit length of the modulus.
    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    /// Byte width of a fixed-width element encoding.
    pub fn element_width(&self) -> usize {
        self.width
    }

    /// SHA-256 over the canonical hex of `(p, q, g, h)`.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"blindtm/params/v1");
        for v in [&self.p, &self.q, &self.g.0, &self.h.0] {
            hasher.update(b":");
            hasher.update(to_hex(v).as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    /// Checks subgroup membership. Costs one exponentiation.
    pub fn contains(&self, x: &GroupElement) -> bool {
        ops::record(Op::Exp);
        !x.0.is_zero() && x.0 < self.p && x.0.modpow(&self.q, &self.p).is_one()
    }

    /// Wraps a raw value, rejecting anything outside the subgroup.
    pub fn element(&self, v: BigUint) -> Result<GroupElement, GroupError> {
        if v.is_zero() || v >= self.p {
            return Err(GroupError::OutOfRange);
        }
        let x = GroupElement(v);
        if !self.contains(&x) {
            return Err(GroupError::NotInSubgroup);
        }
        Ok(x)
    }

    pub fn element_from_hex(&self, s: &str) -> Result<GroupElement, GroupError> {
        self.element(from_hex(s)?)
    }

    /// Reduces `v` modulo `q`.
    pub fn scalar(&self, v: BigUint) -> Scalar {
        Scalar(v % &self.q)
    }

    pub fn scalar_u64(&self, v: u64) -> Scalar {
        self.scalar(BigUint::from(v))
    }

    pub fn scalar_from_hex(&self, s: &str) -> Result<Scalar, GroupError> {
        let v = from_hex(s)?;
        if v >= self.q {
            return Err(GroupError::OutOfRange);
        }
        Ok(Scalar(v))
    }

    pub fn exp(&self, base: &GroupElement, e: &Scalar) -> GroupElement {
        ops::record(Op::Exp);
        GroupElement(base.0.modpow(&e.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        ops::record(Op::Mul);
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        ops::record(Op::Inv);
        // subgroup elements are units mod p
        GroupElement(a.0.modinv(&self.p).expect("subgroup element is invertible"))
    }

    /// `g^e`.
    pub fn commit(&self, e: &Scalar) -> GroupElement {
        self.exp(&self.g, e)
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &self.q - &b.0) % &self.q)
    }

    pub fn scalar_neg(&self, a: &Scalar) -> Scalar {
        Scalar((&self.q - &a.0) % &self.q)
    }

    pub fn random_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar(rng.gen_biguint_below(&self.q))
    }

    /// Uniform over `[1, q)`.
    pub fn random_nonzero_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar(rng.gen_biguint_range(&BigUint::one(), &self.q))
    }

    /// Deterministically maps `data` to a non-identity subgroup element.
    pub fn hash_to_subgroup(&self, data: &[u8]) -> Result<GroupElement, GroupError> {
        ops::record(Op::Exp);
        hash_to_subgroup_raw(&self.p, &self.cofactor, HASH_DOMAIN, data, |_| true).map(GroupElement)
    }

    /// Fixed-width big-endian encoding of an element.
    pub fn element_bytes(&self, x: &GroupElement) -> Vec<u8> {
        let raw = x.0.to_bytes_be();
        let mut out = vec![0u8; self.width - raw.len()];
        out.extend_from_slice(&raw);
        out
    }
}

/// Subgroup order size used for a given modulus size.
fn subgroup_bits(bits: u64) -> u64 {
    if bits <= 264 {
        bits - 8
    } else {
        256
    }
}

fn derive_h(
    p: &BigUint,
    q: &BigUint,
    cofactor: &BigUint,
    g: &BigUint,
) -> Result<BigUint, GroupError> {
    let mut seed = Vec::new();
    for v in [p, q, g] {
        seed.extend_from_slice(to_hex(v).as_bytes());
        seed.push(b':');
    }
    hash_to_subgroup_raw(p, cofactor, H_DOMAIN, &seed, |h| h != g)
}

fn hash_to_subgroup_raw(
    p: &BigUint,
    cofactor: &BigUint,
    domain: &[u8],
    data: &[u8],
    accept: impl Fn(&BigUint) -> bool,
) -> Result<BigUint, GroupError> {
    // 128 extra bits keep the reduction mod p close to uniform
    let blocks = (p.bits() + 128).div_ceil(256) as u32;
    for counter in 0..HASH_ATTEMPTS {
        let mut wide = Vec::with_capacity(32 * blocks as usize);
        for block in 0..blocks {
            let mut hasher = Sha256::new();
            hasher.update(domain);
            hasher.update(counter.to_be_bytes());
            hasher.update(block.to_be_bytes());
            hasher.update(data);
            wide.extend_from_slice(&hasher.finalize());
        }
        let x = BigUint::from_bytes_be(&wide) % p;
        if x.is_zero() {
            continue;
        }
        let y = x.modpow(cofactor, p);
        if !y.is_one() && accept(&y) {
            return Ok(y);
        }
    }
    Err(GroupError::HashExhausted(HASH_ATTEMPTS))
}

const SMALL_PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Miller-Rabin with `rounds` random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for sp in SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn random_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        c.set_bit(0, true);
        // one round screens; the full count confirms
        if is_probable_prime(&c, 1, rng) && is_probable_prime(&c, PRIMALITY_ROUNDS, rng) {
            return c;
        }
    }
}
