//! Damgård's ElGamal over a [`GroupParams`] subgroup.
//!
//! Keys are `(x1, x2)` with public `(y1, y2) = (g^x1, g^x2)`. A ciphertext of
//! a group element `m` is `(g^r, y1^r, y2^r * m)`; decryption first checks the
//! tag `v == u^x1` and rejects otherwise. The scheme is multiplicatively
//! homomorphic: the componentwise product of two ciphertexts encrypts the
//! product of the plaintexts. Nothing verifies that two ciphertexts being
//! multiplied were produced under the same key.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::group::{GroupElement, GroupParams, Scalar};
use crate::ops::{self, BaseOp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DegError {
    #[error("ciphertext component is not a subgroup element")]
    Parse,
    #[error("ciphertext failed the validity check")]
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegPublicKey {
    pub y1: GroupElement,
    pub y2: GroupElement,
}

#[derive(Clone, PartialEq, Eq)]
pub struct DegSecretKey {
    pub x1: Scalar,
    pub x2: Scalar,
}

impl std::fmt::Debug for DegSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DegSecretKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegKeyPair {
    pub public: DegPublicKey,
    pub secret: DegSecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DegCiphertext {
    pub u: GroupElement,
    pub v: GroupElement,
    pub w: GroupElement,
}

impl DegKeyPair {
    pub fn generate<R: Rng + ?Sized>(params: &GroupParams, rng: &mut R) -> Self {
        ops::base_op(BaseOp::KeyGen, || {
            let x1 = params.random_nonzero_scalar(rng);
            let x2 = loop {
                let x2 = params.random_nonzero_scalar(rng);
                if x2 != x1 {
                    break x2;
                }
            };
            Self::from_secret_unchecked(params, x1, x2)
        })
    }

    /// Builds a key pair from fixed secrets. Fails if `x1 == x2`.
    pub fn from_secret(params: &GroupParams, x1: Scalar, x2: Scalar) -> Option<Self> {
        (x1 != x2).then(|| Self::from_secret_unchecked(params, x1, x2))
    }

    fn from_secret_unchecked(params: &GroupParams, x1: Scalar, x2: Scalar) -> Self {
        let public = DegPublicKey {
            y1: params.commit(&x1),
            y2: params.commit(&x2),
        };
        DegKeyPair {
            public,
            secret: DegSecretKey { x1, x2 },
        }
    }
}

impl DegPublicKey {
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        params: &GroupParams,
        msg: &GroupElement,
        rng: &mut R,
    ) -> DegCiphertext {
        let r = params.random_scalar(rng);
        self.encrypt_with(params, msg, &r)
    }

    /// Encryption with caller-chosen randomness.
    pub fn encrypt_with(&self, params: &GroupParams, msg: &GroupElement, r: &Scalar) -> DegCiphertext {
        ops::base_op(BaseOp::Encrypt, || DegCiphertext {
            u: params.commit(r),
            v: params.exp(&self.y1, r),
            w: params.mul(&params.exp(&self.y2, r), msg),
        })
    }

    /// Multiplies in a fresh encryption of the identity.
    pub fn rerandomize<R: Rng + ?Sized>(
        &self,
        params: &GroupParams,
        c: &DegCiphertext,
        rng: &mut R,
    ) -> DegCiphertext {
        let one = self.encrypt(params, &params.identity(), rng);
        hom_mul(params, c, &one)
    }
}

impl DegSecretKey {
    pub fn decrypt(&self, params: &GroupParams, c: &DegCiphertext) -> Result<GroupElement, DegError> {
        ops::base_op(BaseOp::Decrypt, || {
            if params.exp(&c.u, &self.x1) != c.v {
                return Err(DegError::Invalid);
            }
            let mask = params.exp(&c.u, &self.x2);
            Ok(params.mul(&c.w, &params.inv(&mask)))
        })
    }
}

/// Componentwise product; costs three multiplications.
pub fn hom_mul(params: &GroupParams, a: &DegCiphertext, b: &DegCiphertext) -> DegCiphertext {
    DegCiphertext {
        u: params.mul(&a.u, &b.u),
        v: params.mul(&a.v, &b.v),
        w: params.mul(&a.w, &b.w),
    }
}

/// Key pair bundled with the parameters it was generated under.
#[derive(Debug, Clone)]
pub struct Deg {
    pub params: Arc<GroupParams>,
    pub keys: DegKeyPair,
}

impl Deg {
    pub fn generate<R: Rng + ?Sized>(params: Arc<GroupParams>, rng: &mut R) -> Self {
        let keys = DegKeyPair::generate(&params, rng);
        Deg { params, keys }
    }

    pub fn encrypt<R: Rng + ?Sized>(&self, msg: &GroupElement, rng: &mut R) -> DegCiphertext {
        self.keys.public.encrypt(&self.params, msg, rng)
    }

    pub fn decrypt(&self, c: &DegCiphertext) -> Result<GroupElement, DegError> {
        self.keys.secret.decrypt(&self.params, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::toy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn powmod(b: u64, e: u64, m: u64) -> u64 {
        (0..e).fold(1, |acc, _| acc * b % m)
    }

    fn el(p: &GroupParams, v: u64) -> GroupElement {
        p.element(v.into()).unwrap()
    }

    #[test]
    fn toy_keys_match_oracle() {
        let p = toy::params();
        let kp = DegKeyPair::from_secret(&p, p.scalar_u64(3), p.scalar_u64(5)).unwrap();
        assert_eq!(powmod(2, 3, 23), 8);
        assert_eq!(powmod(2, 5, 23), 9);
        assert_eq!(kp.public.y1, el(&p, 8));
        assert_eq!(kp.public.y2, el(&p, 9));
        assert!(DegKeyPair::from_secret(&p, p.scalar_u64(3), p.scalar_u64(3)).is_none());
    }

    #[test]
    fn toy_encryption_matches_oracle() {
        let p = toy::params();
        let kp = DegKeyPair::from_secret(&p, p.scalar_u64(3), p.scalar_u64(5)).unwrap();
        let c = kp.public.encrypt_with(&p, &el(&p, 9), &p.scalar_u64(2));
        // u = 2^2, v = 8^2, w = 9^2 * 9 (mod 23)
        let (u, v, w) = (powmod(2, 2, 23), powmod(8, 2, 23), powmod(9, 2, 23) * 9 % 23);
        assert_eq!((u, v, w), (4, 18, 16));
        assert_eq!(c.u, el(&p, u));
        assert_eq!(c.v, el(&p, v));
        assert_eq!(c.w, el(&p, w));
        assert_eq!(kp.secret.decrypt(&p, &c).unwrap(), el(&p, 9));
    }

    #[test]
    fn toy_homomorphism_in_exponent() {
        let p = toy::params();
        let kp = DegKeyPair::from_secret(&p, p.scalar_u64(3), p.scalar_u64(5)).unwrap();
        let a = kp.public.encrypt_with(&p, &p.commit(&p.scalar_u64(2)), &p.scalar_u64(4));
        let b = kp.public.encrypt_with(&p, &p.commit(&p.scalar_u64(3)), &p.scalar_u64(7));
        let prod = hom_mul(&p, &a, &b);
        assert_eq!(powmod(2, 5, 23), 9);
        assert_eq!(kp.secret.decrypt(&p, &prod).unwrap(), el(&p, 9));
    }

    fn setup(bits: u64, seed: u64) -> (Deg, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let params = Arc::new(GroupParams::generate(bits, &mut rng).unwrap());
        (Deg::generate(params, &mut rng), rng)
    }

    #[test]
    fn round_trips_and_homomorphism() {
        let (deg, mut rng) = setup(256, 11);
        let p = &deg.params;
        for _ in 0..500 {
            let m1 = p.commit(&p.random_scalar(&mut rng));
            let m2 = p.commit(&p.random_scalar(&mut rng));
            let c1 = deg.encrypt(&m1, &mut rng);
            let c2 = deg.encrypt(&m2, &mut rng);
            assert_eq!(deg.decrypt(&c1).unwrap(), m1);
            assert_eq!(deg.decrypt(&hom_mul(p, &c1, &c2)).unwrap(), p.mul(&m1, &m2));
        }
    }

    #[test]
    fn keygen_is_fresh() {
        let (deg, mut rng) = setup(72, 12);
        let p = &deg.params;
        assert_eq!(p.commit(&deg.keys.secret.x1), deg.keys.public.y1);
        assert_eq!(p.commit(&deg.keys.secret.x2), deg.keys.public.y2);
        let other = DegKeyPair::generate(p, &mut rng);
        assert_ne!(other.secret.x1, deg.keys.secret.x1);
    }

    #[test]
    fn encryption_is_probabilistic() {
        let (deg, mut rng) = setup(72, 13);
        let m = deg.params.commit(&deg.params.scalar_u64(42));
        assert_ne!(deg.encrypt(&m, &mut rng), deg.encrypt(&m, &mut rng));
    }

    #[test]
    fn tampering_u_or_v_is_rejected_w_is_malleable() {
        let (deg, mut rng) = setup(72, 14);
        let p = &deg.params;
        let g = p.g().clone();
        for _ in 0..50 {
            let m = p.commit(&p.random_scalar(&mut rng));
            let c = deg.encrypt(&m, &mut rng);
            let mut t = c.clone();
            t.v = p.mul(&t.v, &g);
            assert_eq!(deg.decrypt(&t), Err(DegError::Invalid));
            let mut t = c.clone();
            t.u = p.mul(&t.u, &g);
            assert_eq!(deg.decrypt(&t), Err(DegError::Invalid));
            // w carries the message and no tag: tampering shifts the plaintext
            let mut t = c.clone();
            t.w = p.mul(&t.w, &g);
            assert_eq!(deg.decrypt(&t).unwrap(), p.mul(&m, &g));
        }
    }

    #[test]
    fn rerandomize_keeps_plaintext_changes_components() {
        let (deg, mut rng) = setup(72, 15);
        let p = &deg.params;
        let m = p.commit(&p.scalar_u64(9));
        let c = deg.encrypt(&m, &mut rng);
        let r = deg.keys.public.rerandomize(p, &c, &mut rng);
        assert_eq!(deg.decrypt(&r).unwrap(), m);
        assert!(r.u != c.u && r.v != c.v && r.w != c.w);
    }

    #[test]
    fn base_ops_are_counted_once() {
        let (deg, mut rng) = setup(72, 16);
        let p = deg.params.clone();
        let m = p.commit(&p.scalar_u64(1));
        let (c, n) = ops::measure(|| deg.encrypt(&m, &mut rng));
        assert_eq!((n.enc, n.group_ops()), (1, 0));
        let (_, n) = ops::measure(|| deg.decrypt(&c).unwrap());
        assert_eq!((n.dec, n.group_ops()), (1, 0));
        let (_, n) = ops::measure(|| hom_mul(&p, &c, &c));
        assert_eq!((n.mul, n.total()), (3, 3));
        let (_, n) = ops::measure(|| DegKeyPair::generate(&p, &mut rng));
        assert_eq!((n.keygen, n.group_ops()), (1, 0));
    }
}
