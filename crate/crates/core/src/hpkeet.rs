//! Homomorphic public-key encryption with equality test.
//!
//! A plaintext `m` in `Z_q` encrypts to
//!
//! ```text
//! c1 = E_pk1(g^m),   c2 = g^m * h^r,   c3 = E_pk2(h^r)
//! ```
//!
//! where `E` is Damgård's ElGamal. Whoever holds the [`Token`] (the second
//! base-cipher secret) can strip the blinding `h^r` from `c2` and compare
//! commitments `g^m` between ciphertexts without being able to open `c1`.
//! The componentwise product of two ciphertexts encrypts the sum of their
//! plaintexts.
//!
//! Decryption returns the commitment `g^m`; turning it back into `m` needs a
//! lookup table over the (small) set of plaintexts actually in use.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::deg::{self, DegCiphertext, DegError, DegKeyPair, DegPublicKey, DegSecretKey};
use crate::group::{GroupElement, GroupParams, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HpkeetError {
    #[error("base cipher rejected component {component}: {source}")]
    Base {
        component: &'static str,
        #[source]
        source: DegError,
    },
    #[error("c2 is not a subgroup element")]
    MalformedBlinding,
    #[error("c2 does not open to the decrypted commitments")]
    CommitmentMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub c1: DegCiphertext,
    pub c2: GroupElement,
    pub c3: DegCiphertext,
}

impl Ciphertext {
    /// Fixed-width encoding of all seven components.
    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 * params.element_width());
        for x in [&self.c1.u, &self.c1.v, &self.c1.w, &self.c2, &self.c3.u, &self.c3.v, &self.c3.w] {
            out.extend_from_slice(&params.element_bytes(x));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    params: Arc<GroupParams>,
    pub pk1: DegPublicKey,
    pub pk2: DegPublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    params: Arc<GroupParams>,
    pub sk1: DegSecretKey,
    pub sk2: DegSecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keys {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// Comparison capability: the second base-cipher secret and nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    params: Arc<GroupParams>,
    pub sk2: DegSecretKey,
}

pub fn keygen<R: Rng + ?Sized>(params: Arc<GroupParams>, rng: &mut R) -> Keys {
    let k1 = DegKeyPair::generate(&params, rng);
    let k2 = DegKeyPair::generate(&params, rng);
    Keys::from_parts(params, k1, k2)
}

impl Keys {
    pub fn from_parts(params: Arc<GroupParams>, k1: DegKeyPair, k2: DegKeyPair) -> Self {
        Keys {
            public: PublicKey {
                params: params.clone(),
                pk1: k1.public,
                pk2: k2.public,
            },
            secret: SecretKey {
                params,
                sk1: k1.secret,
                sk2: k2.secret,
            },
        }
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.public.params
    }

    pub fn authorize(&self) -> Token {
        self.secret.authorize()
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<GroupElement, HpkeetError> {
        self.secret.decrypt(c)
    }
}

impl PublicKey {
    pub fn new(params: Arc<GroupParams>, pk1: DegPublicKey, pk2: DegPublicKey) -> Self {
        PublicKey { params, pk1, pk2 }
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    pub fn encrypt<R: Rng + ?Sized>(&self, m: &Scalar, rng: &mut R) -> Ciphertext {
        let p = &self.params;
        let r = p.random_scalar(rng);
        let r1 = p.random_scalar(rng);
        let r3 = p.random_scalar(rng);
        self.encrypt_with(m, &r, &r1, &r3)
    }

    /// Encryption with caller-chosen blinding `r` and base-cipher randomness
    /// `r1` (for `c1`) and `r3` (for `c3`).
    pub fn encrypt_with(&self, m: &Scalar, r: &Scalar, r1: &Scalar, r3: &Scalar) -> Ciphertext {
        let p = &self.params;
        let gm = p.commit(m);
        let hr = p.exp(p.h(), r);
        let c2 = p.mul(&gm, &hr);
        Ciphertext {
            c1: self.pk1.encrypt_with(p, &gm, r1),
            c2,
            c3: self.pk2.encrypt_with(p, &hr, r3),
        }
    }

    /// Encrypts the sum of the two plaintexts. The keys behind `a` and `b`
    /// are not checked.
    pub fn hom_add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        hom_add(&self.params, a, b)
    }

    /// Same plaintext, fresh randomness in every component.
    pub fn rerandomize<R: Rng + ?Sized>(&self, c: &Ciphertext, rng: &mut R) -> Ciphertext {
        let zero = self.encrypt(&self.params.scalar_u64(0), rng);
        hom_add(&self.params, c, &zero)
    }
}

/// Componentwise product: `3 + 1 + 3` multiplications.
pub fn hom_add(params: &GroupParams, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
    Ciphertext {
        c1: deg::hom_mul(params, &a.c1, &b.c1),
        c2: params.mul(&a.c2, &b.c2),
        c3: deg::hom_mul(params, &a.c3, &b.c3),
    }
}

impl SecretKey {
    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    pub fn authorize(&self) -> Token {
        Token {
            params: self.params.clone(),
            sk2: self.sk2.clone(),
        }
    }

    /// Returns the commitment `g^m` if both inner decryptions succeed and
    /// `c2` opens to them.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<GroupElement, HpkeetError> {
        let p = &self.params;
        let gm = self.sk1.decrypt(p, &c.c1).map_err(|source| HpkeetError::Base {
            component: "c1",
            source,
        })?;
        let hr = self.sk2.decrypt(p, &c.c3).map_err(|source| HpkeetError::Base {
            component: "c3",
            source,
        })?;
        if !p.contains(&c.c2) {
            return Err(HpkeetError::MalformedBlinding);
        }
        if p.mul(&gm, &hr) != c.c2 {
            return Err(HpkeetError::CommitmentMismatch);
        }
        Ok(gm)
    }
}

impl Token {
    pub fn new(params: Arc<GroupParams>, sk2: DegSecretKey) -> Self {
        Token { params, sk2 }
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    /// `c2 / h^r`, i.e. the commitment `g^m`.
    pub fn unblind(&self, c: &Ciphertext) -> Result<GroupElement, HpkeetError> {
        let p = &self.params;
        let hr = self.sk2.decrypt(p, &c.c3).map_err(|source| HpkeetError::Base {
            component: "c3",
            source,
        })?;
        if !p.contains(&c.c2) {
            return Err(HpkeetError::MalformedBlinding);
        }
        Ok(p.mul(&c.c2, &p.inv(&hr)))
    }

    /// Plaintext equality. Malformed input is an error, never `false`.
    pub fn compare(&self, a: &Ciphertext, b: &Ciphertext) -> Result<bool, HpkeetError> {
        Ok(self.unblind(a)? == self.unblind(b)?)
    }
}

/// Advisory output of [`min_entropy_bound`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MinEntropyReport {
    pub trial_budget: f64,
    pub advantage_bound: f64,
    pub required_bits: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("trial budget must be at least 1, got {0}")]
    Budget(f64),
    #[error("advantage bound must lie in (0, 1], got {0}")]
    Advantage(f64),
}

/// Min-entropy a plaintext distribution needs so that `trial_budget` trial
/// encrypt-and-compare attempts succeed with probability below `epsilon`.
///
/// Union bound: `budget * 2^-k <= epsilon`, so `k >= log2(budget / epsilon)`.
pub fn min_entropy_bound(trial_budget: f64, epsilon: f64) -> Result<MinEntropyReport, BoundError> {
    if trial_budget.is_nan() || trial_budget < 1.0 || !trial_budget.is_finite() {
        return Err(BoundError::Budget(trial_budget));
    }
    if !(0.0..=1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(BoundError::Advantage(epsilon));
    }
    Ok(MinEntropyReport {
        trial_budget,
        advantage_bound: epsilon,
        required_bits: (trial_budget / epsilon).log2().max(0.0),
    })
}
