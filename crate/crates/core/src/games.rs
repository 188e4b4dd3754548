//! One-wayness and indistinguishability experiments as runnable harnesses.
//!
//! These estimate success rates of concrete adversaries; they prove nothing
//! about adversaries not written down here.

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::group::{GroupElement, Scalar};
use crate::hpkeet::{Ciphertext, Keys, PublicKey, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("adversary broke the game contract: {0}")]
    ContractViolation(String),
    #[error("plaintext domain has no value left to sample")]
    DomainExhausted,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum OracleError {
    #[error("query budget exhausted")]
    BudgetExceeded,
    #[error("authorization is not available in this game")]
    Forbidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameResult {
    pub trials: u64,
    pub wins: u64,
    pub advantage_estimate: f64,
    pub std_error: f64,
}

impl GameResult {
    fn success_rate(trials: u64, wins: u64) -> Self {
        let p = rate(trials, wins);
        GameResult {
            trials,
            wins,
            advantage_estimate: p,
            std_error: std_error(trials, p),
        }
    }

    fn against_coin(trials: u64, wins: u64) -> Self {
        let p = rate(trials, wins);
        GameResult {
            trials,
            wins,
            advantage_estimate: (p - 0.5).abs(),
            std_error: std_error(trials, p),
        }
    }

    pub fn win_rate(&self) -> f64 {
        rate(self.trials, self.wins)
    }
}

fn rate(trials: u64, wins: u64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        wins as f64 / trials as f64
    }
}

fn std_error(trials: u64, p: f64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        (p * (1.0 - p) / trials as f64).sqrt()
    }
}

/// Plaintexts the OW challenger samples from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlaintextDomain {
    /// Uniform over an explicit set, e.g. the codes of an encoding.
    Set(Vec<Scalar>),
    /// Uniform over `[0, 2^bits)`.
    Range { bits: u32 },
}

const SAMPLE_ATTEMPTS: usize = 1 << 12;

impl PlaintextDomain {
    fn sample(
        &self,
        keys: &Keys,
        excluded: &HashSet<GroupElement>,
        rng: &mut ChaCha20Rng,
    ) -> Result<Scalar, GameError> {
        let p = keys.params();
        let allowed = |m: &Scalar| !excluded.contains(&p.commit(m));
        match self {
            PlaintextDomain::Set(values) => {
                let left: Vec<&Scalar> = values.iter().filter(|m| allowed(m)).collect();
                if left.is_empty() {
                    return Err(GameError::DomainExhausted);
                }
                Ok(left[rng.gen_range(0..left.len())].clone())
            }
            PlaintextDomain::Range { bits } => {
                for _ in 0..SAMPLE_ATTEMPTS {
                    let m = p.scalar(num_bigint::RandBigInt::gen_biguint(rng, u64::from(*bits)));
                    if allowed(&m) {
                        return Ok(m);
                    }
                }
                Err(GameError::DomainExhausted)
            }
        }
    }
}

/// Decryption and authorization oracle with a shared query budget.
pub struct Oracle<'k> {
    keys: &'k Keys,
    remaining: u64,
    allow_authorize: bool,
    exceeded: bool,
    violated: bool,
    returned: HashSet<GroupElement>,
}

impl<'k> Oracle<'k> {
    fn new(keys: &'k Keys, budget: u64, allow_authorize: bool) -> Self {
        Oracle {
            keys,
            remaining: budget,
            allow_authorize,
            exceeded: false,
            violated: false,
            returned: HashSet::new(),
        }
    }

    fn spend(&mut self) -> Result<(), OracleError> {
        if self.remaining == 0 {
            self.exceeded = true;
            return Err(OracleError::BudgetExceeded);
        }
        self.remaining -= 1;
        Ok(())
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// Returns `g^m`, or `None` when the ciphertext is rejected.
    pub fn decrypt(&mut self, c: &Ciphertext) -> Result<Option<GroupElement>, OracleError> {
        self.spend()?;
        let out = self.keys.decrypt(c).ok();
        if let Some(m) = &out {
            self.returned.insert(m.clone());
        }
        Ok(out)
    }

    /// Hands out the comparison token; never the first key.
    pub fn authorize(&mut self) -> Result<Token, OracleError> {
        if !self.allow_authorize {
            self.violated = true;
            return Err(OracleError::Forbidden);
        }
        self.spend()?;
        Ok(self.keys.authorize())
    }
}

pub trait OwAdversary {
    fn query(&mut self, _oracle: &mut Oracle<'_>, _rng: &mut dyn RngCore) {}
    fn challenge(&mut self, c: &Ciphertext, pk: &PublicKey, rng: &mut dyn RngCore);
    fn guess(&mut self, rng: &mut dyn RngCore) -> Option<Scalar>;
}

pub trait IndAdversary {
    /// Query phase; returns the two challenge messages.
    fn query(&mut self, oracle: &mut Oracle<'_>, rng: &mut dyn RngCore) -> (Scalar, Scalar);
    fn challenge(&mut self, cs: &[Ciphertext], pk: &PublicKey, rng: &mut dyn RngCore);
    fn guess(&mut self, rng: &mut dyn RngCore) -> bool;
}

fn trial_rng<R: Rng + ?Sized>(rng: &mut R) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(rng.gen())
}

/// One-wayness with decryption and authorization queries.
pub fn run_ow_game<R: Rng + ?Sized>(
    keys: &Keys,
    adversary: &mut dyn OwAdversary,
    domain: &PlaintextDomain,
    q: u64,
    trials: u64,
    rng: &mut R,
) -> Result<GameResult, GameError> {
    let mut wins = 0;
    for _ in 0..trials {
        let mut trng = trial_rng(rng);
        let mut oracle = Oracle::new(keys, q, true);
        adversary.query(&mut oracle, &mut trng);
        if oracle.exceeded {
            continue;
        }
        let m = domain.sample(keys, &oracle.returned, &mut trng)?;
        let c = keys.public.encrypt(&m, &mut trng);
        adversary.challenge(&c, &keys.public, &mut trng);
        if adversary.guess(&mut trng).as_ref() == Some(&m) {
            wins += 1;
        }
    }
    Ok(GameResult::success_rate(trials, wins))
}

/// Indistinguishability with decryption queries only.
pub fn run_ind_game<R: Rng + ?Sized>(
    keys: &Keys,
    adversary: &mut dyn IndAdversary,
    q: u64,
    trials: u64,
    rng: &mut R,
) -> Result<GameResult, GameError> {
    run_multi_challenge_ind(keys, adversary, q, 1, trials, rng)
}

/// As [`run_ind_game`], but the challenge is a chain of `n` ciphertexts of the
/// same message, each a rerandomization of the previous one.
pub fn run_multi_challenge_ind<R: Rng + ?Sized>(
    keys: &Keys,
    adversary: &mut dyn IndAdversary,
    q: u64,
    n_challenges: usize,
    trials: u64,
    rng: &mut R,
) -> Result<GameResult, GameError> {
    if n_challenges == 0 {
        return Err(GameError::ContractViolation("zero challenges".into()));
    }
    let pk = &keys.public;
    let mut wins = 0;
    for _ in 0..trials {
        let mut trng = trial_rng(rng);
        let mut oracle = Oracle::new(keys, q, false);
        let (m0, m1) = adversary.query(&mut oracle, &mut trng);
        if oracle.violated {
            return Err(GameError::ContractViolation("authorization query".into()));
        }
        if m0 == m1 {
            return Err(GameError::ContractViolation("m0 == m1".into()));
        }
        if oracle.exceeded {
            continue;
        }
        let b: bool = trng.gen();
        let m = if b { &m1 } else { &m0 };
        let mut cs = Vec::with_capacity(n_challenges);
        cs.push(pk.encrypt(m, &mut trng));
        while cs.len() < n_challenges {
            let next = pk.rerandomize(cs.last().expect("nonempty"), &mut trng);
            cs.push(next);
        }
        adversary.challenge(&cs, pk, &mut trng);
        if adversary.guess(&mut trng) == b {
            wins += 1;
        }
    }
    Ok(GameResult::against_coin(trials, wins))
}

/// Guesses uniformly in `[0, 2^bits)`.
pub struct RandomGuessOw {
    pub bits: u32,
    modulus: Option<std::sync::Arc<crate::group::GroupParams>>,
}

impl RandomGuessOw {
    pub fn new(bits: u32) -> Self {
        RandomGuessOw { bits, modulus: None }
    }
}

impl OwAdversary for RandomGuessOw {
    fn challenge(&mut self, _c: &Ciphertext, pk: &PublicKey, _rng: &mut dyn RngCore) {
        self.modulus = Some(pk.params().clone());
    }

    fn guess(&mut self, rng: &mut dyn RngCore) -> Option<Scalar> {
        let p = self.modulus.as_ref()?;
        Some(p.scalar(num_bigint::RandBigInt::gen_biguint(rng, u64::from(self.bits))))
    }
}

enum Candidates {
    Known(Vec<Scalar>),
    Enumerate(u64),
}

/// Holds the token and tries each candidate plaintext by comparison.
pub struct TokenSearchOw {
    candidates: Candidates,
    token: Option<Token>,
    found: Option<Scalar>,
}

impl TokenSearchOw {
    /// Knows the plaintext set exactly.
    pub fn known(candidates: Vec<Scalar>) -> Self {
        Self::with(Candidates::Known(candidates))
    }

    /// Knows nothing about the plaintexts; tries `0..budget`.
    pub fn enumerate(budget: u64) -> Self {
        Self::with(Candidates::Enumerate(budget))
    }

    fn with(candidates: Candidates) -> Self {
        TokenSearchOw {
            candidates,
            token: None,
            found: None,
        }
    }
}

impl OwAdversary for TokenSearchOw {
    fn query(&mut self, oracle: &mut Oracle<'_>, _rng: &mut dyn RngCore) {
        self.token = oracle.authorize().ok();
        self.found = None;
    }

    fn challenge(&mut self, c: &Ciphertext, pk: &PublicKey, rng: &mut dyn RngCore) {
        let Some(token) = &self.token else { return };
        let candidates: Vec<Scalar> = match &self.candidates {
            Candidates::Known(k) => k.clone(),
            Candidates::Enumerate(n) => (0..*n).map(|v| pk.params().scalar_u64(v)).collect(),
        };
        self.found = candidates
            .into_iter()
            .find(|m| token.compare(c, &pk.encrypt(m, &mut *rng)).unwrap_or(false));
    }

    fn guess(&mut self, _rng: &mut dyn RngCore) -> Option<Scalar> {
        self.found.take()
    }
}

fn default_pair() -> (u64, u64) {
    (0, 1)
}

/// Flips a coin.
#[derive(Default)]
pub struct RandomGuessInd;

impl IndAdversary for RandomGuessInd {
    fn query(&mut self, oracle: &mut Oracle<'_>, _rng: &mut dyn RngCore) -> (Scalar, Scalar) {
        let p = oracle.public_key().params();
        let (a, b) = default_pair();
        (p.scalar_u64(a), p.scalar_u64(b))
    }

    fn challenge(&mut self, _cs: &[Ciphertext], _pk: &PublicKey, _rng: &mut dyn RngCore) {}

    fn guess(&mut self, rng: &mut dyn RngCore) -> bool {
        rng.gen()
    }
}

/// Given the token out of band: compares the challenge with `Enc(m0)`.
pub struct TokenDistinguisher {
    token: Token,
    m0: Option<Scalar>,
    answer: bool,
}

impl TokenDistinguisher {
    pub fn new(token: Token) -> Self {
        TokenDistinguisher {
            token,
            m0: None,
            answer: false,
        }
    }
}

impl IndAdversary for TokenDistinguisher {
    fn query(&mut self, oracle: &mut Oracle<'_>, _rng: &mut dyn RngCore) -> (Scalar, Scalar) {
        let p = oracle.public_key().params();
        let (a, b) = default_pair();
        self.m0 = Some(p.scalar_u64(a));
        (p.scalar_u64(a), p.scalar_u64(b))
    }

    fn challenge(&mut self, cs: &[Ciphertext], pk: &PublicKey, rng: &mut dyn RngCore) {
        let m0 = self.m0.as_ref().expect("query phase ran");
        let probe = pk.encrypt(m0, rng);
        self.answer = !self.token.compare(&cs[0], &probe).unwrap_or(false);
    }

    fn guess(&mut self, _rng: &mut dyn RngCore) -> bool {
        self.answer
    }
}

/// Looks for byte-identical ciphertexts among the challenges and its own
/// encryptions of `m0` and `m1`; flips a coin when there are none.
pub struct ByteEqualityInd {
    pub samples: usize,
    messages: Option<(Scalar, Scalar)>,
    answer: Option<bool>,
}

impl ByteEqualityInd {
    pub fn new(samples: usize) -> Self {
        ByteEqualityInd {
            samples,
            messages: None,
            answer: None,
        }
    }
}

impl IndAdversary for ByteEqualityInd {
    fn query(&mut self, oracle: &mut Oracle<'_>, _rng: &mut dyn RngCore) -> (Scalar, Scalar) {
        let p = oracle.public_key().params();
        let (a, b) = default_pair();
        let m = (p.scalar_u64(a), p.scalar_u64(b));
        self.messages = Some(m.clone());
        m
    }

    fn challenge(&mut self, cs: &[Ciphertext], pk: &PublicKey, rng: &mut dyn RngCore) {
        let (m0, m1) = self.messages.clone().expect("query phase ran");
        let p = pk.params();
        let seen: HashSet<Vec<u8>> = cs.iter().map(|c| c.to_bytes(p)).collect();
        self.answer = None;
        for _ in 0..self.samples {
            if seen.contains(&pk.encrypt(&m0, &mut *rng).to_bytes(p)) {
                self.answer = Some(false);
            }
            if seen.contains(&pk.encrypt(&m1, &mut *rng).to_bytes(p)) {
                self.answer = Some(true);
            }
        }
    }

    fn guess(&mut self, rng: &mut dyn RngCore) -> bool {
        self.answer.take().unwrap_or_else(|| rng.gen())
    }
}
