//! Blind Turing machines.
//!
//! A [`TmSpec`] is compiled into a [`BlindProgram`]: for every rule
//! `(q, s) -> (p, s', mv)` the program stores encryptions of the differences
//! `C(p) - C(q)` and `C(s') - C(s)` of the secret random codes, keyed by a
//! hash of the commitments `g^C(q)`, `g^C(s)`. The executor holds only the
//! public key and the comparison token. It recovers the commitments of the
//! current state and cell with [`Token::unblind`], looks the entry up, and
//! adds the encrypted differences homomorphically.
//!
//! Execution is oblivious: every logical step is a full left-to-right sweep
//! over `[-B, B]` in which every cell is rewritten (really or with a
//! rerandomization), and exactly `T(n)` steps are executed regardless of when
//! the machine halts. The sequence of touched positions therefore depends
//! only on `(B, T)`.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::group::{GroupElement, GroupParams, Scalar};
use crate::hpkeet::{Ciphertext, HpkeetError, PublicKey, SecretKey, Token};
use crate::ops::{self, Op};
use crate::tm::{Move, Poly, TmSpec};

const KEY_DOMAIN: &[u8] = b"blindtm/transition-key/v1";
const MAX_SALT: u32 = 1024;
const MAX_CODE_ATTEMPTS: usize = 1 << 16;

pub type TransitionKey = [u8; 32];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlindError {
    #[error("group order too small for {0} distinct codes")]
    EncodingTooSmall(usize),
    #[error("encoding is not injective")]
    EncodingCollision,
    #[error("encoding has no code for {0}")]
    MissingCode(String),
    #[error("input symbol {0:?} is not encodable")]
    UnknownSymbol(char),
    #[error("input of length {len} does not fit in tape bound {bound}")]
    InputTooLong { len: usize, bound: u64 },
    #[error("parameter fingerprints disagree")]
    FingerprintMismatch,
    #[error("no transition applies at logical step {step}")]
    Stuck { step: u64 },
    #[error("head left the tape bound at logical step {step}")]
    SpaceExceeded { step: u64 },
    #[error("machine did not halt within {steps} steps")]
    NotHalted { steps: u64 },
    #[error("could not find a collision-free transition key salt")]
    KeyCollision,
    #[error("ciphertext rejected at {location}: {source}")]
    Crypto {
        location: String,
        #[source]
        source: HpkeetError,
    },
    #[error("cell {cell} decrypts to a value outside the encoding")]
    Corrupt { cell: i64 },
    #[error("malformed configuration: {0}")]
    Malformed(String),
}

fn crypto(location: impl Into<String>) -> impl FnOnce(HpkeetError) -> BlindError {
    let location = location.into();
    move |source| BlindError::Crypto { location, source }
}

/// Secret random codes for states and symbols, with decode tables keyed by
/// commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    states: BTreeMap<String, Scalar>,
    symbols: BTreeMap<char, Scalar>,
    blank: char,
    decode_state: HashMap<GroupElement, String>,
    decode_symbol: HashMap<GroupElement, char>,
}

impl Encoding {
    /// Samples injective codes uniformly from `Z_q`.
    pub fn generate<R: Rng + ?Sized>(
        spec: &TmSpec,
        params: &GroupParams,
        rng: &mut R,
    ) -> Result<Self, BlindError> {
        let needed = spec.states.len() + spec.tape_alphabet.len();
        if params.q() <= &needed.into() {
            return Err(BlindError::EncodingTooSmall(needed));
        }
        let mut used = HashSet::new();
        let mut draw = |rng: &mut R| -> Result<Scalar, BlindError> {
            for _ in 0..MAX_CODE_ATTEMPTS {
                let c = params.random_scalar(rng);
                if used.insert(c.clone()) {
                    return Ok(c);
                }
            }
            Err(BlindError::EncodingTooSmall(needed))
        };
        let mut states = BTreeMap::new();
        for s in &spec.states {
            states.insert(s.clone(), draw(rng)?);
        }
        let mut symbols = BTreeMap::new();
        for &c in &spec.tape_alphabet {
            symbols.insert(c, draw(rng)?);
        }
        Self::from_codes(params, states, symbols, spec.blank)
    }

    /// Rebuilds an encoding from explicit codes, checking injectivity.
    pub fn from_codes(
        params: &GroupParams,
        states: BTreeMap<String, Scalar>,
        symbols: BTreeMap<char, Scalar>,
        blank: char,
    ) -> Result<Self, BlindError> {
        if !symbols.contains_key(&blank) {
            return Err(BlindError::MissingCode(format!("blank {blank:?}")));
        }
        let mut decode_state = HashMap::new();
        let mut decode_symbol = HashMap::new();
        let mut seen = HashSet::new();
        for (name, code) in &states {
            let c = params.commit(code);
            if !seen.insert(c.clone()) {
                return Err(BlindError::EncodingCollision);
            }
            decode_state.insert(c, name.clone());
        }
        for (&sym, code) in &symbols {
            let c = params.commit(code);
            if !seen.insert(c.clone()) {
                return Err(BlindError::EncodingCollision);
            }
            decode_symbol.insert(c, sym);
        }
        Ok(Encoding {
            states,
            symbols,
            blank,
            decode_state,
            decode_symbol,
        })
    }

    pub fn state_code(&self, state: &str) -> Result<&Scalar, BlindError> {
        self.states
            .get(state)
            .ok_or_else(|| BlindError::MissingCode(format!("state {state}")))
    }

    pub fn symbol_code(&self, symbol: char) -> Result<&Scalar, BlindError> {
        self.symbols
            .get(&symbol)
            .ok_or_else(|| BlindError::MissingCode(format!("symbol {symbol:?}")))
    }

    pub fn decode_state(&self, commitment: &GroupElement) -> Option<&str> {
        self.decode_state.get(commitment).map(String::as_str)
    }

    pub fn decode_symbol(&self, commitment: &GroupElement) -> Option<char> {
        self.decode_symbol.get(commitment).copied()
    }

    pub fn states(&self) -> &BTreeMap<String, Scalar> {
        &self.states
    }

    pub fn symbols(&self) -> &BTreeMap<char, Scalar> {
        &self.symbols
    }

    pub fn blank(&self) -> char {
        self.blank
    }

    /// Every code, states first.
    pub fn codes(&self) -> impl Iterator<Item = &Scalar> {
        self.states.values().chain(self.symbols.values())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionEntry {
    pub delta_state: Ciphertext,
    pub delta_symbol: Ciphertext,
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindProgram {
    pub pk: PublicKey,
    pub table: HashMap<TransitionKey, TransitionEntry>,
    pub enc_start: Ciphertext,
    pub halt: HashSet<GroupElement>,
    pub time_bound: Poly,
    pub space_bound: Poly,
    pub salt: u32,
}

/// Hash key for a `(state, symbol)` commitment pair.
pub fn transition_key(
    params: &GroupParams,
    salt: u32,
    state: &GroupElement,
    symbol: &GroupElement,
) -> TransitionKey {
    let mut h = Sha256::new();
    h.update(KEY_DOMAIN);
    h.update(salt.to_be_bytes());
    h.update(params.element_bytes(state));
    h.update(params.element_bytes(symbol));
    h.finalize().into()
}

/// Smallest salt under which `key_of` is injective on `items`.
fn find_salt<T>(items: &[T], key_of: impl Fn(u32, &T) -> TransitionKey) -> Result<u32, BlindError> {
    'salt: for salt in 0..MAX_SALT {
        let mut seen = HashSet::with_capacity(items.len());
        for it in items {
            if !seen.insert(key_of(salt, it)) {
                continue 'salt;
            }
        }
        return Ok(salt);
    }
    Err(BlindError::KeyCollision)
}

struct CompiledRule {
    state_commit: GroupElement,
    symbol_commit: GroupElement,
    next: Scalar,
    write: Scalar,
    from_state: Scalar,
    from_symbol: Scalar,
    mv: Move,
}

fn compile_rules(spec: &TmSpec, enc: &Encoding, params: &GroupParams) -> Result<(Vec<CompiledRule>, u32), BlindError> {
    let mut rules = Vec::with_capacity(spec.delta.len());
    for (q, s, r) in spec.rules() {
        let from_state = enc.state_code(q)?.clone();
        let from_symbol = enc.symbol_code(s)?.clone();
        rules.push(CompiledRule {
            state_commit: params.commit(&from_state),
            symbol_commit: params.commit(&from_symbol),
            next: enc.state_code(&r.next)?.clone(),
            write: enc.symbol_code(r.write)?.clone(),
            from_state,
            from_symbol,
            mv: r.mv,
        });
    }
    let salt = find_salt(&rules, |salt, r| transition_key(params, salt, &r.state_commit, &r.symbol_commit))?;
    Ok((rules, salt))
}

fn halt_commitments(spec: &TmSpec, enc: &Encoding, params: &GroupParams) -> Result<HashSet<GroupElement>, BlindError> {
    spec.halt
        .iter()
        .map(|h| Ok(params.commit(enc.state_code(h)?)))
        .collect()
}

/// Builds the encrypted transition table.
pub fn compile<R: Rng + ?Sized>(
    spec: &TmSpec,
    enc: &Encoding,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<BlindProgram, BlindError> {
    let params = pk.params().clone();
    let (rules, salt) = compile_rules(spec, enc, &params)?;
    let table = rules
        .into_iter()
        .map(|r| {
            let key = transition_key(&params, salt, &r.state_commit, &r.symbol_commit);
            let entry = TransitionEntry {
                delta_state: pk.encrypt(&params.scalar_sub(&r.next, &r.from_state), rng),
                delta_symbol: pk.encrypt(&params.scalar_sub(&r.write, &r.from_symbol), rng),
                mv: r.mv,
            };
            (key, entry)
        })
        .collect();
    Ok(BlindProgram {
        pk: pk.clone(),
        table,
        enc_start: pk.encrypt(enc.state_code(&spec.start)?, rng),
        halt: halt_commitments(spec, enc, &params)?,
        time_bound: spec.time_bound.clone(),
        space_bound: spec.space_bound.clone(),
        salt,
    })
}

impl BlindProgram {
    pub fn params(&self) -> &GroupParams {
        self.pk.params()
    }

    pub fn fingerprint(&self) -> String {
        self.params().fingerprint()
    }

    /// `O(1)` keyed lookup; never scans the table.
    pub fn lookup(&self, state: &GroupElement, symbol: &GroupElement) -> Option<&TransitionEntry> {
        ops::record(Op::Lookup);
        self.table.get(&transition_key(self.params(), self.salt, state, symbol))
    }

    /// Linear-scan lookup, one counted scan per entry visited. Only a
    /// baseline for benchmarks; the executor uses [`Self::lookup`].
    pub fn scan_lookup(&self, state: &GroupElement, symbol: &GroupElement) -> Option<&TransitionEntry> {
        let want = transition_key(self.params(), self.salt, state, symbol);
        self.table.iter().find_map(|(k, e)| {
            ops::record(Op::Scan);
            (*k == want).then_some(e)
        })
    }

    pub fn steps_for(&self, input_len: u64) -> u64 {
        self.time_bound.eval(input_len)
    }

    pub fn bound_for(&self, input_len: u64) -> u64 {
        self.space_bound.eval(input_len)
    }
}

/// Unblinds state and cell and fetches the matching entry: `2(D + e + i + m)`
/// plus one hash lookup.
pub fn select_transition<'p>(
    program: &'p BlindProgram,
    token: &Token,
    state: &Ciphertext,
    cell: &Ciphertext,
) -> Result<Option<&'p TransitionEntry>, HpkeetError> {
    let sc = token.unblind(state)?;
    let cc = token.unblind(cell)?;
    Ok(program.lookup(&sc, &cc))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedConfiguration {
    pub fingerprint: String,
    pub enc_state: Ciphertext,
    /// Cells `-bound..=bound`, leftmost first.
    pub tape: Vec<Ciphertext>,
    pub bound: u64,
    pub head: i64,
    pub input_len: u64,
    pub logical_step: u64,
}

impl EncryptedConfiguration {
    pub fn cell(&self, pos: i64) -> Option<&Ciphertext> {
        self.index(pos).map(|i| &self.tape[i])
    }

    fn index(&self, pos: i64) -> Option<usize> {
        let b = self.bound as i64;
        (-b..=b).contains(&pos).then(|| (pos + b) as usize)
    }

    pub fn positions(&self) -> std::ops::RangeInclusive<i64> {
        -(self.bound as i64)..=self.bound as i64
    }

    fn check_shape(&self) -> Result<(), BlindError> {
        if self.tape.len() as u64 != 2 * self.bound + 1 {
            return Err(BlindError::Malformed(format!(
                "{} cells for bound {}",
                self.tape.len(),
                self.bound
            )));
        }
        if self.index(self.head).is_none() {
            return Err(BlindError::Malformed(format!("head {} outside the tape", self.head)));
        }
        Ok(())
    }
}

/// Encrypts `input` onto a tape over `[-bound, bound]`, head at cell 0.
pub fn encrypt_tape<R: Rng + ?Sized>(
    input: &str,
    start_state: &str,
    enc: &Encoding,
    pk: &PublicKey,
    bound: u64,
    rng: &mut R,
) -> Result<EncryptedConfiguration, BlindError> {
    let state = pk.encrypt(enc.state_code(start_state)?, rng);
    build_tape(input, state, enc, pk, bound, rng)
}

/// Encrypts `input` with the tape bound the program declares for its length.
/// The start state is a rerandomization of the program's, so the machine
/// description is not needed.
pub fn encrypt_input<R: Rng + ?Sized>(
    program: &BlindProgram,
    enc: &Encoding,
    input: &str,
    rng: &mut R,
) -> Result<EncryptedConfiguration, BlindError> {
    let n = input.chars().count() as u64;
    let state = program.pk.rerandomize(&program.enc_start, rng);
    build_tape(input, state, enc, &program.pk, program.bound_for(n), rng)
}

fn build_tape<R: Rng + ?Sized>(
    input: &str,
    enc_state: Ciphertext,
    enc: &Encoding,
    pk: &PublicKey,
    bound: u64,
    rng: &mut R,
) -> Result<EncryptedConfiguration, BlindError> {
    let symbols: Vec<char> = input.chars().collect();
    if symbols.len() as u64 > bound {
        return Err(BlindError::InputTooLong { len: symbols.len(), bound });
    }
    for &c in &symbols {
        if c == enc.blank || !enc.symbols.contains_key(&c) {
            return Err(BlindError::UnknownSymbol(c));
        }
    }
    let b = bound as i64;
    let tape = (-b..=b)
        .map(|pos| {
            let sym = usize::try_from(pos)
                .ok()
                .and_then(|i| symbols.get(i).copied())
                .unwrap_or(enc.blank);
            Ok(pk.encrypt(enc.symbol_code(sym)?, rng))
        })
        .collect::<Result<Vec<_>, BlindError>>()?;
    Ok(EncryptedConfiguration {
        fingerprint: pk.params().fingerprint(),
        enc_state,
        tape,
        bound,
        head: 0,
        input_len: symbols.len() as u64,
        logical_step: 0,
    })
}

/// Physical head positions: `steps` left-to-right passes over
/// `[-bound, bound]`.
pub fn sweep_schedule(bound: u64, steps: u64) -> impl Iterator<Item = i64> {
    let b = bound as i64;
    (0..steps).flat_map(move |_| -b..=b)
}

/// Positions the executor touched, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadTrace {
    pub bound: u64,
    pub steps: u64,
    pub positions: Vec<i64>,
}

impl HeadTrace {
    /// Text log, one line per logical step.
    pub fn to_log(&self) -> String {
        let mut out = format!("bound {} steps {}\n", self.bound, self.steps);
        let width = (2 * self.bound + 1) as usize;
        for (i, chunk) in self.positions.chunks(width.max(1)).enumerate() {
            let cells: Vec<String> = chunk.iter().map(i64::to_string).collect();
            out.push_str(&format!("{i}: {}\n", cells.join(" ")));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    State,
    Cell(i64),
}

/// A ciphertext the executor wrote.
#[derive(Debug, Clone, Copy)]
pub struct Write<'a> {
    pub step: u64,
    pub target: Target,
    pub ciphertext: &'a Ciphertext,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: EncryptedConfiguration,
    pub trace: HeadTrace,
}

fn check_fingerprints(program: &BlindProgram, token: &Token, conf: &EncryptedConfiguration) -> Result<(), BlindError> {
    let fp = program.fingerprint();
    if token.params().fingerprint() != fp || conf.fingerprint != fp {
        return Err(BlindError::FingerprintMismatch);
    }
    Ok(())
}

pub fn blind_run<R: Rng + ?Sized>(
    program: &BlindProgram,
    token: &Token,
    conf: &EncryptedConfiguration,
    rng: &mut R,
) -> Result<RunOutcome, BlindError> {
    blind_run_observed(program, token, conf, rng, |_| {})
}

/// Runs exactly `T(n)` oblivious sweeps, reporting every write to `observe`.
pub fn blind_run_observed<R: Rng + ?Sized>(
    program: &BlindProgram,
    token: &Token,
    conf: &EncryptedConfiguration,
    rng: &mut R,
    mut observe: impl FnMut(Write<'_>),
) -> Result<RunOutcome, BlindError> {
    check_fingerprints(program, token, conf)?;
    conf.check_shape()?;
    let pk = &program.pk;
    let steps = program.steps_for(conf.input_len);
    let mut state = conf.enc_state.clone();
    let mut tape = conf.tape.clone();
    let mut head = conf.head;
    let mut halted = false;
    let b = conf.bound as i64;
    let mut positions = Vec::with_capacity((steps * (2 * conf.bound + 1)) as usize);

    for step in 0..steps {
        let logical = conf.logical_step + step;
        let mut next_head = head;
        let mut state_written = false;
        for pos in sweep_schedule(conf.bound, 1) {
            positions.push(pos);
            let idx = (pos + b) as usize;
            let mut real = None;
            if pos == head && !halted {
                let sc = token.unblind(&state).map_err(crypto("state"))?;
                if program.halt.contains(&sc) {
                    halted = true;
                } else {
                    let cc = token.unblind(&tape[idx]).map_err(crypto(format!("cell {pos}")))?;
                    let entry = program.lookup(&sc, &cc).ok_or(BlindError::Stuck { step: logical })?;
                    real = Some(entry);
                }
            }
            match real {
                Some(entry) => {
                    state = pk.rerandomize(&pk.hom_add(&state, &entry.delta_state), rng);
                    tape[idx] = pk.rerandomize(&pk.hom_add(&tape[idx], &entry.delta_symbol), rng);
                    state_written = true;
                    next_head = head + entry.mv.offset();
                    observe(Write { step: logical, target: Target::State, ciphertext: &state });
                }
                None => tape[idx] = pk.rerandomize(&tape[idx], rng),
            }
            observe(Write { step: logical, target: Target::Cell(pos), ciphertext: &tape[idx] });
        }
        if !state_written {
            state = pk.rerandomize(&state, rng);
            observe(Write { step: logical, target: Target::State, ciphertext: &state });
        }
        if !(-b..=b).contains(&next_head) {
            return Err(BlindError::SpaceExceeded { step: logical });
        }
        head = next_head;
    }
    if !halted {
        let sc = token.unblind(&state).map_err(crypto("state"))?;
        if !program.halt.contains(&sc) {
            return Err(BlindError::NotHalted { steps });
        }
    }
    Ok(RunOutcome {
        config: EncryptedConfiguration {
            fingerprint: conf.fingerprint.clone(),
            enc_state: state,
            tape,
            bound: conf.bound,
            head,
            input_len: conf.input_len,
            logical_step: conf.logical_step + steps,
        },
        trace: HeadTrace {
            bound: conf.bound,
            steps,
            positions,
        },
    })
}

/// Decrypts and decodes every cell, trimming blanks at both ends.
pub fn decrypt_tape(sk: &SecretKey, enc: &Encoding, conf: &EncryptedConfiguration) -> Result<String, BlindError> {
    if sk.params().fingerprint() != conf.fingerprint {
        return Err(BlindError::FingerprintMismatch);
    }
    let mut out = String::with_capacity(conf.tape.len());
    for (pos, c) in conf.positions().zip(&conf.tape) {
        let commitment = sk.decrypt(c).map_err(|_| BlindError::Corrupt { cell: pos })?;
        out.push(enc.decode_symbol(&commitment).ok_or(BlindError::Corrupt { cell: pos })?);
    }
    Ok(out.trim_matches(enc.blank).to_string())
}

/// Decrypts and decodes the state.
pub fn decrypt_state(sk: &SecretKey, enc: &Encoding, conf: &EncryptedConfiguration) -> Result<String, BlindError> {
    let commitment = sk.decrypt(&conf.enc_state).map_err(crypto("state"))?;
    enc.decode_state(&commitment)
        .map(str::to_string)
        .ok_or_else(|| BlindError::Malformed("state decrypts outside the encoding".into()))
}

/// Transition table storing absolute replacements instead of differences.
/// Used only to show what goes wrong without homomorphic updates.
#[derive(Debug, Clone)]
pub struct ReplacementProgram {
    pub pk: PublicKey,
    pub table: HashMap<TransitionKey, ReplacementEntry>,
    pub halt: HashSet<GroupElement>,
    pub time_bound: Poly,
    pub salt: u32,
}

#[derive(Debug, Clone)]
pub struct ReplacementEntry {
    pub new_state: Ciphertext,
    pub new_symbol: Ciphertext,
    pub mv: Move,
}

pub fn compile_replacing<R: Rng + ?Sized>(
    spec: &TmSpec,
    enc: &Encoding,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<ReplacementProgram, BlindError> {
    let params = pk.params().clone();
    let (rules, salt) = compile_rules(spec, enc, &params)?;
    let table = rules
        .into_iter()
        .map(|r| {
            let key = transition_key(&params, salt, &r.state_commit, &r.symbol_commit);
            let entry = ReplacementEntry {
                new_state: pk.encrypt(&r.next, rng),
                new_symbol: pk.encrypt(&r.write, rng),
                mv: r.mv,
            };
            (key, entry)
        })
        .collect();
    Ok(ReplacementProgram {
        pk: pk.clone(),
        table,
        halt: halt_commitments(spec, enc, &params)?,
        time_bound: spec.time_bound.clone(),
        salt,
    })
}

/// What an outside observer sees of a replacement-based run.
#[derive(Debug, Clone)]
pub struct LeakyTrace {
    /// Serialized ciphertexts in write order (state, then cell, per step).
    pub writes: Vec<Vec<u8>>,
    pub config: EncryptedConfiguration,
}

impl LeakyTrace {
    pub fn fingerprint(&self) -> Vec<usize> {
        repetition_fingerprint(&self.writes)
    }
}

/// Labels each write with the index of its first byte-identical occurrence.
/// Equal fingerprints mean equal repetition structure; needs no key material.
pub fn repetition_fingerprint(writes: &[Vec<u8>]) -> Vec<usize> {
    let mut first: HashMap<&[u8], usize> = HashMap::new();
    writes
        .iter()
        .enumerate()
        .map(|(i, w)| *first.entry(w.as_slice()).or_insert(i))
        .collect()
}

/// Executes by plain substitution: no homomorphic update, no
/// rerandomization, dummy sweep positions are left untouched.
pub fn leaky_run(
    program: &ReplacementProgram,
    token: &Token,
    conf: &EncryptedConfiguration,
) -> Result<LeakyTrace, BlindError> {
    let params = program.pk.params();
    if token.params().fingerprint() != params.fingerprint() || conf.fingerprint != params.fingerprint() {
        return Err(BlindError::FingerprintMismatch);
    }
    conf.check_shape()?;
    let mut out = conf.clone();
    let mut writes = Vec::new();
    let steps = program.time_bound.eval(conf.input_len);
    let b = conf.bound as i64;
    for step in 0..steps {
        let sc = token.unblind(&out.enc_state).map_err(crypto("state"))?;
        if program.halt.contains(&sc) {
            break;
        }
        let idx = (out.head + b) as usize;
        let cc = token.unblind(&out.tape[idx]).map_err(crypto(format!("cell {}", out.head)))?;
        ops::record(Op::Lookup);
        let entry = program
            .table
            .get(&transition_key(params, program.salt, &sc, &cc))
            .ok_or(BlindError::Stuck { step })?;
        out.enc_state = entry.new_state.clone();
        out.tape[idx] = entry.new_symbol.clone();
        writes.push(out.enc_state.to_bytes(params));
        writes.push(out.tape[idx].to_bytes(params));
        out.head += entry.mv.offset();
        out.logical_step += 1;
        if !(-b..=b).contains(&out.head) {
            return Err(BlindError::SpaceExceeded { step });
        }
    }
    Ok(LeakyTrace { writes, config: out })
}
