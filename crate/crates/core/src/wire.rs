//! JSON envelopes for every artifact.
//!
//! Each file is an object with `kind`, `version` and `fingerprint` at the top
//! level. Numbers are lowercase big-endian hex without leading zeros. Decoding
//! checks the kind, the version, subgroup membership of every element and
//! that the fingerprint matches the parameters in use.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blind::{BlindProgram, EncryptedConfiguration, Encoding, TransitionEntry};
use crate::deg::{DegCiphertext, DegKeyPair, DegPublicKey, DegSecretKey};
use crate::group::{from_hex, GroupElement, GroupError, GroupParams, Scalar};
use crate::hpkeet::{Ciphertext, Keys, PublicKey, Token};
use crate::tm::{Move, Poly};

pub const VERSION: u32 = 1;
pub const SECRET: &str = "SECRET";

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a {expected} file, found {found}")]
    Kind { expected: &'static str, found: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("parameter fingerprint mismatch")]
    Fingerprint,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid {0}")]
    Invalid(String),
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    version: u32,
}

/// Reads the `kind` field without decoding the rest.
pub fn peek_kind(json: &str) -> Result<String, WireError> {
    Ok(serde_json::from_str::<Header>(json)?.kind)
}

fn check_header(json: &str, expected: &[&'static str]) -> Result<String, WireError> {
    let h: Header = serde_json::from_str(json)?;
    if !expected.contains(&h.kind.as_str()) {
        return Err(WireError::Kind {
            expected: expected[0],
            found: h.kind,
        });
    }
    if h.version != VERSION {
        return Err(WireError::Version(h.version));
    }
    Ok(h.kind)
}

fn decode<T: DeserializeOwned>(json: &str, kind: &'static str) -> Result<T, WireError> {
    check_header(json, &[kind])?;
    Ok(serde_json::from_str(json)?)
}

fn encode<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn check_fp(params: &GroupParams, fp: &str) -> Result<(), WireError> {
    if params.fingerprint() != fp {
        return Err(WireError::Fingerprint);
    }
    Ok(())
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct ParamsBody {
    p: String,
    q: String,
    g: String,
    h: String,
}

impl ParamsBody {
    fn of(p: &GroupParams) -> Self {
        ParamsBody {
            p: crate::group::to_hex(p.p()),
            q: crate::group::to_hex(p.q()),
            g: p.g().to_hex(),
            h: p.h().to_hex(),
        }
    }

    fn build(&self, fingerprint: &str) -> Result<Arc<GroupParams>, WireError> {
        let params = GroupParams::with_h(from_hex(&self.p)?, from_hex(&self.q)?, from_hex(&self.g)?, from_hex(&self.h)?)?;
        check_fp(&params, fingerprint)?;
        Ok(Arc::new(params))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    kind: String,
    version: u32,
    fingerprint: String,
    #[serde(flatten)]
    params: ParamsBody,
}

pub fn params_to_json(p: &GroupParams) -> String {
    encode(&ParamsFile {
        kind: "params".into(),
        version: VERSION,
        fingerprint: p.fingerprint(),
        params: ParamsBody::of(p),
    })
}

pub fn params_from_json(json: &str) -> Result<Arc<GroupParams>, WireError> {
    let f: ParamsFile = decode(json, "params")?;
    f.params.build(&f.fingerprint)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairPub {
    y1: String,
    y2: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairSecret {
    x1: String,
    x2: String,
}

fn pub_pair(k: &DegPublicKey) -> PairPub {
    PairPub {
        y1: k.y1.to_hex(),
        y2: k.y2.to_hex(),
    }
}

fn secret_pair(k: &DegSecretKey) -> PairSecret {
    PairSecret {
        x1: k.x1.to_hex(),
        x2: k.x2.to_hex(),
    }
}

fn read_pub(p: &GroupParams, k: &PairPub) -> Result<DegPublicKey, WireError> {
    Ok(DegPublicKey {
        y1: p.element_from_hex(&k.y1)?,
        y2: p.element_from_hex(&k.y2)?,
    })
}

fn read_keypair(p: &GroupParams, public: &PairPub, secret: &PairSecret) -> Result<DegKeyPair, WireError> {
    let kp = DegKeyPair::from_secret(p, p.scalar_from_hex(&secret.x1)?, p.scalar_from_hex(&secret.x2)?)
        .ok_or_else(|| WireError::Invalid("key pair with x1 = x2".into()))?;
    if kp.public != read_pub(p, public)? {
        return Err(WireError::Invalid("public key does not match secret key".into()));
    }
    Ok(kp)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeysFile {
    kind: String,
    version: u32,
    fingerprint: String,
    secret: String,
    params: ParamsBody,
    pk1: PairPub,
    pk2: PairPub,
    sk1: PairSecret,
    sk2: PairSecret,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PublicKeyFile {
    kind: String,
    version: u32,
    fingerprint: String,
    params: ParamsBody,
    pk1: PairPub,
    pk2: PairPub,
}

pub fn keys_to_json(k: &Keys) -> String {
    encode(&KeysFile {
        kind: "keys".into(),
        version: VERSION,
        fingerprint: k.params().fingerprint(),
        secret: SECRET.into(),
        params: ParamsBody::of(k.params()),
        pk1: pub_pair(&k.public.pk1),
        pk2: pub_pair(&k.public.pk2),
        sk1: secret_pair(&k.secret.sk1),
        sk2: secret_pair(&k.secret.sk2),
    })
}

pub fn keys_from_json(json: &str) -> Result<Keys, WireError> {
    let f: KeysFile = decode(json, "keys")?;
    let params = f.params.build(&f.fingerprint)?;
    let k1 = read_keypair(&params, &f.pk1, &f.sk1)?;
    let k2 = read_keypair(&params, &f.pk2, &f.sk2)?;
    Ok(Keys::from_parts(params, k1, k2))
}

pub fn public_key_to_json(pk: &PublicKey) -> String {
    encode(&PublicKeyFile {
        kind: "public-key".into(),
        version: VERSION,
        fingerprint: pk.params().fingerprint(),
        params: ParamsBody::of(pk.params()),
        pk1: pub_pair(&pk.pk1),
        pk2: pub_pair(&pk.pk2),
    })
}

/// Accepts a public-key file or a full key file.
pub fn public_key_from_json(json: &str) -> Result<PublicKey, WireError> {
    if check_header(json, &["public-key", "keys"])? == "keys" {
        return Ok(keys_from_json(json)?.public);
    }
    let f: PublicKeyFile = serde_json::from_str(json)?;
    let params = f.params.build(&f.fingerprint)?;
    let pk1 = read_pub(&params, &f.pk1)?;
    let pk2 = read_pub(&params, &f.pk2)?;
    Ok(PublicKey::new(params, pk1, pk2))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenFile {
    kind: String,
    version: u32,
    fingerprint: String,
    secret: String,
    params: ParamsBody,
    sk2: PairSecret,
}

pub fn token_to_json(t: &Token) -> String {
    encode(&TokenFile {
        kind: "token".into(),
        version: VERSION,
        fingerprint: t.params().fingerprint(),
        secret: SECRET.into(),
        params: ParamsBody::of(t.params()),
        sk2: secret_pair(&t.sk2),
    })
}

pub fn token_from_json(json: &str) -> Result<Token, WireError> {
    let f: TokenFile = decode(json, "token")?;
    let params = f.params.build(&f.fingerprint)?;
    let sk2 = DegSecretKey {
        x1: params.scalar_from_hex(&f.sk2.x1)?,
        x2: params.scalar_from_hex(&f.sk2.x2)?,
    };
    if sk2.x1 == sk2.x2 {
        return Err(WireError::Invalid("token with x1 = x2".into()));
    }
    Ok(Token::new(params, sk2))
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct DegBody {
    u: String,
    v: String,
    w: String,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct CiphertextBody {
    c1: DegBody,
    c2: String,
    c3: DegBody,
}

fn deg_body(c: &DegCiphertext) -> DegBody {
    DegBody {
        u: c.u.to_hex(),
        v: c.v.to_hex(),
        w: c.w.to_hex(),
    }
}

fn read_deg(p: &GroupParams, b: &DegBody) -> Result<DegCiphertext, WireError> {
    Ok(DegCiphertext {
        u: p.element_from_hex(&b.u)?,
        v: p.element_from_hex(&b.v)?,
        w: p.element_from_hex(&b.w)?,
    })
}

impl CiphertextBody {
    fn of(c: &Ciphertext) -> Self {
        CiphertextBody {
            c1: deg_body(&c.c1),
            c2: c.c2.to_hex(),
            c3: deg_body(&c.c3),
        }
    }

    fn read(&self, p: &GroupParams) -> Result<Ciphertext, WireError> {
        Ok(Ciphertext {
            c1: read_deg(p, &self.c1)?,
            c2: p.element_from_hex(&self.c2)?,
            c3: read_deg(p, &self.c3)?,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CiphertextFile {
    kind: String,
    version: u32,
    fingerprint: String,
    #[serde(flatten)]
    body: CiphertextBody,
}

pub fn ciphertext_to_json(params: &GroupParams, c: &Ciphertext) -> String {
    encode(&CiphertextFile {
        kind: "ciphertext".into(),
        version: VERSION,
        fingerprint: params.fingerprint(),
        body: CiphertextBody::of(c),
    })
}

pub fn ciphertext_from_json(params: &GroupParams, json: &str) -> Result<Ciphertext, WireError> {
    let f: CiphertextFile = decode(json, "ciphertext")?;
    check_fp(params, &f.fingerprint)?;
    f.body.read(params)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryBody {
    key: String,
    #[serde(rename = "move")]
    mv: char,
    delta_state: CiphertextBody,
    delta_symbol: CiphertextBody,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProgramFile {
    kind: String,
    version: u32,
    fingerprint: String,
    params: ParamsBody,
    pk1: PairPub,
    pk2: PairPub,
    salt: u32,
    time_bound: Vec<u64>,
    space_bound: Vec<u64>,
    start: CiphertextBody,
    halt: Vec<String>,
    table: Vec<EntryBody>,
}

pub fn program_to_json(prog: &BlindProgram) -> String {
    let params = prog.params();
    let mut table: Vec<EntryBody> = prog
        .table
        .iter()
        .map(|(k, e)| EntryBody {
            key: hex::encode(k),
            mv: e.mv.as_char(),
            delta_state: CiphertextBody::of(&e.delta_state),
            delta_symbol: CiphertextBody::of(&e.delta_symbol),
        })
        .collect();
    table.sort_by(|a, b| a.key.cmp(&b.key));
    let mut halt: Vec<String> = prog.halt.iter().map(GroupElement::to_hex).collect();
    halt.sort();
    encode(&ProgramFile {
        kind: "program".into(),
        version: VERSION,
        fingerprint: prog.fingerprint(),
        params: ParamsBody::of(params),
        pk1: pub_pair(&prog.pk.pk1),
        pk2: pub_pair(&prog.pk.pk2),
        salt: prog.salt,
        time_bound: prog.time_bound.coeffs().to_vec(),
        space_bound: prog.space_bound.coeffs().to_vec(),
        start: CiphertextBody::of(&prog.enc_start),
        halt,
        table,
    })
}

pub fn program_from_json(json: &str) -> Result<BlindProgram, WireError> {
    let f: ProgramFile = decode(json, "program")?;
    let params = f.params.build(&f.fingerprint)?;
    let pk = PublicKey::new(params.clone(), read_pub(&params, &f.pk1)?, read_pub(&params, &f.pk2)?);
    let mut table = std::collections::HashMap::with_capacity(f.table.len());
    for e in &f.table {
        let key: [u8; 32] = hex::decode(&e.key)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| WireError::Invalid(format!("table key {}", e.key)))?;
        let entry = TransitionEntry {
            delta_state: e.delta_state.read(&params)?,
            delta_symbol: e.delta_symbol.read(&params)?,
            mv: Move::from_char(e.mv).ok_or_else(|| WireError::Invalid(format!("move {:?}", e.mv)))?,
        };
        if table.insert(key, entry).is_some() {
            return Err(WireError::Invalid(format!("duplicate table key {}", e.key)));
        }
    }
    let halt = f
        .halt
        .iter()
        .map(|h| params.element_from_hex(h))
        .collect::<Result<_, _>>()?;
    Ok(BlindProgram {
        enc_start: f.start.read(&params)?,
        pk,
        table,
        halt,
        time_bound: Poly::new(f.time_bound).map_err(WireError::Invalid)?,
        space_bound: Poly::new(f.space_bound).map_err(WireError::Invalid)?,
        salt: f.salt,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodingFile {
    kind: String,
    version: u32,
    fingerprint: String,
    secret: String,
    blank: char,
    states: BTreeMap<String, String>,
    symbols: BTreeMap<char, String>,
}

pub fn encoding_to_json(params: &GroupParams, enc: &Encoding) -> String {
    encode(&EncodingFile {
        kind: "encoding".into(),
        version: VERSION,
        fingerprint: params.fingerprint(),
        secret: SECRET.into(),
        blank: enc.blank(),
        states: enc.states().iter().map(|(k, v)| (k.clone(), v.to_hex())).collect(),
        symbols: enc.symbols().iter().map(|(k, v)| (*k, v.to_hex())).collect(),
    })
}

pub fn encoding_from_json(params: &GroupParams, json: &str) -> Result<Encoding, WireError> {
    let f: EncodingFile = decode(json, "encoding")?;
    check_fp(params, &f.fingerprint)?;
    let scalar = |h: &String| -> Result<Scalar, WireError> { Ok(params.scalar_from_hex(h)?) };
    let states = f
        .states
        .iter()
        .map(|(k, v)| Ok((k.clone(), scalar(v)?)))
        .collect::<Result<_, WireError>>()?;
    let symbols = f
        .symbols
        .iter()
        .map(|(k, v)| Ok((*k, scalar(v)?)))
        .collect::<Result<_, WireError>>()?;
    Encoding::from_codes(params, states, symbols, f.blank).map_err(|e| WireError::Invalid(e.to_string()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TapeFile {
    kind: String,
    version: u32,
    fingerprint: String,
    bound: u64,
    head: i64,
    input_len: u64,
    logical_step: u64,
    state: CiphertextBody,
    cells: Vec<CiphertextBody>,
}

pub fn tape_to_json(conf: &EncryptedConfiguration) -> String {
    encode(&TapeFile {
        kind: "tape".into(),
        version: VERSION,
        fingerprint: conf.fingerprint.clone(),
        bound: conf.bound,
        head: conf.head,
        input_len: conf.input_len,
        logical_step: conf.logical_step,
        state: CiphertextBody::of(&conf.enc_state),
        cells: conf.tape.iter().map(CiphertextBody::of).collect(),
    })
}

pub fn tape_from_json(params: &GroupParams, json: &str) -> Result<EncryptedConfiguration, WireError> {
    let f: TapeFile = decode(json, "tape")?;
    check_fp(params, &f.fingerprint)?;
    if f.cells.len() as u64 != 2 * f.bound + 1 || f.head.unsigned_abs() > f.bound {
        return Err(WireError::Invalid("tape shape".into()));
    }
    Ok(EncryptedConfiguration {
        fingerprint: f.fingerprint,
        enc_state: f.state.read(params)?,
        tape: f.cells.iter().map(|c| c.read(params)).collect::<Result<_, _>>()?,
        bound: f.bound,
        head: f.head,
        input_len: f.input_len,
        logical_step: f.logical_step,
    })
}
