//! `blindtm` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 validation or fingerprint mismatch,
//! 3 ciphertext rejected, 4 verification mismatch.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use blindtm::blind::{self, BlindError, Encoding};
use blindtm::games::{self, GameError, PlaintextDomain};
use blindtm::group::{GroupParams, Scalar};
use blindtm::hpkeet::{self, Keys};
use blindtm::tm::{self, corpus, TmSpec};
use blindtm::wire::{self, WireError};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod bench;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Crypto(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Crypto(_) => 3,
            CliError::Mismatch(_) => 4,
        }
    }
}

impl From<WireError> for CliError {
    fn from(e: WireError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<BlindError> for CliError {
    fn from(e: BlindError) -> Self {
        match e {
            BlindError::Crypto { .. } | BlindError::Corrupt { .. } => CliError::Crypto(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<hpkeet::HpkeetError> for CliError {
    fn from(e: hpkeet::HpkeetError) -> Self {
        CliError::Crypto(e.to_string())
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "blindtm", version, about = "Blind Turing machines over HPKEET ciphertexts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate group parameters and a key pair.
    Keygen {
        #[arg(long, default_value_t = 256)]
        bits: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the comparison token from a key file.
    Token {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt an integer message.
    Encrypt {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        message: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test two ciphertexts for plaintext equality with a token.
    Compare {
        #[arg(long)]
        token: PathBuf,
        a: PathBuf,
        b: PathBuf,
    },
    /// Compile a machine into a blind program and a secret encoding.
    Compile {
        /// DSL file, or the name of a bundled machine.
        #[arg(long)]
        tm: String,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_program: PathBuf,
        #[arg(long)]
        out_encoding: PathBuf,
    },
    /// Encrypt an input word onto a tape.
    EncryptTape {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        encoding: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a blind program on an encrypted tape.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        token: PathBuf,
        #[arg(long)]
        tape: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the head-trace log.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Decrypt and decode a tape.
    DecryptTape {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        encoding: PathBuf,
        #[arg(long)]
        tape: PathBuf,
    },
    /// Compare plaintext and blind runs over many inputs.
    Verify {
        #[arg(long)]
        tm: String,
        /// Comma-separated inputs; defaults to every word up to --max-len.
        #[arg(long)]
        inputs: Option<String>,
        #[arg(long, default_value_t = 4)]
        max_len: usize,
        #[arg(long, default_value_t = 80)]
        bits: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Use an existing program instead of compiling a fresh one.
        #[arg(long, requires_all = ["encoding", "keys"])]
        program: Option<PathBuf>,
        #[arg(long)]
        encoding: Option<PathBuf>,
        #[arg(long)]
        keys: Option<PathBuf>,
    },
    /// Time the core operations and check their operation counts.
    Bench {
        #[arg(long, default_value = "256,512,2048", value_delimiter = ',')]
        bits_list: Vec<u64>,
        #[arg(long, default_value_t = 10)]
        iters: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a security experiment with a built-in adversary.
    Games {
        #[arg(long, value_enum)]
        game: GameKind,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = AdversaryKind::Random)]
        adversary: AdversaryKind,
        #[arg(long, default_value_t = 80)]
        bits: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 16)]
        challenges: usize,
        #[arg(long, default_value_t = 1)]
        queries: u64,
    },
    /// Bind artifact files into a manifest after checking their fingerprints.
    Manifest {
        #[arg(long)]
        out: PathBuf,
        /// `name=path` pairs.
        #[arg(required = true)]
        files: Vec<String>,
    },
    /// Re-check every file a manifest references.
    CheckManifest { manifest: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameKind {
    Ow,
    Ind,
    Multi,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryKind {
    /// Guesses at random.
    Random,
    /// Holds the token and knows the 4 plaintexts (OW).
    Known,
    /// Holds the token, plaintexts are 4 secret codes (OW).
    Naive,
    /// Given the token out of band (IND).
    Token,
    /// Looks for byte-identical ciphertexts (IND).
    Bytes,
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Loads a DSL file, or a bundled machine by name.
pub fn load_tm(arg: &str) -> Result<TmSpec, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        return tm::parse_tm(&read(path)?).map_err(|e| CliError::Validation(format!("{arg}: {e}")));
    }
    corpus::get(arg).ok_or_else(|| CliError::Validation(format!("{arg}: no such file or bundled machine")))
}

fn gen_params(bits: u64, rng: &mut ChaCha20Rng) -> Result<Arc<GroupParams>, CliError> {
    GroupParams::generate(bits, rng)
        .map(Arc::new)
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Validation(format!("output: {e}"))
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Keygen { bits, seed, out: path } => {
            let mut rng = rng(seed);
            let keys = hpkeet::keygen(gen_params(bits, &mut rng)?, &mut rng);
            write(&path, &wire::keys_to_json(&keys))?;
            writeln!(out, "fingerprint {}", keys.params().fingerprint()).map_err(out_err)
        }
        Command::Token { keys, out: path } => {
            let keys = wire::keys_from_json(&read(&keys)?)?;
            write(&path, &wire::token_to_json(&keys.authorize()))
        }
        Command::Encrypt {
            keys,
            message,
            seed,
            out: path,
        } => {
            let pk = wire::public_key_from_json(&read(&keys)?)?;
            let c = pk.encrypt(&pk.params().scalar_u64(message), &mut rng(seed));
            write(&path, &wire::ciphertext_to_json(pk.params(), &c))
        }
        Command::Compare { token, a, b } => {
            let token = wire::token_from_json(&read(&token)?)?;
            let p = token.params().clone();
            let a = wire::ciphertext_from_json(&p, &read(&a)?)?;
            let b = wire::ciphertext_from_json(&p, &read(&b)?)?;
            let eq = token.compare(&a, &b)?;
            writeln!(out, "{}", if eq { "equal" } else { "not equal" }).map_err(out_err)
        }
        Command::Compile {
            tm,
            keys,
            seed,
            out_program,
            out_encoding,
        } => {
            let spec = load_tm(&tm)?;
            let pk = wire::public_key_from_json(&read(&keys)?)?;
            let mut rng = rng(seed);
            let enc = Encoding::generate(&spec, pk.params(), &mut rng)?;
            let prog = blind::compile(&spec, &enc, &pk, &mut rng)?;
            write(&out_program, &wire::program_to_json(&prog))?;
            write(&out_encoding, &wire::encoding_to_json(pk.params(), &enc))?;
            writeln!(out, "compiled {} rules", prog.table.len()).map_err(out_err)
        }
        Command::EncryptTape {
            program,
            encoding,
            input,
            seed,
            out: path,
        } => {
            let prog = wire::program_from_json(&read(&program)?)?;
            let enc = wire::encoding_from_json(prog.params(), &read(&encoding)?)?;
            let conf = blind::encrypt_input(&prog, &enc, &input, &mut rng(seed))?;
            write(&path, &wire::tape_to_json(&conf))
        }
        Command::Run {
            program,
            token,
            tape,
            seed,
            out: path,
            trace,
        } => {
            let prog = wire::program_from_json(&read(&program)?)?;
            let token = wire::token_from_json(&read(&token)?)?;
            if token.params().fingerprint() != prog.fingerprint() {
                return Err(CliError::Validation("token and program fingerprints differ".into()));
            }
            let conf = wire::tape_from_json(prog.params(), &read(&tape)?)?;
            let result = blind::blind_run(&prog, &token, &conf, &mut rng(seed))?;
            write(&path, &wire::tape_to_json(&result.config))?;
            if let Some(t) = trace {
                write(&t, &result.trace.to_log())?;
            }
            writeln!(out, "ran {} steps over {} cells", result.trace.steps, 2 * result.trace.bound + 1).map_err(out_err)
        }
        Command::DecryptTape { keys, encoding, tape } => {
            let keys = wire::keys_from_json(&read(&keys)?)?;
            let p = keys.params().clone();
            let enc = wire::encoding_from_json(&p, &read(&encoding)?)?;
            let conf = wire::tape_from_json(&p, &read(&tape)?)?;
            let output = blind::decrypt_tape(&keys.secret, &enc, &conf)?;
            writeln!(out, "{output}").map_err(out_err)
        }
        Command::Verify {
            tm,
            inputs,
            max_len,
            bits,
            seed,
            program,
            encoding,
            keys,
        } => {
            let spec = load_tm(&tm)?;
            let mut rng = rng(seed);
            let (keys, enc, prog) = match (program, encoding, keys) {
                (Some(p), Some(e), Some(k)) => {
                    let keys = wire::keys_from_json(&read(&k)?)?;
                    let prog = wire::program_from_json(&read(&p)?)?;
                    if prog.fingerprint() != keys.params().fingerprint() {
                        return Err(CliError::Validation("keys and program fingerprints differ".into()));
                    }
                    let enc = wire::encoding_from_json(keys.params(), &read(&e)?)?;
                    (keys, enc, prog)
                }
                _ => {
                    let keys = hpkeet::keygen(gen_params(bits, &mut rng)?, &mut rng);
                    let enc = Encoding::generate(&spec, keys.params(), &mut rng)?;
                    let prog = blind::compile(&spec, &enc, &keys.public, &mut rng)?;
                    (keys, enc, prog)
                }
            };
            let words: Vec<String> = match inputs {
                Some(list) => list.split(',').map(str::to_string).collect(),
                None => tm::all_words(&spec.input_alphabet, max_len),
            };
            let report = verify(&spec, &keys, &enc, &prog, &words, &mut rng);
            for (w, msg) in &report.failures {
                writeln!(out, "MISMATCH {w:?}: {msg}").map_err(out_err)?;
            }
            writeln!(out, "checked {} inputs, {} mismatches", report.checked, report.failures.len()).map_err(out_err)?;
            if report.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Mismatch(format!("{} mismatches", report.failures.len())))
            }
        }
        Command::Bench {
            bits_list,
            iters,
            seed,
            csv,
        } => {
            let report = bench::run_bench(&bits_list, iters, &mut rng(seed))?;
            write!(out, "{}", report.to_table()).map_err(out_err)?;
            match csv {
                Some(path) => write(&path, &report.to_csv()),
                None => write!(out, "\n{}", report.to_csv()).map_err(out_err),
            }
        }
        Command::Games {
            game,
            trials,
            adversary,
            bits,
            seed,
            challenges,
            queries,
        } => {
            let mut rng = rng(seed);
            let keys = hpkeet::keygen(gen_params(bits, &mut rng)?, &mut rng);
            let result = run_game(&keys, game, adversary, trials, challenges, queries, &mut rng)?;
            writeln!(
                out,
                "{:<8} {:<8} {:>8} {:>8} {:>10} {:>10}",
                "game", "adv", "trials", "wins", "advantage", "std_error"
            )
            .map_err(out_err)?;
            writeln!(
                out,
                "{:<8} {:<8} {:>8} {:>8} {:>10.4} {:>10.4}",
                format!("{game:?}").to_lowercase(),
                format!("{adversary:?}").to_lowercase(),
                result.trials,
                result.wins,
                result.advantage_estimate,
                result.std_error
            )
            .map_err(out_err)?;
            writeln!(out, "{}", serde_json::to_string(&result).expect("serializable")).map_err(out_err)
        }
        Command::Manifest { out: path, files } => {
            let mut map = BTreeMap::new();
            for f in files {
                let (name, p) = f
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("expected name=path, got {f:?}")))?;
                map.insert(name.to_string(), PathBuf::from(p));
            }
            let m = Manifest::build(map)?;
            write(&path, &serde_json::to_string_pretty(&m).expect("serializable"))?;
            writeln!(out, "fingerprint {}", m.fingerprint).map_err(out_err)
        }
        Command::CheckManifest { manifest } => {
            let m: Manifest = serde_json::from_str(&read(&manifest)?).map_err(|e| CliError::Validation(e.to_string()))?;
            m.check()?;
            writeln!(out, "ok {}", m.fingerprint).map_err(out_err)
        }
    }
}

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub checked: usize,
    pub failures: Vec<(String, String)>,
}

/// Runs each word through the plaintext machine and the blind pipeline.
pub fn verify(
    spec: &TmSpec,
    keys: &Keys,
    enc: &Encoding,
    prog: &blind::BlindProgram,
    words: &[String],
    rng: &mut ChaCha20Rng,
) -> VerifyReport {
    let token = keys.authorize();
    let mut report = VerifyReport::default();
    for w in words {
        report.checked += 1;
        let n = w.chars().count() as u64;
        let plain = match tm::run(spec, w, spec.time_bound.eval(n), false) {
            Ok(r) if r.halted => r.output(spec.blank),
            Ok(_) => {
                report.failures.push((w.clone(), "plaintext run did not halt".into()));
                continue;
            }
            Err(e) => {
                report.failures.push((w.clone(), format!("plaintext run: {e}")));
                continue;
            }
        };
        let blind_out = blind::encrypt_input(prog, enc, w, rng)
            .and_then(|c| blind::blind_run(prog, &token, &c, rng))
            .and_then(|r| blind::decrypt_tape(&keys.secret, enc, &r.config));
        match blind_out {
            Ok(b) if b == plain => {}
            Ok(b) => report.failures.push((w.clone(), format!("plaintext {plain:?}, blind {b:?}"))),
            Err(e) => report.failures.push((w.clone(), format!("blind run: {e}"))),
        }
    }
    report
}

#[allow(clippy::too_many_arguments)]
fn run_game(
    keys: &Keys,
    game: GameKind,
    adversary: AdversaryKind,
    trials: u64,
    challenges: usize,
    queries: u64,
    rng: &mut ChaCha20Rng,
) -> Result<games::GameResult, CliError> {
    let p = keys.params().clone();
    let codes = |rng: &mut ChaCha20Rng| -> Vec<Scalar> { (0..4).map(|_| p.random_scalar(rng)).collect() };
    match game {
        GameKind::Ow => {
            let (mut adv, domain): (Box<dyn games::OwAdversary>, PlaintextDomain) = match adversary {
                AdversaryKind::Random => (Box::new(games::RandomGuessOw::new(32)), PlaintextDomain::Range { bits: 32 }),
                AdversaryKind::Known => {
                    let c = codes(rng);
                    (Box::new(games::TokenSearchOw::known(c.clone())), PlaintextDomain::Set(c))
                }
                AdversaryKind::Naive => (Box::new(games::TokenSearchOw::enumerate(16)), PlaintextDomain::Set(codes(rng))),
                other => return Err(CliError::Usage(format!("adversary {other:?} does not play the ow game"))),
            };
            Ok(games::run_ow_game(keys, adv.as_mut(), &domain, queries, trials, rng)?)
        }
        GameKind::Ind | GameKind::Multi => {
            let mut adv: Box<dyn games::IndAdversary> = match adversary {
                AdversaryKind::Random => Box::new(games::RandomGuessInd),
                AdversaryKind::Token => Box::new(games::TokenDistinguisher::new(keys.authorize())),
                AdversaryKind::Bytes => Box::new(games::ByteEqualityInd::new(4)),
                other => return Err(CliError::Usage(format!("adversary {other:?} does not play the ind game"))),
            };
            let n = if game == GameKind::Ind { 1 } else { challenges };
            Ok(games::run_multi_challenge_ind(keys, adv.as_mut(), queries, n, trials, rng)?)
        }
    }
}

/// Artifact paths bound to one parameter fingerprint.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub kind: String,
    pub version: u32,
    pub fingerprint: String,
    pub files: BTreeMap<String, PathBuf>,
}

fn file_fingerprint(path: &Path) -> Result<String, CliError> {
    let v: serde_json::Value =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    v["fingerprint"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| CliError::Validation(format!("{}: no fingerprint", path.display())))
}

impl Manifest {
    pub fn build(files: BTreeMap<String, PathBuf>) -> Result<Self, CliError> {
        let mut fingerprint: Option<String> = None;
        for (name, path) in &files {
            let fp = file_fingerprint(path)?;
            match &fingerprint {
                Some(f) if *f != fp => return Err(CliError::Validation(format!("{name}: fingerprint mismatch"))),
                _ => fingerprint = Some(fp),
            }
        }
        Ok(Manifest {
            kind: "manifest".into(),
            version: wire::VERSION,
            fingerprint: fingerprint.ok_or_else(|| CliError::Usage("empty manifest".into()))?,
            files,
        })
    }

    pub fn check(&self) -> Result<(), CliError> {
        for (name, path) in &self.files {
            if file_fingerprint(path)? != self.fingerprint {
                return Err(CliError::Validation(format!("{name}: fingerprint mismatch")));
            }
        }
        Ok(())
    }
}
