use std::sync::Arc;
use std::time::Instant;

use blindtm::blind::{compile, select_transition, Encoding};
use blindtm::deg;
use blindtm::group::GroupParams;
use blindtm::hpkeet::keygen;
use blindtm::ops::{self, OpCounts};
use blindtm::tm::corpus;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub op: &'static str,
    pub bits: u64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    #[serde(skip)]
    pub counts: OpCounts,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Counts each benchmarked operation must produce.
pub fn expected_counts(op: &str) -> OpCounts {
    let c = |enc, dec, exp, mul, inv, lookups| OpCounts {
        enc,
        dec,
        exp,
        mul,
        inv,
        lookups,
        ..OpCounts::default()
    };
    match op {
        "enc" => c(2, 0, 2, 1, 0, 0),
        "dec" => c(0, 2, 1, 1, 0, 0),
        "com" => c(0, 2, 2, 2, 2, 0),
        "select" => c(0, 2, 2, 2, 2, 1),
        "tape" => c(0, 0, 0, 3, 0, 0),
        _ => OpCounts::default(),
    }
}

fn time<R>(iters: u32, mut f: impl FnMut() -> R) -> (f64, f64, f64) {
    let mut samples = Vec::with_capacity(iters as usize);
    for _ in 0..iters.max(1) {
        let t = Instant::now();
        std::hint::black_box(f());
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(0.0, f64::max);
    (mean, min, max)
}

fn row<R>(
    report: &mut BenchReport,
    op: &'static str,
    bits: u64,
    iters: u32,
    mut f: impl FnMut() -> R,
) -> Result<(), CliError> {
    let (_, counts) = ops::measure(&mut f);
    if counts != expected_counts(op) {
        return Err(CliError::Mismatch(format!(
            "{op} at {bits} bits: counted {counts:?}, expected {:?}",
            expected_counts(op)
        )));
    }
    let (mean_ms, min_ms, max_ms) = time(iters, f);
    report.rows.push(BenchRow {
        op,
        bits,
        mean_ms,
        min_ms,
        max_ms,
        counts,
    });
    Ok(())
}

pub fn run_bench<R: Rng + ?Sized>(bits_list: &[u64], iters: u32, rng: &mut R) -> Result<BenchReport, CliError> {
    let mut report = BenchReport::default();
    for &bits in bits_list {
        let params = Arc::new(GroupParams::generate(bits, rng).map_err(|e| CliError::Validation(e.to_string()))?);
        let keys = keygen(params.clone(), rng);
        let pk = &keys.public;
        let token = keys.authorize();
        let m = params.random_scalar(rng);
        let a = pk.encrypt(&m, rng);
        let b = pk.encrypt(&m, rng);

        let mut r = rand_chacha::ChaCha20Rng::from_seed(rng.gen());
        row(&mut report, "enc", bits, iters, || pk.encrypt(&m, &mut r))?;
        row(&mut report, "dec", bits, iters, || keys.decrypt(&a).expect("valid ciphertext"))?;
        row(&mut report, "com", bits, iters, || token.compare(&a, &b).expect("valid ciphertexts"))?;

        let machine = corpus::parity();
        let enc = Encoding::generate(&machine, &params, rng).map_err(|e| CliError::Validation(e.to_string()))?;
        let prog = compile(&machine, &enc, pk, rng).map_err(|e| CliError::Validation(e.to_string()))?;
        let state = pk.encrypt(enc.state_code(&machine.start).expect("start state"), rng);
        let cell = pk.encrypt(enc.symbol_code('1').expect("input symbol"), rng);
        row(&mut report, "select", bits, iters, || {
            select_transition(&prog, &token, &state, &cell)
                .expect("valid ciphertexts")
                .is_some()
        })?;
        row(&mut report, "tape", bits, iters, || deg::hom_mul(&params, &a.c1, &b.c1))?;
    }
    Ok(report)
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["op", "bits", "mean_ms", "min_ms", "max_ms", "exp", "mul", "inv", "E", "D"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.op.to_string(),
                r.bits.to_string(),
                format!("{:.4}", r.mean_ms),
                format!("{:.4}", r.min_ms),
                format!("{:.4}", r.max_ms),
                r.counts.exp.to_string(),
                r.counts.mul.to_string(),
                r.counts.inv.to_string(),
                r.counts.enc.to_string(),
                r.counts.dec.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8} {:>6} {:>10} {:>10} {:>10} {:>4} {:>4} {:>4} {:>3} {:>3}\n",
            "op", "bits", "mean_ms", "min_ms", "max_ms", "exp", "mul", "inv", "E", "D"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>4} {:>4} {:>4} {:>3} {:>3}\n",
                r.op, r.bits, r.mean_ms, r.min_ms, r.max_ms, r.counts.exp, r.counts.mul, r.counts.inv, r.counts.enc, r.counts.dec
            ));
        }
        out
    }
}
