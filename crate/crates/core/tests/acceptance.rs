//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use blindtm::blind::{
    blind_run_observed, compile, compile_replacing, decrypt_tape, encrypt_input, encrypt_tape, leaky_run,
    repetition_fingerprint, select_transition, sweep_schedule, Encoding,
};
use blindtm::deg;
use blindtm::games::{
    run_ind_game, run_ow_game, PlaintextDomain, RandomGuessInd, TokenDistinguisher, TokenSearchOw,
};
use blindtm::group::{GroupParams, Scalar};
use blindtm::hpkeet::{keygen, Keys};
use blindtm::ops::{self, OpCounts};
use blindtm::tm::{self, corpus, TmSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn keys(bits: u64, seed: u64) -> (Keys, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let p = Arc::new(GroupParams::generate(bits, &mut rng).expect("params"));
    (keygen(p, &mut rng), rng)
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn round_trips() -> Outcome {
    let start = Instant::now();
    for (bits, seed) in [(256, 1), (512, 2)] {
        let (k, mut rng) = keys(bits, seed);
        let p = k.params().clone();
        for i in 0..500 {
            let m = p.random_scalar(&mut rng);
            let c = k.public.encrypt(&m, &mut rng);
            let got = k.decrypt(&c).map_err(|e| format!("{bits}-bit trip {i}: {e}"))?;
            check(got == p.commit(&m), format!("{bits}-bit trip {i}: wrong commitment"))?;
        }
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(60), format!("took {t:?}"))?;
    Ok(format!("1000/1000 round trips in {:.1}s", t.as_secs_f64()))
}

fn homomorphism() -> Outcome {
    let (k, mut rng) = keys(256, 3);
    let p = k.params().clone();
    let q = p.q().clone();
    let mut wraps = 0;
    for i in 0..500 {
        let (m1, m2) = if i < 20 {
            // m1 = q - j, m2 >= j forces m1 + m2 >= q
            let j = rng.gen_range(1u64..1000);
            let m1 = p.scalar(&q - j);
            let m2 = p.scalar_add(&p.scalar_u64(j), &p.random_scalar(&mut rng));
            (m1, m2)
        } else {
            (p.random_scalar(&mut rng), p.random_scalar(&mut rng))
        };
        if m1.value() + m2.value() >= q {
            wraps += 1;
        }
        let sum = k.public.hom_add(&k.public.encrypt(&m1, &mut rng), &k.public.encrypt(&m2, &mut rng));
        let want = p.commit(&p.scalar(m1.value() + m2.value()));
        check(k.decrypt(&sum).map_err(|e| e.to_string())? == want, format!("pair {i}"))?;
    }
    check(wraps >= 10, format!("only {wraps} wraparound cases"))?;
    Ok(format!("500/500 pairs, {wraps} wraparound"))
}

fn four_symbol_spec() -> TmSpec {
    tm::parse_tm("#start s\n#halt h\n#alphabet a b c _\n#time 1\n#space 1\ns a -> h a S\n").expect("spec")
}

fn equality() -> Outcome {
    let (k, mut rng) = keys(256, 4);
    let p = k.params().clone();
    let t = k.authorize();
    let enc = Encoding::generate(&four_symbol_spec(), &p, &mut rng).map_err(|e| e.to_string())?;
    let syms: Vec<(char, Scalar)> = enc.symbols().iter().map(|(c, s)| (*c, s.clone())).collect();
    check(syms.len() == 4, "encoding is not 4 symbols")?;
    let mut pairs = 0;
    for (a, ca) in &syms {
        for (b, cb) in &syms {
            let eq = t
                .compare(&k.public.encrypt(ca, &mut rng), &k.public.encrypt(cb, &mut rng))
                .map_err(|e| e.to_string())?;
            check(eq == (a == b), format!("compare({a}, {b}) = {eq}"))?;
            pairs += 1;
        }
    }
    for i in 0..500 {
        let m1 = p.random_scalar(&mut rng);
        let m2 = p.random_scalar(&mut rng);
        if m1 == m2 {
            continue;
        }
        let eq = t
            .compare(&k.public.encrypt(&m1, &mut rng), &k.public.encrypt(&m2, &mut rng))
            .map_err(|e| e.to_string())?;
        check(!eq, format!("unequal pair {i} compared equal"))?;
    }
    Ok(format!("{pairs} ordered pairs exact, 500 unequal pairs false"))
}

fn counts(exp: u64, mul: u64, inv: u64, keygen: u64, enc: u64, dec: u64) -> OpCounts {
    OpCounts {
        exp,
        mul,
        inv,
        keygen,
        enc,
        dec,
        ..OpCounts::default()
    }
}

fn op_counts() -> Outcome {
    let (k, mut rng) = keys(256, 5);
    let p = k.params().clone();
    let mut rows = Vec::new();
    let mut expect = |name: &str, got: OpCounts, want: OpCounts| -> Result<(), String> {
        rows.push(name.to_string());
        check(got == want, format!("{name}: got {got:?}, want {want:?}"))
    };

    let (_, n) = ops::measure(|| keygen(p.clone(), &mut rng));
    expect("KeyGen", n, counts(0, 0, 0, 2, 0, 0))?;
    let m = p.random_scalar(&mut rng);
    let (a, n) = ops::measure(|| k.public.encrypt(&m, &mut rng));
    expect("Enc", n, counts(2, 1, 0, 0, 2, 0))?;
    let (_, n) = ops::measure(|| k.decrypt(&a).unwrap());
    expect("Dec", n, counts(1, 1, 0, 0, 0, 2))?;
    let (t, n) = ops::measure(|| k.authorize());
    expect("Aut", n, OpCounts::default())?;
    let b = k.public.encrypt(&m, &mut rng);
    let (_, com) = ops::measure(|| t.compare(&a, &b).unwrap());
    expect("Com", com, counts(2, 2, 2, 0, 0, 2))?;
    let (_, n) = ops::measure(|| deg::hom_mul(&p, &a.c1, &b.c1));
    expect("tape manipulation (component set)", n, counts(0, 3, 0, 0, 0, 0))?;
    let (_, n) = ops::measure(|| k.public.hom_add(&a, &b));
    expect("hom_add (two sets + c2)", n, counts(0, 7, 0, 0, 0, 0))?;

    let spec = corpus::parity();
    let enc = Encoding::generate(&spec, &p, &mut rng).map_err(|e| e.to_string())?;
    let prog = compile(&spec, &enc, &k.public, &mut rng).map_err(|e| e.to_string())?;
    let s = k.public.encrypt(enc.state_code(&spec.start).unwrap(), &mut rng);
    let c = k.public.encrypt(enc.symbol_code('1').unwrap(), &mut rng);
    let (hit, n) = ops::measure(|| select_transition(&prog, &t, &s, &c).unwrap().is_some());
    check(hit, "selection missed")?;
    let mut want = com;
    want.lookups = 1;
    expect("transition selection", n, want)?;
    check(n.scans == 0, "table was scanned")?;
    Ok(format!("{} rows exact", rows.len()))
}

struct Pass {
    bits: u64,
    max_len: usize,
    seed: u64,
}

#[derive(Default)]
struct Tally {
    runs: usize,
    mismatches: Vec<String>,
    oblivious_errors: Vec<String>,
    fresh_errors: Vec<String>,
    ciphertexts: usize,
}

/// Runs every input through the blind pipeline, checking output, trace and
/// ciphertext freshness per run.
fn sweep_machine(name: &str, spec: &TmSpec, pass: &Pass) -> Tally {
    let (k, mut rng) = keys(pass.bits, pass.seed);
    let enc = Encoding::generate(spec, k.params(), &mut rng).expect("encoding");
    let prog = compile(spec, &enc, &k.public, &mut rng).expect("compile");
    let words = tm::all_words(&spec.input_alphabet, pass.max_len);
    let threads = thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = words.len().div_ceil(threads);
    let parts: Vec<(Tally, BTreeMap<usize, String>)> = thread::scope(|s| {
        let handles: Vec<_> = words
            .chunks(chunk.max(1))
            .enumerate()
            .map(|(i, ws)| {
                let (k, enc, prog) = (&k, &enc, &prog);
                let mut rng = ChaCha20Rng::seed_from_u64(pass.seed * 1000 + i as u64);
                s.spawn(move || {
                    let token = k.authorize();
                    let mut tally = Tally::default();
                    let mut traces: BTreeMap<usize, String> = BTreeMap::new();
                    for w in ws {
                        tally.runs += 1;
                        let n = w.chars().count();
                        let plain = tm::run(spec, w, spec.time_bound.eval(n as u64), false).expect("plain run");
                        let conf = encrypt_input(prog, enc, w, &mut rng).expect("encrypt");
                        let p = k.params();
                        let mut seen: HashSet<Vec<u8>> = conf.tape.iter().map(|c| c.to_bytes(p)).collect();
                        seen.insert(conf.enc_state.to_bytes(p));
                        let mut total = seen.len();
                        let mut dup = false;
                        let out = blind_run_observed(prog, &token, &conf, &mut rng, |wr| {
                            total += 1;
                            dup |= !seen.insert(wr.ciphertext.to_bytes(p));
                        });
                        let out = match out {
                            Ok(o) => o,
                            Err(e) => {
                                tally.mismatches.push(format!("{name}({w:?}): {e}"));
                                continue;
                            }
                        };
                        tally.ciphertexts += total;
                        if dup || total != seen.len() {
                            tally.fresh_errors.push(format!("{name}({w:?})"));
                        }
                        let got = decrypt_tape(&k.secret, enc, &out.config).unwrap_or_else(|e| format!("<{e}>"));
                        if got != plain.output(spec.blank) {
                            tally.mismatches.push(format!("{name}({w:?}): {got:?} vs {:?}", plain.output(spec.blank)));
                        }
                        let t = spec.time_bound.eval(n as u64);
                        let b = spec.space_bound.eval(n as u64);
                        if out.trace.steps != t
                            || out.config.logical_step != t
                            || out.trace.positions != sweep_schedule(b, t).collect::<Vec<_>>()
                        {
                            tally.oblivious_errors.push(format!("{name}({w:?}): schedule"));
                        }
                        let log = out.trace.to_log();
                        match traces.get(&n) {
                            Some(prev) if *prev != log => tally.oblivious_errors.push(format!("{name}({w:?}): trace differs")),
                            Some(_) => {}
                            None => {
                                traces.insert(n, log);
                            }
                        }
                    }
                    (tally, traces)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).collect()
    });
    let mut tally = Tally::default();
    let mut traces: BTreeMap<usize, String> = BTreeMap::new();
    for (t, tr) in parts {
        tally.runs += t.runs;
        tally.ciphertexts += t.ciphertexts;
        tally.mismatches.extend(t.mismatches);
        tally.oblivious_errors.extend(t.oblivious_errors);
        tally.fresh_errors.extend(t.fresh_errors);
        for (n, log) in tr {
            match traces.get(&n) {
                Some(prev) if *prev != log => tally.oblivious_errors.push(format!("{name}: length {n} traces differ across workers")),
                Some(_) => {}
                None => {
                    traces.insert(n, log);
                }
            }
        }
    }
    tally
}

fn blind_pipeline() -> (Outcome, Outcome, Outcome) {
    let start = Instant::now();
    let passes = [
        Pass { bits: 80, max_len: 8, seed: 6 },
        Pass { bits: 256, max_len: 4, seed: 7 },
    ];
    let mut total = Tally::default();
    for pass in &passes {
        for (name, text) in corpus::ALL {
            let spec = tm::parse_tm(text).expect("corpus parses");
            let t = sweep_machine(name, &spec, pass);
            total.runs += t.runs;
            total.ciphertexts += t.ciphertexts;
            total.mismatches.extend(t.mismatches);
            total.oblivious_errors.extend(t.oblivious_errors);
            total.fresh_errors.extend(t.fresh_errors);
        }
    }
    let elapsed = start.elapsed();
    let equivalence = if !total.mismatches.is_empty() {
        Err(format!("{} mismatches, first: {}", total.mismatches.len(), total.mismatches[0]))
    } else if elapsed >= Duration::from_secs(600) {
        Err(format!("took {elapsed:?}"))
    } else {
        Ok(format!(
            "{} runs (3 machines, len <= 8 at 80 bits, len <= 4 at 256 bits), 0 mismatches in {:.1}s",
            total.runs,
            elapsed.as_secs_f64()
        ))
    };
    let oblivious = match total.oblivious_errors.first() {
        Some(e) => Err(format!("{} deviations, first: {e}", total.oblivious_errors.len())),
        None => Ok(format!("{} runs: traces equal per length, steps = T(n)", total.runs)),
    };
    let fresh = match total.fresh_errors.first() {
        Some(e) => Err(format!("{} runs with repeated ciphertexts, first: {e}", total.fresh_errors.len())),
        None => Ok(format!("{} ciphertexts over {} runs, no repeats within a run", total.ciphertexts, total.runs)),
    };
    (equivalence, oblivious, fresh)
}

fn negative_control() -> Outcome {
    let (k, mut rng) = keys(80, 8);
    let spec = corpus::parity();
    let enc = Encoding::generate(&spec, k.params(), &mut rng).map_err(|e| e.to_string())?;
    let leaky = compile_replacing(&spec, &enc, &k.public, &mut rng).map_err(|e| e.to_string())?;
    let prog = compile(&spec, &enc, &k.public, &mut rng).map_err(|e| e.to_string())?;
    let t = k.authorize();
    let p = k.params();
    let mut distinguished = None;
    let mut homomorphic: HashMap<String, Vec<usize>> = HashMap::new();
    for n in 1..=4 {
        let words = tm::all_words(&spec.input_alphabet, n);
        let words: Vec<&String> = words.iter().filter(|w| w.len() == n).collect();
        let mut leaky_fp: HashMap<&String, Vec<usize>> = HashMap::new();
        for w in &words {
            let b = spec.space_bound.eval(n as u64);
            let conf = encrypt_tape(w, &spec.start, &enc, &leaky.pk, b, &mut rng).map_err(|e| e.to_string())?;
            leaky_fp.insert(w, leaky_run(&leaky, &t, &conf).map_err(|e| e.to_string())?.fingerprint());

            let conf = encrypt_input(&prog, &enc, w, &mut rng).map_err(|e| e.to_string())?;
            let mut writes = Vec::new();
            blind_run_observed(&prog, &t, &conf, &mut rng, |wr| writes.push(wr.ciphertext.to_bytes(p)))
                .map_err(|e| e.to_string())?;
            homomorphic.insert((*w).clone(), repetition_fingerprint(&writes));
        }
        for a in &words {
            for b in &words {
                if a < b && leaky_fp[a] != leaky_fp[b] && distinguished.is_none() {
                    distinguished = Some(((*a).clone(), (*b).clone()));
                }
            }
        }
    }
    let (a, b) = distinguished.ok_or("leaky executor distinguished no pair")?;
    check(homomorphic[&a] == homomorphic[&b], "homomorphic fingerprints differ")?;
    let trivial = |f: &Vec<usize>| f.iter().enumerate().all(|(i, &x)| i == x);
    check(homomorphic.values().all(trivial), "homomorphic run repeated a ciphertext")?;
    Ok(format!("leaky run separates {a:?}/{b:?}; homomorphic fingerprints trivial and equal"))
}

fn ind_sanity() -> Outcome {
    let (k, mut rng) = keys(256, 9);
    let r = run_ind_game(&k, &mut RandomGuessInd, 0, 2000, &mut rng).map_err(|e| e.to_string())?;
    check(
        r.advantage_estimate <= 3.0 * r.std_error,
        format!("random guess advantage {:.4} > 3 x {:.4}", r.advantage_estimate, r.std_error),
    )?;
    let d = run_ind_game(&k, &mut TokenDistinguisher::new(k.authorize()), 0, 500, &mut rng).map_err(|e| e.to_string())?;
    check(d.win_rate() >= 0.99, format!("token distinguisher won {}/500", d.wins))?;
    Ok(format!(
        "random guess adv {:.4} (se {:.4}); token distinguisher {}/{}",
        r.advantage_estimate, r.std_error, d.wins, d.trials
    ))
}

fn ow_demo() -> Outcome {
    let (k, mut rng) = keys(256, 10);
    let p = k.params().clone();
    check(p.q().bits() > 64, "group order below 2^64")?;
    let spec = four_symbol_spec();
    let known = Encoding::generate(&spec, &p, &mut rng).map_err(|e| e.to_string())?;
    let codes: Vec<Scalar> = known.symbols().values().cloned().collect();
    let dom = PlaintextDomain::Set(codes.clone());
    let r = run_ow_game(&k, &mut TokenSearchOw::known(codes), &dom, 1, 1000, &mut rng).map_err(|e| e.to_string())?;
    check(r.win_rate() >= 0.99, format!("known encoding: {}/1000", r.wins))?;

    let secret = Encoding::generate(&spec, &p, &mut rng).map_err(|e| e.to_string())?;
    let dom = PlaintextDomain::Set(secret.symbols().values().cloned().collect());
    let s = run_ow_game(&k, &mut TokenSearchOw::enumerate(16), &dom, 1, 1000, &mut rng).map_err(|e| e.to_string())?;
    check(s.wins == 0, format!("secret encoding: {}/1000", s.wins))?;
    Ok(format!("known encoding {}/1000, secret encoding {}/1000", r.wins, s.wins))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        match o {
            Ok(msg) => println!("PASS [{id:>2}] {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name}: {msg}");
            }
        }
    };
    report(1, "HPKEET round trips", round_trips());
    report(2, "homomorphism", homomorphism());
    report(3, "equality test", equality());
    report(4, "operation counts", op_counts());
    let (eq, obl, fresh) = blind_pipeline();
    report(5, "oracle equivalence", eq);
    report(6, "obliviousness", obl);
    report(7, "freshness", fresh);
    report(8, "replacement negative control", negative_control());
    report(9, "indistinguishability sanity", ind_sanity());
    report(10, "one-wayness and min-entropy", ow_demo());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
