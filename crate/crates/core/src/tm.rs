//! Deterministic single-tape Turing machines over a two-way infinite tape.
//!
//! Machines are written in a small line-oriented text format:
//!
//! ```text
//! # comment
//! #start q0
//! #halt qH            (one or more halting states)
//! #blank _            (optional, default '_')
//! #input 0 1          (optional, default: every non-blank symbol in the rules)
//! #states q0 q1 qH    (optional; when present, rules may only use these)
//! #alphabet 0 1 _     (optional; when present, rules may only use these)
//! #time 4 8           (time bound T(n) = 4n + 8, highest degree first)
//! #timedeg 1          (optional; checks the degree of #time)
//! #space 1 2          (space bound B(n) = n + 2)
//! q0 1 -> q1 0 R      (state symbol -> state symbol move, move in L/R/S)
//! ```
//!
//! The time and space bounds are declarations; [`check_bounds`] tests them
//! against actual runs and the blind executor relies on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub const DEFAULT_BLANK: char = '_';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing {0} directive")]
    Missing(&'static str),
    #[error("invalid machine: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("machine already halted in state {0}")]
    Halted(String),
    #[error("no transition for state {state} reading {symbol:?}")]
    Stuck { state: String, symbol: char },
    #[error("input symbol {0:?} is not in the input alphabet")]
    BadInput(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    L,
    R,
    S,
}

impl Move {
    pub fn offset(self) -> i64 {
        match self {
            Move::L => -1,
            Move::R => 1,
            Move::S => 0,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Move::L => 'L',
            Move::R => 'R',
            Move::S => 'S',
        }
    }

    pub fn from_char(c: char) -> Option<Move> {
        match c {
            'L' => Some(Move::L),
            'R' => Some(Move::R),
            'S' => Some(Move::S),
            _ => None,
        }
    }
}

/// Polynomial with nonnegative integer coefficients, highest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(Vec<u64>);

impl Poly {
    pub fn new(coeffs: Vec<u64>) -> Result<Self, String> {
        if coeffs.is_empty() {
            return Err("polynomial needs at least one coefficient".into());
        }
        if *coeffs.last().unwrap() == 0 {
            return Err("constant term must be at least 1".into());
        }
        Ok(Poly(coeffs))
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn eval(&self, n: u64) -> u64 {
        self.0
            .iter()
            .fold(0u64, |acc, &a| acc.saturating_mul(n).saturating_add(a))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.degree();
        let terms: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(i, &a)| match d - i {
                0 => a.to_string(),
                1 => format!("{a}n"),
                k => format!("{a}n^{k}"),
            })
            .collect();
        f.write_str(&terms.join(" + "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub next: String,
    pub write: char,
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmSpec {
    pub states: BTreeSet<String>,
    pub tape_alphabet: BTreeSet<char>,
    pub input_alphabet: BTreeSet<char>,
    pub blank: char,
    pub delta: BTreeMap<(String, char), Rule>,
    pub start: String,
    pub halt: BTreeSet<String>,
    pub time_bound: Poly,
    pub space_bound: Poly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub state: String,
    /// Non-blank cells only.
    pub tape: BTreeMap<i64, char>,
    pub head: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub state: String,
    pub head: i64,
    pub written: char,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub final_config: Configuration,
    pub steps: u64,
    pub halted: bool,
    pub trace: Option<Vec<TraceEntry>>,
    /// Every cell the head visited, plus the cells holding the input.
    pub touched: BTreeSet<i64>,
}

impl RunResult {
    pub fn output(&self, blank: char) -> String {
        self.final_config.output(blank)
    }
}

impl Configuration {
    pub fn initial(spec: &TmSpec, input: &str) -> Result<Self, StepError> {
        let mut tape = BTreeMap::new();
        for (i, c) in input.chars().enumerate() {
            if !spec.input_alphabet.contains(&c) {
                return Err(StepError::BadInput(c));
            }
            if c != spec.blank {
                tape.insert(i as i64, c);
            }
        }
        Ok(Configuration {
            state: spec.start.clone(),
            tape,
            head: 0,
        })
    }

    pub fn read(&self, blank: char) -> char {
        self.tape.get(&self.head).copied().unwrap_or(blank)
    }

    /// Tape content from the leftmost to the rightmost non-blank cell.
    pub fn output(&self, blank: char) -> String {
        let (Some((&lo, _)), Some((&hi, _))) = (self.tape.first_key_value(), self.tape.last_key_value())
        else {
            return String::new();
        };
        (lo..=hi).map(|i| self.tape.get(&i).copied().unwrap_or(blank)).collect()
    }
}

impl TmSpec {
    pub fn is_halting(&self, state: &str) -> bool {
        self.halt.contains(state)
    }

    /// States first, then symbols, in a stable order.
    pub fn rules(&self) -> impl Iterator<Item = (&String, char, &Rule)> {
        self.delta.iter().map(|((q, s), r)| (q, *s, r))
    }

    fn validate(&self) -> Result<(), ParseError> {
        let invalid = |m: String| Err(ParseError::Invalid(m));
        if !self.states.contains(&self.start) {
            return invalid(format!("start state {} is not a state", self.start));
        }
        if !self.input_alphabet.is_subset(&self.tape_alphabet) {
            return invalid("input alphabet is not contained in the tape alphabet".into());
        }
        if self.input_alphabet.contains(&self.blank) {
            return invalid("the blank symbol cannot be an input symbol".into());
        }
        for (q, s, r) in self.rules() {
            if self.halt.contains(q) {
                return invalid(format!("halting state {q} has an outgoing transition on {s:?}"));
            }
            if !self.states.contains(&r.next) {
                return invalid(format!("unknown state {}", r.next));
            }
        }
        Ok(())
    }
}

fn directive_args<'a>(
    tokens: &[&'a str],
    line: usize,
    min: usize,
) -> Result<Vec<&'a str>, ParseError> {
    let args = tokens[1..].to_vec();
    if args.len() < min {
        return Err(ParseError::Line {
            line,
            msg: format!("{} needs at least {min} argument(s)", tokens[0]),
        });
    }
    Ok(args)
}

fn single_char(tok: &str, line: usize) -> Result<char, ParseError> {
    let mut it = tok.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(ParseError::Line {
            line,
            msg: format!("symbol {tok:?} must be a single character"),
        }),
    }
}

fn parse_poly(args: &[&str], line: usize) -> Result<Poly, ParseError> {
    let coeffs = args
        .iter()
        .map(|a| a.parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ParseError::Line {
            line,
            msg: format!("bad coefficient: {e}"),
        })?;
    Poly::new(coeffs).map_err(|msg| ParseError::Line { line, msg })
}

const DIRECTIVES: [&str; 9] = [
    "#start", "#halt", "#blank", "#input", "#states", "#alphabet", "#time", "#timedeg", "#space",
];

pub fn parse_tm(text: &str) -> Result<TmSpec, ParseError> {
    let mut start = None;
    let mut halt = BTreeSet::new();
    let mut blank = None;
    let mut input = None;
    let mut declared_states: Option<BTreeSet<String>> = None;
    let mut declared_symbols: Option<BTreeSet<char>> = None;
    let mut time = None;
    let mut timedeg = None;
    let mut space = None;
    let mut rules: Vec<(usize, String, char, Rule)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let Some(&first) = tokens.first() else { continue };
        if first.starts_with('#') {
            if !DIRECTIVES.contains(&first) {
                continue;
            }
            match first {
                "#start" => start = Some(directive_args(&tokens, line, 1)?[0].to_string()),
                "#halt" => halt.extend(directive_args(&tokens, line, 1)?.iter().map(|s| s.to_string())),
                "#blank" => blank = Some(single_char(directive_args(&tokens, line, 1)?[0], line)?),
                "#input" => {
                    let args = directive_args(&tokens, line, 1)?;
                    input = Some(args.iter().map(|a| single_char(a, line)).collect::<Result<BTreeSet<_>, _>>()?);
                }
                "#states" => {
                    let args = directive_args(&tokens, line, 1)?;
                    declared_states = Some(args.iter().map(|s| s.to_string()).collect());
                }
                "#alphabet" => {
                    let args = directive_args(&tokens, line, 1)?;
                    declared_symbols =
                        Some(args.iter().map(|a| single_char(a, line)).collect::<Result<BTreeSet<_>, _>>()?);
                }
                "#time" => time = Some((line, parse_poly(&directive_args(&tokens, line, 1)?, line)?)),
                "#timedeg" => {
                    let arg = directive_args(&tokens, line, 1)?[0];
                    timedeg = Some((line, arg.parse::<usize>().map_err(|e| ParseError::Line {
                        line,
                        msg: format!("bad degree: {e}"),
                    })?));
                }
                "#space" => space = Some(parse_poly(&directive_args(&tokens, line, 1)?, line)?),
                _ => unreachable!(),
            }
            continue;
        }
        let bad = |msg: String| ParseError::Line { line, msg };
        if tokens.len() != 6 || tokens[2] != "->" {
            return Err(bad(format!("expected `state symbol -> state symbol move`, got {raw:?}")));
        }
        let mv = single_char(tokens[5], line)
            .ok()
            .and_then(Move::from_char)
            .ok_or_else(|| bad(format!("move must be L, R or S, got {:?}", tokens[5])))?;
        rules.push((
            line,
            tokens[0].to_string(),
            single_char(tokens[1], line)?,
            Rule {
                next: tokens[3].to_string(),
                write: single_char(tokens[4], line)?,
                mv,
            },
        ));
    }

    let start = start.ok_or(ParseError::Missing("start"))?;
    if halt.is_empty() {
        return Err(ParseError::Missing("halt"));
    }
    let (time_line, time_bound) = time.ok_or(ParseError::Missing("time"))?;
    if let Some((line, d)) = timedeg {
        if d != time_bound.degree() {
            return Err(ParseError::Line {
                line,
                msg: format!("#timedeg {d} disagrees with #time on line {time_line}"),
            });
        }
    }
    let space_bound = space.ok_or(ParseError::Missing("space"))?;
    let blank = blank.unwrap_or(DEFAULT_BLANK);

    let mut delta = BTreeMap::new();
    let mut states: BTreeSet<String> = BTreeSet::new();
    let mut symbols: BTreeSet<char> = BTreeSet::new();
    for (line, q, s, rule) in rules {
        if let Some(ds) = &declared_states {
            for st in [&q, &rule.next] {
                if !ds.contains(st) {
                    return Err(ParseError::Line { line, msg: format!("unknown state {st}") });
                }
            }
        }
        if let Some(dsym) = &declared_symbols {
            for c in [s, rule.write] {
                if c != blank && !dsym.contains(&c) {
                    return Err(ParseError::Line { line, msg: format!("unknown symbol {c:?}") });
                }
            }
        }
        states.insert(q.clone());
        states.insert(rule.next.clone());
        symbols.insert(s);
        symbols.insert(rule.write);
        if delta.insert((q.clone(), s), rule).is_some() {
            return Err(ParseError::Line {
                line,
                msg: format!("duplicate transition for ({q}, {s:?})"),
            });
        }
    }
    states.insert(start.clone());
    states.extend(halt.iter().cloned());
    if let Some(ds) = declared_states {
        for st in states.iter() {
            if !ds.contains(st) {
                return Err(ParseError::Invalid(format!("unknown state {st}")));
            }
        }
        states.extend(ds);
    }
    symbols.insert(blank);
    if let Some(dsym) = declared_symbols {
        symbols.extend(dsym);
    }
    let input_alphabet = match input {
        Some(set) => {
            if let Some(c) = set.iter().find(|c| !symbols.contains(c)) {
                return Err(ParseError::Invalid(format!("unknown symbol {c:?} in #input")));
            }
            set
        }
        None => symbols.iter().copied().filter(|&c| c != blank).collect(),
    };

    let spec = TmSpec {
        states,
        tape_alphabet: symbols,
        input_alphabet,
        blank,
        delta,
        start,
        halt,
        time_bound,
        space_bound,
    };
    spec.validate()?;
    Ok(spec)
}

/// One transition.
pub fn step(spec: &TmSpec, conf: &Configuration) -> Result<Configuration, StepError> {
    let mut next = conf.clone();
    step_in_place(spec, &mut next)?;
    Ok(next)
}

fn step_in_place(spec: &TmSpec, conf: &mut Configuration) -> Result<char, StepError> {
    if spec.is_halting(&conf.state) {
        return Err(StepError::Halted(conf.state.clone()));
    }
    let symbol = conf.read(spec.blank);
    let rule = spec
        .delta
        .get(&(conf.state.clone(), symbol))
        .ok_or_else(|| StepError::Stuck {
            state: conf.state.clone(),
            symbol,
        })?;
    if rule.write == spec.blank {
        conf.tape.remove(&conf.head);
    } else {
        conf.tape.insert(conf.head, rule.write);
    }
    conf.state.clone_from(&rule.next);
    conf.head += rule.mv.offset();
    Ok(rule.write)
}

/// Runs until a halting state, a stuck configuration (error) or `max_steps`.
pub fn run(spec: &TmSpec, input: &str, max_steps: u64, record_trace: bool) -> Result<RunResult, StepError> {
    let mut conf = Configuration::initial(spec, input)?;
    let mut touched: BTreeSet<i64> = (0..input.chars().count() as i64).collect();
    touched.insert(conf.head);
    let mut trace = record_trace.then(Vec::new);
    let mut steps = 0;
    while !spec.is_halting(&conf.state) && steps < max_steps {
        let state = conf.state.clone();
        let head = conf.head;
        let written = step_in_place(spec, &mut conf)?;
        if let Some(t) = trace.as_mut() {
            t.push(TraceEntry { state, head, written });
        }
        touched.insert(conf.head);
        steps += 1;
    }
    Ok(RunResult {
        halted: spec.is_halting(&conf.state),
        final_config: conf,
        steps,
        trace,
        touched,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundViolation {
    Time { steps: u64, bound: u64 },
    Space { cell: i64, bound: u64 },
    Stuck(StepError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundsReport {
    pub checked: usize,
    pub violations: Vec<(String, BoundViolation)>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every sampled input halts within `T(|w|)` steps and stays
/// inside `[-B(|w|), B(|w|)]`.
pub fn check_bounds<'a>(spec: &TmSpec, inputs: impl IntoIterator<Item = &'a str>) -> BoundsReport {
    let mut report = BoundsReport::default();
    for input in inputs {
        report.checked += 1;
        let n = input.chars().count() as u64;
        let t = spec.time_bound.eval(n);
        let b = spec.space_bound.eval(n);
        let res = match run(spec, input, t, false) {
            Ok(r) => r,
            Err(e) => {
                report.violations.push((input.to_string(), BoundViolation::Stuck(e)));
                continue;
            }
        };
        if !res.halted {
            report
                .violations
                .push((input.to_string(), BoundViolation::Time { steps: res.steps, bound: t }));
        }
        if let Some(&cell) = res.touched.iter().find(|c| c.unsigned_abs() > b) {
            report
                .violations
                .push((input.to_string(), BoundViolation::Space { cell, bound: b }));
        }
    }
    report
}

/// Every word over `alphabet` of length `0..=max_len`, shortest first.
pub fn all_words(alphabet: &BTreeSet<char>, max_len: usize) -> Vec<String> {
    let symbols: Vec<char> = alphabet.iter().copied().collect();
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|w| symbols.iter().map(move |&c| format!("{w}{c}")))
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// Machines shipped with the crate.
pub mod corpus {
    use super::{parse_tm, TmSpec};

    pub const INCREMENT: &str = include_str!("../machines/increment.tm");
    pub const PARITY: &str = include_str!("../machines/parity.tm");
    pub const UNARY_ADD: &str = include_str!("../machines/unary_add.tm");

    pub const ALL: [(&str, &str); 3] = [
        ("increment", INCREMENT),
        ("parity", PARITY),
        ("unary_add", UNARY_ADD),
    ];

    pub fn get(name: &str) -> Option<TmSpec> {
        ALL.iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| parse_tm(text).expect("bundled machine parses"))
    }

    pub fn increment() -> TmSpec {
        parse_tm(INCREMENT).expect("bundled machine parses")
    }

    pub fn parity() -> TmSpec {
        parse_tm(PARITY).expect("bundled machine parses")
    }

    pub fn unary_add() -> TmSpec {
        parse_tm(UNARY_ADD).expect("bundled machine parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_out(spec: &TmSpec, input: &str) -> String {
        let r = run(spec, input, 10_000, false).unwrap();
        assert!(r.halted);
        r.output(spec.blank)
    }

    fn to_bits(v: u64, width: usize) -> String {
        format!("{v:0width$b}")
    }

    #[test]
    fn increment_parses_with_expected_shape() {
        let m = corpus::increment();
        assert_eq!(m.start, "scan");
        assert_eq!(m.delta.len(), 6);
        assert_eq!(m.time_bound.coeffs(), &[4, 8]);
        assert_eq!(m.space_bound.eval(3), 5);
        assert_eq!(m.input_alphabet, BTreeSet::from(['0', '1']));
        assert_eq!(m.tape_alphabet, BTreeSet::from(['0', '1', '_']));
    }

    #[test]
    fn increment_hand_traces() {
        let m = corpus::increment();
        assert_eq!(run_out(&m, "111"), "1000");
        assert_eq!(run_out(&m, "101"), "110");
        assert_eq!(run_out(&m, ""), "1");
        // "111": 3 moves right, 1 turn, 3 carries, 1 final write
        assert_eq!(run(&m, "111", 100, false).unwrap().steps, 8);
    }

    #[test]
    fn increment_matches_integer_arithmetic() {
        let m = corpus::increment();
        for w in all_words(&m.input_alphabet, 8) {
            let v = if w.is_empty() { 0 } else { u64::from_str_radix(&w, 2).unwrap() };
            let expected = format!("{:b}", v + 1);
            // leading zeros of the input survive unless the carry eats them
            let out = run_out(&m, &w);
            let width = w.len().max(expected.len());
            assert_eq!(format!("{:0>width$}", out), to_bits(v + 1, width), "input {w:?}");
        }
    }

    #[test]
    fn parity_matches_popcount() {
        let m = corpus::parity();
        assert_eq!(run_out(&m, "1011"), "1");
        for w in all_words(&m.input_alphabet, 8) {
            let ones = w.chars().filter(|&c| c == '1').count();
            assert_eq!(run_out(&m, &w), (ones % 2).to_string(), "input {w:?}");
        }
    }

    #[test]
    fn unary_add_counts_ones() {
        let m = corpus::unary_add();
        assert_eq!(run_out(&m, "11+111"), "11111");
        assert_eq!(run_out(&m, "+"), "");
        for w in all_words(&m.input_alphabet, 8) {
            let ones = w.chars().filter(|&c| c == '1').count();
            assert_eq!(run_out(&m, &w), "1".repeat(ones), "input {w:?}");
        }
    }

    #[test]
    fn corpus_bounds_hold() {
        for (name, text) in corpus::ALL {
            let m = parse_tm(text).unwrap();
            let words = all_words(&m.input_alphabet, 8);
            let report = check_bounds(&m, words.iter().map(String::as_str));
            assert!(report.passed(), "{name}: {:?}", report.violations.first());
            assert_eq!(report.checked, words.len());
        }
    }

    #[test]
    fn undersized_time_bound_fails() {
        let text = corpus::INCREMENT.replace("#time 4 8", "#time 1");
        let m = parse_tm(&text).unwrap();
        let report = check_bounds(&m, ["1", "10"]);
        assert!(!report.passed());
        assert!(matches!(report.violations[0].1, BoundViolation::Time { bound: 1, .. }));
    }

    #[test]
    fn undersized_space_bound_fails() {
        let text = corpus::INCREMENT.replace("#space 1 2", "#space 1");
        let m = parse_tm(&text).unwrap();
        // "11" carries into cell -1 and steps onto cell 2
        let report = check_bounds(&m, ["11"]);
        assert!(matches!(report.violations[0].1, BoundViolation::Space { .. }));
    }

    #[test]
    fn zero_bounds_rejected() {
        let text = corpus::INCREMENT.replace("#space 1 2", "#space 0");
        assert!(matches!(parse_tm(&text), Err(ParseError::Line { line: 8, .. })));
        let text = corpus::INCREMENT.replace("#time 4 8", "#time 4 0");
        assert!(parse_tm(&text).is_err());
    }

    #[test]
    fn duplicate_transition_rejected() {
        let text = format!("{}\nscan 1 -> carry 1 L\n", corpus::INCREMENT);
        let err = parse_tm(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate transition"), "{err}");
        assert!(matches!(err, ParseError::Line { line: 17, .. }), "{err:?}");
    }

    #[test]
    fn missing_directives() {
        assert_eq!(parse_tm("").unwrap_err().to_string(), "missing start directive");
        assert_eq!(parse_tm("#start a\n").unwrap_err(), ParseError::Missing("halt"));
        let no_time = corpus::INCREMENT.replace("#time 4 8", "");
        assert_eq!(parse_tm(&no_time).unwrap_err(), ParseError::Missing("time"));
        let no_space = corpus::INCREMENT.replace("#space 1 2", "");
        assert_eq!(parse_tm(&no_space).unwrap_err(), ParseError::Missing("space"));
    }

    #[test]
    fn unknown_names_rejected() {
        let text = format!("#states scan carry done\n#alphabet 0 1\n{}\nscan x -> scan 0 R\n", corpus::INCREMENT);
        let err = parse_tm(&text).unwrap_err();
        assert!(err.to_string().contains("unknown symbol"), "{err}");
        let text = format!("#states scan carry\n{}", corpus::INCREMENT);
        let err = parse_tm(&text).unwrap_err();
        assert!(err.to_string().contains("unknown state"), "{err}");
    }

    #[test]
    fn malformed_rules_rejected() {
        let base = "#start a\n#halt h\n#time 1\n#space 1\n";
        for bad in ["a 1 -> h 1 X", "a 1 h 1 R", "a 11 -> h 1 R", "a 1 -> h 1"] {
            let err = parse_tm(&format!("{base}{bad}\n")).unwrap_err();
            assert!(matches!(err, ParseError::Line { line: 5, .. }), "{bad}: {err:?}");
        }
        let err = parse_tm(&format!("{base}h 1 -> a 1 R\n")).unwrap_err();
        assert!(err.to_string().contains("halting state"), "{err}");
        let err = parse_tm(&format!("{base}#timedeg 2\n")).unwrap_err();
        assert!(err.to_string().contains("#timedeg"), "{err}");
    }

    #[test]
    fn step_semantics() {
        let m = corpus::increment();
        let c0 = Configuration::initial(&m, "1").unwrap();
        let c1 = step(&m, &c0).unwrap();
        assert_eq!((c1.state.as_str(), c1.head, c1.read('_')), ("scan", 1, '_'));
        let c2 = step(&m, &c1).unwrap();
        assert_eq!((c2.state.as_str(), c2.head), ("carry", 0));
        let c3 = step(&m, &c2).unwrap();
        let c4 = step(&m, &c3).unwrap();
        // S-move
        assert_eq!((c4.state.as_str(), c4.head), ("done", -1));
        assert_eq!(step(&m, &c4), Err(StepError::Halted("done".into())));
        assert_eq!(c4.output('_'), "10");
    }

    #[test]
    fn stuck_is_distinct_from_halting() {
        let m = parse_tm("#start a\n#halt h\n#time 1\n#space 1\na 0 -> h 0 S\n").unwrap();
        let err = run(&m, "", 10, false).unwrap_err();
        assert_eq!(err, StepError::Stuck { state: "a".into(), symbol: '_' });
        assert_eq!(run(&m, "2", 10, false).unwrap_err(), StepError::BadInput('2'));
    }

    #[test]
    fn max_steps_flags_non_halting() {
        let m = corpus::increment();
        let r = run(&m, "1111", 3, false).unwrap();
        assert!(!r.halted);
        assert_eq!(r.steps, 3);
    }

    #[test]
    fn runs_are_deterministic_and_traces_are_local() {
        let m = corpus::unary_add();
        let a = run(&m, "1+11+1", 1000, true).unwrap();
        let b = run(&m, "1+11+1", 1000, true).unwrap();
        assert_eq!(a, b);
        let trace = a.trace.unwrap();
        assert_eq!(trace.len() as u64, a.steps);
        for w in trace.windows(2) {
            assert!((w[1].head - w[0].head).abs() <= 1);
        }
    }

    #[test]
    fn poly_eval_and_display() {
        let p = Poly::new(vec![2, 0, 3]).unwrap();
        assert_eq!(p.eval(4), 35);
        assert_eq!(p.to_string(), "2n^2 + 3");
        assert_eq!(Poly::new(vec![u64::MAX, 1]).unwrap().eval(2), u64::MAX);
    }
}
