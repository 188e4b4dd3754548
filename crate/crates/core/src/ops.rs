//! Per-thread group-operation counters.
//!
//! Every exponentiation, multiplication and inversion in the ciphertext group
//! bumps a thread-local counter. Calls into the base cipher (key generation,
//! encryption, decryption) are counted as one `G`/`E`/`D` each and the group
//! operations they perform internally are not attributed to the caller, which
//! is how operation costs are usually tabulated for a scheme built on top of
//! another one.

use std::cell::Cell;
use std::ops::{Add, Sub};

use serde::Serialize;

/// Snapshot of operation counts.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub exp: u64,
    pub mul: u64,
    pub inv: u64,
    /// Base-cipher key generations (`G`).
    pub keygen: u64,
    /// Base-cipher encryptions (`E`).
    pub enc: u64,
    /// Base-cipher decryptions (`D`).
    pub dec: u64,
    /// Keyed hash-table lookups.
    pub lookups: u64,
    /// Linear scans over a transition table.
    pub scans: u64,
}

impl OpCounts {
    pub fn group_ops(&self) -> u64 {
        self.exp + self.mul + self.inv
    }

    pub fn total(&self) -> u64 {
        self.group_ops() + self.keygen + self.enc + self.dec + self.lookups + self.scans
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            exp: self.exp + o.exp,
            mul: self.mul + o.mul,
            inv: self.inv + o.inv,
            keygen: self.keygen + o.keygen,
            enc: self.enc + o.enc,
            dec: self.dec + o.dec,
            lookups: self.lookups + o.lookups,
            scans: self.scans + o.scans,
        }
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            exp: self.exp - o.exp,
            mul: self.mul - o.mul,
            inv: self.inv - o.inv,
            keygen: self.keygen - o.keygen,
            enc: self.enc - o.enc,
            dec: self.dec - o.dec,
            lookups: self.lookups - o.lookups,
            scans: self.scans - o.scans,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Op {
    Exp,
    Mul,
    Inv,
    Lookup,
    Scan,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum BaseOp {
    KeyGen,
    Encrypt,
    Decrypt,
}

thread_local! {
    static COUNTS: Cell<OpCounts> = Cell::new(OpCounts::default());
    static DEPTH: Cell<u32> = const { Cell::new(0) };
}

fn bump(f: impl FnOnce(&mut OpCounts)) {
    if DEPTH.with(Cell::get) > 0 {
        return;
    }
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

pub(crate) fn record(op: Op) {
    bump(|c| match op {
        Op::Exp => c.exp += 1,
        Op::Mul => c.mul += 1,
        Op::Inv => c.inv += 1,
        Op::Lookup => c.lookups += 1,
        Op::Scan => c.scans += 1,
    });
}

struct DepthGuard;

impl Drop for DepthGuard {
    fn drop(&mut self) {
        DEPTH.with(|d| d.set(d.get() - 1));
    }
}

/// Runs `f` as one base-cipher operation: `kind` is counted once and the
/// group operations inside `f` are hidden from the caller's tally.
pub(crate) fn base_op<R>(kind: BaseOp, f: impl FnOnce() -> R) -> R {
    bump(|c| match kind {
        BaseOp::KeyGen => c.keygen += 1,
        BaseOp::Encrypt => c.enc += 1,
        BaseOp::Decrypt => c.dec += 1,
    });
    DEPTH.with(|d| d.set(d.get() + 1));
    let _guard = DepthGuard;
    f()
}

/// Current counts for this thread.
pub fn snapshot() -> OpCounts {
    COUNTS.with(Cell::get)
}

pub fn reset() {
    COUNTS.with(|c| c.set(OpCounts::default()));
}

/// Runs `f` and returns its result together with the operations it performed
/// on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_base_ops_hide_inner_counts() {
        let (_, c) = measure(|| {
            record(Op::Mul);
            base_op(BaseOp::Encrypt, || {
                record(Op::Exp);
                record(Op::Exp);
                base_op(BaseOp::Decrypt, || record(Op::Inv));
            });
        });
        assert_eq!(
            c,
            OpCounts {
                mul: 1,
                enc: 1,
                ..Default::default()
            }
        );
    }

    #[test]
    fn counters_are_per_thread() {
        reset();
        record(Op::Exp);
        let other = std::thread::spawn(|| {
            record(Op::Mul);
            snapshot()
        })
        .join()
        .unwrap();
        assert_eq!(other.mul, 1);
        assert_eq!(other.exp, 0);
        assert_eq!(snapshot().exp, 1);
        assert_eq!((snapshot() + other).group_ops(), 2);
    }

    #[test]
    fn depth_restored_after_panic() {
        let r = std::panic::catch_unwind(|| base_op(BaseOp::KeyGen, || panic!("boom")));
        assert!(r.is_err());
        let (_, c) = measure(|| record(Op::Exp));
        assert_eq!(c.exp, 1);
    }
}
