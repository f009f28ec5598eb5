//! Exhaustive reference evaluation of event expressions.
//!
//! Enumerates every subset of occurrences and every way of distributing a
//! subset among the children of an operator. Exponential, so only usable on
//! a handful of occurrences. Terminator declarations are not consulted.

use std::collections::{BTreeSet, HashMap};

use super::{EventExpr, Instant, Occurrence};
use crate::term::{unify, Substitution};

type Interval = (Instant, Instant);

/// Every `(start, end, contributing sequence numbers)` of the expression.
pub fn brute_force(expr: &EventExpr, occurrences: &[Occurrence]) -> BTreeSet<(Instant, Instant, Vec<u64>)> {
    assert!(occurrences.len() <= 16, "oracle limited to 16 occurrences");
    let mut oracle = Oracle {
        occ: occurrences,
        memo: HashMap::new(),
    };
    let mut out = BTreeSet::new();
    for mask in 1..(1u32 << occurrences.len()) {
        for (s, e) in oracle.instances(expr, mask) {
            let mut used: Vec<u64> = bits(mask).map(|i| occurrences[i].seq).collect();
            used.sort_unstable();
            out.insert((s, e, used));
        }
    }
    out
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

/// All ways to assign the members of `mask` to `k` labelled, non-empty parts.
fn splits(mask: u32, k: usize) -> Vec<Vec<u32>> {
    let members: Vec<usize> = bits(mask).collect();
    if members.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; members.len()];
    loop {
        let mut parts = vec![0u32; k];
        for (m, &l) in members.iter().zip(&labels) {
            parts[l] |= 1 << m;
        }
        if parts.iter().all(|&p| p != 0) {
            out.push(parts);
        }
        let mut i = 0;
        while i < labels.len() {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == labels.len() {
            return out;
        }
    }
}

fn hull(parts: &[Interval]) -> Interval {
    let s = parts.iter().map(|p| p.0).min().expect("non-empty");
    let e = parts.iter().map(|p| p.1).max().expect("non-empty");
    (s, e)
}

struct Oracle<'a> {
    occ: &'a [Occurrence],
    memo: HashMap<(*const EventExpr, u32), BTreeSet<Interval>>,
}

impl Oracle<'_> {
    fn full(&self) -> u32 {
        (1u32 << self.occ.len()) - 1
    }

    fn exists(&mut self, e: &EventExpr) -> bool {
        (1..=self.full()).any(|m| !self.instances(e, m).is_empty())
    }

    fn any_inside(&mut self, e: &EventExpr, lo: Instant, hi: Instant) -> bool {
        (1..=self.full()).any(|m| self.instances(e, m).iter().any(|&(s, en)| lo < s && en < hi))
    }

    /// Cartesian product of the children's instances over one split.
    fn product(&mut self, children: &[&EventExpr], parts: &[u32]) -> Vec<Vec<Interval>> {
        let mut acc: Vec<Vec<Interval>> = vec![Vec::new()];
        for (c, &m) in children.iter().zip(parts) {
            let inst = self.instances(c, m);
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    inst.iter().map(move |&i| {
                        let mut p = prefix.clone();
                        p.push(i);
                        p
                    })
                })
                .collect();
        }
        acc
    }

    fn tuples(&mut self, children: &[&EventExpr], mask: u32) -> Vec<Vec<Interval>> {
        let mut out = Vec::new();
        for parts in splits(mask, children.len()) {
            out.extend(self.product(children, &parts));
        }
        out
    }

    fn instances(&mut self, e: &EventExpr, mask: u32) -> BTreeSet<Interval> {
        let key = (e as *const EventExpr, mask);
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        let r = self.compute(e, mask);
        self.memo.insert(key, r.clone());
        r
    }

    fn compute(&mut self, e: &EventExpr, mask: u32) -> BTreeSet<Interval> {
        let mut out = BTreeSet::new();
        match e {
            EventExpr::Leaf(p) => {
                if mask.count_ones() == 1 {
                    let o = &self.occ[mask.trailing_zeros() as usize];
                    if unify(p, &o.event, &Substitution::new()).is_some() {
                        out.insert((o.start, o.end));
                    }
                }
            }
            EventExpr::Sequence(cs) => {
                let refs: Vec<&EventExpr> = cs.iter().collect();
                for t in self.tuples(&refs, mask) {
                    if t.windows(2).all(|w| w[0].1 <= w[1].0) {
                        out.insert((t[0].0, t[t.len() - 1].1));
                    }
                }
            }
            EventExpr::Conjunction(cs) => {
                let refs: Vec<&EventExpr> = cs.iter().collect();
                out.extend(self.tuples(&refs, mask).iter().map(|t| hull(t)));
            }
            EventExpr::Concurrent(cs) => {
                let refs: Vec<&EventExpr> = cs.iter().collect();
                for t in self.tuples(&refs, mask) {
                    let overlapping = t
                        .iter()
                        .enumerate()
                        .all(|(i, a)| t[i + 1..].iter().all(|b| a.0 <= b.1 && b.0 <= a.1));
                    if overlapping {
                        out.insert(hull(&t));
                    }
                }
            }
            EventExpr::Or(cs) => {
                for c in cs {
                    out.extend(self.instances(c, mask));
                }
            }
            EventExpr::Xor(cs) => {
                for (k, c) in cs.iter().enumerate() {
                    let others_absent = cs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .all(|(_, o)| !self.exists(o));
                    if others_absent {
                        out.extend(self.instances(c, mask));
                    }
                }
            }
            EventExpr::Any { n, children } => {
                for combo in super::algebra::combinations(children.len(), *n) {
                    let refs: Vec<&EventExpr> = combo.iter().map(|&i| &children[i]).collect();
                    out.extend(self.tuples(&refs, mask).iter().map(|t| hull(t)));
                }
            }
            EventExpr::Not { expr, window } => {
                for t in self.tuples(&[&window.0, &window.1], mask) {
                    let (a, b) = (t[0], t[1]);
                    if a.1 <= b.0 && !self.any_inside(expr, a.1, b.0) {
                        out.insert((a.0, b.1));
                    }
                }
            }
            EventExpr::Aperiodic { expr, window } => {
                for t in self.tuples(&[&window.0, expr, &window.1], mask) {
                    let (a, x, b) = (t[0], t[1], t[2]);
                    if a.1 <= b.0 && a.1 < x.0 && x.1 < b.0 {
                        out.insert(x);
                    }
                }
            }
            EventExpr::Periodic { period, window } => {
                for t in self.tuples(&[&window.0, &window.1], mask) {
                    let (a, b) = (t[0], t[1]);
                    if a.1 > b.0 {
                        continue;
                    }
                    let mut p = a.1.plus_seconds(*period);
                    while p < b.0 {
                        out.insert((p, p));
                        p = p.plus_seconds(*period);
                    }
                }
            }
        }
        out
    }
}
