//! Output-set oracle for the operators on short sequences.
//!
//! For every operator, ratio and sequence with |s| ≤ 6 the reachable outputs
//! are listed independently (windows, permutations, position subsets,
//! neighbor choices) and compared with the set of outputs observed over many
//! random draws: every draw must land in the set and every member of the set
//! must be hit. Draw counts are 30× the set size, so a member with the
//! smallest probability 1/|set| is missed with probability below e^-30.

use std::collections::BTreeSet;

use adatta::augment::{
    apply_crop, apply_insert, apply_mask, apply_reorder, apply_substitute, apply_tmask_b,
    apply_tmask_r, apply_tnoise, ItemSimilarityIndex,
};
use adatta::nn::Tensor2D;
use rand::Rng;

use super::rng;

pub const NUM_ITEMS: usize = 8;
pub const MASK: usize = NUM_ITEMS + 1;
pub const INSERT_MAX_LEN: usize = 8;

#[derive(Clone, Debug)]
pub struct OpReport {
    pub operator: &'static str,
    pub cases: usize,
    pub draws: usize,
    pub outputs: usize,
    pub failures: Vec<String>,
}

/// `max(1, ⌊tenths·n/10⌋)` capped at `n`, in integer arithmetic.
fn count(tenths: usize, n: usize) -> usize {
    (tenths * n / 10).max(1).min(n)
}

fn removal(tenths: usize, n: usize) -> usize {
    count(tenths, n).min(n - 1)
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every way of picking one neighbor for each chosen position.
fn neighbor_choices(s: &[usize], positions: &[usize], index: &ItemSimilarityIndex) -> Vec<Vec<Option<usize>>> {
    let mut out: Vec<Vec<Option<usize>>> = vec![vec![]];
    for &p in positions {
        let opts: Vec<Option<usize>> = match index.neighbors(s[p]) {
            [] => vec![None],
            ns => ns.iter().map(|&(i, _)| Some(i)).collect(),
        };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.push(*o);
                    v
                })
            })
            .collect();
    }
    out
}

fn sequences() -> Vec<Vec<usize>> {
    let dup = [3, 1, 4, 1, 5, 2];
    let mut out = Vec::new();
    for n in 1..=6 {
        out.push((1..=n).collect());
        if n >= 4 {
            out.push(dup[..n].to_vec());
        }
    }
    out
}

pub fn fixture_table() -> Tensor2D {
    let mut r = rng(17);
    let mut rows = vec![vec![0.0; 3]];
    for _ in 0..NUM_ITEMS {
        rows.push((0..3).map(|_| r.gen_range(-1.0..1.0)).collect());
    }
    rows.push(vec![0.0; 3]);
    Tensor2D::from_rows(&rows).unwrap()
}

fn key(t: &Tensor2D) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn embed(table: &Tensor2D, s: &[usize]) -> Tensor2D {
    Tensor2D::from_rows(&s.iter().map(|&i| table.row(i).to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Compares sampled outputs against the expected set.
fn check<T: Ord + Clone + std::fmt::Debug>(
    rep: &mut OpReport,
    label: String,
    expected: BTreeSet<T>,
    mut draw: impl FnMut() -> T,
) {
    let draws = (30 * expected.len()).max(100);
    let mut seen = BTreeSet::new();
    for _ in 0..draws {
        let out = draw();
        if !expected.contains(&out) {
            rep.failures.push(format!("{label}: unexpected output {out:?}"));
            return;
        }
        seen.insert(out);
    }
    if seen.len() != expected.len() {
        rep.failures.push(format!(
            "{label}: reached {} of {} outputs",
            seen.len(),
            expected.len()
        ));
    }
    rep.cases += 1;
    rep.draws += draws;
    rep.outputs += expected.len();
}

fn report(operator: &'static str) -> OpReport {
    OpReport {
        operator,
        cases: 0,
        draws: 0,
        outputs: 0,
        failures: Vec::new(),
    }
}

pub fn crop(seed: u64) -> OpReport {
    let mut rep = report("crop");
    let mut r = rng(seed);
    for s in sequences() {
        for tenths in [2, 6, 10] {
            let n = s.len();
            let len = count(tenths, n);
            let expected: BTreeSet<Vec<usize>> = (0..=n - len).map(|i| s[i..i + len].to_vec()).collect();
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                apply_crop(&s, tenths as f64 / 10.0, &mut r)
            });
        }
    }
    rep
}

pub fn reorder(seed: u64) -> OpReport {
    let mut rep = report("reorder");
    let mut r = rng(seed);
    for s in sequences() {
        for tenths in [2, 5, 10] {
            let n = s.len();
            let len = count(tenths, n);
            let mut expected = BTreeSet::new();
            for start in 0..=n - len {
                for perm in permutations(len) {
                    let mut out = s.clone();
                    for (j, &p) in perm.iter().enumerate() {
                        out[start + j] = s[start + p];
                    }
                    expected.insert(out);
                }
            }
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                apply_reorder(&s, tenths as f64 / 10.0, &mut r)
            });
        }
    }
    rep
}

pub fn mask(seed: u64) -> OpReport {
    let mut rep = report("mask");
    let mut r = rng(seed);
    for s in sequences() {
        for tenths in [3, 5, 10] {
            let expected: BTreeSet<Vec<usize>> = subsets(s.len(), count(tenths, s.len()))
                .into_iter()
                .map(|pos| {
                    let mut out = s.clone();
                    pos.iter().for_each(|&p| out[p] = MASK);
                    out
                })
                .collect();
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                apply_mask(&s, tenths as f64 / 10.0, MASK, &mut r)
            });
        }
    }
    rep
}

pub fn substitute(seed: u64, index: &ItemSimilarityIndex) -> OpReport {
    let mut rep = report("substitute");
    let mut r = rng(seed);
    for s in sequences() {
        for tenths in [3, 7] {
            let mut expected = BTreeSet::new();
            for pos in subsets(s.len(), count(tenths, s.len())) {
                for choice in neighbor_choices(&s, &pos, index) {
                    let mut out = s.clone();
                    for (&p, c) in pos.iter().zip(&choice) {
                        if let Some(i) = c {
                            out[p] = *i;
                        }
                    }
                    expected.insert(out);
                }
            }
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                apply_substitute(&s, tenths as f64 / 10.0, index, &mut r)
            });
        }
    }
    rep
}

pub fn insert(seed: u64, index: &ItemSimilarityIndex) -> OpReport {
    let mut rep = report("insert");
    let mut r = rng(seed);
    for s in sequences() {
        for tenths in [3, 7, 10] {
            let mut expected = BTreeSet::new();
            for pos in subsets(s.len(), count(tenths, s.len())) {
                for choice in neighbor_choices(&s, &pos, index) {
                    let mut out = Vec::new();
                    for (j, &item) in s.iter().enumerate() {
                        out.push(item);
                        if let Some(k) = pos.iter().position(|&p| p == j) {
                            if let Some(n) = choice[k] {
                                out.push(n);
                            }
                        }
                    }
                    let keep = out.len().min(INSERT_MAX_LEN);
                    expected.insert(out[out.len() - keep..].to_vec());
                }
            }
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                apply_insert(&s, tenths as f64 / 10.0, index, INSERT_MAX_LEN, &mut r)
            });
        }
    }
    rep
}

pub fn tmask_r(seed: u64) -> OpReport {
    let mut rep = report("tmask_r");
    let mut r = rng(seed);
    for s in sequences() {
        for tenths in [3, 5, 10] {
            let n = s.len();
            let expected: BTreeSet<(Vec<usize>, bool)> = if n == 1 {
                [(s.clone(), true)].into()
            } else {
                subsets(n, removal(tenths, n))
                    .into_iter()
                    .map(|pos| {
                        let out = (0..n).filter(|j| !pos.contains(j)).map(|j| s[j]).collect();
                        (out, false)
                    })
                    .collect()
            };
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                apply_tmask_r(&s, tenths as f64 / 10.0, &mut r)
            });
        }
    }
    rep
}

pub fn tmask_b(seed: u64, table: &Tensor2D) -> OpReport {
    let mut rep = report("tmask_b");
    let mut r = rng(seed);
    for s in sequences() {
        let e = embed(table, &s);
        for tenths in [3, 5, 10] {
            let n = s.len();
            let expected: BTreeSet<Vec<u64>> = if n == 1 {
                [key(&e)].into()
            } else {
                subsets(n, removal(tenths, n))
                    .into_iter()
                    .map(|rows| {
                        let mut out = e.clone();
                        rows.iter().for_each(|&j| out.row_mut(j).fill(0.0));
                        key(&out)
                    })
                    .collect()
            };
            check(&mut rep, format!("{s:?} @0.{tenths}"), expected, || {
                key(&apply_tmask_b(&e, tenths as f64 / 10.0, &mut r).0)
            });
        }
    }
    rep
}

/// Continuous draws cannot be enumerated; instead every entry of `E' − E`
/// must lie in `[a, b]`, and `(0, 0)` must reproduce `E` bit for bit.
pub fn tnoise(seed: u64, table: &Tensor2D) -> OpReport {
    let mut rep = report("tnoise");
    let mut r = rng(seed);
    for s in sequences() {
        let e = embed(table, &s);
        for (a, b) in [(-0.1, 0.1), (0.0, 0.5), (-1.0, -0.25)] {
            for _ in 0..200 {
                let out = apply_tnoise(&e, a, b, &mut r);
                let bad = out
                    .data()
                    .iter()
                    .zip(e.data())
                    .any(|(o, i)| !(a - 1e-12..=b + 1e-12).contains(&(o - i)));
                if bad {
                    rep.failures.push(format!("{s:?}: noise outside [{a}, {b}]"));
                }
                rep.draws += 1;
            }
            rep.cases += 1;
        }
        if key(&apply_tnoise(&e, 0.0, 0.0, &mut r)) != key(&e) {
            rep.failures.push(format!("{s:?}: zero interval changed the input"));
        }
    }
    rep
}

pub fn all(seed: u64) -> Vec<OpReport> {
    let table = fixture_table();
    let index = ItemSimilarityIndex::from_table(&table, NUM_ITEMS, 2);
    vec![
        crop(seed),
        reorder(seed + 1),
        mask(seed + 2),
        substitute(seed + 3, &index),
        insert(seed + 4, &index),
        tmask_r(seed + 5),
        tnoise(seed + 6, &table),
        tmask_b(seed + 7, &table),
    ]
}
