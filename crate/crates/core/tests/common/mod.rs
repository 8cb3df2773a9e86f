//! Oracles written independently of the library's algorithms: they only
//! use the valuation `eval` and plain rational arithmetic.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use num_traits::{One, Signed, Zero};
use proxy_auction::format::InstanceFile;
use proxy_auction::generate::{generate, GeneratorKind, GeneratorParams};
use proxy_auction::{Caps, Instance, ItemSet, Rational, Valuation};

pub fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn corpus_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn load_corpus(name: &str) -> Vec<(String, InstanceFile)> {
    let dir = corpus_dir(name);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("reading {}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, InstanceFile::read(&p).unwrap())
        })
        .collect()
}

/// Regenerates a corpus file from the generator, kind, seed and params in its metadata.
pub fn regenerate(file: &InstanceFile) -> InstanceFile {
    let meta = file.metadata.as_ref().expect("corpus files carry metadata");
    let kind: GeneratorKind = meta.generator.as_deref().unwrap().parse().unwrap();
    let pairs: Vec<String> = meta.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let params = GeneratorParams::parse(&pairs).unwrap();
    generate(kind, file.bidders.len(), file.m, meta.seed.unwrap(), &params, &Caps::default()).unwrap()
}

fn subsets(s: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(0u64);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == s { None } else { Some((cur.wrapping_sub(s)) & s) };
        Some(cur)
    })
}

/// `E[v(T)]` with each item of `s` kept independently with probability `c`.
pub fn proxy_brute(v: &Valuation<Rational>, c: &Rational, s: ItemSet) -> Rational {
    let size = s.len() as i32;
    let miss = Rational::one() - c;
    subsets(s.bits())
        .map(|t| {
            let kept = t.count_ones() as i32;
            let weight = c.pow(kept) * miss.pow(size - kept);
            weight * v.eval(ItemSet::from_bits(t)).unwrap()
        })
        .fold(Rational::zero(), |a, b| a + b)
}

/// Best integral welfare over all maps item -> bidder or nobody.
pub fn integral_optimum(instance: &Instance<Rational>) -> Rational {
    let n = instance.bidders();
    let m = instance.items();
    let mut best = Rational::zero();
    let total = (n + 1).pow(m as u32);
    for code in 0..total {
        let mut rest = code;
        let mut bundles = vec![0u64; n];
        for j in 0..m {
            let owner = rest % (n + 1);
            rest /= n + 1;
            if owner > 0 {
                bundles[owner - 1] |= 1 << j;
            }
        }
        let welfare = bundles
            .iter()
            .enumerate()
            .map(|(i, &b)| instance.valuation(i).eval(ItemSet::from_bits(b)).unwrap())
            .fold(Rational::zero(), |a, b| a + b);
        if welfare > best {
            best = welfare;
        }
    }
    best
}

/// Solves `B y = rhs` by Gauss-Jordan elimination; `None` when singular.
fn solve_square(mut a: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let k = rhs.len();
    for col in 0..k {
        let pivot = (col..k).find(|&row| !a[row][col].is_zero())?;
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = Rational::one() / a[col][col].clone();
        for x in a[col].iter_mut() {
            *x = x.clone() * inv.clone();
        }
        rhs[col] = rhs[col].clone() * inv;
        for row in 0..k {
            if row != col && !a[row][col].is_zero() {
                let factor = a[row][col].clone();
                let pivot_row = a[col].clone();
                for (x, y) in a[row].iter_mut().zip(pivot_row) {
                    *x = x.clone() - factor.clone() * y;
                }
                rhs[row] = rhs[row].clone() - factor * rhs[col].clone();
            }
        }
    }
    Some(rhs)
}

fn choose(n: usize, k: usize, start: usize, acc: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if acc.len() == k {
        out(acc);
        return;
    }
    for i in start..n {
        if n - i < k - acc.len() {
            break;
        }
        acc.push(i);
        choose(n, k, i + 1, acc, out);
        acc.pop();
    }
}

/// Optimum of the configuration LP over proxy coefficients, by enumerating
/// every basis of `[A | I]` and keeping the best feasible basic solution.
pub fn lp_oracle(instance: &Instance<Rational>, c: &Rational) -> Rational {
    let n = instance.bidders();
    let m = instance.items();
    let rows = n + m;
    let mut columns: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for i in 0..n {
        for s in 1u64..(1 << m) {
            let mut col = vec![Rational::zero(); rows];
            col[i] = Rational::one();
            for j in 0..m {
                if s >> j & 1 == 1 {
                    col[n + j] = Rational::one();
                }
            }
            let coef = proxy_brute(instance.valuation(i), c, ItemSet::from_bits(s));
            columns.push((col, coef));
        }
    }
    for row in 0..rows {
        let mut col = vec![Rational::zero(); rows];
        col[row] = Rational::one();
        columns.push((col, Rational::zero()));
    }
    let mut best: Option<Rational> = None;
    choose(columns.len(), rows, 0, &mut Vec::new(), &mut |basis| {
        let a: Vec<Vec<Rational>> = (0..rows)
            .map(|row| basis.iter().map(|&b| columns[b].0[row].clone()).collect())
            .collect();
        if let Some(y) = solve_square(a, vec![Rational::one(); rows]) {
            if y.iter().all(|v| !v.is_negative()) {
                let value = basis
                    .iter()
                    .zip(&y)
                    .map(|(&b, v)| columns[b].1.clone() * v.clone())
                    .fold(Rational::zero(), |a, b| a + b);
                if best.as_ref().is_none_or(|b| value > *b) {
                    best = Some(value);
                }
            }
        }
    });
    best.expect("the all-slack basis is always feasible")
}
