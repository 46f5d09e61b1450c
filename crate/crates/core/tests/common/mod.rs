#![allow(dead_code, unused_imports)]

use hazardforge_core::data::{DatasetSchema, Episode, Epoch, MISSING};
use hazardforge_core::{HazardEnsemble, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;

pub use oracles::*;

pub const MS: f64 = 24.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while (b - a).abs() > tol {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    (a + b) / 2.0
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps || !(m > a && m < b) {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, eps, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, eps, depth - 1)
}

/// Adaptive Simpson quadrature. The tolerance is not halved on recursion,
/// so jump discontinuities get refined until their cell is negligible.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    if !(a < b) {
        return 0.0;
    }
    let m = (a + b) / 2.0;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, eps, 80)
}

/// One-sample Kolmogorov–Smirnov statistic against `cdf`.
pub fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).max((i as f64 + 1.0) / n - c)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at α = 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

fn random_tree<R: Rng>(rng: &mut R, width: usize, depth: usize) -> TreeNode {
    if depth == 0 || rng.random::<f64>() < 0.2 {
        return TreeNode::leaf(rng.random_range(-1.5..1.5));
    }
    let feature = rng.random_range(0..=width);
    let threshold = if feature == 0 {
        // Coarse grid so thresholds sometimes coincide with epoch bounds.
        (rng.random_range(MS..MS + 40.0) * 4.0).round() / 4.0
    } else {
        rng.random_range(-1.0..1.0)
    };
    TreeNode::split(
        feature,
        threshold,
        rng.random::<bool>(),
        rng.random_range(0.1..5.0),
        random_tree(rng, width, depth - 1),
        random_tree(rng, width, depth - 1),
    )
}

pub fn random_model<R: Rng>(rng: &mut R, width: usize) -> HazardEnsemble {
    let names: Vec<String> = (0..width).map(|j| format!("x{j}")).collect();
    let schema = DatasetSchema::numeric(&names, MS);
    let n_trees = rng.random_range(1..8);
    let trees = (0..n_trees).map(|_| random_tree(rng, width, 3)).collect();
    HazardEnsemble::new(
        rng.random_range(-4.0..-0.5),
        rng.random_range(0.05..=1.0),
        trees,
        schema,
    )
    .unwrap()
}

/// Random trajectory from `MS` with occasional gaps and missing values.
/// Boundaries sit on a quarter-hour grid, like the model thresholds.
pub fn random_episode<R: Rng>(rng: &mut R, id: &str, width: usize) -> Episode {
    let mut t = MS;
    let n = rng.random_range(1..8);
    let mut epochs = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random::<f64>() < 0.15 {
            t += rng.random_range(1..8) as f64 * 0.25;
        }
        let len = if rng.random::<bool>() {
            rng.random_range(1..24) as f64 * 0.25
        } else {
            rng.random_range(0.1..6.0)
        };
        let x = (0..width)
            .map(|_| {
                if rng.random::<f64>() < 0.1 {
                    MISSING
                } else {
                    rng.random_range(-1.5..1.5)
                }
            })
            .collect();
        epochs.push(Epoch::new(t, t + len, x, rng.random::<f64>() < 0.3));
        t += len;
    }
    Episode::new(id, format!("s-{id}"), epochs)
}
