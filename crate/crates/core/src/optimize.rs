//! Derivative-free minimisers: golden-section search on an interval, a
//! bracketing line search, and multistart coordinate descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_STEPS: usize = 200;
const MAX_EXPANSIONS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: u64,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`. The endpoints
/// are evaluated as well, so a minimum on the boundary is not lost.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa = f(a);
    let fb = f(b);
    let mut best = if fb < fa { (b, fb) } else { (a, fa) };
    let mut evals = 2;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    evals += 2;
    for _ in 0..MAX_GOLDEN_STEPS {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    Minimum {
        x: best.0,
        value: best.1,
        evaluations: evals,
    }
}

/// Minimises `phi(t)` along a line starting from `t = 0` with known value
/// `phi0`. Expands a bracket from `step` and refines it by golden section.
pub fn line_search(mut phi: impl FnMut(f64) -> f64, phi0: f64, step: f64, tol: f64) -> Minimum {
    let mut evals = 0u64;
    let mut s = step.abs().max(1e-12);
    for _ in 0..8 {
        let fp = phi(s);
        let fm = phi(-s);
        evals += 2;
        if fp >= phi0 && fm >= phi0 {
            if s <= 1e-9 {
                break;
            }
            // Neither direction descends at this scale: the minimum is
            // inside (-s, s) or the step is too coarse.
            let m = golden_section(&mut phi, -s, s, tol);
            evals += m.evaluations;
            if m.value < phi0 {
                return Minimum {
                    evaluations: evals,
                    ..m
                };
            }
            s /= 16.0;
            continue;
        }
        let dir = if fp <= fm { 1.0 } else { -1.0 };
        let (mut prev, mut cur, mut fcur) = (0.0, s, fp.min(fm));
        let mut next = cur + (cur - prev) / INV_PHI;
        let mut fnext = phi(dir * next);
        evals += 1;
        let mut k = 0;
        while fnext < fcur && k < MAX_EXPANSIONS {
            prev = cur;
            cur = next;
            fcur = fnext;
            next = cur + (cur - prev) / INV_PHI;
            fnext = phi(dir * next);
            evals += 1;
            k += 1;
        }
        let m = golden_section(|t| phi(dir * t), prev, next, tol);
        evals += m.evaluations;
        let (x, v) = if m.value < fcur { (m.x, m.value) } else { (cur, fcur) };
        return Minimum {
            x: dir * x,
            value: v,
            evaluations: evals,
        };
    }
    Minimum {
        x: 0.0,
        value: phi0,
        evaluations: evals,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentOptions {
    /// Stop once a full sweep improves the objective by less than this
    /// (relative to `max(1, |value|)`).
    pub tol: f64,
    /// Cap on the number of sweeps.
    pub max_iter: usize,
    /// Random directions tried when the coordinate sweep stalls.
    pub random_directions: usize,
    pub seed: u64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-10,
            max_iter: 10_000,
            random_directions: 24,
            seed: 0x5EED_CD01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: u64,
}

fn search_directions(k: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..k {
        let mut d = vec![0.0; k];
        d[i] = 1.0;
        dirs.push(d);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..k {
        for j in i + 1..k {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; k];
                d[i] = r;
                d[j] = s * r;
                dirs.push(d);
            }
        }
    }
    dirs
}

/// Coordinate descent over the axes and the pairwise diagonals
/// `e_i ± e_j`, with exact line searches. When a sweep stalls, seeded
/// random directions are tried before declaring convergence, which lets
/// the method leave the kinks of nonsmooth objectives.
pub fn coordinate_descent(
    mut obj: impl FnMut(&[f64]) -> f64,
    x0: Vec<f64>,
    opts: &DescentOptions,
) -> DescentResult {
    let k = x0.len();
    let mut x = x0;
    let mut value = obj(&x);
    let mut evals = 1u64;
    if k == 0 {
        return DescentResult {
            x,
            value,
            iterations: 0,
            evaluations: evals,
        };
    }
    let dirs = search_directions(k);
    let scale0 = 0.1 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut steps = vec![scale0; dirs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trial = vec![0.0; k];
    let mut iterations = 0;

    let mut along = |x: &mut Vec<f64>, value: &mut f64, d: &[f64], step: f64, evals: &mut u64| -> f64 {
        let base = x.clone();
        let m = line_search(
            |t| {
                for ((o, b), di) in trial.iter_mut().zip(&base).zip(d) {
                    *o = b + t * di;
                }
                obj(&trial)
            },
            *value,
            step,
            opts.tol,
        );
        *evals += m.evaluations;
        if m.value < *value {
            for ((o, b), di) in x.iter_mut().zip(&base).zip(d) {
                *o = b + m.x * di;
            }
            *value = m.value;
            return if m.x != 0.0 { m.x.abs() } else { step };
        }
        0.0
    };

    while iterations < opts.max_iter {
        iterations += 1;
        let start = value;
        for (d, step) in dirs.iter().zip(steps.iter_mut()) {
            let moved = along(&mut x, &mut value, d, *step, &mut evals);
            if moved > 0.0 {
                *step = moved.max(1e-6);
            } else {
                *step = (*step * 0.5).max(1e-6);
            }
        }
        if start - value > opts.tol * value.abs().max(1.0) {
            continue;
        }
        let mut improved = false;
        for _ in 0..opts.random_directions {
            let mut d: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                continue;
            }
            d.iter_mut().for_each(|v| *v /= n);
            let before = value;
            along(&mut x, &mut value, &d, scale0, &mut evals);
            if before - value > opts.tol * value.abs().max(1.0) {
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
    }
    DescentResult {
        x,
        value,
        iterations,
        evaluations: evals,
    }
}
