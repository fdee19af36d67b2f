//! One-dimensional quadrature rules on `[0, 1]`.

use std::f64::consts::PI;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the three-term recurrence).
pub fn gauss_legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            let dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // Recompute the derivative at the converged node.
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = if n > 1 { n as f64 * (z * p1 - p0) / (z * z - 1.0) } else { 1.0 };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

impl Rule {
    pub fn gauss_legendre(n: usize) -> Rule {
        Rule::composite(n, &[0.0, 1.0])
    }

    /// Gauss-Legendre with `n` nodes on each interval between consecutive breakpoints.
    pub fn composite(n: usize, breakpoints: &[f64]) -> Rule {
        let (x, w) = gauss_legendre_reference(n);
        let mut nodes = Vec::with_capacity(n * breakpoints.len());
        let mut weights = Vec::with_capacity(n * breakpoints.len());
        for pair in breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            for (xi, wi) in x.iter().zip(&w) {
                // Measure from the nearer end to keep nodes next to 0 and 1 accurate.
                let node = if *xi <= 0.0 { a + half * (1.0 + xi) } else { b - half * (1.0 - xi) };
                nodes.push(node);
                weights.push(half * wi);
            }
        }
        Rule { nodes, weights }
    }

    /// Composite rule on panels refined dyadically towards both endpoints:
    /// `[0, 2^-L], [2^-L, 2^(1-L)], ..., [1/4, 1/2]` and the mirror image.
    pub fn graded(n: usize, levels: u32) -> Rule {
        let mut left: Vec<f64> = (1..=levels).rev().map(|j| 0.5f64.powi(j as i32 + 1)).collect();
        let mut bps = vec![0.0];
        bps.append(&mut left);
        bps.push(0.5);
        let mirror: Vec<f64> = bps[..bps.len() - 1].iter().rev().map(|x| 1.0 - x).collect();
        bps.extend(mirror);
        Rule::composite(n, &bps)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

const ADAPTIVE_NODES: usize = 15;

/// Adaptive Gauss-Legendre on `[a, b]`: an interval is accepted when the
/// 15-point rule agrees with the sum over its two halves to `abs_tol`.
pub fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    let (x, w) = gauss_legendre_reference(ADAPTIVE_NODES);
    let panel = |lo: f64, hi: f64| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>()
    };
    fn recurse(panel: &impl Fn(f64, f64) -> f64, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (lo + hi);
        let (l, r) = (panel(lo, mid), panel(mid, hi));
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        recurse(panel, lo, mid, l, 0.5 * tol, depth - 1) + recurse(panel, mid, hi, r, 0.5 * tol, depth - 1)
    }
    recurse(&panel, a, b, panel(a, b), abs_tol, 40)
}
