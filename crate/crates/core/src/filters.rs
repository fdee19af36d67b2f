//! Discrete filters: finite differences, Daubechies wavelets and
//! user-supplied coefficient vectors.
//!
//! A filter of length `l` and order `p` is a vector `a_0..a_l` whose moments
//! `sum_q a_q q^r` vanish for `r < p` (with `0^0 = 1`) and not for `r = p`.
//! Every statistic built on top of a filter is quadratic in the
//! coefficients, so a global sign flip changes nothing downstream.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative moment size below which a moment counts as vanishing.
pub const VANISHING_TOL: f64 = 1e-10;
/// Relative moment size above which a moment counts as structurally nonzero.
pub const NONZERO_TOL: f64 = 1e-8;

pub const MAX_FINITE_DIFFERENCE: usize = 30;
pub const MIN_DAUBECHIES: usize = 2;
pub const MAX_DAUBECHIES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    FiniteDifference,
    Daubechies,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    coeffs: Vec<f64>,
    order: usize,
    kind: FilterKind,
}

/// Moment diagnostics returned by [`validate_filter`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterValidation {
    pub order: usize,
    /// Raw moments `sum_q a_q q^r` for `r = 0..=l`.
    pub moments: Vec<f64>,
    /// Moments about the centre `l/2`, divided by `sum_q |a_q| |q - l/2|^r`.
    /// These are the values compared against the thresholds.
    pub relative_moments: Vec<f64>,
}

/// Determine the order of a coefficient vector.
///
/// Moments are judged about the centre `l/2` and relative to
/// `sum_q |a_q| |q - l/2|^r`. Raw Daubechies moments at high `r` are dominated
/// by `l^r` and cannot be compared to an absolute threshold in double
/// precision. The first non-vanishing moment does not depend on the centre.
pub fn validate_filter(coeffs: &[f64]) -> Result<FilterValidation> {
    if coeffs.is_empty() || coeffs.iter().all(|&c| c == 0.0) {
        return Err(Error::EmptyFilter);
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite filter coefficient".into()));
    }
    let len = coeffs.len() - 1;
    let mut moments = Vec::with_capacity(len + 1);
    let mut relative = Vec::with_capacity(len + 1);
    for r in 0..=len {
        let (mut m, mut centred, mut scale) = (0.0, 0.0, 0.0);
        for (q, &a) in coeffs.iter().enumerate() {
            m += a * int_pow(q as f64, r);
            let w = int_pow(q as f64 - 0.5 * len as f64, r);
            centred += a * w;
            scale += a.abs() * w.abs();
        }
        moments.push(m);
        relative.push(centred / scale);
    }
    if relative[0].abs() >= VANISHING_TOL {
        return Err(Error::NotAFilter { sum: moments[0] });
    }
    let order = match relative.iter().position(|m| m.abs() >= VANISHING_TOL) {
        Some(p) if relative[p].abs() > NONZERO_TOL => p,
        Some(p) => {
            return Err(Error::InvalidParameter(format!(
                "moment {p} is neither vanishing nor clearly nonzero (relative {:e})",
                relative[p]
            )))
        }
        // Only the zero vector annihilates all moments up to its length.
        None => return Err(Error::EmptyFilter),
    };
    Ok(FilterValidation { order, moments, relative_moments: relative })
}

// 0^0 = 1
fn int_pow(x: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, _| acc * x)
}

impl Filter {
    /// Validate arbitrary coefficients.
    pub fn custom(coeffs: Vec<f64>) -> Result<Self> {
        let v = validate_filter(&coeffs)?;
        Ok(Filter { coeffs, order: v.order, kind: FilterKind::Custom })
    }

    /// Order-`l` finite-difference filter, `a_k = (-1)^(k+1) C(l, k)`.
    pub fn finite_difference(len: usize) -> Result<Self> {
        if !(1..=MAX_FINITE_DIFFERENCE).contains(&len) {
            return Err(Error::UnsupportedOrder { order: len, min: 1, max: MAX_FINITE_DIFFERENCE });
        }
        let coeffs = finite_difference_coefficients(len).into_iter().map(|c| c as f64).collect();
        let f = Filter { coeffs, order: len, kind: FilterKind::FiniteDifference };
        debug_assert_eq!(validate_filter(&f.coeffs).map(|v| v.order), Ok(len));
        Ok(f)
    }

    /// Daubechies high-pass filter with `p` vanishing moments (length `2p`).
    pub fn daubechies(p: usize) -> Result<Self> {
        if !(MIN_DAUBECHIES..=MAX_DAUBECHIES).contains(&p) {
            return Err(Error::UnsupportedOrder { order: p, min: MIN_DAUBECHIES, max: MAX_DAUBECHIES });
        }
        let coeffs = daubechies_highpass(p);
        let v = validate_filter(&coeffs)?;
        if v.order != p {
            return Err(Error::InvalidParameter(format!(
                "Daubechies construction for p={p} produced order {}",
                v.order
            )));
        }
        Ok(Filter { coeffs, order: p, kind: FilterKind::Daubechies })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Filter length `l` (number of coefficients minus one).
    pub fn len(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn negated(&self) -> Filter {
        Filter { coeffs: self.coeffs.iter().map(|c| -c).collect(), ..self.clone() }
    }

    /// `b_q = a_0 + ... + a_q`.
    pub fn partial_sums(&self) -> PartialSums {
        let mut acc = 0.0;
        let mut b: Vec<f64> = self
            .coeffs
            .iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect();
        // The moment condition makes the last entry zero; remove rounding.
        *b.last_mut().expect("filter is non-empty") = 0.0;
        PartialSums(b)
    }

    /// Autocorrelation `beta_d = sum_q a_q a_(q+d)` for `d = -l..=l`, stored at `d + l`.
    ///
    /// `sum_{q,r} a_q a_r g(k + q - r) = sum_d beta_d g(k + d)`.
    pub fn autocorrelation(&self) -> Vec<f64> {
        let l = self.len() as isize;
        (-l..=l)
            .map(|d| {
                (0..=l)
                    .filter_map(|q| {
                        let r = q + d;
                        (0..=l).contains(&r).then(|| self.coeffs[q as usize] * self.coeffs[r as usize])
                    })
                    .sum()
            })
            .collect()
    }

    /// Short identifier such as `fd:2`, `db:4` or `custom:1,-2,1`.
    pub fn id(&self) -> String {
        match self.kind {
            FilterKind::FiniteDifference => format!("fd:{}", self.len()),
            FilterKind::Daubechies => format!("db:{}", self.order),
            FilterKind::Custom => {
                let parts: Vec<String> = self.coeffs.iter().map(|c| format!("{c}")).collect();
                format!("custom:{}", parts.join(","))
            }
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadFilter(s.to_string());
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind {
            "fd" => Filter::finite_difference(arg.trim().parse().map_err(|_| bad())?),
            "db" => Filter::daubechies(arg.trim().parse().map_err(|_| bad())?),
            "custom" => {
                let coeffs = arg
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                Filter::custom(coeffs)
            }
            _ => Err(bad()),
        }
    }
}

/// Partial sums `b_0..b_l` of a filter; `b_l` is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSums(pub Vec<f64>);

impl PartialSums {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Integer coefficients `(-1)^(k+1) C(l, k)`, `k = 0..=l`.
pub fn finite_difference_coefficients(len: usize) -> Vec<i64> {
    let mut binom = 1i64;
    (0..=len)
        .map(|k| {
            if k > 0 {
                binom = binom * (len - k + 1) as i64 / k as i64;
            }
            if k % 2 == 0 {
                -binom
            } else {
                binom
            }
        })
        .collect()
}

/// Daubechies wavelet (high-pass) filter with `p` vanishing moments.
///
/// Spectral factorisation: the half-band polynomial
/// `P(y) = sum_{k<p} C(p-1+k, k) y^k`, `y = sin^2(w/2)`, is factored and each
/// root `y_k` contributes the minimum-phase zero of `z + 1/z = 2 - 4 y_k`.
/// The low-pass filter is normalised to `sum h = sqrt(2)` (unit energy) and
/// the high-pass is `g_k = (-1)^(k+1) h_k`.
fn daubechies_highpass(p: usize) -> Vec<f64> {
    let poly: Vec<f64> = (0..p).map(|k| binomial(p - 1 + k, k)).collect();
    let y_roots = poly_roots(&poly);

    // Coefficients in descending powers of z.
    let mut h = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..p {
        h = convolve(&h, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    for y in y_roots {
        let s = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (s * s - 4.0).sqrt();
        let z1 = (s + disc) / 2.0;
        let z = if z1.norm() < 1.0 { z1 } else { 1.0 / z1 };
        h = convolve(&h, &[Complex64::new(1.0, 0.0), -z]);
    }
    let mut h: Vec<f64> = h.into_iter().map(|c| c.re).collect();
    if h[0].abs() < h[h.len() - 1].abs() {
        h.reverse();
    }
    let scale = std::f64::consts::SQRT_2 / h.iter().sum::<f64>();
    h.iter_mut().for_each(|c| *c *= scale);
    h.iter()
        .enumerate()
        .map(|(k, &c)| if k % 2 == 0 { -c } else { c })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots of `sum_k c_k y^k` (ascending coefficients) by Aberth-Ehrlich
/// iteration followed by Newton polishing.
pub(crate) fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(monic[degree], 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in monic[..degree].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    // Cauchy bound for the starting circle.
    let radius = 1.0 + monic[..degree].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| Complex64::from_polar(radius * 0.5, 0.4 + std::f64::consts::TAU * k as f64 / degree as f64))
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            z[i] -= step;
            max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(*zi);
            if dp.norm() == 0.0 {
                break;
            }
            *zi -= p / dp;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_examples() {
        assert_eq!(Filter::finite_difference(1).unwrap().coeffs(), &[-1.0, 1.0]);
        let fd2 = Filter::finite_difference(2).unwrap();
        assert_eq!(fd2.coeffs(), &[-1.0, 2.0, -1.0]);
        assert_eq!(validate_filter(fd2.coeffs()).unwrap().order, 2);
        let fd4 = Filter::finite_difference(4).unwrap();
        assert_eq!(fd4.coeffs(), &[-1.0, 4.0, -6.0, 4.0, -1.0]);
        let v = validate_filter(fd4.coeffs()).unwrap();
        assert_eq!(v.moments[3], 0.0);
        assert_eq!(v.moments[4], -24.0);
    }

    #[test]
    fn validate_examples() {
        assert_eq!(validate_filter(&[1.0, -2.0, 1.0]).unwrap().order, 2);
        assert_eq!(validate_filter(&[1.0, -1.0]).unwrap().order, 1);
        assert!(matches!(validate_filter(&[1.0, 1.0]), Err(Error::NotAFilter { .. })));
        assert_eq!(validate_filter(&[]), Err(Error::EmptyFilter));
        assert_eq!(validate_filter(&[0.0, 0.0]), Err(Error::EmptyFilter));
    }

    #[test]
    fn partial_sums_examples() {
        let ps = |c: &[f64]| Filter::custom(c.to_vec()).unwrap().partial_sums().0;
        assert_eq!(ps(&[1.0, -1.0]), vec![1.0, 0.0]);
        assert_eq!(ps(&[1.0, -2.0, 1.0]), vec![1.0, -1.0, 0.0]);
        assert_eq!(ps(&[-1.0, 2.0, -1.0]), vec![-1.0, 1.0, 0.0]);
    }

    #[test]
    fn daubechies_two_matches_d4() {
        let g = Filter::daubechies(2).unwrap();
        let expected = [-0.48296291314453414, 0.83651630373780794, -0.22414386804201339, -0.12940952255126037];
        for (a, b) in g.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        let energy: f64 = g.coeffs().iter().map(|c| c * c).sum();
        assert!((energy - 1.0).abs() < 1e-14);
        assert_eq!(Filter::daubechies(3).unwrap().len(), 5);
    }

    #[test]
    fn daubechies_range() {
        for p in MIN_DAUBECHIES..=MAX_DAUBECHIES {
            let f = Filter::daubechies(p).unwrap();
            assert_eq!(f.coeffs().len(), 2 * p);
            assert_eq!(f.order(), p);
        }
        assert!(matches!(Filter::daubechies(1), Err(Error::UnsupportedOrder { .. })));
        assert!(matches!(Filter::daubechies(21), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn filter_strings() {
        assert_eq!("fd:3".parse::<Filter>().unwrap(), Filter::finite_difference(3).unwrap());
        assert_eq!("db:4".parse::<Filter>().unwrap().id(), "db:4");
        let c: Filter = "custom:1,-2,1".parse().unwrap();
        assert_eq!(c.order(), 2);
        assert_eq!(c.id(), "custom:1,-2,1");
        assert!("xx:2".parse::<Filter>().is_err());
        assert!("fd:two".parse::<Filter>().is_err());
        assert!("custom:1,1".parse::<Filter>().is_err());
    }

    #[test]
    fn autocorrelation_of_first_difference() {
        let f = Filter::custom(vec![1.0, -1.0]).unwrap();
        assert_eq!(f.autocorrelation(), vec![-1.0, 2.0, -1.0]);
    }

    #[test]
    fn quartic_roots() {
        // (y-1)(y-2)(y-3)(y-4)
        let roots = poly_roots(&[24.0, -50.0, 35.0, -10.0, 1.0]);
        let mut re: Vec<f64> = roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (r, e) in re.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((r - e).abs() < 1e-12);
        }
    }
}
