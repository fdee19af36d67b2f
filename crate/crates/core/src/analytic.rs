//! Closed-form covariance machinery for filtered fBm / Rosenblatt increments.
//!
//! All lag sums `sum_{q,r} a_q a_r |k + q - r|^(2x)` go through [`lag_sum`],
//! which switches to a binomial series at large lags. The direct sum loses
//! every significant digit once `k^(2x - 2p)` drops below machine epsilon
//! relative to `k^(2x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::Filter;
use crate::quadrature::rules::adaptive_gauss;

/// Leading factor of the second-chaos variance constant.
///
/// Carrying the kernel inner products through the off-diagonal lag sum gives
/// `16 d(H)^2 / c(H)^2 * {..}^2 = 32 (2H-1) / (H (H+1)^2) / c(H)^2 * {..}^2`;
/// for the filter `{1,-1}` this is the classical `16 d(H)^2`.
pub const C2_PREFACTOR: f64 = 32.0;

/// Validated Hurst index `H in (1/2, 1)` with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstParam {
    h: f64,
    h_prime: f64,
    d: f64,
    alpha_h: f64,
    c_kernel: f64,
}

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(Error::HurstRange(h));
        }
        let h_prime = 0.5 * (h + 1.0);
        Ok(HurstParam {
            h,
            h_prime,
            d: (h / (2.0 * (2.0 * h - 1.0))).powf(-0.5) / (h + 1.0),
            alpha_h: 0.5 * h * (h + 1.0),
            c_kernel: kernel_constant(h_prime),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `H' = (H + 1) / 2`, the index of the underlying Gaussian kernel.
    pub fn h_prime(&self) -> f64 {
        self.h_prime
    }

    /// Rosenblatt kernel normaliser `d(H)`.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// `alpha(H) = H (H + 1) / 2 = H' (2H' - 1)`.
    pub fn alpha_h(&self) -> f64 {
        self.alpha_h
    }

    /// Kernel constant `c_{H'}` of `K^{H'}`.
    pub fn c_kernel(&self) -> f64 {
        self.c_kernel
    }
}

/// `c_H = (H (2H - 1) / B(2 - 2H, H - 1/2))^(1/2)`.
pub fn kernel_constant(h: f64) -> f64 {
    let (a, b) = (2.0 - 2.0 * h, h - 0.5);
    let beta = (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp();
    (h * (2.0 * h - 1.0) / beta).sqrt()
}

/// fBm covariance `(t^2H + s^2H - |t - s|^2H) / 2` for any `H in (0, 1)`.
pub fn fbm_covariance(t: f64, s: f64, h: f64) -> f64 {
    0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

fn check_kernel_domain(t: f64, s: f64) -> Result<()> {
    if s > 0.0 && s < t && t.is_finite() {
        Ok(())
    } else {
        Err(Error::KernelDomain { t, s })
    }
}

/// `K^H(t, s) = c_H s^(1/2-H) int_s^t (u - s)^(H-3/2) u^(H-1/2) du` for `0 < s < t`.
///
/// The substitution `u = s + w^(1/(H-1/2))` turns the integrand into the
/// smooth `(s + w^(1/(H-1/2)))^(H-1/2) / (H - 1/2)`.
pub fn kernel_k(t: f64, s: f64, h: f64) -> Result<f64> {
    check_kernel_domain(t, s)?;
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::HurstRange(h));
    }
    let e = h - 0.5;
    let upper = (t - s).powf(e);
    let integral = adaptive_gauss(&|w: f64| (s + w.powf(1.0 / e)).powf(e) / e, 0.0, upper, 1e-12);
    Ok(kernel_constant(h) * s.powf(0.5 - h) * integral)
}

/// `d/dt K^H(t, s) = c_H (s/t)^(1/2-H) (t - s)^(H-3/2)`.
pub fn kernel_dk(t: f64, s: f64, h: f64) -> Result<f64> {
    check_kernel_domain(t, s)?;
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::HurstRange(h));
    }
    Ok(kernel_constant(h) * (s / t).powf(0.5 - h) * (t - s).powf(h - 1.5))
}

/// `int_0^(u^v) dK^h(u, y) dK^h(v, y) dy` by quadrature, for `u != v`.
///
/// Singular factors `y^(1-2h)` at zero and `(min - y)^(h-3/2)` at the upper
/// end are removed by power substitutions on the two halves of the range.
pub fn kernel_inner_product(u: f64, v: f64, h: f64) -> Result<f64> {
    let (lo, hi) = if u < v { (u, v) } else { (v, u) };
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::KernelDomain { t: hi, s: lo });
    }
    let c = kernel_constant(h);
    // Product with the singular powers factored out.
    let smooth = |y: f64| (lo * hi).powf(h - 0.5) * (hi - y).powf(h - 1.5);
    let mid = 0.5 * lo;
    // y = w^(1/(2-2h)) on [0, mid]: y^(1-2h) dy = dw / (2 - 2h)
    let a = 2.0 - 2.0 * h;
    let left = adaptive_gauss(
        &|w: f64| {
            let y = w.powf(1.0 / a);
            smooth(y) * (lo - y).powf(h - 1.5) / a
        },
        0.0,
        mid.powf(a),
        1e-13,
    );
    // lo - y = w^(1/(h-1/2)) on [mid, lo]: (lo - y)^(h-3/2) dy = dw / (h - 1/2)
    let e = h - 0.5;
    let right = adaptive_gauss(
        &|w: f64| {
            let y = lo - w.powf(1.0 / e);
            smooth(y) * y.powf(1.0 - 2.0 * h) / e
        },
        0.0,
        (lo - mid).powf(e),
        1e-13,
    );
    Ok(c * c * (left + right))
}

/// `sum_{q,r} a_q a_r |k + q - r|^(2x)` with `0^0 = 1` and `|0|^(2x) = 0` for `x > 0`.
pub fn lag_sum(filter: &Filter, x: f64, k: i64) -> f64 {
    LagSums::new(filter).eval(x, k)
}

/// Precomputed autocorrelation and its moments for repeated lag sums.
#[derive(Debug, Clone)]
pub struct LagSums {
    len: i64,
    order: usize,
    beta: Vec<f64>,
    // sum_d beta_d d^n, n = 0..SERIES_TERMS
    moments: Vec<f64>,
}

const SERIES_TERMS: usize = 160;

impl LagSums {
    pub fn new(filter: &Filter) -> Self {
        let beta = filter.autocorrelation();
        let len = filter.len() as i64;
        let moments = (0..SERIES_TERMS)
            .map(|n| {
                beta.iter()
                    .enumerate()
                    .map(|(i, b)| b * ((i as i64 - len) as f64).powi(n as i32))
                    .sum()
            })
            .collect();
        LagSums { len, order: filter.order(), beta, moments }
    }

    pub fn eval(&self, x: f64, k: i64) -> f64 {
        let k = k.abs();
        if k >= 3 * self.len.max(1) && k > 0 {
            self.series(x, k as f64)
        } else {
            self.direct(x, k)
        }
    }

    fn direct(&self, x: f64, k: i64) -> f64 {
        self.beta
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let lag = (k + i as i64 - self.len).abs() as f64;
                b * pow0(lag, 2.0 * x)
            })
            .sum()
    }

    // k^(2x) sum_{n >= 2p} C(2x, n) M_n k^(-n); moments below 2p vanish
    // exactly and odd moments vanish because beta is symmetric.
    fn series(&self, x: f64, k: f64) -> f64 {
        let two_x = 2.0 * x;
        let start = 2 * self.order;
        let mut binom = 1.0;
        for n in 0..start {
            binom *= (two_x - n as f64) / (n as f64 + 1.0);
        }
        let mut kpow = k.powi(-(start as i32));
        let mut acc = 0.0;
        let mut n = start;
        while n < SERIES_TERMS {
            let term = binom * self.moments[n] * kpow;
            acc += term;
            if n > start + 4 && term.abs() <= 1e-18 * acc.abs() {
                break;
            }
            binom *= (two_x - n as f64) / (n as f64 + 1.0) * (two_x - n as f64 - 1.0) / (n as f64 + 2.0);
            kpow /= k * k;
            n += 2;
        }
        k.powf(two_x) * acc
    }
}

// |t|^e with 0^0 = 1 and 0^e = 0 for e > 0
fn pow0(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        t.powf(e)
    }
}

/// `c(x) = -sum_{q,r} a_q a_r |q - r|^(2x)`; positive on `(0, 1]`, zero at `x = 0`.
pub fn c_of_h(filter: &Filter, x: f64) -> f64 {
    if x == 0.0 {
        // -(sum a)^2 under 0^0 = 1; exact zero even when the coefficients
        // only sum to zero up to rounding
        return 0.0;
    }
    -lag_sum(filter, x, 0)
}

/// Covariance of the filtered process at lag `j` on the grid `1/N`.
pub fn pi_alpha(filter: &Filter, h: f64, n: usize, j: i64) -> f64 {
    -0.5 * (n as f64).powf(-2.0 * h) * lag_sum(filter, h, j)
}

/// `rho(k) = sum a_q a_r |k + q - r|^(2H) / c(H)`, so `rho(0) = -1`.
pub fn rho_alpha(filter: &Filter, h: f64, k: i64) -> f64 {
    lag_sum(filter, h, k) / c_of_h(filter, h)
}

/// `int_[0,1]^2 |u - v - delta|^(2H'-2) du dv`
/// `= (|1+delta|^(2H') + |1-delta|^(2H') - 2|delta|^(2H')) / (2H'(2H'-1))`.
pub fn difference_integral(delta: f64, h_prime: f64) -> f64 {
    let e = 2.0 * h_prime;
    ((1.0 + delta).abs().powf(e) + (1.0 - delta).abs().powf(e) - 2.0 * pow0(delta.abs(), e))
        / (e * (e - 1.0))
}

/// The braced double sum `sum_{q,r} b_q b_r [|1+q-r|^(2H') + |1-q+r|^(2H') - 2|q-r|^(2H')]`.
pub fn c2_bracket(filter: &Filter, h: &HurstParam) -> f64 {
    let b = filter.partial_sums();
    let b = b.as_slice();
    let e = 2.0 * h.h_prime();
    let mut acc = 0.0;
    for (q, bq) in b.iter().enumerate() {
        for (r, br) in b.iter().enumerate() {
            let d = q as f64 - r as f64;
            acc += bq * br * ((1.0 + d).abs().powf(e) + (1.0 - d).abs().powf(e) - 2.0 * pow0(d.abs(), e));
        }
    }
    acc
}

/// Asymptotic variance of `N^(1-H) V_N`.
pub fn c2(filter: &Filter, h: &HurstParam) -> f64 {
    let x = h.h();
    let c = c_of_h(filter, x);
    let bracket = c2_bracket(filter, h);
    C2_PREFACTOR / (c * c) * ((2.0 * x - 1.0) / (x * (x + 1.0).powi(2))) * bracket * bracket
}

/// Filtered-process covariance summary at `N = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceTable {
    pub filter: String,
    pub h: f64,
    /// `pi(0) = c(H) / 2`.
    pub pi0: f64,
    /// `rho(0..=K)`.
    pub rho: Vec<f64>,
}

impl CovarianceTable {
    pub fn new(filter: &Filter, h: &HurstParam, max_lag: usize) -> Self {
        let sums = LagSums::new(filter);
        let c = -sums.eval(h.h(), 0);
        CovarianceTable {
            filter: filter.id(),
            h: h.h(),
            pi0: 0.5 * c,
            rho: (0..=max_lag as i64).map(|k| sums.eval(h.h(), k) / c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(l: usize) -> Filter {
        Filter::finite_difference(l).unwrap()
    }

    #[test]
    fn hurst_param_ranges() {
        let p = HurstParam::new(0.7).unwrap();
        assert!((p.h_prime() - 0.85).abs() < 1e-15);
        assert!((p.alpha_h() - p.h_prime() * (2.0 * p.h_prime() - 1.0)).abs() < 1e-15);
        assert!(p.d() > 0.0);
        // alpha(H)^2 d(H)^2 / (H (2H - 1)) = 1/2
        let x = p.alpha_h().powi(2) * p.d().powi(2) / (0.7 * 0.4);
        assert!((x - 0.5).abs() < 1e-14);
        for bad in [0.5, 1.0, 0.2, f64::NAN] {
            assert!(HurstParam::new(bad).is_err());
        }
    }

    #[test]
    fn fbm_covariance_examples() {
        assert!((fbm_covariance(0.3, 0.3, 0.7) - 0.3f64.powf(1.4)).abs() < 1e-15);
        assert_eq!(fbm_covariance(1.0, 0.0, 0.7), 0.0);
        assert!((fbm_covariance(1.0, 0.5, 0.7) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn c_examples() {
        let first = Filter::custom(vec![1.0, -1.0]).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((c_of_h(&first, x) - 2.0).abs() < 1e-14);
        }
        let second = Filter::custom(vec![1.0, -2.0, 1.0]).unwrap();
        assert!((c_of_h(&second, 0.5) - 4.0).abs() < 1e-14);
        assert_eq!(c_of_h(&fd(3), 0.0), 0.0);
    }

    #[test]
    fn pi_and_rho_examples() {
        let f = fd(2);
        let h = 0.7;
        let n = 100;
        let pi0 = pi_alpha(&f, h, n, 0);
        assert!((pi0 - (n as f64).powf(-1.4) * c_of_h(&f, h) / 2.0).abs() < 1e-18);
        assert!((rho_alpha(&f, h, 0) + 1.0).abs() < 1e-15);
        let first = Filter::custom(vec![1.0, -1.0]).unwrap();
        for j in 1..5 {
            assert!(pi_alpha(&first, 0.5, 10, j).abs() < 1e-15);
        }
        for k in 1..6i64 {
            let kf = k as f64;
            let expect = (2.0 * kf.powf(1.4) - (kf + 1.0).powf(1.4) - (kf - 1.0).powf(1.4)) / 2.0;
            assert!((rho_alpha(&first, 0.7, k) - expect).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn series_agrees_with_direct_sum() {
        for f in [fd(2), fd(3), Filter::daubechies(3).unwrap()] {
            let s = LagSums::new(&f);
            for x in [0.55, 0.7, 0.95] {
                for k in [3 * f.len() as i64, 4 * f.len() as i64 + 1] {
                    let (a, b) = (s.series(x, k as f64), s.direct(x, k));
                    // the direct sum loses ~7 digits to cancellation at these lags
                    assert!((a - b).abs() <= 1e-7 * b.abs().max(1e-12), "{} x={x} k={k}: {a} vs {b}", f.id());
                }
            }
        }
    }

    #[test]
    fn second_difference_covariance_decay() {
        // |pi(j)| ~ C j^(2H-4): the ratio at j and 2j approaches 2^(2H-4).
        let f = Filter::custom(vec![1.0, -2.0, 1.0]).unwrap();
        let h = 0.7;
        let ratio = pi_alpha(&f, h, 1, 2000) / pi_alpha(&f, h, 1, 1000);
        assert!((ratio - 2f64.powf(2.0 * h - 4.0)).abs() < 1e-3);
    }

    #[test]
    fn c2_first_difference_closed_form() {
        let first = Filter::custom(vec![1.0, -1.0]).unwrap();
        for x in [0.55, 0.7, 0.9] {
            let p = HurstParam::new(x).unwrap();
            assert!((c2_bracket(&first, &p) - 2.0).abs() < 1e-14);
            let expect = 16.0 * p.d() * p.d();
            assert!((c2(&first, &p) - expect).abs() < 1e-12 * expect);
            assert!((expect - 32.0 * (2.0 * x - 1.0) / (x * (x + 1.0).powi(2))).abs() < 1e-12);
        }
        let near = HurstParam::new(0.5 + 1e-9).unwrap();
        assert!(c2(&fd(2), &near) < 1e-7);
    }

    #[test]
    fn c2_second_difference_bracket() {
        let f = Filter::custom(vec![1.0, -2.0, 1.0]).unwrap();
        let p = HurstParam::new(0.7).unwrap();
        let expect = 8.0 - 2f64.powf(2.0 * p.h_prime() + 1.0);
        assert!((c2_bracket(&f, &p) - expect).abs() < 1e-13);
    }

    #[test]
    fn kernel_checks() {
        let h = 0.8;
        assert!(kernel_k(0.9, 0.3, h).unwrap() > 0.0);
        assert!(kernel_k(0.3, 0.3, h).is_err());
        assert!(kernel_dk(0.2, 0.5, h).is_err());
        // dK blows up like (t - s)^(H - 3/2) as s -> t
        let t = 0.5;
        let r = kernel_dk(t, t - 1e-6, h).unwrap() / kernel_dk(t, t - 1e-4, h).unwrap();
        assert!((r / 100f64.powf(1.5 - h) - 1.0).abs() < 1e-3);
        // dK is the t-derivative of K
        let (t, s, eps) = (0.7, 0.2, 1e-5);
        let fd_deriv = (kernel_k(t + eps, s, h).unwrap() - kernel_k(t - eps, s, h).unwrap()) / (2.0 * eps);
        assert!((fd_deriv - kernel_dk(t, s, h).unwrap()).abs() < 1e-5 * fd_deriv.abs());
    }

    #[test]
    fn kernel_gives_fbm_variance() {
        // int_0^t K(t, s)^2 ds = t^(2H); s = w^(1/(2-2H)) absorbs the s^(1-2H) endpoint.
        let (h, t) = (0.75, 0.8);
        let e = 2.0 - 2.0 * h;
        let var = adaptive_gauss(
            &|w: f64| {
                let s = w.powf(1.0 / e);
                if s <= 0.0 || s >= t {
                    return 0.0;
                }
                kernel_k(t, s, h).unwrap().powi(2) * s.powf(2.0 * h - 1.0) / e
            },
            0.0,
            t.powf(e),
            1e-9,
        );
        assert!((var - t.powf(2.0 * h)).abs() < 1e-5, "{var}");
    }
}
