//! Angular Fourier series, the generalized Abel transforms
//! `A_k g(z) = 2 int_z^1 T_k(z/y) [1 - (z/y)^2]^{-1/2} g(y) dy` and the
//! exact tables `A_k^n` of their kernel derivatives at `z = 0`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::quad::{composite_gauss, gauss_legendre};
use crate::xray::Sinogram;

pub const MAX_CHEB_DEGREE: usize = 64;
pub const MAX_ORACLE_ORDER: usize = 200;

/// Integer coefficients `t[k][l]` of `x^l` in `T_k(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebTable {
    t: Vec<Vec<BigInt>>,
}

impl ChebTable {
    pub fn k_max(&self) -> usize {
        self.t.len() - 1
    }

    pub fn get(&self, k: usize, l: usize) -> BigInt {
        self.t[k].get(l).cloned().unwrap_or_default()
    }

    pub fn row(&self, k: usize) -> &[BigInt] {
        &self.t[k]
    }

    /// `T_k(x)` in floating point.
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        self.t[k]
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
    }
}

/// Coefficient table from `T_{k+1} = 2x T_k - T_{k-1}`.
pub fn chebyshev_coeffs(k_max: usize) -> Result<ChebTable> {
    if k_max > MAX_CHEB_DEGREE {
        return Err(Error::Parameter(format!(
            "k_max {k_max} exceeds {MAX_CHEB_DEGREE}"
        )));
    }
    let mut t: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    if k_max >= 1 {
        t.push(vec![BigInt::zero(), BigInt::one()]);
    }
    for k in 1..k_max {
        let mut next = vec![BigInt::zero(); k + 2];
        for (l, c) in t[k].iter().enumerate() {
            next[l + 1] += c * 2;
        }
        for (l, c) in t[k - 1].iter().enumerate() {
            next[l] -= c;
        }
        t.push(next);
    }
    Ok(ChebTable { t })
}

/// `n!!` with `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> BigInt {
    let mut acc = BigInt::one();
    let mut m = n;
    while m > 1 {
        acc *= m;
        m -= 2;
    }
    acc
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, m| acc * m)
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `A_0^n`: `((n-1)!!)^2` for even `n`, zero for odd `n`.
pub fn abel_zero_coefficient(n: usize) -> BigInt {
    if n % 2 == 1 {
        BigInt::zero()
    } else {
        let d = double_factorial(n as i64 - 1);
        &d * &d
    }
}

/// Exact `A_k^n` for `k <= k_max`, `n <= n_max`, with thresholds `N(k)`.
#[derive(Clone, Debug)]
pub struct AbelTable {
    a: Vec<Vec<BigInt>>,
    thresholds: Vec<Option<usize>>,
}

impl AbelTable {
    pub fn k_max(&self) -> usize {
        self.a.len() - 1
    }

    pub fn n_max(&self) -> usize {
        self.a[0].len() - 1
    }

    pub fn get(&self, k: usize, n: usize) -> &BigInt {
        &self.a[k][n]
    }

    /// `N(k)`, or `None` if the tail is not yet positive at `n_max`.
    pub fn threshold(&self, k: usize) -> Option<usize> {
        self.thresholds[k]
    }

    /// Lines `k n A_k^n`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, row) in self.a.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                out.push_str(&format!("{k} {n} {v}\n"));
            }
        }
        out
    }
}

fn binomial_sum(cheb: &ChebTable, k: usize, n: usize) -> BigInt {
    (0..=n.min(k))
        .map(|l| binomial(n, l) * factorial(l) * cheb.get(k, l) * abel_zero_coefficient(n - l))
        .sum()
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Closed forms valid for `n >= k` with `n`, `k` of equal parity.
fn closed_form(cheb: &ChebTable, k: usize, n: usize) -> BigRational {
    let ni = n as i64;
    let nf = BigRational::from_integer(factorial(n));
    let one = BigRational::one();
    if k % 2 == 0 {
        let pre = ratio(double_factorial(ni - 1), double_factorial(ni));
        let mut sum = BigRational::zero();
        for m in 0..=k / 2 {
            let t = BigRational::from_integer(cheb.get(k, 2 * m));
            let mi = 2 * m as i64;
            let q = ratio(
                double_factorial(ni - mi - 1) * double_factorial(ni),
                double_factorial(ni - mi) * double_factorial(ni - 1),
            );
            sum += &t + &t * (q - &one);
        }
        nf * pre * sum
    } else {
        let pre = ratio(double_factorial(ni - 2), double_factorial(ni - 1));
        let mut sum = BigRational::zero();
        for m in 0..=(k - 1) / 2 {
            let t = BigRational::from_integer(cheb.get(k, 2 * m + 1));
            let mi = 2 * m as i64;
            let q = ratio(
                double_factorial(ni - mi - 2) * double_factorial(ni - 1),
                double_factorial(ni - mi - 1) * double_factorial(ni - 2),
            );
            sum += &t + &t * (q - &one);
        }
        nf * pre * sum
    }
}

/// Table of `A_k^n = sum_l C(n,l) l! t_k^l A_0^{n-l}`, checked entry by
/// entry against the closed forms wherever they apply.
pub fn abel_coefficients(k_max: usize, n_max: usize) -> Result<AbelTable> {
    let cheb = chebyshev_coeffs(k_max)?;
    let mut a = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut row = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let v = binomial_sum(&cheb, k, n);
            if n >= k && (n - k) % 2 == 0 && closed_form(&cheb, k, n) != BigRational::from_integer(v.clone()) {
                return Err(Error::Numerical(format!(
                    "closed form disagrees with the binomial sum at k = {k}, n = {n}"
                )));
            }
            row.push(v);
        }
        a.push(row);
    }
    let thresholds = (0..=k_max).map(|k| scan_threshold(&a[k], k)).collect();
    Ok(AbelTable { a, thresholds })
}

fn scan_threshold(row: &[BigInt], k: usize) -> Option<usize> {
    let n_max = row.len() - 1;
    if n_max < k {
        return None;
    }
    let top = if (n_max - k) % 2 == 0 { n_max } else { n_max.checked_sub(1)? };
    if top < k % 2 {
        return None;
    }
    let mut threshold = None;
    let mut n = top as i64;
    while n >= (k % 2) as i64 {
        if row[n as usize].is_positive() {
            threshold = Some(n as usize);
        } else {
            break;
        }
        n -= 2;
    }
    threshold
}

/// Least `N` such that `A_k^n > 0` for every `n` in `[N, n_max]` with the
/// parity of `k`.
pub fn positivity_threshold(k: usize, n_max: usize) -> Result<usize> {
    if n_max < 4 * k {
        return Err(Error::Parameter(format!(
            "n_max = {n_max} must be at least 4k = {}",
            4 * k
        )));
    }
    let table = abel_coefficients(k, n_max)?;
    table
        .threshold(k)
        .ok_or(Error::SearchRange { k, n_max })
}

/// Integer coefficients of `T_k` from the explicit sum
/// `T_k(x) = (k/2) sum_m (-1)^m (k-m-1)! / (m! (k-2m)!) (2x)^{k-2m}`.
fn chebyshev_explicit(k: usize) -> Vec<BigRational> {
    let mut c = vec![BigRational::zero(); k + 1];
    if k == 0 {
        c[0] = BigRational::one();
        return c;
    }
    for m in 0..=k / 2 {
        let mut v = ratio(
            factorial(k - m - 1) * BigInt::from(k) * (BigInt::one() << (k - 2 * m)),
            factorial(m) * factorial(k - 2 * m) * 2,
        );
        if m % 2 == 1 {
            v = -v;
        }
        c[k - 2 * m] = v;
    }
    c
}

/// `n!` times the `u^n` Taylor coefficient of `T_k(u) (1 - u^2)^{-1/2}`.
pub fn abel_coefficients_oracle(k: usize, n: usize) -> Result<BigRational> {
    if k > MAX_CHEB_DEGREE || n > MAX_ORACLE_ORDER {
        return Err(Error::Parameter(format!(
            "oracle needs k <= {MAX_CHEB_DEGREE} and n <= {MAX_ORACLE_ORDER}"
        )));
    }
    let t = chebyshev_explicit(k);
    // series[2m] = (2m-1)!!/(2m)!!
    let mut series = vec![BigRational::zero(); n + 1];
    series[0] = BigRational::one();
    for m in 1..=n / 2 {
        series[2 * m] =
            &series[2 * m - 2] * ratio(BigInt::from(2 * m - 1), BigInt::from(2 * m));
    }
    let coeff: BigRational = (0..=n.min(k))
        .map(|l| &t[l] * &series[n - l])
        .sum();
    Ok(coeff * BigRational::from_integer(factorial(n)))
}

/// Samples of a radial function on increasing radii, zero outside
/// `[support.0, support.1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    radii: Vec<f64>,
    values: Vec<Complex64>,
    support: (f64, f64),
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, values: Vec<Complex64>, support: (f64, f64)) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::Dimension(
                "radial profile needs at least two samples, one value per radius".into(),
            ));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("radii must increase strictly".into()));
        }
        let (lo, hi) = support;
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::Parameter(format!("bad support [{lo}, {hi}]")));
        }
        let mut values = values;
        for (r, v) in radii.iter().zip(values.iter_mut()) {
            if *r < lo || *r > hi {
                *v = Complex64::default();
            }
        }
        Ok(RadialProfile {
            radii,
            values,
            support,
        })
    }

    /// Samples a real function on `count` equispaced radii over the support.
    pub fn from_fn<F: Fn(f64) -> f64>(support: (f64, f64), count: usize, g: F) -> Result<Self> {
        if count < 2 {
            return Err(Error::Parameter("need at least two samples".into()));
        }
        let (lo, hi) = support;
        let radii: Vec<f64> = (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect();
        let values = radii.iter().map(|r| Complex64::new(g(*r), 0.0)).collect();
        RadialProfile::new(radii, values, support)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Linear interpolation, clamped at the first/last sample inside the
    /// support and zero outside it.
    pub fn eval(&self, r: f64) -> Complex64 {
        if r < self.support.0 || r > self.support.1 {
            return Complex64::default();
        }
        let n = self.radii.len();
        if r <= self.radii[0] {
            return self.values[0];
        }
        if r >= self.radii[n - 1] {
            return self.values[n - 1];
        }
        let i = self.radii.partition_point(|x| *x <= r) - 1;
        let (r0, r1) = (self.radii[i], self.radii[i + 1]);
        let w = (r - r0) / (r1 - r0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

const ABEL_PANELS: usize = 64;
const ABEL_ORDER: usize = 8;

/// `A_k g` at the offsets `z`, via `y = sqrt(z^2 + w^2)`:
/// `2 int T_k(z/y) g(y) dw` over the part of the support of `g` above `z`.
pub fn abel_apply(k: usize, g: &RadialProfile, z: &[f64]) -> Result<RadialProfile> {
    let cheb = chebyshev_coeffs(k)?;
    if z.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Parameter("offsets must be nonnegative".into()));
    }
    let rule = gauss_legendre(ABEL_ORDER);
    let (lo, hi) = g.support();
    let values: Vec<Complex64> = z
        .par_iter()
        .map(|&z| {
            if z >= hi {
                return Complex64::default();
            }
            let w0 = (lo * lo - z * z).max(0.0).sqrt();
            let w1 = (hi * hi - z * z).sqrt();
            let part = |f: &dyn Fn(f64) -> f64| composite_gauss(f, w0, w1, ABEL_PANELS, &rule);
            let kernel = |w: f64| {
                let y = (z * z + w * w).sqrt();
                (cheb.eval(k, z / y), g.eval(y))
            };
            let re = part(&|w| {
                let (t, v) = kernel(w);
                t * v.re
            });
            let im = part(&|w| {
                let (t, v) = kernel(w);
                t * v.im
            });
            Complex64::new(2.0 * re, 2.0 * im)
        })
        .collect();
    let support_hi = z.iter().copied().fold(hi, f64::max).max(lo + f64::EPSILON);
    RadialProfile::new(z.to_vec(), values, (0.0, support_hi.max(hi)))
}

/// Ring sample count at radius `r` for grid spacing `h`.
pub fn ring_samples(r: f64, h: f64) -> usize {
    8 * ((PI * r / h).ceil() as usize).max(1)
}

/// Angular Fourier coefficients `a_k(r)`, `|k| <= k_max`, of a 2D field on
/// rings `r = (m + 1/2) h / 2` up to 1. Ring samples are bilinear
/// interpolants; modes above a quarter of a ring's sample count alias.
pub fn angular_decompose(f: &GridField, k_max: usize) -> Result<Vec<(i64, RadialProfile)>> {
    if f.dim() != 2 {
        return Err(Error::Dimension("angular decomposition needs a 2D field".into()));
    }
    let dr = 0.5 * f.h();
    let radii: Vec<f64> = (0..)
        .map(|m| (m as f64 + 0.5) * dr)
        .take_while(|r| *r <= 1.0)
        .collect();
    let per_ring: Vec<Vec<Complex64>> = radii
        .par_iter()
        .map(|&r| {
            let count = ring_samples(r, f.h());
            let samples: Vec<f64> = (0..count)
                .map(|i| {
                    let phi = 2.0 * PI * i as f64 / count as f64;
                    f.interpolate(&[r * phi.cos(), r * phi.sin()])
                })
                .collect();
            (-(k_max as i64)..=k_max as i64)
                .map(|k| {
                    let mut acc = Complex64::default();
                    for (i, v) in samples.iter().enumerate() {
                        let phi = 2.0 * PI * i as f64 / count as f64;
                        acc += Complex64::from_polar(*v, -(k as f64) * phi);
                    }
                    acc / count as f64
                })
                .collect()
        })
        .collect();
    (0..2 * k_max + 1)
        .map(|idx| {
            let values = per_ring.iter().map(|ring| ring[idx]).collect();
            let k = idx as i64 - k_max as i64;
            RadialProfile::new(radii.clone(), values, (0.0, 1.0)).map(|p| (k, p))
        })
        .collect()
}

/// `theta`-Fourier mode `k` of a sinogram over nonnegative offsets, in the
/// polar angle `psi = theta + pi/2` of the closest point `s perp(theta)`.
pub fn sinogram_mode(g: &Sinogram, k: i64) -> Result<RadialProfile> {
    let geom = g.geometry();
    let (nt, ns) = (geom.n_theta(), geom.n_s());
    let first = (0..ns).find(|i| geom.offset(*i) >= 0.0).unwrap_or(ns);
    let radii: Vec<f64> = (first..ns).map(|i| geom.offset(i)).collect();
    let values = (first..ns)
        .into_par_iter()
        .map(|i| {
            let mut acc = Complex64::default();
            for j in 0..nt {
                let psi = geom.theta(j) + 0.5 * PI;
                acc += Complex64::from_polar(g.get(j, i), -(k as f64) * psi);
            }
            acc / nt as f64
        })
        .collect();
    let hi = radii.last().copied().unwrap_or(1.0);
    RadialProfile::new(radii, values, (0.0, hi))
}
