//! Riesz potentials `I_alpha f = f * |x|^-alpha`, the fractional Laplacian as
//! a Fourier multiplier, the inversion formula for the normal operator and
//! exact pointwise derivatives of `I_alpha f` away from the support of `f`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, signed_freq};
use crate::grid::{cell_center, GridField};
use crate::quad::adaptive_simpson;
use crate::sum::ExactSum;
use crate::symkernel::{exponents_of_degree, CompiledKernelDerivative, KernelAlgebra, MultiIndex};

/// Order `alpha` of a Riesz potential in dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszOrder {
    alpha: f64,
    d: usize,
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0
}

impl RieszOrder {
    /// Requires `alpha < d` and either `alpha = d - 1` or `alpha` non-integer.
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::Parameter(format!("d must be 2 or 3, got {d}")));
        }
        if !alpha.is_finite() {
            return Err(Error::Parameter("alpha must be finite".into()));
        }
        if alpha >= d as f64 {
            return Err(Error::DivergentKernel { alpha, d });
        }
        if is_integer(alpha) && alpha != (d - 1) as f64 {
            return Err(Error::Parameter(format!(
                "integer alpha must equal d - 1 = {}, got {alpha}",
                d - 1
            )));
        }
        Ok(RieszOrder { alpha, d })
    }

    /// The normal-operator order `alpha = d - 1`.
    pub fn normal(d: usize) -> Result<Self> {
        RieszOrder::new((d - 1) as f64, d)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `s = (d - alpha) / 2`, so that `I_alpha` is a multiple of `(-Delta)^-s`.
    pub fn s(&self) -> f64 {
        0.5 * (self.d as f64 - self.alpha)
    }

    /// The stronger condition needed by the kernel algebra: `alpha > d - 2`
    /// or `alpha` non-integer.
    pub fn check_symkernel(&self) -> Result<()> {
        if is_integer(self.alpha) && self.alpha <= (self.d - 2) as f64 {
            return Err(Error::Parameter(format!(
                "kernel expansions need alpha > d - 2 or non-integer alpha, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Frequency-domain image of a field on a zero-padded grid.
#[derive(Clone, Debug)]
pub struct SpectralField {
    dim: usize,
    n: usize,
    padded: usize,
    data: Vec<Complex64>,
}

impl SpectralField {
    /// Transforms `f` zero-padded to `factor * n` cells per axis, with the
    /// original grid in the middle of the padded box.
    pub fn from_field(f: &GridField, factor: usize) -> Self {
        let padded = factor * f.n();
        let data = embed(f, padded, |_| 0.0);
        SpectralField::from_embedded(f.dim(), f.n(), padded, data)
    }

    fn from_embedded(dim: usize, n: usize, padded: usize, mut data: Vec<Complex64>) -> Self {
        fft_nd(&mut data, padded, dim, false);
        SpectralField {
            dim,
            n,
            padded,
            data,
        }
    }

    pub fn padded_size(&self) -> usize {
        self.padded
    }

    /// Multiplies by `m(|xi|)` with `xi` the angular frequency of each bin.
    pub fn apply_radial_multiplier<M: Fn(f64) -> f64 + Sync>(&mut self, m: M) {
        let (p, dim) = (self.padded, self.dim);
        let h = 2.0 / self.n as f64;
        let base = 2.0 * PI / (p as f64 * h);
        self.data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let mut rest = idx;
            let mut xi2 = 0.0;
            for _ in 0..dim {
                let k = signed_freq(rest % p, p) * base;
                xi2 += k * k;
                rest /= p;
            }
            *v *= m(xi2.sqrt());
        });
    }

    /// Checks conjugate symmetry `F(-k) = conj F(k)` to the given tolerance.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let (p, dim) = (self.padded, self.dim);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.norm())).max(1e-300);
        (0..self.data.len()).all(|idx| {
            let mut rest = idx;
            let mut mirror = 0;
            let mut stride = 1;
            for _ in 0..dim {
                let k = rest % p;
                mirror += ((p - k) % p) * stride;
                stride *= p;
                rest /= p;
            }
            (self.data[idx] - self.data[mirror].conj()).norm() <= tol * scale
        })
    }

    /// Inverse transform, cropped back to the original grid.
    pub fn into_field(mut self) -> Result<GridField> {
        fft_nd(&mut self.data, self.padded, self.dim, true);
        crop(&self.data, self.dim, self.n, self.padded)
    }
}

/// Index of original cell `c` (possibly outside `0..n`) in a padded array.
fn padded_index(c: isize, padded: usize) -> usize {
    c.rem_euclid(padded as isize) as usize
}

/// Periodic embedding of `f` into a `padded^dim` array whose cell `c` has the
/// coordinate of original cell `c`; cells outside the grid take `outside(x)`.
fn embed<F: Fn(&[f64]) -> f64 + Sync>(f: &GridField, padded: usize, outside: F) -> Vec<Complex64> {
    let (n, dim) = (f.n(), f.dim());
    let lo = -(((padded - n) / 2) as isize);
    let total = padded.pow(dim as u32);
    let mut data = vec![Complex64::default(); total];
    let vals: Vec<(usize, f64)> = (0..total)
        .into_par_iter()
        .map(|lin| {
            let mut rest = lin;
            let mut x = [0.0; 3];
            let mut cell = [0isize; 3];
            let mut inside = true;
            let mut stride = 1usize;
            let mut target = 0usize;
            let mut src = 0usize;
            for a in 0..dim {
                let c = lo + (rest % padded) as isize;
                rest /= padded;
                cell[a] = c;
                x[a] = (c as f64 + 0.5 - n as f64 / 2.0) * (2.0 / n as f64);
                if c < 0 || c >= n as isize {
                    inside = false;
                } else {
                    src += c as usize * n.pow(a as u32);
                }
                target += padded_index(c, padded) * stride;
                stride *= padded;
            }
            let v = if inside { f.values()[src] } else { outside(&x[..dim]) };
            (target, v)
        })
        .collect();
    for (t, v) in vals {
        data[t] = Complex64::new(v, 0.0);
    }
    data
}

fn crop(data: &[Complex64], dim: usize, n: usize, padded: usize) -> Result<GridField> {
    let mut out = GridField::zeros(dim, n)?;
    for (idx, v) in out.values_mut().iter_mut().enumerate() {
        let mut rest = idx;
        let mut stride = 1;
        let mut target = 0;
        for _ in 0..dim {
            target += (rest % n) * stride;
            stride *= padded;
            rest /= n;
        }
        *v = data[target].re;
    }
    Ok(out)
}

/// `int over the cell [-h/2, h/2]^d of |x|^-alpha dx`, by splitting the cell
/// into pyramids over its faces and integrating the radial factor exactly.
pub fn center_cell_integral(alpha: f64, d: usize, h: f64) -> f64 {
    let a = 0.5 * h;
    let tol = 1e-12 * h.powi(d as i32) * a.powf(-alpha.max(0.0));
    match d {
        2 => {
            let g = |u: f64| (a * a + u * u).powf(-0.5 * alpha);
            8.0 * a / (2.0 - alpha) * adaptive_simpson(&g, 0.0, a, tol)
        }
        3 => {
            let inner = |u: f64| {
                let g = |v: f64| (a * a + u * u + v * v).powf(-0.5 * alpha);
                adaptive_simpson(&g, 0.0, a, tol)
            };
            24.0 * a / (3.0 - alpha) * adaptive_simpson(&inner, 0.0, a, tol)
        }
        _ => f64::NAN,
    }
}

/// `I_alpha f` by linear convolution on a grid padded to `2n` per axis.
///
/// The kernel weight of a nonzero offset `o` is `|o h|^-alpha h^d`; the zero
/// offset uses the exact integral of `|x|^-alpha` over the centre cell.
pub fn riesz_potential(f: &GridField, ord: &RieszOrder) -> Result<GridField> {
    if f.dim() != ord.d {
        return Err(Error::Dimension(format!(
            "field is {}D but the order is for d = {}",
            f.dim(),
            ord.d
        )));
    }
    let (n, dim) = (f.n(), f.dim());
    let h = f.h();
    let padded = 2 * n;
    let vol = f.cell_volume();
    let total = padded.pow(dim as u32);
    let center = center_cell_integral(ord.alpha, dim, h);
    let mut kernel: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|lin| {
            let mut rest = lin;
            let mut r2 = 0.0;
            for _ in 0..dim {
                let o = signed_freq(rest % padded, padded) * h;
                r2 += o * o;
                rest /= padded;
            }
            let v = if lin == 0 {
                center
            } else {
                r2.powf(-0.5 * ord.alpha) * vol
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    fft_nd(&mut kernel, padded, dim, false);

    let mut data = vec![Complex64::default(); total];
    for (idx, v) in f.values().iter().enumerate() {
        let mut rest = idx;
        let mut stride = 1;
        let mut target = 0;
        for _ in 0..dim {
            target += (rest % n) * stride;
            stride *= padded;
            rest /= n;
        }
        data[target] = Complex64::new(*v, 0.0);
    }
    fft_nd(&mut data, padded, dim, false);
    data.par_iter_mut().zip(&kernel).for_each(|(a, k)| *a *= k);
    fft_nd(&mut data, padded, dim, true);
    crop(&data, dim, n, padded)
}

const MULTIPLIER_PADDING: usize = 4;
const BOUNDARY_RING: usize = 2;

/// `(-Delta)^s f` as the multiplier `|xi|^{2s}` on a grid zero-padded to `4n`.
pub fn fractional_laplacian(f: &GridField, s: f64) -> Result<GridField> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Parameter(format!("s must lie in (0, 1], got {s}")));
    }
    let ring = f.boundary_ring_max(BOUNDARY_RING);
    if ring >= 1e-6 * f.max_abs() && f.max_abs() > 0.0 {
        log::warn!(
            "fractional Laplacian input does not decay at the grid boundary \
             (boundary max {ring:e}, global max {:e}); zero padding truncates it",
            f.max_abs()
        );
    }
    spectral_power(f, s)
}

/// `|xi|^{2s}` applied to the zero-padded field, for any `s > 0`.
fn spectral_power(f: &GridField, s: f64) -> Result<GridField> {
    let mut spec = SpectralField::from_field(f, MULTIPLIER_PADDING);
    spec.apply_radial_multiplier(|xi| if xi == 0.0 { 0.0 } else { xi.powf(2.0 * s) });
    spec.into_field()
}

/// `(2 pi |S^{d-2}|)^-1`: `1/(4 pi)` for `d = 2`, `1/(4 pi^2)` for `d = 3`.
pub fn inversion_constant(d: usize) -> f64 {
    let sphere = match d {
        2 => 2.0,
        3 => 2.0 * PI,
        _ => f64::NAN,
    };
    1.0 / (2.0 * PI * sphere)
}

/// Highest total order of the far-field basis used to continue slowly
/// decaying inputs past the grid.
const FAR_FIELD_ORDER: u32 = 8;
/// The far field is fitted on cells with `max |x_a| >= FAR_FIELD_BAND`.
const FAR_FIELD_BAND: f64 = 0.75;

/// Exponents `(gamma, b)` of `x^gamma / |x|^{2|gamma| + 2b + p}` with
/// `lowest <= |gamma| + 2b <= FAR_FIELD_ORDER`.
fn multipole_basis(dim: usize, lowest: u32) -> Vec<(Vec<u32>, u32)> {
    let mut basis = Vec::new();
    for l in lowest..=FAR_FIELD_ORDER {
        for b in 0..=l / 2 {
            for gamma in exponents_of_degree(dim, l - 2 * b) {
                basis.push((gamma, b));
            }
        }
    }
    basis
}

fn eval_multipoles(basis: &[(Vec<u32>, u32)], p: f64, x: &[f64], out: &mut [f64]) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (k, (gamma, b)) in basis.iter().enumerate() {
        let deg: u32 = gamma.iter().sum();
        let mut v = r.powf(-(2.0 * (deg + b) as f64 + p));
        for (xi, e) in x.iter().zip(gamma) {
            v *= xi.powi(*e as i32);
        }
        out[k] = v;
    }
}

/// Least-squares coefficients of `g` on the outer band against `ncols`
/// functions evaluated by `columns`.
fn fit_band<F: Fn(&[f64], &mut [f64])>(g: &GridField, ncols: usize, columns: F) -> Result<Vec<f64>> {
    let dim = g.dim();
    let rows: Vec<usize> = (0..g.len())
        .filter(|idx| {
            let x = g.center(*idx);
            x[..dim].iter().fold(0.0_f64, |m, v| m.max(v.abs())) >= FAR_FIELD_BAND
        })
        .collect();
    let mut a = DMatrix::<f64>::zeros(rows.len(), ncols);
    let mut rhs = DVector::<f64>::zeros(rows.len());
    let mut buf = vec![0.0; ncols];
    for (r, idx) in rows.iter().enumerate() {
        let x = g.center(*idx);
        columns(&x[..dim], &mut buf);
        for (c, v) in buf.iter().enumerate() {
            a[(r, c)] = *v;
        }
        rhs[r] = g.values()[*idx];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let coef = svd
        .solve(&rhs, 1e-12 * smax)
        .map_err(|e| Error::Numerical(format!("far-field fit failed: {e}")))?;
    Ok(coef.iter().copied().collect())
}

/// Least-squares fit of `g` on the outer band `max |x_a| >= 0.75` by the far
/// field of a compactly supported source under the kernel `|x|^-p`:
/// `x^gamma / |x|^{2|gamma| + 2b + p}` for `|gamma| + 2b <= 8`.
/// Returns the fitted function.
pub fn fit_far_field(g: &GridField, p: f64) -> Result<impl Fn(&[f64]) -> f64 + Sync> {
    let basis = multipole_basis(g.dim(), 0);
    let coef = fit_band(g, basis.len(), |x, out| eval_multipoles(&basis, p, x, out))?;
    Ok(move |x: &[f64]| {
        let mut buf = vec![0.0; basis.len()];
        eval_multipoles(&basis, p, x, &mut buf);
        buf.iter().zip(&coef).map(|(b, c)| b * c).sum()
    })
}

/// Width of the smoothed monopole split off by [`invert_normal`].
const POLE_WIDTH: f64 = 0.5;

/// `psi = (|x|^2 + a^2)^{-(d-1)/2}` and its gradient. Both carry the slowest
/// decaying part of `N f` and have closed-form half Laplacians:
/// `(-Delta)^{1/2} psi = (d-1) a (|x|^2 + a^2)^{-(d+1)/2}`.
struct SmoothedPoles {
    dim: usize,
    a: f64,
}

impl SmoothedPoles {
    fn count(&self) -> usize {
        self.dim + 1
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let m = (self.dim - 1) as f64;
        let q = x.iter().map(|v| v * v).sum::<f64>() + self.a * self.a;
        out[0] = q.powf(-0.5 * m);
        let g = -m * q.powf(-0.5 * m - 1.0);
        for (o, xi) in out[1..].iter_mut().zip(x) {
            *o = g * xi;
        }
    }

    fn eval_half_laplacian(&self, x: &[f64], out: &mut [f64]) {
        let m = (self.dim - 1) as f64;
        let q = x.iter().map(|v| v * v).sum::<f64>() + self.a * self.a;
        let e = 0.5 * (self.dim + 1) as f64;
        out[0] = m * self.a * q.powf(-e);
        let g = -m * self.a * 2.0 * e * q.powf(-e - 1.0);
        for (o, xi) in out[1..].iter_mut().zip(x) {
            *o = g * xi;
        }
    }
}

/// Raised-cosine low-pass on `|xi|`, in units of the per-axis Nyquist
/// frequency `pi / h`: one below `pass`, zero above `stop`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Apodization {
    pub pass: f64,
    pub stop: f64,
}

impl Apodization {
    pub fn new(pass: f64, stop: f64) -> Result<Self> {
        if !(pass > 0.0 && pass < stop) {
            return Err(Error::Parameter(format!(
                "apodization needs 0 < pass < stop, got {pass}, {stop}"
            )));
        }
        Ok(Apodization { pass, stop })
    }

    /// Weight at `rho = |xi| h / pi`.
    pub fn weight(&self, rho: f64) -> f64 {
        if rho <= self.pass {
            1.0
        } else if rho >= self.stop {
            0.0
        } else {
            let t = (rho - self.pass) / (self.stop - self.pass);
            (0.5 * PI * t).cos().powi(2)
        }
    }
}

/// Window used by [`invert_normal`].
pub const DEFAULT_APODIZATION: Apodization = Apodization {
    pass: 0.25,
    stop: 0.5,
};

/// `|xi|^{2s}` applied to `g` continued outside the grid by `far`,
/// optionally apodized.
fn windowed_power<F: Fn(&[f64]) -> f64 + Sync>(
    g: &GridField,
    far: F,
    s: f64,
    window: Option<Apodization>,
) -> Result<GridField> {
    let padded = MULTIPLIER_PADDING * g.n();
    let data = embed(g, padded, far);
    let mut spec = SpectralField::from_embedded(g.dim(), g.n(), padded, data);
    let nyquist = PI / g.h();
    spec.apply_radial_multiplier(|xi| {
        if xi == 0.0 {
            return 0.0;
        }
        let w = window.map_or(1.0, |a| a.weight(xi / nyquist));
        w * xi.powf(2.0 * s)
    });
    spec.into_field()
}

/// `|xi|^{2s}` applied after continuing `g` outside the grid by its fitted
/// far field with decay `|x|^-p`.
fn continued_spectral_power(g: &GridField, s: f64, p: f64) -> Result<GridField> {
    let far = fit_far_field(g, p)?;
    windowed_power(g, far, s, None)
}

/// Recovers `f` from `N f = X* X f` by `f = c_d (-Delta)^{1/2} N f`, with the
/// ramp apodized by [`DEFAULT_APODIZATION`].
///
/// `N f` decays only like `|x|^{1-d}`. Its monopole and dipole parts are
/// fitted on the outer band of the grid by smoothed poles whose half
/// Laplacians are known exactly; the remainder is continued past the grid by
/// higher multipoles before the multiplier. The input must come from a source
/// supported well inside the domain.
/// The discrete normal operator carries errors near the grid Nyquist
/// frequency that the bare `|xi|` multiplier would amplify in proportion to
/// `n`; the window suppresses them.
pub fn invert_normal(nf: &GridField) -> Result<GridField> {
    invert_normal_with(nf, Some(DEFAULT_APODIZATION))
}

/// [`invert_normal`] with an explicit window (`None`: the bare multiplier).
pub fn invert_normal_with(nf: &GridField, window: Option<Apodization>) -> Result<GridField> {
    let d = nf.dim();
    if nf.max_abs() == 0.0 {
        return GridField::zeros(d, nf.n());
    }
    let p = (d - 1) as f64;
    let poles = SmoothedPoles { dim: d, a: POLE_WIDTH };
    let np = poles.count();
    let basis = multipole_basis(d, 2);
    let coef = fit_band(nf, np + basis.len(), |x, out| {
        poles.eval(x, &mut out[..np]);
        eval_multipoles(&basis, p, x, &mut out[np..]);
    })?;
    let (pole_coef, multi_coef) = coef.split_at(np);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();

    let mut rest = nf.clone();
    let mut buf = vec![0.0; np];
    for idx in 0..rest.len() {
        let x = nf.center(idx);
        poles.eval(&x[..d], &mut buf);
        rest.values_mut()[idx] -= dot(pole_coef, &buf);
    }
    let far = |x: &[f64]| {
        let mut b = vec![0.0; basis.len()];
        eval_multipoles(&basis, p, x, &mut b);
        dot(multi_coef, &b)
    };
    let mut half = windowed_power(&rest, far, 0.5, window)?;
    for idx in 0..half.len() {
        let x = nf.center(idx);
        poles.eval_half_laplacian(&x[..d], &mut buf);
        half.values_mut()[idx] += dot(pole_coef, &buf);
    }
    if half.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("inversion overflowed".into()));
    }
    Ok(half.scaled(inversion_constant(d)))
}

/// Fits `c` in `(-Delta)^{(d-alpha)/2} I_alpha f ~= c f` on cells with
/// `|x| <= radius`. Returns `(c, relative residual of the fit)`.
///
/// The fractional power is applied as `(-Delta)^k` followed by
/// `(-Delta)^{s'}`, `s' in (0, 1]`, both as multipliers on the continued field.
pub fn fit_riesz_constant(f: &GridField, ord: &RieszOrder, radius: f64) -> Result<(f64, f64)> {
    let potential = riesz_potential(f, ord)?;
    let total = ord.s();
    let k = (total.ceil() - 1.0).max(0.0);
    let frac = total - k;
    let mut g = continued_spectral_power(&potential, frac, ord.alpha)?;
    for _ in 0..k as usize {
        g = spectral_power(&g, 1.0)?;
    }
    let dim = f.dim();
    let keep = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() <= radius * radius;
    let (mut gf, mut ff) = (0.0, 0.0);
    for idx in 0..f.len() {
        let x = f.center(idx);
        if keep(&x[..dim]) {
            gf += g.values()[idx] * f.values()[idx];
            ff += f.values()[idx] * f.values()[idx];
        }
    }
    if ff == 0.0 {
        return Err(Error::Parameter("phantom vanishes in the fit region".into()));
    }
    let c = gf / ff;
    let fitted = f.scaled(c);
    let resid = g.relative_l2_error_where(&fitted, keep)?;
    Ok((c, resid))
}

/// Maximum derivative order accepted by [`potential_derivatives`].
pub const MAX_PROBE_ORDER: u32 = 12;

/// `d^beta (I_alpha f)(x0)` for every `|beta| <= max_order`, computed as
/// `sum_y f(y) (d^beta K_alpha)(x0 - y) h^d` with exact kernel derivatives.
///
/// `f` must vanish within two cells of `x0`. Sums are exactly rounded, so
/// contributions that cancel by symmetry cancel exactly.
pub fn potential_derivatives(
    f: &GridField,
    ord: &RieszOrder,
    x0: &[f64],
    max_order: u32,
) -> Result<Vec<(MultiIndex, f64)>> {
    let dim = f.dim();
    if dim != ord.d || x0.len() != dim {
        return Err(Error::Dimension(format!(
            "field {}D, order d = {}, point with {} coordinates",
            dim,
            ord.d,
            x0.len()
        )));
    }
    if max_order > MAX_PROBE_ORDER {
        return Err(Error::Parameter(format!(
            "max_order {max_order} exceeds {MAX_PROBE_ORDER}"
        )));
    }
    let clearance = 2.0 * f.h();
    let mut support = Vec::new();
    for (idx, v) in f.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let x = cell_center(dim, f.n(), idx);
        let d2: f64 = (0..dim).map(|a| (x[a] - x0[a]).powi(2)).sum();
        if d2 <= clearance * clearance {
            return Err(Error::Precondition(format!(
                "f is nonzero within {clearance} of x0; I_alpha f need not be smooth there"
            )));
        }
        let diff: Vec<f64> = (0..dim).map(|a| x0[a] - x[a]).collect();
        support.push((diff, *v));
    }
    let mut algebra = KernelAlgebra::new(dim)?;
    let mut betas = Vec::new();
    for order in 0..=max_order {
        betas.extend(exponents_of_degree(dim, order));
    }
    let compiled: Vec<CompiledKernelDerivative> = betas
        .iter()
        .map(|b| {
            algebra
                .kernel_derivative(b)
                .map(|e| CompiledKernelDerivative::new(&e, dim, ord.alpha))
        })
        .collect::<Result<_>>()?;
    let vol = f.cell_volume();
    let values: Vec<f64> = compiled
        .par_iter()
        .map(|kd| {
            let mut acc = ExactSum::new();
            for (diff, v) in &support {
                acc.add(v * kd.eval(diff));
            }
            acc.value() * vol
        })
        .collect();
    Ok(betas.into_iter().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{rasterize, PhantomSpec, Profile, RegionSpec};

    #[test]
    fn order_validation() {
        assert!(RieszOrder::new(1.0, 2).is_ok());
        assert!(RieszOrder::new(0.5, 2).is_ok());
        assert!(matches!(
            RieszOrder::new(2.0, 2),
            Err(Error::DivergentKernel { .. })
        ));
        assert!(matches!(RieszOrder::new(0.0, 2), Err(Error::Parameter(_))));
        assert!(RieszOrder::new(2.0, 3).is_ok());
        assert!(RieszOrder::new(1.0, 3).is_err());
        assert!(RieszOrder::new(-0.5, 3).unwrap().check_symkernel().is_ok());
    }

    #[test]
    fn center_cell_integral_limits() {
        // alpha = 0 gives the cell volume
        assert!((center_cell_integral(0.0, 2, 0.1) - 0.01).abs() < 1e-14);
        assert!((center_cell_integral(0.0, 3, 0.1) - 0.001).abs() < 1e-15);
        // alpha = 1 in 2D: 4 h asinh(1)
        let h = 0.05;
        let exact = 4.0 * h * 1.0_f64.asinh();
        assert!((center_cell_integral(1.0, 2, h) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn point_mass_reproduces_kernel() {
        let n = 64;
        let h = 2.0 / n as f64;
        let mut f = GridField::zeros(2, n).unwrap();
        let c = 20 * n + 24;
        f.values_mut()[c] = 1.0 / (h * h);
        for alpha in [1.0, 0.5, 1.5] {
            let ord = RieszOrder::new(alpha, 2).unwrap();
            let out = riesz_potential(&f, &ord).unwrap();
            let xc = f.center(c);
            for (idx, v) in out.values().iter().enumerate() {
                let x = out.center(idx);
                let r = ((x[0] - xc[0]).powi(2) + (x[1] - xc[1]).powi(2)).sqrt();
                if r >= 4.0 * h {
                    let k = r.powf(-alpha);
                    assert!((v - k).abs() < 0.01 * k);
                }
            }
        }
    }

    #[test]
    fn riesz_is_linear_and_translation_equivariant() {
        let n = 32;
        let ord = RieszOrder::new(0.7, 2).unwrap();
        let f = GridField::from_fn(2, n, |x| (-(x[0] * x[0] + x[1] * x[1]) * 30.0).exp()).unwrap();
        let g = GridField::from_fn(2, n, |x| x[0] * (-(x[0] * x[0] + x[1] * x[1]) * 20.0).exp())
            .unwrap();
        let lhs = riesz_potential(&f.lin_comb(2.0, &g, -3.0).unwrap(), &ord).unwrap();
        let rhs = riesz_potential(&f, &ord)
            .unwrap()
            .lin_comb(2.0, &riesz_potential(&g, &ord).unwrap(), -3.0)
            .unwrap();
        let scale = lhs.max_abs();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
        // shift a small bump by 3 cells in x
        let bump = |cx: f64| {
            GridField::from_fn(2, n, move |x| {
                let r2 = (x[0] - cx).powi(2) + x[1] * x[1];
                if r2 < 0.04 {
                    (1.0 - r2 / 0.04).powi(2)
                } else {
                    0.0
                }
            })
            .unwrap()
        };
        let h = 2.0 / n as f64;
        let a = riesz_potential(&bump(0.0), &ord).unwrap();
        let b = riesz_potential(&bump(3.0 * h), &ord).unwrap();
        for iy in 0..n {
            for ix in 0..n - 3 {
                let va = a.values()[iy * n + ix];
                let vb = b.values()[iy * n + ix + 3];
                assert!((va - vb).abs() < 1e-12 * a.max_abs());
            }
        }
    }

    #[test]
    fn fractional_laplacian_basics() {
        let zero = GridField::zeros(2, 16).unwrap();
        assert!(fractional_laplacian(&zero, 0.5)
            .unwrap()
            .values()
            .iter()
            .all(|v| *v == 0.0));
        assert!(fractional_laplacian(&zero, 0.0).is_err());
        assert!(fractional_laplacian(&zero, 1.5).is_err());
        let f = GridField::from_fn(2, 32, |x| (-(x[0] * x[0] + x[1] * x[1]) * 40.0).exp()).unwrap();
        let out = fractional_laplacian(&f, 0.3).unwrap();
        // zero multiplier at xi = 0: the padded output integrates to zero, and
        // the part visible on the grid carries almost all of it
        let spec = SpectralField::from_field(&out, 1);
        assert!(spec.is_conjugate_symmetric(1e-12));
    }

    #[test]
    fn laplacian_matches_five_point_stencil() {
        let n = 128;
        let sigma2 = 0.02;
        let f = GridField::from_fn(2, n, |x| (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma2)).exp())
            .unwrap();
        let lap = fractional_laplacian(&f, 1.0).unwrap();
        let h = f.h();
        let v = f.values();
        let mut num = 0.0;
        let mut den = 0.0;
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let c = iy * n + ix;
                let fd = -(v[c - 1] + v[c + 1] + v[c - n] + v[c + n] - 4.0 * v[c]) / (h * h);
                num += (lap.values()[c] - fd).powi(2);
                den += fd * fd;
            }
        }
        assert!((num / den).sqrt() < 0.01, "{}", (num / den).sqrt());
    }

    #[test]
    fn inversion_zero_and_linearity() {
        let z = GridField::zeros(2, 32).unwrap();
        assert!(invert_normal(&z).unwrap().values().iter().all(|v| *v == 0.0));
        let spec = PhantomSpec::single(
            RegionSpec::ball(&[0.1, 0.0], 0.3),
            Profile::RadialBump { amplitude: 1.0 },
        );
        let f = rasterize(&spec, 64, 2).unwrap();
        let nf = riesz_potential(&f, &RieszOrder::normal(2).unwrap()).unwrap().scaled(2.0);
        let a = invert_normal(&nf).unwrap();
        let b = invert_normal(&nf.scaled(3.0)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((3.0 * x - y).abs() < 1e-10 * a.max_abs());
        }
    }

    #[test]
    fn derivative_probe_rejects_support_at_point() {
        let f = GridField::from_fn(2, 32, |_| 1.0).unwrap();
        let ord = RieszOrder::new(1.0, 2).unwrap();
        assert!(matches!(
            potential_derivatives(&f, &ord, &[0.0, 0.0], 2),
            Err(Error::Precondition(_))
        ));
        assert!(potential_derivatives(&f, &ord, &[0.0, 0.0], 13).is_err());
    }

    #[test]
    fn derivative_probe_zeroth_order_and_symmetry() {
        let n = 64;
        let spec = PhantomSpec::single(
            RegionSpec::annulus(0.4, 0.8),
            Profile::RadialBump { amplitude: 1.0 },
        );
        let f = rasterize(&spec, n, 2).unwrap();
        let ord = RieszOrder::new(1.0, 2).unwrap();
        let probes = potential_derivatives(&f, &ord, &[0.0, 0.0], 4).unwrap();
        // x0 = 0 is a grid node; compare the zeroth derivative with the
        // average of the four neighbouring cell values of I_alpha f
        let pot = riesz_potential(&f, &ord).unwrap();
        let c = n / 2;
        let avg = 0.25
            * (pot.values()[c * n + c]
                + pot.values()[c * n + c - 1]
                + pot.values()[(c - 1) * n + c]
                + pot.values()[(c - 1) * n + c - 1]);
        assert!((probes[0].1 - avg).abs() < 0.01 * avg);
        for (beta, v) in &probes {
            if beta.iter().any(|b| b % 2 == 1) {
                assert!(v.abs() <= 1e-10, "{beta:?}: {v}");
            }
        }
        // an odd field at the origin kills the even orders
        let odd = GridField::from_fn(2, n, |x| x[0] * spec.eval(x)).unwrap();
        let probes = potential_derivatives(&odd, &ord, &[0.0, 0.0], 4).unwrap();
        for (beta, v) in &probes {
            if beta.iter().sum::<u32>() % 2 == 0 {
                assert!(v.abs() <= 1e-10, "{beta:?}: {v}");
            }
        }
    }
}
