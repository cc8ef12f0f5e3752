//! Least-squares reconstruction from masked sinograms with support and
//! known-zero constraints, plus uniqueness and conditioning diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{cell_center, convex_hull_of_arc, GridField, RegionSpec};
use crate::io::KeyValues;
use crate::xray::{forward_row, xray_forward, LineMask, Sinogram, SinogramGeometry};

/// Row-compressed sparse matrix.
#[derive(Clone, Debug)]
struct Csr {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
    cols: usize,
}

impl Csr {
    fn rows(&self) -> usize {
        self.ptr.len() - 1
    }

    fn from_rows(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Self {
        let mut ptr = Vec::with_capacity(rows.len() + 1);
        ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut idx = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                idx.push(c);
                val.push(v);
            }
            ptr.push(idx.len());
        }
        Csr { ptr, idx, val, cols }
    }

    fn transpose(&self) -> Csr {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows() {
            for k in self.ptr[r]..self.ptr[r + 1] {
                rows[self.idx[k]].push((r, self.val[k]));
            }
        }
        Csr::from_rows(rows, self.rows())
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let mut acc = 0.0;
            for k in self.ptr[r]..self.ptr[r + 1] {
                acc += self.val[k] * x[self.idx[k]];
            }
            *o = acc;
        });
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols);
        for r in 0..self.rows() {
            for k in self.ptr[r]..self.ptr[r + 1] {
                m[(r, self.idx[k])] += self.val[k];
            }
        }
        m
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A masked, support-restricted X-ray inversion problem.
///
/// Unknowns are the cells of `support`; cells of `known_zero` (required to
/// be disjoint from `support`) and all other cells are fixed to zero. Only
/// bins of `mask` enter the data misfit.
#[derive(Clone, Debug)]
pub struct MaskedProblem {
    n: usize,
    data: Sinogram,
    mask: LineMask,
    support: Vec<bool>,
    known_zero: Vec<bool>,
    truth: Option<GridField>,
    unknowns: Vec<usize>,
    bins: Vec<usize>,
    a: Csr,
    at: Csr,
}

impl MaskedProblem {
    pub fn new(
        n: usize,
        data: Sinogram,
        mask: LineMask,
        support: Vec<bool>,
        known_zero: Vec<bool>,
    ) -> Result<Self> {
        if data.geometry() != mask.geometry() {
            return Err(Error::Dimension("data and mask geometries differ".into()));
        }
        if support.len() != n * n || known_zero.len() != n * n {
            return Err(Error::Dimension(format!(
                "cell masks must have {} entries",
                n * n
            )));
        }
        if support.iter().zip(&known_zero).any(|(s, z)| *s && *z) {
            return Err(Error::Parameter(
                "known-zero region intersects the support constraint".into(),
            ));
        }
        if mask.count() == 0 {
            return Err(Error::Precondition("line mask is empty".into()));
        }
        let geom = data.geometry().clone();
        let unknowns: Vec<usize> = (0..n * n).filter(|c| support[*c]).collect();
        let mut column = vec![usize::MAX; n * n];
        for (k, c) in unknowns.iter().enumerate() {
            column[*c] = k;
        }
        let bins: Vec<usize> = (0..geom.len()).filter(|b| mask.bits()[*b]).collect();
        let rows: Vec<Vec<(usize, f64)>> = bins
            .par_iter()
            .map(|b| {
                let (j, i) = (b / geom.n_s(), b % geom.n_s());
                forward_row(&geom, n, j, i)
                    .into_iter()
                    .filter(|(c, _)| column[*c] != usize::MAX)
                    .map(|(c, w)| (column[c], w))
                    .collect()
            })
            .collect();
        let a = Csr::from_rows(rows, unknowns.len());
        let at = a.transpose();
        let data = data.masked(&mask)?;
        Ok(MaskedProblem {
            n,
            data,
            mask,
            support,
            known_zero,
            truth: None,
            unknowns,
            bins,
            a,
            at,
        })
    }

    /// Cell masks from regions; `support = None` frees every cell outside
    /// `known_zero`, and a support region has `known_zero` removed from it.
    pub fn from_regions(
        n: usize,
        data: Sinogram,
        mask: LineMask,
        support: Option<&RegionSpec>,
        known_zero: Option<&RegionSpec>,
    ) -> Result<Self> {
        let cells = |r: Option<&RegionSpec>, default: bool| -> Result<Vec<bool>> {
            match r {
                None => Ok(vec![default; n * n]),
                Some(r) => {
                    r.validate(2)?;
                    Ok((0..n * n)
                        .map(|c| r.contains(&cell_center(2, n, c)[..2]))
                        .collect())
                }
            }
        };
        let zero = cells(known_zero, false)?;
        let sup: Vec<bool> = cells(support, true)?
            .into_iter()
            .zip(&zero)
            .map(|(s, z)| s && !z)
            .collect();
        MaskedProblem::new(n, data, mask, sup, zero)
    }

    /// Attaches the ground truth used for error reporting.
    pub fn with_truth(mut self, truth: GridField) -> Result<Self> {
        if truth.dim() != 2 || truth.n() != self.n {
            return Err(Error::Dimension("truth must match the problem grid".into()));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Replaces the data by `data + sigma * rms(data) * N(0, 1)` on masked bins.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::Parameter("noise level must be nonnegative".into()));
        }
        let b = self.rhs();
        let rms = norm(&b) / (b.len().max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = self.data.values_mut();
        for bin in &self.bins {
            let z: f64 = StandardNormal.sample(&mut rng);
            vals[*bin] += sigma * rms * z;
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &Sinogram {
        &self.data
    }

    pub fn mask(&self) -> &LineMask {
        &self.mask
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn known_zero(&self) -> &[bool] {
        &self.known_zero
    }

    pub fn truth(&self) -> Option<&GridField> {
        self.truth.as_ref()
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    pub fn row_count(&self) -> usize {
        self.bins.len()
    }

    fn rhs(&self) -> Vec<f64> {
        self.bins.iter().map(|b| self.data.values()[*b]).collect()
    }

    fn scatter(&self, x: &[f64]) -> GridField {
        let mut vals = vec![0.0; self.n * self.n];
        for (k, c) in self.unknowns.iter().enumerate() {
            vals[*c] = x[k];
        }
        GridField::from_values(2, self.n, vals).expect("shape checked at construction")
    }

    fn gather(&self, f: &GridField) -> Vec<f64> {
        self.unknowns.iter().map(|c| f.values()[*c]).collect()
    }

    /// Forward operator of the problem applied to a field (masked sinogram).
    pub fn forward(&self, f: &GridField) -> Result<Sinogram> {
        xray_forward(f, self.data.geometry())?.masked(&self.mask)
    }
}

/// Iterative method used by [`solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Cgls,
    Landweber,
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cgls" => Ok(Solver::Cgls),
            "landweber" => Ok(Solver::Landweber),
            other => Err(Error::Parameter(format!("unknown solver {other}"))),
        }
    }
}

/// Solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconReport {
    pub solver: Solver,
    pub iterations: usize,
    pub converged: bool,
    /// `||A x - b|| / ||b||` (zero when `b = 0` and the fit is exact).
    pub relative_residual: f64,
    pub relative_error: Option<f64>,
    pub sigma_min_estimate: Option<f64>,
    pub sigma_max_estimate: Option<f64>,
    pub seed: Option<u64>,
    /// `||A x_k - b||` for `k = 0, 1, ...`.
    pub residual_history: Vec<f64>,
}

impl ReconReport {
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set(
            "solver",
            match self.solver {
                Solver::Cgls => "cgls",
                Solver::Landweber => "landweber",
            },
        );
        kv.set("iterations", self.iterations);
        kv.set("converged", self.converged);
        kv.set("relative_residual", format!("{:e}", self.relative_residual));
        if let Some(e) = self.relative_error {
            kv.set("relative_error", format!("{e:e}"));
        }
        if let Some(s) = self.sigma_min_estimate {
            kv.set("sigma_min_estimate", format!("{s:e}"));
        }
        if let Some(s) = self.sigma_max_estimate {
            kv.set("sigma_max_estimate", format!("{s:e}"));
        }
        if let Some(s) = self.seed {
            kv.set("seed", s);
        }
        kv
    }
}

const MONOTONE_SLACK: f64 = 1e-10;

fn finish(
    p: &MaskedProblem,
    x: &[f64],
    mut report: ReconReport,
) -> Result<(GridField, ReconReport)> {
    let f = p.scatter(x);
    if let Some(t) = &p.truth {
        report.relative_error = Some(f.relative_l2_error(t)?);
    }
    Ok((f, report))
}

/// CGLS from the zero field.
pub fn cgls_solve(p: &MaskedProblem, max_iter: usize, tol: f64) -> Result<(GridField, ReconReport)> {
    let zero = GridField::zeros(2, p.n)?;
    cgls_solve_from(p, &zero, max_iter, tol)
}

/// CGLS on `min ||A x - b||` started at `x0` (restricted to the unknowns).
///
/// Stops when `||A x - b|| <= tol ||b||` or `||A^T (A x - b)|| <= tol ||A^T b||`.
/// The data residual of CGLS is nonincreasing; an increase beyond a relative
/// slack of `1e-10` is reported as a numerical failure.
pub fn cgls_solve_from(
    p: &MaskedProblem,
    x0: &GridField,
    max_iter: usize,
    tol: f64,
) -> Result<(GridField, ReconReport)> {
    if !(tol > 0.0) {
        return Err(Error::Parameter("tol must be positive".into()));
    }
    if x0.dim() != 2 || x0.n() != p.n {
        return Err(Error::Dimension("initial field must match the problem grid".into()));
    }
    let b = p.rhs();
    let (m, k) = (p.a.rows(), p.a.cols);
    let mut x = p.gather(x0);
    let mut q = vec![0.0; m];
    p.a.apply(&x, &mut q);
    let mut r: Vec<f64> = b.iter().zip(&q).map(|(b, q)| b - q).collect();
    let mut s = vec![0.0; k];
    p.at.apply(&r, &mut s);
    let mut atb = vec![0.0; k];
    p.at.apply(&b, &mut atb);
    let bnorm = norm(&b);
    let atb_norm = norm(&atb);
    let mut gamma = dot(&s, &s);
    let mut dir = s.clone();
    let mut history = vec![norm(&r)];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let done = |rn: f64, sn: f64| rn <= tol * bnorm || sn <= tol * atb_norm || sn == 0.0;
    let mut converged = done(history[0], gamma.sqrt());
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        p.a.apply(&dir, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.par_iter_mut().zip(&dir).for_each(|(x, d)| *x += alpha * d);
        r.par_iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
        p.at.apply(&r, &mut s);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        dir.par_iter_mut().zip(&s).for_each(|(d, s)| *d = s + beta * *d);
        gamma = gamma_new;
        alphas.push(alpha);
        betas.push(beta);
        iterations += 1;
        let rn = norm(&r);
        let prev = *history.last().unwrap();
        if !rn.is_finite() || rn > prev * (1.0 + MONOTONE_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::Numerical(format!(
                "CGLS residual increased from {prev:e} to {rn:e} at iteration {iterations}"
            )));
        }
        history.push(rn);
        converged = done(rn, gamma.sqrt());
    }
    let (smin, smax) = ritz_extremes(&alphas, &betas);
    let rn = *history.last().unwrap();
    let report = ReconReport {
        solver: Solver::Cgls,
        iterations,
        converged,
        relative_residual: if bnorm > 0.0 { rn / bnorm } else { rn },
        relative_error: None,
        sigma_min_estimate: smin,
        sigma_max_estimate: smax,
        seed: None,
        residual_history: history,
    };
    finish(p, &x, report)
}

/// Extreme singular-value estimates of `A` from the Lanczos tridiagonal
/// matrix implied by the CG coefficients on `A^T A`.
fn ritz_extremes(alphas: &[f64], betas: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = alphas.len();
    if k == 0 {
        return (None, None);
    }
    let diag: Vec<f64> = (0..k)
        .map(|i| 1.0 / alphas[i] + if i > 0 { betas[i - 1] / alphas[i - 1] } else { 0.0 })
        .collect();
    let off2: Vec<f64> = (0..k - 1).map(|i| betas[i] / (alphas[i] * alphas[i])).collect();
    let (lo, hi) = tridiagonal_extremes(&diag, &off2);
    (Some(lo.max(0.0).sqrt()), Some(hi.max(0.0).sqrt()))
}

/// Smallest and largest eigenvalues of the symmetric tridiagonal matrix with
/// diagonal `diag` and squared off-diagonal `off2`, by Sturm-count bisection.
fn tridiagonal_extremes(diag: &[f64], off2: &[f64]) -> (f64, f64) {
    let k = diag.len();
    // number of eigenvalues below x
    let count_below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let prev = if i > 0 { off2[i - 1] / d } else { 0.0 };
            d = diag[i] - x - prev;
            if d == 0.0 {
                d = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut gl, mut gu) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let r = if i > 0 { off2[i - 1].sqrt() } else { 0.0 }
            + if i + 1 < k { off2[i].sqrt() } else { 0.0 };
        gl = gl.min(diag[i] - r);
        gu = gu.max(diag[i] + r);
    }
    let find = |target: usize| {
        let (mut a, mut b) = (gl, gu);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (find(1), find(k))
}

/// Landweber iteration `x += w A^T (b - A x)` with `w = 1 / sigma_max^2`
/// estimated by power iteration; same stopping rule as CGLS.
pub fn landweber_solve(
    p: &MaskedProblem,
    max_iter: usize,
    tol: f64,
) -> Result<(GridField, ReconReport)> {
    if !(tol > 0.0) {
        return Err(Error::Parameter("tol must be positive".into()));
    }
    let b = p.rhs();
    let (m, k) = (p.a.rows(), p.a.cols);
    let mut q = vec![0.0; m];
    let mut v = vec![1.0; k];
    let mut w = vec![0.0; k];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|a| *a /= nv);
        p.a.apply(&v, &mut q);
        p.at.apply(&q, &mut w);
        lambda = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    let bnorm = norm(&b);
    let mut atb = vec![0.0; k];
    p.at.apply(&b, &mut atb);
    let atb_norm = norm(&atb);
    let mut x = vec![0.0; k];
    let mut history = vec![bnorm];
    let mut converged = bnorm == 0.0 || lambda == 0.0;
    let step = if lambda > 0.0 { 1.0 / (1.01 * lambda) } else { 0.0 };
    let mut r = b.clone();
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        p.at.apply(&r, &mut w);
        x.par_iter_mut().zip(&w).for_each(|(x, g)| *x += step * g);
        p.a.apply(&x, &mut q);
        r.par_iter_mut().zip(b.par_iter().zip(&q)).for_each(|(r, (b, q))| *r = b - q);
        iterations += 1;
        let rn = norm(&r);
        history.push(rn);
        converged = rn <= tol * bnorm || norm(&w) <= tol * atb_norm;
    }
    let rn = *history.last().unwrap();
    let report = ReconReport {
        solver: Solver::Landweber,
        iterations,
        converged,
        relative_residual: if bnorm > 0.0 { rn / bnorm } else { rn },
        relative_error: None,
        sigma_min_estimate: None,
        sigma_max_estimate: (lambda > 0.0).then(|| lambda.sqrt()),
        seed: None,
        residual_history: history,
    };
    finish(p, &x, report)
}

/// Dispatches to the chosen solver from the zero field.
pub fn solve(
    p: &MaskedProblem,
    solver: Solver,
    max_iter: usize,
    tol: f64,
) -> Result<(GridField, ReconReport)> {
    match solver {
        Solver::Cgls => cgls_solve(p, max_iter, tol),
        Solver::Landweber => landweber_solve(p, max_iter, tol),
    }
}

/// Outcome of [`uniqueness_probe`].
#[derive(Clone, Debug)]
pub struct ProbeResult {
    /// Largest `||x_i - x_j|| / max(||x_i||, ||x_j||)` over all pairs.
    pub max_distance: f64,
    pub reports: Vec<ReconReport>,
}

/// Solves from `trials` random feasible starts and compares the solutions.
///
/// Starts are Gaussian on the unknown cells, scaled to the root-mean-square
/// of the solution from zero (or 1 if that vanishes), drawn from ChaCha8
/// seeded with `seed`.
pub fn uniqueness_probe(
    p: &MaskedProblem,
    trials: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<ProbeResult> {
    if trials < 2 {
        return Err(Error::Parameter("need at least two trials".into()));
    }
    let (reference, _) = cgls_solve(p, max_iter, tol)?;
    let count = p.unknown_count().max(1) as f64;
    let rms = reference.l2_norm() / (count * reference.cell_volume()).sqrt();
    let scale = if rms > 0.0 { rms } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solutions = Vec::with_capacity(trials);
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut x0 = GridField::zeros(2, p.n)?;
        let vals = x0.values_mut();
        for c in &p.unknowns {
            let z: f64 = StandardNormal.sample(&mut rng);
            vals[*c] = scale * z;
        }
        let (x, mut report) = cgls_solve_from(p, &x0, max_iter, tol)?;
        report.seed = Some(seed);
        solutions.push(x);
        reports.push(report);
    }
    let mut max_distance: f64 = 0.0;
    for i in 0..trials {
        for j in i + 1..trials {
            let diff = solutions[i].lin_comb(1.0, &solutions[j], -1.0)?.l2_norm();
            let denom = solutions[i].l2_norm().max(solutions[j].l2_norm());
            let d = if denom > 0.0 { diff / denom } else { 0.0 };
            max_distance = max_distance.max(d);
        }
    }
    Ok(ProbeResult {
        max_distance,
        reports,
    })
}

/// Largest grid accepted by [`spectrum_report`].
pub const SPECTRUM_MAX_N: usize = 32;

/// Singular values of the explicit masked operator matrix.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl SpectrumReport {
    pub fn sigma_max(&self) -> Option<f64> {
        self.singular_values.first().copied()
    }

    pub fn sigma_min(&self) -> Option<f64> {
        self.singular_values.last().copied()
    }

    /// `sigma_max / sigma_min`; infinite when the operator is rank deficient.
    pub fn condition_number(&self) -> Option<f64> {
        let (hi, lo) = (self.sigma_max()?, self.sigma_min()?);
        Some(if lo > 0.0 { hi / lo } else { f64::INFINITY })
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("rows", self.rows);
        kv.set("cols", self.cols);
        if let Some(v) = self.sigma_max() {
            kv.set("sigma_max", format!("{v:e}"));
        }
        if let Some(v) = self.sigma_min() {
            kv.set("sigma_min", format!("{v:e}"));
        }
        if let Some(v) = self.condition_number() {
            kv.set("condition_number", format!("{v:e}"));
        }
        kv
    }
}

/// Full SVD of the masked, support-restricted operator (dense, `n <= 32`).
/// Singular values below `1e-13 sigma_max` are reported as zero.
pub fn spectrum_report(p: &MaskedProblem) -> Result<SpectrumReport> {
    if p.n > SPECTRUM_MAX_N {
        return Err(Error::SizeGuard(format!(
            "dense spectrum needs n <= {SPECTRUM_MAX_N}, got {}",
            p.n
        )));
    }
    let (rows, cols) = (p.a.rows(), p.a.cols);
    if cols == 0 || rows == 0 {
        return Ok(SpectrumReport {
            singular_values: Vec::new(),
            rows,
            cols,
        });
    }
    let dense = p.a.to_dense();
    // reduce tall matrices to their triangular factor first
    let sv: DVector<f64> = if rows > cols {
        dense.qr().r().singular_values()
    } else {
        dense.singular_values()
    };
    let mut values: Vec<f64> = sv.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let cutoff = 1e-13 * values.first().copied().unwrap_or(0.0);
    for v in values.iter_mut() {
        if *v < cutoff {
            *v = 0.0;
        }
    }
    values.resize(cols, 0.0);
    Ok(SpectrumReport {
        singular_values: values,
        rows,
        cols,
    })
}

/// The region the support theorem clears once all lines through `arc` carry
/// zero data: the circular segment cut off by the arc's chord. `None` for a
/// zero-width arc; arcs of half-width `>= pi/2` are rejected.
pub fn helgason_step(f_support: &RegionSpec, arc: &RegionSpec) -> Result<Option<RegionSpec>> {
    f_support.validate(2)?;
    if let RegionSpec::DiscSegment { arc_half_width, .. } = arc {
        if *arc_half_width == 0.0 {
            return Ok(None);
        }
    }
    convex_hull_of_arc(arc).map(Some)
}

/// Geometry with the default offset count for an `n` grid.
pub fn default_geometry(n: usize, n_theta: usize) -> Result<SinogramGeometry> {
    SinogramGeometry::for_grid(n, n_theta)
}
