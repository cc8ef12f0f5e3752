//! Python bindings: fields, sinograms, the transform and its adjoint, Riesz
//! potentials, the exact tables and the reconstruction experiments.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use xrt_core::io::{self, KeyValues};
use xrt_core::{abel, grid, recon, riesz, seismo, symkernel, xray};

fn err(e: xrt_core::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn kv_from(params: &HashMap<String, String>) -> KeyValues {
    let mut kv = KeyValues::new();
    for (k, v) in params {
        kv.set(k, v);
    }
    kv
}

fn kv_to(kv: &KeyValues) -> HashMap<String, String> {
    kv.keys()
        .map(|k| (k.to_string(), kv.get(k).unwrap_or_default().to_string()))
        .collect()
}

/// Cell-centred samples on `[-1, 1]^dim`, `n` cells per axis, x fastest.
#[pyclass(name = "GridField", module = "xrt", from_py_object)]
#[derive(Clone)]
struct PyGridField(grid::GridField);

#[pymethods]
impl PyGridField {
    #[new]
    fn new(dim: usize, n: usize, values: Vec<f64>) -> PyResult<Self> {
        grid::GridField::from_values(dim, n, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn zeros(dim: usize, n: usize) -> PyResult<Self> {
        grid::GridField::zeros(dim, n).map(Self).map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        io::read_field(path.as_ref()).map(Self).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        io::write_field(path.as_ref(), &self.0).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn integral(&self) -> f64 {
        self.0.integral()
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    fn relative_l2_error(&self, truth: &PyGridField) -> PyResult<f64> {
        self.0.relative_l2_error(&truth.0).map_err(err)
    }

    fn to_csv(&self) -> PyResult<String> {
        io::field_to_csv(&self.0).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("GridField(dim={}, n={})", self.0.dim(), self.0.n())
    }
}

/// Parallel-beam sampling: `n_theta` angles on `[0, 2 pi)`, `n_s` offsets
/// on `[-sqrt 2, sqrt 2]`.
#[pyclass(name = "SinogramGeometry", module = "xrt", from_py_object)]
#[derive(Clone)]
struct PyGeometry(xray::SinogramGeometry);

#[pymethods]
impl PyGeometry {
    #[new]
    fn new(n_theta: usize, n_s: usize) -> PyResult<Self> {
        xray::SinogramGeometry::new(n_theta, n_s).map(Self).map_err(err)
    }

    /// Default offset count for an `n` grid.
    #[staticmethod]
    fn for_grid(n: usize, n_theta: usize) -> PyResult<Self> {
        xray::SinogramGeometry::for_grid(n, n_theta).map(Self).map_err(err)
    }

    #[getter]
    fn n_theta(&self) -> usize {
        self.0.n_theta()
    }

    #[getter]
    fn n_s(&self) -> usize {
        self.0.n_s()
    }

    fn __repr__(&self) -> String {
        format!("SinogramGeometry(n_theta={}, n_s={})", self.0.n_theta(), self.0.n_s())
    }
}

#[pyclass(name = "Sinogram", module = "xrt", from_py_object)]
#[derive(Clone)]
struct PySinogram(xray::Sinogram);

#[pymethods]
impl PySinogram {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        io::read_sinogram(path.as_ref()).map(Self).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        io::write_sinogram(path.as_ref(), &self.0).map_err(err)
    }

    #[getter]
    fn geometry(&self) -> PyGeometry {
        PyGeometry(self.0.geometry().clone())
    }

    /// Row-major values, one row of `n_s` offsets per angle.
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn dot(&self, other: &PySinogram) -> PyResult<f64> {
        self.0.dot(&other.0).map_err(err)
    }
}

#[pyclass(name = "LineMask", module = "xrt", from_py_object)]
#[derive(Clone)]
struct PyLineMask(xray::LineMask);

#[pymethods]
impl PyLineMask {
    #[staticmethod]
    fn full(geometry: &PyGeometry) -> Self {
        Self(xray::LineMask::full(geometry.0.clone()))
    }

    /// Bins whose line meets `region`.
    #[staticmethod]
    fn meeting(geometry: &PyGeometry, n: usize, region: &PyRegion) -> PyResult<Self> {
        xray::lines_meeting_region(&geometry.0, n, &region.0).map(Self).map_err(err)
    }

    fn count(&self) -> usize {
        self.0.count()
    }
}

#[pyclass(name = "Region", module = "xrt", from_py_object)]
#[derive(Clone)]
struct PyRegion(grid::RegionSpec);

#[pymethods]
impl PyRegion {
    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self(grid::RegionSpec::ball(&center, radius))
    }

    #[staticmethod]
    fn annulus(r_inner: f64, r_outer: f64) -> Self {
        Self(grid::RegionSpec::annulus(r_inner, r_outer))
    }

    /// Segment of the unit disc cut off by the chord of the boundary arc.
    #[staticmethod]
    fn disc_segment(arc_center_angle: f64, arc_half_width: f64) -> Self {
        Self(grid::RegionSpec::disc_segment(arc_center_angle, arc_half_width))
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.0.contains(&x)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// A sum of profiles (`bump`, `constant`, `cosine:K`) laid over regions.
#[pyclass(name = "Phantom", module = "xrt", from_py_object)]
#[derive(Clone, Default)]
struct PyPhantom(grid::PhantomSpec);

#[pymethods]
impl PyPhantom {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[pyo3(signature = (region, profile = "bump", amplitude = 1.0))]
    fn add(&mut self, region: &PyRegion, profile: &str, amplitude: f64) -> PyResult<()> {
        let p = seismo::parse_profile(profile, amplitude).map_err(err)?;
        self.0.items.push((region.0.clone(), p));
        Ok(())
    }

    #[pyo3(signature = (n, dim = 2))]
    fn rasterize(&self, n: usize, dim: usize) -> PyResult<PyGridField> {
        grid::rasterize(&self.0, n, dim).map(PyGridField).map_err(err)
    }
}

#[pyfunction]
fn xray_forward(f: &PyGridField, geometry: &PyGeometry) -> PyResult<PySinogram> {
    xray::xray_forward(&f.0, &geometry.0).map(PySinogram).map_err(err)
}

#[pyfunction]
fn xray_adjoint(g: &PySinogram, n: usize) -> PyResult<PyGridField> {
    xray::xray_adjoint(&g.0, n).map(PyGridField).map_err(err)
}

#[pyfunction]
fn normal_operator(f: &PyGridField, geometry: &PyGeometry) -> PyResult<PyGridField> {
    xray::normal_operator(&f.0, &geometry.0).map(PyGridField).map_err(err)
}

#[pyfunction]
fn riesz_potential(f: &PyGridField, alpha: f64) -> PyResult<PyGridField> {
    let ord = riesz::RieszOrder::new(alpha, f.0.dim()).map_err(err)?;
    riesz::riesz_potential(&f.0, &ord).map(PyGridField).map_err(err)
}

#[pyfunction]
fn fractional_laplacian(f: &PyGridField, s: f64) -> PyResult<PyGridField> {
    riesz::fractional_laplacian(&f.0, s).map(PyGridField).map_err(err)
}

#[pyfunction]
fn invert_normal(nf: &PyGridField) -> PyResult<PyGridField> {
    riesz::invert_normal(&nf.0).map(PyGridField).map_err(err)
}

/// `A_k^n` for `k <= k_max`, `n <= n_max` as nested lists of exact integers.
#[pyfunction]
fn abel_coefficients(k_max: usize, n_max: usize) -> PyResult<Vec<Vec<num_bigint::BigInt>>> {
    let t = abel::abel_coefficients(k_max, n_max).map_err(err)?;
    Ok((0..=k_max)
        .map(|k| (0..=n_max).map(|n| t.get(k, n).clone()).collect())
        .collect())
}

#[pyfunction]
fn positivity_threshold(k: usize, n_max: usize) -> PyResult<usize> {
    abel::positivity_threshold(k, n_max).map_err(err)
}

/// Checks the derivative expansion of every monomial of degree `<= degree`
/// exactly at `points` rational points. Returns `(exponents, passed)` pairs.
#[pyfunction]
#[pyo3(signature = (d, alpha, degree, points = 20, seed = 0))]
fn lemma_verify(
    d: usize,
    alpha: &str,
    degree: u32,
    points: usize,
    seed: u64,
) -> PyResult<Vec<(Vec<u32>, bool)>> {
    let alpha = symkernel::parse_rational(alpha).map_err(err)?;
    symkernel::check_hypothesis(degree as usize, d, &alpha).map_err(err)?;
    let mut algebra = symkernel::KernelAlgebra::new(d).map_err(err)?;
    let pts = symkernel::rational_sample_points(d, points, seed);
    let mut out = Vec::new();
    for deg in 0..=degree {
        for gamma in symkernel::exponents_of_degree(d, deg) {
            let p = symkernel::Polynomial::monomial(&gamma);
            let ok = algebra.verify_polynomial(&p, &alpha, &pts).map_err(err)?;
            out.push((gamma, ok));
        }
    }
    Ok(out)
}

#[pyfunction]
fn rejected_alphas(d: usize, n: usize) -> Vec<i64> {
    symkernel::rejected_alphas(d, n).into_iter().collect()
}

/// Masked, support-restricted inversion problem.
#[pyclass(name = "MaskedProblem", module = "xrt", from_py_object)]
#[derive(Clone)]
struct PyProblem(recon::MaskedProblem);

#[pymethods]
impl PyProblem {
    /// `support = None` frees every cell outside `known_zero`.
    #[new]
    #[pyo3(signature = (n, data, mask, support = None, known_zero = None, truth = None))]
    fn new(
        n: usize,
        data: &PySinogram,
        mask: &PyLineMask,
        support: Option<&PyRegion>,
        known_zero: Option<&PyRegion>,
        truth: Option<&PyGridField>,
    ) -> PyResult<Self> {
        let mut p = recon::MaskedProblem::from_regions(
            n,
            data.0.clone(),
            mask.0.clone(),
            support.map(|r| &r.0),
            known_zero.map(|r| &r.0),
        )
        .map_err(err)?;
        if let Some(t) = truth {
            p = p.with_truth(t.0.clone()).map_err(err)?;
        }
        Ok(Self(p))
    }

    /// The half-local problem for receivers on `arc`.
    #[staticmethod]
    fn half_local(arc: &PyRegion, phantom: &PyPhantom, n: usize, n_theta: usize, n_s: usize) -> PyResult<Self> {
        seismo::half_local_problem(&arc.0, &phantom.0, n, n_theta, n_s)
            .map(|(p, _)| Self(p))
            .map_err(err)
    }

    fn with_noise(&self, sigma: f64, seed: u64) -> PyResult<Self> {
        self.0.clone().with_noise(sigma, seed).map(Self).map_err(err)
    }

    #[getter]
    fn unknown_count(&self) -> usize {
        self.0.unknown_count()
    }

    #[getter]
    fn row_count(&self) -> usize {
        self.0.row_count()
    }

    /// Returns the reconstruction and the report as a dict of strings.
    #[pyo3(signature = (solver = "cgls", max_iter = 2000, tol = 1e-10))]
    fn solve(&self, solver: &str, max_iter: usize, tol: f64) -> PyResult<(PyGridField, HashMap<String, String>)> {
        let solver: recon::Solver = solver.parse().map_err(err)?;
        let (f, r) = recon::solve(&self.0, solver, max_iter, tol).map_err(err)?;
        Ok((PyGridField(f), kv_to(&r.to_key_values())))
    }

    /// Largest pairwise relative distance between solutions from random starts.
    #[pyo3(signature = (trials = 5, max_iter = 2000, tol = 1e-10, seed = 0))]
    fn uniqueness_probe(&self, trials: usize, max_iter: usize, tol: f64, seed: u64) -> PyResult<f64> {
        recon::uniqueness_probe(&self.0, trials, max_iter, tol, seed)
            .map(|p| p.max_distance)
            .map_err(err)
    }

    /// Singular values of the dense operator, descending (`n <= 32`).
    fn singular_values(&self) -> PyResult<Vec<f64>> {
        recon::spectrum_report(&self.0)
            .map(|r| r.singular_values)
            .map_err(err)
    }
}

/// Synthesizes travel-time differences for the scenario given as key/value
/// strings and recovers `dc2 - dc1`. Returns the field and the report.
#[pyfunction]
#[pyo3(signature = (params, n, n_theta, n_s = None, max_iter = 2000, tol = 1e-10))]
fn seismo_recover(
    params: HashMap<String, String>,
    n: usize,
    n_theta: usize,
    n_s: Option<usize>,
    max_iter: usize,
    tol: f64,
) -> PyResult<(PyGridField, HashMap<String, String>)> {
    let kv = kv_from(&params);
    kv.reject_unknown(seismo::SplitScenario::KEYS).map_err(err)?;
    let s = seismo::SplitScenario::from_key_values(&kv).map_err(err)?;
    let n_s = match n_s {
        Some(v) => v,
        None => xray::SinogramGeometry::for_grid(n, n_theta).map_err(err)?.n_s(),
    };
    let data = seismo::synthesize_splitting(&s, n, n_theta, n_s).map_err(err)?;
    let (f, r) = seismo::recover_difference(&data, &s, max_iter, tol).map_err(err)?;
    Ok((PyGridField(f), kv_to(&r.to_key_values())))
}

#[pymodule]
fn xrt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridField>()?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PySinogram>()?;
    m.add_class::<PyLineMask>()?;
    m.add_class::<PyRegion>()?;
    m.add_class::<PyPhantom>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(xray_forward, m)?)?;
    m.add_function(wrap_pyfunction!(xray_adjoint, m)?)?;
    m.add_function(wrap_pyfunction!(normal_operator, m)?)?;
    m.add_function(wrap_pyfunction!(riesz_potential, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(invert_normal, m)?)?;
    m.add_function(wrap_pyfunction!(abel_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(positivity_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_verify, m)?)?;
    m.add_function(wrap_pyfunction!(rejected_alphas, m)?)?;
    m.add_function(wrap_pyfunction!(seismo_recover, m)?)?;
    Ok(())
}
