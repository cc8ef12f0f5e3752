//! Uniform cell-centred grids on `[-1, 1]^d`, phantoms and region masks.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scalar field sampled at the cell centres of a uniform grid over `[-1, 1]^dim`.
///
/// Storage is row-major with the first axis fastest: in 2D the value of cell
/// `(ix, iy)` lives at `iy * n + ix`, so one stored row is one grid row.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dim: usize,
    n: usize,
    values: Vec<f64>,
}

fn check_shape(dim: usize, n: usize) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::Parameter(format!("dim must be 2 or 3, got {dim}")));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::Parameter(format!(
            "cells per axis must be even and at least 2, got {n}"
        )));
    }
    Ok(())
}

impl GridField {
    pub fn zeros(dim: usize, n: usize) -> Result<Self> {
        check_shape(dim, n)?;
        Ok(GridField {
            dim,
            n,
            values: vec![0.0; n.pow(dim as u32)],
        })
    }

    pub fn from_values(dim: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(dim, n)?;
        let expected = n.pow(dim as u32);
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} values for a {dim}D grid with n = {n}, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite value at index {pos}")));
        }
        Ok(GridField { dim, n, values })
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn<F>(dim: usize, n: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut field = GridField::zeros(dim, n)?;
        let (d, nn) = (dim, n);
        field
            .values
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| {
                let x = cell_center(d, nn, idx);
                *v = f(&x[..d]);
            });
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("sampled function is not finite".into()));
        }
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell width; `h * n == 2`.
    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Volume element `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Centre coordinate of cell `i` along any axis.
    ///
    /// Computed as `(i + 1/2 - n/2) h`, which makes the grid exactly symmetric
    /// under `x -> -x` in floating point.
    pub fn coord(&self, i: usize) -> f64 {
        axis_coord(self.n, i)
    }

    /// Centre of the cell with flat index `idx` (unused trailing entries are 0).
    pub fn center(&self, idx: usize) -> [f64; 3] {
        cell_center(self.dim, self.n, idx)
    }

    pub fn same_shape(&self, other: &GridField) -> bool {
        self.dim == other.dim && self.n == other.n
    }

    fn require_same_shape(&self, other: &GridField) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dimension(format!(
                "grid shapes differ: {}D n={} vs {}D n={}",
                self.dim, self.n, other.dim, other.n
            )));
        }
        Ok(())
    }

    /// `sum(values) * h^dim`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Discrete inner product with weight `h^dim`.
    pub fn dot(&self, other: &GridField) -> Result<f64> {
        self.require_same_shape(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> GridField {
        GridField {
            dim: self.dim,
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &GridField, b: f64) -> Result<GridField> {
        self.require_same_shape(other)?;
        Ok(GridField {
            dim: self.dim,
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Pointwise product, e.g. with a 0/1 mask.
    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.require_same_shape(other)?;
        Ok(GridField {
            dim: self.dim,
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        })
    }

    /// `||self - truth|| / ||truth||` in the discrete L2 norm.
    pub fn relative_l2_error(&self, truth: &GridField) -> Result<f64> {
        self.relative_l2_error_where(truth, |_| true)
    }

    /// Relative L2 error restricted to cells whose centre satisfies `keep`.
    pub fn relative_l2_error_where<P>(&self, truth: &GridField, keep: P) -> Result<f64>
    where
        P: Fn(&[f64]) -> bool,
    {
        self.require_same_shape(truth)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (idx, (a, b)) in self.values.iter().zip(&truth.values).enumerate() {
            let x = self.center(idx);
            if keep(&x[..self.dim]) {
                num += (a - b) * (a - b);
                den += b * b;
            }
        }
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok((num / den).sqrt())
    }

    /// Largest |value| over cells within `width` cells of the grid boundary.
    pub fn boundary_ring_max(&self, width: usize) -> f64 {
        let n = self.n;
        let near = |i: usize| i < width || i + width >= n;
        let mut m = 0.0_f64;
        for (idx, v) in self.values.iter().enumerate() {
            let ix = idx % n;
            let iy = (idx / n) % n;
            let iz = idx / (n * n);
            let on_ring = near(ix) || near(iy) || (self.dim == 3 && near(iz));
            if on_ring {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Value at an arbitrary point by multilinear interpolation of the cell
    /// values; zero outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let h = self.h();
        let n = self.n as isize;
        let mut base = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..self.dim {
            let u = (x[a] + 1.0) / h - 0.5;
            let f = u.floor();
            base[a] = f as isize;
            frac[a] = u - f;
        }
        let mut acc = 0.0;
        let corners = 1usize << self.dim;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut stride = 1usize;
            let mut inside = true;
            for a in 0..self.dim {
                let bit = (c >> a) & 1;
                let i = base[a] + bit as isize;
                if i < 0 || i >= n {
                    inside = false;
                    break;
                }
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx += i as usize * stride;
                stride *= self.n;
            }
            if inside {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

pub(crate) fn axis_coord(n: usize, i: usize) -> f64 {
    (i as f64 + 0.5 - n as f64 / 2.0) * (2.0 / n as f64)
}

pub(crate) fn cell_center(dim: usize, n: usize, idx: usize) -> [f64; 3] {
    let mut x = [0.0; 3];
    let mut rest = idx;
    for xa in x.iter_mut().take(dim) {
        *xa = axis_coord(n, rest % n);
        rest /= n;
    }
    x
}

/// A subset of the domain, in domain units.
#[derive(Clone, Debug, PartialEq)]
pub enum RegionSpec {
    /// Closed ball `|x - center| <= radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Closed shell `r_inner <= |x| <= r_outer` about the origin.
    Annulus { r_inner: f64, r_outer: f64 },
    /// Circular segment of the unit disc cut off by the chord whose endpoints
    /// are the ends of the boundary arc centred at `arc_center_angle` with
    /// half-width `arc_half_width`. Two-dimensional only.
    DiscSegment {
        arc_center_angle: f64,
        arc_half_width: f64,
    },
}

impl RegionSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        RegionSpec::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn annulus(r_inner: f64, r_outer: f64) -> Self {
        RegionSpec::Annulus { r_inner, r_outer }
    }

    pub fn disc_segment(arc_center_angle: f64, arc_half_width: f64) -> Self {
        RegionSpec::DiscSegment {
            arc_center_angle,
            arc_half_width,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            RegionSpec::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::Parameter(format!(
                        "ball centre has {} coordinates, grid is {dim}D",
                        center.len()
                    )));
                }
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Parameter(format!("invalid ball radius {radius}")));
                }
            }
            RegionSpec::Annulus { r_inner, r_outer } => {
                if !(*r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "annulus needs 0 < r_inner < r_outer, got ({r_inner}, {r_outer})"
                    )));
                }
            }
            RegionSpec::DiscSegment {
                arc_center_angle,
                arc_half_width,
            } => {
                if dim != 2 {
                    return Err(Error::UnsupportedGeometry(
                        "disc segments are two-dimensional".into(),
                    ));
                }
                if !(*arc_half_width > 0.0 && *arc_half_width <= PI)
                    || !arc_center_angle.is_finite()
                {
                    return Err(Error::Parameter(format!(
                        "arc half-width must lie in (0, pi], got {arc_half_width}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            RegionSpec::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 <= radius * radius
            }
            RegionSpec::Annulus { r_inner, r_outer } => {
                let r2: f64 = x.iter().map(|a| a * a).sum();
                r2 >= r_inner * r_inner && r2 <= r_outer * r_outer
            }
            RegionSpec::DiscSegment {
                arc_center_angle,
                arc_half_width,
            } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let proj = x[0] * arc_center_angle.cos() + x[1] * arc_center_angle.sin();
                r2 <= 1.0 && proj >= arc_half_width.cos()
            }
        }
    }

    /// Smooth bump `(1 - t^2)^3` in a normalized coordinate `t in [-1, 1]`
    /// spanning the region; zero outside.
    pub fn bump(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let t = match self {
            RegionSpec::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2.sqrt() / radius
            }
            RegionSpec::Annulus { r_inner, r_outer } => {
                let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                return radial_bump(*r_inner, *r_outer, r);
            }
            RegionSpec::DiscSegment {
                arc_center_angle,
                arc_half_width,
            } => {
                let proj = x[0] * arc_center_angle.cos() + x[1] * arc_center_angle.sin();
                let c = arc_half_width.cos();
                2.0 * (proj - c) / (1.0 - c) - 1.0
            }
        };
        smooth_bump(t)
    }
}

fn smooth_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let u = 1.0 - t * t;
        u * u * u
    }
}

/// The radial factor used by bump and cosine-mode profiles on an annulus.
pub fn radial_bump(r_inner: f64, r_outer: f64, r: f64) -> f64 {
    let mid = 0.5 * (r_inner + r_outer);
    let half = 0.5 * (r_outer - r_inner);
    smooth_bump((r - mid) / half)
}

/// Value profile laid over a region.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `amplitude * (1 - t^2)^3` across the region.
    RadialBump { amplitude: f64 },
    /// `amplitude * cos(k phi) * bump`, `phi` the polar angle in the x-y plane.
    CosineMode { k: u32, amplitude: f64 },
}

impl Profile {
    pub fn eval(&self, region: &RegionSpec, x: &[f64]) -> f64 {
        match self {
            Profile::Constant(c) => {
                if region.contains(x) {
                    *c
                } else {
                    0.0
                }
            }
            Profile::RadialBump { amplitude } => amplitude * region.bump(x),
            Profile::CosineMode { k, amplitude } => {
                let phi = x[1].atan2(x[0]);
                amplitude * (*k as f64 * phi).cos() * region.bump(x)
            }
        }
    }
}

/// A sum of profiles, each supported on its region.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhantomSpec {
    pub items: Vec<(RegionSpec, Profile)>,
}

impl PhantomSpec {
    pub fn new() -> Self {
        PhantomSpec::default()
    }

    pub fn single(region: RegionSpec, profile: Profile) -> Self {
        PhantomSpec {
            items: vec![(region, profile)],
        }
    }

    pub fn with(mut self, region: RegionSpec, profile: Profile) -> Self {
        self.items.push((region, profile));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.items.iter().map(|(r, p)| p.eval(r, x)).sum()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for (region, profile) in &self.items {
            region.validate(dim)?;
            let finite = match profile {
                Profile::Constant(c) => c.is_finite(),
                Profile::RadialBump { amplitude } | Profile::CosineMode { amplitude, .. } => {
                    amplitude.is_finite()
                }
            };
            if !finite {
                return Err(Error::Parameter("non-finite profile amplitude".into()));
            }
        }
        Ok(())
    }

    /// True if `x` lies in at least one of the regions.
    pub fn covers(&self, x: &[f64]) -> bool {
        self.items.iter().any(|(r, _)| r.contains(x))
    }
}

fn check_raster(n: usize, dim: usize) -> Result<()> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::Parameter(format!(
            "rasterization needs an even n >= 8, got {n}"
        )));
    }
    check_shape(dim, n)
}

/// Evaluates the phantom at every cell centre.
pub fn rasterize(spec: &PhantomSpec, n: usize, dim: usize) -> Result<GridField> {
    check_raster(n, dim)?;
    spec.validate(dim)?;
    GridField::from_fn(dim, n, |x| spec.eval(x))
}

/// 0/1 indicator of `region` at cell centres.
pub fn region_mask(region: &RegionSpec, n: usize, dim: usize) -> Result<GridField> {
    check_raster(n, dim)?;
    region.validate(dim)?;
    GridField::from_fn(dim, n, |x| if region.contains(x) { 1.0 } else { 0.0 })
}

/// Convex hull of a proper boundary arc of the unit circle: the circular
/// segment between the arc and its chord.
pub fn convex_hull_of_arc(arc: &RegionSpec) -> Result<RegionSpec> {
    match arc {
        RegionSpec::DiscSegment { arc_half_width, .. } => {
            arc.validate(2)?;
            if *arc_half_width >= PI / 2.0 {
                return Err(Error::UnsupportedGeometry(format!(
                    "arc half-width {arc_half_width} is not below pi/2"
                )));
            }
            Ok(arc.clone())
        }
        other => Err(Error::Parameter(format!(
            "convex hull needs a boundary arc, got {other:?}"
        ))),
    }
}

/// Area of the unit-disc segment with arc half-width `beta`.
pub fn segment_area(beta: f64) -> f64 {
    beta - beta.sin() * beta.cos()
}

/// Midpoint of the chord closing the arc.
pub fn chord_midpoint(arc_center_angle: f64, arc_half_width: f64) -> [f64; 2] {
    let c = arc_half_width.cos();
    [c * arc_center_angle.cos(), c * arc_center_angle.sin()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_constant_fills_interior() {
        let spec = PhantomSpec::single(RegionSpec::ball(&[0.0, 0.0], 1.0), Profile::Constant(1.0));
        let f = rasterize(&spec, 32, 2).unwrap();
        for (idx, v) in f.values().iter().enumerate() {
            let x = f.center(idx);
            let inside = x[0] * x[0] + x[1] * x[1] <= 1.0;
            assert_eq!(*v, if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn empty_spec_is_zero() {
        let f = rasterize(&PhantomSpec::new(), 16, 2).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
        let f3 = rasterize(&PhantomSpec::new(), 8, 3).unwrap();
        assert_eq!(f3.len(), 512);
    }

    #[test]
    fn annulus_area() {
        let spec = PhantomSpec::single(RegionSpec::annulus(0.5, 0.9), Profile::Constant(1.0));
        let f = rasterize(&spec, 64, 2).unwrap();
        let exact = PI * (0.81 - 0.25);
        assert!((f.integral() - exact).abs() / exact < 0.02);
    }

    #[test]
    fn small_ball_cell_count() {
        let n = 64;
        let m = region_mask(&RegionSpec::ball(&[0.0, 0.0], 0.1), n, 2).unwrap();
        let h = 2.0 / n as f64;
        let count = m.values().iter().filter(|v| **v == 1.0).count() as f64;
        let expected = PI * 0.01 / (h * h);
        // boundary cells: perimeter / h
        let slack = 2.0 * PI * 0.1 / h;
        assert!((count - expected).abs() <= slack, "{count} vs {expected}");
    }

    #[test]
    fn annulus_and_inner_ball_disjoint() {
        let a = region_mask(&RegionSpec::annulus(0.3, 0.7), 64, 2).unwrap();
        let b = region_mask(&RegionSpec::ball(&[0.0, 0.0], 0.3 - 1e-9), 64, 2).unwrap();
        assert!(a.mul(&b).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn full_width_segment_is_disc() {
        let seg = region_mask(&RegionSpec::disc_segment(0.3, PI), 64, 2).unwrap();
        let disc = region_mask(&RegionSpec::ball(&[0.0, 0.0], 1.0), 64, 2).unwrap();
        assert_eq!(seg, disc);
    }

    #[test]
    fn bad_regions_rejected() {
        for r in [
            RegionSpec::ball(&[0.0, 0.0], 0.0),
            RegionSpec::annulus(0.5, 0.5),
            RegionSpec::annulus(0.0, 0.5),
            RegionSpec::disc_segment(0.0, 0.0),
        ] {
            assert!(matches!(region_mask(&r, 16, 2), Err(Error::Parameter(_))));
        }
        assert!(region_mask(&RegionSpec::ball(&[0.0, 0.0], 0.5), 16, 3).is_err());
        assert!(rasterize(&PhantomSpec::new(), 7, 2).is_err());
    }

    #[test]
    fn segment_area_matches_raster() {
        for beta in [0.3, 0.6, 1.2] {
            let m = region_mask(&RegionSpec::disc_segment(0.7, beta), 512, 2).unwrap();
            let exact = segment_area(beta);
            assert!((m.integral() - exact).abs() < 0.01 * exact + 0.01, "beta {beta}");
        }
        assert!(segment_area(1e-4) < 1e-11);
    }

    #[test]
    fn convex_hull_rules() {
        let arc = RegionSpec::disc_segment(1.0, 0.4);
        assert_eq!(convex_hull_of_arc(&arc).unwrap(), arc);
        assert!(matches!(
            convex_hull_of_arc(&RegionSpec::disc_segment(0.0, PI / 2.0)),
            Err(Error::UnsupportedGeometry(_))
        ));
        for beta in [0.01, 0.5, 1.5] {
            let m = chord_midpoint(2.0, beta);
            let r = (m[0] * m[0] + m[1] * m[1]).sqrt();
            assert!(r < 1.0 && r > 0.0);
        }
    }

    #[test]
    fn grid_is_symmetric() {
        let n = 64;
        for i in 0..n {
            assert_eq!(axis_coord(n, i), -axis_coord(n, n - 1 - i));
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let f = GridField::from_fn(2, 32, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        let v = f.interpolate(&[0.123, -0.456]);
        assert!((v - (2.0 * 0.123 + 0.456 + 0.5)).abs() < 1e-12);
        assert_eq!(f.interpolate(&[1.5, 0.0]), 0.0);
    }
}
