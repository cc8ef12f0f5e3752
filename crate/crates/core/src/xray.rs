//! Discrete parallel-beam X-ray transform on oriented lines.
//!
//! Bin `(j, i)` is the line `{ s_i * perp_j + t * dir_j : t in R }` with
//! `dir_j = (cos theta_j, sin theta_j)`, `perp_j = (-sin theta_j, cos theta_j)`
//! and `theta_j = 2 pi j / n_theta`. The closest point of the line to the
//! origin is `s_i * perp_j`, at polar angle `theta_j + pi/2` when `s_i > 0`.
//!
//! Line integrals are sampled at `t = +-(k + 1/2) h/2` with bilinear
//! interpolation; the backprojection is the literal transpose of that map.
//! Sample pairs `+-t` are accumulated together so that the two orientations
//! of one line give bit-identical values.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridField, RegionSpec};

/// Line parameters of a sinogram: `n_theta` directions over the full circle
/// and `n_s` offsets spanning `[-sqrt 2, sqrt 2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SinogramGeometry {
    n_theta: usize,
    n_s: usize,
    dirs: Vec<[f64; 2]>,
    offsets: Vec<f64>,
}

impl SinogramGeometry {
    pub fn new(n_theta: usize, n_s: usize) -> Result<Self> {
        if n_theta < 2 || n_theta % 2 != 0 {
            return Err(Error::Parameter(format!(
                "n_theta must be even and >= 2, got {n_theta}"
            )));
        }
        if n_s < 2 {
            return Err(Error::Parameter(format!("n_s must be >= 2, got {n_s}")));
        }
        let half = n_theta / 2;
        let mut dirs = vec![[0.0; 2]; n_theta];
        for j in 0..half {
            let th = 2.0 * PI * j as f64 / n_theta as f64;
            dirs[j] = [th.cos(), th.sin()];
            dirs[j + half] = [-dirs[j][0], -dirs[j][1]];
        }
        let ds = 2.0 * SQRT_2 / (n_s - 1) as f64;
        let c = (n_s - 1) as f64 / 2.0;
        let offsets = (0..n_s).map(|i| (i as f64 - c) * ds).collect();
        Ok(SinogramGeometry {
            n_theta,
            n_s,
            dirs,
            offsets,
        })
    }

    /// Geometry with offset spacing close to the cell width of an `n`-grid.
    pub fn for_grid(n: usize, n_theta: usize) -> Result<Self> {
        let n_s = (SQRT_2 * n as f64).ceil() as usize + 1;
        // odd n_s keeps the central line s = 0
        let n_s = if n_s % 2 == 0 { n_s + 1 } else { n_s };
        SinogramGeometry::new(n_theta, n_s)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_s
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    pub fn dir(&self, j: usize) -> [f64; 2] {
        self.dirs[j]
    }

    pub fn perp(&self, j: usize) -> [f64; 2] {
        let d = self.dirs[j];
        [-d[1], d[0]]
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn ds(&self) -> f64 {
        2.0 * SQRT_2 / (self.n_s - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    /// Weight `ds * dtheta` of the data-space inner product.
    pub fn bin_weight(&self) -> f64 {
        self.ds() * self.dtheta()
    }
}

/// Line-integral data, one row per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    geom: SinogramGeometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geom: SinogramGeometry) -> Self {
        let len = geom.len();
        Sinogram {
            geom,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(geom: SinogramGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::Dimension(format!(
                "sinogram needs {} values, got {}",
                geom.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite sinogram value".into()));
        }
        Ok(Sinogram { geom, values })
    }

    pub fn geometry(&self) -> &SinogramGeometry {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.geom.n_s + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.geom.n_s..(j + 1) * self.geom.n_s]
    }

    /// Weighted inner product `sum g1 g2 ds dtheta`.
    pub fn dot(&self, other: &Sinogram) -> Result<f64> {
        if self.geom != other.geom {
            return Err(Error::Dimension("sinogram geometries differ".into()));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.geom.bin_weight())
    }

    /// Zeroes every bin outside `mask`.
    pub fn masked(&self, mask: &LineMask) -> Result<Sinogram> {
        if mask.geom != self.geom {
            return Err(Error::Dimension("mask does not match sinogram".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&mask.bits)
            .map(|(v, b)| if *b { *v } else { 0.0 })
            .collect();
        Ok(Sinogram {
            geom: self.geom.clone(),
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> Sinogram {
        Sinogram {
            geom: self.geom.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Boolean selection of sinogram bins.
#[derive(Clone, Debug, PartialEq)]
pub struct LineMask {
    geom: SinogramGeometry,
    bits: Vec<bool>,
}

impl LineMask {
    pub fn full(geom: SinogramGeometry) -> Self {
        let len = geom.len();
        LineMask {
            geom,
            bits: vec![true; len],
        }
    }

    pub fn from_bits(geom: SinogramGeometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geom.len() {
            return Err(Error::Dimension(format!(
                "mask needs {} entries, got {}",
                geom.len(),
                bits.len()
            )));
        }
        Ok(LineMask { geom, bits })
    }

    pub fn geometry(&self) -> &SinogramGeometry {
        &self.geom
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, j: usize, i: usize) -> bool {
        self.bits[j * self.geom.n_s + i]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn union(&self, other: &LineMask) -> Result<LineMask> {
        if self.geom != other.geom {
            return Err(Error::Dimension("mask geometries differ".into()));
        }
        Ok(LineMask {
            geom: self.geom.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        })
    }
}

fn require_2d(f: &GridField) -> Result<()> {
    if f.dim() != 2 {
        return Err(Error::Dimension(format!(
            "the planar transform needs a 2D field, got {}D",
            f.dim()
        )));
    }
    Ok(())
}

/// Bilinear weights of point `(x, y)` on an `n x n` cell-centred grid, as
/// (flat index, weight) pairs for the corners that exist.
#[inline]
fn bilinear(n: usize, h: f64, x: f64, y: f64, mut emit: impl FnMut(usize, f64)) {
    let u = (x + 1.0) / h - 0.5;
    let v = (y + 1.0) / h - 0.5;
    let fu = u.floor();
    let fv = v.floor();
    let (iu, iv) = (fu as isize, fv as isize);
    let (au, av) = (u - fu, v - fv);
    let n = n as isize;
    let corners = [
        (iu, iv, (1.0 - au) * (1.0 - av)),
        (iu + 1, iv, au * (1.0 - av)),
        (iu, iv + 1, (1.0 - au) * av),
        (iu + 1, iv + 1, au * av),
    ];
    for (a, b, w) in corners {
        if a >= 0 && a < n && b >= 0 && b < n {
            emit((b * n + a) as usize, w);
        }
    }
}

/// Largest sampling parameter needed for a line at offset `s`: beyond it the
/// line is outside the square `[-1 - h, 1 + h]^2` touched by interpolation.
#[inline]
fn t_extent(s: f64, h: f64) -> f64 {
    let r = SQRT_2 * (1.0 + h);
    (r * r - s * s).max(0.0).sqrt()
}

/// Calls `emit(k, cell, w)` for the interpolation weights of sample pair `k`
/// of bin `(j, i)`. The sample at `+t_k` is emitted before the one at `-t_k`.
/// Weights exclude the step length.
#[inline]
fn for_each_sample(
    geom: &SinogramGeometry,
    n: usize,
    j: usize,
    i: usize,
    mut emit: impl FnMut(usize, usize, f64),
) {
    let h = 2.0 / n as f64;
    let step = 0.5 * h;
    let dir = geom.dirs[j];
    let perp = [-dir[1], dir[0]];
    let s = geom.offsets[i];
    let base = [s * perp[0], s * perp[1]];
    let extent = t_extent(s, h);
    let mut k = 0usize;
    loop {
        let t = (k as f64 + 0.5) * step;
        if t > extent {
            break;
        }
        let (tx, ty) = (t * dir[0], t * dir[1]);
        bilinear(n, h, base[0] + tx, base[1] + ty, |c, w| emit(k, c, w));
        bilinear(n, h, base[0] - tx, base[1] - ty, |c, w| emit(k, c, w));
        k += 1;
    }
}

/// Line integral of bin `(j, i)`.
fn line_integral(f: &[f64], geom: &SinogramGeometry, n: usize, j: usize, i: usize) -> f64 {
    let step = 1.0 / n as f64;
    let h = 2.0 / n as f64;
    let dir = geom.dirs[j];
    let perp = [-dir[1], dir[0]];
    let s = geom.offsets[i];
    let base = [s * perp[0], s * perp[1]];
    let extent = t_extent(s, h);
    let mut acc = 0.0;
    let mut k = 0usize;
    loop {
        let t = (k as f64 + 0.5) * step;
        if t > extent {
            break;
        }
        let (tx, ty) = (t * dir[0], t * dir[1]);
        let mut plus = 0.0;
        bilinear(n, h, base[0] + tx, base[1] + ty, |c, w| plus += w * f[c]);
        let mut minus = 0.0;
        bilinear(n, h, base[0] - tx, base[1] - ty, |c, w| minus += w * f[c]);
        acc += plus + minus;
        k += 1;
    }
    acc * step
}

/// Discrete X-ray transform of a 2D field.
pub fn xray_forward(f: &GridField, geom: &SinogramGeometry) -> Result<Sinogram> {
    require_2d(f)?;
    let n = f.n();
    let n_s = geom.n_s;
    let mut values = vec![0.0; geom.len()];
    values
        .par_chunks_mut(n_s)
        .enumerate()
        .for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = line_integral(f.values(), geom, n, j, i);
            }
        });
    Ok(Sinogram {
        geom: geom.clone(),
        values,
    })
}

// Directions per partial image in the adjoint; fixed so the reduction order
// does not depend on the thread count.
const ADJOINT_CHUNK: usize = 8;

/// Backprojection: the transpose of [`xray_forward`] with respect to the
/// weighted pairings `<g1, g2> = sum g1 g2 ds dtheta` and `<f1, f2> = sum f1 f2 h^2`.
pub fn xray_adjoint(g: &Sinogram, n: usize) -> Result<GridField> {
    let geom = &g.geom;
    let mut out = GridField::zeros(2, n)?;
    let h = out.h();
    let step = 0.5 * h;
    let n_s = geom.n_s;
    let partials: Vec<Vec<f64>> = (0..geom.n_theta)
        .collect::<Vec<_>>()
        .par_chunks(ADJOINT_CHUNK)
        .map(|js| {
            let mut img = vec![0.0; n * n];
            for &j in js {
                for i in 0..n_s {
                    let gv = g.values[j * n_s + i];
                    if gv == 0.0 {
                        continue;
                    }
                    for_each_sample(geom, n, j, i, |_, c, w| img[c] += gv * w);
                }
            }
            img
        })
        .collect();
    let scale = step * geom.bin_weight() / (h * h);
    let vals = out.values_mut();
    for p in &partials {
        for (o, v) in vals.iter_mut().zip(p) {
            *o += v;
        }
    }
    for o in vals.iter_mut() {
        *o *= scale;
    }
    Ok(out)
}

/// `X* X f`, approximating `2 (f * |x|^{1-d})`.
pub fn normal_operator(f: &GridField, geom: &SinogramGeometry) -> Result<GridField> {
    let g = xray_forward(f, geom)?;
    xray_adjoint(&g, f.n())
}

/// Sparse row of the forward matrix for bin `(j, i)`: (cell, weight) pairs
/// with the step length included, merged per cell and sorted by cell.
pub fn forward_row(geom: &SinogramGeometry, n: usize, j: usize, i: usize) -> Vec<(usize, f64)> {
    let step = 1.0 / n as f64;
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for_each_sample(geom, n, j, i, |_, c, w| entries.push((c, w * step)));
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (c, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == c => last.1 += w,
            _ => merged.push((c, w)),
        }
    }
    merged
}

/// Bins whose line meets `region`.
///
/// * ball: distance from the centre to the line is at most `radius + h/2`;
/// * annulus: the line meets the outer disc, `|s| <= r_outer + h/2`;
/// * disc segment: read as its boundary arc; the line crosses the unit circle
///   at a point of the arc.
pub fn lines_meeting_region(
    geom: &SinogramGeometry,
    n: usize,
    region: &RegionSpec,
) -> Result<LineMask> {
    region.validate(2)?;
    let h = 2.0 / n as f64;
    let mut bits = vec![false; geom.len()];
    for j in 0..geom.n_theta {
        let perp = geom.perp(j);
        let dir = geom.dir(j);
        for i in 0..geom.n_s {
            let s = geom.offsets[i];
            bits[j * geom.n_s + i] = match region {
                RegionSpec::Ball { center, radius } => {
                    let dist = (center[0] * perp[0] + center[1] * perp[1] - s).abs();
                    dist <= radius + 0.5 * h
                }
                RegionSpec::Annulus { r_outer, .. } => s.abs() <= r_outer + 0.5 * h,
                RegionSpec::DiscSegment {
                    arc_center_angle,
                    arc_half_width,
                } => {
                    if s.abs() > 1.0 {
                        false
                    } else {
                        let w = (1.0 - s * s).sqrt();
                        [w, -w].iter().any(|t| {
                            let p = [s * perp[0] + t * dir[0], s * perp[1] + t * dir[1]];
                            angular_distance(p[1].atan2(p[0]), *arc_center_angle)
                                <= *arc_half_width
                        })
                    }
                }
            };
        }
    }
    Ok(LineMask {
        geom: geom.clone(),
        bits,
    })
}

pub(crate) fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Restriction of a 3D field to the plane containing coordinate axis `axis`
/// and the in-plane direction at angle `phi` about that axis, resampled on an
/// `n x n` grid. The first planar coordinate runs along the rotated
/// direction, the second along the axis.
pub fn axis_plane_slice(f: &GridField, axis: usize, phi: f64) -> Result<GridField> {
    if f.dim() != 3 {
        return Err(Error::Dimension("plane slices need a 3D field".into()));
    }
    if axis > 2 {
        return Err(Error::Parameter(format!("axis must be 0, 1 or 2, got {axis}")));
    }
    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
    let (c, s) = (phi.cos(), phi.sin());
    GridField::from_fn(2, f.n(), |p| {
        let mut x = [0.0; 3];
        x[a1] = p[0] * c;
        x[a2] = p[0] * s;
        x[axis] = p[1];
        f.interpolate(&x)
    })
}

/// X-ray transform of a 3D field restricted to `n_planes` planes through
/// coordinate axis `axis`, at angles `pi k / n_planes`.
pub fn xray_forward_axis_planes(
    f: &GridField,
    axis: usize,
    n_planes: usize,
    geom: &SinogramGeometry,
) -> Result<Vec<Sinogram>> {
    if n_planes == 0 {
        return Err(Error::Parameter("need at least one plane".into()));
    }
    (0..n_planes)
        .map(|k| {
            let slice = axis_plane_slice(f, axis, PI * k as f64 / n_planes as f64)?;
            xray_forward(&slice, geom)
        })
        .collect()
}
