//! Synthetic shear-wave-splitting travel-time data over straight rays and
//! the two partial-data geometries: rays through a small central ball
//! ("core shadow") and rays through a surface arc ("half-local" data).

use crate::error::{Error, Result};
use crate::grid::{rasterize, GridField, PhantomSpec, Profile, RegionSpec};
use crate::io::KeyValues;
use crate::quad::{composite_gauss, gauss_legendre};
use crate::recon::{cgls_solve, helgason_step, MaskedProblem, ReconReport};
use crate::xray::{lines_meeting_region, xray_forward, LineMask, Sinogram, SinogramGeometry};

/// Background speed as a function of radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpeedProfile {
    Constant(f64),
    /// `center + (surface - center) r`.
    Linear { center: f64, surface: f64 },
}

impl SpeedProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            SpeedProfile::Constant(c) => c,
            SpeedProfile::Linear { center, surface } => center + (surface - center) * r,
        }
    }

    /// Minimum over `r in [0, sqrt 2]`, the radii covered by the grid.
    pub fn min(&self) -> f64 {
        match *self {
            SpeedProfile::Constant(c) => c,
            SpeedProfile::Linear { center, surface } => {
                center.min(center + (surface - center) * std::f64::consts::SQRT_2)
            }
        }
    }
}

/// Background speed, the two quasi-S perturbations and the ray family.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitScenario {
    pub c0: SpeedProfile,
    pub dc1: PhantomSpec,
    pub dc2: PhantomSpec,
    /// Annulus carrying the perturbations.
    pub layer: RegionSpec,
    /// Rays are those meeting the ball `B(0, ray_radius)`.
    pub ray_radius: f64,
    /// Perturbations depending on the ray direction are not supported.
    pub direction_dependent: bool,
}

/// Largest `|dc_i| / min c0` treated as linear.
pub const LINEAR_REGIME: f64 = 0.05;

impl SplitScenario {
    /// Perturbations `dc1 = a1 * bump`, `dc2 = a2 * bump` on the annulus.
    pub fn bump_pair(c0: SpeedProfile, r_inner: f64, r_outer: f64, a1: f64, a2: f64, ray_radius: f64) -> Self {
        let layer = RegionSpec::annulus(r_inner, r_outer);
        SplitScenario {
            c0,
            dc1: PhantomSpec::single(layer.clone(), Profile::RadialBump { amplitude: a1 }),
            dc2: PhantomSpec::single(layer.clone(), Profile::RadialBump { amplitude: a2 }),
            layer,
            ray_radius,
            direction_dependent: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.direction_dependent {
            return Err(Error::Parameter(
                "direction-dependent perturbations dc_i(x, v) are future work; \
                 only dc_i(x) is supported"
                    .into(),
            ));
        }
        let RegionSpec::Annulus { r_inner, .. } = self.layer else {
            return Err(Error::Parameter("the perturbed layer must be an annulus".into()));
        };
        self.layer.validate(2)?;
        self.dc1.validate(2)?;
        self.dc2.validate(2)?;
        if !(self.ray_radius > 0.0 && self.ray_radius < r_inner) {
            return Err(Error::Parameter(format!(
                "ray ball radius {} must lie in (0, {r_inner})",
                self.ray_radius
            )));
        }
        if !(self.c0.min() > 0.0) {
            return Err(Error::Parameter("background speed must be positive".into()));
        }
        Ok(())
    }

    /// Multiplies both perturbations by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |p: &PhantomSpec| PhantomSpec {
            items: p
                .items
                .iter()
                .map(|(r, prof)| {
                    let prof = match prof {
                        Profile::Constant(c) => Profile::Constant(c * factor),
                        Profile::RadialBump { amplitude } => Profile::RadialBump {
                            amplitude: amplitude * factor,
                        },
                        Profile::CosineMode { k, amplitude } => Profile::CosineMode {
                            k: *k,
                            amplitude: amplitude * factor,
                        },
                    };
                    (r.clone(), prof)
                })
                .collect(),
        };
        SplitScenario {
            dc1: scale(&self.dc1),
            dc2: scale(&self.dc2),
            ..self.clone()
        }
    }

    fn c0_at(&self, x: &[f64]) -> f64 {
        self.c0.eval((x[0] * x[0] + x[1] * x[1]).sqrt())
    }

    fn dc(&self, spec: &PhantomSpec, x: &[f64]) -> f64 {
        if self.layer.contains(x) {
            spec.eval(x)
        } else {
            0.0
        }
    }

    /// `(dc2 - dc1) / c0^2` at `x`.
    pub fn linearized_density(&self, x: &[f64]) -> f64 {
        let c0 = self.c0_at(x);
        (self.dc(&self.dc2, x) - self.dc(&self.dc1, x)) / (c0 * c0)
    }

    /// `1/c1 - 1/c2` at `x`, with `c_i = c0 + dc_i`.
    pub fn exact_density(&self, x: &[f64]) -> f64 {
        let c0 = self.c0_at(x);
        1.0 / (c0 + self.dc(&self.dc1, x)) - 1.0 / (c0 + self.dc(&self.dc2, x))
    }

    /// Keys: `c0`, `c0_surface`, `r_inner`, `r_outer`, `ray_radius`,
    /// `dc1_amplitude`, `dc2_amplitude`, `dc1_profile`, `dc2_profile`
    /// (`bump`, `constant` or `cosine:K`), `direction_dependent`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let c0: f64 = kv.value_or("c0", 1.0)?;
        let c0 = match kv.parse_value::<f64>("c0_surface")? {
            Some(surface) => SpeedProfile::Linear { center: c0, surface },
            None => SpeedProfile::Constant(c0),
        };
        let r_inner = kv.value_or("r_inner", 0.5)?;
        let r_outer = kv.value_or("r_outer", 0.9)?;
        let layer = RegionSpec::annulus(r_inner, r_outer);
        let profile = |key: &str, amplitude: f64| -> Result<Profile> {
            let name = kv.get(key).unwrap_or("bump");
            parse_profile(name, amplitude)
        };
        let a1 = kv.value_or("dc1_amplitude", 0.0)?;
        let a2 = kv.value_or("dc2_amplitude", 0.02)?;
        let s = SplitScenario {
            c0,
            dc1: PhantomSpec::single(layer.clone(), profile("dc1_profile", a1)?),
            dc2: PhantomSpec::single(layer.clone(), profile("dc2_profile", a2)?),
            layer,
            ray_radius: kv.value_or("ray_radius", 0.2)?,
            direction_dependent: kv.value_or("direction_dependent", false)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub const KEYS: &'static [&'static str] = &[
        "c0",
        "c0_surface",
        "r_inner",
        "r_outer",
        "ray_radius",
        "dc1_amplitude",
        "dc2_amplitude",
        "dc1_profile",
        "dc2_profile",
        "direction_dependent",
    ];
}

/// `bump`, `constant` or `cosine:K`.
pub fn parse_profile(name: &str, amplitude: f64) -> Result<Profile> {
    match name {
        "bump" => Ok(Profile::RadialBump { amplitude }),
        "constant" => Ok(Profile::Constant(amplitude)),
        other => match other.strip_prefix("cosine:").map(str::parse::<u32>) {
            Some(Ok(k)) => Ok(Profile::CosineMode { k, amplitude }),
            _ => Err(Error::Parameter(format!("unknown profile {other}"))),
        },
    }
}

/// Travel-time differences `dt` on the ray family, zero on other bins.
#[derive(Clone, Debug)]
pub struct TravelTimeDiffData {
    pub n: usize,
    pub sinogram: Sinogram,
    pub mask: LineMask,
    /// Non-fatal diagnostics, e.g. perturbations outside the linear regime.
    pub warnings: Vec<String>,
}

/// `dt = X[(dc2 - dc1) / c0^2]` restricted to rays meeting `B(0, ray_radius)`.
pub fn synthesize_splitting(
    s: &SplitScenario,
    n: usize,
    n_theta: usize,
    n_s: usize,
) -> Result<TravelTimeDiffData> {
    s.validate()?;
    let mut warnings = Vec::new();
    let c_min = s.c0.min();
    let peak = |p: &PhantomSpec| {
        rasterize(p, n, 2).map(|f| {
            f.values()
                .iter()
                .zip(0..)
                .filter(|(_, idx)| s.layer.contains(&f.center(*idx)[..2]))
                .fold(0.0_f64, |m, (v, _)| m.max(v.abs()))
        })
    };
    for (name, spec) in [("dc1", &s.dc1), ("dc2", &s.dc2)] {
        let m = peak(spec)?;
        if m > LINEAR_REGIME * c_min {
            let msg = format!(
                "|{name}| reaches {m:.4}, above {LINEAR_REGIME} * min c0 = {:.4}; \
                 the linearization may be inaccurate",
                LINEAR_REGIME * c_min
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let g = GridField::from_fn(2, n, |x| s.linearized_density(x))?;
    let geom = SinogramGeometry::new(n_theta, n_s)?;
    let mask = lines_meeting_region(&geom, n, &RegionSpec::ball(&[0.0, 0.0], s.ray_radius))?;
    let sinogram = xray_forward(&g, &geom)?.masked(&mask)?;
    Ok(TravelTimeDiffData {
        n,
        sinogram,
        mask,
        warnings,
    })
}

/// Recovers `dc2 - dc1` on the layer from `dt`: the support is the layer,
/// the ball inside it is known to be zero, CGLS on the masked data, then
/// multiplication by `c0^2`. The report's error is measured against the
/// sampled `dc2 - dc1`.
pub fn recover_difference(
    data: &TravelTimeDiffData,
    s: &SplitScenario,
    max_iter: usize,
    tol: f64,
) -> Result<(GridField, ReconReport)> {
    s.validate()?;
    let RegionSpec::Annulus { r_inner, .. } = s.layer else {
        unreachable!("validated above");
    };
    let problem = MaskedProblem::from_regions(
        data.n,
        data.sinogram.clone(),
        data.mask.clone(),
        Some(&s.layer),
        Some(&RegionSpec::ball(&[0.0, 0.0], r_inner)),
    )?;
    let (g, mut report) = cgls_solve(&problem, max_iter, tol)?;
    let c0sq = GridField::from_fn(2, data.n, |x| s.c0_at(x).powi(2))?;
    let diff = g.mul(&c0sq)?;
    let truth = GridField::from_fn(2, data.n, |x| s.dc(&s.dc2, x) - s.dc(&s.dc1, x))?;
    if truth.max_abs() > 0.0 {
        report.relative_error = Some(diff.relative_l2_error(&truth)?);
    }
    Ok((diff, report))
}

const RAY_PANELS: usize = 64;
const RAY_ORDER: usize = 10;

/// Integral of `density` along the line `s perp(theta) + t dir(theta)`
/// through the unit disc, by composite Gauss-Legendre quadrature.
pub fn ray_integral<F: Fn(&[f64]) -> f64>(density: F, theta: f64, s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let rule = gauss_legendre(RAY_ORDER);
    let (c, sn) = (theta.cos(), theta.sin());
    let half = (1.0 - s * s).sqrt();
    composite_gauss(
        |t| density(&[-s * sn + t * c, s * c + t * sn]),
        -half,
        half,
        RAY_PANELS,
        &rule,
    )
}

/// Largest `|exact - linearized|` travel-time difference over the rays of
/// `mask`, both integrated by the same ray quadrature.
pub fn linearization_discrepancy(s: &SplitScenario, mask: &LineMask) -> Result<f64> {
    s.validate()?;
    let geom = mask.geometry();
    let mut worst: f64 = 0.0;
    for j in 0..geom.n_theta() {
        for i in 0..geom.n_s() {
            if !mask.get(j, i) {
                continue;
            }
            let (theta, off) = (geom.theta(j), geom.offset(i));
            let exact = ray_integral(|x| s.exact_density(x), theta, off);
            let lin = ray_integral(|x| s.linearized_density(x), theta, off);
            worst = worst.max((exact - lin).abs());
        }
    }
    Ok(worst)
}

/// The half-local-data problem for receivers on `arc` (a disc segment read
/// as its boundary arc): rays through the arc, the segment cut off by its
/// chord known to be zero, the rest of the unit disc unknown. Arcs of
/// half-width `>= pi/2` get no known-zero region. Returns the problem
/// (with ground truth attached) and the ground truth.
pub fn half_local_problem(
    arc: &RegionSpec,
    phantom: &PhantomSpec,
    n: usize,
    n_theta: usize,
    n_s: usize,
) -> Result<(MaskedProblem, GridField)> {
    let RegionSpec::DiscSegment { arc_half_width, .. } = arc else {
        return Err(Error::Parameter("the receiver arc must be a disc segment".into()));
    };
    arc.validate(2)?;
    let disc = RegionSpec::ball(&[0.0, 0.0], 1.0);
    let truth = rasterize(phantom, n, 2)?;
    for (idx, v) in truth.values().iter().enumerate() {
        if *v != 0.0 && !disc.contains(&truth.center(idx)[..2]) {
            return Err(Error::Precondition("phantom is not supported in the unit disc".into()));
        }
    }
    let known_zero = if *arc_half_width < std::f64::consts::FRAC_PI_2 {
        helgason_step(&disc, arc)?
    } else {
        None
    };
    let geom = SinogramGeometry::new(n_theta, n_s)?;
    let mask = lines_meeting_region(&geom, n, arc)?;
    let data = xray_forward(&truth, &geom)?;
    let problem =
        MaskedProblem::from_regions(n, data, mask, Some(&disc), known_zero.as_ref())?
            .with_truth(truth.clone())?;
    Ok((problem, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator_scenario() -> SplitScenario {
        let layer = RegionSpec::annulus(0.5, 0.9);
        SplitScenario {
            c0: SpeedProfile::Constant(1.0),
            dc1: PhantomSpec::new(),
            dc2: PhantomSpec::single(layer.clone(), Profile::Constant(1.0)),
            layer,
            ray_radius: 0.2,
            direction_dependent: false,
        }
    }

    #[test]
    fn central_ray_crosses_layer_twice() {
        let s = indicator_scenario();
        let n = 256;
        let data = synthesize_splitting(&s, n, 8, 363).unwrap();
        assert!(!data.warnings.is_empty());
        let geom = data.sinogram.geometry();
        let centre = geom.n_s() / 2;
        assert!(geom.offset(centre).abs() < 1e-12);
        // the central ray spends 0.4 in the layer on each side of the origin
        let dt = data.sinogram.get(0, centre);
        assert!((dt - 0.8).abs() < 0.01, "{dt}");
        assert!((ray_integral(|x| s.linearized_density(x), 0.3, 0.0) - 0.8).abs() < 1e-2);
    }

    #[test]
    fn identical_perturbations_give_no_data() {
        let s = SplitScenario::bump_pair(SpeedProfile::Constant(1.0), 0.5, 0.9, 0.02, 0.02, 0.2);
        let data = synthesize_splitting(&s, 32, 16, 47).unwrap();
        assert!(data.sinogram.values().iter().all(|v| *v == 0.0));
        assert!(data.warnings.is_empty());
    }

    #[test]
    fn doubling_difference_doubles_data() {
        let s = SplitScenario::bump_pair(SpeedProfile::Constant(1.0), 0.5, 0.9, 0.0, 0.01, 0.2);
        let a = synthesize_splitting(&s, 32, 16, 47).unwrap();
        let b = synthesize_splitting(&s.scaled(2.0), 32, 16, 47).unwrap();
        for (x, y) in a.sinogram.values().iter().zip(b.sinogram.values()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn validation() {
        let mut s = SplitScenario::bump_pair(SpeedProfile::Constant(1.0), 0.5, 0.9, 0.0, 0.01, 0.2);
        s.direction_dependent = true;
        assert!(s.validate().unwrap_err().to_string().contains("future work"));
        let t = SplitScenario::bump_pair(SpeedProfile::Constant(1.0), 0.5, 0.9, 0.0, 0.01, 0.6);
        assert!(t.validate().is_err());
        assert!(parse_profile("cosine:3", 1.0).is_ok());
        assert!(parse_profile("wave", 1.0).is_err());
        let kv = KeyValues::parse("c0=2\nc0_surface=3\ndc2_profile=cosine:2").unwrap();
        let s = SplitScenario::from_key_values(&kv).unwrap();
        assert_eq!(s.c0, SpeedProfile::Linear { center: 2.0, surface: 3.0 });
    }

    #[test]
    fn zero_data_recovers_zero() {
        let s = SplitScenario::bump_pair(SpeedProfile::Constant(1.0), 0.5, 0.9, 0.01, 0.01, 0.2);
        let data = synthesize_splitting(&s, 16, 16, 25).unwrap();
        let (d, _) = recover_difference(&data, &s, 20, 1e-6).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn half_local_rejects_outside_support() {
        let arc = RegionSpec::disc_segment(0.0, 0.4);
        let phantom = PhantomSpec::single(
            RegionSpec::ball(&[0.9, 0.9], 0.3),
            Profile::Constant(1.0),
        );
        assert!(half_local_problem(&arc, &phantom, 16, 16, 25).is_err());
        assert!(half_local_problem(&RegionSpec::annulus(0.1, 0.2), &PhantomSpec::new(), 16, 16, 25).is_err());
    }
}
