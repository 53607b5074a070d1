//! Classical dyadic Green's functions of the electric field.
//!
//! Conventions: natural units (c = ε₀ = 1), `G` solves
//! `∇×∇×G − k²G = I δ(r − r')` with outgoing boundary conditions, and the
//! static kernels returned here are already in coupling form,
//! `λ = ½ [ω² G]_{ω=0}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dyadic33, Vec3};

mod layered;

pub use layered::{
    layered_scattered_g, layered_static_kernel, Layer, LayerStack, Permittivity, SommerfeldSettings, DRUDE_MIN_LOSS,
};

/// `e^{ix}(ix − 1)/x²` split into real and imaginary parts, with a series
/// for the imaginary part at small `x` where the closed form cancels.
fn near_field_factor(x: f64) -> Complex64 {
    let (s, c) = x.sin_cos();
    let re = -(c + x * s) / (x * x);
    let im = if x < 0.5 {
        // Σ_{m≥1} (−1)^m 2m x^{2m−1} / (2m+1)!
        let x2 = x * x;
        let mut term = x; // x^{2m-1} for m = 1
        let mut fact = 6.0; // (2m+1)!
        let mut acc = 0.0;
        for m in 1..=12 {
            let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
            acc += sign * 2.0 * m as f64 * term / fact;
            term *= x2;
            fact *= ((2 * m + 2) * (2 * m + 3)) as f64;
        }
        acc
    } else {
        (x * c - s) / (x * x)
    };
    Complex64::new(re, im)
}

fn transverse_and_longitudinal(n: &Vec3) -> (Dyadic33, Dyadic33) {
    let nn = Dyadic33::outer(n, n);
    let id = Dyadic33::identity();
    (id - nn, id - nn.scale(3.0))
}

/// Free-space Green's function `G₀(r, r', ω)`.
///
/// Rejects `ω = 0` (the near-field term diverges as 1/ω²); static physics is
/// available through [`electrostatic_kernel`].
pub fn free_space_g(r: &Vec3, rp: &Vec3, omega: f64) -> Result<Dyadic33> {
    if omega == 0.0 {
        return Err(Error::UseStaticKernel);
    }
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {omega}")));
    }
    let d = *r - *rp;
    let rho = d.norm();
    let n = d.normalized().ok_or(Error::CoincidentPoints(rho))?;
    let x = omega * rho;
    let (t, l) = transverse_and_longitudinal(&n);
    let far = Complex64::from_polar(1.0, x);
    let near = near_field_factor(x);
    let pref = 1.0 / (4.0 * PI * rho);
    Ok((t.scale_c(far) + l.scale_c(near)).scale(pref))
}

/// `Im G₀(r, r', ω)`, finite also at coincident points where it equals
/// `ω/(6π) I`.
pub fn free_space_im_g(r: &Vec3, rp: &Vec3, omega: f64) -> Result<Dyadic33> {
    let rho = (*r - *rp).norm();
    if rho == 0.0 {
        return Ok(Dyadic33::identity().scale(omega / (6.0 * PI)));
    }
    Ok(free_space_g(r, rp, omega)?.im())
}

/// Static dipole–dipole coupling kernel `½ (3 n⊗n − I) / (4π ρ³)`.
pub fn electrostatic_kernel(r: &Vec3, rp: &Vec3) -> Result<Dyadic33> {
    let d = *r - *rp;
    let rho = d.norm();
    let n = d.normalized().ok_or(Error::CoincidentPoints(rho))?;
    Ok(dipole_field_kernel(&n, rho).scale(0.5))
}

/// Field of a unit static dipole, `(3 n⊗n − I)/(4π ρ³)`.
fn dipole_field_kernel(n: &Vec3, rho: f64) -> Dyadic33 {
    let nn = Dyadic33::outer(n, n);
    (nn.scale(3.0) - Dyadic33::identity()).scale(1.0 / (4.0 * PI * rho.powi(3)))
}

/// A planar mirror `{r : n̂·r = offset}` with static reflection strength `f`.
///
/// `f = 1` is a perfect electric conductor, `f = (ε−1)/(ε+1)` a dielectric
/// half-space in the electrostatic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    pub normal: Vec3,
    pub offset: f64,
    pub strength: f64,
}

impl MirrorSpec {
    /// Mirror in the plane `z = z0`.
    pub fn horizontal(z0: f64, strength: f64) -> Self {
        Self { normal: Vec3::Z, offset: z0, strength }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!("mirror strength must lie in [-1, 1], got {}", self.strength)));
        }
        if self.normal.normalized().is_none() || !self.offset.is_finite() {
            return Err(Error::InvalidParameter("mirror normal must be a finite non-zero vector".into()));
        }
        Ok(())
    }

    fn unit_normal(&self) -> Vec3 {
        self.normal.normalized().unwrap_or(Vec3::Z)
    }

    /// Signed height of `r` above the plane.
    pub fn height(&self, r: &Vec3) -> f64 {
        self.unit_normal().dot(r) - self.offset
    }

    pub fn image(&self, r: &Vec3) -> Vec3 {
        let n = self.unit_normal();
        *r - n * (2.0 * self.height(r))
    }

    /// `f (2 n⊗n − I)`: the image-dipole transformation in lab coordinates.
    pub fn sign_matrix(&self) -> Dyadic33 {
        let n = self.unit_normal();
        (Dyadic33::outer(&n, &n).scale(2.0) - Dyadic33::identity()).scale(self.strength)
    }

    fn check_same_side(&self, r: &Vec3, rp: &Vec3) -> Result<()> {
        let (h, hp) = (self.height(r), self.height(rp));
        if !(h * hp > 0.0) {
            return Err(Error::Geometry(format!(
                "points must lie strictly on the same side of the mirror (heights {h}, {hp})"
            )));
        }
        Ok(())
    }
}

/// Static scattered kernel of a planar mirror via one image dipole:
/// `½ K(r, image(r')) S_f`.
pub fn mirror_static_g(mirror: &MirrorSpec, r: &Vec3, rp: &Vec3) -> Result<Dyadic33> {
    mirror.validate()?;
    mirror.check_same_side(r, rp)?;
    if mirror.strength == 0.0 {
        return Ok(Dyadic33::ZERO);
    }
    let img = mirror.image(rp);
    let d = *r - img;
    let rho = d.norm();
    let n = d.normalized().ok_or(Error::CoincidentPoints(rho))?;
    Ok(dipole_field_kernel(&n, rho).matmul(&mirror.sign_matrix()).scale(0.5))
}

/// An electromagnetic environment described by its Green's function
/// `G = G₀ + G_S`.
pub trait GreensEvaluator: Send + Sync {
    /// Short label for reports.
    fn name(&self) -> &str;

    /// Scattered part `G_S(r, r', ω)` for `ω > 0`. Defined at `r = r'`.
    fn scattered(&self, r: &Vec3, rp: &Vec3, omega: f64) -> Result<Dyadic33>;

    /// Static scattered kernel `½ [ω² G_S(r, r', ω)]_{ω=0}`.
    fn scattered_static(&self, r: &Vec3, rp: &Vec3) -> Result<Dyadic33>;

    /// Whether [`Self::scattered_static`] is a closed form rather than an
    /// extrapolation from finite frequencies.
    fn has_analytic_static(&self) -> bool;

    /// Full `G(r, r', ω)`; requires distinct points.
    fn total(&self, r: &Vec3, rp: &Vec3, omega: f64) -> Result<Dyadic33> {
        Ok(free_space_g(r, rp, omega)? + self.scattered(r, rp, omega)?)
    }

    /// Full static kernel `½ [ω² G]_{ω=0}`; requires distinct points.
    fn total_static(&self, r: &Vec3, rp: &Vec3) -> Result<Dyadic33> {
        Ok(electrostatic_kernel(r, rp)? + self.scattered_static(r, rp)?)
    }
}

/// Vacuum without any scatterer.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeSpace;

impl GreensEvaluator for FreeSpace {
    fn name(&self) -> &str {
        "free_space"
    }
    fn scattered(&self, _r: &Vec3, _rp: &Vec3, omega: f64) -> Result<Dyadic33> {
        if omega == 0.0 {
            return Err(Error::UseStaticKernel);
        }
        Ok(Dyadic33::ZERO)
    }
    fn scattered_static(&self, _r: &Vec3, _rp: &Vec3) -> Result<Dyadic33> {
        Ok(Dyadic33::ZERO)
    }
    fn has_analytic_static(&self) -> bool {
        true
    }
}

/// A single planar mirror treated by a frequency-independent image dipole,
/// `G_S(r, r', ω) = G₀(r, image(r'), ω) S_f`.
///
/// Exact at all frequencies for `f = ±1` (perfect electric or magnetic
/// conductor); for other strengths only the static limit is physical.
#[derive(Debug, Clone, Copy)]
pub struct ImageMirror {
    pub mirror: MirrorSpec,
}

impl ImageMirror {
    pub fn new(mirror: MirrorSpec) -> Result<Self> {
        mirror.validate()?;
        Ok(Self { mirror })
    }
}

impl GreensEvaluator for ImageMirror {
    fn name(&self) -> &str {
        "image_mirror"
    }
    fn scattered(&self, r: &Vec3, rp: &Vec3, omega: f64) -> Result<Dyadic33> {
        self.mirror.check_same_side(r, rp)?;
        let img = self.mirror.image(rp);
        Ok(free_space_g(r, &img, omega)?.matmul(&self.mirror.sign_matrix()))
    }
    fn scattered_static(&self, r: &Vec3, rp: &Vec3) -> Result<Dyadic33> {
        mirror_static_g(&self.mirror, r, rp)
    }
    fn has_analytic_static(&self) -> bool {
        true
    }
}

/// Planar multilayer environment evaluated by Sommerfeld integration.
#[derive(Debug, Clone)]
pub struct Layered {
    pub stack: LayerStack,
    pub settings: SommerfeldSettings,
}

impl Layered {
    pub fn new(stack: LayerStack) -> Result<Self> {
        stack.validate()?;
        Ok(Self { stack, settings: SommerfeldSettings::default() })
    }

    pub fn with_settings(mut self, settings: SommerfeldSettings) -> Self {
        self.settings = settings;
        self
    }
}

impl GreensEvaluator for Layered {
    fn name(&self) -> &str {
        "layered"
    }
    fn scattered(&self, r: &Vec3, rp: &Vec3, omega: f64) -> Result<Dyadic33> {
        layered_scattered_g(&self.stack, r, rp, omega, &self.settings)
    }
    fn scattered_static(&self, r: &Vec3, rp: &Vec3) -> Result<Dyadic33> {
        layered_static_kernel(&self.stack, r, rp, &self.settings)
    }
    fn has_analytic_static(&self) -> bool {
        false
    }
}
