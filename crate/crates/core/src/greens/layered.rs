//! Scattered Green's function of a planar multilayer.
//!
//! The reflected field inside the emitter layer is written as a Sommerfeld
//! integral over the in-plane wavenumber `q`:
//!
//! ```text
//! G_S = (i / 8π²) ∫₀^∞ dq (q / k_z) Σ_{pol} Σ_{a,b=±} T^{pol}_{ab}(q) ∫dα e^{i q·ρ} v̂_a ⊗ v̂_b
//! ```
//!
//! where `a` (`b`) is the propagation direction of the observed (emitted)
//! plane wave, `v̂` is `ŝ` for TE and `p̂_± = (±k_z q̂ − q ẑ)/k` for TM, and
//! `T` collects the multiple reflections between the generalized reflection
//! coefficients below and above the emitter layer. The angular integral is
//! done analytically (Bessel functions `J₀, J₁, J₂`).
//!
//! The `q` path is split at the light line: `q = k sin θ` on the propagating
//! part and `q = k cosh t` on the evanescent part, which removes the
//! `1/k_z` branch-point singularity. Near-real poles (guided modes, surface
//! plasmons) are located by scanning a pole indicator and inserted as
//! quadrature breakpoints.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dyadic33, Vec3};
use crate::quad::{integrate_with_breakpoints, QuadSettings};

/// Minimum Drude damping as a fraction of the plasma frequency.
pub const DRUDE_MIN_LOSS: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative permittivity model of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Permittivity {
    Constant {
        eps: f64,
    },
    Complex {
        re: f64,
        im: f64,
    },
    /// `ε(ω) = 1 − ω_p² / (ω² + iγω)`
    Drude {
        omega_p: f64,
        gamma: f64,
    },
}

impl Permittivity {
    pub const VACUUM: Permittivity = Permittivity::Constant { eps: 1.0 };

    pub fn at(&self, omega: f64) -> Complex64 {
        match *self {
            Permittivity::Constant { eps } => eps.into(),
            Permittivity::Complex { re, im } => Complex64::new(re, im),
            Permittivity::Drude { omega_p, gamma } => {
                let g = gamma.max(DRUDE_MIN_LOSS * omega_p);
                ONE - omega_p * omega_p / Complex64::new(omega * omega, g * omega)
            }
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self, Permittivity::Constant { eps } if *eps == 1.0)
            || matches!(self, Permittivity::Complex { re, im } if *re == 1.0 && *im == 0.0)
            || matches!(self, Permittivity::Drude { omega_p, .. } if *omega_p == 0.0)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Permittivity::Constant { eps } if !eps.is_finite() || eps == 0.0 => {
                Err(Error::InvalidParameter(format!("permittivity must be finite and non-zero, got {eps}")))
            }
            Permittivity::Complex { re, im } if !re.is_finite() || !(im >= 0.0) || !im.is_finite() => Err(
                Error::InvalidParameter(format!("complex permittivity needs finite parts and Im ≥ 0, got {re}+{im}i")),
            ),
            Permittivity::Drude { omega_p, gamma } if !(omega_p >= 0.0) || !(gamma >= 0.0) => Err(
                Error::InvalidParameter(format!("Drude parameters must be non-negative, got ω_p={omega_p}, γ={gamma}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub permittivity: Permittivity,
    /// `None` for the two outermost, semi-infinite layers.
    pub thickness: Option<f64>,
}

impl Layer {
    pub fn semi_infinite(permittivity: Permittivity) -> Self {
        Self { permittivity, thickness: None }
    }

    pub fn finite(permittivity: Permittivity, thickness: f64) -> Self {
        Self { permittivity, thickness: Some(thickness) }
    }
}

/// Layers ordered along +z. Interface `l` separates layer `l` from `l + 1`;
/// interface 0 sits at `first_interface`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    pub first_interface: f64,
    pub emitter_layer: usize,
}

impl LayerStack {
    /// Two vacuum half-spaces: no scattering at all.
    pub fn vacuum() -> Self {
        Self {
            layers: vec![Layer::semi_infinite(Permittivity::VACUUM), Layer::semi_infinite(Permittivity::VACUUM)],
            first_interface: 0.0,
            emitter_layer: 1,
        }
    }

    /// Substrate filling `z < z0`, emitters in vacuum above it.
    pub fn half_space(substrate: Permittivity, z0: f64) -> Self {
        Self {
            layers: vec![Layer::semi_infinite(substrate), Layer::semi_infinite(Permittivity::VACUUM)],
            first_interface: z0,
            emitter_layer: 1,
        }
    }

    /// Vacuum gap of width `gap` between two half-spaces, bottom interface at `z0`.
    pub fn cavity(bottom: Permittivity, top: Permittivity, z0: f64, gap: f64) -> Self {
        Self {
            layers: vec![
                Layer::semi_infinite(bottom),
                Layer::finite(Permittivity::VACUUM, gap),
                Layer::semi_infinite(top),
            ],
            first_interface: z0,
            emitter_layer: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layers.len();
        if n < 2 {
            return Err(Error::InvalidParameter("layer stack needs at least two layers".into()));
        }
        if self.emitter_layer >= n {
            return Err(Error::InvalidParameter(format!(
                "emitter layer {} out of range for {n} layers",
                self.emitter_layer
            )));
        }
        if !self.layers[self.emitter_layer].permittivity.is_vacuum() {
            return Err(Error::InvalidParameter("emitter layer must be vacuum".into()));
        }
        if !self.first_interface.is_finite() {
            return Err(Error::InvalidParameter("first interface position must be finite".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.permittivity.validate()?;
            if l > 0 && l < n - 1 {
                match layer.thickness {
                    Some(t) if t > 0.0 && t.is_finite() => {}
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "interior layer {l} needs a positive thickness, got {other:?}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// z positions of the `n − 1` interfaces.
    pub fn interfaces(&self) -> Vec<f64> {
        let n = self.layers.len();
        let mut z = Vec::with_capacity(n.saturating_sub(1));
        let mut cur = self.first_interface;
        z.push(cur);
        for layer in &self.layers[1..n - 1] {
            cur += layer.thickness.unwrap_or(0.0);
            z.push(cur);
        }
        z
    }

    /// Lower and upper bounding interfaces of the emitter layer.
    pub fn emitter_bounds(&self) -> (Option<f64>, Option<f64>) {
        let z = self.interfaces();
        let e = self.emitter_layer;
        let lo = (e > 0).then(|| z[e - 1]);
        let hi = (e < self.layers.len() - 1).then(|| z[e]);
        (lo, hi)
    }

    pub fn check_inside(&self, r: &Vec3) -> Result<()> {
        let (lo, hi) = self.emitter_bounds();
        let ok = lo.is_none_or(|zb| r.z > zb) && hi.is_none_or(|zt| r.z < zt) && r.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!("point z = {} lies outside the emitter layer ({lo:?}, {hi:?})", r.z)))
        }
    }

    /// Smallest distance from `r` to a bounding interface of the emitter layer.
    fn clearance(&self, r: &Vec3) -> f64 {
        let (lo, hi) = self.emitter_bounds();
        let a = lo.map_or(f64::INFINITY, |zb| r.z - zb);
        let b = hi.map_or(f64::INFINITY, |zt| zt - r.z);
        a.min(b)
    }
}

/// Numerical controls of the Sommerfeld integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SommerfeldSettings {
    pub quad: QuadSettings,
    /// Grid points per region used to locate near-real poles.
    pub scan_points: usize,
    /// The evanescent tail is cut where `e^{−q D}` drops below `e^{−decay}`,
    /// `D` being the shortest reflected path.
    pub decay: f64,
    /// Static limits are extrapolated from `ω = static_ratio / d`, with `d`
    /// the smallest emitter–interface distance.
    pub static_ratio: f64,
}

impl Default for SommerfeldSettings {
    fn default() -> Self {
        Self {
            quad: QuadSettings { rel_tol: 1e-8, abs_tol: 1e-14, max_subdivisions: 6000 },
            scan_points: 256,
            decay: 46.0,
            static_ratio: 1e-4,
        }
    }
}

/// Principal square root with `Im ≥ 0` (decaying / outgoing branch).
fn kz_branch(arg: Complex64) -> Complex64 {
    let s = arg.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Point on the integration path: in-plane wavenumber, vacuum `k_z`, its
/// square computed without cancellation, and the Jacobian `q dq / k_z`.
#[derive(Debug, Clone, Copy)]
struct PathPoint {
    q: f64,
    kz0: Complex64,
    kz0_sq: Complex64,
    weight: Complex64,
}

/// TE and TM quantities at one `q`.
#[derive(Debug, Clone, Copy)]
struct Reflections {
    below: [Complex64; 2],
    above: [Complex64; 2],
}

struct Spectral<'a> {
    stack: &'a LayerStack,
    eps: Vec<Complex64>,
    k: f64,
    zb: Option<f64>,
    zt: Option<f64>,
}

impl<'a> Spectral<'a> {
    fn new(stack: &'a LayerStack, k: f64) -> Self {
        let eps = stack.layers.iter().map(|l| l.permittivity.at(k)).collect();
        let (zb, zt) = stack.emitter_bounds();
        Self { stack, eps, k, zb, zt }
    }

    fn path_point(&self, u: f64) -> PathPoint {
        let k = self.k;
        if u <= FRAC_PI_2 {
            let (s, c) = u.sin_cos();
            PathPoint { q: k * s, kz0: (k * c).into(), kz0_sq: (k * k * c * c).into(), weight: (k * s).into() }
        } else {
            let t = u - FRAC_PI_2;
            let (sh, ch) = (t.sinh(), t.cosh());
            PathPoint {
                q: k * ch,
                kz0: Complex64::new(0.0, k * sh),
                kz0_sq: (-(k * sh) * (k * sh)).into(),
                weight: Complex64::new(0.0, -k * ch),
            }
        }
    }

    fn kz(&self, l: usize, p: &PathPoint) -> Complex64 {
        if self.eps[l] == ONE {
            p.kz0
        } else {
            kz_branch((self.eps[l] - ONE) * self.k * self.k + p.kz0_sq)
        }
    }

    /// Interface coefficients from layer `a` into layer `b`, `[TE, TM]`;
    /// TM uses the magnetic-field convention so that `r_ab = −r_ba`.
    fn fresnel(&self, a: usize, b: usize, kz: &[Complex64]) -> [Complex64; 2] {
        if self.eps[a] == self.eps[b] {
            return [ZERO, ZERO];
        }
        let (ka, kb) = (kz[a], kz[b]);
        let (ea, eb) = (self.eps[a], self.eps[b]);
        let rs = (ka - kb) / (ka + kb);
        let rp = (eb * ka - ea * kb) / (eb * ka + ea * kb);
        [rs, rp]
    }

    fn reflections(&self, p: &PathPoint) -> Reflections {
        let n = self.stack.layers.len();
        let e = self.stack.emitter_layer;
        let kz: Vec<Complex64> = (0..n).map(|l| self.kz(l, p)).collect();
        let thickness = |l: usize| self.stack.layers[l].thickness.unwrap_or(0.0);

        let mut below = [ZERO, ZERO];
        for l in 1..=e {
            let r = self.fresnel(l, l - 1, &kz);
            if l - 1 == 0 {
                below = r;
            } else {
                let ph = (2.0 * I * kz[l - 1] * thickness(l - 1)).exp();
                for pol in 0..2 {
                    below[pol] = (r[pol] + below[pol] * ph) / (ONE + r[pol] * below[pol] * ph);
                }
            }
        }
        let mut above = [ZERO, ZERO];
        for l in (e..n - 1).rev() {
            let r = self.fresnel(l, l + 1, &kz);
            if l + 1 == n - 1 {
                above = r;
            } else {
                let ph = (2.0 * I * kz[l + 1] * thickness(l + 1)).exp();
                for pol in 0..2 {
                    above[pol] = (r[pol] + above[pol] * ph) / (ONE + r[pol] * above[pol] * ph);
                }
            }
        }
        Reflections { below, above }
    }

    /// Multiple-reflection amplitudes `[T₊₊, T₊₋, T₋₊, T₋₋]` for one polarization.
    fn amplitudes(&self, kz0: Complex64, rb: Complex64, rt: Complex64, z: f64, zp: f64) -> [Complex64; 4] {
        let ph = |d: f64| (I * kz0 * d).exp();
        match (self.zb, self.zt) {
            (Some(zb), Some(zt)) => {
                let gap = zt - zb;
                let inv = ONE / (ONE - rb * rt * ph(2.0 * gap));
                [
                    rb * rt * ph(gap + (zt - zp) + (z - zb)) * inv,
                    rb * ph((zp - zb) + (z - zb)) * inv,
                    rt * ph((zt - zp) + (zt - z)) * inv,
                    rt * rb * ph(gap + (zp - zb) + (zt - z)) * inv,
                ]
            }
            (Some(zb), None) => [ZERO, rb * ph(z + zp - 2.0 * zb), ZERO, ZERO],
            (None, Some(zt)) => [ZERO, ZERO, rt * ph(2.0 * zt - z - zp), ZERO],
            (None, None) => [ZERO; 4],
        }
    }

    /// Sum over polarizations of `(1 + |R_below| + |R_above|)/|1 − R_below R_above e^{2ik_z L}|`.
    fn pole_indicator(&self, u: f64) -> f64 {
        let p = self.path_point(u);
        let refl = self.reflections(&p);
        let mut acc = 0.0;
        for pol in 0..2 {
            let (rb, rt) = (refl.below[pol], refl.above[pol]);
            let denom = match (self.zb, self.zt) {
                (Some(zb), Some(zt)) => (ONE - rb * rt * (2.0 * I * p.kz0 * (zt - zb)).exp()).norm(),
                _ => 1.0,
            };
            acc += (1.0 + rb.norm() + rt.norm()) / denom.max(f64::MIN_POSITIVE);
        }
        acc
    }

    fn integrand(&self, u: f64, geo: &PairGeometry) -> Dyadic33 {
        let p = self.path_point(u);
        let refl = self.reflections(&p);
        let k = self.k;
        let ts = self.amplitudes(p.kz0, refl.below[0], refl.above[0], geo.z, geo.zp);
        let tp = self.amplitudes(p.kz0, refl.below[1], refl.above[1], geo.z, geo.zp);
        let [tpp, tpm, tmp, tmm] = tp;
        let s_sum = ts.iter().sum::<Complex64>();
        let kk = k * k;
        let p_qq = (tpp - tpm - tmp + tmm) * p.kz0 * p.kz0 / kk;
        let p_qz = -(tpp + tpm - tmp - tmm) * p.kz0 * p.q / kk;
        let p_zq = -(tpp - tpm + tmp - tmm) * p.kz0 * p.q / kk;
        let p_zz = (tpp + tpm + tmp + tmm) * p.q * p.q / kk;

        let x = p.q * geo.rho;
        let (j0, j1, j2) = if x == 0.0 { (1.0, 0.0, 0.0) } else { (libm::j0(x), libm::j1(x), libm::jn(2, x)) };
        let i_ss = PI * (j0 + j2 * geo.cos2);
        let i_cc = PI * (j0 - j2 * geo.cos2);
        let i_sc = -PI * j2 * geo.sin2;
        let i_0 = 2.0 * PI * j0;
        let i_c = I * (2.0 * PI * j1 * geo.cos1);
        let i_s = I * (2.0 * PI * j1 * geo.sin1);

        let mut m = Dyadic33::ZERO;
        m[(0, 0)] = s_sum * i_ss + p_qq * i_cc;
        m[(1, 1)] = s_sum * i_cc + p_qq * i_ss;
        m[(0, 1)] = (p_qq - s_sum) * i_sc;
        m[(1, 0)] = m[(0, 1)];
        m[(0, 2)] = p_qz * i_c;
        m[(1, 2)] = p_qz * i_s;
        m[(2, 0)] = p_zq * i_c;
        m[(2, 1)] = p_zq * i_s;
        m[(2, 2)] = p_zz * i_0;
        m.scale_c(p.weight * I / (8.0 * PI * PI))
    }
}

struct PairGeometry {
    rho: f64,
    cos1: f64,
    sin1: f64,
    cos2: f64,
    sin2: f64,
    z: f64,
    zp: f64,
}

impl PairGeometry {
    fn new(r: &Vec3, rp: &Vec3) -> Self {
        let (dx, dy) = (r.x - rp.x, r.y - rp.y);
        let rho = dx.hypot(dy);
        let phi = if rho > 0.0 { dy.atan2(dx) } else { 0.0 };
        Self {
            rho,
            cos1: phi.cos(),
            sin1: phi.sin(),
            cos2: (2.0 * phi).cos(),
            sin2: (2.0 * phi).sin(),
            z: r.z,
            zp: rp.z,
        }
    }
}

/// Maximize a unimodal function on `[a, b]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..90 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Scattered part `G_S(r, r', ω)` of a planar multilayer for `ω > 0`.
pub fn layered_scattered_g(
    stack: &LayerStack,
    r: &Vec3,
    rp: &Vec3,
    omega: f64,
    settings: &SommerfeldSettings,
) -> Result<Dyadic33> {
    stack.validate()?;
    stack.check_inside(r)?;
    stack.check_inside(rp)?;
    if omega == 0.0 {
        return Err(Error::UseStaticKernel);
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {omega}")));
    }
    if stack.layers.iter().all(|l| l.permittivity.is_vacuum()) {
        return Ok(Dyadic33::ZERO);
    }
    let sp = Spectral::new(stack, omega);
    let geo = PairGeometry::new(r, rp);

    let mut decay_len = f64::INFINITY;
    if let Some(zb) = sp.zb {
        decay_len = decay_len.min(r.z + rp.z - 2.0 * zb);
    }
    if let Some(zt) = sp.zt {
        decay_len = decay_len.min(2.0 * zt - r.z - rp.z);
    }
    let q_max = omega + settings.decay / decay_len;
    let t_max = (q_max / omega).acosh().max(1.0);
    let u_end = FRAC_PI_2 + t_max;

    // Pole scan: grids refined towards the light line from both sides.
    let n = settings.scan_points.max(8);
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| {
            let s = 1.0 - i as f64 / n as f64;
            FRAC_PI_2 * (1.0 - s * s)
        })
        .collect();
    grid.extend((1..=2 * n).map(|i| {
        let s = i as f64 / (2 * n) as f64;
        FRAC_PI_2 + t_max * s * s
    }));
    let ind: Vec<f64> = grid.iter().map(|&u| sp.pole_indicator(u)).collect();
    let mut breaks = vec![0.0, FRAC_PI_2, u_end];
    for i in 1..grid.len() - 1 {
        if ind[i] > ind[i - 1] && ind[i] > ind[i + 1] {
            let (a, b) = (grid[i - 1], grid[i + 1]);
            // Keep each peak on one side of the light line.
            let (a, b) = if a < FRAC_PI_2 && b > FRAC_PI_2 {
                if grid[i] <= FRAC_PI_2 {
                    (a, FRAC_PI_2)
                } else {
                    (FRAC_PI_2, b)
                }
            } else {
                (a, b)
            };
            breaks.push(golden_max(|u| sp.pole_indicator(u), a, b));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let res = integrate_with_breakpoints(|u| sp.integrand(u, &geo), &breaks, &settings.quad)?;
    Ok(res.value)
}

/// Static scattered kernel `½ [ω² G_S]_{ω=0}` of a planar multilayer,
/// Richardson-extrapolated from `ω` and `2ω` with `ω = static_ratio / d`.
pub fn layered_static_kernel(
    stack: &LayerStack,
    r: &Vec3,
    rp: &Vec3,
    settings: &SommerfeldSettings,
) -> Result<Dyadic33> {
    stack.validate()?;
    stack.check_inside(r)?;
    stack.check_inside(rp)?;
    let d = stack.clearance(r).min(stack.clearance(rp));
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::StaticLimit("no interface bounds the emitter layer".into()));
    }
    let w1 = settings.static_ratio / d;
    let eval = |w: f64| -> Result<Dyadic33> {
        let g = layered_scattered_g(stack, r, rp, w, settings)?;
        Ok(g.scale(0.5 * w * w))
    };
    let f1 = eval(w1)?;
    let f2 = eval(2.0 * w1)?;
    Ok((f1.scale(4.0) - f2).scale(1.0 / 3.0).re())
}
