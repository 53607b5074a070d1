//! Shared geometry and tensor types.
//!
//! Everything is expressed in natural units with ħ = c = ε₀ = 1. A
//! [`UnitSystem`] carries the conversion factors for callers that work in
//! other units.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the imaginary part of a coupling block before it is
/// rejected by [`interaction_energy`].
pub const IMAG_TOLERANCE: f64 = 1e-12;

/// Real Cartesian vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| *self * (1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_complex(&self) -> CVec3 {
        CVec3::from_real(*self)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Complex Cartesian vector, used for mode fields and mediator dipoles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CVec3(pub [Complex64; 3]);

impl CVec3 {
    pub const ZERO: CVec3 = CVec3([Complex64::new(0.0, 0.0); 3]);

    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        Self([x, y, z])
    }

    pub fn from_real(v: Vec3) -> Self {
        Self([v.x.into(), v.y.into(), v.z.into()])
    }

    pub fn conj(&self) -> CVec3 {
        CVec3(self.0.map(|c| c.conj()))
    }

    /// Bilinear product `Σ a_k b_k` (no conjugation).
    pub fn dot(&self, other: &CVec3) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> CVec3 {
        CVec3(self.0.map(|c| c * s))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Index<usize> for CVec3 {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Dense 3×3 complex tensor indexed by Cartesian pairs `(k, k')`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dyadic33(pub [[Complex64; 3]; 3]);

impl Dyadic33 {
    pub const ZERO: Dyadic33 = Dyadic33([[Complex64::new(0.0, 0.0); 3]; 3]);

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        let mut d = Self::ZERO;
        d.0[0][0] = a.into();
        d.0[1][1] = b.into();
        d.0[2][2] = c.into();
        d
    }

    pub fn from_real(m: [[f64; 3]; 3]) -> Self {
        Self(m.map(|row| row.map(Complex64::from)))
    }

    /// Real dyadic product `a ⊗ b`.
    pub fn outer(a: &Vec3, b: &Vec3) -> Self {
        let (a, b) = (a.to_array(), b.to_array());
        Self::from_real(std::array::from_fn(|i| std::array::from_fn(|j| a[i] * b[j])))
    }

    /// Complex dyadic product `a ⊗ b` (no conjugation).
    pub fn outer_c(a: &CVec3, b: &CVec3) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| a.0[i] * b.0[j])))
    }

    pub fn transpose(&self) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i])))
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|row| row.map(|c| c.conj())))
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn re(&self) -> Self {
        Self(self.0.map(|row| row.map(|c| Complex64::from(c.re))))
    }

    pub fn im(&self) -> Self {
        Self(self.0.map(|row| row.map(|c| Complex64::from(c.im))))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|c| c * s)))
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        Self(self.0.map(|row| row.map(|c| c * s)))
    }

    pub fn matmul(&self, o: &Dyadic33) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum())))
    }

    pub fn apply(&self, v: &CVec3) -> CVec3 {
        CVec3(std::array::from_fn(|i| (0..3).map(|k| self.0[i][k] * v.0[k]).sum()))
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Bilinear contraction `aᵀ · self · b` (no conjugation).
    pub fn contract(&self, a: &CVec3, b: &CVec3) -> Complex64 {
        a.dot(&self.apply(b))
    }

    /// Frobenius distance to `other` divided by the norm of `other`.
    /// Falls back to the absolute distance when `other` vanishes.
    pub fn rel_diff(&self, other: &Dyadic33) -> f64 {
        let d = (*self - *other).norm();
        let n = other.norm();
        if n > 0.0 {
            d / n
        } else {
            d
        }
    }

    /// Largest entrywise relative deviation from `reference`, taken over the
    /// entries of `reference` whose magnitude exceeds `1e-12 · max|reference|`.
    pub fn max_entry_rel_diff(&self, reference: &Dyadic33) -> f64 {
        let floor = 1e-12 * reference.max_abs();
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let r = reference.0[i][j].norm();
                if r > floor {
                    worst = worst.max((self.0[i][j] - reference.0[i][j]).norm() / r);
                }
            }
        }
        worst
    }

    /// Rotate the tensor by `R · self · Rᵀ`.
    pub fn rotated(&self, rot: &Rotation) -> Self {
        let r = Dyadic33::from_real(rot.0);
        r.matmul(self).matmul(&r.transpose())
    }
}

impl Add for Dyadic33 {
    type Output = Dyadic33;
    fn add(self, o: Dyadic33) -> Dyadic33 {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] + o.0[i][j])))
    }
}

impl AddAssign for Dyadic33 {
    fn add_assign(&mut self, o: Dyadic33) {
        *self = *self + o;
    }
}

impl Sub for Dyadic33 {
    type Output = Dyadic33;
    fn sub(self, o: Dyadic33) -> Dyadic33 {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] - o.0[i][j])))
    }
}

impl Neg for Dyadic33 {
    type Output = Dyadic33;
    fn neg(self) -> Dyadic33 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Dyadic33 {
    type Output = Dyadic33;
    fn mul(self, s: f64) -> Dyadic33 {
        self.scale(s)
    }
}

impl Index<(usize, usize)> for Dyadic33 {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Dyadic33 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.0[i][j]
    }
}

/// Proper orthogonal 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation whose third row is `n`, i.e. mapping `n` onto ẑ.
    pub fn to_z(n: &Vec3) -> Option<Self> {
        let n = n.normalized()?;
        let helper = if n.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let u = n.cross(&helper).normalized()?;
        let v = n.cross(&u);
        Some(Self([u.to_array(), v.to_array(), n.to_array()]))
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i])))
    }
}

/// A point dipole emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub position: Vec3,
    pub dipole: Vec3,
}

impl Emitter {
    pub fn new(position: Vec3, dipole: Vec3) -> Self {
        Self { position, dipole }
    }
}

/// Check that every pair of emitters is separated by a positive distance.
/// Returns the first offending pair of indices.
pub fn check_distinct(emitters: &[Emitter]) -> std::result::Result<(), (usize, usize)> {
    for i in 0..emitters.len() {
        for j in i + 1..emitters.len() {
            if (emitters[i].position - emitters[j].position).norm() <= 0.0 {
                return Err((i, j));
            }
        }
    }
    Ok(())
}

/// Conversion factors between caller units and natural units (ħ = c = ε₀ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar_scale: f64,
    pub c_scale: f64,
    pub eps0_scale: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self { hbar_scale: 1.0, c_scale: 1.0, eps0_scale: 1.0 }
    }
}

impl UnitSystem {
    pub fn new(hbar_scale: f64, c_scale: f64, eps0_scale: f64) -> Result<Self> {
        let u = Self { hbar_scale, c_scale, eps0_scale };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar_scale", self.hbar_scale), ("c_scale", self.c_scale), ("eps0_scale", self.eps0_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Angular frequency in caller units to the natural wavenumber ω/c.
    pub fn frequency_to_natural(&self, omega: f64) -> f64 {
        omega / self.c_scale
    }

    pub fn frequency_from_natural(&self, k: f64) -> f64 {
        k * self.c_scale
    }

    /// Natural-unit coupling kernel (∝ 1/ε₀ρ³) to caller units.
    pub fn coupling_from_natural(&self, lambda: f64) -> f64 {
        lambda / self.eps0_scale
    }

    /// Natural-unit energy ħω to caller units.
    pub fn energy_from_natural(&self, e: f64) -> f64 {
        e * self.hbar_scale
    }
}

/// Contraction `μ_i · Re(λ) · μ_j` of a coupling block with two real dipoles.
///
/// The block must be real up to [`IMAG_TOLERANCE`] relative to its norm.
pub fn interaction_energy(mu_i: &Vec3, lambda_block: &Dyadic33, mu_j: &Vec3) -> Result<f64> {
    let norm = lambda_block.norm();
    let imag = lambda_block.im().norm();
    if imag > IMAG_TOLERANCE * norm {
        return Err(Error::InvalidCoupling(imag / norm));
    }
    let (a, b) = (mu_i.to_array(), mu_j.to_array());
    let t = |k: usize, kp: usize| lambda_block.0[k][kp].re * (a[k] * b[kp]);
    // Diagonal first, then symmetric pairs, so that swapping the dipoles and
    // transposing the block reproduces the result bit for bit.
    let acc = t(0, 0) + t(1, 1) + t(2, 2) + (t(0, 1) + t(1, 0)) + (t(0, 2) + t(2, 0)) + (t(1, 2) + t(2, 1));
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::electrostatic_kernel;
    use proptest::prelude::*;

    #[test]
    fn identity_contraction() {
        let e = interaction_energy(&Vec3::X, &Dyadic33::diag(1.0, 0.0, 0.0), &Vec3::X).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn contraction_with_static_kernel() {
        let k = electrostatic_kernel(&Vec3::Z, &Vec3::ZERO).unwrap();
        let zz = interaction_energy(&Vec3::Z, &k, &Vec3::Z).unwrap();
        assert!((zz - 2.0 / (8.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((zz - 0.0795775).abs() < 1e-7);
        let xz = interaction_energy(&Vec3::X, &k, &Vec3::Z).unwrap();
        assert_eq!(xz, 0.0);
    }

    #[test]
    fn imaginary_block_is_rejected() {
        let mut l = Dyadic33::diag(1.0, 1.0, 1.0);
        l[(0, 1)] = Complex64::new(0.0, 1e-6);
        assert!(matches!(interaction_energy(&Vec3::X, &l, &Vec3::Y), Err(Error::InvalidCoupling(_))));
        l[(0, 1)] = Complex64::new(0.0, 1e-14);
        assert!(interaction_energy(&Vec3::X, &l, &Vec3::Y).is_ok());
    }

    #[test]
    fn rotation_maps_normal_to_z() {
        let n = Vec3::new(1.0, -2.0, 0.5).normalized().unwrap();
        let r = Rotation::to_z(&n).unwrap();
        let m = r.apply(&n);
        assert!((m - Vec3::Z).norm() < 1e-15);
        let rt = r.transpose();
        let back = rt.apply(&r.apply(&Vec3::new(0.3, 0.1, -0.7)));
        assert!((back - Vec3::new(0.3, 0.1, -0.7)).norm() < 1e-15);
    }

    #[test]
    fn unit_system_rejects_nonpositive_scale() {
        assert!(UnitSystem::new(1.0, 0.0, 1.0).is_err());
        assert!(UnitSystem::new(1.0, 3.0, 2.0).is_ok());
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn real_dyadic() -> impl Strategy<Value = Dyadic33> {
        proptest::array::uniform9(-2.0..2.0f64)
            .prop_map(|a| Dyadic33::from_real([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]]))
    }

    proptest! {
        #[test]
        fn contraction_is_bilinear(mi in vec3(), mj in vec3(), l in real_dyadic(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let lhs = interaction_energy(&(mi * a), &l, &(mj * b)).unwrap();
            let rhs = a * b * interaction_energy(&mi, &l, &mj).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn contraction_transpose_symmetry(mi in vec3(), mj in vec3(), l in real_dyadic()) {
            let lhs = interaction_energy(&mi, &l, &mj).unwrap();
            let rhs = interaction_energy(&mj, &l.transpose(), &mi).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn transpose_and_adjoint_are_involutions(l in real_dyadic(), m in real_dyadic()) {
            let c = l + m.im() + Dyadic33(m.0.map(|r| r.map(|z| Complex64::new(0.0, z.re))));
            prop_assert_eq!(c.transpose().transpose(), c);
            prop_assert_eq!(c.adjoint().adjoint(), c);
        }
    }
}
