//! Spin-S operators, Wigner rotations and spin coherent states.
//!
//! Basis vectors are ordered `m = S, S-1, …, -S`, so index 0 is the
//! highest-weight state.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eig, tensor_product, unitary_from_generator, ComplexMatrix, HermitianEigen, I, ONE, ZERO};
use crate::sphere::SphereGrid;

/// Largest `2S` accepted by the dense path.
pub const MAX_TWICE_SPIN: u32 = 100;

/// Tolerance on `|axis| = 1` for rotation axes and measurement directions.
pub const UNIT_TOL: f64 = 1e-12;

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector with polar angle `theta` and azimuth `phi`.
pub fn direction(theta: f64, phi: f64) -> Vec3 {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

pub(crate) fn require_unit(v: &Vec3, what: &str) -> Result<()> {
    let n = norm(v);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::ContractViolation(format!(
            "{what} must be a unit vector, |v| = {n}"
        )));
    }
    Ok(())
}

/// A spin quantum number, stored as `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInteger(u32);

impl HalfInteger {
    pub const ONE_HALF: HalfInteger = HalfInteger(1);

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidParameter("spin must be at least 1/2 (2S >= 1)".into()));
        }
        if twice > MAX_TWICE_SPIN {
            return Err(Error::Capacity { twice, max: MAX_TWICE_SPIN });
        }
        Ok(Self(twice))
    }

    /// Parses a real spin value such as `4.5`; it must be a positive half-integer.
    pub fn from_f64(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.round() < 1.0 {
            return Err(Error::InvalidParameter(format!("{s} is not a positive half-integer")));
        }
        if twice.round() > MAX_TWICE_SPIN as f64 {
            return Err(Error::Capacity { twice: twice.round().min(u32::MAX as f64) as u32, max: MAX_TWICE_SPIN });
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// `2S + 1`.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// `m` of basis index `k`.
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// The next larger spin, `S + 1/2`.
    pub fn next(self) -> Result<Self> {
        Self::from_twice(self.0 + 1)
    }

    /// All spins from `lo` to `hi` in half-integer steps.
    pub fn range_inclusive(lo: Self, hi: Self) -> impl Iterator<Item = Self> {
        (lo.0..=hi.0).map(Self)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `(S_x, S_y, S_z)` in units of ħ.
#[derive(Debug, Clone)]
pub struct SpinTriple {
    pub spin: HalfInteger,
    pub sx: ComplexMatrix,
    pub sy: ComplexMatrix,
    pub sz: ComplexMatrix,
}

impl SpinTriple {
    pub fn components(&self) -> [&ComplexMatrix; 3] {
        [&self.sx, &self.sy, &self.sz]
    }

    /// `S⃗ · v`.
    pub fn dot(&self, v: &Vec3) -> ComplexMatrix {
        let mut out = self.sx.scale_real(v[0]);
        out = &out + &self.sy.scale_real(v[1]);
        &out + &self.sz.scale_real(v[2])
    }

    /// The normalized triple `Ŝ = S⃗ / S`.
    pub fn normalized(&self) -> SpinTriple {
        let inv = 1.0 / self.spin.value();
        SpinTriple {
            spin: self.spin,
            sx: self.sx.scale_real(inv),
            sy: self.sy.scale_real(inv),
            sz: self.sz.scale_real(inv),
        }
    }
}

/// Ladder construction of the spin matrices.
pub fn spin_operators(s: HalfInteger) -> SpinTriple {
    let n = s.dim();
    let sv = s.value();
    let mut sz = ComplexMatrix::zeros(n, n);
    let mut raise = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let m = s.m(k);
        sz[(k, k)] = c(m, 0.0);
        if k > 0 {
            // S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>, and |m+1> sits at index k-1
            raise[(k - 1, k)] = c((sv * (sv + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let lower = raise.dagger();
    let sx = (&raise + &lower).scale_real(0.5);
    let sy = (&raise - &lower).scale(c(0.0, -0.5));
    SpinTriple { spin: s, sx, sy, sz }
}

/// The Pauli matrices, i.e. `2 S⃗` at spin 1/2.
pub fn pauli() -> [ComplexMatrix; 3] {
    let x = ComplexMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]).expect("2x2");
    let y = ComplexMatrix::from_vec(2, 2, vec![ZERO, -I, I, ZERO]).expect("2x2");
    let z = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
    [x, y, z]
}

/// `σ⃗ · v`.
pub fn pauli_dot(v: &Vec3) -> ComplexMatrix {
    let [x, y, z] = pauli();
    &(&x.scale_real(v[0]) + &y.scale_real(v[1])) + &z.scale_real(v[2])
}

/// `Σ_i w_i a_i ⊗ b_i`, the weighted scalar coupling of two operator triples.
pub fn coupling(a: [&ComplexMatrix; 3], b: [&ComplexMatrix; 3], weights: &Vec3) -> ComplexMatrix {
    let n = a[0].rows() * b[0].rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..3 {
        if weights[i] != 0.0 {
            out = &out + &tensor_product(a[i], b[i]).scale_real(weights[i]);
        }
    }
    out
}

/// `exp(-i · angle · S⃗·axis)`.
pub fn wigner_rotation(s: HalfInteger, axis: &Vec3, angle: f64) -> Result<ComplexMatrix> {
    require_unit(axis, "rotation axis")?;
    unitary_from_generator(&spin_operators(s).dot(axis), angle)
}

/// SO(3) matrix of the rotation by `angle` about the unit `axis`.
pub fn rotation_matrix(axis: &Vec3, angle: f64) -> [[f64; 3]; 3] {
    let (sn, cs) = angle.sin_cos();
    let t = 1.0 - cs;
    let [x, y, z] = *axis;
    [
        [cs + x * x * t, x * y * t - z * sn, x * z * t + y * sn],
        [y * x * t + z * sn, cs + y * y * t, y * z * t - x * sn],
        [z * x * t - y * sn, z * y * t + x * sn, cs + z * z * t],
    ]
}

#[derive(Debug, Clone)]
pub struct SpinCoherentState {
    pub spin: HalfInteger,
    pub theta: f64,
    pub phi: f64,
    pub amplitudes: Vec<Complex64>,
}

impl SpinCoherentState {
    pub fn direction(&self) -> Vec3 {
        direction(self.theta, self.phi)
    }

    /// `|n̂⟩⟨n̂|`.
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &SpinCoherentState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨n̂|M|n̂⟩`.
    pub fn expectation(&self, m: &ComplexMatrix) -> Complex64 {
        let mv = m.mul_vec(&self.amplitudes);
        self.amplitudes.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Builds coherent states for one spin, reusing a single `S_y` eigen-decomposition.
#[derive(Debug, Clone)]
pub struct CoherentStates {
    spin: HalfInteger,
    sy_eig: HermitianEigen,
    // V† |m = S⟩
    top_in_eigenbasis: Vec<Complex64>,
}

impl CoherentStates {
    pub fn new(s: HalfInteger) -> Self {
        let sy = spin_operators(s).sy;
        let sy_eig = hermitian_eig(&sy).expect("S_y is Hermitian");
        let top_in_eigenbasis = (0..s.dim()).map(|k| sy_eig.vectors[(0, k)].conj()).collect();
        Self { spin: s, sy_eig, top_in_eigenbasis }
    }

    pub fn spin(&self) -> HalfInteger {
        self.spin
    }

    /// `e^{-i S_z φ} e^{-i S_y θ} |S⟩`; the third Euler angle is fixed to 0.
    pub fn state(&self, theta: f64, phi: f64) -> SpinCoherentState {
        let n = self.spin.dim();
        let v = &self.sy_eig.vectors;
        let rotated: Vec<Complex64> = self
            .top_in_eigenbasis
            .iter()
            .zip(&self.sy_eig.values)
            .map(|(a, &l)| a * Complex64::from_polar(1.0, -theta * l))
            .collect();
        let amplitudes = (0..n)
            .map(|i| {
                let a: Complex64 = (0..n).map(|k| v[(i, k)] * rotated[k]).sum();
                a * Complex64::from_polar(1.0, -phi * self.spin.m(i))
            })
            .collect();
        SpinCoherentState { spin: self.spin, theta, phi, amplitudes }
    }
}

pub fn spin_coherent_state(s: HalfInteger, theta: f64, phi: f64) -> SpinCoherentState {
    CoherentStates::new(s).state(theta, phi)
}

/// Max-entry residual of `(2S+1)/(4π) Σ_k w_k |n̂_k⟩⟨n̂_k| − 𝟙` on the grid.
pub fn scs_resolution_check(s: HalfInteger, grid: &SphereGrid) -> f64 {
    let factory = CoherentStates::new(s);
    let n = s.dim();
    let mut acc = ComplexMatrix::zeros(n, n);
    for node in grid.nodes() {
        let st = factory.state(node.theta, node.phi);
        for i in 0..n {
            for j in 0..n {
                acc[(i, j)] += st.amplitudes[i] * st.amplitudes[j].conj() * node.weight;
            }
        }
    }
    let acc = acc.scale_real(n as f64 / (4.0 * std::f64::consts::PI));
    acc.max_abs_diff(&ComplexMatrix::identity(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spin(twice: u32) -> HalfInteger {
        HalfInteger::from_twice(twice).unwrap()
    }

    fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        &(a * b) - &(b * a)
    }

    // Independent closed form of ⟨m|n̂(θ,φ)⟩ (binomial SCS amplitudes).
    fn binomial_amplitude(s: HalfInteger, k: usize, theta: f64, phi: f64) -> Complex64 {
        let two_s = s.twice() as usize;
        let mut binom = 1.0f64;
        for i in 0..k {
            binom = binom * (two_s - i) as f64 / (i + 1) as f64;
        }
        let up = two_s - k;
        let mag = binom.sqrt() * (theta / 2.0).cos().powi(up as i32) * (theta / 2.0).sin().powi(k as i32);
        Complex64::from_polar(mag, -phi * s.m(k))
    }

    #[test]
    fn half_integer_encoding() {
        assert_eq!(HalfInteger::from_f64(4.5).unwrap().twice(), 9);
        assert_eq!(spin(9).to_string(), "9/2");
        assert_eq!(spin(8).to_string(), "4");
        assert!(HalfInteger::from_twice(0).is_err());
        assert!(HalfInteger::from_f64(0.3).is_err());
        assert!(matches!(HalfInteger::from_twice(101), Err(Error::Capacity { .. })));
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let t = spin_operators(HalfInteger::ONE_HALF);
        let p = pauli();
        for (s, sig) in t.components().iter().zip(&p) {
            assert!(s.max_abs_diff(&sig.scale_real(0.5)) < 1e-15);
        }
    }

    #[test]
    fn spin_one_ladder() {
        let t = spin_operators(spin(2));
        assert!(t.sz.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0, -1.0])) < 1e-15);
        let r = 1.0 / 2f64.sqrt();
        let sx = ComplexMatrix::from_vec(
            3,
            3,
            [0.0, r, 0.0, r, 0.0, r, 0.0, r, 0.0].iter().map(|&x| c(x, 0.0)).collect(),
        )
        .unwrap();
        assert!(t.sx.max_abs_diff(&sx) < 1e-15);
    }

    #[test]
    fn trace_of_sx_squared_at_three_halves() {
        let t = spin_operators(spin(3));
        assert!(((&t.sx * &t.sx).trace().re - 5.0).abs() < 1e-12);
    }

    #[test]
    fn algebra_identities_up_to_25() {
        for twice in 1..=50 {
            let s = spin(twice);
            let t = spin_operators(s);
            let [x, y, z] = t.components();
            assert!(commutator(x, y).max_abs_diff(&z.scale(I)) < 1e-12);
            assert!(commutator(y, z).max_abs_diff(&x.scale(I)) < 1e-12);
            assert!(commutator(z, x).max_abs_diff(&y.scale(I)) < 1e-12);
            let casimir = &(&(x * x) + &(y * y)) + &(z * z);
            let sv = s.value();
            assert!(casimir.max_abs_diff(&ComplexMatrix::identity(s.dim()).scale_real(sv * (sv + 1.0))) < 1e-10);
            let hat = t.normalized();
            let expect = (sv + 1.0) * (2.0 * sv + 1.0) / (3.0 * sv);
            for (i, a) in hat.components().iter().enumerate() {
                for (j, b) in hat.components().iter().enumerate() {
                    let tr = a.trace_product(b);
                    let want = if i == j { expect } else { 0.0 };
                    assert!((tr - c(want, 0.0)).norm() < 1e-10, "S={s} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn rotation_examples() {
        let rz = wigner_rotation(HalfInteger::ONE_HALF, &[0.0, 0.0, 1.0], PI).unwrap();
        let expect = ComplexMatrix::from_vec(2, 2, vec![-I, ZERO, ZERO, I]).unwrap();
        assert!(rz.max_abs_diff(&expect) < 1e-14);
        let ry = wigner_rotation(HalfInteger::ONE_HALF, &[0.0, 1.0, 0.0], 2.0 * PI).unwrap();
        assert!(ry.max_abs_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-14);
        let s2 = spin(4);
        let rx = wigner_rotation(s2, &[1.0, 0.0, 0.0], PI).unwrap();
        let t = spin_operators(s2);
        let flipped = &(&rx.dagger() * &t.sy) * &rx;
        assert!(flipped.max_abs_diff(&t.sy.scale_real(-1.0)) < 1e-12);
        assert!(wigner_rotation(s2, &[1.0, 1.0, 0.0], PI).is_err());
    }

    #[test]
    fn coherent_state_basics() {
        let s = spin(5);
        let north = spin_coherent_state(s, 0.0, 0.0);
        assert!((north.amplitudes[0] - ONE).norm() < 1e-14);
        assert!(north.amplitudes[1..].iter().all(|a| a.norm() < 1e-14));
        let z = spin_coherent_state(HalfInteger::ONE_HALF, 0.0, 0.0);
        let x = spin_coherent_state(HalfInteger::ONE_HALF, PI / 2.0, 0.0);
        assert!((z.overlap(&x).norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn coherent_state_overlap_law_on_theta_grid() {
        let s = spin(4);
        let factory = CoherentStates::new(s);
        let north = factory.state(0.0, 0.0);
        for k in 0..20 {
            let theta = PI * k as f64 / 19.0;
            let st = factory.state(theta, 0.3);
            let want = ((1.0 + theta.cos()) / 2.0).powi(4);
            assert!((north.overlap(&st).norm_sqr() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_state_matches_binomial_form() {
        for twice in [1, 2, 5, 12, 31] {
            let s = spin(twice);
            let factory = CoherentStates::new(s);
            for &(theta, phi) in &[(0.4, 1.1), (2.5, -0.7), (PI, 0.0)] {
                let st = factory.state(theta, phi);
                for k in 0..s.dim() {
                    assert!((st.amplitudes[k] - binomial_amplitude(s, k, theta, phi)).norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn resolution_of_identity() {
        let exact = SphereGrid::gauss_legendre(3, 6).unwrap();
        assert!(scs_resolution_check(HalfInteger::ONE_HALF, &exact) < 1e-12);
        let s2 = spin(4);
        assert!(scs_resolution_check(s2, &SphereGrid::for_spin(s2)) < 1e-12);
        // an undersized grid misses the high-order terms
        let coarse = SphereGrid::gauss_legendre(2, 3).unwrap();
        assert!(scs_resolution_check(spin(10), &coarse) > 1e-3);
    }

    proptest! {
        #[test]
        fn overlap_law_random_pairs(twice in 1u32..=50, t1 in 0.0f64..PI, p1 in 0.0f64..6.3, t2 in 0.0f64..PI, p2 in 0.0f64..6.3) {
            let s = spin(twice);
            let f = CoherentStates::new(s);
            let a = f.state(t1, p1);
            let b = f.state(t2, p2);
            let cosang = dot(&a.direction(), &b.direction());
            let want = ((1.0 + cosang) / 2.0).powi(twice as i32);
            prop_assert!((a.overlap(&b).norm_sqr() - want).abs() < 1e-10);
        }

        #[test]
        fn polarisation_points_along_direction(twice in 1u32..=30, theta in 0.0f64..PI, phi in 0.0f64..6.3) {
            let s = spin(twice);
            let st = spin_coherent_state(s, theta, phi);
            let hat = spin_operators(s).normalized();
            let n = st.direction();
            for (k, op) in hat.components().iter().enumerate() {
                prop_assert!((st.expectation(op).re - n[k]).abs() < 1e-10);
            }
        }

        #[test]
        fn rotation_acts_as_so3(twice in 1u32..=12, theta in 0.0f64..PI, phi in 0.0f64..6.3, angle in -6.3f64..6.3, t2 in 0.0f64..PI, p2 in 0.0f64..6.3) {
            let s = spin(twice);
            let axis = direction(theta, phi);
            let u = wigner_rotation(s, &axis, angle).unwrap();
            let st = spin_coherent_state(s, t2, p2);
            let rotated: Vec<Complex64> = u.mul_vec(&st.amplitudes);
            let hat = spin_operators(s).normalized();
            let before: Vec<f64> = hat.components().iter().map(|op| st.expectation(op).re).collect();
            let r = rotation_matrix(&axis, angle);
            for (k, op) in hat.components().iter().enumerate() {
                let mv = op.mul_vec(&rotated);
                let after: f64 = rotated.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum();
                let want: f64 = (0..3).map(|j| r[k][j] * before[j]).sum();
                prop_assert!((after - want).abs() < 1e-10);
            }
        }
    }
}
