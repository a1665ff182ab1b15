//! Fidelity and Hilbert–Schmidt distances, their closed forms for the
//! vector-polarised family, and a measurement-disturbance discord witness.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, singular_values, ComplexMatrix, ZERO};
use crate::spin::{direction, HalfInteger, Vec3};
use crate::state::DensityMatrix;

/// Allowed gap between `F(ρ₁, ρ₂)` and `F(ρ₂, ρ₁)`.
pub const FIDELITY_SYMMETRY_TOL: f64 = 1e-8;

/// Witness values at or below this are inconclusive.
pub const WITNESS_THRESHOLD: f64 = 1e-6;

/// Upper bound on alternating θ/φ refinement rounds.
const MAX_REFINE_ROUNDS: usize = 20;

fn same_dimension(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<()> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states have dimensions {} and {}",
            r1.dim(),
            r2.dim()
        )));
    }
    Ok(())
}

/// Square root of a state with eigenvalues at round-off level set to zero, so
/// that rank-deficient states do not pick up `√ε` spurious weight.
fn state_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let cutoff = 4.0 * m.rows() as f64 * f64::EPSILON;
    let eig = hermitian_eig(m)?;
    Ok(eig.map_spectrum(|l| Complex64::new(if l > cutoff { l.sqrt() } else { 0.0 }, 0.0)))
}

fn fidelity_ordered(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let trace: f64 = singular_values(&(&state_sqrt(a)? * &state_sqrt(b)?)).iter().sum();
    Ok(trace * trace)
}

/// Uhlmann fidelity `(Tr √(√ρ₁ ρ₂ √ρ₁))²`, evaluated as `‖√ρ₁√ρ₂‖₁²` and
/// averaged over both argument orders.
pub fn fidelity(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    same_dimension(r1, r2)?;
    let f12 = fidelity_ordered(r1.matrix(), r2.matrix())?;
    let f21 = fidelity_ordered(r2.matrix(), r1.matrix())?;
    if (f12 - f21).abs() > FIDELITY_SYMMETRY_TOL {
        return Err(Error::Numerical(format!("fidelity is asymmetric: {f12} vs {f21}")));
    }
    Ok(0.5 * (f12 + f21))
}

/// `√(Tr[(ρ₁ − ρ₂)²])`.
pub fn hs_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    same_dimension(r1, r2)?;
    Ok((r1.matrix() - r2.matrix()).frobenius_norm())
}

/// `√((S+1)/(3S(2S+1)))`: HS distance between `(𝟙 + Ŝ·p̂)/(2S+1)` and `𝟙/(2S+1)`.
pub fn polarisation_distance(s: HalfInteger) -> f64 {
    let sv = s.value();
    ((sv + 1.0) / (3.0 * sv * (2.0 * sv + 1.0))).sqrt()
}

/// `d₀ − d = α √((S+1)/(3S(2S+1)))`.
pub fn relative_distance(alpha: f64, s: HalfInteger) -> f64 {
    alpha * polarisation_distance(s)
}

/// Fidelity between `(𝟙 + Ŝ·p̂)/(2S+1)` and `(𝟙 + αŜ·p̂)/(2S+1)` for unit `p̂`;
/// both are diagonal in the `Ŝ·p̂` eigenbasis.
pub fn equivalent_fidelity_closed_form(alpha: f64, s: HalfInteger) -> f64 {
    let sv = s.value();
    let n = s.dim() as f64;
    let sum: f64 = (0..s.dim())
        .map(|k| {
            let x = s.m(k) / sv;
            ((1.0 + x) * (1.0 + alpha * x)).max(0.0).sqrt()
        })
        .sum();
    (sum / n).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub alpha: f64,
    pub spin_twice: u32,
    /// `𝒟 = α√((S+1)/(3S(2S+1)))`.
    pub relative_distance: f64,
    /// `α/√(6S)`.
    pub large_spin_limit: f64,
    /// `|𝒟 − α/√(6S)|/𝒟`; zero when `𝒟 = 0`.
    pub limit_error: f64,
    /// `(α/3)√((S+1)/(3S(2S+1)))`.
    pub d1: f64,
    /// `(α(S+1)/(3S))√((S+1)/(3S(2S+1)))`.
    pub d2: f64,
    /// `|𝒟₁ − 𝒟₂|/𝒟₁`; zero when `𝒟₁ = 0`.
    pub branch_gap: f64,
}

pub fn asymptotics_check(alpha: f64, s: HalfInteger) -> AsymptoticsReport {
    let sv = s.value();
    let d = relative_distance(alpha, s);
    let limit = alpha / (6.0 * sv).sqrt();
    let d1 = alpha / 3.0 * polarisation_distance(s);
    let d2 = alpha * (sv + 1.0) / (3.0 * sv) * polarisation_distance(s);
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { (num / den).abs() };
    AsymptoticsReport {
        alpha,
        spin_twice: s.twice(),
        relative_distance: d,
        large_spin_limit: limit,
        limit_error: ratio(d - limit, d),
        d1,
        d2,
        branch_gap: ratio(d1 - d2, d1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSearch {
    pub n_theta: usize,
    pub n_phi: usize,
    pub refine_iterations: usize,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        Self { n_theta: 30, n_phi: 60, refine_iterations: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    /// `min_m̂ ‖ρ − Σ_± π±ρπ±‖_HS`.
    pub value: f64,
    pub direction: Vec3,
}

impl Witness {
    /// True when the value certifies non-zero discord for qubit-side measurements.
    pub fn certifies_discord(&self) -> bool {
        self.value > WITNESS_THRESHOLD
    }
}

/// `ρ` split into 2×2 blocks `B_ij = ⟨i|ρ|j⟩` over the first (qubit) factor.
struct QubitBlocks {
    rest: usize,
    blocks: [[ComplexMatrix; 2]; 2],
}

impl QubitBlocks {
    fn new(rho: &DensityMatrix) -> Result<Self> {
        if rho.profile().dims()[0] != 2 {
            return Err(Error::DimensionMismatch(format!(
                "disturbance witness needs a qubit first subsystem, profile is {:?}",
                rho.profile().dims()
            )));
        }
        let rest = rho.dim() / 2;
        let m = rho.matrix();
        let block = |i: usize, j: usize| {
            let mut b = ComplexMatrix::zeros(rest, rest);
            for r in 0..rest {
                for c in 0..rest {
                    b[(r, c)] = m[(i * rest + r, j * rest + c)];
                }
            }
            b
        };
        Ok(Self { rest, blocks: [[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]] })
    }

    /// `‖ρ − Σ_± π±ρπ±‖ = √2 ‖⟨u|ρ|v⟩‖` with `u`, `v` the eigenvectors of `σ⃗·m̂`.
    fn disturbance(&self, theta: f64, phi: f64) -> f64 {
        let (s, c) = (0.5 * theta).sin_cos();
        let phase = Complex64::from_polar(1.0, phi);
        let u = [Complex64::new(c, 0.0), phase * s];
        let v = [Complex64::new(s, 0.0), -phase * c];
        let mut acc = ComplexMatrix::zeros(self.rest, self.rest);
        for (ui, row) in u.iter().zip(&self.blocks) {
            for (vj, block) in v.iter().zip(row) {
                let w = ui.conj() * vj;
                if w != ZERO {
                    acc = &acc + &block.scale(w);
                }
            }
        }
        std::f64::consts::SQRT_2 * acc.frobenius_norm()
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { (x1, f1) } else { (x2, f2) }
}

/// Minimum over qubit measurement directions of the disturbance
/// `‖ρ − Σ_± π±_m̂ ρ π±_m̂‖_HS`: a coarse (θ, φ) grid followed by golden-section
/// refinement alternating between θ and φ. A value above [`WITNESS_THRESHOLD`] certifies
/// non-zero discord; a smaller value is inconclusive.
pub fn disturbance_witness(rho: &DensityMatrix, search: &WitnessSearch) -> Result<Witness> {
    if search.n_theta < 2 || search.n_phi < 1 {
        return Err(Error::InvalidParameter("witness grid needs at least 2 polar and 1 azimuthal points".into()));
    }
    let blocks = QubitBlocks::new(rho)?;
    let dtheta = PI / (search.n_theta - 1) as f64;
    let dphi = 2.0 * PI / search.n_phi as f64;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..search.n_theta {
        for j in 0..search.n_phi {
            let (theta, phi) = (i as f64 * dtheta, j as f64 * dphi);
            let value = blocks.disturbance(theta, phi);
            if value < best.2 {
                best = (theta, phi, value);
            }
        }
    }
    let (mut theta, mut phi, mut value) = best;
    for _ in 0..MAX_REFINE_ROUNDS {
        let start = value;
        let (t, v) = golden_section(
            |t| blocks.disturbance(t, phi),
            (theta - dtheta).max(0.0),
            (theta + dtheta).min(PI),
            search.refine_iterations,
        );
        if v < value {
            (theta, value) = (t, v);
        }
        let (p, v) = golden_section(|p| blocks.disturbance(theta, p), phi - dphi, phi + dphi, search.refine_iterations);
        if v < value {
            (phi, value) = (p.rem_euclid(2.0 * PI), v);
        }
        if start - value <= f64::EPSILON * start {
            break;
        }
    }
    Ok(Witness { value, direction: direction(theta, phi) })
}

/// Disturbance along one fixed direction.
pub fn disturbance_along(rho: &DensityMatrix, theta: f64, phi: f64) -> Result<f64> {
    Ok(QubitBlocks::new(rho)?.disturbance(theta, phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub fidelity: f64,
    pub hs_distance: f64,
    pub relative_distance: f64,
    pub witness_value: f64,
}

impl MetricReport {
    /// Figures of merit for the spin-S Werner channel at `alpha`: the remotely
    /// prepared `(𝟙 + αŜ·ẑ)/(2S+1)` compared with its ideal `(𝟙 + Ŝ·ẑ)/(2S+1)`,
    /// plus the channel's disturbance witness.
    pub fn channel(alpha: f64, s: HalfInteger, search: &WitnessSearch) -> Result<Self> {
        let z = [0.0, 0.0, 1.0];
        let ideal = crate::state::vector_polarised(s, &z)?;
        let output = crate::state::vector_polarised(s, &[0.0, 0.0, alpha])?;
        let mixed = DensityMatrix::maximally_mixed(ideal.profile().clone());
        let d = hs_distance(&ideal, &output)?;
        let d0 = hs_distance(&ideal, &mixed)?;
        let channel = crate::state::equivalent_werner(alpha, s)?;
        Ok(Self {
            fidelity: fidelity(&ideal, &output)?,
            hs_distance: d,
            relative_distance: d0 - d,
            witness_value: disturbance_witness(&channel, search)?.value,
        })
    }
}
