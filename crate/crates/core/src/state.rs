//! Construction of every state the protocols use: qubits, their spin-S
//! equivalents, Werner states and their `2 × (2S+1)` equivalents, together
//! with Q-function sampling and the explicit separable decomposition.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, tensor_product, ComplexMatrix, DimensionProfile, HERMITIAN_TOL};
use crate::sphere::SphereGrid;
use crate::spin::{coupling, norm, pauli, pauli_dot, require_unit, spin_operators, CoherentStates, HalfInteger, Vec3};

/// Validation tolerance for density matrices (Hermiticity, trace, positivity).
pub const STATE_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite matrix with subsystem layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    profile: DimensionProfile,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, profile: DimensionProfile) -> Result<Self> {
        profile.check_matrix(&matrix)?;
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (max |ρ - ρ†| = {dev:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = hermitian_eig(&matrix)?.values[0];
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix, profile })
    }

    /// Single-subsystem state.
    pub fn single(matrix: ComplexMatrix) -> Result<Self> {
        let profile = DimensionProfile::new(vec![matrix.rows()])?;
        Self::new(matrix, profile)
    }

    pub fn maximally_mixed(profile: DimensionProfile) -> Self {
        let n = profile.total();
        Self {
            matrix: ComplexMatrix::identity(n).scale_real(1.0 / n as f64),
            profile,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `Tr(ρ O)`, real part.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.matrix.trace_product(op).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&self.matrix).expect("validated Hermitian").values
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.profile.dims().to_vec();
        dims.extend_from_slice(other.profile.dims());
        DensityMatrix {
            matrix: tensor_product(&self.matrix, &other.matrix),
            profile: DimensionProfile::new(dims).expect("dims already validated"),
        }
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// Polarisation vector of a qubit or of its spin-S equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl BlochVector {
    pub fn new(px: f64, py: f64, pz: f64) -> Result<Self> {
        let p = Self { px, py, pz };
        let n = p.norm();
        if !n.is_finite() || n > 1.0 + 1e-12 {
            return Err(Error::InvalidBloch { norm: n });
        }
        Ok(p)
    }

    pub fn from_array(v: Vec3) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    pub fn as_array(&self) -> Vec3 {
        [self.px, self.py, self.pz]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.as_array())
    }

    /// `p̂`, or `None` for the zero vector.
    pub fn unit(&self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| [self.px / n, self.py / n, self.pz / n])
    }
}

fn qubit_profile() -> DimensionProfile {
    DimensionProfile::new(vec![2]).expect("2")
}

/// `½(𝟙 + σ⃗·p⃗)`.
pub fn qubit_state(p: &BlochVector) -> Result<DensityMatrix> {
    let m = (&ComplexMatrix::identity(2) + &pauli_dot(&p.as_array())).scale_real(0.5);
    DensityMatrix::new(m, qubit_profile())
}

/// `(1/(2S+1))(𝟙 + Ŝ·v)` for an arbitrary real vector `v`; fails if the result
/// is not a valid state.
pub fn vector_polarised(s: HalfInteger, v: &Vec3) -> Result<DensityMatrix> {
    let n = s.dim();
    let hat = spin_operators(s).normalized();
    let m = (&ComplexMatrix::identity(n) + &hat.dot(v)).scale_real(1.0 / n as f64);
    DensityMatrix::single(m)
}

/// Spin-S equivalent of the qubit `½(𝟙 + σ⃗·p⃗)`: `(1/(2S+1))(𝟙 + Ŝ·p⃗)`.
pub fn equivalent_qudit(s: HalfInteger, p: &BlochVector) -> Result<DensityMatrix> {
    vector_polarised(s, &p.as_array())
}

/// Recovers `p⃗` from a qudit of the form `(1/(2S+1))(𝟙 + Ŝ·p⃗)`. States carrying
/// any polarisation beyond rank 1 are rejected.
pub fn vector_polarization(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.profile().len() != 1 {
        return Err(Error::InvalidState("expected a single-qudit state".into()));
    }
    let s = HalfInteger::from_twice(rho.dim() as u32 - 1)?;
    let sv = s.value();
    let hat = spin_operators(s).normalized();
    let scale = 3.0 * sv / (sv + 1.0);
    let p: Vec<f64> = hat.components().iter().map(|op| scale * rho.expectation(op)).collect();
    let p = [p[0], p[1], p[2]];
    let rebuilt = vector_polarised(s, &p)
        .map_err(|_| Error::InvalidState("qudit is not of the vector-polarised form (𝟙 + Ŝ·p)/(2S+1)".into()))?;
    let residual = rebuilt.matrix().max_abs_diff(rho.matrix());
    if residual > STATE_TOL {
        return Err(Error::InvalidState(format!(
            "qudit carries polarisation beyond rank 1 (residual {residual:e}); only (𝟙 + Ŝ·p)/(2S+1) states can be transferred"
        )));
    }
    BlochVector::from_array(p)
}

/// `σ⃗ ⊗ Ŝ` coupling `Σ_i σ_i ⊗ Ŝ_i`, qubit first.
pub fn sigma_dot_spin(s: HalfInteger) -> ComplexMatrix {
    let hat = spin_operators(s).normalized();
    let p = pauli();
    coupling([&p[0], &p[1], &p[2]], hat.components(), &[1.0, 1.0, 1.0])
}

/// Two-qubit Werner state `¼(𝟙 − α σ⃗₁·σ⃗₂)`, `−1/3 ≤ α ≤ 1`.
pub fn werner_2x2(alpha: f64) -> Result<DensityMatrix> {
    if !(-1.0 / 3.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "Werner parameter alpha = {alpha} outside [-1/3, 1]"
        )));
    }
    let ss = sigma_dot_spin(HalfInteger::ONE_HALF);
    let m = (&ComplexMatrix::identity(4) - &ss.scale_real(alpha)).scale_real(0.25);
    DensityMatrix::new(m, DimensionProfile::new(vec![2, 2])?)
}

/// The `2 × (2S+1)` equivalent `(1/(2(2S+1)))(𝟙 − α σ⃗·Ŝ)`. Only positivity is
/// enforced, i.e. `−S/(S+1) ≤ α ≤ 1`.
pub fn equivalent_werner(alpha: f64, s: HalfInteger) -> Result<DensityMatrix> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is not finite")));
    }
    let n = 2 * s.dim();
    let m = (&ComplexMatrix::identity(n) - &sigma_dot_spin(s).scale_real(alpha)).scale_real(1.0 / n as f64);
    DensityMatrix::new(m, DimensionProfile::new(vec![2, s.dim()])?).map_err(|e| match e {
        Error::InvalidState(msg) => Error::InvalidParameter(format!(
            "alpha = {alpha} gives no valid state at S = {s} (requires -S/(S+1) <= alpha <= 1): {msg}"
        )),
        other => other,
    })
}

/// `|α| ≤ S/(S+1)`, with round-off slack.
pub fn is_separable(alpha: f64, s: HalfInteger) -> bool {
    let sv = s.value();
    alpha.abs() <= sv / (sv + 1.0) + 1e-12
}

/// Smallest spin whose Werner equivalent is separable at `alpha`: the least
/// half-integer `≥ |α|/(1−|α|)`, and never below 1/2.
pub fn s_min(alpha: f64) -> Result<HalfInteger> {
    let a = alpha.abs();
    if !a.is_finite() || a >= 1.0 {
        return Err(Error::Exceptional { alpha });
    }
    let bound = a / (1.0 - a);
    // the slack absorbs round-off such as 0.9/0.1 = 9.000000000000002
    let twice = (2.0 * bound - 1e-9).ceil().max(1.0);
    if twice > crate::spin::MAX_TWICE_SPIN as f64 {
        return Err(Error::Capacity { twice: twice.min(u32::MAX as f64) as u32, max: crate::spin::MAX_TWICE_SPIN });
    }
    let s = HalfInteger::from_twice(twice as u32)?;
    debug_assert!(is_separable(alpha, s));
    Ok(s)
}

/// Q-function samples over a product grid, one grid factor per subsystem.
#[derive(Debug, Clone)]
pub struct QFunctionSamples {
    /// One direction per subsystem for each sample.
    pub directions: Vec<Vec<Vec3>>,
    /// Product quadrature weight of each sample.
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

impl QFunctionSamples {
    /// `Σ w F`, which is 1 for an exact grid.
    pub fn normalization(&self) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn max_abs_diff(&self, other: &QFunctionSamples) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `F = Π_k (d_k / 4π) · ⟨n̂₁ ⊗ … |ρ| n̂₁ ⊗ …⟩`, each subsystem of dimension
/// `d_k` treated as a spin `(d_k − 1)/2`.
pub fn q_function(rho: &DensityMatrix, grid: &SphereGrid) -> Result<QFunctionSamples> {
    let dims = rho.profile().dims().to_vec();
    let factories: Vec<CoherentStates> = dims
        .iter()
        .map(|&d| HalfInteger::from_twice(d as u32 - 1).map(CoherentStates::new))
        .collect::<Result<_>>()?;
    let prefactor: f64 = dims.iter().map(|&d| d as f64 / (4.0 * PI)).product();
    // per-subsystem coherent states on every node
    let per_system: Vec<Vec<Vec<Complex64>>> = factories
        .iter()
        .map(|f| grid.nodes().iter().map(|n| f.state(n.theta, n.phi).amplitudes).collect())
        .collect();
    let nodes = grid.nodes();
    let total = nodes.len().pow(dims.len() as u32);
    let mut out = QFunctionSamples {
        directions: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        values: Vec::with_capacity(total),
    };
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let mut psi = vec![Complex64::new(1.0, 0.0)];
        for (k, &i) in idx.iter().enumerate() {
            let amp = &per_system[k][i];
            psi = psi.iter().flat_map(|a| amp.iter().map(move |b| a * b)).collect();
        }
        let rho_psi = rho.matrix().mul_vec(&psi);
        let val: Complex64 = psi.iter().zip(&rho_psi).map(|(a, b)| a.conj() * b).sum();
        out.values.push(prefactor * val.re);
        out.weights.push(idx.iter().map(|&i| nodes[i].weight).product());
        out.directions.push(idx.iter().map(|&i| nodes[i].direction()).collect());
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < nodes.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ProductComponent {
    pub weight: f64,
    pub qubit: DensityMatrix,
    pub qudit: DensityMatrix,
}

/// Weighted product states; separable by construction.
#[derive(Debug, Clone)]
pub struct ProductEnsemble {
    pub components: Vec<ProductComponent>,
}

impl ProductEnsemble {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// `Σ_k w_k ρ_k^{qubit} ⊗ ρ_k^{qudit}`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let first = &self.components[0];
        let n = first.qubit.dim() * first.qudit.dim();
        self.components.iter().fold(ComplexMatrix::zeros(n, n), |acc, comp| {
            &acc + &tensor_product(comp.qubit.matrix(), comp.qudit.matrix()).scale_real(comp.weight)
        })
    }
}

/// Explicit separable form of `equivalent_werner(alpha, s)`: the sphere
/// average of `½(𝟙 − β σ⃗·n̂) ⊗ |n̂⟩⟨n̂|` with `β = α(S+1)/S`, discretized by
/// `grid`. The grid must integrate degree `2S+1` harmonics exactly for the
/// average to be reproduced to round-off.
pub fn separable_decomposition(alpha: f64, s: HalfInteger, grid: &SphereGrid) -> Result<ProductEnsemble> {
    if !is_separable(alpha, s) {
        let sv = s.value();
        return Err(Error::SeparabilityRange { alpha: alpha.abs(), spin: s.to_string(), bound: sv / (sv + 1.0) });
    }
    let sv = s.value();
    let beta = (alpha * (sv + 1.0) / sv).clamp(-1.0, 1.0);
    let factory = CoherentStates::new(s);
    let qudit_profile = DimensionProfile::new(vec![s.dim()])?;
    let components = grid
        .nodes()
        .iter()
        .map(|node| {
            let n = node.direction();
            let qubit = qubit_state(&BlochVector::new(-beta * n[0], -beta * n[1], -beta * n[2])?)?;
            let qudit = DensityMatrix::new(factory.state(node.theta, node.phi).projector(), qudit_profile.clone())?;
            Ok(ProductComponent { weight: node.weight / (4.0 * PI), qubit, qudit })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductEnsemble { components })
}

/// Observable `(3S/(S+1)) Ŝ·n̂` whose expectation on `(1/(2S+1))(𝟙 + Ŝ·P⃗)`
/// equals `P⃗·n̂`, the qubit's `⟨σ⃗·n̂⟩`.
pub fn retrieval_observable(s: HalfInteger, direction: &Vec3) -> Result<ComplexMatrix> {
    require_unit(direction, "retrieval direction")?;
    let sv = s.value();
    Ok(spin_operators(s).normalized().dot(direction).scale_real(3.0 * sv / (sv + 1.0)))
}
