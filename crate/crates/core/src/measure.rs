//! Projective measurements: projector families, exact outcome statistics,
//! seeded outcome sampling, and the four-party contraction used for
//! correlation swapping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{embed_operator, hermitian_eig, partial_trace, tensor_product, ComplexMatrix, DimensionProfile, ZERO};
use crate::spin::{coupling, pauli, pauli_dot, require_unit, spin_operators, HalfInteger, Vec3};
use crate::state::DensityMatrix;

/// Tolerance for projector idempotence, completeness and orthogonality.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Outcomes below this probability carry no post-measurement state.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

/// Eigenvalue gap that separates two clusters of a dichotomic observable.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Name of the outcome-sampling generator; recorded in transcripts.
pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";

/// Bell states as `¼(𝟙 + Σ_i c_i σ_i ⊗ σ_i)`, listed with their correlation
/// signs `c`: singlet, `φ⁻`, `φ⁺`, `ψ⁺`.
pub const BELL_PATTERNS: [(&str, Vec3); 4] = [
    ("psi-", [-1.0, -1.0, -1.0]),
    ("phi-", [-1.0, 1.0, 1.0]),
    ("phi+", [1.0, -1.0, 1.0]),
    ("psi+", [1.0, 1.0, -1.0]),
];

#[derive(Debug, Clone)]
pub struct LabeledProjector {
    pub label: String,
    pub matrix: ComplexMatrix,
}

/// A complete family of orthogonal projectors on some subsystems.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    subsystems: Vec<usize>,
    local_dims: Vec<usize>,
    projectors: Vec<LabeledProjector>,
}

impl ProjectorSet {
    /// Validates completeness, idempotence, Hermiticity and mutual
    /// orthogonality. `local_dims` lists the dimension of each acting
    /// subsystem, in the order the projector matrices use.
    pub fn new(subsystems: Vec<usize>, local_dims: Vec<usize>, projectors: Vec<LabeledProjector>) -> Result<Self> {
        if subsystems.len() != local_dims.len() || subsystems.is_empty() {
            return Err(Error::DimensionMismatch("one local dimension per acting subsystem is required".into()));
        }
        let n: usize = local_dims.iter().product();
        if projectors.is_empty() {
            return Err(Error::InvalidInput("empty projector set".into()));
        }
        let mut sum = ComplexMatrix::zeros(n, n);
        for (k, p) in projectors.iter().enumerate() {
            let m = &p.matrix;
            if !m.is_square() || m.rows() != n {
                return Err(Error::DimensionMismatch(format!("projector '{}' is not {n}x{n}", p.label)));
            }
            let herm = m.hermitian_deviation();
            let idem = (m * m).max_abs_diff(m);
            if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
                return Err(Error::ContractViolation(format!(
                    "'{}' is not an orthogonal projector (hermiticity {herm:e}, idempotence {idem:e})",
                    p.label
                )));
            }
            for q in &projectors[k + 1..] {
                let overlap = (m * &q.matrix).max_abs();
                if overlap > PROJECTOR_TOL {
                    return Err(Error::ContractViolation(format!(
                        "projectors '{}' and '{}' are not orthogonal ({overlap:e})",
                        p.label, q.label
                    )));
                }
            }
            sum = &sum + m;
        }
        let completeness = sum.max_abs_diff(&ComplexMatrix::identity(n));
        if completeness > PROJECTOR_TOL {
            return Err(Error::ContractViolation(format!("projectors do not sum to identity ({completeness:e})")));
        }
        Ok(Self { subsystems, local_dims, projectors })
    }

    pub fn subsystems(&self) -> &[usize] {
        &self.subsystems
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn projectors(&self) -> &[LabeledProjector] {
        &self.projectors
    }

    pub fn get(&self, label: &str) -> Option<&ComplexMatrix> {
        self.projectors.iter().find(|p| p.label == label).map(|p| &p.matrix)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.projectors.iter().map(|p| p.label.as_str()).collect()
    }

    /// Same projectors, acting on different subsystems.
    pub fn on_subsystems(mut self, subsystems: Vec<usize>) -> Result<Self> {
        if subsystems.len() != self.subsystems.len() {
            return Err(Error::DimensionMismatch(format!(
                "projector set acts on {} subsystems, got {subsystems:?}",
                self.subsystems.len()
            )));
        }
        self.subsystems = subsystems;
        Ok(self)
    }
}

/// `¼(𝟙 + Σ_i c_i σ_i ⊗ σ_i)`.
pub fn bell_projector(correlations: &Vec3) -> ComplexMatrix {
    let p = pauli();
    let corr = coupling([&p[0], &p[1], &p[2]], [&p[0], &p[1], &p[2]], correlations);
    (&ComplexMatrix::identity(4) + &corr).scale_real(0.25)
}

/// The four Bell projectors on qubits (0, 1).
pub fn bell_projectors() -> ProjectorSet {
    let projectors = BELL_PATTERNS
        .iter()
        .map(|(label, corr)| LabeledProjector { label: label.to_string(), matrix: bell_projector(corr) })
        .collect();
    ProjectorSet::new(vec![0, 1], vec![2, 2], projectors).expect("Bell basis is a complete projector set")
}

/// Eigenprojections of `Ŝ ⊗ σ⃗` (qudit first) onto eigenvalue `+1` (label
/// `"plus"`, rank `2S+2`) and `−(S+1)/S` (label `"minus"`, rank `2S`).
pub fn dichotomic_projectors(s: HalfInteger) -> ProjectorSet {
    let hat = spin_operators(s).normalized();
    let p = pauli();
    let op = coupling(hat.components(), [&p[0], &p[1], &p[2]], &[1.0, 1.0, 1.0]);
    let eig = hermitian_eig(&op).expect("Ŝ·σ⃗ is Hermitian");
    let split = eig
        .values
        .windows(2)
        .position(|w| w[1] - w[0] > CLUSTER_TOL)
        .expect("Ŝ·σ⃗ has two distinct eigenvalues");
    assert!(
        eig.values[split + 1..].windows(2).all(|w| w[1] - w[0] <= CLUSTER_TOL),
        "Ŝ·σ⃗ spectrum splits into more than two clusters"
    );
    let n = op.rows();
    let project = |cols: std::ops::Range<usize>| {
        let mut m = ComplexMatrix::zeros(n, n);
        for k in cols {
            m = &m + &ComplexMatrix::outer(&eig.eigenvector(k));
        }
        m
    };
    let minus = project(0..split + 1);
    let plus = project(split + 1..n);
    ProjectorSet::new(
        vec![0, 1],
        vec![s.dim(), 2],
        vec![
            LabeledProjector { label: "plus".into(), matrix: plus },
            LabeledProjector { label: "minus".into(), matrix: minus },
        ],
    )
    .expect("spectral projectors form a complete set")
}

/// `π± = ½(𝟙 ± σ⃗·m̂)` on qubit 0, labels `"+1"` and `"-1"`.
pub fn direction_projectors(m: &Vec3) -> Result<ProjectorSet> {
    require_unit(m, "measurement direction")?;
    let id = ComplexMatrix::identity(2);
    let sm = pauli_dot(m);
    ProjectorSet::new(
        vec![0],
        vec![2],
        vec![
            LabeledProjector { label: "+1".into(), matrix: (&id + &sm).scale_real(0.5) },
            LabeledProjector { label: "-1".into(), matrix: (&id - &sm).scale_real(0.5) },
        ],
    )
}

#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub label: String,
    pub probability: f64,
    /// Normalized state of the kept subsystems; `None` when the outcome has
    /// negligible probability.
    pub post_state: Option<DensityMatrix>,
}

fn check_acting(state: &DensityMatrix, set: &ProjectorSet) -> Result<()> {
    let dims = state.profile().dims();
    for (&k, &d) in set.subsystems.iter().zip(&set.local_dims) {
        if dims.get(k) != Some(&d) {
            return Err(Error::DimensionMismatch(format!(
                "projector expects dimension {d} on subsystem {k}, state profile is {dims:?}"
            )));
        }
    }
    Ok(())
}

/// Applies every projector of the set: `p_k = Tr[(P_k ⊗ 𝟙) ρ]` and
/// `ρ_k = Tr_{¬keep}[(P_k ⊗ 𝟙) ρ (P_k ⊗ 𝟙)] / p_k`.
pub fn measure(state: &DensityMatrix, set: &ProjectorSet, keep: &[usize]) -> Result<Vec<MeasurementRecord>> {
    check_acting(state, set)?;
    let kept_profile = state.profile().select(keep)?;
    set.projectors
        .iter()
        .map(|p| {
            let lifted = embed_operator(&p.matrix, &set.subsystems, state.profile())?;
            let left = &lifted * state.matrix();
            let probability = left.trace().re.clamp(0.0, 1.0);
            let post_state = if probability < NEGLIGIBLE_PROBABILITY {
                None
            } else {
                let projected = &left * &lifted;
                let reduced = partial_trace(&projected, state.profile(), keep)?;
                Some(DensityMatrix::new(reduced.scale_real(1.0 / probability), kept_profile.clone())?)
            };
            Ok(MeasurementRecord { label: p.label.clone(), probability, post_state })
        })
        .collect()
}

/// Inverse-CDF draw of one outcome label, deterministic in `seed`.
pub fn sample_outcome(records: &[MeasurementRecord], seed: u64) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no measurement records to sample from".into()));
    }
    if records.iter().any(|r| !(0.0..=1.0 + PROJECTOR_TOL).contains(&r.probability)) {
        return Err(Error::InvalidInput("record probability outside [0, 1]".into()));
    }
    let total: f64 = records.iter().map(|r| r.probability).sum();
    if (total - 1.0).abs() > PROJECTOR_TOL {
        return Err(Error::InvalidInput(format!("record probabilities sum to {total}, expected 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for r in records.iter().filter(|r| r.probability > 0.0) {
        acc += r.probability;
        last = Some(r);
        if u < acc {
            return Ok(r.label.clone());
        }
    }
    // u landed in the round-off gap above the last cumulative sum
    Ok(last.expect("total probability is 1").label.clone())
}

/// Result of projecting parties (1, 4) of `ρ₁₂ ⊗ ρ₃₄`.
#[derive(Debug, Clone)]
pub struct ContractionResult {
    pub probability: f64,
    /// Normalized state of parties (2, 3); `None` at negligible probability.
    pub post_state: Option<DensityMatrix>,
}

fn four_party_profiles(rho12: &DensityMatrix, rho34: &DensityMatrix, projector: &ComplexMatrix) -> Result<(usize, usize)> {
    let d12 = rho12.profile().dims();
    let d34 = rho34.profile().dims();
    if d12.len() != 2 || d34.len() != 2 || d12[0] != 2 || d34[1] != 2 {
        return Err(Error::DimensionMismatch(format!(
            "four-party contraction needs profiles [2, d] and [d', 2], got {d12:?} and {d34:?}"
        )));
    }
    if projector.rows() != 4 || !projector.is_square() {
        return Err(Error::DimensionMismatch("projector on parties (1, 4) must be 4x4".into()));
    }
    Ok((d12[1], d34[0]))
}

fn finish_contraction(unnormalized: ComplexMatrix, d2: usize, d3: usize) -> Result<ContractionResult> {
    let probability = unnormalized.trace().re.clamp(0.0, 1.0);
    let post_state = if probability < NEGLIGIBLE_PROBABILITY {
        None
    } else {
        Some(DensityMatrix::new(
            unnormalized.scale_real(1.0 / probability),
            DimensionProfile::new(vec![d2, d3])?,
        )?)
    };
    Ok(ContractionResult { probability, post_state })
}

/// `Tr₁₄[(P₁₄ ⊗ 𝟙₂₃)(ρ₁₂ ⊗ ρ₃₄)]` by index contraction; the four-party matrix
/// is never formed. `projector` is ordered (party 1, party 4).
pub fn four_party_contract(rho12: &DensityMatrix, rho34: &DensityMatrix, projector: &ComplexMatrix) -> Result<ContractionResult> {
    let (d2, d3) = four_party_profiles(rho12, rho34, projector)?;
    let r12 = rho12.matrix();
    let r34 = rho34.matrix();
    // block12[a][x][b, b'] = ρ₁₂[(x, b), (a, b')]
    let block12 = |a: usize, x: usize| {
        let mut m = ComplexMatrix::zeros(d2, d2);
        for b in 0..d2 {
            for bp in 0..d2 {
                m[(b, bp)] = r12[(x * d2 + b, a * d2 + bp)];
            }
        }
        m
    };
    // block34[d][y][c, c'] = ρ₃₄[(c, y), (c', d)]
    let block34 = |d: usize, y: usize| {
        let mut m = ComplexMatrix::zeros(d3, d3);
        for cc in 0..d3 {
            for cp in 0..d3 {
                m[(cc, cp)] = r34[(cc * 2 + y, cp * 2 + d)];
            }
        }
        m
    };
    let mut out = ComplexMatrix::zeros(d2 * d3, d2 * d3);
    for a in 0..2 {
        for d in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    let coeff = projector[(a * 2 + d, x * 2 + y)];
                    if coeff == ZERO {
                        continue;
                    }
                    out = &out + &tensor_product(&block12(a, x), &block34(d, y)).scale(coeff);
                }
            }
        }
    }
    finish_contraction(out.hermitian_part(), d2, d3)
}

/// Largest party dimension the dense four-party path accepts.
pub const DENSE_FOUR_PARTY_MAX_DIM: usize = 21;

/// Reference path for [`four_party_contract`]: materializes `ρ₁₂ ⊗ ρ₃₄`,
/// lifts the projector onto parties (1, 4) and traces them out.
pub fn four_party_dense(rho12: &DensityMatrix, rho34: &DensityMatrix, projector: &ComplexMatrix) -> Result<ContractionResult> {
    let (d2, d3) = four_party_profiles(rho12, rho34, projector)?;
    if d2.max(d3) > DENSE_FOUR_PARTY_MAX_DIM {
        return Err(Error::Capacity {
            twice: (d2.max(d3) - 1) as u32,
            max: (DENSE_FOUR_PARTY_MAX_DIM - 1) as u32,
        });
    }
    let joint = rho12.tensor(rho34);
    let lifted = embed_operator(projector, &[0, 3], joint.profile())?;
    let projected = &(&lifted * joint.matrix()) * &lifted;
    let reduced = partial_trace(&projected, joint.profile(), &[1, 2])?;
    finish_contraction(reduced, d2, d3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{equivalent_werner, qubit_state, BlochVector};

    fn spin(twice: u32) -> HalfInteger {
        HalfInteger::from_twice(twice).unwrap()
    }

    fn rank(p: &ComplexMatrix) -> usize {
        p.trace().re.round() as usize
    }

    #[test]
    fn bell_basis_properties() {
        let set = bell_projectors();
        let sum = set.projectors().iter().fold(ComplexMatrix::zeros(4, 4), |acc, p| &acc + &p.matrix);
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        for (i, p) in set.projectors().iter().enumerate() {
            assert_eq!(rank(&p.matrix), 1);
            for q in &set.projectors()[i + 1..] {
                assert!((&p.matrix * &q.matrix).max_abs() < 1e-12);
            }
        }
        // singlet (|01> - |10>)/√2 is the +1 eigenvector of the first projector
        let r = 1.0 / 2f64.sqrt();
        let singlet = [ZERO, crate::linalg::c(r, 0.0), crate::linalg::c(-r, 0.0), ZERO];
        let image = set.get("psi-").unwrap().mul_vec(&singlet);
        for (a, b) in image.iter().zip(&singlet) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn dichotomic_ranks_and_spectral_reconstruction() {
        for twice in 1..=20 {
            let s = spin(twice);
            let set = dichotomic_projectors(s);
            let plus = set.get("plus").unwrap();
            let minus = set.get("minus").unwrap();
            assert_eq!(rank(plus), twice as usize + 2);
            assert_eq!(rank(minus), twice as usize);
            assert!((plus * minus).max_abs() < 1e-10);
            let sv = s.value();
            let hat = spin_operators(s).normalized();
            let p = pauli();
            let op = coupling(hat.components(), [&p[0], &p[1], &p[2]], &[1.0, 1.0, 1.0]);
            let rebuilt = &plus.clone() - &minus.scale_real((sv + 1.0) / sv);
            assert!(rebuilt.max_abs_diff(&op) < 1e-10);
            // closed form Π₁ = (S+1)/(2S+1)(𝟙 + S/(S+1) Ŝ·σ⃗)
            let closed = (&ComplexMatrix::identity(op.rows()) + &op.scale_real(sv / (sv + 1.0)))
                .scale_real((sv + 1.0) / (2.0 * sv + 1.0));
            assert!(closed.max_abs_diff(plus) < 1e-10);
        }
    }

    #[test]
    fn direction_projector_examples() {
        let set = direction_projectors(&[0.0, 0.0, 1.0]).unwrap();
        assert!(set.get("+1").unwrap().max_abs_diff(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0])) < 1e-15);
        assert!(set.get("-1").unwrap().max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.0, 1.0])) < 1e-15);
        let m = [0.48, -0.6, 0.64];
        let set = direction_projectors(&m).unwrap();
        for (label, sign) in [("+1", 1.0), ("-1", -1.0)] {
            let rho = DensityMatrix::single(set.get(label).unwrap().clone()).unwrap();
            assert!((rho.expectation(&pauli_dot(&m)) - sign).abs() < 1e-12);
        }
        assert!(direction_projectors(&[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn measurement_of_an_eigenstate_is_certain() {
        let up = qubit_state(&BlochVector::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        let records = measure(&up, &direction_projectors(&[0.0, 0.0, 1.0]).unwrap(), &[0]).unwrap();
        assert!((records[0].probability - 1.0).abs() < 1e-15);
        assert!(records[0].post_state.as_ref().unwrap().matrix().max_abs_diff(up.matrix()) < 1e-15);
        assert!(records[1].post_state.is_none());
    }

    #[test]
    fn measure_rejects_mismatched_profile() {
        let w = equivalent_werner(0.5, spin(2)).unwrap();
        let set = bell_projectors();
        assert!(matches!(measure(&w, &set, &[0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn dichotomic_measurement_probabilities() {
        let s = spin(3);
        let sv = s.value();
        let p = BlochVector::new(0.2, 0.1, -0.5).unwrap();
        let joint = crate::state::equivalent_qudit(s, &p).unwrap().tensor(&qubit_state(&BlochVector::new(0.0, 0.0, 0.0).unwrap()).unwrap());
        let records = measure(&joint, &dichotomic_projectors(s), &[1]).unwrap();
        assert!((records[0].probability - (sv + 1.0) / (2.0 * sv + 1.0)).abs() < 1e-12);
        assert!((records[1].probability - sv / (2.0 * sv + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_fair() {
        let single = vec![MeasurementRecord { label: "only".into(), probability: 1.0, post_state: None }];
        for seed in [0, 1, u64::MAX] {
            assert_eq!(sample_outcome(&single, seed).unwrap(), "only");
        }
        let bell: Vec<MeasurementRecord> = BELL_PATTERNS
            .iter()
            .map(|(l, _)| MeasurementRecord { label: l.to_string(), probability: 0.25, post_state: None })
            .collect();
        assert_eq!(sample_outcome(&bell, 42).unwrap(), sample_outcome(&bell, 42).unwrap());
        let draws = 100_000u64;
        let mut counts = [0usize; 4];
        for seed in 0..draws {
            let label = sample_outcome(&bell, seed).unwrap();
            counts[BELL_PATTERNS.iter().position(|(l, _)| *l == label).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
        assert!(sample_outcome(&[], 1).is_err());
        let bad = vec![MeasurementRecord { label: "a".into(), probability: 0.5, post_state: None }];
        assert!(sample_outcome(&bad, 1).is_err());
    }

    #[test]
    fn contraction_singlet_closed_form() {
        for twice in 1..=6 {
            let s = spin(twice);
            let (alpha, beta) = (0.4, -0.3);
            let rho12 = equivalent_werner(alpha, s).unwrap();
            // ρ₃₄ = (1/(2(2S+1)))(𝟙 − β Ŝ₃·σ⃗₄): qudit first
            let hat = spin_operators(s).normalized();
            let p = pauli();
            let coupling34 = coupling(hat.components(), [&p[0], &p[1], &p[2]], &[1.0, 1.0, 1.0]);
            let n = 2 * s.dim();
            let m34 = (&ComplexMatrix::identity(n) - &coupling34.scale_real(beta)).scale_real(1.0 / n as f64);
            let rho34 = DensityMatrix::new(m34, DimensionProfile::new(vec![s.dim(), 2]).unwrap()).unwrap();
            let singlet = bell_projector(&BELL_PATTERNS[0].1);
            let fast = four_party_contract(&rho12, &rho34, &singlet).unwrap();
            assert!((fast.probability - 0.25).abs() < 1e-12);
            let ss = coupling(hat.components(), hat.components(), &[1.0, 1.0, 1.0]);
            let d2 = (s.dim() * s.dim()) as f64;
            let want = (&ComplexMatrix::identity(s.dim() * s.dim()) - &ss.scale_real(alpha * beta)).scale_real(1.0 / d2);
            assert!(fast.post_state.as_ref().unwrap().matrix().max_abs_diff(&want) < 1e-12);
            if twice <= 6 {
                let dense = four_party_dense(&rho12, &rho34, &singlet).unwrap();
                assert!((dense.probability - fast.probability).abs() < 1e-12);
                assert!(dense.post_state.unwrap().matrix().max_abs_diff(fast.post_state.unwrap().matrix()) < 1e-10);
            }
        }
    }
}
