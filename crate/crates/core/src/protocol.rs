//! The four remote-transfer protocols over separable spin-S Werner
//! equivalents. Every run evaluates all measurement branches, applies the
//! correction table, and checks each branch against its closed form; the
//! seed only picks which branch the transcript reports.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{embed_operator, conjugate, ComplexMatrix, DimensionProfile};
use crate::measure::{
    bell_projectors, dichotomic_projectors, direction_projectors, four_party_contract, measure, sample_outcome,
    MeasurementRecord, BELL_PATTERNS,
};
use crate::metrics::{fidelity, hs_distance};
use crate::spin::{coupling, dot, norm, pauli, require_unit, spin_operators, wigner_rotation, HalfInteger, Vec3};
use crate::state::{
    equivalent_qudit, equivalent_werner, qubit_state, vector_polarised, vector_polarization, BlochVector,
    DensityMatrix,
};

/// Largest tolerated max-entry gap between a branch and its closed form.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Largest tolerated gap between a branch probability and its closed form.
pub const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProtocolId {
    /// Unknown qubit, Bell measurement.
    A,
    /// Known qubit, single-qubit measurement.
    B,
    /// Unknown vector-polarised qudit, dichotomic measurement.
    C,
    /// Correlation swapping between two channels.
    D,
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            ProtocolId::A => "A",
            ProtocolId::B => "B",
            ProtocolId::C => "C",
            ProtocolId::D => "D",
        };
        f.write_str(c)
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ProtocolId::A),
            "B" => Ok(ProtocolId::B),
            "C" => Ok(ProtocolId::C),
            "D" => Ok(ProtocolId::D),
            other => Err(Error::InvalidInput(format!("unknown protocol '{other}', expected A, B, C or D"))),
        }
    }
}

/// A rotation by `angle` about `axis`; `axis = None` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correction {
    pub axis: Option<Vec3>,
    pub angle: f64,
}

impl Correction {
    pub const IDENTITY: Correction = Correction { axis: None, angle: 0.0 };

    pub fn pi(axis: Vec3) -> Self {
        Self { axis: Some(axis), angle: std::f64::consts::PI }
    }

    pub fn is_identity(&self) -> bool {
        self.axis.is_none()
    }

    /// Applies the spin-S rotation to subsystem `party` of `state`.
    pub fn apply(&self, state: &DensityMatrix, s: HalfInteger, party: usize) -> Result<DensityMatrix> {
        let Some(axis) = self.axis else {
            return Ok(state.clone());
        };
        let u = wigner_rotation(s, &axis, self.angle)?;
        let lifted = embed_operator(&u, &[party], state.profile())?;
        DensityMatrix::new(conjugate(&lifted, state.matrix()).hermitian_part(), state.profile().clone())
    }
}

const X: Vec3 = [1.0, 0.0, 0.0];
const Y: Vec3 = [0.0, 1.0, 0.0];
const Z: Vec3 = [0.0, 0.0, 1.0];

/// Outcome label → correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRule {
    entries: Vec<(String, Correction)>,
}

impl CorrectionRule {
    pub fn new(entries: Vec<(String, Correction)>) -> Self {
        Self { entries }
    }

    /// Bell outcomes on (source, channel qubit) → rotation of Bob's qudit:
    /// singlet 𝟙, `φ⁻` R_x(π), `φ⁺` R_y(π), `ψ⁺` R_z(π).
    pub fn unknown_qubit() -> Self {
        Self::new(vec![
            ("psi-".into(), Correction::IDENTITY),
            ("phi-".into(), Correction::pi(X)),
            ("phi+".into(), Correction::pi(Y)),
            ("psi+".into(), Correction::pi(Z)),
        ])
    }

    /// Bell outcomes on the two outer qubits → rotation of party 2:
    /// singlet 𝟙, `φ⁻` R_x(π), `ψ⁺` R_z(π), `φ⁺` R_y(π).
    pub fn discord_swap() -> Self {
        Self::new(vec![
            ("psi-".into(), Correction::IDENTITY),
            ("phi-".into(), Correction::pi(X)),
            ("psi+".into(), Correction::pi(Z)),
            ("phi+".into(), Correction::pi(Y)),
        ])
    }

    /// `+1` needs nothing; `−1` is undone by a π rotation about
    /// [`perpendicular_axis`].
    pub fn known_qubit(m: &Vec3) -> Self {
        Self::new(vec![
            ("+1".into(), Correction::IDENTITY),
            ("-1".into(), Correction::pi(perpendicular_axis(m))),
        ])
    }

    /// Both dichotomic outcomes are used as they are.
    pub fn unknown_qudit() -> Self {
        Self::new(vec![("plus".into(), Correction::IDENTITY), ("minus".into(), Correction::IDENTITY)])
    }

    pub fn get(&self, label: &str) -> Result<Correction> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::InvalidInput(format!("correction rule has no entry for outcome '{label}'")))
    }

    /// Copy with one entry replaced.
    pub fn with(mut self, label: &str, correction: Correction) -> Self {
        match self.entries.iter_mut().find(|(l, _)| l == label) {
            Some(entry) => entry.1 = correction,
            None => self.entries.push((label.into(), correction)),
        }
        self
    }

    pub fn entries(&self) -> &[(String, Correction)] {
        &self.entries
    }
}

/// Unit component of `x̂` orthogonal to `m̂`, or `ŷ` when `m̂ = ±x̂`.
pub fn perpendicular_axis(m: &Vec3) -> Vec3 {
    let proj = dot(&X, m);
    let v = [1.0 - proj * m[0], -proj * m[1], -proj * m[2]];
    let n = norm(&v);
    if n < 1e-8 {
        Y
    } else {
        v.map(|x| x / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Retrieval {
    /// `Tr(ρ_out · (3S/(S+1)) Ŝ_i)`.
    pub raw: Vec3,
    /// Branch-specific rescaling applied to `raw`.
    pub compensation: f64,
    /// `compensation · raw`.
    pub recovered: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranscriptMetrics {
    pub fidelity: f64,
    pub hs_distance: f64,
    pub relative_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub outcome: String,
    pub probability: f64,
    pub expected_probability: f64,
    pub correction: Correction,
    /// Max-entry gap between the uncorrected post state and its closed form.
    pub pre_residual: f64,
    /// Max-entry gap between the corrected output and the protocol's target.
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<Retrieval>,
    #[serde(skip)]
    pub pre_state: DensityMatrix,
    #[serde(skip)]
    pub output_state: DensityMatrix,
    #[serde(skip)]
    pub expected_pre: DensityMatrix,
    #[serde(skip)]
    pub expected_output: DensityMatrix,
}

impl BranchRecord {
    pub fn passes(&self) -> bool {
        self.residual < RESIDUAL_TOL
            && self.pre_residual < RESIDUAL_TOL
            && (self.probability - self.expected_probability).abs() < PROBABILITY_TOL
    }
}

fn matrix_pairs<S: Serializer>(state: &DensityMatrix, ser: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = state.matrix().as_slice().iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(ser)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolTranscript {
    pub protocol: ProtocolId,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub spin_twice: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch: Option<Vec3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec3>,
    pub seed: u64,
    pub rng: &'static str,
    pub outcome: String,
    pub probability: f64,
    pub correction: Correction,
    pub residual: f64,
    pub metrics: TranscriptMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<Retrieval>,
    pub branches: Vec<BranchRecord>,
    /// Row-major `[re, im]` pairs.
    #[serde(serialize_with = "matrix_pairs")]
    pub output_state: DensityMatrix,
    #[serde(skip)]
    pub expected_closed_form: DensityMatrix,
}

impl ProtocolTranscript {
    pub fn spin(&self) -> HalfInteger {
        HalfInteger::from_twice(self.spin_twice).expect("transcript spin was validated")
    }

    pub fn branch(&self, outcome: &str) -> Option<&BranchRecord> {
        self.branches.iter().find(|b| b.outcome == outcome)
    }

    /// Worst residual over all branches, corrected and uncorrected.
    pub fn max_residual(&self) -> f64 {
        self.branches.iter().map(|b| b.residual.max(b.pre_residual)).fold(0.0, f64::max)
    }

    pub fn max_probability_error(&self) -> f64 {
        self.branches.iter().map(|b| (b.probability - b.expected_probability).abs()).fold(0.0, f64::max)
    }

    /// Every branch matches its closed forms.
    pub fn verified(&self) -> bool {
        self.branches.iter().all(BranchRecord::passes)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("transcript serializes")
    }
}

/// Expected behaviour of one measurement branch.
struct BranchPlan {
    label: String,
    probability: f64,
    pre: DensityMatrix,
    output: DensityMatrix,
    retrieval_compensation: Option<f64>,
}

/// How transcript metrics are formed from the sampled output.
enum MetricBasis {
    /// Compare with the ideal equivalent state: fidelity and distance to the
    /// target, relative distance `d₀ − d`.
    Target(DensityMatrix),
    /// Compare with the maximally mixed state; relative distance is the
    /// distance from it.
    Mixed,
}

struct RunContext {
    protocol: ProtocolId,
    alpha: f64,
    beta: Option<f64>,
    s: HalfInteger,
    bloch: Option<Vec3>,
    direction: Option<Vec3>,
    seed: u64,
    /// Subsystem of the post state that the corrections act on.
    party: usize,
    metrics: MetricBasis,
}

fn retrieval(state: &DensityMatrix, s: HalfInteger, compensation: f64) -> Retrieval {
    let sv = s.value();
    let scale = 3.0 * sv / (sv + 1.0);
    let hat = spin_operators(s).normalized();
    let ops = hat.components();
    let raw = [0, 1, 2].map(|i| scale * state.expectation(ops[i]));
    Retrieval { raw, compensation, recovered: raw.map(|x| compensation * x) }
}

fn finish(
    ctx: RunContext,
    records: Vec<MeasurementRecord>,
    plans: Vec<BranchPlan>,
    rules: &CorrectionRule,
) -> Result<ProtocolTranscript> {
    let mut branches = Vec::with_capacity(plans.len());
    for plan in plans {
        let record = records
            .iter()
            .find(|r| r.label == plan.label)
            .ok_or_else(|| Error::Numerical(format!("measurement produced no outcome '{}'", plan.label)))?;
        let pre = record
            .post_state
            .clone()
            .ok_or_else(|| Error::Numerical(format!("outcome '{}' has vanishing probability", plan.label)))?;
        let correction = rules.get(&plan.label)?;
        let output = correction.apply(&pre, ctx.s, ctx.party)?;
        branches.push(BranchRecord {
            outcome: plan.label,
            probability: record.probability,
            expected_probability: plan.probability,
            correction,
            pre_residual: pre.matrix().max_abs_diff(plan.pre.matrix()),
            residual: output.matrix().max_abs_diff(plan.output.matrix()),
            retrieval: plan.retrieval_compensation.map(|k| retrieval(&output, ctx.s, k)),
            pre_state: pre,
            output_state: output,
            expected_pre: plan.pre,
            expected_output: plan.output,
        });
    }
    let outcome = sample_outcome(&records, ctx.seed)?;
    let chosen = branches.iter().find(|b| b.outcome == outcome).expect("sampled label has a branch");
    let output = chosen.output_state.clone();
    let metrics = match &ctx.metrics {
        MetricBasis::Target(ideal) => {
            let mixed = DensityMatrix::maximally_mixed(ideal.profile().clone());
            let d = hs_distance(&output, ideal)?;
            TranscriptMetrics {
                fidelity: fidelity(&output, ideal)?,
                hs_distance: d,
                relative_distance: hs_distance(ideal, &mixed)? - d,
            }
        }
        MetricBasis::Mixed => {
            let mixed = DensityMatrix::maximally_mixed(output.profile().clone());
            let d = hs_distance(&output, &mixed)?;
            TranscriptMetrics { fidelity: fidelity(&output, &mixed)?, hs_distance: d, relative_distance: d }
        }
    };
    Ok(ProtocolTranscript {
        protocol: ctx.protocol,
        alpha: ctx.alpha,
        beta: ctx.beta,
        spin_twice: ctx.s.twice(),
        bloch: ctx.bloch,
        direction: ctx.direction,
        seed: ctx.seed,
        rng: crate::measure::RNG_NAME,
        outcome: chosen.outcome.clone(),
        probability: chosen.probability,
        correction: chosen.correction,
        residual: chosen.residual,
        metrics,
        retrieval: chosen.retrieval,
        output_state: output,
        expected_closed_form: chosen.expected_output.clone(),
        branches,
    })
}

/// Teleports the polarisation of an unknown qubit `½(𝟙 + σ⃗·p⃗)` onto Bob's
/// spin-S qudit: `(1/(2S+1))(𝟙 + αŜ·p⃗)` after correction.
pub fn protocol_unknown_qubit(p: &BlochVector, alpha: f64, s: HalfInteger, seed: u64) -> Result<ProtocolTranscript> {
    protocol_unknown_qubit_with(p, alpha, s, seed, &CorrectionRule::unknown_qubit())
}

pub fn protocol_unknown_qubit_with(
    p: &BlochVector,
    alpha: f64,
    s: HalfInteger,
    seed: u64,
    rules: &CorrectionRule,
) -> Result<ProtocolTranscript> {
    let channel = equivalent_werner(alpha, s)?;
    let joint = qubit_state(p)?.tensor(&channel);
    let records = measure(&joint, &bell_projectors(), &[2])?;
    let pv = p.as_array();
    let target = vector_polarised(s, &pv.map(|x| alpha * x))?;
    let plans = BELL_PATTERNS
        .iter()
        .map(|(label, c)| {
            // outcome with correlation signs c leaves polarisation −c_i α p_i
            let v = [0, 1, 2].map(|i| -c[i] * alpha * pv[i]);
            Ok(BranchPlan {
                label: label.to_string(),
                probability: 0.25,
                pre: vector_polarised(s, &v)?,
                output: target.clone(),
                retrieval_compensation: Some(1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = RunContext {
        protocol: ProtocolId::A,
        alpha,
        beta: None,
        s,
        bloch: Some(pv),
        direction: None,
        seed,
        party: 0,
        metrics: MetricBasis::Target(equivalent_qudit(s, p)?),
    };
    finish(ctx, records, plans, rules)
}

/// Remote preparation of a state known to Alice: she measures `σ⃗·m̂` on her
/// channel qubit and Bob ends with `(1/(2S+1))(𝟙 − αŜ·m̂)`.
pub fn protocol_known_qubit(m: &Vec3, alpha: f64, s: HalfInteger, seed: u64) -> Result<ProtocolTranscript> {
    require_unit(m, "measurement direction")?;
    protocol_known_qubit_with(m, alpha, s, seed, &CorrectionRule::known_qubit(m))
}

pub fn protocol_known_qubit_with(
    m: &Vec3,
    alpha: f64,
    s: HalfInteger,
    seed: u64,
    rules: &CorrectionRule,
) -> Result<ProtocolTranscript> {
    require_unit(m, "measurement direction")?;
    let channel = equivalent_werner(alpha, s)?;
    let records = measure(&channel, &direction_projectors(m)?, &[1])?;
    let target = vector_polarised(s, &m.map(|x| -alpha * x))?;
    let plans = vec![
        BranchPlan {
            label: "+1".into(),
            probability: 0.5,
            pre: target.clone(),
            output: target.clone(),
            retrieval_compensation: Some(1.0),
        },
        BranchPlan {
            label: "-1".into(),
            probability: 0.5,
            pre: vector_polarised(s, &m.map(|x| alpha * x))?,
            output: target,
            retrieval_compensation: Some(1.0),
        },
    ];
    let ctx = RunContext {
        protocol: ProtocolId::B,
        alpha,
        beta: None,
        s,
        bloch: None,
        direction: Some(*m),
        seed,
        party: 0,
        metrics: MetricBasis::Target(vector_polarised(s, &m.map(|x| -x))?),
    };
    finish(ctx, records, plans, rules)
}

/// Transfers the polarisation of a vector-polarised qudit
/// `(1/(2S+1))(𝟙 + Ŝ·p⃗)` via the dichotomic measurement of `Ŝ₁·σ⃗₂`.
/// Outcome `"plus"` leaves `(𝟙 − (α/3)Ŝ·p⃗)/(2S+1)`, `"minus"` leaves
/// `(𝟙 + α(S+1)/(3S) Ŝ·p⃗)/(2S+1)`; no correction is applied. Each branch's
/// retrieval record rescales by the factor that returns `∓αp⃗`: `3` and
/// `3S/(S+1)` respectively.
pub fn protocol_unknown_qudit(p: &BlochVector, alpha: f64, s: HalfInteger, seed: u64) -> Result<ProtocolTranscript> {
    protocol_unknown_qudit_with(p, alpha, s, seed, &CorrectionRule::unknown_qudit())
}

/// As [`protocol_unknown_qudit`], starting from an explicit qudit state.
/// States with polarisation beyond the vector part are rejected.
pub fn protocol_unknown_qudit_from_state(source: &DensityMatrix, alpha: f64, seed: u64) -> Result<ProtocolTranscript> {
    let p = vector_polarization(source)?;
    let s = HalfInteger::from_twice(source.dim() as u32 - 1)?;
    protocol_unknown_qudit(&p, alpha, s, seed)
}

pub fn protocol_unknown_qudit_with(
    p: &BlochVector,
    alpha: f64,
    s: HalfInteger,
    seed: u64,
    rules: &CorrectionRule,
) -> Result<ProtocolTranscript> {
    let sv = s.value();
    let source = equivalent_qudit(s, p)?;
    let channel = equivalent_werner(alpha, s)?;
    let joint = source.tensor(&channel);
    let records = measure(&joint, &dichotomic_projectors(s), &[2])?;
    let pv = p.as_array();
    let n = 2.0 * sv + 1.0;
    let plus = vector_polarised(s, &pv.map(|x| -alpha / 3.0 * x))?;
    let minus = vector_polarised(s, &pv.map(|x| alpha * (sv + 1.0) / (3.0 * sv) * x))?;
    let plans = vec![
        BranchPlan {
            label: "plus".into(),
            probability: (sv + 1.0) / n,
            pre: plus.clone(),
            output: plus,
            retrieval_compensation: Some(3.0),
        },
        BranchPlan {
            label: "minus".into(),
            probability: sv / n,
            pre: minus.clone(),
            output: minus,
            retrieval_compensation: Some(3.0 * sv / (sv + 1.0)),
        },
    ];
    let ctx = RunContext {
        protocol: ProtocolId::C,
        alpha,
        beta: None,
        s,
        bloch: Some(pv),
        direction: None,
        seed,
        party: 0,
        metrics: MetricBasis::Mixed,
    };
    finish(ctx, records, plans, rules)
}

/// `(1/(2(2S+1)))(𝟙 − β Ŝ·σ⃗)` with the qudit first.
fn channel_qudit_first(beta: f64, s: HalfInteger) -> Result<DensityMatrix> {
    equivalent_werner(beta, s)?;
    let hat = spin_operators(s).normalized();
    let p = pauli();
    let n = 2 * s.dim();
    let m = (&ComplexMatrix::identity(n) - &coupling(hat.components(), [&p[0], &p[1], &p[2]], &[1.0; 3]).scale_real(beta))
        .scale_real(1.0 / n as f64);
    DensityMatrix::new(m, DimensionProfile::new(vec![s.dim(), 2])?)
}

/// `(1/(2S+1)²)(𝟙 + αβ Σ_i c_i Ŝ₂ᵢŜ₃ᵢ)`.
fn swapped_state(alpha: f64, beta: f64, s: HalfInteger, c: &Vec3) -> Result<DensityMatrix> {
    let hat = spin_operators(s).normalized();
    let n = s.dim() * s.dim();
    let corr = coupling(hat.components(), hat.components(), c);
    let m = (&ComplexMatrix::identity(n) + &corr.scale_real(alpha * beta)).scale_real(1.0 / n as f64);
    DensityMatrix::new(m, DimensionProfile::new(vec![s.dim(), s.dim()])?)
}

/// Swaps the correlations of two channels `ρ₁₂(α)` and `ρ₃₄(β)` onto the
/// qudits (2, 3) through a Bell measurement on qubits (1, 4). After the
/// correction on party 2 every outcome gives `(1/(2S+1)²)(𝟙 − αβ Ŝ₂·Ŝ₃)`.
pub fn protocol_discord_swap(alpha: f64, beta: f64, s: HalfInteger, seed: u64) -> Result<ProtocolTranscript> {
    protocol_discord_swap_with(alpha, beta, s, seed, &CorrectionRule::discord_swap())
}

pub fn protocol_discord_swap_with(
    alpha: f64,
    beta: f64,
    s: HalfInteger,
    seed: u64,
    rules: &CorrectionRule,
) -> Result<ProtocolTranscript> {
    let rho12 = equivalent_werner(alpha, s)?;
    let rho34 = channel_qudit_first(beta, s)?;
    let bell = bell_projectors();
    let target = swapped_state(alpha, beta, s, &[-1.0; 3])?;
    let mut records = Vec::with_capacity(4);
    let mut plans = Vec::with_capacity(4);
    for (label, c) in BELL_PATTERNS {
        let projector = bell.get(label).expect("Bell label");
        let r = four_party_contract(&rho12, &rho34, projector)?;
        records.push(MeasurementRecord { label: label.into(), probability: r.probability, post_state: r.post_state });
        plans.push(BranchPlan {
            label: label.into(),
            probability: 0.25,
            pre: swapped_state(alpha, beta, s, &c)?,
            output: target.clone(),
            retrieval_compensation: None,
        });
    }
    let ctx = RunContext {
        protocol: ProtocolId::D,
        alpha,
        beta: Some(beta),
        s,
        bloch: None,
        direction: None,
        seed,
        party: 0,
        metrics: MetricBasis::Mixed,
    };
    finish(ctx, records, plans, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::four_party_dense;
    use crate::metrics::polarisation_distance;
    use crate::spin::direction;

    fn spin(twice: u32) -> HalfInteger {
        HalfInteger::from_twice(twice).unwrap()
    }

    fn bloch(x: f64, y: f64, z: f64) -> BlochVector {
        BlochVector::new(x, y, z).unwrap()
    }

    #[test]
    fn unknown_qubit_all_branches() {
        for twice in 1..=6 {
            for alpha in [-0.3, 0.2, 0.8] {
                let p = bloch(0.3, -0.5, 0.6);
                let t = protocol_unknown_qubit(&p, alpha, spin(twice), 7).unwrap();
                assert!(t.verified(), "S2={twice} α={alpha}: {}", t.max_residual());
                assert_eq!(t.branches.len(), 4);
                for b in &t.branches {
                    let r = b.retrieval.unwrap();
                    for i in 0..3 {
                        assert!((r.recovered[i] - alpha * p.as_array()[i]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_qubit_second_outcome_pattern() {
        let s = spin(2);
        let p = bloch(0.6, 0.0, 0.8);
        let t = protocol_unknown_qubit(&p, 0.5, s, 1).unwrap();
        let b = t.branch("phi-").unwrap();
        let want = vector_polarised(s, &[0.5 * 0.6, 0.0, -0.5 * 0.8]).unwrap();
        assert!(b.pre_state.matrix().max_abs_diff(want.matrix()) < 1e-12);
        assert_eq!(b.correction, Correction::pi([1.0, 0.0, 0.0]));
    }

    #[test]
    fn zero_alpha_gives_mixed_output() {
        let s = spin(3);
        let mixed = DensityMatrix::maximally_mixed(DimensionProfile::new(vec![4]).unwrap());
        for seed in 0..4 {
            let t = protocol_unknown_qubit(&bloch(0.0, 0.0, 1.0), 0.0, s, seed).unwrap();
            assert!(t.output_state.matrix().max_abs_diff(mixed.matrix()) < 1e-12);
            let c = protocol_unknown_qudit(&bloch(0.0, 1.0, 0.0), 0.0, s, seed).unwrap();
            assert!(c.output_state.matrix().max_abs_diff(mixed.matrix()) < 1e-12);
        }
        let d = protocol_discord_swap(0.0, 0.0, s, 3).unwrap();
        let mixed16 = DensityMatrix::maximally_mixed(DimensionProfile::new(vec![4, 4]).unwrap());
        assert!(d.output_state.matrix().max_abs_diff(mixed16.matrix()) < 1e-12);
    }

    #[test]
    fn known_qubit_example() {
        let t = protocol_known_qubit(&[0.0, 0.0, 1.0], 0.5, spin(2), 11).unwrap();
        assert!(t.verified());
        let want = ComplexMatrix::from_real_diagonal(&[1.0 / 6.0, 1.0 / 3.0, 0.5]);
        for b in &t.branches {
            assert!(b.output_state.matrix().max_abs_diff(&want) < 1e-12);
        }
        assert!(t.branch("+1").unwrap().correction.is_identity());
        assert!(protocol_known_qubit(&[0.0, 0.0, 2.0], 0.5, spin(2), 1).is_err());
    }

    #[test]
    fn perpendicular_axis_choice() {
        assert_eq!(perpendicular_axis(&[0.0, 0.0, 1.0]), [1.0, 0.0, 0.0]);
        assert_eq!(perpendicular_axis(&[1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]);
        assert_eq!(perpendicular_axis(&[-1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]);
        for (theta, phi) in [(0.3, 0.2), (1.5, 4.0), (2.8, 1.0)] {
            let m = direction(theta, phi);
            let a = perpendicular_axis(&m);
            assert!(dot(&a, &m).abs() < 1e-14 && (norm(&a) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_qudit_branches() {
        for twice in 1..=10 {
            let s = spin(twice);
            let sv = s.value();
            let p = bloch(0.2, -0.4, 0.5);
            let alpha = 0.7;
            let t = protocol_unknown_qudit(&p, alpha, s, 5).unwrap();
            assert!(t.verified(), "S2={twice}: {}", t.max_residual());
            assert!((t.branch("plus").unwrap().probability - (sv + 1.0) / (2.0 * sv + 1.0)).abs() < 1e-12);
            for b in &t.branches {
                let sign = if b.outcome == "plus" { -1.0 } else { 1.0 };
                let r = b.retrieval.unwrap();
                for i in 0..3 {
                    assert!((r.recovered[i] - sign * alpha * p.as_array()[i]).abs() < 1e-10);
                }
            }
            let plus = t.branch("plus").unwrap().retrieval.unwrap();
            assert_eq!(plus.compensation, 3.0);
            let mixed_gap = t.branch("minus").unwrap().output_state.matrix().max_abs_diff(t.branch("plus").unwrap().output_state.matrix());
            assert!(mixed_gap > 0.0);
        }
    }

    #[test]
    fn unknown_qudit_from_state_rejects_tensor_polarisation() {
        let s = spin(2);
        let good = vector_polarised(s, &[0.1, 0.2, 0.3]).unwrap();
        assert!(protocol_unknown_qudit_from_state(&good, 0.5, 0).unwrap().verified());
        let bad = DensityMatrix::single(ComplexMatrix::from_real_diagonal(&[0.5, 0.0, 0.5])).unwrap();
        assert!(matches!(protocol_unknown_qudit_from_state(&bad, 0.5, 0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn discord_swap_all_outcomes() {
        for twice in 1..=6 {
            let s = spin(twice);
            let t = protocol_discord_swap(0.5, 0.5, s, 9).unwrap();
            assert!(t.verified(), "S2={twice}: {}", t.max_residual());
            let metric = t.metrics.hs_distance;
            let hat = spin_operators(s).normalized();
            let ss = coupling(hat.components(), hat.components(), &[1.0; 3]);
            let expected = ss.scale_real(0.25 / (s.dim() * s.dim()) as f64).frobenius_norm();
            assert!((metric - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn discord_swap_case_one_pattern_and_dense_agreement() {
        let s = spin(2);
        let t = protocol_discord_swap(0.6, -0.4, s, 0).unwrap();
        let b = t.branch("phi-").unwrap();
        let want = swapped_state(0.6, -0.4, s, &[-1.0, 1.0, 1.0]).unwrap();
        assert!(b.pre_state.matrix().max_abs_diff(want.matrix()) < 1e-12);
        let rho12 = equivalent_werner(0.6, s).unwrap();
        let rho34 = channel_qudit_first(-0.4, s).unwrap();
        for (label, _) in BELL_PATTERNS {
            let p = bell_projectors().get(label).unwrap().clone();
            let dense = four_party_dense(&rho12, &rho34, &p).unwrap();
            let fast = four_party_contract(&rho12, &rho34, &p).unwrap();
            assert!(dense.post_state.unwrap().matrix().max_abs_diff(fast.post_state.unwrap().matrix()) < 1e-10);
        }
    }

    #[test]
    fn corrupted_rule_is_detected() {
        let bad = CorrectionRule::unknown_qubit().with("phi+", Correction::pi([0.0, 0.0, 1.0]));
        let t = protocol_unknown_qubit_with(&bloch(0.3, 0.4, 0.5), 0.8, spin(1), 0, &bad).unwrap();
        assert!(!t.verified());
        assert!(!t.branch("phi+").unwrap().passes());
        assert!(t.branch("psi-").unwrap().passes());
    }

    #[test]
    fn transcript_json_shape() {
        let t = protocol_unknown_qubit(&bloch(0.0, 0.0, 1.0), 0.8, spin(8), 42).unwrap();
        let v = t.to_json();
        for key in ["protocol", "alpha", "spin_twice", "bloch", "seed", "outcome", "probability", "correction", "residual", "metrics", "output_state"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v.get("beta").is_none() && v.get("direction").is_none());
        assert_eq!(v["protocol"], "A");
        assert_eq!(v["output_state"].as_array().unwrap().len(), 81);
        assert!((v["probability"].as_f64().unwrap() - 0.25).abs() < 1e-12);
        let m = &v["metrics"];
        assert!((m["relative_distance"].as_f64().unwrap() - 0.8 * polarisation_distance(spin(8))).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = bloch(0.1, 0.2, 0.3);
        let a = protocol_unknown_qubit(&p, 0.5, spin(1), 1234).unwrap();
        let b = protocol_unknown_qubit(&p, 0.5, spin(1), 1234).unwrap();
        assert_eq!(a.outcome, b.outcome);
        let outcomes: std::collections::HashSet<String> =
            (0..64).map(|seed| protocol_unknown_qubit(&p, 0.5, spin(1), seed).unwrap().outcome).collect();
        assert_eq!(outcomes.len(), 4);
    }

    #[test]
    fn protocol_id_parsing() {
        assert_eq!("a".parse::<ProtocolId>().unwrap(), ProtocolId::A);
        assert_eq!("D".parse::<ProtocolId>().unwrap(), ProtocolId::D);
        assert!("E".parse::<ProtocolId>().is_err());
    }
}
