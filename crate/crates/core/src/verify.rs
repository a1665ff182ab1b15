//! Self-verification suites, grouped by module scope. Every check compares a
//! computed quantity with an independent closed form and reports the worst
//! error against its tolerance.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    embed_operator, hermitian_eig, partial_trace, psd_sqrt, tensor_product, unitary_from_generator, ComplexMatrix,
    DimensionProfile, I,
};
use crate::measure::{
    bell_projectors, dichotomic_projectors, four_party_contract, four_party_dense, sample_outcome, MeasurementRecord,
    BELL_PATTERNS,
};
use crate::metrics::{
    asymptotics_check, disturbance_along, disturbance_witness, equivalent_fidelity_closed_form, fidelity, hs_distance,
    polarisation_distance, relative_distance, WitnessSearch,
};
use crate::protocol::{
    protocol_discord_swap_with, protocol_known_qubit, protocol_unknown_qubit_with, protocol_unknown_qudit,
    CorrectionRule, ProtocolTranscript,
};
use crate::sphere::SphereGrid;
use crate::spin::{coupling, direction, pauli, scs_resolution_check, spin_operators, CoherentStates, HalfInteger, Vec3};
use crate::state::{
    equivalent_qudit, equivalent_werner, q_function, qubit_state, s_min, separable_decomposition, vector_polarised,
    vector_polarization, BlochVector, DensityMatrix,
};
use crate::sweep::{sweep_distance, sweep_fidelity, AlphaRange, SpinMode, SpinRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    MatrixKernel,
    SpinAlgebra,
    StateFactory,
    MeasurementEngine,
    ProtocolSuite,
    Metrics,
    Sweeps,
}

impl Scope {
    pub const ALL: [Scope; 7] = [
        Scope::MatrixKernel,
        Scope::SpinAlgebra,
        Scope::StateFactory,
        Scope::MeasurementEngine,
        Scope::ProtocolSuite,
        Scope::Metrics,
        Scope::Sweeps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scope::MatrixKernel => "matrix-kernel",
            Scope::SpinAlgebra => "spin-algebra",
            Scope::StateFactory => "state-factory",
            Scope::MeasurementEngine => "measurement-engine",
            Scope::ProtocolSuite => "protocol-suite",
            Scope::Metrics => "metrics",
            Scope::Sweeps => "sweeps",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `all` or a scope; short aliases such as `linalg`, `spin`,
/// `state`, `measure`, `protocol` and `sweep` are accepted.
pub fn parse_scopes(s: &str) -> Result<Vec<Scope>> {
    let scope = match s.trim().to_ascii_lowercase().as_str() {
        "all" => return Ok(Scope::ALL.to_vec()),
        "matrix-kernel" | "linalg" => Scope::MatrixKernel,
        "spin-algebra" | "spin" => Scope::SpinAlgebra,
        "state-factory" | "state" => Scope::StateFactory,
        "measurement-engine" | "measure" => Scope::MeasurementEngine,
        "protocol-suite" | "protocol" | "protocols" => Scope::ProtocolSuite,
        "metrics" => Scope::Metrics,
        "sweeps" | "sweep" | "cli-runner" => Scope::Sweeps,
        other => return Err(Error::InvalidInput(format!("unknown verify scope '{other}'"))),
    };
    Ok(vec![scope])
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_scopes(s)?.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::InvalidInput("expected a single scope".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub scope: Scope,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status}  {:<18}  {:<width$}  {}\n", c.scope.name(), c.name, c.detail));
        }
        let failed = self.failures().len();
        out.push_str(&format!(
            "{} checks, {} passed, {} failed ({:.1} s)\n",
            self.checks.len(),
            self.checks.len() - failed,
            failed,
            self.seconds
        ));
        out
    }
}

/// Correction tables used by the protocol checks; replaceable so that a
/// corrupted table can be shown to fail.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub unknown_qubit_rules: CorrectionRule,
    pub discord_swap_rules: CorrectionRule,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { unknown_qubit_rules: CorrectionRule::unknown_qubit(), discord_swap_rules: CorrectionRule::discord_swap() }
    }
}

struct Recorder {
    scope: Scope,
    checks: Vec<Check>,
}

impl Recorder {
    /// `f` returns the worst observed error; the check passes when it is at
    /// most `tol`.
    fn within(&mut self, name: &str, tol: f64, f: impl FnOnce() -> Result<f64>) {
        let (passed, detail) = match f() {
            Ok(err) if err.is_finite() && err <= tol => (true, format!("max error {err:.2e} <= {tol:.0e}")),
            Ok(err) => (false, format!("max error {err:.2e} exceeds {tol:.0e}")),
            Err(e) => (false, format!("error: {e}")),
        };
        self.push(name, passed, detail);
    }

    fn holds(&mut self, name: &str, f: impl FnOnce() -> Result<std::result::Result<(), String>>) {
        let (passed, detail) = match f() {
            Ok(Ok(())) => (true, "holds".to_string()),
            Ok(Err(why)) => (false, why),
            Err(e) => (false, format!("error: {e}")),
        };
        self.push(name, passed, detail);
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { scope: self.scope, name: name.to_string(), passed, detail });
    }
}

fn spin(twice: u32) -> HalfInteger {
    HalfInteger::from_twice(twice).expect("spin within capacity")
}

fn spins(max_twice: u32) -> impl Iterator<Item = HalfInteger> {
    (1..=max_twice).map(spin)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
    direction(cos_theta.acos(), rng.gen_range(0.0..2.0 * PI))
}

fn random_bloch(rng: &mut ChaCha8Rng) -> BlochVector {
    let r: f64 = rng.gen_range(0.0..=1.0);
    BlochVector::from_array(random_unit(rng).map(|x| r * x)).expect("inside the ball")
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

pub fn verify(scopes: &[Scope], config: &VerifyConfig) -> VerifyReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    for &scope in scopes {
        let mut r = Recorder { scope, checks: Vec::new() };
        match scope {
            Scope::MatrixKernel => matrix_kernel(&mut r),
            Scope::SpinAlgebra => spin_algebra(&mut r),
            Scope::StateFactory => state_factory(&mut r),
            Scope::MeasurementEngine => measurement_engine(&mut r),
            Scope::ProtocolSuite => protocol_suite(&mut r, config),
            Scope::Metrics => metrics(&mut r),
            Scope::Sweeps => sweeps(&mut r),
        }
        checks.extend(r.checks);
    }
    VerifyReport { checks, seconds: start.elapsed().as_secs_f64() }
}

fn matrix_kernel(r: &mut Recorder) {
    r.within("partial trace recovers tensor factors", 1e-12, || {
        let a = qubit_state(&BlochVector::new(0.2, -0.3, 0.4)?)?;
        let b = vector_polarised(spin(2), &[0.1, 0.5, -0.2])?;
        let ab = a.tensor(&b);
        let ta = partial_trace(ab.matrix(), ab.profile(), &[0])?;
        let tb = partial_trace(ab.matrix(), ab.profile(), &[1])?;
        Ok(ta.max_abs_diff(a.matrix()).max(tb.max_abs_diff(b.matrix())))
    });
    r.within("embedding matches explicit Kronecker product", 1e-15, || {
        let p = pauli();
        let profile = DimensionProfile::new(vec![2, 3, 2])?;
        let lifted = embed_operator(&p[2], &[2], &profile)?;
        let explicit = tensor_product(&ComplexMatrix::identity(6), &p[2]);
        Ok(lifted.max_abs_diff(&explicit))
    });
    r.within("eigendecomposition reconstructs", 1e-12, || {
        let m = equivalent_werner(0.6, spin(5))?.into_matrix();
        let eig = hermitian_eig(&m)?;
        Ok(eig.map_spectrum(|l| crate::linalg::c(l, 0.0)).max_abs_diff(&m))
    });
    r.within("PSD square root squares back", 1e-12, || {
        let m = equivalent_werner(0.9, spin(18))?.into_matrix();
        let root = psd_sqrt(&m)?;
        Ok((&root * &root).max_abs_diff(&m))
    });
    r.within("exponentials compose", 1e-12, || {
        let sx = spin_operators(spin(4)).sx;
        let ua = unitary_from_generator(&sx, 0.4)?;
        let ub = unitary_from_generator(&sx, 1.1)?;
        Ok((&ua * &ub).max_abs_diff(&unitary_from_generator(&sx, 1.5)?))
    });
}

fn spin_algebra(r: &mut Recorder) {
    r.within("commutators [S_i, S_j] = i ε_ijk S_k, S <= 25", 1e-10, || {
        Ok(max_of(spins(50).map(|s| {
            let t = spin_operators(s);
            let comm = |a: &ComplexMatrix, b: &ComplexMatrix| &(a * b) - &(b * a);
            let e1 = comm(&t.sx, &t.sy).max_abs_diff(&t.sz.scale(I));
            let e2 = comm(&t.sy, &t.sz).max_abs_diff(&t.sx.scale(I));
            let e3 = comm(&t.sz, &t.sx).max_abs_diff(&t.sy.scale(I));
            e1.max(e2).max(e3)
        })))
    });
    r.within("Casimir S^2 = S(S+1), S <= 25", 1e-10, || {
        Ok(max_of(spins(50).map(|s| {
            let t = spin_operators(s);
            let sv = s.value();
            let casimir = &(&(&t.sx * &t.sx) + &(&t.sy * &t.sy)) + &(&t.sz * &t.sz);
            casimir.max_abs_diff(&ComplexMatrix::identity(s.dim()).scale_real(sv * (sv + 1.0)))
        })))
    });
    r.within("trace identity Tr(Ŝ_i Ŝ_j) = (S+1)(2S+1)/(3S) δ_ij, S <= 25", 1e-10, || {
        Ok(max_of(spins(50).map(|s| {
            let hat = spin_operators(s).normalized();
            let sv = s.value();
            let want = (sv + 1.0) * (2.0 * sv + 1.0) / (3.0 * sv);
            let ops = hat.components();
            max_of((0..3).flat_map(|i| {
                (0..3).map(move |j| {
                    let t = ops[i].trace_product(ops[j]);
                    let target = if i == j { want } else { 0.0 };
                    (t.re - target).abs().max(t.im.abs())
                })
            }))
        })))
    });
    r.within("coherent-state overlap law, S <= 25", 1e-10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dirs: Vec<(f64, f64)> =
            (0..6).map(|_| (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI))).collect();
        Ok(max_of(spins(50).map(|s| {
            let f = CoherentStates::new(s);
            let states: Vec<_> = dirs.iter().map(|&(t, p)| f.state(t, p)).collect();
            max_of(states.iter().flat_map(|a| {
                states.iter().map(move |b| {
                    let cos = crate::spin::dot(&a.direction(), &b.direction());
                    let want = ((1.0 + cos) / 2.0).powi(s.twice() as i32);
                    (a.overlap(b).norm_sqr() - want).abs()
                })
            }))
        })))
    });
    r.within("coherent-state resolution of identity, S <= 25", 1e-10, || {
        Ok(max_of(spins(50).map(|s| scs_resolution_check(s, &SphereGrid::for_spin(s)))))
    });
}

fn state_factory(r: &mut Recorder) {
    r.within("Werner equivalent spectrum", 1e-12, || {
        let mut worst: f64 = 0.0;
        for s in spins(12) {
            let sv = s.value();
            let n = 2.0 * (2.0 * sv + 1.0);
            for alpha in [-0.3, 0.2, 0.5, 0.9] {
                if alpha < -sv / (sv + 1.0) {
                    continue;
                }
                let vals = equivalent_werner(alpha, s)?.eigenvalues();
                let low = (1.0 - alpha) / n;
                let high = (1.0 + alpha * (sv + 1.0) / sv) / n;
                let mut want: Vec<f64> = std::iter::repeat_n(low, s.twice() as usize + 2)
                    .chain(std::iter::repeat_n(high, s.twice() as usize))
                    .collect();
                want.sort_by(f64::total_cmp);
                let mut got = vals;
                got.sort_by(f64::total_cmp);
                worst = worst.max(max_of(got.iter().zip(&want).map(|(a, b)| (a - b).abs())));
            }
        }
        Ok(worst)
    });
    r.holds("s_min(0.9) = 9", || {
        let s = s_min(0.9)?;
        Ok(if s == spin(18) { Ok(()) } else { Err(format!("got {s}")) })
    });
    for (alpha, twice) in [(0.5, 2u32), (2.0 / 3.0, 4), (0.9, 18)] {
        let s = spin(twice);
        r.within(&format!("separable decomposition reconstructs (α={alpha:.4}, S={s})"), 1e-8, || {
            let ens = separable_decomposition(alpha, s, &SphereGrid::for_spin(s))?;
            if ens.components.iter().any(|c| c.weight < 0.0) {
                return Err(Error::Numerical("negative weight".into()));
            }
            Ok(ens.reconstruct().max_abs_diff(equivalent_werner(alpha, s)?.matrix()))
        });
    }
    r.holds("separable decomposition refuses (α=0.9, S=8)", || {
        Ok(match separable_decomposition(0.9, spin(16), &SphereGrid::for_spin(spin(16))) {
            Err(Error::SeparabilityRange { .. }) => Ok(()),
            other => Err(format!("expected a separability-range error, got {:?}", other.map(|e| e.components.len()))),
        })
    });
    r.within("Q-function of qubit and qudit coincide, S in {1, 5, 20}", 1e-10, || {
        let grid = SphereGrid::gauss_legendre(10, 20)?;
        let p = BlochVector::new(0.3, -0.2, 0.6)?;
        let q = q_function(&qubit_state(&p)?, &grid)?;
        let mut worst: f64 = (q.normalization() - 1.0).abs();
        for twice in [2, 10, 40] {
            let qd = q_function(&equivalent_qudit(spin(twice), &p)?, &grid)?;
            worst = worst.max(q.max_abs_diff(&qd)).max((qd.normalization() - 1.0).abs());
        }
        Ok(worst)
    });
    r.within("vector polarisation round trip", 1e-12, || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for s in spins(10) {
            let p = random_bloch(&mut rng);
            let back = vector_polarization(&equivalent_qudit(s, &p)?)?;
            worst = worst.max(max_of((0..3).map(|i| (back.as_array()[i] - p.as_array()[i]).abs())));
        }
        Ok(worst)
    });
}

fn measurement_engine(r: &mut Recorder) {
    r.within("Bell projectors resolve the identity", 1e-14, || {
        let set = bell_projectors();
        let sum = set.projectors().iter().fold(ComplexMatrix::zeros(4, 4), |acc, p| &acc + &p.matrix);
        Ok(sum.max_abs_diff(&ComplexMatrix::identity(4)))
    });
    r.holds("dichotomic projector ranks 2S+2 and 2S, S <= 10", || {
        for s in spins(20) {
            let set = dichotomic_projectors(s);
            let plus = set.get("plus").expect("plus").trace().re.round() as u32;
            let minus = set.get("minus").expect("minus").trace().re.round() as u32;
            if plus != s.twice() + 2 || minus != s.twice() {
                return Ok(Err(format!("S = {s}: ranks {plus}, {minus}")));
            }
        }
        Ok(Ok(()))
    });
    r.within("factored four-party contraction equals dense path, S <= 3", 1e-10, || {
        let mut worst: f64 = 0.0;
        let p = pauli();
        for s in spins(6) {
            let rho12 = equivalent_werner(0.7, s)?;
            let hat = spin_operators(s).normalized();
            let n = 2 * s.dim();
            let m = (&ComplexMatrix::identity(n)
                - &coupling(hat.components(), [&p[0], &p[1], &p[2]], &[1.0; 3]).scale_real(-0.2))
                .scale_real(1.0 / n as f64);
            let rho34 = DensityMatrix::new(m, DimensionProfile::new(vec![s.dim(), 2])?)?;
            for proj in bell_projectors().projectors() {
                let fast = four_party_contract(&rho12, &rho34, &proj.matrix)?;
                let dense = four_party_dense(&rho12, &rho34, &proj.matrix)?;
                let (Some(a), Some(b)) = (fast.post_state, dense.post_state) else {
                    return Err(Error::Numerical("missing post state".into()));
                };
                worst = worst.max(a.matrix().max_abs_diff(b.matrix())).max((fast.probability - dense.probability).abs());
            }
        }
        Ok(worst)
    });
    r.within("Bell outcome frequencies over 1e5 seeds", 0.01, || {
        let records: Vec<MeasurementRecord> = BELL_PATTERNS
            .iter()
            .map(|(l, _)| MeasurementRecord { label: l.to_string(), probability: 0.25, post_state: None })
            .collect();
        let draws = 100_000u64;
        let mut counts = [0usize; 4];
        for seed in 0..draws {
            let label = sample_outcome(&records, seed)?;
            counts[BELL_PATTERNS.iter().position(|(l, _)| *l == label).expect("label")] += 1;
        }
        Ok(max_of(counts.iter().map(|&c| (c as f64 / draws as f64 - 0.25).abs())))
    });
}

/// Worst residual, probability error and description of the worst branch.
fn transcript_errors(t: &ProtocolTranscript) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for b in &t.branches {
        let e = b.residual.max(b.pre_residual).max((b.probability - b.expected_probability).abs() * 1e2);
        if e > worst.0 || worst.1.is_empty() {
            worst = (e, format!("outcome {} at S = {}, α = {}", b.outcome, t.spin(), t.alpha));
        }
    }
    worst
}

fn protocol_check(
    r: &mut Recorder,
    name: &str,
    runs: impl FnOnce() -> Result<Vec<ProtocolTranscript>>,
    extra: impl Fn(&ProtocolTranscript) -> f64,
) {
    let (passed, detail) = match runs() {
        Ok(ts) => {
            let failing = ts.iter().find(|t| !t.verified());
            let extra_err = max_of(ts.iter().map(&extra));
            let worst = max_of(ts.iter().map(ProtocolTranscript::max_residual));
            match failing {
                Some(t) => (false, format!("{} runs; failing branch: {}", ts.len(), transcript_errors(t).1)),
                None if extra_err > 1e-10 => (false, format!("{} runs; retrieval error {extra_err:.2e}", ts.len())),
                None => (true, format!("{} runs, max residual {worst:.2e}", ts.len())),
            }
        }
        Err(e) => (false, format!("error: {e}")),
    };
    r.push(name, passed, detail);
}

fn protocol_suite(r: &mut Recorder, config: &VerifyConfig) {
    let alphas = [-0.3, 0.2, 0.5, 0.8];
    protocol_check(
        r,
        "protocol A: corrected Bell outcomes reproduce (𝟙 + αŜ·p)/(2S+1)",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut ps = vec![BlochVector::new(0.0, 0.0, 1.0)?, BlochVector::new(1.0, 0.0, 0.0)?, BlochVector::new(0.6, 0.0, 0.8)?];
            ps.extend((0..5).map(|_| random_bloch(&mut rng)));
            let mut out = Vec::new();
            for s in spins(10) {
                for &alpha in &alphas {
                    if alpha < -s.value() / (s.value() + 1.0) {
                        continue;
                    }
                    for p in &ps {
                        out.push(protocol_unknown_qubit_with(p, alpha, s, 0, &config.unknown_qubit_rules)?);
                    }
                }
            }
            Ok(out)
        },
        |t| {
            let p = t.bloch.unwrap_or_default();
            max_of(t.branches.iter().filter_map(|b| b.retrieval).flat_map(|rv| (0..3).map(move |i| (rv.recovered[i] - t.alpha * p[i]).abs())))
        },
    );
    protocol_check(
        r,
        "protocol B: both outcomes end at (𝟙 − αŜ·m)/(2S+1)",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let ms: Vec<Vec3> = (0..10).map(|_| random_unit(&mut rng)).collect();
            let mut out = Vec::new();
            for s in spins(10) {
                for &alpha in &alphas {
                    if alpha < -s.value() / (s.value() + 1.0) {
                        continue;
                    }
                    for m in &ms {
                        out.push(protocol_known_qubit(m, alpha, s, 0)?);
                    }
                }
            }
            Ok(out)
        },
        |_| 0.0,
    );
    protocol_check(
        r,
        "protocol C: dichotomic outcomes and compensated retrieval",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let ps: Vec<BlochVector> = (0..3).map(|_| random_bloch(&mut rng)).collect();
            let mut out = Vec::new();
            for s in spins(10) {
                for &alpha in &alphas {
                    if alpha < -s.value() / (s.value() + 1.0) {
                        continue;
                    }
                    for p in &ps {
                        out.push(protocol_unknown_qudit(p, alpha, s, 0)?);
                    }
                }
            }
            Ok(out)
        },
        |t| {
            let p = t.bloch.unwrap_or_default();
            max_of(t.branches.iter().flat_map(|b| {
                let sign = if b.outcome == "plus" { -1.0 } else { 1.0 };
                let rv = b.retrieval.expect("retrieval recorded");
                (0..3).map(move |i| (rv.recovered[i] - sign * t.alpha * p[i]).abs())
            }))
        },
    );
    protocol_check(
        r,
        "protocol D: swapped state (𝟙 − αβ Ŝ₂·Ŝ₃)/(2S+1)² for every outcome",
        || {
            let mut out = Vec::new();
            for s in spins(10) {
                for (alpha, beta) in [(0.5, 0.5), (0.8, -0.3), (0.2, 0.9)] {
                    if beta < -s.value() / (s.value() + 1.0) {
                        continue;
                    }
                    out.push(protocol_discord_swap_with(alpha, beta, s, 0, &config.discord_swap_rules)?);
                }
            }
            Ok(out)
        },
        |_| 0.0,
    );
}

fn metrics(r: &mut Recorder) {
    r.within("fidelity of (𝟙 + Ŝ_z)/41 with 𝟙/41 is 0.876", 1e-3, || {
        let s = spin(40);
        let rho = equivalent_qudit(s, &BlochVector::new(0.0, 0.0, 1.0)?)?;
        Ok((fidelity(&rho, &DensityMatrix::maximally_mixed(rho.profile().clone()))? - 0.876).abs())
    });
    let alphas = [-0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9];
    r.within("fidelity matches diagonal closed form, S <= 10", 1e-10, || {
        let mut worst: f64 = 0.0;
        for s in spins(20) {
            let ideal = vector_polarised(s, &[0.0, 0.0, 1.0])?;
            for alpha in alphas {
                let out = vector_polarised(s, &[0.0, 0.0, alpha])?;
                worst = worst.max((fidelity(&ideal, &out)? - equivalent_fidelity_closed_form(alpha, s)).abs());
            }
        }
        Ok(worst)
    });
    r.within("HS distances and relative distance match closed forms, S <= 10", 1e-10, || {
        let mut worst: f64 = 0.0;
        for s in spins(20) {
            let p = [0.0, 0.6, 0.8];
            let ideal = vector_polarised(s, &p)?;
            let mixed = DensityMatrix::maximally_mixed(ideal.profile().clone());
            let d0 = hs_distance(&ideal, &mixed)?;
            worst = worst.max((d0 - polarisation_distance(s)).abs());
            for alpha in alphas {
                let d = hs_distance(&ideal, &vector_polarised(s, &p.map(|x| alpha * x))?)?;
                worst = worst
                    .max((d - (1.0 - alpha) * polarisation_distance(s)).abs())
                    .max((d0 - d - relative_distance(alpha, s)).abs());
            }
        }
        Ok(worst)
    });
    r.holds("relative distance strictly decreasing in S", || {
        for alpha in [0.1, 0.5, 0.9] {
            let v: Vec<f64> = spins(50).map(|s| relative_distance(alpha, s)).collect();
            if let Some(k) = v.windows(2).position(|w| w[1] >= w[0]) {
                return Ok(Err(format!("α = {alpha}: not decreasing at 2S = {}", k + 2)));
            }
        }
        Ok(Ok(()))
    });
    r.within("large-spin limit α/√(6S) at S = 50", 0.02, || Ok(asymptotics_check(0.9, spin(100)).limit_error));
    r.within("disturbance witness equals α√((S+1)/(3S(2S+1)))", 1e-6, || {
        let mut worst: f64 = 0.0;
        for (alpha, twice) in [(0.8, 8), (0.3, 1), (0.5, 6), (0.9, 18), (-0.2, 3)] {
            let s = spin(twice);
            let w = disturbance_witness(&equivalent_werner(alpha, s)?, &WitnessSearch::default())?;
            worst = worst.max((w.value - alpha.abs() * polarisation_distance(s)).abs());
        }
        Ok(worst)
    });
    r.within("disturbance is independent of the measurement direction", 1e-8, || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst: f64 = 0.0;
        for s in spins(20) {
            let rho = equivalent_werner(0.6, s)?;
            let want = 0.6 * polarisation_distance(s);
            for _ in 0..5 {
                let v = disturbance_along(&rho, rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI))?;
                worst = worst.max((v - want).abs());
            }
        }
        Ok(worst)
    });
    r.within("disturbance witness vanishes on product states", 1e-8, || {
        let q = qubit_state(&BlochVector::new(-0.2, 0.5, 0.1)?)?;
        let d = vector_polarised(spin(5), &[0.3, 0.0, -0.4])?;
        Ok(disturbance_witness(&q.tensor(&d), &WitnessSearch::default())?.value)
    });
}

fn sweeps(r: &mut Recorder) {
    r.holds("fidelity at S_min(α) is at least (1+α)/2 on α = 0.05…0.9", || {
        let rows = sweep_fidelity(&AlphaRange::new(0.05, 0.9, 0.05)?, SpinMode::Auto, 0, crate::spin::MAX_TWICE_SPIN)?;
        Ok(match rows.iter().find(|row| row.fidelity_equivalent < row.fidelity_qubit - 1e-12) {
            Some(row) => Err(format!("α = {}: {} < {}", row.alpha, row.fidelity_equivalent, row.fidelity_qubit)),
            None => Ok(()),
        })
    });
    r.holds("distance sweep at α = 0.9 turns separable at S = 9", || {
        let rows = sweep_distance(&SpinRange::new(spin(1), spin(40))?, 0.9, crate::spin::MAX_TWICE_SPIN)?;
        let first = rows.iter().find(|row| row.separable).map(|row| row.spin_twice);
        Ok(if first == Some(18) { Ok(()) } else { Err(format!("first separable 2S = {first:?}")) })
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Correction;

    #[test]
    fn scope_parsing() {
        assert_eq!(parse_scopes("all").unwrap().len(), 7);
        assert_eq!("metrics".parse::<Scope>().unwrap(), Scope::Metrics);
        assert_eq!("protocol-suite".parse::<Scope>().unwrap(), Scope::ProtocolSuite);
        assert!(parse_scopes("nonsense").is_err());
    }

    #[test]
    fn fast_scopes_pass() {
        let report = verify(&[Scope::MatrixKernel, Scope::MeasurementEngine, Scope::Sweeps], &VerifyConfig::default());
        assert!(report.all_passed(), "{}", report.render());
    }

    #[test]
    fn corrupted_table_names_protocol_a() {
        let config = VerifyConfig {
            unknown_qubit_rules: CorrectionRule::unknown_qubit().with("phi-", Correction::pi([0.0, 1.0, 0.0])),
            ..VerifyConfig::default()
        };
        let report = verify(&[Scope::ProtocolSuite], &config);
        let failures = report.failures();
        assert_eq!(failures.len(), 1, "{}", report.render());
        assert!(failures[0].name.starts_with("protocol A"));
        assert!(failures[0].detail.contains("phi-"));
    }
}
