//! Parameter sweeps producing the fidelity-versus-α and distance-versus-S
//! tables as CSV. Rows are computed in parallel and emitted in grid order.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{fidelity, hs_distance};
use crate::protocol::protocol_unknown_qubit;
use crate::spin::{HalfInteger, MAX_TWICE_SPIN};
use crate::state::{equivalent_qudit, is_separable, s_min, vector_polarised, BlochVector, DensityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinMode {
    /// Smallest spin at which the channel is separable.
    Auto,
    Fixed(HalfInteger),
}

impl SpinMode {
    pub fn resolve(&self, alpha: f64, max_twice: u32) -> Result<HalfInteger> {
        let s = match self {
            SpinMode::Auto => s_min(alpha)?,
            SpinMode::Fixed(s) => *s,
        };
        if s.twice() > max_twice {
            return Err(Error::Capacity { twice: s.twice(), max: max_twice });
        }
        Ok(s)
    }
}

/// Inclusive arithmetic grid `start, start + step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AlphaRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::InvalidParameter("alpha range must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidParameter(format!("alpha step must be positive, got {step}")));
        }
        if stop < start {
            return Err(Error::InvalidParameter(format!("alpha range {start}:{stop} is empty")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Inclusive spin range in half-integer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinRange {
    pub start: HalfInteger,
    pub stop: HalfInteger,
}

impl SpinRange {
    pub fn new(start: HalfInteger, stop: HalfInteger) -> Result<Self> {
        if stop < start {
            return Err(Error::InvalidParameter(format!("spin range {start}:{stop} is empty")));
        }
        Ok(Self { start, stop })
    }

    pub fn values(&self) -> Vec<HalfInteger> {
        HalfInteger::range_inclusive(self.start, self.stop).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepSpec {
    Fidelity { alphas: AlphaRange, spin: SpinMode, seed: u64, max_twice: u32 },
    Distance { spins: SpinRange, alpha: f64, max_twice: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityRow {
    pub alpha: f64,
    pub spin_twice: u32,
    /// Fidelity of the teleported qudit with the ideal `(𝟙 + Ŝ·ẑ)/(2S+1)`.
    pub fidelity_equivalent: f64,
    /// `(1+α)/2`, the qubit teleportation fidelity over the 2×2 Werner channel.
    pub fidelity_qubit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub spin_twice: u32,
    /// `d₀ − d`, evaluated numerically.
    pub relative_distance: f64,
    pub separable: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0 / 3.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (-1/3, 1)")));
    }
    Ok(())
}

fn fidelity_row(alpha: f64, spin: SpinMode, seed: u64, max_twice: u32) -> Result<FidelityRow> {
    let s = spin.resolve(alpha, max_twice)?;
    let z = BlochVector::new(0.0, 0.0, 1.0)?;
    let transcript = protocol_unknown_qubit(&z, alpha, s, seed)?;
    let ideal = equivalent_qudit(s, &z)?;
    Ok(FidelityRow {
        alpha,
        spin_twice: s.twice(),
        fidelity_equivalent: fidelity(&ideal, &transcript.output_state)?,
        fidelity_qubit: (1.0 + alpha) / 2.0,
    })
}

pub fn sweep_fidelity(alphas: &AlphaRange, spin: SpinMode, seed: u64, max_twice: u32) -> Result<Vec<FidelityRow>> {
    let values = alphas.values();
    values.iter().try_for_each(|&a| check_alpha(a))?;
    values.par_iter().map(|&a| fidelity_row(a, spin, seed, max_twice)).collect()
}

fn distance_row(alpha: f64, s: HalfInteger) -> Result<DistanceRow> {
    let z = [0.0, 0.0, 1.0];
    let ideal = vector_polarised(s, &z)?;
    let output = vector_polarised(s, &z.map(|x| alpha * x))?;
    let mixed = DensityMatrix::maximally_mixed(ideal.profile().clone());
    Ok(DistanceRow {
        spin_twice: s.twice(),
        relative_distance: hs_distance(&ideal, &mixed)? - hs_distance(&ideal, &output)?,
        separable: is_separable(alpha, s),
    })
}

pub fn sweep_distance(spins: &SpinRange, alpha: f64, max_twice: u32) -> Result<Vec<DistanceRow>> {
    check_alpha(alpha)?;
    if spins.stop.twice() > max_twice.min(MAX_TWICE_SPIN) {
        return Err(Error::Capacity { twice: spins.stop.twice(), max: max_twice.min(MAX_TWICE_SPIN) });
    }
    spins.values().par_iter().map(|&s| distance_row(alpha, s)).collect()
}

/// Runs the sweep and renders its CSV.
pub fn run_sweep(spec: &SweepSpec) -> Result<String> {
    match *spec {
        SweepSpec::Fidelity { alphas, spin, seed, max_twice } => {
            Ok(fidelity_csv(&sweep_fidelity(&alphas, spin, seed, max_twice)?))
        }
        SweepSpec::Distance { spins, alpha, max_twice } => Ok(distance_csv(&sweep_distance(&spins, alpha, max_twice)?)),
    }
}

/// Doubles in `{:.16e}`: 17 significant digits, round-trip exact.
pub fn fidelity_csv(rows: &[FidelityRow]) -> String {
    let mut out = String::from("alpha,spin_twice,fidelity_equivalent,fidelity_qubit\n");
    for r in rows {
        writeln!(out, "{:.16e},{},{:.16e},{:.16e}", r.alpha, r.spin_twice, r.fidelity_equivalent, r.fidelity_qubit)
            .expect("write to String");
    }
    out
}

pub fn distance_csv(rows: &[DistanceRow]) -> String {
    let mut out = String::from("spin_twice,relative_distance,separable_flag\n");
    for r in rows {
        writeln!(out, "{},{:.16e},{}", r.spin_twice, r.relative_distance, u8::from(r.separable)).expect("write to String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{equivalent_fidelity_closed_form, relative_distance};

    fn spin(twice: u32) -> HalfInteger {
        HalfInteger::from_twice(twice).unwrap()
    }

    #[test]
    fn alpha_grid_is_inclusive() {
        let r = AlphaRange::new(0.05, 0.9, 0.05).unwrap();
        let v = r.values();
        assert_eq!(v.len(), 18);
        assert!((v[17] - 0.9).abs() < 1e-12);
        assert!(AlphaRange::new(0.0, 1.0, 0.0).is_err());
        assert!(AlphaRange::new(0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn fidelity_sweep_ordering_and_oracle() {
        let rows = sweep_fidelity(&AlphaRange::new(0.05, 0.9, 0.05).unwrap(), SpinMode::Auto, 0, MAX_TWICE_SPIN).unwrap();
        for r in &rows {
            let s = spin(r.spin_twice);
            assert_eq!(s, s_min(r.alpha).unwrap());
            assert!(r.fidelity_equivalent >= r.fidelity_qubit - 1e-12, "{r:?}");
            assert!((r.fidelity_equivalent - equivalent_fidelity_closed_form(r.alpha, s)).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_sweep_zero_alpha() {
        let rows = sweep_fidelity(&AlphaRange::new(0.0, 0.0, 0.1).unwrap(), SpinMode::Auto, 0, MAX_TWICE_SPIN).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].fidelity_equivalent - 0.5).abs() < 1e-12);
        assert_eq!(rows[0].fidelity_qubit, 0.5);
    }

    #[test]
    fn fidelity_sweep_rejects_out_of_range() {
        assert!(sweep_fidelity(&AlphaRange::new(0.5, 1.0, 0.1).unwrap(), SpinMode::Auto, 0, MAX_TWICE_SPIN).is_err());
        assert!(matches!(
            sweep_fidelity(&AlphaRange::new(0.9, 0.9, 0.1).unwrap(), SpinMode::Auto, 0, 10),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn distance_sweep_properties() {
        let rows = sweep_distance(&SpinRange::new(spin(1), spin(50)).unwrap(), 0.9, MAX_TWICE_SPIN).unwrap();
        assert!(rows.windows(2).all(|w| w[1].relative_distance < w[0].relative_distance));
        for r in &rows {
            assert!((r.relative_distance - relative_distance(0.9, spin(r.spin_twice))).abs() < 1e-12);
            assert_eq!(r.separable, r.spin_twice >= 18);
        }
        let zero = sweep_distance(&SpinRange::new(spin(1), spin(10)).unwrap(), 0.0, MAX_TWICE_SPIN).unwrap();
        assert!(zero.iter().all(|r| r.relative_distance == 0.0 && r.separable));
    }

    #[test]
    fn csv_is_deterministic() {
        let spec = SweepSpec::Fidelity {
            alphas: AlphaRange::new(0.1, 0.5, 0.1).unwrap(),
            spin: SpinMode::Auto,
            seed: 3,
            max_twice: MAX_TWICE_SPIN,
        };
        let a = run_sweep(&spec).unwrap();
        assert_eq!(a, run_sweep(&spec).unwrap());
        assert_eq!(a.lines().count(), 6);
        let first: Vec<&str> = a.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), 0.1);
        let d = run_sweep(&SweepSpec::Distance {
            spins: SpinRange::new(spin(16), spin(20)).unwrap(),
            alpha: 0.9,
            max_twice: MAX_TWICE_SPIN,
        })
        .unwrap();
        let flags: Vec<&str> = d.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(flags, ["0", "0", "1", "1", "1"]);
    }
}
