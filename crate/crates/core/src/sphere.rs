//! Product quadrature on the unit sphere: Gauss–Legendre in `cos θ` times a
//! uniform azimuthal grid. Weights sum to `4π`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spin::{direction, HalfInteger, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

impl SphereNode {
    pub fn direction(&self) -> Vec3 {
        direction(self.theta, self.phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    nodes: Vec<SphereNode>,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, refined by Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl SphereGrid {
    /// Exact for spherical harmonics of degree `< min(2 n_theta, n_phi)`.
    pub fn gauss_legendre(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidParameter("sphere grid needs at least one node per axis".into()));
        }
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (x, w) in gauss_legendre_nodes(n_theta) {
            let theta = x.clamp(-1.0, 1.0).acos();
            for j in 0..n_phi {
                nodes.push(SphereNode { theta, phi: j as f64 * dphi, weight: w * dphi });
            }
        }
        Ok(Self { nodes })
    }

    /// Grid exact to degree `2S + 2`: `2S+3` polar nodes by `4S+6` azimuthal nodes.
    pub fn for_spin(s: HalfInteger) -> Self {
        let twice = s.twice() as usize;
        Self::gauss_legendre(twice + 3, 2 * twice + 6).expect("non-empty grid")
    }

    pub fn from_nodes(nodes: Vec<SphereNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidInput("empty sphere grid".into()));
        }
        if nodes.iter().any(|n| !(n.theta.is_finite() && n.phi.is_finite() && n.weight.is_finite() && n.weight >= 0.0)) {
            return Err(Error::InvalidInput("sphere grid node has a non-finite value or negative weight".into()));
        }
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        if (total - 4.0 * PI).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("sphere grid weights sum to {total}, expected 4π")));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[SphereNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// `Σ_k w_k f(n̂_k)`.
    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(&n.direction())).sum()
    }

    /// CSV with header `theta,phi,weight`; radians, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,weight\n");
        for n in &self.nodes {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", n.theta, n.phi, n.weight).expect("write to String");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "theta,phi,weight" => {}
            other => {
                return Err(Error::InvalidInput(format!("expected header theta,phi,weight, got {other:?}")))
            }
        }
        let nodes = lines
            .enumerate()
            .map(|(i, line)| {
                let fields: Vec<f64> = line
                    .split(',')
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::InvalidInput(format!("row {}: {e}", i + 1)))?;
                match fields[..] {
                    [theta, phi, weight] => Ok(SphereNode { theta, phi, weight }),
                    _ => Err(Error::InvalidInput(format!("row {}: expected 3 fields", i + 1))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_nodes(nodes)
    }
}
