//! Ready-made factorized constructions (spin spiral, constant-φ Néel chain,
//! uniform state in a principal plane) and the control-complexity table.

use crate::design::{complete_fields, DesignError, DesignReport, ParallelField};
use crate::geometry::{Angles, Vec3};
use crate::quantum::{Bond, SiteSpec};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecipeError {
    #[error("cyclic chain needs Δφ = 2πk/N with 1 ≤ k ≤ N−1, got Δφ = {dphi} for N = {n}")]
    InvalidCyclicIncrement { dphi: f64, n: usize },
    #[error("mean polar angle {0} has vanishing sine")]
    SingularMeanAngle(f64),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Open,
    Cyclic,
}

fn chain_bonds(n: usize, topology: Topology) -> Result<Vec<(usize, usize)>, RecipeError> {
    match topology {
        Topology::Open if n >= 2 => Ok((0..n - 1).map(|i| (i, i + 1)).collect()),
        Topology::Cyclic if n >= 3 => Ok((0..n).map(|i| (i, (i + 1) % n)).collect()),
        _ => Err(RecipeError::InvalidChain(format!("{n} sites with {topology:?} topology"))),
    }
}

fn build(
    angles: Vec<Angles>,
    spin: SiteSpec,
    bonds: &[(usize, usize)],
    coupling: impl Fn(usize, usize) -> Vec3,
    h_par: f64,
) -> Result<DesignReport, RecipeError> {
    let sites = vec![spin; angles.len()];
    let bonds = bonds.iter().map(|&(i, j)| Bond::xyz(i, j, coupling(i, j))).collect();
    Ok(complete_fields(&angles, &sites, bonds, &ParallelField::Uniform(h_par))?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpiralSpec {
    pub n: usize,
    pub theta: f64,
    pub phi0: f64,
    /// `φ_{i+1} − φ_i`.
    pub dphi: f64,
    pub topology: Topology,
    pub j: f64,
    pub h_par: f64,
    pub spin: SiteSpec,
}

impl SpiralSpec {
    /// Cyclic spiral with `Δφ = 2πk/N`.
    pub fn cyclic(n: usize, k: i64, theta: f64, j: f64, h_par: f64) -> Self {
        Self {
            n,
            theta,
            phi0: 0.0,
            dphi: TAU * k as f64 / n as f64,
            topology: Topology::Cyclic,
            j,
            h_par,
            spin: SiteSpec::half(),
        }
    }

    pub fn validate(&self) -> Result<(), RecipeError> {
        if self.topology == Topology::Cyclic {
            let k = self.dphi * self.n as f64 / TAU;
            let wound = k.round().rem_euclid(self.n as f64);
            if (k - k.round()).abs() > 1e-9 || wound == 0.0 {
                return Err(RecipeError::InvalidCyclicIncrement { dphi: self.dphi, n: self.n });
            }
        }
        chain_bonds(self.n, self.topology).map(|_| ())
    }

    /// `−N S (h_∥ + J S cos Δφ)`, the cyclic-chain energy.
    pub fn cyclic_energy(&self) -> f64 {
        let s = self.spin.spin();
        -(self.n as f64) * s * (self.h_par + self.j * s * self.dphi.cos())
    }
}

/// XXZ chain with `J_z/J = cos Δφ` whose eigenstate is the spiral
/// `θ_i = θ`, `φ_i = φ_0 + iΔφ`.
pub fn spiral_system(spec: &SpiralSpec) -> Result<DesignReport, RecipeError> {
    spec.validate()?;
    let bonds = chain_bonds(spec.n, spec.topology)?;
    let angles = (0..spec.n)
        .map(|i| Angles::new(spec.theta, spec.phi0 + i as f64 * spec.dphi))
        .collect();
    let coupling = Vec3::new(spec.j, spec.j, spec.j * spec.dphi.cos());
    build(angles, spec.spin, &bonds, |_, _| coupling, spec.h_par)
}

/// `η = sin((θ_j − θ_i)/2) / sin θ̄` with `θ̄ = (θ_i + θ_j)/2`.
///
/// At common azimuth the conditions force `J_x = J_y` and
/// `J_z/J_x = (1 − cos θ_i cos θ_j)/(sin θ_i sin θ_j)`, which is
/// `(1 + η²)/(1 − η²)` for this half-angle `η`.
pub fn neel_eta(theta_i: f64, theta_j: f64) -> Result<f64, RecipeError> {
    let mean = 0.5 * (theta_i + theta_j);
    if mean.sin().abs() < 1e-12 {
        return Err(RecipeError::SingularMeanAngle(mean));
    }
    Ok((0.5 * (theta_j - theta_i)).sin() / mean.sin())
}

/// Chain with alternating polar angles `θ_1 θ_2 θ_1 …` at common azimuth
/// `φ`, coupled by `J_x = J_y = J(1 − η²)`, `J_z = J(1 + η²)`. Cyclic chains
/// need an even number of sites.
#[allow(clippy::too_many_arguments)]
pub fn neel_constant_phi(
    theta1: f64,
    theta2: f64,
    phi: f64,
    n: usize,
    j: f64,
    h_par: f64,
    spin: SiteSpec,
    topology: Topology,
) -> Result<DesignReport, RecipeError> {
    if topology == Topology::Cyclic && n % 2 == 1 {
        return Err(RecipeError::InvalidChain(format!("alternating order on an odd ring of {n}")));
    }
    let bonds = chain_bonds(n, topology)?;
    let eta2 = neel_eta(theta1, theta2)?.powi(2);
    let coupling = Vec3::new(j * (1.0 - eta2), j * (1.0 - eta2), j * (1.0 + eta2));
    let angles = (0..n)
        .map(|i| Angles::new(if i % 2 == 0 { theta1 } else { theta2 }, phi))
        .collect();
    build(angles, spin, &bonds, |_, _| coupling, h_par)
}

/// A principal plane spanned by axes `mu`, `nu` (0 = x, 1 = y, 2 = z).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrincipalPlane {
    pub mu: usize,
    pub nu: usize,
}

impl PrincipalPlane {
    pub fn new(mu: usize, nu: usize) -> Result<Self, RecipeError> {
        if mu > 2 || nu > 2 || mu == nu {
            return Err(RecipeError::InvalidChain(format!("axes ({mu}, {nu}) do not span a plane")));
        }
        Ok(Self { mu, nu })
    }

    pub fn sigma(&self) -> usize {
        3 - self.mu - self.nu
    }

    /// `cos γ e_μ + sin γ e_ν`.
    pub fn direction(&self, gamma: f64) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.mu] = gamma.cos();
        n[self.nu] = gamma.sin();
        n
    }

    /// The third coupling that makes the uniform state along `gamma` an
    /// eigenstate: `J_σ = J_μ n_ν² + J_ν n_μ²`.
    pub fn compatible_sigma(&self, gamma: f64, j_mu: f64, j_nu: f64) -> f64 {
        j_mu * gamma.sin().powi(2) + j_nu * gamma.cos().powi(2)
    }
}

/// Uniform chain state along `cos γ e_μ + sin γ e_ν` with the anisotropic
/// coupling completed in the third direction.
#[allow(clippy::too_many_arguments)]
pub fn uniform_plane_state(
    gamma: f64,
    plane: PrincipalPlane,
    j_mu: f64,
    j_nu: f64,
    n: usize,
    topology: Topology,
    h_par: f64,
    spin: SiteSpec,
) -> Result<DesignReport, RecipeError> {
    let bonds = chain_bonds(n, topology)?;
    let mut coupling = Vec3::zeros();
    coupling[plane.mu] = j_mu;
    coupling[plane.nu] = j_nu;
    coupling[plane.sigma()] = plane.compatible_sigma(gamma, j_mu, j_nu);
    let angles = vec![Angles::from_direction(&plane.direction(gamma)); n];
    build(angles, spin, &bonds, |_, _| coupling, h_par)
}

/// The scenarios for which a control complexity is tabulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    TunablePair,
    TunableOpenChain,
    TunableCyclicChain,
    UniformPair,
    UniformCyclicChain,
    UniformOpenChain,
    FixedCouplingPair,
    FixedOpenChain,
    FixedCyclicChain,
    UniformStateCyclicFixed,
    UniformStateOpenFixed,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Self::TunablePair,
        Self::TunableOpenChain,
        Self::TunableCyclicChain,
        Self::UniformPair,
        Self::UniformCyclicChain,
        Self::UniformOpenChain,
        Self::FixedCouplingPair,
        Self::FixedOpenChain,
        Self::FixedCyclicChain,
        Self::UniformStateCyclicFixed,
        Self::UniformStateOpenFixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::TunablePair => "tunable-pair",
            Self::TunableOpenChain => "tunable-open-chain",
            Self::TunableCyclicChain => "tunable-cyclic-chain",
            Self::UniformPair => "uniform-pair",
            Self::UniformCyclicChain => "uniform-cyclic-chain",
            Self::UniformOpenChain => "uniform-open-chain",
            Self::FixedCouplingPair => "fixed-coupling-pair",
            Self::FixedOpenChain => "fixed-open-chain",
            Self::FixedCyclicChain => "fixed-cyclic-chain",
            Self::UniformStateCyclicFixed => "uniform-state-cyclic-fixed",
            Self::UniformStateOpenFixed => "uniform-state-open-fixed",
        }
    }

    fn is_pair(&self) -> bool {
        matches!(self, Self::TunablePair | Self::UniformPair | Self::FixedCouplingPair)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = RecipeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| RecipeError::UnknownScenario(s.to_string()))
    }
}

/// Number of controlled local fields `m` and exchange couplings `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComplexityRating {
    pub m: usize,
    pub k: usize,
    pub scenario: Scenario,
}

/// Tabulated control complexity. Pair scenarios ignore `n`; chain scenarios
/// need at least three sites.
pub fn complexity_rating(scenario: Scenario, n: usize) -> Result<ComplexityRating, RecipeError> {
    use Scenario::*;
    if !scenario.is_pair() && n < 3 {
        return Err(RecipeError::InvalidChain(format!("{scenario} needs N ≥ 3, got {n}")));
    }
    let (m, k) = match scenario {
        TunablePair => (1, 1),
        TunableOpenChain => (n - 1, n - 1),
        TunableCyclicChain => (n - 1, n),
        UniformPair => (0, 1),
        UniformCyclicChain => (0, n),
        UniformOpenChain => (2, n - 1),
        FixedCouplingPair => (1, 0),
        FixedOpenChain => (n - 1, 0),
        FixedCyclicChain => (n - 1, 1),
        UniformStateCyclicFixed => (0, 0),
        UniformStateOpenFixed => (2, 0),
    };
    Ok(ComplexityRating { m, k, scenario })
}
