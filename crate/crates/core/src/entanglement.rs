//! Pair entanglement near factorization: reduced two-site states, Wootters
//! concurrence, partial-transpose negativity, first-order perturbative
//! amplitudes and parameter sweeps.

use crate::geometry::Vec3;
use crate::quantum::{
    build_hamiltonian, rotation_matrix, spin_operators, CMatrix, Diagonalization,
    FactorizedSystem, QuantumError, StateVector, SystemSpec, C64, DEGENERACY_EPS,
};
use crate::Mat3;
use nalgebra::{DVector, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

/// Values in `[−CLAMP_EPS, 0)` are treated as numerical zero.
pub const CLAMP_EPS: f64 = 1e-12;
const PSD_FLOOR: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntanglementError {
    #[error("site index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("a pair needs two distinct sites, got ({0}, {0})")]
    SameSite(usize),
    #[error("concurrence needs two spin-1/2 sites, got local dimensions {0}x{1}")]
    UnsupportedSpin(usize, usize),
    #[error("product state is not a nondegenerate level (nearest level {0:e} away)")]
    DegenerateGS(f64),
    #[error("numerical consistency: {0}")]
    Numerical(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Reduced density matrix of sites `(i, j)`, indexed `a_i · d_j + a_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairState {
    pub rho: CMatrix,
    pub sites: (usize, usize),
    pub dims: (usize, usize),
}

impl PairState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: CMatrix, sites: (usize, usize), dims: (usize, usize)) -> Result<Self, EntanglementError> {
        let d = dims.0 * dims.1;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(EntanglementError::Numerical(format!(
                "matrix is {}x{}, expected {d}x{d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let herm = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(EntanglementError::Numerical(format!("not Hermitian ({herm:e})")));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
            return Err(EntanglementError::Numerical(format!("trace {trace}")));
        }
        let lowest = rho.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if lowest < PSD_FLOOR {
            return Err(EntanglementError::Numerical(format!("negative eigenvalue {lowest:e}")));
        }
        Ok(Self { rho, sites, dims })
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// Pure two-site state `|φ⟩⟨φ|/⟨φ|φ⟩`.
    pub fn from_pure(phi: &DVector<C64>, dims: (usize, usize)) -> Result<Self, EntanglementError> {
        let phi = phi / C64::from(phi.norm());
        Self::new(&phi * phi.adjoint(), (0, 1), dims)
    }
}

/// `Tr_{rest} |ψ⟩⟨ψ|` for the ordered pair `(i, j)`.
pub fn reduce_pair(psi: &StateVector, sites: (usize, usize)) -> Result<PairState, EntanglementError> {
    let (i, j) = sites;
    let len = psi.dims.len();
    for index in [i, j] {
        if index >= len {
            return Err(EntanglementError::IndexOutOfRange { index, len });
        }
    }
    if i == j {
        return Err(EntanglementError::SameSite(i));
    }
    let (di, dj) = (psi.dims[i], psi.dims[j]);
    let mut strides = vec![1usize; len];
    for k in (0..len - 1).rev() {
        strides[k] = strides[k + 1] * psi.dims[k + 1];
    }
    let total = psi.amplitudes.len();
    // rows: pair index; columns: basis index with the pair digits zeroed
    let mut m = CMatrix::zeros(di * dj, total);
    for (idx, amp) in psi.amplitudes.iter().enumerate() {
        let ai = (idx / strides[i]) % di;
        let aj = (idx / strides[j]) % dj;
        let rest = idx - ai * strides[i] - aj * strides[j];
        m[(ai * dj + aj, rest)] = *amp;
    }
    let norm2 = psi.amplitudes.norm_squared();
    let rho = (&m * m.adjoint()) / C64::from(norm2);
    PairState::new(rho, sites, (di, dj))
}

/// `ρ^{T_j}`: transpose on the second factor.
pub fn partial_transpose(rho: &CMatrix, dims: (usize, usize)) -> CMatrix {
    let (di, dj) = dims;
    CMatrix::from_fn(di * dj, di * dj, |r, c| {
        let (a, b) = (r / dj, r % dj);
        let (x, y) = (c / dj, c % dj);
        rho[(a * dj + y, x * dj + b)]
    })
}

/// Wootters concurrence of a two-qubit state.
///
/// With `ρ = W W†`, the square roots of the eigenvalues of `ρ ρ̃` are the
/// singular values of `Wᵀ (σ_y⊗σ_y) W`, which avoids the matrix square roots
/// and stays accurate for nearly pure states.
pub fn concurrence(state: &PairState) -> Result<f64, EntanglementError> {
    if state.dims != (2, 2) {
        return Err(EntanglementError::UnsupportedSpin(state.dims.0, state.dims.1));
    }
    let eig = SymmetricEigen::new(state.rho.clone());
    let mut w = eig.eigenvectors.clone();
    for (k, p) in eig.eigenvalues.iter().enumerate() {
        let s = C64::from(p.max(0.0).sqrt());
        for r in 0..4 {
            w[(r, k)] *= s;
        }
    }
    let one = C64::from(1.0);
    let yy = CMatrix::from_fn(4, 4, |r, c| match (r, c) {
        (0, 3) | (3, 0) => -one,
        (1, 2) | (2, 1) => one,
        _ => C64::from(0.0),
    });
    let tau = w.transpose() * yy * &w;
    let mut s: Vec<f64> = tau.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    // mixed separable states legitimately give s1 − s2 − s3 − s4 < 0
    Ok((s[0] - s[1] - s[2] - s[3]).clamp(0.0, 1.0))
}

/// Sum of the magnitudes of the negative eigenvalues of `ρ^{T_j}`;
/// eigenvalues above `−CLAMP_EPS` count as zero.
pub fn negativity(state: &PairState) -> Result<f64, EntanglementError> {
    let pt = partial_transpose(&state.rho, state.dims);
    Ok(pt
        .symmetric_eigenvalues()
        .iter()
        .filter(|l| **l < -CLAMP_EPS)
        .map(|l| -l)
        .sum())
}

/// Rotated lowering operator `R S^- R†` of every site.
fn rotated_lowering(fs: &FactorizedSystem) -> Vec<CMatrix> {
    fs.system
        .sites
        .iter()
        .zip(&fs.angles)
        .map(|(s, a)| {
            let r = rotation_matrix(*s, *a);
            &r * spin_operators(*s).minus * r.adjoint()
        })
        .collect()
}

/// First-order amplitudes of single and pair spin flips, relative to the
/// product state, in the perturbed eigenstate.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationCoefficients {
    pub alpha: Vec<C64>,
    /// `(i, j, β_ij)` for every `i < j`.
    pub beta: Vec<(usize, usize, C64)>,
}

impl PerturbationCoefficients {
    pub fn beta(&self, i: usize, j: usize) -> Option<C64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.beta.iter().find(|(x, y, _)| *x == a && *y == b).map(|t| t.2)
    }
}

/// Projections of `v` onto `S_i^{-'}|Θ⟩` and `S_i^{-'} S_j^{-'}|Θ⟩`, each
/// divided by the squared norm of that flip state.
fn flip_amplitudes(fs: &FactorizedSystem, theta: &StateVector, v: &DVector<C64>) -> PerturbationCoefficients {
    let lower = rotated_lowering(fs);
    let n = lower.len();
    let project = |flip: &StateVector| {
        let n2 = flip.amplitudes.norm_squared();
        flip.amplitudes.dotc(v) / C64::from(n2)
    };
    let singles: Vec<StateVector> = (0..n).map(|i| theta.apply_local(i, &lower[i])).collect();
    let alpha = singles.iter().map(project).collect();
    let mut beta = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            beta.push((i, j, project(&singles[i].apply_local(j, &lower[j]))));
        }
    }
    PerturbationCoefficients { alpha, beta }
}

/// First-order correction `Σ_ν |ν⟩⟨ν|δH|Θ⟩/(E_Θ − E_ν)` for
/// `δH = −Σ δh_i·S_i − Σ S_i·δJ S_j`, expanded in flips of the product state.
/// `delta_j` is indexed like `fs.system.bonds`.
pub fn first_order_coefficients(
    fs: &FactorizedSystem,
    delta_h: &[Vec3],
    delta_j: &[Mat3],
) -> Result<PerturbationCoefficients, EntanglementError> {
    let sys = &fs.system;
    if delta_h.len() != sys.len() || delta_j.len() != sys.bonds.len() {
        return Err(EntanglementError::Quantum(QuantumError::InvalidSystem(format!(
            "{} field and {} coupling perturbations for {} sites and {} bonds",
            delta_h.len(),
            delta_j.len(),
            sys.len(),
            sys.bonds.len()
        ))));
    }
    let theta = fs.theta_state()?;
    let h = build_hamiltonian(sys)?;
    let e_theta = fs.theta_energy(sys);
    let diag = Diagonalization::new(&h, &sys.dims());

    // distance from E_Θ to the nearest other level
    let mut distances: Vec<f64> = diag.values.iter().map(|e| (e - e_theta).abs()).collect();
    distances.sort_by(f64::total_cmp);
    let nearest = distances.get(1).copied().unwrap_or(f64::INFINITY);
    if nearest <= DEGENERACY_EPS {
        return Err(EntanglementError::DegenerateGS(nearest));
    }

    let mut delta = SystemSpec::new(sys.sites.clone(), sys.bonds.clone());
    delta.fields = delta_h.to_vec();
    for (b, dj) in delta.bonds.iter_mut().zip(delta_j) {
        b.matrix = *dj;
    }
    let dh = build_hamiltonian(&delta)?;
    let mut v = &dh * &theta.amplitudes;
    let along = theta.amplitudes.dotc(&v);
    v -= &theta.amplitudes * along;

    let mut dgs = DVector::zeros(v.len());
    for (k, e) in diag.values.iter().enumerate() {
        if (e - e_theta).abs() <= DEGENERACY_EPS {
            continue;
        }
        let nu = diag.vectors.column(k);
        let c = nu.dotc(&v) / C64::from(e_theta - e);
        dgs += nu * c;
    }
    Ok(flip_amplitudes(fs, &theta, &dgs))
}

/// Exact single- and pair-flip amplitudes of `psi` relative to its overlap
/// with the product state, in the same normalization as
/// [`first_order_coefficients`].
pub fn flip_amplitudes_of_state(fs: &FactorizedSystem, psi: &StateVector) -> Result<PerturbationCoefficients, EntanglementError> {
    let theta = fs.theta_state()?;
    let c0 = theta.overlap(psi);
    if c0.norm() < 1e-12 {
        return Err(EntanglementError::Numerical("state orthogonal to the product state".into()));
    }
    let v = &psi.amplitudes / c0;
    Ok(flip_amplitudes(fs, &theta, &v))
}

/// The first-order pair state of two qubits with flip amplitudes `α_i`,
/// `α_j`, `β`, dropping every second-order entry. It is not positive
/// semidefinite, only a leading-order model.
pub fn first_order_pair_matrix(alpha_i: C64, alpha_j: C64, beta: C64) -> CMatrix {
    let z = C64::from(0.0);
    let one = C64::from(1.0);
    CMatrix::from_row_slice(
        4,
        4,
        &[
            one, alpha_i, alpha_j, beta,
            alpha_i.conj(), z, z, z,
            alpha_j.conj(), z, z, z,
            beta.conj(), z, z, z,
        ],
    )
}

/// The pure state whose density matrix agrees with
/// [`first_order_pair_matrix`] to first order.
pub fn first_order_pair_state(alpha_i: C64, alpha_j: C64, beta: C64) -> Result<PairState, EntanglementError> {
    let phi = DVector::from_vec(vec![C64::from(1.0), alpha_i.conj(), alpha_j.conj(), beta.conj()]);
    PairState::from_pure(&phi, (2, 2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    /// `h_i + Δ ĥ_⊥,i` with `ĥ_⊥,i` the unit perpendicular field.
    FieldPerp,
    /// `J^{ij}_μμ + Δ` on every bond.
    CouplingShift,
    /// Parallel field strength set to the parameter.
    ParallelField,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => vec![],
            1 => vec![self.lo],
            n => (0..n)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairSelector {
    All,
    List(Vec<(usize, usize)>),
}

impl PairSelector {
    pub fn resolve(&self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Self::All => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            Self::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub i: usize,
    pub j: usize,
    pub concurrence: f64,
    pub gs_energy: f64,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepWarning {
    /// Ground-state overlap with the previous step fell below one half.
    LevelCrossing { param: f64, overlap: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<SweepWarning>,
}

/// System at one sweep point around the factorized base with parallel
/// field `h_par`.
pub fn perturbed_system(fs: &FactorizedSystem, h_par: f64, mode: SweepMode, param: f64) -> SystemSpec {
    match mode {
        SweepMode::ParallelField => fs.with_parallel_field(param),
        SweepMode::FieldPerp => {
            let mut sys = fs.with_parallel_field(h_par);
            for (h, hp) in sys.fields.iter_mut().zip(fs.perpendicular_fields()) {
                let norm = hp.norm();
                if norm >= 1e-12 {
                    *h += hp * (param / norm);
                }
            }
            sys
        }
        SweepMode::CouplingShift => {
            let mut sys = fs.with_parallel_field(h_par);
            for b in sys.bonds.iter_mut() {
                b.matrix += Mat3::identity() * param;
            }
            sys
        }
    }
}

struct SweepPoint {
    rows: Vec<SweepRow>,
    ground: DVector<C64>,
}

/// Ground-state pair concurrences across a parameter range. Points are
/// diagonalized in parallel; rows are ordered by step, then by pair.
pub fn sweep(
    fs: &FactorizedSystem,
    h_par: f64,
    mode: SweepMode,
    range: SweepRange,
    pairs: &PairSelector,
) -> Result<SweepTable, EntanglementError> {
    let n = fs.system.len();
    let pairs = pairs.resolve(n);
    for &(i, j) in &pairs {
        for index in [i, j] {
            if index >= n {
                return Err(EntanglementError::IndexOutOfRange { index, len: n });
            }
        }
        if i == j {
            return Err(EntanglementError::SameSite(i));
        }
        let (di, dj) = (fs.system.sites[i].dim(), fs.system.sites[j].dim());
        if (di, dj) != (2, 2) {
            return Err(EntanglementError::UnsupportedSpin(di, dj));
        }
    }
    let params = range.values();
    let points: Vec<SweepPoint> = params
        .par_iter()
        .map(|&param| {
            let sys = perturbed_system(fs, h_par, mode, param);
            let h = build_hamiltonian(&sys)?;
            let diag = Diagonalization::new(&h, &sys.dims());
            let gs = diag.state(0);
            let gs_energy = diag.ground_energy();
            let gap = if diag.values.len() > 1 { diag.values[1] - diag.values[0] } else { 0.0 };
            let rows = pairs
                .iter()
                .map(|&(i, j)| {
                    Ok(SweepRow {
                        param,
                        i,
                        j,
                        concurrence: concurrence(&reduce_pair(&gs, (i, j))?)?,
                        gs_energy,
                        gap,
                    })
                })
                .collect::<Result<Vec<_>, EntanglementError>>()?;
            Ok(SweepPoint { rows, ground: gs.amplitudes })
        })
        .collect::<Result<_, EntanglementError>>()?;

    let mut warnings = Vec::new();
    for (k, w) in points.windows(2).enumerate() {
        let overlap = w[0].ground.dotc(&w[1].ground).norm();
        if overlap < 0.5 {
            warnings.push(SweepWarning::LevelCrossing {
                param: params[k + 1],
                overlap,
            });
        }
    }
    Ok(SweepTable {
        rows: points.into_iter().flat_map(|p| p.rows).collect(),
        warnings,
    })
}

/// Bell state `(|↑↓⟩ − |↓↑⟩)/√2` as a pair state.
pub fn singlet() -> PairState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = DVector::from_vec(vec![C64::from(0.0), C64::from(s), C64::from(-s), C64::from(0.0)]);
    PairState::from_pure(&phi, (2, 2)).expect("singlet is a valid state")
}
