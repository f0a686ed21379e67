//! Exact Hilbert-space machinery: spin matrices, dense Hamiltonians in the
//! tensor-product `S^z` basis, product states, and exact diagonalization.
//!
//! Basis convention: site 0 is the slowest-varying index and local index 0 is
//! the maximal `S^z = S` state, so the all-up state is basis vector 0.

use crate::geometry::{Angles, Mat3, Vec3};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default cap on the total Hilbert-space dimension for dense work.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Relative window for counting eigenvalues as part of the ground space.
pub const DEGENERACY_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("invalid spin {0}: 2S must be a positive integer")]
    InvalidSpin(f64),
    #[error("Hilbert-space dimension {dimension} exceeds cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("state is not a factorized eigenstate (residual {0:e})")]
    NotFactorized(f64),
    #[error("no finite critical field found below {0}")]
    NoCrossing(f64),
}

/// A single site, stored as twice its spin so half-integers stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SiteSpec {
    twice_spin: u32,
}

impl SiteSpec {
    pub fn new(spin: f64) -> Result<Self, QuantumError> {
        let twice = 2.0 * spin;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(QuantumError::InvalidSpin(spin));
        }
        Ok(Self {
            twice_spin: twice.round() as u32,
        })
    }

    pub fn half() -> Self {
        Self { twice_spin: 1 }
    }

    pub fn from_twice(twice_spin: u32) -> Result<Self, QuantumError> {
        if twice_spin == 0 {
            return Err(QuantumError::InvalidSpin(0.0));
        }
        Ok(Self { twice_spin })
    }

    pub fn spin(&self) -> f64 {
        self.twice_spin as f64 / 2.0
    }

    pub fn twice_spin(&self) -> u32 {
        self.twice_spin
    }

    pub fn dim(&self) -> usize {
        self.twice_spin as usize + 1
    }
}

/// A bond term `-S_i · J S_j`; each unordered pair is stored once.
#[derive(Clone, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub matrix: Mat3,
}

impl Bond {
    pub fn new(i: usize, j: usize, matrix: Mat3) -> Self {
        Self { i, j, matrix }
    }

    pub fn xyz(i: usize, j: usize, coupling: Vec3) -> Self {
        Self::new(i, j, Mat3::from_diagonal(&coupling))
    }

    /// Coupling matrix as seen from `site`, i.e. `J^{site,other}`.
    pub fn matrix_from(&self, site: usize) -> Mat3 {
        if site == self.i {
            self.matrix
        } else {
            self.matrix.transpose()
        }
    }

    pub fn other(&self, site: usize) -> usize {
        if site == self.i {
            self.j
        } else {
            self.i
        }
    }
}

/// Full Hamiltonian description
/// `H = -Σ_i h^i·S_i - Σ_bonds S_i·J^{ij} S_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub sites: Vec<SiteSpec>,
    pub bonds: Vec<Bond>,
    pub fields: Vec<Vec3>,
}

impl SystemSpec {
    /// A system with no fields.
    pub fn new(sites: Vec<SiteSpec>, bonds: Vec<Bond>) -> Self {
        let fields = vec![Vec3::zeros(); sites.len()];
        Self {
            sites,
            bonds,
            fields,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sites.iter().map(SiteSpec::dim).collect()
    }

    pub fn dimension(&self) -> usize {
        self.sites.iter().map(SiteSpec::dim).product()
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        let n = self.sites.len();
        if n == 0 {
            return Err(QuantumError::InvalidSystem("no sites".into()));
        }
        if self.fields.len() != n {
            return Err(QuantumError::InvalidSystem(format!(
                "{} fields for {} sites",
                self.fields.len(),
                n
            )));
        }
        for b in &self.bonds {
            if b.i >= n || b.j >= n {
                return Err(QuantumError::InvalidSystem(format!(
                    "bond ({}, {}) out of range",
                    b.i, b.j
                )));
            }
            if b.i == b.j {
                return Err(QuantumError::InvalidSystem(format!(
                    "self bond at site {}",
                    b.i
                )));
            }
            if b.matrix.iter().any(|x| !x.is_finite()) {
                return Err(QuantumError::InvalidSystem(format!(
                    "non-finite coupling on bond ({}, {})",
                    b.i, b.j
                )));
            }
        }
        if self.fields.iter().any(|h| h.iter().any(|x| !x.is_finite())) {
            return Err(QuantumError::InvalidSystem("non-finite field".into()));
        }
        Ok(())
    }

    /// Bonds touching `site`, with the partner index and `J^{site,partner}`.
    pub fn neighbours(&self, site: usize) -> impl Iterator<Item = (usize, Mat3)> + '_ {
        self.bonds
            .iter()
            .filter(move |b| b.i == site || b.j == site)
            .map(move |b| (b.other(site), b.matrix_from(site)))
    }

    /// Largest number of bonds at any site.
    pub fn coordination(&self) -> usize {
        (0..self.len())
            .map(|s| self.neighbours(s).count())
            .max()
            .unwrap_or(0)
    }
}

/// Spin matrices in the `|S, m⟩` basis ordered `m = S, S-1, …, -S`.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
    pub plus: CMatrix,
    pub minus: CMatrix,
}

impl SpinOperators {
    pub fn component(&self, mu: usize) -> &CMatrix {
        match mu {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }

    /// `h · S` for a real vector `h`.
    pub fn dot(&self, h: &Vec3) -> CMatrix {
        &self.x * C64::from(h.x) + &self.y * C64::from(h.y) + &self.z * C64::from(h.z)
    }
}

pub fn spin_operators(site: SiteSpec) -> SpinOperators {
    let s = site.spin();
    let d = site.dim();
    let m = |k: usize| s - k as f64;
    let z = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::from(m(r))
        } else {
            C64::from(0.0)
        }
    });
    // <m+1|S+|m> = sqrt(S(S+1) - m(m+1)); index k-1 holds m+1.
    let plus = CMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            let mm = m(c);
            C64::from((s * (s + 1.0) - mm * (mm + 1.0)).sqrt())
        } else {
            C64::from(0.0)
        }
    });
    let minus = plus.adjoint();
    let x = (&plus + &minus) * C64::from(0.5);
    let y = (&plus - &minus) * C64::new(0.0, -0.5);
    SpinOperators {
        x,
        y,
        z,
        plus,
        minus,
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Index arithmetic for the tensor-product basis.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(dims: &[usize]) -> Self {
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Self {
            dims: dims.to_vec(),
            strides,
            total: dims.iter().product(),
        }
    }

    #[inline]
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.dims[site]
    }
}

/// Adds `op` acting on `site` into `h`.
fn accumulate_local(h: &mut CMatrix, layout: &Layout, site: usize, op: &CMatrix) {
    let d = layout.dims[site];
    let stride = layout.strides[site];
    for col in 0..layout.total {
        let a = layout.digit(col, site);
        let base = col - a * stride;
        for r in 0..d {
            let v = op[(r, a)];
            if v != C64::from(0.0) {
                h[(base + r * stride, col)] += v;
            }
        }
    }
}

/// Adds a two-site operator (indexed `a_i * d_j + a_j`) into `h`.
fn accumulate_pair(h: &mut CMatrix, layout: &Layout, i: usize, j: usize, op: &CMatrix) {
    let (di, dj) = (layout.dims[i], layout.dims[j]);
    let (si, sj) = (layout.strides[i], layout.strides[j]);
    for col in 0..layout.total {
        let (ai, aj) = (layout.digit(col, i), layout.digit(col, j));
        let base = col - ai * si - aj * sj;
        let c = ai * dj + aj;
        for ri in 0..di {
            for rj in 0..dj {
                let v = op[(ri * dj + rj, c)];
                if v != C64::from(0.0) {
                    h[(base + ri * si + rj * sj, col)] += v;
                }
            }
        }
    }
}

/// `Σ_{μν} J_{μν} S_i^μ ⊗ S_j^ν` on the pair space.
pub fn pair_coupling_operator(j: &Mat3, si: &SpinOperators, sj: &SpinOperators) -> CMatrix {
    let di = si.z.nrows();
    let dj = sj.z.nrows();
    let mut k = CMatrix::zeros(di * dj, di * dj);
    for mu in 0..3 {
        for nu in 0..3 {
            let c = j[(mu, nu)];
            if c != 0.0 {
                k += kron(si.component(mu), sj.component(nu)) * C64::from(c);
            }
        }
    }
    k
}

pub fn build_hamiltonian(sys: &SystemSpec) -> Result<CMatrix, QuantumError> {
    build_hamiltonian_capped(sys, DEFAULT_DIMENSION_CAP)
}

pub fn build_hamiltonian_capped(sys: &SystemSpec, cap: usize) -> Result<CMatrix, QuantumError> {
    sys.validate()?;
    let dimension = sys.dimension();
    if dimension > cap {
        return Err(QuantumError::DimensionCap { dimension, cap });
    }
    let layout = Layout::new(&sys.dims());
    let ops: Vec<SpinOperators> = sys.sites.iter().map(|s| spin_operators(*s)).collect();
    let mut h = CMatrix::zeros(dimension, dimension);
    for (site, field) in sys.fields.iter().enumerate() {
        if field.iter().any(|x| *x != 0.0) {
            let op = -ops[site].dot(field);
            accumulate_local(&mut h, &layout, site, &op);
        }
    }
    for b in &sys.bonds {
        let k = -pair_coupling_operator(&b.matrix, &ops[b.i], &ops[b.j]);
        accumulate_pair(&mut h, &layout, b.i, b.j, &k);
    }
    Ok(h)
}

/// A pure state in the tensor-product basis together with its local
/// dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<C64>,
    pub dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amplitudes: DVector<C64>, dims: Vec<usize>) -> Self {
        debug_assert_eq!(amplitudes.len(), dims.iter().product::<usize>());
        Self { amplitudes, dims }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Applies a single-site operator.
    pub fn apply_local(&self, site: usize, op: &CMatrix) -> StateVector {
        let layout = Layout::new(&self.dims);
        let d = layout.dims[site];
        let stride = layout.strides[site];
        let mut out = DVector::zeros(layout.total);
        for col in 0..layout.total {
            let amp = self.amplitudes[col];
            if amp == C64::from(0.0) {
                continue;
            }
            let a = layout.digit(col, site);
            let base = col - a * stride;
            for r in 0..d {
                out[base + r * stride] += op[(r, a)] * amp;
            }
        }
        StateVector::new(out, self.dims.clone())
    }

    /// `⟨ψ| S_site |ψ⟩` as a real vector.
    pub fn spin_expectation(&self, site: usize, ops: &SpinOperators) -> Vec3 {
        let mut out = Vec3::zeros();
        for mu in 0..3 {
            out[mu] = self.overlap(&self.apply_local(site, ops.component(mu))).re;
        }
        out
    }
}

/// Local rotation `R = exp(-iφ S^z) exp(-iθ S^y)`.
pub fn rotation_matrix(site: SiteSpec, angles: Angles) -> CMatrix {
    let ops = spin_operators(site);
    let eig = SymmetricEigen::new(ops.y.clone());
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|m| C64::from_polar(1.0, -angles.theta * m)),
    );
    let ry = &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
    let s = site.spin();
    let rz = CMatrix::from_fn(site.dim(), site.dim(), |r, c| {
        if r == c {
            C64::from_polar(1.0, -angles.phi * (s - r as f64))
        } else {
            C64::from(0.0)
        }
    });
    rz * ry
}

/// `⊗_i R_i |S_i, S_i⟩`, the maximally aligned product state.
pub fn product_state(angles: &[Angles], sites: &[SiteSpec]) -> Result<StateVector, QuantumError> {
    if angles.len() != sites.len() {
        return Err(QuantumError::InvalidSystem(format!(
            "{} angles for {} sites",
            angles.len(),
            sites.len()
        )));
    }
    let mut amps = DVector::from_element(1, C64::from(1.0));
    for (a, s) in angles.iter().zip(sites) {
        let local: DVector<C64> = rotation_matrix(*s, *a).column(0).into_owned();
        amps = amps.kronecker(&local);
    }
    let dims = sites.iter().map(SiteSpec::dim).collect();
    Ok(StateVector::new(amps, dims))
}

/// `‖H ψ − E ψ‖₂`.
pub fn verify_eigenstate(h: &CMatrix, psi: &StateVector, energy: f64) -> f64 {
    (h * &psi.amplitudes - &psi.amplitudes * C64::from(energy)).norm()
}

/// `⟨ψ|H|ψ⟩` (real part).
pub fn expectation(h: &CMatrix, psi: &StateVector) -> f64 {
    psi.amplitudes.dotc(&(h * &psi.amplitudes)).re
}

/// Eigen-decomposition with eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct Diagonalization {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub dims: Vec<usize>,
}

impl Diagonalization {
    pub fn new(h: &CMatrix, dims: &[usize]) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(h.nrows(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        Self {
            values,
            vectors,
            dims: dims.to_vec(),
        }
    }

    pub fn state(&self, k: usize) -> StateVector {
        StateVector::new(self.vectors.column(k).into_owned(), self.dims.clone())
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    pub fn ground_degeneracy(&self) -> usize {
        let e0 = self.values[0];
        let window = DEGENERACY_EPS * (1.0 + e0.abs());
        self.values
            .iter()
            .take_while(|e| **e - e0 <= window)
            .count()
    }

    /// Distance from the ground level to the next distinct level; zero when
    /// every level is degenerate with the ground one.
    pub fn gap(&self) -> f64 {
        let g = self.ground_degeneracy();
        self.values.get(g).map_or(0.0, |e| e - self.values[0])
    }

    /// Squared norm of the projection of `psi` onto the ground space.
    pub fn ground_overlap(&self, psi: &StateVector) -> f64 {
        (0..self.ground_degeneracy())
            .map(|k| self.vectors.column(k).dotc(&psi.amplitudes).norm_sqr())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub ground_degeneracy: usize,
    /// Weight of the supplied product state on the ground space.
    pub theta_overlap: Option<f64>,
    pub gap: f64,
}

pub fn spectrum(
    sys: &SystemSpec,
    theta: Option<&StateVector>,
) -> Result<SpectrumReport, QuantumError> {
    let h = build_hamiltonian(sys)?;
    let diag = Diagonalization::new(&h, &sys.dims());
    Ok(SpectrumReport {
        ground_degeneracy: diag.ground_degeneracy(),
        theta_overlap: theta.map(|t| diag.ground_overlap(t)),
        gap: diag.gap(),
        eigenvalues: diag.values,
    })
}

/// A system whose fields make the product state along `angles` an exact
/// eigenstate, parameterized by a uniform parallel-field strength.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedSystem {
    pub system: SystemSpec,
    pub angles: Vec<Angles>,
}

impl FactorizedSystem {
    pub fn new(system: SystemSpec, angles: Vec<Angles>) -> Result<Self, QuantumError> {
        if system.len() != angles.len() {
            return Err(QuantumError::InvalidSystem(format!(
                "{} angles for {} sites",
                angles.len(),
                system.len()
            )));
        }
        Ok(Self { system, angles })
    }

    pub fn directions(&self) -> Vec<Vec3> {
        self.angles.iter().map(Angles::direction).collect()
    }

    /// Field components orthogonal to each alignment direction.
    pub fn perpendicular_fields(&self) -> Vec<Vec3> {
        self.system
            .fields
            .iter()
            .zip(self.directions())
            .map(|(h, n)| h - n * h.dot(&n))
            .collect()
    }

    /// The same system with every parallel component replaced by `h_par n_i`.
    pub fn with_parallel_field(&self, h_par: f64) -> SystemSpec {
        let mut sys = self.system.clone();
        sys.fields = self
            .perpendicular_fields()
            .into_iter()
            .zip(self.directions())
            .map(|(hp, n)| hp + n * h_par)
            .collect();
        sys
    }

    pub fn theta_state(&self) -> Result<StateVector, QuantumError> {
        product_state(&self.angles, &self.system.sites)
    }

    /// Mean-field energy of the product state for the current fields.
    pub fn theta_energy(&self, sys: &SystemSpec) -> f64 {
        let n = self.directions();
        let s: Vec<f64> = sys.sites.iter().map(SiteSpec::spin).collect();
        let field: f64 = (0..n.len()).map(|i| -s[i] * sys.fields[i].dot(&n[i])).sum();
        let bonds: f64 = sys
            .bonds
            .iter()
            .map(|b| -s[b.i] * s[b.j] * n[b.i].dot(&(b.matrix * n[b.j])))
            .sum();
        field + bonds
    }

    /// `‖H|Θ⟩ − E_Θ|Θ⟩‖` at the given parallel field.
    pub fn eigen_residual(&self, h_par: f64) -> Result<f64, QuantumError> {
        let sys = self.with_parallel_field(h_par);
        let h = build_hamiltonian(&sys)?;
        Ok(verify_eigenstate(
            &h,
            &self.theta_state()?,
            self.theta_energy(&sys),
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalField {
    /// Parallel-field strength above which the product state is the
    /// nondegenerate ground state.
    pub h_c: f64,
    /// `E_min,⊥(h_c) − E_Θ(h_c)`.
    pub gap_at_threshold: f64,
    /// Largest singular value over all bond matrices.
    pub coupling_scale: f64,
    pub coordination: usize,
    pub max_spin: f64,
    /// `h_c / (J S l)`; reported, not asserted.
    pub bound_ratio: f64,
}

/// Energy gap between the product state and the lowest level orthogonal to
/// it. Since `|Θ⟩` is an exact eigenvector its complement is invariant, so
/// the orthogonal levels are the spectrum of `H` with `|Θ⟩` lifted away.
pub fn theta_gap(
    fs: &FactorizedSystem,
    theta: &StateVector,
    h_par: f64,
) -> Result<f64, QuantumError> {
    let sys = fs.with_parallel_field(h_par);
    let h = build_hamiltonian(&sys)?;
    let e_theta = fs.theta_energy(&sys);
    let lift = h.iter().map(|z| z.norm()).sum::<f64>() + e_theta.abs() + 1.0;
    let projector = &theta.amplitudes * theta.amplitudes.adjoint();
    let deflated = h + projector * C64::from(lift);
    let e_perp = deflated
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(e_perp - e_theta)
}

/// Bisection for the parallel field at which the product state becomes the
/// ground state.
pub fn critical_parallel_field(fs: &FactorizedSystem) -> Result<CriticalField, QuantumError> {
    let residual = fs.eigen_residual(0.0)?;
    if residual > 1e-10 {
        return Err(QuantumError::NotFactorized(residual));
    }
    let theta = fs.theta_state()?;
    let g = |h: f64| theta_gap(fs, &theta, h);

    const LIMIT: f64 = 1e6;
    let (mut lo, mut hi);
    if g(0.0)? < 0.0 {
        lo = 0.0;
        hi = 1.0;
        while g(hi)? <= 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > LIMIT {
                return Err(QuantumError::NoCrossing(LIMIT));
            }
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        while g(lo)? >= 0.0 {
            hi = lo;
            lo *= 2.0;
            if lo < -LIMIT {
                return Err(QuantumError::NoCrossing(-LIMIT));
            }
        }
    }
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm.abs() < 1e-12 {
            lo = mid;
            hi = mid;
            break;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h_c = 0.5 * (lo + hi);
    let gap_at_threshold = g(h_c)?;

    let coupling_scale = fs
        .system
        .bonds
        .iter()
        .map(|b| b.matrix.singular_values().max())
        .fold(0.0, f64::max);
    let coordination = fs.system.coordination();
    let max_spin = fs
        .system
        .sites
        .iter()
        .map(SiteSpec::spin)
        .fold(0.0, f64::max);
    let scale = coupling_scale * max_spin * coordination as f64;
    Ok(CriticalField {
        h_c,
        gap_at_threshold,
        coupling_scale,
        coordination,
        max_spin,
        bound_ratio: if scale > 0.0 { h_c / scale } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::triad_from_angles;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let ops = spin_operators(SiteSpec::half());
        let h = C64::from(0.5);
        let i = C64::new(0.0, 0.5);
        let o = C64::from(0.0);
        assert_eq!(ops.x, CMatrix::from_row_slice(2, 2, &[o, h, h, o]));
        assert_eq!(ops.y, CMatrix::from_row_slice(2, 2, &[o, -i, i, o]));
        assert_eq!(ops.z, CMatrix::from_row_slice(2, 2, &[h, o, o, -h]));
    }

    #[test]
    fn spin_one_z_diagonal() {
        let ops = spin_operators(SiteSpec::new(1.0).unwrap());
        let diag: Vec<f64> = (0..3).map(|k| ops.z[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        let r = 0.5f64.sqrt();
        assert!((ops.x[(0, 1)].re - r).abs() < 1e-15);
        assert!((ops.x[(1, 2)].re - r).abs() < 1e-15);
    }

    #[test]
    fn commutation_relations_up_to_five_halves() {
        let i = C64::new(0.0, 1.0);
        for twice in 1..=5 {
            let ops = spin_operators(SiteSpec::from_twice(twice).unwrap());
            assert!((commutator(&ops.x, &ops.y) - &ops.z * i).norm() < 1e-14);
            assert!((commutator(&ops.y, &ops.z) - &ops.x * i).norm() < 1e-14);
            assert!((commutator(&ops.z, &ops.x) - &ops.y * i).norm() < 1e-14);
            let s = twice as f64 / 2.0;
            let casimir = &ops.x * &ops.x + &ops.y * &ops.y + &ops.z * &ops.z;
            let expected =
                CMatrix::identity(ops.z.nrows(), ops.z.nrows()) * C64::from(s * (s + 1.0));
            assert!((casimir - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn invalid_spins_rejected() {
        assert!(SiteSpec::new(0.75).is_err());
        assert!(SiteSpec::new(0.0).is_err());
        assert!(SiteSpec::new(-0.5).is_err());
        assert!(SiteSpec::new(1.5).is_ok());
    }

    #[test]
    fn single_spin_zeeman() {
        let mut sys = SystemSpec::new(vec![SiteSpec::half()], vec![]);
        sys.fields[0] = Vec3::z();
        let r = spectrum(&sys, None).unwrap();
        assert!((r.eigenvalues[0] + 0.5).abs() < 1e-12);
        assert!((r.eigenvalues[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_pair() {
        let sys = SystemSpec::new(
            vec![SiteSpec::half(); 2],
            vec![Bond::new(0, 1, Mat3::identity())],
        );
        let r = spectrum(&sys, None).unwrap();
        let expected = [-0.25, -0.25, -0.25, 0.75];
        for (e, x) in r.eigenvalues.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12);
        }
        assert_eq!(r.ground_degeneracy, 3);
        assert!((r.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_cap_enforced() {
        let sys = SystemSpec::new(vec![SiteSpec::half(); 13], vec![]);
        assert!(matches!(
            build_hamiltonian(&sys),
            Err(QuantumError::DimensionCap {
                dimension: 8192,
                cap: 4096
            })
        ));
    }

    #[test]
    fn all_up_product_state() {
        let sites = vec![SiteSpec::half(), SiteSpec::new(1.0).unwrap()];
        let psi = product_state(&[Angles::new(0.0, 0.0); 2], &sites).unwrap();
        assert!((psi.amplitudes[0] - C64::from(1.0)).norm() < 1e-15);
        assert!((psi.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equatorial_spin_half() {
        let psi = product_state(&[Angles::new(PI / 2.0, 0.0)], &[SiteSpec::half()]).unwrap();
        let r = 0.5f64.sqrt();
        assert!((psi.amplitudes[0] - C64::from(r)).norm() < 1e-14);
        assert!((psi.amplitudes[1] - C64::from(r)).norm() < 1e-14);
    }

    #[test]
    fn zero_hamiltonian_verifies_anything() {
        let sys = SystemSpec::new(vec![SiteSpec::half(); 3], vec![]);
        let h = build_hamiltonian(&sys).unwrap();
        let psi = product_state(&[Angles::new(0.4, 1.0); 3], &sys.sites).unwrap();
        assert_eq!(verify_eigenstate(&h, &psi, 0.0), 0.0);
    }

    #[test]
    fn free_spins_have_zero_critical_field() {
        let angles = vec![
            Angles::new(0.3, 0.2),
            Angles::new(2.0, 4.0),
            Angles::new(1.0, 1.0),
        ];
        let fs = FactorizedSystem::new(SystemSpec::new(vec![SiteSpec::half(); 3], vec![]), angles)
            .unwrap();
        let c = critical_parallel_field(&fs).unwrap();
        assert!(c.h_c.abs() < 1e-8, "{}", c.h_c);
    }

    #[test]
    fn critical_field_rejects_non_eigenstates() {
        let sys = SystemSpec::new(
            vec![SiteSpec::half(); 2],
            vec![Bond::xyz(0, 1, Vec3::new(1.0, 0.0, 0.0))],
        );
        let fs =
            FactorizedSystem::new(sys, vec![Angles::new(0.7, 0.3), Angles::new(1.9, 2.0)]).unwrap();
        assert!(matches!(
            critical_parallel_field(&fs),
            Err(QuantumError::NotFactorized(_))
        ));
    }

    fn random_system(seed: &[f64], twice: &[u32]) -> SystemSpec {
        let n = twice.len();
        let sites: Vec<SiteSpec> = twice
            .iter()
            .map(|t| SiteSpec::from_twice(*t).unwrap())
            .collect();
        let mut it = seed.iter().cycle();
        let mut next = || *it.next().unwrap();
        let mut bonds = vec![];
        for i in 0..n {
            for j in (i + 1)..n {
                bonds.push(Bond::new(i, j, Mat3::from_fn(|_, _| next())));
            }
        }
        let mut sys = SystemSpec::new(sites, bonds);
        for f in sys.fields.iter_mut() {
            *f = Vec3::new(next(), next(), next());
        }
        sys
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hamiltonian_is_hermitian(seed in prop::collection::vec(-1.0..1.0f64, 7..40), twice in prop::collection::vec(1u32..3, 1..4)) {
            let sys = random_system(&seed, &twice);
            let h = build_hamiltonian(&sys).unwrap();
            prop_assert!((&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14);
            let diag = Diagonalization::new(&h, &sys.dims());
            let trace: f64 = (0..h.nrows()).map(|k| h[(k, k)].re).sum();
            let sum: f64 = diag.values.iter().sum();
            prop_assert!((trace - sum).abs() < 1e-10 * (1.0 + trace.abs()));
        }

        #[test]
        fn product_state_points_along_direction(
            thetas in prop::collection::vec(0.0..PI, 1..4),
            phis in prop::collection::vec(0.0..6.28f64, 4),
            twice in prop::collection::vec(1u32..4, 4),
        ) {
            let n = thetas.len();
            let sites: Vec<SiteSpec> = twice[..n].iter().map(|t| SiteSpec::from_twice(*t).unwrap()).collect();
            let angles: Vec<Angles> = (0..n).map(|k| Angles::new(thetas[k], phis[k])).collect();
            let psi = product_state(&angles, &sites).unwrap();
            prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
            for k in 0..n {
                let ops = spin_operators(sites[k]);
                let got = psi.spin_expectation(k, &ops);
                let want = triad_from_angles(angles[k]).n * sites[k].spin();
                prop_assert!((got - want).amax() < 1e-12);
            }
        }
    }
}
