//! Synthesis of couplings and factorizing fields from prescribed alignment
//! directions.

use crate::geometry::{condition_residual, uv_vectors, Angles, Mat3, Triad, Vec3};
use crate::quantum::{Bond, FactorizedSystem, SiteSpec, SystemSpec};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("direction component {axis} vanishes; use the U×V form")]
    DegenerateComponent { axis: usize },
    #[error(
        "antiparallel directions with nonzero perpendicular field admit no uniform pair field"
    )]
    NoUniformField,
    #[error("pair conditions violated (residual {0:e})")]
    ConditionsViolated(f64),
    #[error("invalid design input: {0}")]
    InvalidInput(String),
}

/// Principal axis index: 0 = x, 1 = y, 2 = z.
pub type Axis = usize;

/// Why `U` and `V` are linearly dependent, or `Generic` when they are not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseTag {
    Generic,
    /// Both directions lie in the principal plane normal to the axis.
    Coplanar(Axis),
    /// The directions are mirror images across the plane normal to the axis.
    Reflection(Axis),
    Antiparallel,
    /// Numerically dependent but matching none of the exact configurations.
    Unclassified,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyShape {
    /// Unit generator of the line of compatible exchange vectors.
    Line(Vec3),
    /// Orthonormal basis of the plane of compatible exchange vectors.
    Plane([Vec3; 2]),
}

/// All XYZ exchange vectors compatible with a pair of alignment directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingFamily {
    pub shape: FamilyShape,
    pub case_tag: CaseTag,
    /// `(n_i, n_j)` the family was built for.
    pub directions: (Vec3, Vec3),
}

const TAG_EPS: f64 = 1e-10;

/// Flips `v` so its last non-negligible component (z, then y, then x) is
/// nonnegative.
fn orient(v: Vec3) -> Vec3 {
    for k in (0..3).rev() {
        if v[k].abs() > 1e-14 {
            return if v[k] < 0.0 { -v } else { v };
        }
    }
    v
}

/// Unit null vector of the rows `u`, `v` (the `U×V` direction), taken from
/// the SVD so that it stays orthogonal to both rows to machine precision even
/// when they are nearly parallel.
fn null_direction(u: &Vec3, v: &Vec3) -> Vec3 {
    let a = Mat3::from_rows(&[u.transpose(), v.transpose(), Vec3::zeros().transpose()]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.imin();
    let mut g: Vec3 = v_t.row(k).transpose();
    // keep the U×V orientation before applying the sign convention
    let cross = u.cross(v);
    if g.dot(&cross) < 0.0 {
        g = -g;
    }
    g.normalize()
}

fn classify(ni: &Vec3, nj: &Vec3) -> CaseTag {
    if (ni + nj).amax() < TAG_EPS {
        return CaseTag::Antiparallel;
    }
    if let Some(s) = (0..3).find(|&s| ni[s].abs() < TAG_EPS && nj[s].abs() < TAG_EPS) {
        return CaseTag::Coplanar(s);
    }
    let same_abs = (0..3).all(|k| (ni[k].abs() - nj[k].abs()).abs() < TAG_EPS);
    if same_abs {
        let flipped: Vec<Axis> = (0..3)
            .filter(|&k| (ni[k] + nj[k]).abs() < TAG_EPS)
            .collect();
        if flipped.len() == 1 {
            return CaseTag::Reflection(flipped[0]);
        }
    }
    CaseTag::Unclassified
}

fn others(sigma: Axis) -> (Axis, Axis) {
    ((sigma + 1) % 3, (sigma + 2) % 3)
}

pub fn coupling_family(ti: &Triad, tj: &Triad) -> CouplingFamily {
    let uv = uv_vectors(ti, tj);
    let directions = (ti.n, tj.n);
    if !uv.dependent {
        return CouplingFamily {
            shape: FamilyShape::Line(orient(null_direction(&uv.u, &uv.v))),
            case_tag: CaseTag::Generic,
            directions,
        };
    }
    let basis = plane_basis(&uv.u);
    CouplingFamily {
        shape: FamilyShape::Plane(basis),
        case_tag: classify(&ti.n, &tj.n),
        directions,
    }
}

/// Orthonormal basis of the plane orthogonal to `normal`, seeded by
/// Gram–Schmidt from `x̂` (or `ŷ` when `x̂` is parallel to the normal).
fn plane_basis(normal: &Vec3) -> [Vec3; 2] {
    if normal.norm() < 1e-14 {
        return [Vec3::x(), Vec3::y()];
    }
    let un = normal.normalize();
    let seed = |e: Vec3| e - un * un.dot(&e);
    let mut b1 = seed(Vec3::x());
    if b1.norm() < 1e-8 {
        b1 = seed(Vec3::y());
    }
    let b1 = b1.normalize();
    let b2 = un.cross(&b1).normalize();
    [b1, b2]
}

impl CouplingFamily {
    /// Deterministic member with `|J| = j_norm`: the line generator, or the
    /// first plane basis vector, under the sign convention of `orient`.
    pub fn default_member(&self, j_norm: f64) -> Vec3 {
        match self.shape {
            FamilyShape::Line(g) => g * j_norm,
            FamilyShape::Plane([b1, _]) => orient(b1) * j_norm,
        }
    }

    /// Plane member `c1 b1 + c2 b2`; `None` for a line family.
    pub fn plane_member(&self, c1: f64, c2: f64) -> Option<Vec3> {
        match self.shape {
            FamilyShape::Plane([b1, b2]) => Some(b1 * c1 + b2 * c2),
            FamilyShape::Line(_) => None,
        }
    }

    /// Plane member fixed by the two free couplings of the dependent cases,
    /// returned together with the index of the determined component.
    ///
    /// Coplanar: `J_σ = J_μ n_iν n_jν + J_ν n_iμ n_jμ`. Reflection:
    /// `J_σ = [J_μ(1−n_iμ²) + J_ν(1−n_iν²)] / (1−n_iσ²)`. Antiparallel: the
    /// plane `Σ_μ J_μ(1−n_μ²) = 0` solved for its best-conditioned component.
    pub fn from_free_couplings(&self, j_mu: f64, j_nu: f64) -> Option<(Axis, Vec3)> {
        let (ni, nj) = self.directions;
        let (sigma, value) = match self.case_tag {
            CaseTag::Coplanar(sigma) => {
                let (mu, nu) = others(sigma);
                (sigma, j_mu * ni[nu] * nj[nu] + j_nu * ni[mu] * nj[mu])
            }
            CaseTag::Reflection(sigma) => {
                let (mu, nu) = others(sigma);
                let num = j_mu * (1.0 - ni[mu] * ni[mu]) + j_nu * (1.0 - ni[nu] * ni[nu]);
                (sigma, num / (1.0 - ni[sigma] * ni[sigma]))
            }
            CaseTag::Antiparallel => {
                let sigma = (0..3)
                    .min_by(|&a, &b| ni[a].abs().total_cmp(&ni[b].abs()))
                    .unwrap_or(2);
                let (mu, nu) = others(sigma);
                let num = j_mu * (1.0 - ni[mu] * ni[mu]) + j_nu * (1.0 - ni[nu] * ni[nu]);
                (sigma, -num / (1.0 - ni[sigma] * ni[sigma]))
            }
            CaseTag::Generic | CaseTag::Unclassified => return None,
        };
        let (mu, nu) = others(sigma);
        let mut j = Vec3::zeros();
        j[mu] = j_mu;
        j[nu] = j_nu;
        j[sigma] = value;
        Some((sigma, j))
    }
}

/// `Π_μ n_μ`.
pub fn direction_product(n: &Vec3) -> f64 {
    n.x * n.y * n.z
}

/// Closed-form line member `J_μ = −j (n_jμ D_i/n_iμ + n_iμ D_j/n_jμ)`,
/// defined only when no component of either direction vanishes.
pub fn coupling_line_explicit(ti: &Triad, tj: &Triad, j_scale: f64) -> Result<Vec3, DesignError> {
    let (ni, nj) = (ti.n, tj.n);
    for axis in 0..3 {
        if ni[axis].abs() < 1e-14 || nj[axis].abs() < 1e-14 {
            return Err(DesignError::DegenerateComponent { axis });
        }
    }
    let (di, dj) = (direction_product(&ni), direction_product(&nj));
    Ok(Vec3::from_fn(|mu, _| {
        -j_scale * (nj[mu] * di / ni[mu] + ni[mu] * dj / nj[mu])
    }))
}

/// Perpendicular field at site `i` induced by its bond to `j`:
/// `h⊥^{ij} = −S_j [J n_j − n_i (n_i·J n_j)]` with `J = J^{ij}`.
pub fn perpendicular_field(j: &Mat3, ni: &Vec3, nj: &Vec3, spin_j: f64) -> Vec3 {
    let jn = j * nj;
    -(jn - ni * ni.dot(&jn)) * spin_j
}

/// Total perpendicular field `Σ_j h⊥^{ij}` at every site.
pub fn site_perpendicular_fields(sys: &SystemSpec, directions: &[Vec3]) -> Vec<Vec3> {
    (0..sys.len())
        .map(|i| {
            sys.neighbours(i)
                .map(|(k, jm)| {
                    perpendicular_field(&jm, &directions[i], &directions[k], sys.sites[k].spin())
                })
                .sum()
        })
        .collect()
}

/// `E_Θ = −Σ_i S_i h^i_∥ − Σ_bonds S_i S_j n_i·J n_j`, where the parallel
/// component is taken from the system fields.
pub fn factorized_energy(sys: &SystemSpec, directions: &[Triad]) -> f64 {
    let n: Vec<Vec3> = directions.iter().map(|t| t.n).collect();
    let field: f64 = (0..sys.len())
        .map(|i| -sys.sites[i].spin() * sys.fields[i].dot(&n[i]))
        .sum();
    let coupling: f64 = sys
        .bonds
        .iter()
        .map(|b| -sys.sites[b.i].spin() * sys.sites[b.j].spin() * n[b.i].dot(&(b.matrix * n[b.j])))
        .sum();
    field + coupling
}

/// Uniform factorizing field of an isolated pair of equal spins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformPairField {
    pub field: Vec3,
    pub h_par_i: f64,
    pub h_par_j: f64,
}

/// Solves `h⊥^{ij} + a n_i = h⊥^{ji} + b n_j` for the parallel strengths.
///
/// `free_parallel` is used where the parallel strength is not fixed: parallel
/// directions, and antiparallel directions with vanishing perpendicular
/// field.
pub fn uniform_pair_field(
    coupling: &Vec3,
    ti: &Triad,
    tj: &Triad,
    spin: f64,
    free_parallel: f64,
) -> Result<UniformPairField, DesignError> {
    let jm = Mat3::from_diagonal(coupling);
    let scale = coupling.amax().max(1e-300);
    let residual = condition_residual(&jm, ti, tj);
    if residual > 1e-10 * scale.max(1.0) {
        return Err(DesignError::ConditionsViolated(residual));
    }
    let (ni, nj) = (ti.n, tj.n);
    let hpi = perpendicular_field(&jm, &ni, &nj, spin);
    let hpj = perpendicular_field(&jm, &nj, &ni, spin);
    let tol = 1e-12 * scale.max(1.0) * spin.max(1.0);

    if (ni - nj).amax() < TAG_EPS {
        return Ok(UniformPairField {
            field: hpi + ni * free_parallel,
            h_par_i: free_parallel,
            h_par_j: free_parallel,
        });
    }
    if (ni + nj).amax() < TAG_EPS {
        if hpi.norm() > tol {
            return Err(DesignError::NoUniformField);
        }
        return Ok(UniformPairField {
            field: hpi + ni * free_parallel,
            h_par_i: free_parallel,
            h_par_j: -free_parallel,
        });
    }
    // least squares on [n_i, -n_j] (a, b)^T = h⊥^{ji} − h⊥^{ij}
    let rhs = hpj - hpi;
    let c = ni.dot(&nj);
    let (p, q) = (ni.dot(&rhs), -nj.dot(&rhs));
    let det = 1.0 - c * c;
    let a = (p + c * q) / det;
    let b = (q + c * p) / det;
    let miss = (ni * a - nj * b - rhs).norm();
    if miss > 1e-9 * (rhs.norm() + spin * scale) {
        return Err(DesignError::ConditionsViolated(miss));
    }
    Ok(UniformPairField {
        field: hpi + ni * a,
        h_par_i: a,
        h_par_j: b,
    })
}

/// Per-site perpendicular fields and parallel strengths.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldAssignment {
    pub h_perp: Vec<Vec3>,
    pub h_par: Vec<f64>,
}

impl FieldAssignment {
    pub fn total(&self, directions: &[Vec3]) -> Vec<Vec3> {
        self.h_perp
            .iter()
            .zip(&self.h_par)
            .zip(directions)
            .map(|((hp, a), n)| hp + n * *a)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParallelField {
    Uniform(f64),
    PerSite(Vec<f64>),
}

impl ParallelField {
    fn resolve(&self, n: usize) -> Result<Vec<f64>, DesignError> {
        match self {
            Self::Uniform(h) => Ok(vec![*h; n]),
            Self::PerSite(v) if v.len() == n => Ok(v.clone()),
            Self::PerSite(v) => Err(DesignError::InvalidInput(format!(
                "{} parallel fields for {} sites",
                v.len(),
                n
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignReport {
    pub angles: Vec<Angles>,
    pub triads: Vec<Triad>,
    pub families: Vec<CouplingFamily>,
    pub fields: FieldAssignment,
    /// Ready-to-diagonalize system with the synthesized couplings and fields.
    pub system: SystemSpec,
    pub energy: f64,
    /// Largest pair-condition residual over all bonds.
    pub residual: f64,
}

impl DesignReport {
    pub fn couplings(&self) -> Vec<(usize, usize, Vec3)> {
        self.system
            .bonds
            .iter()
            .map(|b| (b.i, b.j, b.matrix.diagonal()))
            .collect()
    }

    pub fn factorized(&self) -> FactorizedSystem {
        FactorizedSystem {
            system: self.system.clone(),
            angles: self.angles.clone(),
        }
    }
}

/// Builds a system from pre-chosen couplings, filling in the perpendicular
/// fields that make the product state along `angles` an eigenstate.
pub fn complete_fields(
    angles: &[Angles],
    sites: &[SiteSpec],
    bonds: Vec<Bond>,
    h_par: &ParallelField,
) -> Result<DesignReport, DesignError> {
    let n = sites.len();
    if angles.len() != n {
        return Err(DesignError::InvalidInput(format!(
            "{} angles for {} sites",
            angles.len(),
            n
        )));
    }
    for b in &bonds {
        if b.i >= n || b.j >= n || b.i == b.j {
            return Err(DesignError::InvalidInput(format!(
                "bad bond ({}, {})",
                b.i, b.j
            )));
        }
    }
    let h_par = h_par.resolve(n)?;
    let triads: Vec<Triad> = angles
        .iter()
        .map(|a| crate::geometry::triad_from_angles(*a))
        .collect();
    let dirs: Vec<Vec3> = triads.iter().map(|t| t.n).collect();
    let families = bonds
        .iter()
        .map(|b| coupling_family(&triads[b.i], &triads[b.j]))
        .collect();
    let residual = bonds
        .iter()
        .map(|b| condition_residual(&b.matrix, &triads[b.i], &triads[b.j]))
        .fold(0.0, f64::max);
    let mut system = SystemSpec::new(sites.to_vec(), bonds);
    let h_perp = site_perpendicular_fields(&system, &dirs);
    let fields = FieldAssignment { h_perp, h_par };
    system.fields = fields.total(&dirs);
    let energy = factorized_energy(&system, &triads);
    Ok(DesignReport {
        angles: angles.to_vec(),
        triads,
        families,
        fields,
        system,
        energy,
        residual,
    })
}

/// Synthesizes XYZ couplings of norm `j_norm` on every bond and the
/// factorizing fields for the product state along `angles`.
pub fn design_system(
    angles: &[Angles],
    bonds: &[(usize, usize)],
    sites: &[SiteSpec],
    j_norm: f64,
    h_par: &ParallelField,
) -> Result<DesignReport, DesignError> {
    let triads: Vec<Triad> = angles
        .iter()
        .map(|a| crate::geometry::triad_from_angles(*a))
        .collect();
    let mut built = Vec::with_capacity(bonds.len());
    for &(i, j) in bonds {
        if i >= triads.len() || j >= triads.len() || i == j {
            return Err(DesignError::InvalidInput(format!("bad bond ({i}, {j})")));
        }
        let fam = coupling_family(&triads[i], &triads[j]);
        built.push(Bond::xyz(i, j, fam.default_member(j_norm)));
    }
    complete_fields(angles, sites, built, h_par)
}
