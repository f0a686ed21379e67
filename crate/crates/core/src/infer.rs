//! Compatible alignment directions for fixed couplings: the partner of a
//! single bond, propagation along open chains, and a brute-force grid scan
//! that serves as an independent check.

use crate::geometry::{
    angular_distance, condition_components, condition_residual, triad_from_angles, Angles, Mat3,
    Triad, Vec3,
};
use std::f64::consts::{PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionKind {
    /// Two distinct directions, ordered `+` then `−`.
    TwoBranch,
    /// `b ∝ a`: the single axis of `a`, returned in both orientations
    /// (`+a` first) since the conditions only fix `n_i ∥ a`.
    SingleCollinear,
    /// `λ₊ = λ₋ = 0`: a single direction along `a × b`.
    Uniform,
    /// `a = b = 0`: every direction is compatible.
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSolution {
    pub kind: SolutionKind,
    /// Empty for `Free`.
    pub solutions: Vec<Vec3>,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

/// `(λ₊², λ₋²)` evaluated without cancellation, using `λ₊² λ₋² = (a·b)²`.
fn lambda_squares(a: &Vec3, b: &Vec3) -> (f64, f64) {
    let d = a.norm_squared() - b.norm_squared();
    let p = a.dot(b);
    let root = (d * d + 4.0 * p * p).sqrt();
    if root == 0.0 {
        return (0.0, 0.0);
    }
    if d >= 0.0 {
        let plus = 0.5 * (root + d);
        (plus, p * p / plus)
    } else {
        let minus = 0.5 * (root - d);
        (p * p / minus, minus)
    }
}

/// Directions `n_i` compatible with `J = J^{ij}` and the fixed frame at `j`.
pub fn partner_directions(j: &Mat3, tj: &Triad) -> DirectionSolution {
    let a = j * tj.nx;
    let b = j * tj.ny;
    let eps_zero = 1e-12 * (j.amax() + 1.0);
    let (lp2, lm2) = lambda_squares(&a, &b);
    let (lp, lm) = (lp2.sqrt(), lm2.sqrt());
    if a.norm() < eps_zero && b.norm() < eps_zero {
        return DirectionSolution {
            kind: SolutionKind::Free,
            solutions: vec![],
            lambda_plus: lp,
            lambda_minus: lm,
        };
    }
    let cross = a.cross(&b);
    if a.norm() >= eps_zero && cross.norm() <= 1e-12 * a.norm() * b.norm().max(eps_zero) {
        return DirectionSolution {
            kind: SolutionKind::SingleCollinear,
            solutions: vec![a.normalize(), -a.normalize()],
            lambda_plus: lp,
            lambda_minus: lm,
        };
    }
    let scale = a.norm_squared() + b.norm_squared();
    if lp2 <= 1e-12 * scale && lm2 <= 1e-12 * scale {
        return DirectionSolution {
            kind: SolutionKind::Uniform,
            solutions: vec![cross.normalize()],
            lambda_plus: lp,
            lambda_minus: lm,
        };
    }
    let eta = if a.dot(&b) >= 0.0 { 1.0 } else { -1.0 };
    let shift = a * (eta * lp) + b * lm;
    DirectionSolution {
        kind: SolutionKind::TwoBranch,
        solutions: vec![(cross + shift).normalize(), (cross - shift).normalize()],
        lambda_plus: lp,
        lambda_minus: lm,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BranchPolicy {
    All,
    /// One bit per bond, bond 0 first; `0` selects the `+` branch. Bits on
    /// bonds with a single solution are ignored.
    Word(Vec<bool>),
    First,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfiguration {
    pub directions: Vec<Vec3>,
    /// Branch taken on each bond, bond 0 first (`false` = `+`).
    pub branch_word: Vec<bool>,
    /// Sites where any direction was allowed and the seed was substituted.
    pub free_sites: Vec<usize>,
    /// Largest pair-condition residual along the chain.
    pub max_residual: f64,
}

impl ChainConfiguration {
    pub fn word_string(&self) -> String {
        self.branch_word
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect()
    }
}

struct Step {
    bond: usize,
    known: usize,
    target: usize,
    coupling: Mat3,
}

/// Propagates compatible directions along an open chain whose bond `k`
/// couples sites `k` and `k+1` through `couplings[k] = J^{k,k+1}`.
pub fn enumerate_chain(
    couplings: &[Mat3],
    seed: Angles,
    seed_site: usize,
    policy: &BranchPolicy,
) -> Vec<ChainConfiguration> {
    let n = couplings.len() + 1;
    let seed_site = seed_site.min(n - 1);
    let mut steps = Vec::with_capacity(n - 1);
    for k in seed_site..n - 1 {
        // site k known, k+1 unknown: partner of k+1 uses J^{k+1,k}
        steps.push(Step {
            bond: k,
            known: k,
            target: k + 1,
            coupling: couplings[k].transpose(),
        });
    }
    for k in (0..seed_site).rev() {
        steps.push(Step {
            bond: k,
            known: k + 1,
            target: k,
            coupling: couplings[k],
        });
    }

    let seed_dir = seed.direction();
    let mut dirs = vec![Vec3::zeros(); n];
    dirs[seed_site] = seed_dir;
    let mut word = vec![false; n - 1];
    let mut free = Vec::new();
    let mut out = Vec::new();
    walk(
        &steps, 0, policy, seed_dir, &mut dirs, &mut word, &mut free, &mut out,
    );

    for c in out.iter_mut() {
        c.max_residual = (0..n - 1)
            .map(|k| {
                condition_residual(
                    &couplings[k],
                    &Triad::from_direction(&c.directions[k]),
                    &Triad::from_direction(&c.directions[k + 1]),
                )
            })
            .fold(0.0, f64::max);
    }
    out.sort_by(|x, y| x.branch_word.cmp(&y.branch_word));
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    steps: &[Step],
    depth: usize,
    policy: &BranchPolicy,
    seed_dir: Vec3,
    dirs: &mut Vec<Vec3>,
    word: &mut Vec<bool>,
    free: &mut Vec<usize>,
    out: &mut Vec<ChainConfiguration>,
) {
    let Some(step) = steps.get(depth) else {
        let mut free_sites = free.clone();
        free_sites.sort_unstable();
        out.push(ChainConfiguration {
            directions: dirs.clone(),
            branch_word: word.clone(),
            free_sites,
            max_residual: 0.0,
        });
        return;
    };
    let sol = partner_directions(&step.coupling, &Triad::from_direction(&dirs[step.known]));
    if sol.kind == SolutionKind::Free {
        dirs[step.target] = seed_dir;
        word[step.bond] = false;
        free.push(step.target);
        walk(steps, depth + 1, policy, seed_dir, dirs, word, free, out);
        free.pop();
        return;
    }
    let choices: Vec<usize> = match policy {
        BranchPolicy::All => (0..sol.solutions.len()).collect(),
        BranchPolicy::First => vec![0],
        BranchPolicy::Word(bits) => {
            let want = bits.get(step.bond).copied().unwrap_or(false) as usize;
            vec![want.min(sol.solutions.len() - 1)]
        }
    };
    for c in choices {
        dirs[step.target] = sol.solutions[c];
        word[step.bond] = c == 1;
        walk(steps, depth + 1, policy, seed_dir, dirs, word, free, out);
    }
    word[step.bond] = false;
}

/// Approximate zero of the pair conditions located by the grid scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanZero {
    /// Best grid point of the cluster.
    pub grid_angles: Angles,
    /// Residual norm at the grid point.
    pub grid_residual: f64,
    /// Locally polished direction (pattern search from the grid point).
    pub refined: Vec3,
    pub refined_residual: f64,
}

/// Rotation-invariant size of the condition violation.
fn scan_score(j: &Mat3, ti: &Triad, tj: &Triad) -> f64 {
    let (c1, c2) = condition_components(j, ti, tj);
    c1.hypot(c2)
}

fn polish(j: &Mat3, tj: &Triad, start: Vec3, step: f64) -> (Vec3, f64) {
    let f = |n: &Vec3| {
        let (c1, c2) = condition_components(j, &Triad::from_direction(n), tj);
        c1 * c1 + c2 * c2
    };
    let mut n = start.normalize();
    let mut best = f(&n);
    let mut s = step;
    let mut iterations = 0;
    while s > 1e-13 && iterations < 20_000 {
        iterations += 1;
        let t = Triad::from_direction(&n);
        let mut moved = false;
        for dir in [
            t.nx,
            -t.nx,
            t.ny,
            -t.ny,
            t.nx + t.ny,
            t.nx - t.ny,
            -t.nx + t.ny,
            -t.nx - t.ny,
        ] {
            let cand = (n + dir * s).normalize();
            let val = f(&cand);
            if val < best {
                best = val;
                n = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    (n, best.sqrt())
}

/// Brute-force scan of the pair conditions over a `(θ_i, φ_i)` grid with
/// `n_theta × n_phi` cell-centred points (at least 90 × 180). Grid-local
/// minima below a step-size dependent threshold are polished, kept only if
/// they reach a true zero, and merged when they converge to the same point.
pub fn oracle_scan(j: &Mat3, tj: &Triad, n_theta: usize, n_phi: usize) -> Vec<ScanZero> {
    let n_theta = n_theta.max(90);
    let n_phi = n_phi.max(180);
    let dtheta = PI / n_theta as f64;
    let dphi = TAU / n_phi as f64;
    let angle = |k: usize, l: usize| Angles::new((k as f64 + 0.5) * dtheta, l as f64 * dphi);
    let score: Vec<f64> = (0..n_theta * n_phi)
        .map(|idx| scan_score(j, &triad_from_angles(angle(idx / n_phi, idx % n_phi)), tj))
        .collect();
    let at = |k: usize, l: usize| score[k * n_phi + l];

    let jscale = j.norm().max(1e-300);
    let threshold = 4.0 * dtheta.max(dphi) * jscale;
    let mut found: Vec<ScanZero> = Vec::new();
    for k in 0..n_theta {
        for l in 0..n_phi {
            let v = at(k, l);
            if v > threshold {
                continue;
            }
            let mut is_min = true;
            'nb: for dk in [-1i64, 0, 1] {
                for dl in [-1i64, 0, 1] {
                    if dk == 0 && dl == 0 {
                        continue;
                    }
                    let kk = k as i64 + dk;
                    if kk < 0 || kk >= n_theta as i64 {
                        continue;
                    }
                    let ll = (l as i64 + dl).rem_euclid(n_phi as i64) as usize;
                    if at(kk as usize, ll) < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let a = angle(k, l);
            let (refined, refined_residual) = polish(j, tj, a.direction(), dtheta);
            if refined_residual > 1e-8 * jscale {
                continue;
            }
            if let Some(z) = found
                .iter_mut()
                .find(|z| angular_distance(&z.refined, &refined) < 1e-4)
            {
                if v < z.grid_residual {
                    z.grid_angles = a;
                    z.grid_residual = v;
                }
                continue;
            }
            found.push(ScanZero {
                grid_angles: a,
                grid_residual: v,
                refined,
                refined_residual,
            });
        }
    }
    found
}
