//! Alignment directions, local frames and the Hadamard-product vectors that
//! encode the pairwise factorization conditions.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::{PI, TAU};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Threshold factor for classifying `V` as vanishing relative to `U`.
pub const DEPENDENCE_EPS: f64 = 1e-10;

/// Polar and azimuthal angle of an alignment direction.
///
/// Constructed values are always canonical: `theta` in `[0, π]` and `phi`
/// in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angles {
    pub theta: f64,
    pub phi: f64,
}

impl Angles {
    /// Folds arbitrary real angles into the canonical ranges without
    /// changing the direction they describe.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut theta = theta.rem_euclid(TAU);
        let mut phi = phi;
        if theta > PI {
            theta = TAU - theta;
            phi += PI;
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    /// Angles of a (not necessarily normalized) direction vector.
    pub fn from_direction(n: &Vec3) -> Self {
        let n = n.normalize();
        let theta = n.z.clamp(-1.0, 1.0).acos();
        let phi = if n.x == 0.0 && n.y == 0.0 {
            0.0
        } else {
            n.y.atan2(n.x)
        };
        Self::new(theta, phi)
    }

    pub fn direction(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }
}

/// Right-handed orthonormal frame `(nx, ny, n)` attached to a site, with `n`
/// the alignment direction and `nx`, `ny` the rotated transverse axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triad {
    pub n: Vec3,
    pub nx: Vec3,
    pub ny: Vec3,
}

impl Triad {
    /// Completes a bare direction into a triad using the canonical angles
    /// `θ = arccos(n_z)`, `φ = atan2(n_y, n_x)`.
    pub fn from_direction(n: &Vec3) -> Self {
        triad_from_angles(Angles::from_direction(n))
    }

    /// Triad rotated by `psi` about its own alignment axis.
    pub fn rotated(&self, psi: f64) -> Self {
        let (s, c) = psi.sin_cos();
        Self {
            n: self.n,
            nx: self.nx * c + self.ny * s,
            ny: self.ny * c - self.nx * s,
        }
    }

    pub fn angles(&self) -> Angles {
        Angles::from_direction(&self.n)
    }
}

pub fn triad_from_angles(a: Angles) -> Triad {
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    Triad {
        n: Vec3::new(st * cp, st * sp, ct),
        nx: Vec3::new(ct * cp, ct * sp, -st),
        ny: Vec3::new(-sp, cp, 0.0),
    }
}

/// Angle between two directions, accurate near 0 and π.
pub fn angular_distance(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Componentwise product `(n_x m_x, n_y m_y, n_z m_z)`.
pub fn hadamard(n: &Vec3, m: &Vec3) -> Vec3 {
    n.component_mul(m)
}

/// The pair of vectors `U`, `V` whose orthogonality to an exchange vector
/// `(J_x, J_y, J_z)` is equivalent to the pairwise factorization conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UvPair {
    pub u: Vec3,
    pub v: Vec3,
    /// `true` when `V` vanishes (to `DEPENDENCE_EPS`), in which case the
    /// compatible couplings form a plane rather than a line.
    pub dependent: bool,
}

pub fn uv_vectors(ti: &Triad, tj: &Triad) -> UvPair {
    let u = hadamard(&ti.nx, &tj.nx) - hadamard(&ti.ny, &tj.ny);
    let v = hadamard(&ti.nx, &tj.ny) + hadamard(&ti.ny, &tj.nx);
    let dependent = v.norm() < DEPENDENCE_EPS * u.norm().max(1.0);
    UvPair { u, v, dependent }
}

/// The two transverse-frame combinations that must vanish for the bond
/// `(i, j)` with coupling matrix `J` (acting as `n_i · J n_j`).
pub fn condition_components(j: &Mat3, ti: &Triad, tj: &Triad) -> (f64, f64) {
    let xx = ti.nx.dot(&(j * tj.nx));
    let yy = ti.ny.dot(&(j * tj.ny));
    let xy = ti.nx.dot(&(j * tj.ny));
    let yx = ti.ny.dot(&(j * tj.nx));
    (xx - yy, xy + yx)
}

/// Maximum violation of the field-independent pair conditions; zero iff
/// the coupling cannot connect the product state with two-spin excitations.
pub fn condition_residual(j: &Mat3, ti: &Triad, tj: &Triad) -> f64 {
    let (a, b) = condition_components(j, ti, tj);
    a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_vec(a: &Vec3, b: &Vec3, tol: f64) {
        assert!((a - b).amax() < tol, "{a:?} != {b:?}");
    }

    #[test]
    fn north_pole_and_equator() {
        let t = triad_from_angles(Angles::new(0.0, 0.0));
        assert_vec(&t.n, &Vec3::z(), 1e-15);
        assert_vec(&t.nx, &Vec3::x(), 1e-15);
        assert_vec(&t.ny, &Vec3::y(), 1e-15);

        let t = triad_from_angles(Angles::new(PI / 2.0, 0.0));
        assert_vec(&t.n, &Vec3::x(), 1e-15);
        assert_vec(&t.nx, &-Vec3::z(), 1e-15);
        assert_vec(&t.ny, &Vec3::y(), 1e-15);
    }

    #[test]
    fn generic_direction() {
        let t = triad_from_angles(Angles::new(PI / 3.0, PI / 5.0));
        assert_vec(&t.n, &Vec3::new(0.70063, 0.50904, 0.5), 1e-5);
    }

    #[test]
    fn angles_fold_into_range() {
        let a = Angles::new(-PI / 3.0, 0.2);
        assert!(a.theta >= 0.0 && a.theta <= PI);
        assert!(a.phi >= 0.0 && a.phi < TAU);
        let expected = Vec3::new(
            (-PI / 3.0).sin() * 0.2f64.cos(),
            (-PI / 3.0).sin() * 0.2f64.sin(),
            (-PI / 3.0).cos(),
        );
        assert_vec(&a.direction(), &expected, 1e-14);

        let b = Angles::new(7.0 * PI / 2.0, -11.0);
        assert!(b.theta <= PI && b.phi < TAU && b.phi >= 0.0);
    }

    #[test]
    fn hadamard_examples() {
        let z = Vec3::zeros();
        assert_eq!(hadamard(&Vec3::new(1.0, 2.0, 3.0), &z), z);
        let m = Vec3::new(0.3, -2.0, 7.5);
        assert_eq!(hadamard(&Vec3::repeat(1.0), &m), m);
        assert_eq!(
            hadamard(&Vec3::new(1.0, 0.0, -1.0), &Vec3::new(2.0, 5.0, 3.0)),
            Vec3::new(2.0, 0.0, -3.0)
        );
    }

    #[test]
    fn uv_for_parallel_z_spins() {
        let t = triad_from_angles(Angles::new(0.0, 0.0));
        let uv = uv_vectors(&t, &t);
        assert_vec(&uv.u, &Vec3::new(1.0, -1.0, 0.0), 1e-15);
        assert_vec(&uv.v, &Vec3::zeros(), 1e-15);
        assert!(uv.dependent);
    }

    #[test]
    fn uv_generic_pair_is_independent() {
        let ti = triad_from_angles(Angles::new(PI / 3.0, PI / 5.0));
        let tj = triad_from_angles(Angles::new(PI / 4.0, 1.1));
        let uv = uv_vectors(&ti, &tj);
        assert!(!uv.dependent);
        let line = uv.u.cross(&uv.v);
        let jm = Mat3::from_diagonal(&line);
        assert!(condition_residual(&jm, &ti, &tj) < 1e-14);
    }

    #[test]
    fn uv_reflection_across_xz_is_dependent() {
        let ti = triad_from_angles(Angles::new(0.9, 0.7));
        let n = ti.n;
        let tj = Triad::from_direction(&Vec3::new(n.x, -n.y, n.z));
        assert!(uv_vectors(&ti, &tj).dependent);
    }

    #[test]
    fn residual_examples() {
        let t = triad_from_angles(Angles::new(1.2, 4.0));
        assert_abs_diff_eq!(
            condition_residual(&Mat3::identity(), &t, &t),
            0.0,
            epsilon = 1e-15
        );

        let t = triad_from_angles(Angles::new(PI / 4.0, PI / 4.0));
        let j = Mat3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0));
        // |nx_x^2 - ny_x^2| = 1/4, |2 nx_x ny_x| = 1/sqrt(2)
        assert_abs_diff_eq!(
            condition_residual(&j, &t, &t),
            0.5f64.sqrt(),
            epsilon = 1e-14
        );
    }

    fn angles() -> impl Strategy<Value = Angles> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(t, p)| Angles::new(t, p))
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-5.0..5.0f64).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    fn mat3() -> impl Strategy<Value = Mat3> {
        prop::array::uniform9(-2.0..2.0f64).prop_map(|a| Mat3::from_row_slice(&a))
    }

    proptest! {
        #[test]
        fn triads_are_orthonormal_and_right_handed(a in angles()) {
            let t = triad_from_angles(a);
            for v in [t.n, t.nx, t.ny] {
                prop_assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            prop_assert!(t.n.dot(&t.nx).abs() < 1e-14);
            prop_assert!(t.n.dot(&t.ny).abs() < 1e-14);
            prop_assert!(t.nx.dot(&t.ny).abs() < 1e-14);
            prop_assert!((t.nx.cross(&t.ny) - t.n).amax() < 1e-14);
        }

        #[test]
        fn hadamard_commutative_and_bilinear(a in vec3(), b in vec3(), c in vec3(), s in -3.0..3.0f64) {
            prop_assert_eq!(hadamard(&a, &b), hadamard(&b, &a));
            let lhs = hadamard(&(a * s + c), &b);
            let rhs = hadamard(&a, &b) * s + hadamard(&c, &b);
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn residual_transpose_symmetry(j in mat3(), a in angles(), b in angles()) {
            let (ti, tj) = (triad_from_angles(a), triad_from_angles(b));
            let r1 = condition_residual(&j, &ti, &tj);
            let r2 = condition_residual(&j.transpose(), &tj, &ti);
            prop_assert!((r1 - r2).abs() < 1e-13);
            let u1 = uv_vectors(&ti, &tj).u;
            let u2 = uv_vectors(&tj, &ti).u;
            prop_assert!((u1 - u2).amax() < 1e-15);
        }

        #[test]
        fn residual_invariant_under_frame_rotation(a in angles(), b in angles(), psi in 0.0..6.3f64, chi in 0.0..6.3f64) {
            let (ti, tj) = (triad_from_angles(a), triad_from_angles(b));
            let uv = uv_vectors(&ti, &tj);
            prop_assume!(!uv.dependent);
            let jm = Mat3::from_diagonal(&uv.u.cross(&uv.v));
            prop_assert!(condition_residual(&jm, &ti, &tj) < 1e-12);
            prop_assert!(condition_residual(&jm, &ti.rotated(psi), &tj.rotated(chi)) < 1e-12);
        }
    }
}
