//! Strain/vorticity split, the five invariants and ten tensor bases of the
//! local pressure-Hessian closure.

use nalgebra::Matrix3;

pub type Mat3 = Matrix3<f64>;

/// `m = s + w` with `s` symmetric (strain) and `w` skew (vorticity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymSkewSplit {
    pub s: Mat3,
    pub w: Mat3,
}

pub fn split_sym_skew(m: &Mat3) -> SymSkewSplit {
    let t = m.transpose();
    SymSkewSplit {
        s: (m + t) * 0.5,
        w: (m - t) * 0.5,
    }
}

impl SymSkewSplit {
    pub fn reconstruct(&self) -> Mat3 {
        self.s + self.w
    }

    pub fn rotated(&self, r: &Mat3) -> Self {
        let rt = r.transpose();
        Self {
            s: r * self.s * rt,
            w: r * self.w * rt,
        }
    }
}

/// `[tr s^2, tr w^2, tr s^3, tr w^2 s, tr w^2 s^2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantVec(pub [f64; 5]);

pub fn invariants(sp: &SymSkewSplit) -> InvariantVec {
    let (s, w) = (&sp.s, &sp.w);
    let s2 = s * s;
    let w2 = w * w;
    InvariantVec([
        s2.trace(),
        w2.trace(),
        (s2 * s).trace(),
        (w2 * s).trace(),
        (w2 * s2).trace(),
    ])
}

/// The ten bases, numbered from 1 in the usual notation (index 0 here is
/// `T1`). Each subtracted trace multiplies the identity.
pub fn tensor_bases(sp: &SymSkewSplit) -> [Mat3; 10] {
    let (s, w) = (sp.s, sp.w);
    let i = Mat3::identity();
    let s2 = s * s;
    let w2 = w * w;
    let sw = s * w;
    let ws = w * s;
    let ws2 = ws * ws;
    let sw2 = sw * sw;
    let wsw = w * s * w;
    let sws = s * w * s;
    [
        s,
        sw - ws,
        s2 - i * (s2.trace() / 3.0),
        w2 - i * (w2.trace() / 3.0),
        ws2 - s2 * w,
        w2 * s + sw2 - i * (2.0 / 3.0 * sw2.trace()),
        wsw * wsw - w2 * s * w,
        sws * sws - s2 * w * s,
        w2 * s2 + s2 * w2 - i * (2.0 / 3.0 * (s2 * w2).trace()),
        ws2 * w2 - w2 * s2 * w,
    ]
}

/// `sum_n g_n T_n`.
pub fn basis_expansion(coeffs: &[f64; 10], bases: &[Mat3; 10]) -> Mat3 {
    coeffs.iter().zip(bases).fold(Mat3::zeros(), |acc, (g, t)| acc + t * *g)
}

/// Uniformly distributed rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: rand::Rng + ?Sized>(rng: &mut R) -> Mat3 {
    use nalgebra::{Quaternion, UnitQuaternion};
    let q = Quaternion::new(
        crate::rng::normal(rng),
        crate::rng::normal(rng),
        crate::rng::normal(rng),
        crate::rng::normal(rng),
    );
    *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix()
}

pub fn random_matrix<R: rand::Rng + ?Sized>(rng: &mut R, scale: f64) -> Mat3 {
    Mat3::from_fn(|_, _| scale * crate::rng::normal(rng))
}

/// Remove the trace: `m - I tr(m) / 3`.
pub fn traceless(m: &Mat3) -> Mat3 {
    m - Mat3::identity() * (m.trace() / 3.0)
}

/// `Q = -tr(M^2) / 2`, `R = -det M`.
pub fn q_r(m: &Mat3) -> (f64, f64) {
    (-0.5 * (m * m).trace(), -m.determinant())
}

pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn rel(a: &Mat3, b: &Mat3) -> f64 {
        max_abs(&(a - b)) / max_abs(b).max(1.0)
    }

    proptest! {
        #[test]
        fn invariants_ignore_rotation(seed in any::<u64>(), scale in 0.1f64..3.0) {
            let mut r = rng::stream(seed, 0);
            let sp = split_sym_skew(&traceless(&random_matrix(&mut r, scale)));
            let q = random_rotation(&mut r);
            let (a, b) = (invariants(&sp).0, invariants(&sp.rotated(&q)).0);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(scale.powi(4)).max(1.0));
            }
        }

        #[test]
        fn bases_rotate_with_the_gradient(seed in any::<u64>(), scale in 0.1f64..3.0) {
            let mut r = rng::stream(seed, 1);
            let sp = split_sym_skew(&traceless(&random_matrix(&mut r, scale)));
            let q = random_rotation(&mut r);
            let rotated = tensor_bases(&sp.rotated(&q));
            for (t, tr) in tensor_bases(&sp).iter().zip(&rotated) {
                prop_assert!(rel(tr, &(q * t * q.transpose())) < 1e-11);
            }
        }

        #[test]
        fn quadratic_bases_are_symmetric_and_deviatoric(seed in any::<u64>(), scale in 0.1f64..3.0) {
            let mut r = rng::stream(seed, 2);
            let sp = split_sym_skew(&random_matrix(&mut r, scale));
            let t = tensor_bases(&sp);
            for b in [t[0], t[1], t[2], t[3]] {
                prop_assert!(max_abs(&(b - b.transpose())) <= 1e-14 * max_abs(&b).max(1.0));
            }
            for b in [t[2], t[3]] {
                prop_assert!(b.trace().abs() <= 1e-14 * scale * scale);
            }
        }

        #[test]
        fn split_reconstructs(seed in any::<u64>()) {
            let mut r = rng::stream(seed, 3);
            let m = random_matrix(&mut r, 1.0);
            prop_assert!(max_abs(&(split_sym_skew(&m).reconstruct() - m)) < 1e-15);
        }
    }
}
