//! Normalized pairwise features for SPH-form reduced models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sph::grid::min_image;
use crate::sph::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    /// Length scale (e.g. mean inter-particle distance).
    pub d: f64,
    pub v_rms: f64,
    pub rho_rms: f64,
}

/// Five scalar features and two vector bases of a particle pair:
/// `I = [rho_i, rho_j, |x_ij|, |v_ij|, x_ij . v_ij]` (normalized), `b1 = x_ij`,
/// `b2 = v_ij`, with `x_ij = (x_i - x_j)/d` and `v_ij = (v_i - v_j)/v_rms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub invariants: [f64; 5],
    pub b1: Vec3,
    pub b2: Vec3,
}

pub struct PairInput {
    pub x: Vec3,
    pub v: Vec3,
    pub rho: f64,
}

/// Features of the pair (i, j). `box_l` applies the minimum-image
/// convention to the separation in the first `dims` coordinates.
pub fn lles_pair_features(
    i: &PairInput,
    j: &PairInput,
    norms: &Normalizers,
    box_l: Option<f64>,
    dims: usize,
) -> Result<PairFeatures> {
    for (name, v) in [("d", norms.d), ("v_rms", norms.v_rms), ("rho_rms", norms.rho_rms)] {
        if !(v > 0.0) {
            return Err(Error::Argument(format!("normalizer {name} must be > 0, got {v}")));
        }
    }
    let raw = match box_l {
        Some(l) => min_image(i.x, j.x, l, dims),
        None => {
            let mut d = [0.0; 3];
            for k in 0..dims {
                d[k] = i.x[k] - j.x[k];
            }
            d
        }
    };
    let mut b1 = [0.0; 3];
    let mut b2 = [0.0; 3];
    for k in 0..dims {
        b1[k] = raw[k] / norms.d;
        b2[k] = (i.v[k] - j.v[k]) / norms.v_rms;
    }
    let dot = |a: &Vec3, b: &Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    Ok(PairFeatures {
        invariants: [
            i.rho / norms.rho_rms,
            j.rho / norms.rho_rms,
            dot(&b1, &b1).sqrt(),
            dot(&b2, &b2).sqrt(),
            dot(&b1, &b2),
        ],
        b1,
        b2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Normalizers = Normalizers {
        d: 1.0,
        v_rms: 1.0,
        rho_rms: 1.0,
    };

    #[test]
    fn clone_pair_is_zero() {
        let p = PairInput {
            x: [0.1, 0.2, 0.3],
            v: [1.0, -1.0, 0.5],
            rho: 1.2,
        };
        let f = lles_pair_features(&p, &p, &UNIT, None, 3).unwrap();
        assert_eq!(&f.invariants[2..], &[0.0, 0.0, 0.0]);
        assert_eq!(f.b1, [0.0; 3]);
        assert_eq!(f.b2, [0.0; 3]);
    }

    #[test]
    fn hand_pair() {
        let a = PairInput {
            x: [1.0, 2.0, 2.0],
            v: [0.0, 3.0, 4.0],
            rho: 2.0,
        };
        let b = PairInput {
            x: [0.0, 0.0, 0.0],
            v: [0.0, 0.0, 0.0],
            rho: 0.5,
        };
        let f = lles_pair_features(&a, &b, &UNIT, None, 3).unwrap();
        assert_eq!(f.invariants, [2.0, 0.5, 3.0, 5.0, 14.0]);
        let g = lles_pair_features(
            &a,
            &b,
            &Normalizers {
                d: 2.0,
                v_rms: 0.5,
                rho_rms: 4.0,
            },
            None,
            3,
        )
        .unwrap();
        assert_eq!(g.invariants, [0.5, 0.125, 1.5, 10.0, 14.0]);
    }

    #[test]
    fn perpendicular_and_periodic() {
        let a = PairInput {
            x: [0.95, 0.5, 0.0],
            v: [0.0, 1.0, 0.0],
            rho: 1.0,
        };
        let b = PairInput {
            x: [0.05, 0.5, 0.0],
            v: [0.0, 0.0, 0.0],
            rho: 1.0,
        };
        let f = lles_pair_features(&a, &b, &UNIT, Some(1.0), 2).unwrap();
        assert_eq!(f.invariants[4], 0.0);
        assert!((f.b1[0] + 0.1).abs() < 1e-12);
        let bad = Normalizers { d: 0.0, ..UNIT };
        assert!(lles_pair_features(&a, &b, &bad, None, 2).is_err());
    }
}
