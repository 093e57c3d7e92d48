//! Cubic-spline (M4) smoothing kernel with support radius `2h`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalization `sigma_d` such that `W(r, h) = sigma_d / h^d * f(r / h)`
/// integrates to one in `d` dimensions.
pub fn sigma(dims: usize) -> f64 {
    match dims {
        1 => 2.0 / 3.0,
        2 => 10.0 / (7.0 * PI),
        3 => 1.0 / PI,
        _ => panic!("kernel defined for 1 to 3 dimensions, got {dims}"),
    }
}

#[inline]
fn shape(q: f64) -> f64 {
    if q < 1.0 {
        1.0 - 1.5 * q * q + 0.75 * q * q * q
    } else if q < 2.0 {
        let u = 2.0 - q;
        0.25 * u * u * u
    } else {
        0.0
    }
}

#[inline]
fn shape_deriv(q: f64) -> f64 {
    if q < 1.0 {
        -3.0 * q + 2.25 * q * q
    } else if q < 2.0 {
        let u = 2.0 - q;
        -0.75 * u * u
    } else {
        0.0
    }
}

fn check(h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("smoothing length must be > 0, got {h}")));
    }
    Ok(())
}

/// Precomputed kernel for fixed `h` and dimension; the hot loops use this.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    pub h: f64,
    pub dims: usize,
    norm: f64,
    inv_h: f64,
}

impl Kernel {
    pub fn new(h: f64, dims: usize) -> Result<Self> {
        check(h)?;
        if !(1..=3).contains(&dims) {
            return Err(Error::Argument(format!("dims must be 1, 2 or 3, got {dims}")));
        }
        // explicit product: `powi` may be folded differently at compile time
        let vol = (0..dims).fold(1.0, |acc, _| acc * h);
        Ok(Self {
            h,
            dims,
            norm: sigma(dims) / vol,
            inv_h: 1.0 / h,
        })
    }

    pub fn support(&self) -> f64 {
        2.0 * self.h
    }

    #[inline]
    pub fn w(&self, r: f64) -> f64 {
        self.norm * shape(r * self.inv_h)
    }

    /// `dW/dr`.
    #[inline]
    pub fn dw(&self, r: f64) -> f64 {
        self.norm * self.inv_h * shape_deriv(r * self.inv_h)
    }

    /// `grad_i W(|r_i - r_j|)` for `rij = r_i - r_j` at distance `r`.
    #[inline]
    pub fn grad_with(&self, rij: [f64; 3], r: f64) -> [f64; 3] {
        if r == 0.0 {
            return [0.0; 3];
        }
        let f = self.dw(r) / r;
        [f * rij[0], f * rij[1], f * rij[2]]
    }

    pub fn grad(&self, rij: [f64; 3]) -> [f64; 3] {
        let r = (rij[0] * rij[0] + rij[1] * rij[1] + rij[2] * rij[2]).sqrt();
        self.grad_with(rij, r)
    }
}

/// `W(r, h)` in `dims` dimensions.
pub fn kernel_w(r: f64, h: f64, dims: usize) -> Result<f64> {
    Ok(Kernel::new(h, dims)?.w(r))
}

/// Gradient of `W` with respect to `r_i`, where `rij = r_i - r_j`.
pub fn kernel_grad(rij: [f64; 3], h: f64, dims: usize) -> Result<[f64; 3]> {
    Ok(Kernel::new(h, dims)?.grad(rij))
}
