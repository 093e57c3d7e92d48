//! Integrity basis of a velocity gradient: invariants, the ten tensor
//! bases, their behaviour under rotation, and the pairwise features used by
//! particle closures.

use lgdf::rng;
use lgdf::vgt::{
    basis_expansion, invariants, lles_pair_features, random_matrix, random_rotation, split_sym_skew, tensor_bases,
    Normalizers, PairInput,
};

fn main() -> lgdf::Result<()> {
    let mut r = rng::stream(3, 0);
    let m = random_matrix(&mut r, 1.0);
    let sp = split_sym_skew(&m);
    let rot = random_rotation(&mut r);
    println!("invariants:          {:?}", invariants(&sp).0);
    println!("rotated invariants:  {:?}", invariants(&sp.rotated(&rot)).0);

    let bases = tensor_bases(&sp);
    let rotated = tensor_bases(&sp.rotated(&rot));
    for (k, (b, br)) in bases.iter().zip(&rotated).enumerate() {
        println!("T{:<2} |R T R^T - T(R)| = {:.1e}", k + 1, (rot * b * rot.transpose() - br).amax());
    }
    let coeffs = [1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    println!("T1 + T3/2 =\n{}", basis_expansion(&coeffs, &bases));

    let a = PairInput { x: [0.1, 0.2, 0.0], v: [1.0, 0.0, 0.0], rho: 1.01 };
    let b = PairInput { x: [0.95, 0.25, 0.0], v: [0.0, 0.5, 0.0], rho: 0.99 };
    let f = lles_pair_features(&a, &b, &Normalizers { d: 0.05, v_rms: 1.0, rho_rms: 0.01 }, Some(1.0), 2)?;
    println!("pair features: {f:?}");
    Ok(())
}
