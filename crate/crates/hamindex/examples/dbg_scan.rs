use hamindex::index::homotopy_nullity_sum;
use hamindex::operator::{build_operator, BoundaryCondition, Order};
use hamindex::path::{dominating_scalar, lift_diag_identity, MatrixPath};
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn main() {
    let op = build_operator(BoundaryCondition::bolza(0.0, PI).unwrap(), Order::First, 2, 1024).unwrap();
    let b = DMatrix::from_row_slice(2, 2, &[58.4112984109762, 15.104683489299571, 15.104683489299571, 15.417968719506906]);
    let bf = lift_diag_identity(&MatrixPath::constant(b).unwrap());
    let anchor = lift_diag_identity(&MatrixPath::zero(2));
    let k = dominating_scalar(&anchor, &bf);
    println!("k = {k}");
    let ki = MatrixPath::scalar(4, k);
    let (s1, t1) = homotopy_nullity_sum(&op, &anchor, &ki).unwrap();
    let (s2, t2) = homotopy_nullity_sum(&op, &bf, &ki).unwrap();
    println!("s1 = {s1} ({} crossings), s2 = {s2} ({} crossings), i_f = {}", t1.crossings.len(), t2.crossings.len(), s1 - s2);
    for c in &t1.crossings { println!("  s1: l = {:.12} nu = {}", c.lambda, c.nullity); }
    for c in &t2.crossings { println!("  s2: l = {:.12} nu = {}", c.lambda, c.nullity); }
}
