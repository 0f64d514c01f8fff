//! Values pinned from an independent floating-point evaluation.

use approx::assert_relative_eq;

use cpcomp::bounds::{
    cp_finite_bound, cp_unique_bound, figure1_table, matrix_bound_l, sampling_probability_bound, unfolding_bound,
    Variant,
};

const N: f64 = 1000.0;
const EPS: f64 = 0.001;

#[test]
fn matrix_threshold() {
    assert_relative_eq!(matrix_bound_l(N, 10.0, EPS).unwrap(), 177.786_126_695_571_28, max_relative = 1e-12);
}

#[test]
fn unfolding_total() {
    let b = unfolding_bound(N, 7, 50.0, EPS, 3).unwrap();
    assert_relative_eq!(b.total_samples, 390_516_529_456_280.3, max_relative = 1e-12);
}

#[test]
fn cp_totals() {
    let f = cp_finite_bound(N, 7, 50.0, EPS).unwrap();
    assert_relative_eq!(f.per_column_l, 509.120_055_461_674_3, max_relative = 1e-12);
    assert_relative_eq!(f.total_samples, 509_120_055.461_674_33, max_relative = 1e-12);
    let u = cp_unique_bound(N, 7, 50.0, EPS).unwrap();
    assert_relative_eq!(u.per_column_l, 540.311_678_586_871_8, max_relative = 1e-12);
    assert_relative_eq!(u.total_samples, 540_311_678.586_871_9, max_relative = 1e-12);
}

#[test]
fn sampling_thresholds() {
    let f = sampling_probability_bound(N, 7, 50.0, EPS, Variant::Finite).unwrap();
    assert_relative_eq!(f.p_bound, 1.778_279_415_130_123_3e-4, max_relative = 1e-12);
    assert_relative_eq!(f.success_probability, 0.999, max_relative = 1e-12);
    let u = sampling_probability_bound(N, 7, 50.0, EPS, Variant::Unique).unwrap();
    assert_relative_eq!(u.p_bound, 1.778_279_415_442_039_6e-4, max_relative = 1e-12);
}

#[test]
fn figure_curve_endpoints() {
    let rows = figure1_table(N, 7, 1, 150, EPS).unwrap();
    assert_relative_eq!(rows[0].unfolding_total, 343_572_253_391_142.56, max_relative = 1e-12);
    assert_relative_eq!(rows[0].cp_total, 473_911_848.412_821_05, max_relative = 1e-12);
    assert_relative_eq!(rows[149].unfolding_total, 403_699_876_920_297.56, max_relative = 1e-12);
    assert_relative_eq!(rows[149].cp_total, 9e8, max_relative = 1e-12);
}
