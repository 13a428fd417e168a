//! Structural properties of the default synthetic field's Tucker
//! decomposition.

use latentscope_core::fieldgen::{generate_field, FieldConfig};
use latentscope_core::tucker::{tucker_hooi, zero_crossings, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[test]
fn higher_latitude_modes_oscillate_faster() {
    let field = generate_field(&FieldConfig::desk_default(0)).unwrap();
    let d = tucker_hooi(&field, [8, 8, 8], DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
    let lat = &d.factors[1];
    let low = zero_crossings(&lat.col(1));
    let high = zero_crossings(&lat.col(5));
    assert!(
        high >= low,
        "latitude mode 5 has {high} zero crossings, mode 1 has {low}"
    );
}

#[test]
fn nested_rank_errors_are_nonincreasing() {
    let field = generate_field(&FieldConfig::desk_default(0)).unwrap();
    let mut prev = f64::INFINITY;
    for r in [2usize, 4, 8, 12] {
        let d = tucker_hooi(&field, [r, r, r], DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        assert!(
            d.rel_error <= prev + 1e-9,
            "rel_error rose from {prev} to {} at r={r}",
            d.rel_error
        );
        prev = d.rel_error;
    }
}
