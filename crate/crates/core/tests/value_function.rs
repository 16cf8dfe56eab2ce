use optpair_core::value::linspace;
use optpair_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn policy() -> ThresholdPolicy {
    solve_policy(&ModelParams::default(), &SolverConfig::default()).unwrap()
}

#[test]
fn stop_loss_boundary_values() {
    let pv = PiecewiseValue::new(&policy()).unwrap();
    let p = *pv.params();
    let (v0, v1) = pv.eval_both(p.m).unwrap();
    assert!(v0.abs() <= 1e-8, "v0(M) = {v0}");
    assert!((v1 - (p.m - p.k)).abs() <= 1e-8, "v1(M) = {v1}");
    assert!(pv.eval(Position::Flat, p.m - 1e-9).is_err());
}

#[test]
fn piece_identities() {
    let pol = policy();
    let pv = PiecewiseValue::new(&pol).unwrap();
    let k = pol.params.k;
    for x in linspace(pol.x0, pol.x1, 41).into_iter().take(40) {
        let (v0, v1) = pv.eval_both(x).unwrap();
        assert!((v1 - v0 - (x + k)).abs() < 1e-14, "x = {x}");
    }
    for x in linspace(pol.x2, pol.x2 + 1.5, 40) {
        let (v0, v1) = pv.eval_both(x).unwrap();
        assert!((v1 - v0 - (x - k)).abs() < 1e-14, "x = {x}");
    }
}

#[test]
fn pde_part_in_each_region() {
    let pol = policy();
    let pv = PiecewiseValue::new(&pol).unwrap();
    let p = pol.params;
    for x in linspace(p.m, pol.x0, 22).into_iter().skip(1).take(20) {
        let r = pv.hjb_residual(Position::Flat, x, None).unwrap();
        assert!(r.pde.abs() <= 1e-8 * (1.0 + x.abs()), "x = {x}: {}", r.pde);
    }
    for x in linspace(p.m, pol.x2, 22).into_iter().skip(1).take(20) {
        let r = pv.hjb_residual(Position::Long, x, None).unwrap();
        assert!(r.pde.abs() <= 1e-8 * (1.0 + x.abs()), "x = {x}: {}", r.pde);
    }
    for x in linspace(pol.x0, pol.x1, 12).into_iter().skip(1).take(10) {
        let r = pv.hjb_residual(Position::Flat, x, None).unwrap();
        let want = -(p.rho + p.a) * x - p.rho * p.k + p.a * p.b;
        assert!((r.pde - want).abs() <= 1e-8, "x = {x}");
        assert!(r.pde >= 0.0);
    }
    let lower = p.sell_bound();
    for x in linspace(pol.x2, pol.x2 + 2.0, 30).into_iter().skip(1) {
        let r = pv.hjb_residual(Position::Long, x, None).unwrap();
        assert_eq!(r.pde >= -1e-12, x >= lower, "x = {x}");
    }
}

#[test]
fn hjb_needs_side_at_boundaries() {
    let pol = policy();
    let pv = PiecewiseValue::new(&pol).unwrap();
    for x in [pol.x0, pol.x1] {
        assert!(pv.hjb_residual(Position::Flat, x, None).is_err());
        let l = pv.hjb_residual(Position::Flat, x, Some(Side::Left)).unwrap();
        let r = pv.hjb_residual(Position::Flat, x, Some(Side::Right)).unwrap();
        assert!(l.min() >= -1e-8 && r.min() >= -1e-8);
    }
    assert!(pv.hjb_residual(Position::Long, pol.x2, None).is_err());
    assert!(pv.hjb_residual(Position::Long, pol.params.m, Some(Side::Right)).is_err());
}

#[test]
fn hjb_bounds_and_switching_on_random_points() {
    let pol = policy();
    let pv = PiecewiseValue::new(&pol).unwrap();
    let p = pol.params;
    let c0 = p.value_bound();
    let hi = pol.x2 + 5.0 * p.stationary_sd();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let x = rng.gen_range(p.m..hi);
        if x == p.m {
            continue;
        }
        for pos in [Position::Flat, Position::Long] {
            let r = pv.hjb_residual(pos, x, Some(Side::Right)).unwrap();
            assert!(r.min() >= -1e-8, "{pos:?} at {x}: {r:?}");
        }
        let (v0, v1) = pv.eval_both(x).unwrap();
        assert!((-1e-10..=c0).contains(&v0), "v0({x}) = {v0}");
        assert!(v1 >= x - p.k - 1e-10 && v1 <= x + p.k + c0, "v1({x}) = {v1}");
        assert!(v0 >= v1 - x - p.k - 1e-10);
        assert!(v1 >= v0 + x - p.k - 1e-10);
    }
}

#[test]
fn v0_stays_bounded_far_right() {
    let pol = policy();
    let pv = PiecewiseValue::new(&pol).unwrap();
    let x = pol.x2 + 10.0 * pol.params.stationary_sd();
    let v0 = pv.eval(Position::Flat, x).unwrap();
    assert!(v0 >= 0.0 && v0 <= pol.params.value_bound());
}

#[test]
fn curve_dump_has_one_record_per_point() {
    let pol = policy();
    let pv = PiecewiseValue::new(&pol).unwrap();
    let xs = linspace(pol.params.m, 0.3, 9);
    let c = pv.curve(&xs).unwrap();
    assert_eq!(c.len(), 9);
    assert_eq!(c[0].x, pol.params.m);
    assert!(c.windows(2).all(|w| w[0].v1 <= w[1].v1));
}
