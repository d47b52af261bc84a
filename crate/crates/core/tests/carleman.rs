use degen_core::carleman::{
    check_inequality, constant_table, default_s_grid, eval_weights, find_s0, growth_exponents, p_residual,
    transform, CarlemanWeights, Inequality,
};
use degen_core::discretize::{assemble, build_mesh, Mesh, OperatorPair};
use degen_core::evolution::{solve_with, Direction, Source, SpaceTimeField, TimeGrid, TimeSolver};
use degen_core::geometry::{make_domain, DomainKind};
use degen_core::rng::{random_admissible, UniformStream};
use degen_core::spectral::compute_spectrum;
use degen_core::Error;

const ALPHA: f64 = 0.5;
const DELTA: f64 = 0.1;

fn truncated(n: usize) -> (Mesh, OperatorPair) {
    let d = make_domain(DomainKind::Interval, ALPHA).unwrap();
    let mesh = build_mesh(d, n, 1.0).unwrap().submesh(DELTA).unwrap();
    let ops = assemble(&mesh, ALPHA).unwrap();
    (mesh, ops)
}

/// `y = sin(k(x−δ)) cos t` with `f = ∂_t y + (x^α y′)′`.
fn manufactured(mesh: &Mesh, steps: usize) -> (SpaceTimeField, Source) {
    let k = std::f64::consts::PI / (1.0 - DELTA);
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let y = |t: f64, x: f64| (k * (x - DELTA)).sin() * t.cos();
    let f = |t: f64, x: f64| {
        let (s, c) = (k * (x - DELTA)).sin_cos();
        -s * t.sin() + (ALPHA * x.powf(ALPHA - 1.0) * k * c - x.powf(ALPHA) * k * k * s) * t.cos()
    };
    let values = (0..=steps).map(|j| mesh.interpolate(|p| y(grid.time(j), p[0]))).collect();
    let src = Source::Nodal((0..=steps).map(|j| mesh.interpolate(|p| f(grid.time(j), p[0]))).collect());
    (SpaceTimeField::from_parts(grid, values, None, src.clone(), Direction::Backward).unwrap(), src)
}

fn backward(ops: &OperatorPair, y0: &[f64], steps: usize) -> SpaceTimeField {
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let solver = TimeSolver::Spectral { modes: usize::MAX };
    solve_with(solver, ops, y0, &Source::Zero, &grid).unwrap().time_reversed()
}

#[test]
fn weights_closed_forms() {
    let w = CarlemanWeights::new(ALPHA, 1.0, 3.0).unwrap();
    let v = eval_weights(&w, 0.25, &[0.3, 0.64]).unwrap();
    let theta = (0.25f64 * 0.75).powi(-4);
    assert!((v.theta - theta).abs() < 1e-9 * theta);
    // η(0.64) = 0.64^{1.5} = 0.512
    assert!((v.xi - theta * (2.0 - 0.512)).abs() < 1e-9 * v.xi);
    // ∇ξ = −1.5 Θ √0.64
    assert!((v.grad_xi[1] + 1.5 * theta * 0.8).abs() < 1e-9 * theta);
    assert_eq!(v.grad_xi[0], 0.0);
    assert!((v.decay - (-3.0 * v.xi).exp()).abs() <= 1e-300);
    for t in [0.1, 0.5, 0.9] {
        for x in [0.0, 0.5, 1.0] {
            assert!(eval_weights(&w, t, &[x]).unwrap().xi >= w.theta(t) - 1e-9);
        }
    }
}

#[test]
fn growth_exponents_are_bounded() {
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    for steps in [256, 1024] {
        let fit = growth_exponents(&w, &TimeGrid::new(1.0, steps).unwrap()).unwrap();
        assert!(fit.first <= 1.30 && fit.first > 1.1, "{fit:?}");
        assert!(fit.second <= 1.55 && fit.second > 1.3, "{fit:?}");
        assert!(fit.first_constant.is_finite() && fit.second_constant.is_finite());
    }
}

#[test]
fn transform_vanishes_at_endpoints() {
    let (mesh, _) = truncated(80);
    let (field, _) = manufactured(&mesh, 64);
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    let z = transform(&field, &w, &mesh).unwrap();
    assert!(z.values[0].iter().chain(&z.values[64]).all(|&v| v == 0.0));
    let j = 32;
    let k = mesh.num_nodes() - 3;
    let x = mesh.coords(k);
    let exact = eval_weights(&w, 0.5, &x).unwrap().decay * field.at(j)[k];
    let got = z.log_scale.exp() * z.values[j][k];
    assert!((got - exact).abs() <= 1e-12 * exact.abs());

    let zero = SpaceTimeField::from_parts(
        *field.grid(),
        vec![vec![0.0; mesh.num_nodes()]; 65],
        None,
        Source::Zero,
        Direction::Backward,
    )
    .unwrap();
    assert!(transform(&zero, &w, &mesh).unwrap().values.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn full_domain_is_rejected() {
    let d = make_domain(DomainKind::Interval, ALPHA).unwrap();
    let mesh = build_mesh(d, 32, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let field =
        SpaceTimeField::from_parts(grid, vec![vec![0.0; 33]; 17], None, Source::Zero, Direction::Backward).unwrap();
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    assert!(matches!(transform(&field, &w, &mesh), Err(Error::ContractViolation(_))));
}

#[test]
fn residual_identity_converges() {
    for s in [1.0, 2.0] {
        let w = CarlemanWeights::new(ALPHA, 1.0, s).unwrap();
        let mut prev = f64::NAN;
        for level in 0..4 {
            let (mesh, ops) = truncated(160 << level);
            let (field, src) = manufactured(&mesh, 128 << level);
            let z = transform(&field, &w, &mesh).unwrap();
            let r = p_residual(&z, &src, &mesh, &ops).unwrap().relative();
            if level > 0 {
                let order = (prev / r).log2();
                assert!(order >= 1.0, "s = {s}, level {level}: order {order}");
            }
            prev = r;
        }
    }
}

#[test]
fn residual_of_zero_is_zero() {
    let (mesh, ops) = truncated(80);
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let field = SpaceTimeField::from_parts(
        grid,
        vec![vec![0.0; mesh.num_nodes()]; 33],
        None,
        Source::Zero,
        Direction::Backward,
    )
    .unwrap();
    let w = CarlemanWeights::new(ALPHA, 1.0, 5.0).unwrap();
    let z = transform(&field, &w, &mesh).unwrap();
    let r = p_residual(&z, &Source::Zero, &mesh, &ops).unwrap();
    assert_eq!((r.residual, r.source), (0.0, 0.0));
    let b = check_inequality(&field, &w, &mesh, &ops, Inequality::Energy, 1.0).unwrap();
    assert!(b.holds);
    assert_eq!(b.log_lhs(), f64::NEG_INFINITY);
}

#[test]
fn budget_is_deterministic_and_symmetric() {
    let (mesh, ops) = truncated(80);
    let (field, _) = manufactured(&mesh, 64);
    let w = CarlemanWeights::new(ALPHA, 1.0, 2.0).unwrap();
    let a = check_inequality(&field, &w, &mesh, &ops, Inequality::Energy, 1.0).unwrap();
    let b = check_inequality(&field, &w, &mesh, &ops, Inequality::Energy, 1.0).unwrap();
    assert_eq!(a, b);
    for term in [a.log_gradient, a.log_mass, a.log_weighted, a.log_source, a.log_boundary] {
        assert!(term.is_finite());
    }

    // a time-symmetric field against its mirror image
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let g = |t: f64| 1.0 + (t - 0.5) * (t - 0.5);
    let y0 = mesh.interpolate(|p| (std::f64::consts::PI * (p[0] - DELTA) / (1.0 - DELTA)).sin());
    let values: Vec<Vec<f64>> = (0..=64).map(|j| y0.iter().map(|v| v * g(grid.time(j))).collect()).collect();
    let mut mirrored = values.clone();
    mirrored.reverse();
    let sym = SpaceTimeField::from_parts(grid, values, None, Source::Zero, Direction::Backward).unwrap();
    let mir = SpaceTimeField::from_parts(grid, mirrored, None, Source::Zero, Direction::Backward).unwrap();
    let p = check_inequality(&sym, &w, &mesh, &ops, Inequality::Weighted, 1.0).unwrap();
    let q = check_inequality(&mir, &w, &mesh, &ops, Inequality::Weighted, 1.0).unwrap();
    for (x, y) in [(p.log_weighted, q.log_weighted), (p.log_gradient, q.log_gradient), (p.log_mass, q.log_mass)] {
        assert!((x - y).abs() < 1e-10, "{x} {y}");
    }
}

#[test]
fn endpoint_slices_do_not_contribute() {
    let (mesh, ops) = truncated(80);
    let (field, _) = manufactured(&mesh, 256);
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    let base = check_inequality(&field, &w, &mesh, &ops, Inequality::Energy, 1.0).unwrap();
    // a huge perturbation on the first interior slice is invisible
    let mut values = field.values().to_vec();
    for v in values[1].iter_mut() {
        *v *= 1e6;
    }
    let spiked = SpaceTimeField::from_parts(*field.grid(), values, None, field.source().clone(), Direction::Backward)
        .unwrap();
    let b = check_inequality(&spiked, &w, &mesh, &ops, Inequality::Energy, 1.0).unwrap();
    assert!((b.log_lhs() - base.log_lhs()).abs() < 1e-12);
}

#[test]
fn forward_fields_are_rejected() {
    let (mesh, ops) = truncated(80);
    let (field, _) = manufactured(&mesh, 32);
    let forward = field.time_reversed();
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    assert!(check_inequality(&forward, &w, &mesh, &ops, Inequality::Weighted, 1.0).is_err());
}

#[test]
fn s0_on_mode_and_random_suite() {
    let (mesh, ops) = truncated(160);
    let spectrum = compute_spectrum(&ops, 10).unwrap();
    let mut fields: Vec<SpaceTimeField> = (0..10).map(|m| backward(&ops, spectrum.vector(m), 256)).collect();
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    let grid = default_s_grid();
    for which in [Inequality::Energy, Inequality::Weighted] {
        let calibration = constant_table(&fields, &w, &mesh, &ops, &grid, which).unwrap().max();
        assert!(calibration > 0.0 && calibration.is_finite());
        let mut all = fields.clone();
        let mut stream = UniformStream::new(7);
        for _ in 0..5 {
            all.push(backward(&ops, &random_admissible(&ops, &mut stream), 256));
        }
        let est = find_s0(&all, &w, &mesh, &ops, &grid, which, calibration).unwrap();
        let s0 = est.s0.expect("no admissible s");
        assert!(s0 <= 200.0);
        let first = grid.iter().position(|&s| s == s0).unwrap();
        assert!(est.holds[first..].iter().all(|&h| h));
        // the required constant does not grow with s
        for field in 0..all.len() {
            let col: Vec<f64> = est.table.required.iter().map(|r| r[field]).collect();
            assert!(col[first..].windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-9)), "{col:?}");
        }
    }
    fields.truncate(1);
    let table = constant_table(&fields, &w, &mesh, &ops, &[1.0], Inequality::Energy).unwrap();
    let est = find_s0(&fields, &w, &mesh, &ops, &[1.0], Inequality::Energy, 0.5 * table.max()).unwrap();
    assert_eq!(est.s0, None);
    assert!(est.constant.is_nan());
}

#[test]
fn s0_edge_cases() {
    let (mesh, ops) = truncated(80);
    let w = CarlemanWeights::new(ALPHA, 1.0, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let zero = SpaceTimeField::from_parts(
        grid,
        vec![vec![0.0; mesh.num_nodes()]; 33],
        None,
        Source::Zero,
        Direction::Backward,
    )
    .unwrap();
    let s_grid = [1.0, 4.0, 16.0];
    let est = find_s0(&[zero], &w, &mesh, &ops, &s_grid, Inequality::Energy, 0.0).unwrap();
    assert_eq!(est.s0, Some(1.0));
    assert!(matches!(
        find_s0(&[], &w, &mesh, &ops, &s_grid, Inequality::Energy, 1.0),
        Err(Error::InvalidParameter { .. })
    ));
}
