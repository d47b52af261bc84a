mod common;

use common::interval;
use degen_core::discretize::{assemble, build_mesh};
use degen_core::evolution::{energy_history, Source, TimeGrid, TimeSolver};
use degen_core::geometry::{make_domain, DomainKind};
use degen_core::shape_design::{
    delta_sweep, extend_by_zero, extend_field, solve_truncated, SweepSetup,
};
use degen_core::spectral::compute_spectrum;
use degen_core::Error;

fn bump(p: &[f64]) -> f64 {
    let x = *p.last().unwrap();
    let s = (x - 0.45) / 0.5;
    if s > 0.0 && s < 1.0 {
        256.0 * (s * (1.0 - s)).powi(4)
    } else {
        0.0
    }
}

fn setup(alpha: f64, n: usize) -> SweepSetup {
    SweepSetup {
        domain: make_domain(DomainKind::Interval, alpha).unwrap(),
        n,
        n_ref: 2 * n,
        grading_ref: 2.0,
        grid: TimeGrid::new(1.0, 200).unwrap(),
        solver: TimeSolver::Spectral { modes: usize::MAX },
    }
}

#[test]
fn sweep_errors_decrease() {
    let deltas = [0.2, 0.1, 0.05, 0.025];
    for alpha in [0.25, 0.5] {
        let r = delta_sweep(&setup(alpha, 160), &bump, None, &deltas).unwrap();
        eprintln!("α = {alpha}: {:?} {:?} {:?}", r.solution_errors, r.flux_errors, r.self_convergence);
        assert!(r.solution_errors.windows(2).all(|w| w[1] < w[0]));
        assert!(r.flux_errors.as_ref().unwrap().windows(2).all(|w| w[1] < w[0]));
        assert!(r.final_errors.as_ref().unwrap().windows(2).all(|w| w[1] < w[0]));
        assert!(r.extension_defects.iter().all(|&d| d < 1e-14));
    }
}

#[test]
fn sweep_with_source() {
    let f = |t: f64, p: &[f64]| (1.0 + t) * bump(p);
    let r = delta_sweep(&setup(0.5, 80), &bump, Some(&f), &[0.2, 0.1, 0.05]).unwrap();
    assert!(r.solution_errors.windows(2).all(|w| w[1] < w[0]));
    assert!(r.final_errors.is_none() && r.flux_errors.is_none());
}

#[test]
fn zero_data_gives_zero_errors() {
    let r = delta_sweep(&setup(0.5, 40), &|_| 0.0, None, &[0.2, 0.1]).unwrap();
    assert!(r.solution_errors.iter().all(|&e| e == 0.0));
    assert!(r.flux_errors.unwrap().iter().all(|&e| e == 0.0));
}

#[test]
fn non_aligned_or_unsorted_deltas_are_rejected() {
    assert!(delta_sweep(&setup(0.5, 40), &bump, None, &[0.1, 0.2]).is_err());
    assert!(matches!(
        delta_sweep(&setup(0.5, 40), &bump, None, &[0.2, 0.11]),
        Err(Error::ContractViolation(_))
    ));
}

#[test]
fn support_condition() {
    let (mesh, ops) = interval(0.5, 40, 1.0);
    let s = compute_spectrum(&ops, 1).unwrap();
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let solver = TimeSolver::Implicit { theta: 1.0 };
    let err = solve_truncated(&mesh, 0.1, s.vector(0), &Source::Zero, &grid, solver).unwrap_err();
    assert!(matches!(err, Error::SupportViolation { support_distance, .. } if support_distance == 0.0));
    let y0 = mesh.interpolate(bump);
    assert!(solve_truncated(&mesh, 0.2, &y0, &Source::Zero, &grid, solver).is_ok());
}

#[test]
fn truncated_mode_decays_at_truncated_rate() {
    let d = make_domain(DomainKind::Square, 0.5).unwrap();
    let full = build_mesh(d, 20, 1.0).unwrap();
    let sub = full.submesh(0.1).unwrap();
    let ops = assemble(&sub, 0.5).unwrap();
    let s = compute_spectrum(&ops, 1).unwrap();
    let y0 = extend_by_zero(s.vector(0), &sub, &full).unwrap();
    let grid = TimeGrid::new(0.2, 20).unwrap();
    let sol = solve_truncated(&full, 0.1, &y0, &Source::Zero, &grid, TimeSolver::Spectral { modes: 5 }).unwrap();
    let e = energy_history(&sol.field, &sol.ops);
    for (j, v) in e.iter().enumerate() {
        assert!((v - (-s.value(0) * grid.time(j)).exp()).abs() < 1e-10);
    }
    // isometry of the extension
    let ext = extend_field(&sol.field, &sol.mesh, &full).unwrap();
    let full_ops = assemble(&full, 0.5).unwrap();
    for (a, b) in energy_history(&ext, &full_ops).iter().zip(&e) {
        assert!((a - b).abs() <= 1e-14 * b.max(1e-300));
    }
    for (a, b) in ext.values().iter().zip(sol.field.values()) {
        let na: f64 = a.iter().map(|x| x * x).sum();
        let nb: f64 = b.iter().map(|x| x * x).sum();
        assert_eq!(na, nb);
    }
}
