//! Whole-solver behaviour: patch test, energy decay, determinism and
//! threaded assembly.

mod common;

use std::collections::BTreeSet;

use common::*;
use fpm::dynamics::{lumped_mass, EssentialFacet, ForceAssembler, PenaltyConfig};
use fpm::geometry::{Mat3, Vec3};
use fpm::solver::{
    step, BoundaryCondition, EssentialDofs, QuasiStaticProblem, SolverControls, SolverState,
};

fn boundary_points(complex: &fpm::mesh::DualComplex) -> BTreeSet<usize> {
    complex
        .mesh()
        .boundary_faces()
        .into_iter()
        .flat_map(|(nodes, _)| nodes)
        .collect()
}

/// Affine field prescribed on every boundary point; the interior relaxes
/// under damped dynamics and must reproduce the field.
#[test]
fn patch_test_recovers_affine_field() {
    let mat = soft_tissue();
    for mesh in [jittered_square(6, 1), jittered_cube(4, 1)] {
        let dim = mesh.dim();
        let (complex, shapes) = discretize(mesh);
        let b = planar(
            Mat3::new(0.10, 0.05, -0.02, 0.03, -0.08, 0.04, 0.01, 0.02, 0.06),
            dim,
        );
        let exact = affine(&complex, &b, &Vec3::zeros());
        let boundary = boundary_points(&complex);
        let essential = EssentialDofs {
            points: boundary
                .iter()
                .map(|&i| {
                    let u = exact[i];
                    (i, [Some(u.x), Some(u.y), (dim == 3).then_some(u.z)])
                })
                .collect(),
        };
        let mask = if dim == 2 {
            Vec3::new(1.0, 1.0, 0.0)
        } else {
            Vec3::repeat(1.0)
        };
        let facets: Vec<EssentialFacet> = (0..complex.boundary_facets().len())
            .map(|facet| EssentialFacet { facet, mask })
            .collect();
        let asm = ForceAssembler::new(&complex, &shapes, mat, PenaltyConfig::new(20.0).unwrap())
            .with_essential_facets(&facets);

        let residual = asm.internal_force(&exact).unwrap();
        let h_s = complex
            .cells()
            .iter()
            .map(|c| c.char_length)
            .fold(f64::INFINITY, f64::min);
        for i in (0..complex.point_count()).filter(|i| !boundary.contains(i)) {
            assert!(
                residual[i].amax() < 1e-8 * mat.young * h_s,
                "residual {} at {i}",
                residual[i]
            );
        }

        let mass = lumped_mass(&complex, &mat);
        let zero = vec![Vec3::zeros(); complex.point_count()];
        let omega = std::f64::consts::FRAC_PI_2 * (mat.shear_modulus() / mat.rho0).sqrt();
        let mut state = SolverState::at_rest(
            complex.point_count(),
            0.8 * asm.critical_time_step(),
            2.0 * omega,
        );
        for _ in 0..200_000 {
            let f = asm.internal_force(&state.u_curr).unwrap();
            state = step(&state, &zero, &f, &mass, &essential, 1.0).unwrap();
            if state.step > 100 && state.max_speed() < 1e-14 {
                break;
            }
        }
        let scale = exact.iter().map(|u| u.amax()).fold(0.0, f64::max);
        for (u, e) in state.u_curr.iter().zip(&exact) {
            assert!(
                (u - e).amax() < 1e-8 * scale,
                "{u} vs {e} after {} steps",
                state.step
            );
        }
    }
}

fn bar_extension(controls: &SolverControls, threads: usize) -> fpm::solver::SolveReport {
    let (complex, shapes) = discretize(bar());
    let problem = QuasiStaticProblem::new(
        &complex,
        &shapes,
        soft_tissue(),
        PenaltyConfig::new(20.0).unwrap(),
        vec![
            BoundaryCondition::fixed("xmin", [Some(0.0), Some(0.0), None]),
            BoundaryCondition::fixed("xmax", [Some(2.0), None, None]),
        ],
    );
    problem
        .solve(&SolverControls {
            threads,
            ..controls.clone()
        })
        .unwrap()
}

#[test]
fn bar_extension_settles_with_decaying_kinetic_energy() {
    let r = bar_extension(&SolverControls::default(), 0);
    assert!(r.converged(), "{:?} after {} steps", r.status, r.steps);
    assert!(r.dt <= 0.8 * r.dt_crit * (1.0 + 1e-15));
    let max_ux = r.u.iter().map(|u| u.x).fold(f64::MIN, f64::max);
    assert_eq!(max_ux, 2.0);
    assert!(r.u.iter().all(|u| u.iter().all(|x| x.is_finite())));

    // the envelope over 1000-step windows falls monotonically after the ramp
    let ke = &r.kinetic_energy[r.ramp_steps..];
    let peak = r.kinetic_energy.iter().cloned().fold(0.0, f64::max);
    let envelope: Vec<f64> = ke
        .chunks(1000)
        .map(|c| c.iter().cloned().fold(0.0, f64::max))
        .collect();
    assert!(envelope.windows(2).all(|w| w[1] < w[0]), "{envelope:?}");
    assert!(*ke.last().unwrap() < 1e-6 * peak);
}

/// Pointwise monotonicity over 100-step lags. Fails: while relaxing, the
/// slowest mode reverses velocity once and the energy rises by ~4e-6 of its
/// peak before decaying, far above the 1e-9 allowance.
#[test]
#[ignore = "kinetic energy rises once during relaxation (velocity reversal of the slowest mode)"]
fn kinetic_energy_never_rises_over_100_steps() {
    let r = bar_extension(&SolverControls::default(), 0);
    let ke = &r.kinetic_energy;
    let peak = ke.iter().cloned().fold(0.0, f64::max);
    for k in r.ramp_steps..ke.len().saturating_sub(100) {
        assert!(
            ke[k + 100] <= ke[k] + 1e-9 * peak,
            "KE rose from {} to {} at step {k}",
            ke[k],
            ke[k + 100]
        );
    }
}

#[test]
fn sequential_solves_are_bit_identical() {
    let controls = SolverControls {
        ramp_steps: 2000,
        max_steps: 3000,
        ..Default::default()
    };
    let a = bar_extension(&controls, 0);
    let b = bar_extension(&controls, 0);
    assert_eq!(a.u, b.u);
    assert_eq!(a.kinetic_energy, b.kinetic_energy);
    assert_eq!(a.steps, b.steps);
}

#[test]
fn threaded_assembly_matches_sequential() {
    let (complex, shapes) = discretize(jittered_cube(6, 3));
    let u: Vec<Vec3> = complex
        .points()
        .iter()
        .map(|x| Vec3::new((3.0 * x.y).sin(), x.x * x.z, (2.0 * x.x).cos()) * 0.02)
        .collect();
    let mat = soft_tissue();
    let p = PenaltyConfig::new(20.0).unwrap();
    let seq = ForceAssembler::new(&complex, &shapes, mat, p)
        .internal_force(&u)
        .unwrap();
    let par = ForceAssembler::new(&complex, &shapes, mat, p)
        .with_threads(4)
        .internal_force(&u)
        .unwrap();
    let scale = seq.iter().map(|v| v.amax()).fold(0.0, f64::max);
    for (a, b) in seq.iter().zip(&par) {
        assert!((a - b).amax() <= 1e-12 * scale);
    }

    let controls = SolverControls {
        ramp_steps: 1000,
        max_steps: 1500,
        ..Default::default()
    };
    let (r0, r4) = (bar_extension(&controls, 0), bar_extension(&controls, 4));
    for (a, b) in r0.u.iter().zip(&r4.u) {
        assert!((a - b).amax() <= 1e-12 * 2.0);
    }
}

#[test]
fn stable_over_the_penalty_range() {
    let (complex, shapes) = discretize(bar());
    for p in [10.0, 20.0, 50.0, 100.0] {
        let problem = QuasiStaticProblem::new(
            &complex,
            &shapes,
            soft_tissue(),
            PenaltyConfig::new(p).unwrap(),
            vec![
                BoundaryCondition::fixed("xmin", [Some(0.0), Some(0.0), None]),
                BoundaryCondition::fixed("xmax", [Some(-2.0), None, None]),
            ],
        );
        let r = problem
            .solve(&SolverControls {
                ramp_steps: 3000,
                max_steps: 6000,
                ..Default::default()
            })
            .unwrap();
        assert!(!r.inverted());
        assert!(r.u.iter().all(|u| u.iter().all(|x| x.is_finite())));
    }
}
