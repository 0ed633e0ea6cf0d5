#![allow(dead_code)]

use fpm::approx::{ShapeFunctionSet, WeightScheme};
use fpm::geometry::{Mat3, Vec3};
use fpm::material::{second_pk_stress, KinematicState, MaterialParams};
use fpm::mesh::{generate, DualComplex, SimplicialMesh};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn discretize(mesh: SimplicialMesh) -> (DualComplex, ShapeFunctionSet) {
    let complex = DualComplex::build(mesh).expect("valid mesh");
    let shapes =
        ShapeFunctionSet::build(&complex, WeightScheme::Uniform).expect("full-rank stencils");
    (complex, shapes)
}

pub fn soft_tissue() -> MaterialParams {
    MaterialParams::new(1000.0, 3000.0, 0.45).unwrap()
}

pub fn bar() -> SimplicialMesh {
    generate::rectangle(10.0, 4.0, 25, 5, None).unwrap()
}

pub fn jittered_square(n: usize, seed: u64) -> SimplicialMesh {
    generate::rectangle(
        1.0,
        1.0,
        n,
        n,
        Some(generate::Jitter {
            fraction: 0.25,
            seed,
        }),
    )
    .unwrap()
}

pub fn jittered_cube(n: usize, seed: u64) -> SimplicialMesh {
    generate::block(
        [1.0; 3],
        [n; 3],
        Some(generate::Jitter {
            fraction: 0.2,
            seed,
        }),
    )
    .unwrap()
}

/// Restrict a 3×3 tensor to the plane for 2D meshes.
pub fn planar(mut b: Mat3, dim: usize) -> Mat3 {
    if dim == 2 {
        for i in 0..3 {
            b[(2, i)] = 0.0;
            b[(i, 2)] = 0.0;
        }
    }
    b
}

pub fn affine(complex: &DualComplex, b: &Mat3, c: &Vec3) -> Vec<Vec3> {
    complex.points().iter().map(|x| b * x + c).collect()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Strain energy from `C` alone, written independently of the library.
pub fn energy_of_c(c: &Mat3, mat: &MaterialParams) -> f64 {
    let i3 = c.determinant();
    let mu = mat.young / (2.0 * (1.0 + mat.nu));
    let k = mat.young / (3.0 * (1.0 - 2.0 * mat.nu));
    0.5 * mu * (c.trace() * i3.powf(-1.0 / 3.0) - 3.0) + 0.5 * k * (i3.sqrt() - 1.0).powi(2)
}

pub fn random_deformation(rng: &mut ChaCha8Rng, amplitude: f64) -> Mat3 {
    loop {
        let f = Mat3::identity() + Mat3::from_fn(|_, _| rng.gen_range(-amplitude..amplitude));
        if f.determinant() > 0.2 {
            return f;
        }
    }
}

/// Largest deviation of `S` from the central difference `∂W/∂E` over
/// `samples` random states, relative to the largest stress component.
pub fn stress_gradient_error(mat: &MaterialParams, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let st = KinematicState::from_deformation_gradient(random_deformation(rng, 0.4)).unwrap();
        let s = second_pk_stress(&st, mat).unwrap();
        let scale = s.amax().max(1e-3 * mat.young);
        let w = |e: Mat3| energy_of_c(&(Mat3::identity() + 2.0 * e), mat);
        for i in 0..3 {
            for j in i..3 {
                let mut d = Mat3::zeros();
                d[(i, j)] = h;
                d[(j, i)] = h;
                let dw = (w(st.e + d) - w(st.e - d)) / (2.0 * h);
                let fd = if i == j { dw } else { 0.5 * dw };
                worst = worst.max((fd - s[(i, j)]).abs() / scale);
            }
        }
    }
    worst
}
