#![allow(dead_code)]

use nalgebra::{Complex, Matrix2, Matrix4, Vector4};
use rand::Rng;
use sideband_core::{CavityParams, Coupling, TwoModeState};

fn embed(block_u: Matrix2<f64>, block_l: Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&block_u);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&block_l);
    m
}

fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn squeezer(r: f64) -> Matrix2<f64> {
    Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp())
}

fn beam_splitter(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    let i = Matrix2::identity();
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&(i * c));
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&(i * s));
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&(i * -s));
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&(i * c));
    m
}

fn two_mode_squeezer(r: f64) -> Matrix4<f64> {
    let z = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0)
        .copy_from(&(Matrix2::identity() * r.cosh()));
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&(z * r.sinh()));
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&(z * r.sinh()));
    m.fixed_view_mut::<2, 2>(2, 2)
        .copy_from(&(Matrix2::identity() * r.cosh()));
    m
}

/// Random symplectic matrix built from rotations, squeezers and mixers.
pub fn random_symplectic<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    let mut s = Matrix4::identity();
    for _ in 0..3 {
        let local = embed(
            rotation(rng.random_range(0.0..6.3)) * squeezer(rng.random_range(-0.8..0.8)),
            rotation(rng.random_range(0.0..6.3)) * squeezer(rng.random_range(-0.8..0.8)),
        );
        s = beam_splitter(rng.random_range(0.0..6.3)) * two_mode_squeezer(rng.random_range(-0.6..0.6)) * local * s;
    }
    s
}

/// Random physical two-mode Gaussian state: a symplectic transform of a
/// thermal state, with a random displacement.
pub fn random_state<R: Rng>(rng: &mut R) -> TwoModeState<f64> {
    let nu_u = rng.random_range(1.0..3.0);
    let nu_l = rng.random_range(1.0..3.0);
    let thermal = Matrix4::from_diagonal(&Vector4::new(nu_u, nu_u, nu_l, nu_l));
    let s = random_symplectic(rng);
    let cov = s * thermal * s.transpose();
    let mean = Vector4::from_fn(|_, _| rng.random_range(-2.0..2.0));
    TwoModeState::sideband(mean, cov).expect("symplectic image of a thermal state")
}

pub fn random_gain<R: Rng>(rng: &mut R) -> Complex<f64> {
    Complex::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..6.3))
}

pub fn random_cavity<R: Rng>(rng: &mut R) -> CavityParams<f64> {
    let coupling = if rng.random_bool(0.5) {
        Coupling::Overcoupled
    } else {
        Coupling::Undercoupled
    };
    CavityParams::new(
        rng.random_range(0.0..0.9),
        rng.random_range(1.0..20.0),
        coupling,
        rng.random_range(0.3..1.0),
    )
    .unwrap()
}
