use kac_core::charfn::CharFunction;
use kac_core::d2::{d2_lower, D2Config};
use kac_core::propagator::RadialProjector;
use kac_core::tensor::TensorBasis;
use kac_core::state::HermiteState;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

fn main() {
    let m = 1usize;
    let basis = TensorBasis::new(5, 8).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut coef = vec![0.0; basis.dim()];
    for (k, ix) in basis.indices() {
        let degree: usize = ix.iter().map(|&d| d as usize).sum();
        if degree == 0 || ix[m..].iter().any(|&d| d != 0) { continue; }
        if degree == 1 { continue; }
        coef[k] = rng.gen::<f64>() * 2.0 - 1.0;
    }
    let norm: f64 = coef.iter().map(|c| c * c).sum::<f64>().sqrt();
    for c in coef.iter_mut() { *c *= 1e-4 / norm; }
    coef[0] = 1.0;
    let h0 = HermiteState::new(basis.clone(), coef).unwrap();
    dump(&h0, &basis);
    let projector = RadialProjector::new(&basis);
    let steady = projector.apply(&h0).unwrap();
    println!("||h0-1|| = {:.6e}  ||hinf-1|| = {:.6e}", h0.distance_to_one(), steady.distance_to_one());
    let sum_abs: f64 = steady.coefficients().iter().skip(1).map(|c| c.abs()).sum();
    println!("sum |c_alpha| (alpha != 0) = {:.6e}", sum_abs);
    // residual of the projection: || A x - x ||
    let fhat = CharFunction::from_coefficients_radial(&steady);
    for r in [0.1f64, 0.3, 0.6, 1.0, 1.5] {
        let z = [r, 0.0, 0.0, 0.0, 0.0];
        let v = fhat.eval(&z);
        let gauss = (-PI * r * r).exp();
        println!("r={r}: fhat={:.6e}+{:.2e}i  gauss={:.6e}  |diff|/r^2 = {:.6e}", v.re, v.im, gauss, ((v.re-gauss).powi(2)+v.im*v.im).sqrt()/(r*r));
    }
    let b = d2_lower(&fhat, &CharFunction::gaussian(5), &D2Config { refine_rounds: 8, ..D2Config::default() }).unwrap();
    println!("d2 radial search: {:.6e} at {:?}", b.value, b.argmax);
    // check radiality of fhat: compare (r,0,0,0,0) against (0,0,r,0,0) and mixed
    for z in [[0.8, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.8, 0.0, 0.0], [0.5656854249, 0.5656854249, 0.0, 0.0, 0.0]] {
        println!("fhat({z:?}) = {:?}", fhat.eval(&z));
    }
}
// emit the sampled state for an independent cross-check
#[allow(dead_code)]
fn dump(h0: &HermiteState, basis: &std::sync::Arc<TensorBasis>) {
    for (k, ix) in basis.indices() {
        if h0.coefficients()[k] != 0.0 {
            println!("DUMP {:?} {}", ix, h0.coefficients()[k]);
        }
    }
}
