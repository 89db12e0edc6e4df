//! Push a latent through the coupling bijector and back, and compare the
//! log-determinant with a finite-difference Jacobian.
//!
//! `cargo run --release --example bijector_roundtrip`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmflow::autodiff::Tensor;
use swarmflow::models::{standard_normal, CouplingInit, ModelConfig, SwarmModel};

fn main() -> swarmflow::Result<()> {
    let d = 4;
    let model = SwarmModel::with_init(ModelConfig::tiny(d), 7, CouplingInit::Random)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = standard_normal(&mut rng, &[1, d]);

    let (z, logdet) = model.bijector_forward(&w)?;
    let (back, inv_logdet) = model.bijector_inverse(&z)?;
    let err = w.zip_map(&back, |a, b| a - b).max_abs();
    println!("w    {:?}", w.data());
    println!("z    {:?}", z.data());
    println!("round-trip error {err:.2e}; forward + inverse log-det {:.2e}", logdet + inv_logdet);

    // log |det J| by central differences and Gaussian elimination
    let eps = 1e-6;
    let mut jac = vec![vec![0.0; d]; d];
    for j in 0..d {
        let bump = |s: f64| -> swarmflow::Result<Tensor> {
            let mut data = w.data().to_vec();
            data[j] += s;
            Ok(model.bijector_forward(&Tensor::matrix(1, d, data)?)?.0)
        };
        let (hi, lo) = (bump(eps)?, bump(-eps)?);
        for i in 0..d {
            jac[i][j] = (hi.data()[i] - lo.data()[i]) / (2.0 * eps);
        }
    }
    let mut log_abs_det = 0.0;
    for c in 0..d {
        let p = (c..d).max_by(|&a, &b| jac[a][c].abs().total_cmp(&jac[b][c].abs())).unwrap();
        jac.swap(c, p);
        log_abs_det += jac[c][c].abs().ln();
        for r in c + 1..d {
            let f = jac[r][c] / jac[c][c];
            for k in c..d {
                jac[r][k] -= f * jac[c][k];
            }
        }
    }
    println!("log-det analytic {logdet:.9}  numeric {log_abs_det:.9}");
    Ok(())
}
