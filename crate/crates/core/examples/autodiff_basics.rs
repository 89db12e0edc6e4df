//! Reverse-mode gradients of a tiny network, checked by central differences.
//!
//! `cargo run --example autodiff_basics`

use swarmflow::autodiff::{Graph, Tensor};

fn loss(w: &Tensor, x: &Tensor) -> f64 {
    let g = Graph::new();
    let (w, x) = (g.constant(w.clone()).unwrap(), g.constant(x.clone()).unwrap());
    let y = g.tanh(g.matmul(x, w).unwrap()).unwrap();
    g.item(g.mean(g.mul(y, y).unwrap()).unwrap())
}

fn main() {
    let x = Tensor::matrix(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let w = Tensor::matrix(3, 2, vec![0.2, -0.5, 0.9, 0.1, -0.3, 0.7]).unwrap();

    let g = Graph::new();
    let wv = g.param(w.clone()).unwrap();
    let xv = g.constant(x.clone()).unwrap();
    let y = g.tanh(g.matmul(xv, wv).unwrap()).unwrap();
    let l = g.mean(g.mul(y, y).unwrap()).unwrap();
    g.backward(l).unwrap();
    let grad = g.grad(wv);
    println!("loss {:.6}", g.item(l));

    let eps = 1e-6;
    for i in 0..w.len() {
        let bump = |d: f64| {
            let mut data = w.data().to_vec();
            data[i] += d;
            loss(&Tensor::new(w.shape().to_vec(), data).unwrap(), &x)
        };
        let numeric = (bump(eps) - bump(-eps)) / (2.0 * eps);
        println!("dL/dw[{i}]  analytic {:+.9}  numeric {:+.9}", grad.data()[i], numeric);
    }
}
