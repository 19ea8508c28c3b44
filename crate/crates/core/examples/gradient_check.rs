//! Central-difference check of a small tanh layer and cross-entropy.

use mtadv::{Graph, Tensor};

fn loss(x: &Tensor, w: &Tensor, b: &Tensor, labels: &[usize]) -> (f64, Vec<f64>) {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let wv = g.param(w.clone());
    let bv = g.param(b.clone());
    let h = g.matmul(xv, wv).unwrap();
    let h = g.add_bias(h, bv).unwrap();
    let h = g.tanh(h).unwrap();
    let l = g.log_softmax_nll(h, labels).unwrap();
    let value = g.value(l).unwrap().values()[0];
    g.backward(l).unwrap();
    (value, g.grad(wv).unwrap().unwrap().to_vec())
}

fn main() {
    let x = Tensor::matrix(3, 2, vec![0.5, -1.0, 1.5, 0.2, -0.3, 0.8]).unwrap();
    let w = Tensor::matrix(2, 3, vec![0.1, -0.4, 0.3, 0.7, 0.2, -0.5]).unwrap();
    let b = Tensor::vector(vec![0.0, 0.1, -0.1]).unwrap();
    let labels = [0, 2, 1];

    let (value, analytic) = loss(&x, &w, &b, &labels);
    println!("loss = {value:.6}");
    let h = 1e-5;
    for i in 0..w.len() {
        let mut up = w.clone();
        up.values_mut()[i] += h;
        let mut down = w.clone();
        down.values_mut()[i] -= h;
        let numeric = (loss(&x, &up, &b, &labels).0 - loss(&x, &down, &b, &labels).0) / (2.0 * h);
        println!("dL/dw[{i}]  analytic {:+.9}  numeric {:+.9}", analytic[i], numeric);
    }
}
