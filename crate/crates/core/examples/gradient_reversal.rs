//! Gradient reversal: identity forward, `-γ` times the upstream gradient
//! backward.

use mtadv::{Graph, Tensor};

fn main() {
    for gamma in [0.0, 0.5, 2.0] {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, -2.0, 3.0]).unwrap());
        let r = g.grad_reverse(x, gamma).unwrap();
        let sq = g.mul(r, r).unwrap();
        let loss = g.sum(sq).unwrap();
        println!("gamma {gamma}: forward {:?}", g.value(r).unwrap().values());
        g.backward(loss).unwrap();
        // d(sum x²)/dx = 2x, reversed and scaled
        println!("          grad    {:?}", g.grad(x).unwrap().unwrap());
    }
}
