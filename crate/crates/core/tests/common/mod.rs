//! Shared brute-force references for integration tests.
#![allow(dead_code)]

use rfim::disorder::DisorderField;
use rfim::gibbs::ModelParams;
use rfim::lattice::LatticeSpec;

/// `(F, m, C)` by direct summation over all configurations with a
/// max-shifted exponential. `C` is dense row-major.
pub fn brute_force(l: &LatticeSpec, g: &DisorderField, p: ModelParams) -> (f64, Vec<f64>, Vec<f64>) {
    let n = l.num_sites();
    let energies: Vec<(Vec<f64>, f64)> = (0..1usize << n)
        .map(|mask| {
            let s: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let mut e = 0.0;
            for &(x, y) in l.bonds() {
                e += p.beta * s[x] * s[y];
            }
            for x in 0..n {
                e += p.h * g.values[x] * s[x];
            }
            (s, e)
        })
        .collect();
    let top = energies.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n * n];
    for (s, e) in &energies {
        let w = (e - top).exp();
        z += w;
        for x in 0..n {
            m[x] += w * s[x];
            for y in 0..n {
                c[x * n + y] += w * s[x] * s[y];
            }
        }
    }
    m.iter_mut().for_each(|v| *v /= z);
    c.iter_mut().for_each(|v| *v /= z);
    (top + z.ln(), m, c)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
