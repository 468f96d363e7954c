use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Lift, Real};

use super::{check_widths, BSplineBasis, Network, NetworkError};

/// Layered KAN. Every (layer, output node, input node) triple owns one edge
/// `phi(x) = w_b * silu(x) + w_s * sum_i c_i B_i(x)`; a node sums its
/// incoming edges.
///
/// Parameter layout, edge by edge in (layer, out, in) order:
/// `[c_0 .. c_{G+k-1}, w_b, w_s]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KanNetwork {
    widths: Vec<usize>,
    basis: BSplineBasis,
    coeff_std: f64,
}

/// Borrowed view of one edge's parameters.
#[derive(Clone, Copy, Debug)]
pub struct KanEdge<'a, P> {
    pub coeffs: &'a [P],
    pub w_base: P,
    pub w_spline: P,
}

impl<'a, P: Real> KanEdge<'a, P> {
    #[inline]
    pub fn eval<T: Lift<P>>(&self, basis: &BSplineBasis, x: T) -> T {
        let spline = T::combine(basis, self.coeffs, x, 0);
        T::lift(self.w_base) * x.silu() + T::lift(self.w_spline) * spline
    }
}

impl KanNetwork {
    /// Spline grid on `[-1, 1]`.
    pub fn new(widths: &[usize], degree: usize, grid_intervals: usize) -> Result<Self, NetworkError> {
        check_widths(widths)?;
        Ok(KanNetwork {
            widths: widths.to_vec(),
            basis: BSplineBasis::uniform(degree, grid_intervals, -1.0, 1.0)?,
            coeff_std: 0.1,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn params_per_edge(&self) -> usize {
        self.basis.len() + 2
    }

    pub fn num_edges(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn num_params(&self) -> usize {
        self.num_edges() * self.params_per_edge()
    }

    /// Spline coefficients `N(0, 0.1^2)`, `w_b = w_s = 1`.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, self.coeff_std).expect("valid std");
        let n = self.basis.len();
        let mut out = Vec::with_capacity(self.num_params());
        for _ in 0..self.num_edges() {
            for _ in 0..n {
                out.push(normal.sample(rng));
            }
            out.push(1.0);
            out.push(1.0);
        }
        out
    }

    pub fn edge<'a, P: Real>(&self, params: &'a [P], layer: usize, out: usize, inp: usize) -> KanEdge<'a, P> {
        let stride = self.params_per_edge();
        let before: usize = self.widths[..layer]
            .iter()
            .zip(&self.widths[1..=layer])
            .map(|(a, b)| a * b)
            .sum();
        let idx = before + out * self.widths[layer] + inp;
        let p = &params[idx * stride..(idx + 1) * stride];
        let n = self.basis.len();
        KanEdge {
            coeffs: &p[..n],
            w_base: p[n],
            w_spline: p[n + 1],
        }
    }

    pub fn forward<P: Real, T: Lift<P>>(&self, params: &[P], x: &[T]) -> Vec<T> {
        let stride = self.params_per_edge();
        let n = self.basis.len();
        let mut cur: Vec<T> = x.to_vec();
        let mut offset = 0;
        for w in self.widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            // silu of each input is shared by all outgoing edges
            let base: Vec<T> = cur.iter().map(|v| v.silu()).collect();
            let mut next = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                let mut acc = T::cst(0.0);
                for p in 0..n_in {
                    let e = &params[offset..offset + stride];
                    offset += stride;
                    let spline = T::combine(&self.basis, &e[..n], cur[p], 0);
                    acc = acc + T::lift(e[n]) * base[p] + T::lift(e[n + 1]) * spline;
                }
                next.push(acc);
            }
            cur = next;
        }
        cur
    }
}

/// Builds a network with cubic splines on 5 grid intervals and draws its
/// initial parameters from `seed`.
pub fn init_network(widths: &[usize], seed: u64) -> Result<(KanNetwork, Vec<f64>), NetworkError> {
    let net = KanNetwork::new(widths, 3, 5)?;
    let params = Network::Kan(net.clone()).init_params(seed);
    Ok((net, params))
}

/// Checked forward pass on plain floats.
pub fn kan_forward(net: &KanNetwork, params: &[f64], input: &[f64]) -> Result<Vec<f64>, NetworkError> {
    Network::Kan(net.clone()).try_forward(params, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Jet, Tape, Var};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_edge(c: f64, wb: f64, ws: f64) -> (KanNetwork, Vec<f64>) {
        let net = KanNetwork::new(&[1, 1], 3, 5).unwrap();
        let mut p = vec![c; 8];
        p.push(wb);
        p.push(ws);
        (net, p)
    }

    #[test]
    fn silu_path_only() {
        let (net, p) = single_edge(0.3, 1.0, 0.0);
        assert_eq!(kan_forward(&net, &p, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn spline_partition_of_unity_path() {
        let (net, p) = single_edge(1.0, 0.0, 1.0);
        for x in [-0.9, -0.2, 0.0, 0.45, 0.99] {
            assert!((kan_forward(&net, &p, &[x]).unwrap()[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_zero_function() {
        let net = KanNetwork::new(&[1, 2, 1], 3, 5).unwrap();
        let mut p = Network::Kan(net.clone()).init_params(4);
        let stride = net.params_per_edge();
        for e in 0..net.num_edges() {
            p[e * stride + 8] = 0.0;
            p[e * stride + 9] = 0.0;
        }
        for x in [-1.0, -0.3, 0.7] {
            assert_eq!(kan_forward(&net, &p, &[x]).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn parameter_count_for_default_architecture() {
        let (net, p) = init_network(&[1, 10, 1], 0).unwrap();
        assert_eq!(net.params_per_edge(), 10);
        assert_eq!(net.num_edges(), 20);
        assert_eq!(net.num_params(), 200);
        assert_eq!(p.len(), 200);
    }

    #[test]
    fn init_is_reproducible() {
        let (_, a) = init_network(&[2, 10, 1], 42).unwrap();
        let (_, b) = init_network(&[2, 10, 1], 42).unwrap();
        let (_, c) = init_network(&[2, 10, 1], 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_widths_rejected() {
        assert!(init_network(&[1], 0).is_err());
        assert!(init_network(&[], 0).is_err());
        assert!(init_network(&[1, 0, 1], 0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (net, p) = init_network(&[2, 3, 1], 0).unwrap();
        assert!(kan_forward(&net, &p, &[0.1]).is_err());
        assert!(kan_forward(&net, &p[1..], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn edge_view_matches_forward() {
        let (net, p) = init_network(&[1, 3, 1], 9).unwrap();
        let x = 0.37;
        let hidden: Vec<f64> = (0..3).map(|q| net.edge(&p, 0, q, 0).eval(net.basis(), x)).collect();
        let out: f64 = (0..3).map(|q| net.edge(&p, 1, 0, q).eval(net.basis(), hidden[q])).sum();
        assert!((out - kan_forward(&net, &p, &[x]).unwrap()[0]).abs() < 1e-14);
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let net = KanNetwork::new(&[2, 4, 1], 3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..50 {
            let p = Network::Kan(net.clone()).init_params(trial);
            let x = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
            let tape = Tape::new();
            let pv = tape.vars(&p);
            let xv = [Var::constant(x[0]), Var::constant(x[1])];
            let out = net.forward(&pv, &xv)[0];
            let g = tape.gradient(out).wrt_all(&pv);
            for _ in 0..5 {
                let i = rng.random_range(0..p.len());
                let h = 1e-6;
                let mut pp = p.clone();
                pp[i] += h;
                let fp = net.forward(&pp, &x)[0];
                pp[i] -= 2.0 * h;
                let fm = net.forward(&pp, &x)[0];
                let fd = (fp - fm) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-6 * (1.0 + g[i].abs()), "param {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn input_jets_match_finite_differences() {
        let (net, p) = init_network(&[2, 5, 1], 3).unwrap();
        let x = [0.21, -0.43];
        let xj: [Jet<f64, 2>; 2] = [Jet::coordinate(x[0], 0, 1.0, 2), Jet::coordinate(x[1], 1, 1.0, 2)];
        let out = net.forward(&p, &xj)[0];
        let f = |a: f64, b: f64| net.forward(&p, &[a, b])[0];
        let h = 1e-4;
        let fxx = (f(x[0] + h, x[1]) - 2.0 * f(x[0], x[1]) + f(x[0] - h, x[1])) / (h * h);
        let fy = (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h);
        assert!((out.g[1] - fy).abs() < 1e-7);
        assert!((out.h[0][0] - fxx).abs() < 1e-5);
    }
}
