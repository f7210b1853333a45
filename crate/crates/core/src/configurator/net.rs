//! Feed-forward configurator policy with three masked softmax heads and
//! hand-written gradients.
//!
//! `x -> h = tanh(W1 x + b1) -> e = tanh(W2 h + b2)`; the route head reads
//! `e`, the port head reads `[e, onehot(route)]` and the vessel head reads
//! `[e, onehot(route), onehot(port)]`.

use crate::error::{Error, Result};
use crate::seed::SimRng;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyDims {
    pub n_in: usize,
    pub hidden: usize,
    pub n_routes: usize,
    pub n_ports: usize,
    pub n_vessels: usize,
}

impl PolicyDims {
    /// Logits produced per construction step.
    pub fn head_sizes(&self) -> usize {
        self.n_routes + self.n_ports + self.n_vessels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Offsets {
    l1: Block,
    l2: Block,
    route: Block,
    port: Block,
    vessel: Block,
    total: usize,
}

impl Offsets {
    fn new(d: &PolicyDims) -> Self {
        let mut at = 0;
        let mut block = |rows: usize, cols: usize| {
            let b = Block {
                w: at,
                b: at + rows * cols,
                rows,
                cols,
            };
            at += rows * cols + rows;
            b
        };
        let l1 = block(d.hidden, d.n_in);
        let l2 = block(d.hidden, d.hidden);
        let route = block(d.n_routes, d.hidden);
        let port = block(d.n_ports, d.hidden + d.n_routes);
        let vessel = block(d.n_vessels, d.hidden + d.n_routes + d.n_ports);
        Offsets {
            l1,
            l2,
            route,
            port,
            vessel,
            total: at,
        }
    }
}

/// One construction step as the policy saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    /// Normalized features.
    pub x: Vec<f64>,
    pub route_mask: Vec<bool>,
    /// `[route][port]`.
    pub port_mask: Vec<Vec<bool>>,
    pub vessel_mask: Vec<bool>,
}

/// `(route, port, vessel)` indices.
pub type Choice = (usize, usize, usize);

#[derive(Debug, Clone)]
pub struct ConfiguratorPolicy {
    pub dims: PolicyDims,
    off: Offsets,
    pub theta: Vec<f64>,
}

/// Masked softmax. Masked entries get probability 0.
pub fn masked_softmax(z: &[f64], mask: &[bool]) -> Vec<f64> {
    let m = z
        .iter()
        .zip(mask)
        .filter(|(_, &ok)| ok)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z
        .iter()
        .zip(mask)
        .map(|(&v, &ok)| if ok { (v - m).exp() } else { 0.0 })
        .collect();
    let s: f64 = p.iter().sum();
    for v in &mut p {
        *v /= s;
    }
    p
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

fn pick(p: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > 0.0 {
            acc += v;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

struct Trunk {
    h: Vec<f64>,
    e: Vec<f64>,
}

/// Forward values of one step for a fixed choice.
pub struct StepEval {
    pub log_prob: f64,
    /// Sum of the three head entropies along the choice.
    pub entropy: f64,
    probs: [Vec<f64>; 3],
    inputs: [Vec<f64>; 3],
    trunk: Trunk,
}

impl ConfiguratorPolicy {
    /// Small random weights, zero biases.
    pub fn new(dims: PolicyDims, rng: &mut SimRng) -> Self {
        let off = Offsets::new(&dims);
        let mut theta = vec![0.0; off.total];
        for b in [off.l1, off.l2, off.route, off.port, off.vessel] {
            let std = (1.0 / b.cols.max(1) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            for w in &mut theta[b.w..b.w + b.rows * b.cols] {
                *w = normal.sample(rng);
            }
        }
        // Start the heads near uniform.
        for b in [off.route, off.port, off.vessel] {
            for w in &mut theta[b.w..b.w + b.rows * b.cols] {
                *w *= 0.01;
            }
        }
        ConfiguratorPolicy { dims, off, theta }
    }

    /// All-zero parameters: every head is uniform over its unmasked entries.
    pub fn uniform(dims: PolicyDims) -> Self {
        let off = Offsets::new(&dims);
        ConfiguratorPolicy {
            dims,
            off,
            theta: vec![0.0; off.total],
        }
    }

    pub fn n_params(&self) -> usize {
        self.off.total
    }

    pub fn from_theta(dims: PolicyDims, theta: Vec<f64>) -> Result<Self> {
        let off = Offsets::new(&dims);
        if theta.len() != off.total {
            return Err(Error::Format {
                what: "checkpoint",
                message: format!(
                    "{} parameters for a policy that has {}",
                    theta.len(),
                    off.total
                ),
            });
        }
        Ok(ConfiguratorPolicy { dims, off, theta })
    }

    fn affine(&self, b: Block, u: &[f64]) -> Vec<f64> {
        let w = &self.theta[b.w..b.w + b.rows * b.cols];
        (0..b.rows)
            .map(|r| {
                let row = &w[r * b.cols..(r + 1) * b.cols];
                self.theta[b.b + r] + row.iter().zip(u).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect()
    }

    fn trunk(&self, x: &[f64]) -> Trunk {
        let h: Vec<f64> = self
            .affine(self.off.l1, x)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let e: Vec<f64> = self
            .affine(self.off.l2, &h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        Trunk { h, e }
    }

    fn port_input(&self, e: &[f64], route: usize) -> Vec<f64> {
        let mut u = e.to_vec();
        u.extend((0..self.dims.n_routes).map(|r| f64::from(u8::from(r == route))));
        u
    }

    fn vessel_input(&self, e: &[f64], route: usize, port: usize) -> Vec<f64> {
        let mut u = self.port_input(e, route);
        u.extend((0..self.dims.n_ports).map(|h| f64::from(u8::from(h == port))));
        u
    }

    pub fn route_probs(&self, s: &StepInput) -> Vec<f64> {
        let t = self.trunk(&s.x);
        masked_softmax(&self.affine(self.off.route, &t.e), &s.route_mask)
    }

    pub fn port_probs(&self, s: &StepInput, route: usize) -> Vec<f64> {
        let t = self.trunk(&s.x);
        masked_softmax(
            &self.affine(self.off.port, &self.port_input(&t.e, route)),
            &s.port_mask[route],
        )
    }

    pub fn vessel_probs(&self, s: &StepInput, route: usize, port: usize) -> Vec<f64> {
        let t = self.trunk(&s.x);
        masked_softmax(
            &self.affine(self.off.vessel, &self.vessel_input(&t.e, route, port)),
            &s.vessel_mask,
        )
    }

    fn check_masks(s: &StepInput) -> Result<()> {
        if !s.route_mask.iter().any(|&m| m) || !s.vessel_mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("every action is masked".into()));
        }
        Ok(())
    }

    /// Route, then port, then vessel, each from its masked head. With
    /// `greedy` every head takes its most likely entry.
    pub fn choose(&self, s: &StepInput, rng: &mut SimRng, greedy: bool) -> Result<(Choice, f64)> {
        Self::check_masks(s)?;
        let t = self.trunk(&s.x);
        let draw = |p: &[f64], rng: &mut SimRng| if greedy { argmax(p) } else { pick(p, rng) };
        let pr = masked_softmax(&self.affine(self.off.route, &t.e), &s.route_mask);
        let r = draw(&pr, rng);
        if !s.port_mask[r].iter().any(|&m| m) {
            return Err(Error::InvalidArgument(format!(
                "route {r} has no unmasked port"
            )));
        }
        let pp = masked_softmax(
            &self.affine(self.off.port, &self.port_input(&t.e, r)),
            &s.port_mask[r],
        );
        let h = draw(&pp, rng);
        let pv = masked_softmax(
            &self.affine(self.off.vessel, &self.vessel_input(&t.e, r, h)),
            &s.vessel_mask,
        );
        let v = draw(&pv, rng);
        Ok(((r, h, v), pr[r].ln() + pp[h].ln() + pv[v].ln()))
    }

    pub fn evaluate(&self, s: &StepInput, c: Choice) -> StepEval {
        let (r, h, _) = c;
        let trunk = self.trunk(&s.x);
        let inputs = [
            trunk.e.clone(),
            self.port_input(&trunk.e, r),
            self.vessel_input(&trunk.e, r, h),
        ];
        let probs = [
            masked_softmax(&self.affine(self.off.route, &inputs[0]), &s.route_mask),
            masked_softmax(&self.affine(self.off.port, &inputs[1]), &s.port_mask[r]),
            masked_softmax(&self.affine(self.off.vessel, &inputs[2]), &s.vessel_mask),
        ];
        let idx = [c.0, c.1, c.2];
        let log_prob = (0..3).map(|k| probs[k][idx[k]].ln()).sum();
        let entropy = probs.iter().map(|p| entropy(p)).sum();
        StepEval {
            log_prob,
            entropy,
            probs,
            inputs,
            trunk,
        }
    }

    /// Adds `g_logp * d(log_prob)/d(theta) + g_ent * d(entropy)/d(theta)`
    /// into `grad`.
    pub fn accumulate_grad(
        &self,
        s: &StepInput,
        c: Choice,
        ev: &StepEval,
        g_logp: f64,
        g_ent: f64,
        grad: &mut [f64],
    ) {
        let hid = self.dims.hidden;
        let idx = [c.0, c.1, c.2];
        let blocks = [self.off.route, self.off.port, self.off.vessel];
        let mut de = vec![0.0; hid];
        for k in 0..3 {
            let p = &ev.probs[k];
            let ent = entropy(p);
            let dz: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(i, &pi)| {
                    if pi <= 0.0 {
                        return 0.0;
                    }
                    let one = if i == idx[k] { 1.0 } else { 0.0 };
                    g_logp * (one - pi) - g_ent * pi * (pi.ln() + ent)
                })
                .collect();
            let b = blocks[k];
            let u = &ev.inputs[k];
            for (row, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[b.b + row] += d;
                let w0 = b.w + row * b.cols;
                for (j, &uj) in u.iter().enumerate() {
                    grad[w0 + j] += d * uj;
                }
                for (j, dej) in de.iter_mut().enumerate() {
                    *dej += d * self.theta[w0 + j];
                }
            }
        }
        let Trunk { h, e } = &ev.trunk;
        let da2: Vec<f64> = de.iter().zip(e).map(|(d, y)| d * (1.0 - y * y)).collect();
        let mut dh = vec![0.0; hid];
        let l2 = self.off.l2;
        for (row, &d) in da2.iter().enumerate() {
            grad[l2.b + row] += d;
            let w0 = l2.w + row * l2.cols;
            for j in 0..hid {
                grad[w0 + j] += d * h[j];
                dh[j] += d * self.theta[w0 + j];
            }
        }
        let l1 = self.off.l1;
        for (row, (&d, y)) in dh.iter().zip(h).enumerate() {
            let d = d * (1.0 - y * y);
            grad[l1.b + row] += d;
            let w0 = l1.w + row * l1.cols;
            for (j, &xj) in s.x.iter().enumerate() {
                grad[w0 + j] += d * xj;
            }
        }
    }
}

/// One sampled step with the log-probability it had when sampled and the
/// advantage of its episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: StepInput,
    pub choice: Choice,
    pub old_log_prob: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateParams {
    pub clip: f64,
    pub entropy_coef: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            clip: 0.2,
            entropy_coef: 0.01,
        }
    }
}

/// Mean clipped surrogate plus entropy bonus over `samples`, and its
/// gradient with respect to `theta`.
pub fn surrogate(
    pol: &ConfiguratorPolicy,
    samples: &[Sample],
    sp: SurrogateParams,
) -> (f64, Vec<f64>, f64) {
    let mut grad = vec![0.0; pol.n_params()];
    if samples.is_empty() {
        return (0.0, grad, 0.0);
    }
    let n = samples.len() as f64;
    let (mut obj, mut ent_sum) = (0.0, 0.0);
    for s in samples {
        let ev = pol.evaluate(&s.input, s.choice);
        let ratio = (ev.log_prob - s.old_log_prob).exp();
        let a = s.advantage;
        let clipped = ratio.clamp(1.0 - sp.clip, 1.0 + sp.clip);
        let (value, g_logp) = if ratio * a <= clipped * a {
            (ratio * a, ratio * a)
        } else {
            (clipped * a, 0.0)
        };
        obj += value + sp.entropy_coef * ev.entropy;
        ent_sum += ev.entropy;
        pol.accumulate_grad(
            &s.input,
            s.choice,
            &ev,
            g_logp / n,
            sp.entropy_coef / n,
            &mut grad,
        );
    }
    (obj / n, grad, ent_sum / n)
}

/// Plain Adam ascent on `theta`.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn ascend(&mut self, theta: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            theta[i] += self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn tiny_dims() -> PolicyDims {
        PolicyDims {
            n_in: 4,
            hidden: 3,
            n_routes: 2,
            n_ports: 3,
            n_vessels: 2,
        }
    }

    fn input(x: Vec<f64>, vessels: Vec<bool>) -> StepInput {
        StepInput {
            x,
            route_mask: vec![true, true],
            port_mask: vec![vec![true, true, false], vec![false, true, true]],
            vessel_mask: vessels,
        }
    }

    #[test]
    fn head_sizes_match_factorized_count() {
        let d = PolicyDims {
            n_in: 40,
            hidden: 64,
            n_routes: 13,
            n_ports: 22,
            n_vessels: 46,
        };
        assert_eq!(d.head_sizes(), 81);
        assert_eq!(d.n_routes * d.n_ports * d.n_vessels, 13156);
    }

    #[test]
    fn masked_softmax_normalizes_and_zeroes() {
        let p = masked_softmax(&[3.0, -1.0, 1e3, 0.5], &[true, true, false, true]);
        assert_eq!(p[2], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_vessel_left_is_deterministic() {
        let mut rng = rng_from(1);
        let pol = ConfiguratorPolicy::new(tiny_dims(), &mut rng);
        let s = input(vec![0.1, 0.2, 0.3, 0.4], vec![false, true]);
        for _ in 0..50 {
            let ((r, h, v), _) = pol.choose(&s, &mut rng, false).unwrap();
            assert_eq!(v, 1);
            assert!(s.port_mask[r][h]);
        }
        assert_eq!(pol.vessel_probs(&s, 0, 1), vec![0.0, 1.0]);
    }

    #[test]
    fn all_masked_is_an_error() {
        let pol = ConfiguratorPolicy::uniform(tiny_dims());
        let s = input(vec![0.0; 4], vec![false, false]);
        assert!(pol.choose(&s, &mut rng_from(0), false).is_err());
    }

    #[test]
    fn log_prob_matches_choose() {
        let mut rng = rng_from(4);
        let pol = ConfiguratorPolicy::new(tiny_dims(), &mut rng);
        let s = input(vec![0.5, -0.2, 0.3, 1.0], vec![true, true]);
        for _ in 0..20 {
            let (c, lp) = pol.choose(&s, &mut rng, false).unwrap();
            assert!((pol.evaluate(&s, c).log_prob - lp).abs() < 1e-12);
        }
    }

    fn samples(pol: &ConfiguratorPolicy, rng: &mut SimRng) -> Vec<Sample> {
        let mut out = Vec::new();
        for i in 0..8 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = input(x, vec![true, i % 3 != 0]);
            let (c, lp) = pol.choose(&s, rng, false).unwrap();
            // Old log-probs a little off the current ones so that some
            // ratios are clipped and some are not.
            let shift = [0.05, -0.4, 0.3, -0.02][i % 4];
            out.push(Sample {
                input: s,
                choice: c,
                old_log_prob: lp + shift,
                advantage: [1.0, -0.7][i % 2],
            });
        }
        out
    }

    #[test]
    fn surrogate_gradient_matches_central_differences() {
        let mut rng = rng_from(9);
        let pol = ConfiguratorPolicy::new(tiny_dims(), &mut rng);
        let batch = samples(&pol, &mut rng);
        let sp = SurrogateParams::default();
        let (_, g, _) = surrogate(&pol, &batch, sp);
        let eps = 1e-6;
        let num: Vec<f64> = (0..g.len())
            .map(|i| {
                let mut plus = pol.clone();
                plus.theta[i] += eps;
                let mut minus = pol.clone();
                minus.theta[i] -= eps;
                (surrogate(&plus, &batch, sp).0 - surrogate(&minus, &batch, sp).0) / (2.0 * eps)
            })
            .collect();
        let diff: f64 = g
            .iter()
            .zip(&num)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = g
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(num.iter().map(|a| a * a).sum::<f64>().sqrt());
        assert!(diff / scale < 1e-4, "relative error {}", diff / scale);
    }

    #[test]
    fn adam_climbs_a_concave_bowl() {
        let mut theta = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = theta.iter().map(|t| -2.0 * (t - 1.0)).collect();
            opt.ascend(&mut theta, &g);
        }
        assert!(theta.iter().all(|t| (t - 1.0).abs() < 1e-2), "{theta:?}");
    }
}
