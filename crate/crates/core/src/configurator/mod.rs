//! Fleet configuration as a construction process: one vessel is placed per
//! step, and a learned policy picks the route, then a stop on it, then the
//! vessel. Episodes earn a single terminal reward, the evaluated
//! fulfillment of the finished configuration under a cheap algorithm.

mod net;

pub use net::{
    masked_softmax, surrogate, Adam, Choice, ConfiguratorPolicy, PolicyDims, Sample, StepInput,
    SurrogateParams,
};

use crate::domain::{Deployment, FleetConfiguration, Layout, Topology};
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::seed::{derive_seed, stream, SimRng};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &str = "ecrfd-configurator";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CURVE_HEADER: &str = "iteration,mean_reward,best_reward,entropy";

/// `(vessel, route, port)` indices into the topology's lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub vessel: usize,
    pub route: usize,
    pub port: usize,
}

/// Topology facts the construction process needs.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    pub topology: Topology,
    pub layout: Layout,
    /// Share of mean demand between two stops of each route.
    pub demand_share: Vec<f64>,
    total_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfState {
    pub step: usize,
    /// Per vessel `(route, port)`; `None` until assigned.
    pub assigned: Vec<Option<(usize, usize)>>,
    pub features: Vec<f64>,
}

impl ConfState {
    pub fn is_terminal(&self) -> bool {
        self.step == self.assigned.len()
    }
}

impl ConfigSpace {
    pub fn new(t: &Topology) -> Result<Self> {
        let layout = Layout::new(t)?;
        let days = layout.horizon.max(1);
        let mut share = vec![0.0; layout.routes.len()];
        let mut total = 0.0;
        for pair in &layout.pairs {
            let mean: f64 =
                (0..days).map(|d| pair.model.clipped_mean(d)).sum::<f64>() / f64::from(days);
            total += mean;
            for (r, route) in layout.routes.iter().enumerate() {
                if route.visits(pair.origin) && route.visits(pair.destination) {
                    share[r] += mean;
                }
            }
        }
        if total > 0.0 {
            for s in &mut share {
                *s /= total;
            }
        }
        let total_capacity = layout
            .vessels
            .iter()
            .map(|v| v.capacity as f64)
            .sum::<f64>()
            .max(1.0);
        Ok(ConfigSpace {
            topology: t.clone(),
            layout,
            demand_share: share,
            total_capacity,
        })
    }

    pub fn n_vessels(&self) -> usize {
        self.layout.vessels.len()
    }

    pub fn n_routes(&self) -> usize {
        self.layout.routes.len()
    }

    pub fn n_features(&self) -> usize {
        3 * self.n_routes() + 1
    }

    pub fn reset(&self) -> ConfState {
        let mut s = ConfState {
            step: 0,
            assigned: vec![None; self.n_vessels()],
            features: Vec::new(),
        };
        s.features = self.features(&s);
        s
    }

    /// `[vessels per route, capacity per route, step / |V|, demand share per route]`.
    pub fn features(&self, s: &ConfState) -> Vec<f64> {
        let e = self.n_routes();
        let mut count = vec![0.0; e];
        let mut cap = vec![0.0; e];
        for (v, a) in s.assigned.iter().enumerate() {
            if let Some((r, _)) = *a {
                count[r] += 1.0;
                cap[r] += self.layout.vessels[v].capacity as f64;
            }
        }
        let mut f = count;
        f.extend(cap);
        f.push(s.step as f64 / self.n_vessels().max(1) as f64);
        f.extend(&self.demand_share);
        f
    }

    /// Features scaled to order one for the policy network.
    pub fn normalized(&self, features: &[f64]) -> Vec<f64> {
        let e = self.n_routes();
        let v = self.n_vessels().max(1) as f64;
        features
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if i < e {
                    x / v
                } else if i < 2 * e {
                    x / self.total_capacity
                } else {
                    x
                }
            })
            .collect()
    }

    pub fn dims(&self, hidden: usize) -> PolicyDims {
        PolicyDims {
            n_in: self.n_features(),
            hidden,
            n_routes: self.n_routes(),
            n_ports: self.layout.ports.len(),
            n_vessels: self.n_vessels(),
        }
    }

    pub fn step_input(&self, s: &ConfState) -> StepInput {
        let n_ports = self.layout.ports.len();
        let vessel_mask: Vec<bool> = s.assigned.iter().map(Option::is_none).collect();
        let open = vessel_mask.iter().any(|&m| m);
        StepInput {
            x: self.normalized(&s.features),
            route_mask: self
                .layout
                .routes
                .iter()
                .map(|r| open && !r.stops.is_empty())
                .collect(),
            port_mask: self
                .layout
                .routes
                .iter()
                .map(|r| (0..n_ports).map(|h| r.visits(h)).collect())
                .collect(),
            vessel_mask,
        }
    }

    pub fn is_feasible(&self, s: &ConfState, t: Triple) -> bool {
        t.vessel < self.n_vessels()
            && t.route < self.n_routes()
            && s.assigned[t.vessel].is_none()
            && self.layout.routes[t.route].visits(t.port)
    }

    /// Record `t` in a copy of `s`.
    pub fn assign(&self, s: &ConfState, t: Triple) -> Result<ConfState> {
        if s.is_terminal() || !self.is_feasible(s, t) {
            return Err(Error::InvalidArgument(format!(
                "infeasible assignment {t:?} at step {}",
                s.step
            )));
        }
        let mut next = s.clone();
        next.assigned[t.vessel] = Some((t.route, t.port));
        next.step += 1;
        next.features = self.features(&next);
        Ok(next)
    }

    /// Reward 0 until the last vessel is placed, then the evaluated
    /// fulfillment of the finished configuration divided by 100.
    pub fn step(
        &self,
        s: &ConfState,
        t: Triple,
        evaluator: &mut Evaluator,
        seed: u64,
    ) -> Result<(ConfState, f64)> {
        let next = self.assign(s, t)?;
        if !next.is_terminal() {
            return Ok((next, 0.0));
        }
        let d = self.deployment(&next)?;
        let e = evaluator.evaluate_deployment(&d, seed)?;
        Ok((next, e.fulfillment_pct / 100.0))
    }

    pub fn deployment(&self, s: &ConfState) -> Result<Deployment> {
        let mut d = Deployment {
            route: Vec::new(),
            start: Vec::new(),
        };
        for a in &s.assigned {
            let (r, h) =
                a.ok_or_else(|| Error::InvalidArgument("configuration is incomplete".into()))?;
            d.route.push(r);
            d.start
                .push(self.layout.routes[r].position(h).expect("feasible port"));
        }
        Ok(d)
    }

    pub fn configuration(&self, s: &ConfState) -> Result<FleetConfiguration> {
        Ok(self.layout.configuration(&self.deployment(s)?))
    }
}

pub fn config_mdp_reset(t: &Topology) -> Result<ConfState> {
    Ok(ConfigSpace::new(t)?.reset())
}

/// Sample one triple; the log-probability is the sum over the three heads.
pub fn autoregressive_sample(
    pol: &ConfiguratorPolicy,
    space: &ConfigSpace,
    s: &ConfState,
    rng: &mut SimRng,
) -> Result<(Triple, f64)> {
    if s.is_terminal() {
        return Err(Error::InvalidArgument(
            "configuration already complete".into(),
        ));
    }
    let ((route, port, vessel), lp) = pol.choose(&space.step_input(s), rng, false)?;
    Ok((
        Triple {
            vessel,
            route,
            port,
        },
        lp,
    ))
}

/// Every head takes its most likely entry.
pub fn greedy_configuration(
    pol: &ConfiguratorPolicy,
    space: &ConfigSpace,
) -> Result<FleetConfiguration> {
    let mut s = space.reset();
    let mut rng = stream(0, 0);
    while !s.is_terminal() {
        let ((route, port, vessel), _) = pol.choose(&space.step_input(&s), &mut rng, true)?;
        s = space.assign(
            &s,
            Triple {
                vessel,
                route,
                port,
            },
        )?;
    }
    space.configuration(&s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub iterations: usize,
    pub batch_size: usize,
    /// Rollouts per configuration evaluation.
    pub eval_episodes: usize,
    /// Optimization passes over each batch.
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub surrogate: SurrogateParams,
    /// Weight of the newest batch in the running-mean baseline.
    pub baseline_rate: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            iterations: 30,
            batch_size: 32,
            eval_episodes: 2,
            epochs: 4,
            lr: 3e-3,
            hidden: 64,
            surrogate: SurrogateParams::default(),
            baseline_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainParams {
    /// Iterations that fit in `budget` requested rollouts.
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.iterations = budget / (self.batch_size * self.eval_episodes).max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_reward: f64,
    pub best_reward: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub history: Vec<IterationStats>,
    /// Best evaluated configuration and its reward, earliest on ties.
    pub best: Option<(FleetConfiguration, f64)>,
    /// Configurations sampled and evaluated, cached or not.
    pub evaluations: usize,
    /// Rollouts actually run.
    pub rollouts: usize,
    pub distinct: usize,
}

impl TrainReport {
    fn offer(&mut self, p: &FleetConfiguration, reward: f64) {
        if self.best.as_ref().is_none_or(|(_, b)| reward > *b) {
            self.best = Some((p.clone(), reward));
        }
    }

    pub fn curve_csv(&self) -> String {
        let mut out = format!("{CURVE_HEADER}\n");
        for h in &self.history {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                h.iteration, h.mean_reward, h.best_reward, h.entropy
            );
        }
        out
    }
}

pub fn extract_best_configuration(report: &TrainReport) -> Result<FleetConfiguration> {
    report
        .best
        .as_ref()
        .map(|(p, _)| p.clone())
        .ok_or(Error::EmptyReport)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Clipped-surrogate policy gradient on the construction process with a
/// running-mean baseline. Every sampled configuration is evaluated with
/// `evaluator` under one fixed evaluation seed, so repeats hit the cache.
/// One construction step: input, choice and its log-probability.
type Step = (StepInput, Choice, f64);

pub fn train_configurator(
    space: &ConfigSpace,
    evaluator: &mut Evaluator,
    params: &TrainParams,
) -> Result<(ConfiguratorPolicy, TrainReport)> {
    let mut pol = ConfiguratorPolicy::new(space.dims(params.hidden), &mut stream(params.seed, 10));
    let mut rng = stream(params.seed, 11);
    let eval_seed = derive_seed(params.seed, 12);
    let mut opt = Adam::new(pol.n_params(), params.lr);
    let mut report = TrainReport::default();
    let mut baseline: Option<f64> = None;
    let start_rollouts = evaluator.rollouts;
    let mut seen: HashSet<Deployment> = HashSet::new();

    for iteration in 0..params.iterations {
        let mut episodes: Vec<(Vec<Step>, f64)> = Vec::with_capacity(params.batch_size);
        for _ in 0..params.batch_size {
            let mut s = space.reset();
            let mut steps = Vec::with_capacity(space.n_vessels());
            let mut reward = 0.0;
            while !s.is_terminal() {
                let input = space.step_input(&s);
                let (choice, lp) = pol.choose(&input, &mut rng, false)?;
                let (route, port, vessel) = choice;
                let (next, r) = space.step(
                    &s,
                    Triple {
                        vessel,
                        route,
                        port,
                    },
                    evaluator,
                    eval_seed,
                )?;
                steps.push((input, choice, lp));
                reward += r;
                s = next;
            }
            report.evaluations += 1;
            seen.insert(space.deployment(&s)?);
            report.offer(&space.configuration(&s)?, reward);
            episodes.push((steps, reward));
        }

        let rewards: Vec<f64> = episodes.iter().map(|(_, r)| *r).collect();
        let (mean, std) = mean_std(&rewards);
        if !mean.is_finite() {
            return Err(Error::Diverged(format!(
                "mean reward {mean} at iteration {iteration}"
            )));
        }
        let b = baseline.map_or(mean, |b| b + params.baseline_rate * (mean - b));
        let scale = if std > 1e-12 { std } else { f64::INFINITY };
        let samples: Vec<Sample> = episodes
            .into_iter()
            .flat_map(|(steps, r)| {
                let advantage = (r - b) / scale;
                steps
                    .into_iter()
                    .map(move |(input, choice, old_log_prob)| Sample {
                        input,
                        choice,
                        old_log_prob,
                        advantage,
                    })
            })
            .collect();
        baseline = Some(b);

        let mut grad_norm = 0.0;
        let mut entropy = 0.0;
        for epoch in 0..params.epochs.max(1) {
            let (_, grad, ent) = net::surrogate(&pol, &samples, params.surrogate);
            if epoch == 0 {
                grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                entropy = ent;
            }
            if !grad_norm.is_finite() {
                return Err(Error::Diverged(format!(
                    "gradient norm {grad_norm} at iteration {iteration}"
                )));
            }
            opt.ascend(&mut pol.theta, &grad);
        }
        report.history.push(IterationStats {
            iteration,
            mean_reward: mean,
            best_reward: report.best.as_ref().map_or(mean, |(_, r)| *r),
            entropy,
            grad_norm,
        });
    }
    report.rollouts = evaluator.rollouts - start_rollouts;
    report.distinct = seen.len();
    Ok((pol, report))
}

/// Text checkpoint: a header line `ecrfd-configurator <version>`, then
/// `fingerprint <u64>`, `dims <n_in> <hidden> <routes> <ports> <vessels>`,
/// `params <n>` and one parameter per line in shortest round-trip form.
pub fn checkpoint_string(pol: &ConfiguratorPolicy, fingerprint: u64) -> String {
    let d = pol.dims;
    let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\nfingerprint {fingerprint}\n");
    let _ = writeln!(
        out,
        "dims {} {} {} {} {}",
        d.n_in, d.hidden, d.n_routes, d.n_ports, d.n_vessels
    );
    let _ = writeln!(out, "params {}", pol.theta.len());
    for v in &pol.theta {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<(ConfiguratorPolicy, u64)> {
    let bad = |m: String| Error::Format {
        what: "checkpoint",
        message: m,
    };
    let mut lines = text.lines();
    let mut field = |name: &str| -> Result<Vec<String>> {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing {name} line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(format!("expected {name}, found \"{line}\"")));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let version = field(CHECKPOINT_MAGIC)?;
    if version != [CHECKPOINT_VERSION.to_string()] {
        return Err(bad(format!("unsupported version {version:?}")));
    }
    let num = |v: &str| v.parse::<u64>().map_err(|e| bad(format!("{v}: {e}")));
    let fingerprint = num(field("fingerprint")?.first().map_or("", String::as_str))?;
    let dims: Vec<usize> = field("dims")?
        .iter()
        .map(|v| num(v).map(|x| x as usize))
        .collect::<Result<_>>()?;
    if dims.len() != 5 {
        return Err(bad("dims needs five values".into()));
    }
    let n = num(field("params")?.first().map_or("", String::as_str))? as usize;
    let theta: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("{l}: {e}")))
        })
        .collect::<Result<_>>()?;
    if theta.len() != n {
        return Err(bad(format!(
            "{} parameters listed, header says {n}",
            theta.len()
        )));
    }
    let dims = PolicyDims {
        n_in: dims[0],
        hidden: dims[1],
        n_routes: dims[2],
        n_ports: dims[3],
        n_vessels: dims[4],
    };
    Ok((ConfiguratorPolicy::from_theta(dims, theta)?, fingerprint))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    pol: &ConfiguratorPolicy,
    fingerprint: u64,
) -> Result<()> {
    std::fs::write(path, checkpoint_string(pol, fingerprint))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ConfiguratorPolicy, u64)> {
    parse_checkpoint(&crate::domain::read_file(path.as_ref())?)
}
