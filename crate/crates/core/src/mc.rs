//! Monte Carlo oracle.
//!
//! Trials simulate the full measurement vector `Z = X·b + ε`, substitute the
//! false points and compare residual costs by direct regression. Nothing here
//! touches the closed forms it is used to check.
//!
//! Trial `t` draws from its own ChaCha8 stream (key from `seed`, stream `t`):
//! the 2(N+1) noises in scan order (x then y), then one λ per false scan when
//! λ is random. Trials are processed in fixed chunks whose results are
//! reduced in chunk order, so any thread count gives identical output.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dtmc::AssocDtmc;
use crate::error::{check_param, Error, Result};
use crate::geometry::{build_projector, FalseAssocSet, ResidualCost, ScanConfig};

const CHUNK: u64 = 4096;

/// Per-trial random stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaLaw {
    /// Use the offsets stored in the false-association set.
    Fixed,
    /// Each false scan gets an independent λ ~ 𝒩(mean, sd²) per trial.
    Normal { mean: f64, sd: f64 },
}

/// True track: position `origin + velocity·τ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scenario {
    pub origin: [f64; 2],
    pub velocity: [f64; 2],
}

impl Scenario {
    pub fn with_speed(speed: f64) -> Self {
        Self { origin: [0.0, 0.0], velocity: [speed, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub trials: u64,
    pub seed: u64,
    pub config: ScanConfig,
    pub fa: FalseAssocSet,
    pub lambda_law: LambdaLaw,
    pub scenario: Scenario,
}

impl TrialPlan {
    /// One false scan `l` at the config's λ.
    pub fn single(config: ScanConfig, l: usize, trials: u64, seed: u64) -> Result<Self> {
        let fa = FalseAssocSet::new(vec![l], vec![config.lambda()])?;
        Self::multi(config, fa, trials, seed)
    }

    pub fn multi(config: ScanConfig, fa: FalseAssocSet, trials: u64, seed: u64) -> Result<Self> {
        let plan = Self { trials, seed, config, fa, lambda_law: LambdaLaw::Fixed, scenario: Scenario::default() };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_lambda_law(mut self, law: LambdaLaw) -> Result<Self> {
        self.lambda_law = law;
        self.validate()?;
        Ok(self)
    }

    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter { name: "trials", value: 0.0, reason: "at least one trial" });
        }
        self.fa.validate(&self.config)?;
        if let LambdaLaw::Normal { mean, sd } = self.lambda_law {
            check_param("lambda_mean", mean, true, "")?;
            check_param("lambda_sd", sd, sd >= 0.0, "must be nonnegative")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub trials: u64,
    pub successes: u64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self { p_hat: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), trials, successes }
    }

    /// (value − p̂)/stderr; infinite when stderr is zero and the value differs.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = value - self.p_hat;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Sample mean and variance with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub var: f64,
    pub mean_stderr: f64,
    pub var_stderr: f64,
}

impl MomentEstimate {
    /// Two-pass central moments; the variance stderr uses √((μ₄ − σ⁴)/n).
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &x in xs {
            let d2 = (x - mean).powi(2);
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= n;
        m4 /= n;
        let var = m2 * n / (n - 1.0);
        Self { mean, var, mean_stderr: (var / n).sqrt(), var_stderr: ((m4 - m2 * m2).max(0.0) / n).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiFaEstimate {
    pub estimate: McEstimate,
    /// m₁ = eᵀℳe − faᵀℳfa over the contaminated blocks.
    pub m1: MomentEstimate,
    /// v₁ = 4(e − fa)ᵀΘ(e − fa).
    pub v1: MomentEstimate,
}

struct Simulator<'a> {
    plan: &'a TrialPlan,
    cost: ResidualCost,
    truth: DVector<f64>,
    m_ff: DMatrix<f64>,
    theta: DMatrix<f64>,
}

struct TrialOutcome {
    delta: f64,
    m1: f64,
    v1: f64,
}

impl<'a> Simulator<'a> {
    fn new(plan: &'a TrialPlan) -> Result<Self> {
        plan.validate()?;
        let cfg = &plan.config;
        let geo = build_projector(cfg)?;
        let dim = 2 * cfg.epochs();
        let mut truth = DVector::zeros(dim);
        for j in 0..cfg.epochs() {
            let tau = j as f64 * cfg.dt();
            truth[2 * j] = plan.scenario.origin[0] + plan.scenario.velocity[0] * tau;
            truth[2 * j + 1] = plan.scenario.origin[1] + plan.scenario.velocity[1] * tau;
        }
        let rows: Vec<usize> = plan.fa.indices().iter().flat_map(|&l| [2 * l, 2 * l + 1]).collect();
        let rest: Vec<usize> = (0..dim).filter(|r| !rows.contains(r)).collect();
        let m_ff = geo.projector.select_rows(&rows).select_columns(&rows);
        let h_fr = geo.hat.select_rows(&rows).select_columns(&rest);
        let theta = &h_fr * h_fr.transpose();
        Ok(Self { plan, cost: ResidualCost::new(cfg), truth, m_ff, theta })
    }

    fn run(&self, trial: u64) -> TrialOutcome {
        let mut rng = trial_rng(self.plan.seed, trial);
        let dim = self.truth.len();
        let noise = DVector::<f64>::from_fn(dim, |_, _| rng.sample(StandardNormal));
        let k = self.plan.fa.len();
        let lambdas: Vec<f64> = match self.plan.lambda_law {
            LambdaLaw::Fixed => self.plan.fa.lambdas().to_vec(),
            LambdaLaw::Normal { mean, sd } => (0..k).map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let z_ca = &self.truth + &noise;
        let mut z_fa = z_ca.clone();
        let mut e = DVector::zeros(2 * k);
        let mut fa = DVector::zeros(2 * k);
        for (i, (&l, &lam)) in self.plan.fa.indices().iter().zip(&lambdas).enumerate() {
            z_fa[2 * l] = self.truth[2 * l];
            z_fa[2 * l + 1] = self.truth[2 * l + 1] - lam;
            e[2 * i] = noise[2 * l];
            e[2 * i + 1] = noise[2 * l + 1];
            fa[2 * i + 1] = -lam;
        }
        let delta = self.cost.cost(&z_fa) - self.cost.cost(&z_ca);
        let m1 = self.m_ff.dot(&(&e * e.transpose())) - self.m_ff.dot(&(&fa * fa.transpose()));
        let d = &e - &fa;
        let v1 = 4.0 * d.dot(&(&self.theta * &d));
        TrialOutcome { delta, m1, v1 }
    }

    /// Outcomes in trial order.
    fn outcomes(&self) -> Vec<TrialOutcome> {
        let trials = self.plan.trials;
        let chunks = trials.div_ceil(CHUNK);
        let parts: Vec<Vec<TrialOutcome>> = (0..chunks)
            .into_par_iter()
            .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(trials)).map(|t| self.run(t)).collect())
            .collect();
        parts.into_iter().flatten().collect()
    }

    fn count(&self) -> u64 {
        let trials = self.plan.trials;
        let chunks = trials.div_ceil(CHUNK);
        let counts: Vec<u64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(trials))
                    .filter(|&t| self.run(t).delta >= 0.0)
                    .count() as u64
            })
            .collect();
        counts.into_iter().sum()
    }
}

/// P̂(Δ ≥ 0) for a single false scan.
pub fn simulate_single_fa(plan: &TrialPlan) -> Result<McEstimate> {
    if plan.fa.len() != 1 {
        return Err(Error::InvalidSet(format!("single-FA plan needs one scan, got {}", plan.fa.len())));
    }
    let sim = Simulator::new(plan)?;
    Ok(McEstimate::from_counts(sim.count(), plan.trials))
}

/// P̂(Δ ≥ 0) for K false scans, with the empirical moments of m₁ and v₁.
pub fn simulate_multi_fa(plan: &TrialPlan) -> Result<MultiFaEstimate> {
    let sim = Simulator::new(plan)?;
    let out = sim.outcomes();
    let successes = out.iter().filter(|o| o.delta >= 0.0).count() as u64;
    let m1: Vec<f64> = out.iter().map(|o| o.m1).collect();
    let v1: Vec<f64> = out.iter().map(|o| o.v1).collect();
    Ok(MultiFaEstimate {
        estimate: McEstimate::from_counts(successes, plan.trials),
        m1: MomentEstimate::from_samples(&m1),
        v1: MomentEstimate::from_samples(&v1),
    })
}

/// Raw Δ samples in trial order.
pub fn simulate_deltas(plan: &TrialPlan) -> Result<Vec<f64>> {
    let sim = Simulator::new(plan)?;
    Ok(sim.outcomes().into_iter().map(|o| o.delta).collect())
}

/// Δ samples with the noise at scan `l` pinned to `e`; the remaining scans
/// are drawn as usual.
pub fn simulate_conditional_delta(config: &ScanConfig, l: usize, e: [f64; 2], trials: u64, seed: u64) -> Result<Vec<f64>> {
    let plan = TrialPlan::single(*config, l, trials, seed)?;
    let sim = Simulator::new(&plan)?;
    let lam = config.lambda();
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(trials))
                .map(|t| {
                    let mut rng = trial_rng(seed, t);
                    let mut z_ca = DVector::<f64>::from_fn(sim.truth.len(), |_, _| rng.sample(StandardNormal));
                    z_ca[2 * l] = e[0];
                    z_ca[2 * l + 1] = e[1];
                    let mut z_fa = z_ca.clone();
                    z_fa[2 * l] = 0.0;
                    z_fa[2 * l + 1] = -lam;
                    sim.cost.cost(&z_fa) - sim.cost.cost(&z_ca)
                })
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// Occupancy and return-time statistics of a simulated decision window.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyStats {
    /// Fraction of steps spent in each window state.
    pub occupancy: Vec<f64>,
    /// Batch-means standard errors of `occupancy`.
    pub occupancy_stderr: Vec<f64>,
    /// Mean return time to the all-false state (`None` if fewer than two returns).
    pub mean_return: Option<f64>,
    pub return_stderr: f64,
    pub returns: u64,
}

const BATCH: u64 = 1024;

/// Runs `runs` chains of `steps` steps over the last-`k` decisions, each
/// decision false with probability `p_fa`, all starting from the all-correct
/// state. Decisions are drawn directly; no transition matrix is used.
pub fn simulate_window(k: usize, p_fa: f64, steps: u64, runs: u64, seed: u64) -> Result<OccupancyStats> {
    check_param("p_fa", p_fa, (0.0..=1.0).contains(&p_fa), "must lie in [0, 1]")?;
    if k == 0 || k > 16 {
        return Err(Error::InvalidParameter { name: "k", value: k as f64, reason: "window must be in 1..=16" });
    }
    if steps < 2 * BATCH || runs == 0 {
        return Err(Error::InvalidParameter { name: "steps", value: steps as f64, reason: "need at least two batches and one run" });
    }
    let states = 1usize << k;
    let mask = states - 1;
    struct Run {
        batches: Vec<Vec<u64>>,
        returns: Vec<u64>,
    }
    let runs_out: Vec<Run> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(seed, r);
            let mut s = 0usize;
            let mut batches = Vec::new();
            let mut cur = vec![0u64; states];
            let mut returns = Vec::new();
            let mut last_hit: Option<u64> = None;
            for t in 1..=steps {
                let bit = rng.gen::<f64>() < p_fa;
                s = ((s << 1) & mask) | bit as usize;
                cur[s] += 1;
                if s == mask {
                    if let Some(prev) = last_hit {
                        returns.push(t - prev);
                    }
                    last_hit = Some(t);
                }
                if t % BATCH == 0 {
                    batches.push(std::mem::replace(&mut cur, vec![0u64; states]));
                }
            }
            Run { batches, returns }
        })
        .collect();
    let batches: Vec<&Vec<u64>> = runs_out.iter().flat_map(|r| r.batches.iter()).collect();
    let nb = batches.len() as f64;
    let mut occupancy = vec![0.0; states];
    let mut occupancy_stderr = vec![0.0; states];
    for st in 0..states {
        let fr: Vec<f64> = batches.iter().map(|b| b[st] as f64 / BATCH as f64).collect();
        let m = fr.iter().sum::<f64>() / nb;
        let v = fr.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nb - 1.0);
        occupancy[st] = m;
        occupancy_stderr[st] = (v / nb).sqrt();
    }
    let rets: Vec<f64> = runs_out.iter().flat_map(|r| r.returns.iter().map(|&x| x as f64)).collect();
    let (mean_return, return_stderr) = if rets.len() >= 2 {
        let me = MomentEstimate::from_samples(&rets);
        (Some(me.mean), me.mean_stderr)
    } else {
        (None, f64::NAN)
    };
    Ok(OccupancyStats { occupancy, occupancy_stderr, mean_return, return_stderr, returns: rets.len() as u64 })
}

/// Two-decision chain: states (1)..(4) stored 0-based.
pub fn simulate_dtmc(d: &AssocDtmc, steps: u64, runs: u64, seed: u64) -> Result<OccupancyStats> {
    simulate_window(2, d.p_fa(), steps, runs, seed)
}

/// Absorption times into the all-false window state.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionStats {
    /// Steps until absorption for each run that was absorbed within the cap.
    pub times: Vec<u64>,
    /// Runs still transient after `max_steps`.
    pub censored: u64,
    pub runs: u64,
}

impl AbsorptionStats {
    /// Mean absorption time and its stderr (absorbed runs only).
    pub fn mean(&self) -> Option<MomentEstimate> {
        if self.times.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = self.times.iter().map(|&t| t as f64).collect();
        Some(MomentEstimate::from_samples(&xs))
    }

    /// Fraction of runs absorbed within `n` steps.
    pub fn reach_within(&self, n: u64) -> McEstimate {
        McEstimate::from_counts(self.times.iter().filter(|&&t| t <= n).count() as u64, self.runs)
    }
}

/// Runs the absorbing window chain from `start` until the all-false state
/// is entered or `max_steps` elapse.
pub fn simulate_absorption(k: usize, p_fa: f64, start: usize, runs: u64, max_steps: u64, seed: u64) -> Result<AbsorptionStats> {
    check_param("p_fa", p_fa, (0.0..=1.0).contains(&p_fa), "must lie in [0, 1]")?;
    if k == 0 || k > 16 {
        return Err(Error::InvalidParameter { name: "k", value: k as f64, reason: "window must be in 1..=16" });
    }
    let mask = (1usize << k) - 1;
    if start >= mask {
        return Err(Error::IndexOutOfRange { index: start, max: mask - 1 });
    }
    if runs == 0 {
        return Err(Error::InvalidParameter { name: "runs", value: 0.0, reason: "at least one run" });
    }
    let out: Vec<Option<u64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(seed, r);
            let mut s = start;
            for t in 1..=max_steps {
                let bit = rng.gen::<f64>() < p_fa;
                s = ((s << 1) & mask) | bit as usize;
                if s == mask {
                    return Some(t);
                }
            }
            None
        })
        .collect();
    let times: Vec<u64> = out.iter().flatten().copied().collect();
    let censored = runs - times.len() as u64;
    Ok(AbsorptionStats { times, censored, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, lambda: f64) -> ScanConfig {
        ScanConfig::new(n, 1.0, lambda).unwrap()
    }

    #[test]
    fn stderr_matches_binomial() {
        let e = McEstimate::from_counts(250, 1000);
        assert_eq!(e.p_hat, 0.25);
        assert!((e.stderr - (0.25f64 * 0.75 / 1000.0).sqrt()).abs() < 1e-15);
        assert_eq!(McEstimate::from_counts(0, 10).z_score(0.0), 0.0);
    }

    #[test]
    fn far_outlier_is_always_rejected() {
        let plan = TrialPlan::single(cfg(20, 10.0), 20, 100_000, 1).unwrap();
        assert!(simulate_single_fa(&plan).unwrap().p_hat >= 0.999);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let plan = TrialPlan::single(cfg(20, 2.0), 20, 10_000, 9).unwrap();
        assert_eq!(simulate_single_fa(&plan).unwrap(), simulate_single_fa(&plan).unwrap());
        let other = TrialPlan::single(cfg(20, 2.0), 20, 10_000, 10).unwrap();
        assert_ne!(simulate_deltas(&plan).unwrap(), simulate_deltas(&other).unwrap());
    }

    #[test]
    fn single_is_multi_with_one_scan() {
        let plan = TrialPlan::single(cfg(20, 1.5), 7, 20_000, 3).unwrap();
        assert_eq!(simulate_single_fa(&plan).unwrap(), simulate_multi_fa(&plan).unwrap().estimate);
        assert!(simulate_single_fa(&TrialPlan::multi(cfg(20, 1.0), FalseAssocSet::uniform(vec![1, 2], 1.0).unwrap(), 10, 0).unwrap()).is_err());
    }

    #[test]
    fn absorption_never_happens_without_false_associations() {
        let s = simulate_absorption(2, 0.0, 0, 100, 1000, 5).unwrap();
        assert_eq!(s.censored, 100);
        assert!(s.mean().is_none());
        let occ = simulate_window(2, 0.0, 4096, 2, 5).unwrap();
        assert_eq!(occ.occupancy[3], 0.0);
        assert_eq!(occ.occupancy[0], 1.0);
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(TrialPlan::single(cfg(20, 1.0), 21, 10, 0).is_err());
        assert!(TrialPlan::single(cfg(20, 1.0), 3, 0, 0).is_err());
        let p = TrialPlan::single(cfg(20, 1.0), 3, 10, 0).unwrap();
        assert!(p.with_lambda_law(LambdaLaw::Normal { mean: 1.0, sd: -1.0 }).is_err());
    }
}
