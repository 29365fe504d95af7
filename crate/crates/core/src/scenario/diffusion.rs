//! Bass diffusion: closed form and the agent-based discrete-time process.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionParams {
    /// Coefficient of innovation, 1/year.
    pub p_innov: f64,
    /// Coefficient of imitation, 1/year.
    pub q_imit: f64,
    /// Step length, years.
    pub dt: f64,
    /// Simulated span, years.
    pub horizon: f64,
    pub seed: u64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            p_innov: 0.01,
            q_imit: 0.4,
            dt: 1.0 / 12.0,
            horizon: 10.0,
            seed: 0,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.p_innov > 0.0 && self.p_innov.is_finite()) {
            return bad("p_innov must be > 0");
        }
        if !(self.q_imit >= 0.0 && self.q_imit.is_finite()) {
            return bad("q_imit must be >= 0");
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return bad("dt must lie in (0, 1]");
        }
        if !((self.p_innov + self.q_imit) * self.dt < 1.0) {
            return bad("(p_innov + q_imit) * dt must be < 1");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be >= 0");
        }
        Ok(())
    }

    /// Number of whole steps covering the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Closed-form fraction of adopters at time `t`.
pub fn bass_closed_form(params: &DiffusionParams, t: f64) -> f64 {
    let (p, q) = (params.p_innov, params.q_imit);
    if t <= 0.0 {
        return 0.0;
    }
    let e = (-(p + q) * t).exp();
    (1.0 - e) / (1.0 + (q / p) * e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub bus: String,
    pub eligible: bool,
    pub adopted: bool,
    pub adoption_time: Option<f64>,
    pub sized_capacity_kw: f64,
}

impl AgentState {
    pub fn new(bus: impl Into<String>, sized_capacity_kw: f64) -> Self {
        AgentState {
            bus: bus.into(),
            eligible: false,
            adopted: false,
            adoption_time: None,
            sized_capacity_kw,
        }
    }
}

/// One agent per non-PoI bus, in model bus order.
pub fn agents_for(model: &GridModel, sized_kw: impl Fn(&str) -> f64) -> Vec<AgentState> {
    model
        .buses
        .iter()
        .filter(|b| !b.is_poi)
        .map(|b| AgentState::new(b.id.clone(), sized_kw(&b.id)))
        .collect()
}

/// Bernoulli screen with a single market-share probability.
pub fn mms_screen<R: Rng + ?Sized>(
    agents: &mut [AgentState],
    mms_probability: f64,
    rng: &mut R,
) -> Result<()> {
    mms_screen_with(agents, |_| mms_probability, rng)
}

/// Bernoulli screen with a per-agent probability supplied by `mms`.
pub fn mms_screen_with<R, F>(agents: &mut [AgentState], mms: F, rng: &mut R) -> Result<()>
where
    R: Rng + ?Sized,
    F: Fn(&AgentState) -> f64,
{
    for a in agents.iter_mut() {
        let prob = mms(a);
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidParameter(format!(
                "MMS probability {prob} for {} outside [0, 1]",
                a.bus
            )));
        }
        a.eligible = rng.gen::<f64>() < prob;
    }
    Ok(())
}

/// Per-step record of one adoption run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionTrajectory {
    pub dt: f64,
    pub num_agents: usize,
    /// Adopter count at steps 0..=steps.
    pub adopted: Vec<usize>,
    /// Installed capacity at steps 0..=steps, kW.
    pub installed_kw: Vec<f64>,
}

impl AdoptionTrajectory {
    pub fn fraction(&self, step: usize) -> f64 {
        if self.num_agents == 0 {
            0.0
        } else {
            self.adopted[step] as f64 / self.num_agents as f64
        }
    }

    pub fn final_installed_kw(&self) -> f64 {
        self.installed_kw.last().copied().unwrap_or(0.0)
    }
}

/// Run the agent process. At each step every eligible agent that has not
/// adopted does so with probability `(p + q * A / N) * dt`, where `A` counts
/// adopters among all `N` agents at the start of the step.
pub fn simulate_adoption<R: Rng + ?Sized>(
    params: &DiffusionParams,
    agents: &mut [AgentState],
    rng: &mut R,
) -> Result<AdoptionTrajectory> {
    params.validate()?;
    let n = agents.len();
    let steps = params.steps();
    let mut adopted_now = agents.iter().filter(|a| a.adopted).count();
    let mut installed: f64 = agents
        .iter()
        .filter(|a| a.adopted)
        .fold(0.0, |s, a| s + a.sized_capacity_kw);
    let mut adopted = Vec::with_capacity(steps + 1);
    let mut installed_kw = Vec::with_capacity(steps + 1);
    adopted.push(adopted_now);
    installed_kw.push(installed);
    for step in 0..steps {
        let frac = if n == 0 { 0.0 } else { adopted_now as f64 / n as f64 };
        let prob = (params.p_innov + params.q_imit * frac) * params.dt;
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::ProbabilityOutOfRange { step, prob });
        }
        let t = (step + 1) as f64 * params.dt;
        let mut new = 0;
        for a in agents.iter_mut() {
            if a.eligible && !a.adopted && rng.gen::<f64>() < prob {
                a.adopted = true;
                a.adoption_time = Some(t);
                installed += a.sized_capacity_kw;
                new += 1;
            }
        }
        adopted_now += new;
        adopted.push(adopted_now);
        installed_kw.push(installed);
    }
    Ok(AdoptionTrajectory {
        dt: params.dt,
        num_agents: n,
        adopted,
        installed_kw,
    })
}

/// Exact expected adopter fraction of the agent process for `n` agents that
/// are all eligible, from the distribution of the adopter count.
pub fn expected_fraction_exact(params: &DiffusionParams, n: usize, steps: usize) -> Vec<f64> {
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    let mut out = vec![0.0];
    for _ in 0..steps {
        let mut next = vec![0.0; n + 1];
        for (a, &pa) in dist.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let prob = (params.p_innov + params.q_imit * a as f64 / n as f64) * params.dt;
            let m = n - a;
            // Binomial(m, prob) new adopters, built by the stable recurrence.
            let mut pk = (1.0 - prob).powi(m as i32);
            for k in 0..=m {
                next[a + k] += pa * pk;
                if k < m {
                    pk *= (m - k) as f64 / (k + 1) as f64 * prob / (1.0 - prob);
                }
            }
        }
        dist = next;
        out.push(
            dist.iter()
                .enumerate()
                .map(|(a, p)| a as f64 * p)
                .sum::<f64>()
                / n as f64,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rk4_bass(p: f64, q: f64, t_end: f64, steps: usize) -> f64 {
        let f = |x: f64| (1.0 - x) * (p + q * x);
        let h = t_end / steps as f64;
        let mut x = 0.0;
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn closed_form_endpoints() {
        let p = DiffusionParams::default();
        assert_eq!(bass_closed_form(&p, 0.0), 0.0);
        assert!((bass_closed_form(&p, 500.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_ode_integration() {
        let p = DiffusionParams::default();
        let exact = bass_closed_form(&p, 10.0);
        let numeric = rk4_bass(0.01, 0.4, 10.0, 10_000);
        assert!((exact - numeric).abs() < 1e-6, "{exact} vs {numeric}");
    }

    #[test]
    fn params_reject_invalid_probability() {
        let p = DiffusionParams {
            p_innov: 0.5,
            q_imit: 0.6,
            dt: 1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = DiffusionParams {
            p_innov: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn mms_extremes_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agents: Vec<_> = (0..10_000).map(|i| AgentState::new(format!("b{i}"), 1.0)).collect();
        mms_screen(&mut agents, 1.0, &mut rng).unwrap();
        assert!(agents.iter().all(|a| a.eligible));
        mms_screen(&mut agents, 0.0, &mut rng).unwrap();
        assert!(agents.iter().all(|a| !a.eligible));
        mms_screen(&mut agents, 0.5, &mut rng).unwrap();
        let frac = agents.iter().filter(|a| a.eligible).count() as f64 / 1e4;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        assert!(mms_screen(&mut agents, 1.5, &mut rng).is_err());
    }

    #[test]
    fn no_eligible_agents_never_adopt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agents: Vec<_> = (0..20).map(|i| AgentState::new(format!("b{i}"), 3.0)).collect();
        let traj = simulate_adoption(&DiffusionParams::default(), &mut agents, &mut rng).unwrap();
        assert!(traj.adopted.iter().all(|&a| a == 0));
        assert_eq!(traj.final_installed_kw(), 0.0);
    }

    #[test]
    fn trajectory_is_nondecreasing_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut agents: Vec<_> = (0..50).map(|i| AgentState::new(format!("b{i}"), i as f64)).collect();
        mms_screen(&mut agents, 0.7, &mut rng).unwrap();
        let traj = simulate_adoption(&DiffusionParams::default(), &mut agents, &mut rng).unwrap();
        assert!(traj.adopted.windows(2).all(|w| w[0] <= w[1]));
        assert!(traj.installed_kw.windows(2).all(|w| w[0] <= w[1]));
        for a in &agents {
            assert!(!a.adopted || a.eligible);
            assert_eq!(a.adopted, a.adoption_time.is_some());
        }
        let total: f64 = agents.iter().filter(|a| a.adopted).map(|a| a.sized_capacity_kw).sum();
        assert_eq!(total, traj.final_installed_kw());
    }

    #[test]
    fn geometric_law_without_imitation() {
        let params = DiffusionParams {
            p_innov: 0.6,
            q_imit: 0.0,
            dt: 0.25,
            horizon: 2.0,
            seed: 0,
        };
        let pi0: f64 = 0.15;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let runs = 400;
        let n = 50;
        let mut sums = vec![0.0; params.steps() + 1];
        for _ in 0..runs {
            let mut agents: Vec<_> = (0..n).map(|i| AgentState::new(format!("b{i}"), 1.0)).collect();
            mms_screen(&mut agents, 1.0, &mut rng).unwrap();
            let t = simulate_adoption(&params, &mut agents, &mut rng).unwrap();
            for (s, v) in sums.iter_mut().enumerate() {
                *v += t.fraction(s);
            }
        }
        for (m, v) in sums.iter().enumerate() {
            let mean = v / runs as f64;
            let expect = 1.0 - (1.0 - pi0).powi(m as i32);
            let se = (expect * (1.0 - expect) / (runs * n) as f64).sqrt();
            assert!((mean - expect).abs() <= 4.0 * se + 1e-12, "step {m}: {mean} vs {expect}");
        }
    }

    #[test]
    fn exact_expectation_matches_simple_cases() {
        let params = DiffusionParams {
            p_innov: 0.3,
            q_imit: 0.0,
            dt: 0.5,
            horizon: 2.0,
            seed: 0,
        };
        let e = expected_fraction_exact(&params, 7, 4);
        for (m, v) in e.iter().enumerate() {
            assert!((v - (1.0 - 0.85f64.powi(m as i32))).abs() < 1e-12);
        }
    }
}
