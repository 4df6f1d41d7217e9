//! Gravitational update step for a population of program strings.
//!
//! Fitness-derived masses attract agents toward the current elite set; the
//! elite set shrinks linearly over the schedule while the gravitational
//! constant decays exponentially. The same step drives both the per-niche
//! local updates and the champion-pool update at the server; only the
//! schedule parameters differ.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::genome::{GeneBounds, Position};
use crate::Result;

/// One member of a population: continuous position, velocity, and the
/// fitness of the position (`None` after a move, until re-evaluated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub position: Position,
    pub velocity: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Agent {
    /// New agent at `position` with zero velocity and unevaluated fitness.
    pub fn new(position: Position) -> Self {
        let velocity = vec![0.0; position.len()];
        Self {
            position,
            velocity,
            fitness: None,
        }
    }
}

/// Schedule parameters of the gravitational step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsaParams {
    /// Initial gravitational constant.
    pub g0: f64,
    /// Exponential decay rate of the gravitational constant.
    pub alpha: f64,
    /// Distance regularizer keeping forces finite at zero separation.
    pub epsilon: f64,
    /// Schedule length: local iterations for niche steps, total rounds for
    /// the server step.
    pub total_iterations: usize,
}

impl GsaParams {
    pub fn new(g0: f64, alpha: f64, epsilon: f64, total_iterations: usize) -> Result<Self> {
        if !(g0 > 0.0 && alpha > 0.0 && epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "g0, alpha, and epsilon must all be positive".into(),
            ));
        }
        if total_iterations == 0 {
            return Err(Error::InvalidArgument("total_iterations must be >= 1".into()));
        }
        Ok(Self {
            g0,
            alpha,
            epsilon,
            total_iterations,
        })
    }

    /// Defaults with the given schedule length: `G0 = 100`, `alpha = 20`,
    /// `epsilon = 1e-9`.
    pub fn with_defaults(total_iterations: usize) -> Result<Self> {
        Self::new(100.0, 20.0, 1e-9, total_iterations)
    }
}

/// Normalized masses from fitness values: each fitness is rescaled against
/// the population's best and worst, then normalized to sum to one. A tied
/// population gets uniform masses.
pub fn masses(fitnesses: &[f64]) -> Vec<f64> {
    let n = fitnesses.len();
    assert!(n > 0, "masses of an empty population");
    let best = fitnesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst = fitnesses.iter().cloned().fold(f64::INFINITY, f64::min);
    if best == worst {
        return vec![1.0 / n as f64; n];
    }
    let raw: Vec<f64> = fitnesses.iter().map(|&f| (f - worst) / (best - worst)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|m| m / total).collect()
}

/// Exponentially decaying gravitational constant
/// `G(t) = G0 * exp(-alpha * t / T)`.
pub fn gravitational_constant(t: usize, params: &GsaParams) -> Result<f64> {
    if t >= params.total_iterations {
        return Err(Error::InvalidArgument(format!(
            "iteration {t} out of range [0, {})",
            params.total_iterations
        )));
    }
    Ok(params.g0 * (-params.alpha * t as f64 / params.total_iterations as f64).exp())
}

/// Size of the elite set: decreases linearly from `n` at `t = 0` to `1` at
/// `t = T - 1`, rounded half-up and clamped to `[1, n]`.
pub fn kbest(t: usize, total_iterations: usize, n: usize) -> usize {
    assert!(n >= 1);
    if total_iterations <= 1 {
        return n;
    }
    let span = (total_iterations - 1) as f64;
    let raw = n as f64 - (n as f64 - 1.0) * t as f64 / span;
    let rounded = (raw + 0.5).floor() as usize;
    rounded.clamp(1, n)
}

/// Advance every agent one gravitational step.
///
/// Accelerations are computed from a snapshot of the current positions, so
/// the update is simultaneous. For each agent and dimension,
/// `a_id = sum over elite j != i of r_ij * G(t) * M_j * (x_jd - x_id) / (R_ij + eps)`,
/// with `r_ij` uniform per (agent, elite) pair; a massless agent receives the
/// same sum scaled by the population size instead, so the worst agent keeps
/// moving. Velocities decay by a fresh uniform factor per dimension before the
/// acceleration is added; positions clamp to their gene ranges and fitness is
/// marked stale.
///
/// Random draws follow a fixed order: pair factors for every agent
/// (agent-major, elite order), then velocity factors (agent-major, dimension
/// order), so a seeded run is bit-reproducible.
pub fn step(
    agents: &mut [Agent],
    t: usize,
    params: &GsaParams,
    bounds: &GeneBounds,
    rng: &mut impl Rng,
) -> Result<()> {
    let n = agents.len();
    if n == 0 {
        return Ok(());
    }
    let dim = bounds.len();
    let fitnesses: Vec<f64> = agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.position.len() != dim || a.velocity.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: a.position.len().min(a.velocity.len()),
                });
            }
            a.fitness.ok_or(Error::UnevaluatedAgent(i))
        })
        .collect::<Result<_>>()?;

    let mass = masses(&fitnesses);
    let g = gravitational_constant(t, params)?;
    let k = kbest(t, params.total_iterations, n);

    // Elite agents ranked by fitness, ties broken by index.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        fitnesses[b]
            .partial_cmp(&fitnesses[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let elite = &order[..k];

    let mut accelerations = vec![vec![0.0; dim]; n];
    for i in 0..n {
        let scale = if mass[i] > 0.0 { 1.0 } else { n as f64 };
        for &j in elite {
            if j == i {
                continue;
            }
            let r_pair: f64 = rng.random();
            let dist: f64 = agents[i]
                .position
                .genes()
                .iter()
                .zip(agents[j].position.genes())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let pull = r_pair * g * mass[j] / (dist + params.epsilon);
            for ((acc, &to), &from) in accelerations[i]
                .iter_mut()
                .zip(agents[j].position.genes())
                .zip(agents[i].position.genes())
            {
                *acc += scale * pull * (to - from);
            }
        }
    }

    for (agent, acceleration) in agents.iter_mut().zip(&accelerations) {
        for (d, (velocity, &acc)) in agent.velocity.iter_mut().zip(acceleration).enumerate() {
            let decay: f64 = rng.random();
            *velocity = decay * *velocity + acc;
            let moved = agent.position.genes()[d] + *velocity;
            agent.position.genes_mut()[d] = bounds.clamp_gene(d, moved);
        }
        agent.fitness = None;
    }
    Ok(())
}
