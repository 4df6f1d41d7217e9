//! Round orchestration between simulated clients and the edge server.
//!
//! Each round every client clusters its population into niches, runs a few
//! gravitational iterations per niche against its local training data, and
//! reports one champion program per niche. The server concatenates all
//! champions into a global population, applies a single gravitational step
//! using the client-reported fitness values (it holds no data), and sends the
//! refined programs back to the population slots they came from. Messages
//! carry positions, velocities, fitness scalars, and indices, never samples
//! or labels.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Error;
use crate::fitness::igr;
use crate::genome::{
    build_tree, canonical_string, decode, evaluate_feature, ExpressionTree, GeneBounds, Operator,
    Position, ProgramShape,
};
use crate::gsa::{step, Agent, GsaParams};
use crate::niching::{crowding_cluster, niche_count};
use crate::rng::{stream, tag};
use crate::Result;

/// A client's local training view: feature rows and labels, plus the global
/// class count. Under label-skewed partitions a client may not see every
/// class, so this is deliberately looser than [`Dataset`].
#[derive(Debug, Clone)]
pub struct ClientData {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
}

impl ClientData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, n_classes: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                x.len(),
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range [0, {n_classes})"
            )));
        }
        Ok(Self { x, y, n_classes })
    }

    /// Gather the given sample indices out of a dataset.
    pub fn from_dataset(ds: &Dataset, indices: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(indices.len());
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= ds.n_samples() {
                return Err(Error::InvalidArgument(format!(
                    "sample index {i} out of range [0, {})",
                    ds.n_samples()
                )));
            }
            x.push(ds.rows()[i].clone());
            y.push(ds.labels()[i]);
        }
        Self::new(x, y, ds.n_classes())
    }

    pub fn n_samples(&self) -> usize {
        self.x.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

/// Full experiment configuration. Every field has the stock default, so
/// partial configs only override what they care about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of clients (M).
    pub clients: usize,
    /// Local population size per client.
    pub s_local: usize,
    /// Gravitational iterations per niche per round.
    pub local_iters: usize,
    /// Total communication rounds.
    pub global_rounds: usize,
    /// Inclusive range the per-round niche size is drawn from.
    pub ns_min: usize,
    pub ns_max: usize,
    /// Program tree depth.
    pub pd: usize,
    /// Operand arity of internal nodes.
    pub no: usize,
    pub operators: Vec<Operator>,
    /// Equal-frequency bin budget for fitness discretization.
    pub bins: usize,
    /// Cap on the number of selected features; `None` resolves to
    /// `max(3, ceil(L / 4))` once the feature count is known.
    pub beta_max: Option<usize>,
    /// Champions below this fitness are dropped at final selection.
    pub igr_threshold: f64,
    pub master_seed: u64,
    /// Gravitational constant schedule.
    pub g0: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            clients: 10,
            s_local: 30,
            local_iters: 5,
            global_rounds: 100,
            ns_min: 3,
            ns_max: 10,
            pd: 3,
            no: 2,
            operators: Operator::ALL.to_vec(),
            // Client partitions at this scale hold ~10-15 training samples;
            // five equal-frequency bins keep the gain-ratio fitness able to
            // tell features apart there (ten would leave one sample per bin).
            bins: 5,
            beta_max: None,
            igr_threshold: 0.01,
            master_seed: 42,
            g0: 100.0,
            alpha: 20.0,
            epsilon: 1e-9,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients < 2 {
            return Err(Error::Config(format!(
                "federation requires at least 2 clients, got {}",
                self.clients
            )));
        }
        if self.s_local < 1 {
            return Err(Error::Config("local population size must be >= 1".into()));
        }
        if self.local_iters < 1 {
            return Err(Error::Config("local_iters must be >= 1".into()));
        }
        if self.global_rounds < 1 {
            return Err(Error::Config("at least 1 round required".into()));
        }
        if self.ns_min < 1 || self.ns_min > self.ns_max || self.ns_max > self.s_local {
            return Err(Error::Config(format!(
                "niche size range [{}, {}] invalid for population {}",
                self.ns_min, self.ns_max, self.s_local
            )));
        }
        if self.bins < 2 {
            return Err(Error::Config("bins must be >= 2".into()));
        }
        if self.beta_max == Some(0) {
            return Err(Error::Config("beta_max must be >= 1".into()));
        }
        if self.igr_threshold.is_nan() || self.igr_threshold < 0.0 {
            return Err(Error::Config("igr_threshold must be >= 0".into()));
        }
        if !(self.g0 > 0.0 && self.alpha > 0.0 && self.epsilon > 0.0) {
            return Err(Error::Config("g0, alpha, epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Selected-feature cap for a dataset with `n_features` original features.
    pub fn resolved_beta_max(&self, n_features: usize) -> usize {
        self.beta_max.unwrap_or_else(|| 3.max(n_features.div_ceil(4)))
    }

    pub fn shape_for(&self, n_features: usize) -> Result<ProgramShape> {
        ProgramShape::new(n_features, self.pd, self.no, self.operators.clone())
    }
}

/// One client's persistent state across rounds.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub data: ClientData,
    pub population: Vec<Agent>,
}

impl ClientState {
    /// Fresh client with a randomly initialized population drawn from the
    /// client-keyed stream.
    pub fn init(client_id: usize, data: ClientData, cfg: &RunConfig, shape: &ProgramShape) -> Self {
        let mut rng = stream(cfg.master_seed, &[tag::POP_INIT, client_id as u64]);
        let population = (0..cfg.s_local)
            .map(|_| Agent::new(shape.random_position(&mut rng)))
            .collect();
        Self {
            client_id,
            data,
            population,
        }
    }
}

/// One niche champion as reported to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Champion {
    pub position: Position,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub local_index: usize,
}

/// Per-round client-to-server message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChampionReport {
    pub client_id: usize,
    pub champions: Vec<Champion>,
}

/// One refined program returned to a client, addressed by the population
/// slot its champion came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramUpdate {
    pub local_index: usize,
    pub position: Position,
    pub velocity: Vec<f64>,
}

/// Per-client slice of the server-to-clients message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub programs: Vec<ProgramUpdate>,
}

/// Per-round server-to-clients message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalUpdate {
    pub clients: Vec<ClientUpdate>,
}

/// Canonical wire size: 8 bytes per real, 4 per index or id.
pub const BYTES_PER_REAL: usize = 8;
pub const BYTES_PER_INDEX: usize = 4;

impl ChampionReport {
    pub fn wire_bytes(&self) -> usize {
        BYTES_PER_INDEX
            + self
                .champions
                .iter()
                .map(|c| {
                    BYTES_PER_INDEX
                        + BYTES_PER_REAL
                        + BYTES_PER_REAL * (c.position.len() + c.velocity.len())
                })
                .sum::<usize>()
    }
}

impl GlobalUpdate {
    pub fn wire_bytes(&self) -> usize {
        self.clients
            .iter()
            .map(|entry| {
                BYTES_PER_INDEX
                    + entry
                        .programs
                        .iter()
                        .map(|p| {
                            BYTES_PER_INDEX + BYTES_PER_REAL * (p.position.len() + p.velocity.len())
                        })
                        .sum::<usize>()
            })
            .sum()
    }
}

/// Hook for capturing federation traffic; every report and update passes
/// through here in deterministic (client, round) order.
pub trait MessageObserver {
    fn on_report(&mut self, _report: &ChampionReport) {}
    fn on_update(&mut self, _update: &GlobalUpdate) {}
}

/// Observer that ignores everything.
pub struct NoopObserver;

impl MessageObserver for NoopObserver {}

fn evaluate_agent(agent: &Agent, data: &ClientData, shape: &ProgramShape, bins: usize) -> Result<f64> {
    let dp = decode(&agent.position, shape)?;
    match build_tree(&dp, shape) {
        Ok(tree) => {
            let values = evaluate_feature(&tree, data.rows());
            igr(&values, data.labels(), data.n_classes(), bins)
        }
        // A program that selects no features is degenerate, not fatal.
        Err(Error::EmptyMask) => Ok(0.0),
        Err(other) => Err(other),
    }
}

fn evaluate_stale(state: &mut ClientState, shape: &ProgramShape, bins: usize) -> Result<()> {
    for i in 0..state.population.len() {
        if state.population[i].fitness.is_none() {
            let f = evaluate_agent(&state.population[i], &state.data, shape, bins)?;
            state.population[i].fitness = Some(f);
        }
    }
    Ok(())
}

/// One local round on a single client.
///
/// Replaces the population slots addressed by the incoming update, clusters
/// the population into niches of size `ns`, alternates fitness evaluation and
/// per-niche gravitational steps for `local_iters` iterations, evaluates the
/// final positions, and reports the best program of each niche together with
/// its population index.
pub fn local_phase(
    state: &mut ClientState,
    cfg: &RunConfig,
    shape: &ProgramShape,
    bounds: &GeneBounds,
    ns: usize,
    incoming: Option<&ClientUpdate>,
    round: usize,
) -> Result<ChampionReport> {
    if state.data.n_samples() == 0 {
        return Err(Error::EmptyLocalData(state.client_id));
    }
    let client = state.client_id;

    if let Some(update) = incoming {
        for program in &update.programs {
            if program.local_index >= state.population.len() {
                return Err(Error::UpdateIndexOutOfRange {
                    client,
                    index: program.local_index,
                    size: state.population.len(),
                });
            }
            state.population[program.local_index] = Agent {
                position: program.position.clone(),
                velocity: program.velocity.clone(),
                fitness: None,
            };
        }
    }

    let decoded: Vec<_> = state
        .population
        .iter()
        .map(|a| decode(&a.position, shape))
        .collect::<Result<_>>()?;
    let mut cluster_rng = stream(cfg.master_seed, &[tag::CLUSTER, client as u64, round as u64]);
    let assignment = crowding_cluster(&decoded, ns, shape, &mut cluster_rng)?;

    let params = GsaParams::new(cfg.g0, cfg.alpha, cfg.epsilon, cfg.local_iters)?;
    // Niches share no agents, so each gets an independent stream keyed by
    // (client, round, niche) that persists across the local iterations.
    let mut niche_rngs: Vec<_> = (0..assignment.niches.len())
        .map(|niche_id| {
            stream(
                cfg.master_seed,
                &[tag::NICHE_STEP, client as u64, round as u64, niche_id as u64],
            )
        })
        .collect();
    for iter in 0..cfg.local_iters {
        evaluate_stale(state, shape, cfg.bins)?;
        for (niche_id, members) in assignment.niches.iter().enumerate() {
            let mut niche: Vec<Agent> = members.iter().map(|&i| state.population[i].clone()).collect();
            step(&mut niche, iter, &params, bounds, &mut niche_rngs[niche_id])?;
            for (&i, agent) in members.iter().zip(niche) {
                state.population[i] = agent;
            }
        }
    }
    // Final evaluation so reported fitness matches reported positions.
    evaluate_stale(state, shape, cfg.bins)?;

    let champions = assignment
        .niches
        .iter()
        .map(|members| {
            let &best = members
                .iter()
                .min_by(|&&a, &&b| {
                    let fa = state.population[a].fitness.unwrap();
                    let fb = state.population[b].fitness.unwrap();
                    fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
                })
                .expect("niches are never empty");
            Champion {
                position: state.population[best].position.clone(),
                velocity: state.population[best].velocity.clone(),
                fitness: state.population[best].fitness.unwrap(),
                local_index: best,
            }
        })
        .collect();

    Ok(ChampionReport {
        client_id: client,
        champions,
    })
}

/// One aggregation step at the edge server.
///
/// All reported champions form the global population with their reported
/// fitness values; one gravitational step refines them, and every program is
/// routed back to the client and population slot it came from, indices echoed
/// verbatim.
pub fn global_phase(
    reports: &[ChampionReport],
    expected_champions: usize,
    round: usize,
    params: &GsaParams,
    bounds: &GeneBounds,
    rng: &mut impl Rng,
) -> Result<GlobalUpdate> {
    for (id, report) in reports.iter().enumerate() {
        if report.client_id != id {
            return Err(Error::MissingReport(id));
        }
        if report.champions.len() != expected_champions {
            return Err(Error::ChampionCountMismatch {
                client: id,
                expected: expected_champions,
                got: report.champions.len(),
            });
        }
    }

    let mut pool: Vec<Agent> = reports
        .iter()
        .flat_map(|r| &r.champions)
        .map(|c| Agent {
            position: c.position.clone(),
            velocity: c.velocity.clone(),
            fitness: Some(c.fitness),
        })
        .collect();
    step(&mut pool, round, params, bounds, rng)?;

    let mut pool_iter = pool.into_iter();
    let clients = reports
        .iter()
        .map(|report| ClientUpdate {
            client_id: report.client_id,
            programs: report
                .champions
                .iter()
                .map(|champion| {
                    let agent = pool_iter.next().expect("pool matches champion count");
                    ProgramUpdate {
                        local_index: champion.local_index,
                        position: agent.position,
                        velocity: agent.velocity,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(GlobalUpdate { clients })
}

/// One line of the per-round log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub ns: usize,
    pub a: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub bytes_up: usize,
    pub bytes_down: usize,
}

/// One selected constructed feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    #[serde(skip)]
    pub tree: Option<ExpressionTree>,
    pub expr: String,
    pub fitness: f64,
    pub client: usize,
    pub round: usize,
}

impl SelectedFeature {
    /// The expression tree, reparsed from the canonical string if the
    /// in-memory tree is absent (e.g. after deserialization).
    pub fn tree(&self) -> Result<ExpressionTree> {
        match &self.tree {
            Some(t) => Ok(t.clone()),
            None => crate::genome::parse_expression(&self.expr),
        }
    }
}

/// Result of a full federated run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rounds: Vec<RoundRecord>,
    pub features: Vec<SelectedFeature>,
}

/// Pick the final constructed features from the last round's champion pool:
/// decode, drop degenerates, deduplicate by canonical form (keeping the
/// highest reported fitness), rank by fitness, drop weak entries, cap at the
/// resolved feature budget, and always keep at least one feature.
pub fn select_final_features(
    reports: &[ChampionReport],
    cfg: &RunConfig,
    shape: &ProgramShape,
    round: usize,
) -> Result<Vec<SelectedFeature>> {
    if reports.iter().all(|r| r.champions.is_empty()) {
        return Err(Error::InvalidArgument("empty champion pool".into()));
    }
    let mut by_expr: Vec<(String, f64, usize, ExpressionTree)> = Vec::new();
    for report in reports {
        for champion in &report.champions {
            let dp = decode(&champion.position, shape)?;
            let tree = match build_tree(&dp, shape) {
                Ok(t) => t,
                Err(Error::EmptyMask) => continue,
                Err(other) => return Err(other),
            };
            let expr = canonical_string(&tree);
            match by_expr.iter_mut().find(|(e, ..)| *e == expr) {
                Some(entry) if champion.fitness > entry.1 => {
                    entry.1 = champion.fitness;
                    entry.2 = report.client_id;
                }
                Some(_) => {}
                None => by_expr.push((expr, champion.fitness, report.client_id, tree)),
            }
        }
    }

    by_expr.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

    let beta_max = cfg.resolved_beta_max(shape.n_features());
    let mut selected: Vec<SelectedFeature> = by_expr
        .iter()
        .filter(|(_, fitness, ..)| *fitness >= cfg.igr_threshold)
        .take(beta_max)
        .map(|(expr, fitness, client, tree)| SelectedFeature {
            tree: Some(tree.clone()),
            expr: expr.clone(),
            fitness: *fitness,
            client: *client,
            round,
        })
        .collect();
    if selected.is_empty() {
        if let Some((expr, fitness, client, tree)) = by_expr.into_iter().next() {
            selected.push(SelectedFeature {
                tree: Some(tree),
                expr,
                fitness,
                client,
                round,
            });
        } else {
            // Every champion decoded to an empty mask; surface it rather than
            // emit an empty feature set.
            return Err(Error::InvalidArgument(
                "all champions are degenerate (empty masks)".into(),
            ));
        }
    }
    Ok(selected)
}

/// Run the full federated feature-construction loop.
///
/// `client_data` holds each client's local training view, indexed by client
/// id. Clients within a round run independently (and in parallel on the
/// current thread pool); randomness is keyed by (purpose, client, round,
/// niche), so thread count and execution order cannot change the result.
pub fn run_ffc(cfg: &RunConfig, client_data: &[ClientData]) -> Result<RunOutput> {
    run_ffc_observed(cfg, client_data, &mut NoopObserver)
}

/// [`run_ffc`] with a message tap for inspecting federation traffic.
pub fn run_ffc_observed(
    cfg: &RunConfig,
    client_data: &[ClientData],
    observer: &mut dyn MessageObserver,
) -> Result<RunOutput> {
    cfg.validate()?;
    if client_data.len() != cfg.clients {
        return Err(Error::Config(format!(
            "config names {} clients but {} datasets supplied",
            cfg.clients,
            client_data.len()
        )));
    }
    let n_features = client_data[0].n_features();
    for (id, data) in client_data.iter().enumerate() {
        if data.n_samples() == 0 {
            return Err(Error::EmptyLocalData(id));
        }
        if data.n_features() != n_features {
            return Err(Error::Config(format!(
                "client {id} has {} features, expected {n_features}",
                data.n_features()
            )));
        }
    }

    let shape = cfg.shape_for(n_features)?;
    let bounds = shape.bounds();
    let mut states: Vec<ClientState> = client_data
        .iter()
        .enumerate()
        .map(|(id, data)| ClientState::init(id, data.clone(), cfg, &shape))
        .collect();

    let global_params = GsaParams::new(cfg.g0, cfg.alpha, cfg.epsilon, cfg.global_rounds)?;
    let mut pending: Option<GlobalUpdate> = None;
    let mut rounds = Vec::with_capacity(cfg.global_rounds);
    let mut last_reports: Vec<ChampionReport> = Vec::new();

    for round in 0..cfg.global_rounds {
        let ns = stream(cfg.master_seed, &[tag::NICHE_SIZE, round as u64])
            .random_range(cfg.ns_min..=cfg.ns_max);
        let expected_champions = niche_count(cfg.s_local, ns)?;

        let mut incoming: Vec<Option<&ClientUpdate>> = vec![None; cfg.clients];
        if let Some(update) = &pending {
            for entry in &update.clients {
                if entry.client_id >= cfg.clients {
                    return Err(Error::Config(format!(
                        "update addressed to unknown client {}",
                        entry.client_id
                    )));
                }
                incoming[entry.client_id] = Some(entry);
            }
        }

        let reports: Vec<ChampionReport> = states
            .par_iter_mut()
            .zip(incoming.par_iter())
            .map(|(state, incoming)| {
                local_phase(state, cfg, &shape, &bounds, ns, *incoming, round)
            })
            .collect::<Result<_>>()?;

        for state in &states {
            debug_assert_eq!(state.population.len(), cfg.s_local);
        }
        for report in &reports {
            observer.on_report(report);
        }

        let mut global_rng = stream(cfg.master_seed, &[tag::GLOBAL_STEP, round as u64]);
        let update = global_phase(
            &reports,
            expected_champions,
            round,
            &global_params,
            &bounds,
            &mut global_rng,
        )?;
        observer.on_update(&update);

        let fitnesses: Vec<f64> = reports
            .iter()
            .flat_map(|r| r.champions.iter().map(|c| c.fitness))
            .collect();
        let bytes_up = reports.iter().map(ChampionReport::wire_bytes).sum();
        rounds.push(RoundRecord {
            round,
            ns,
            a: expected_champions,
            best_fitness: fitnesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean_fitness: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
            bytes_up,
            bytes_down: update.wire_bytes(),
        });

        last_reports = reports;
        pending = Some(update);
    }

    let features = select_final_features(&last_reports, cfg, &shape, cfg.global_rounds - 1)?;
    Ok(RunOutput { rounds, features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(n: usize, seed: u64) -> ClientData {
        // Two informative features and one noise feature over two classes.
        let mut rng = crate::rng::seeded(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let base = class as f64 * 3.0;
            x.push(vec![
                base + rng.random_range(0.0..1.0),
                base * 2.0 + rng.random_range(0.0..1.0),
                rng.random_range(0.0..10.0),
            ]);
            y.push(class);
        }
        ClientData::new(x, y, 2).unwrap()
    }

    fn small_cfg() -> RunConfig {
        RunConfig {
            clients: 2,
            s_local: 10,
            local_iters: 2,
            global_rounds: 3,
            ns_min: 2,
            ns_max: 4,
            master_seed: 7,
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad = [
            RunConfig {
                clients: 1,
                ..RunConfig::default()
            },
            RunConfig {
                global_rounds: 0,
                ..RunConfig::default()
            },
            RunConfig {
                ns_max: RunConfig::default().s_local + 1,
                ..RunConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?} should be rejected");
        }
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn beta_max_resolution() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.resolved_beta_max(4), 3);
        assert_eq!(cfg.resolved_beta_max(13), 4);
        assert_eq!(cfg.resolved_beta_max(100), 25);
        let fixed = RunConfig {
            beta_max: Some(2),
            ..RunConfig::default()
        };
        assert_eq!(fixed.resolved_beta_max(100), 2);
    }

    #[test]
    fn local_phase_round_zero_schema() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        let mut state = ClientState::init(0, toy_data(12, 1), &cfg, &shape);
        let report = local_phase(&mut state, &cfg, &shape, &bounds, 3, None, 0).unwrap();

        assert_eq!(report.client_id, 0);
        assert_eq!(report.champions.len(), 4); // ceil(10 / 3)
        let mut indices: Vec<usize> = report.champions.iter().map(|c| c.local_index).collect();
        indices.sort_unstable();
        indices.dedup();
        assert_eq!(indices.len(), 4);
        for c in &report.champions {
            assert!(c.local_index < cfg.s_local);
            assert!((0.0..=1.0 + 1e-12).contains(&c.fitness));
        }
        assert_eq!(state.population.len(), cfg.s_local);
    }

    #[test]
    fn champion_fitness_matches_reported_position() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        let data = toy_data(12, 2);
        let mut state = ClientState::init(0, data.clone(), &cfg, &shape);
        let report = local_phase(&mut state, &cfg, &shape, &bounds, 3, None, 0).unwrap();

        for champion in &report.champions {
            let agent = Agent::new(champion.position.clone());
            let f = evaluate_agent(&agent, &data, &shape, cfg.bins).unwrap();
            assert_eq!(f, champion.fitness);
        }
    }

    #[test]
    fn local_phase_is_deterministic() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        let mut a = ClientState::init(0, toy_data(12, 3), &cfg, &shape);
        let mut b = a.clone();
        let ra = local_phase(&mut a, &cfg, &shape, &bounds, 3, None, 0).unwrap();
        let rb = local_phase(&mut b, &cfg, &shape, &bounds, 3, None, 0).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn local_phase_rejects_bad_incoming_index() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        let mut state = ClientState::init(0, toy_data(12, 4), &cfg, &shape);
        let bad = ClientUpdate {
            client_id: 0,
            programs: vec![ProgramUpdate {
                local_index: cfg.s_local,
                position: shape.random_position(&mut crate::rng::seeded(0)),
                velocity: vec![0.0; shape.dimension()],
            }],
        };
        assert!(matches!(
            local_phase(&mut state, &cfg, &shape, &bounds, 3, Some(&bad), 1),
            Err(Error::UpdateIndexOutOfRange { .. })
        ));
    }

    fn make_reports(cfg: &RunConfig, shape: &ProgramShape, a: usize) -> Vec<ChampionReport> {
        let bounds = shape.bounds();
        (0..cfg.clients)
            .map(|id| {
                let mut state = ClientState::init(id, toy_data(12, id as u64), cfg, shape);
                local_phase(&mut state, cfg, shape, &bounds, cfg.s_local.div_ceil(a), None, 0)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn global_phase_counts_and_echo_law() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        // ns = 4 over 10 agents -> 3 niches.
        let reports = make_reports(&cfg, &shape, 3);
        assert!(reports.iter().all(|r| r.champions.len() == 3));

        let params = GsaParams::with_defaults(cfg.global_rounds).unwrap();
        let update = global_phase(
            &reports,
            3,
            0,
            &params,
            &bounds,
            &mut crate::rng::seeded(1),
        )
        .unwrap();
        assert_eq!(update.clients.len(), 2);
        for (report, entry) in reports.iter().zip(&update.clients) {
            assert_eq!(entry.client_id, report.client_id);
            assert_eq!(entry.programs.len(), 3);
            let reported: Vec<usize> = report.champions.iter().map(|c| c.local_index).collect();
            let echoed: Vec<usize> = entry.programs.iter().map(|p| p.local_index).collect();
            assert_eq!(reported, echoed);
        }
    }

    #[test]
    fn global_phase_validates_reports() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        let params = GsaParams::with_defaults(cfg.global_rounds).unwrap();
        let reports = make_reports(&cfg, &shape, 3);

        let mut wrong_count = reports.clone();
        wrong_count[1].champions.pop();
        assert!(matches!(
            global_phase(&wrong_count, 3, 0, &params, &bounds, &mut crate::rng::seeded(0)),
            Err(Error::ChampionCountMismatch { client: 1, .. })
        ));

        let mut missing = reports;
        missing[0].client_id = 5;
        assert!(matches!(
            global_phase(&missing, 3, 0, &params, &bounds, &mut crate::rng::seeded(0)),
            Err(Error::MissingReport(0))
        ));
    }

    #[test]
    fn global_phase_identical_positions_stay_put() {
        let cfg = small_cfg();
        let shape = cfg.shape_for(3).unwrap();
        let bounds = shape.bounds();
        let pos = shape.random_position(&mut crate::rng::seeded(6));
        let reports: Vec<ChampionReport> = (0..2)
            .map(|id| ChampionReport {
                client_id: id,
                champions: (0..3)
                    .map(|k| Champion {
                        position: pos.clone(),
                        velocity: vec![0.0; shape.dimension()],
                        fitness: 0.5,
                        local_index: k,
                    })
                    .collect(),
            })
            .collect();
        let params = GsaParams::with_defaults(10).unwrap();
        let update = global_phase(&reports, 3, 0, &params, &bounds, &mut crate::rng::seeded(2)).unwrap();
        for entry in &update.clients {
            for p in &entry.programs {
                assert_eq!(p.position, pos);
            }
        }
    }

    #[test]
    fn run_ffc_single_round_log() {
        let cfg = RunConfig {
            global_rounds: 1,
            ..small_cfg()
        };
        let data = vec![toy_data(12, 1), toy_data(12, 2)];
        let out = run_ffc(&cfg, &data).unwrap();
        assert_eq!(out.rounds.len(), 1);
        assert!(!out.features.is_empty());
        assert!(out.features.len() <= cfg.resolved_beta_max(3));
    }

    #[test]
    fn run_ffc_is_deterministic() {
        let cfg = small_cfg();
        let data = vec![toy_data(12, 1), toy_data(12, 2)];
        let a = run_ffc(&cfg, &data).unwrap();
        let b = run_ffc(&cfg, &data).unwrap();
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn byte_counts_match_schema_formula() {
        let cfg = small_cfg();
        let data = vec![toy_data(12, 1), toy_data(12, 2)];
        let out = run_ffc(&cfg, &data).unwrap();
        let dim = cfg.shape_for(3).unwrap().dimension();
        for record in &out.rounds {
            let a = record.a;
            let up = cfg.clients * (4 + a * (4 + 8 + 2 * 8 * dim));
            let down = cfg.clients * (4 + a * (4 + 2 * 8 * dim));
            assert_eq!(record.bytes_up, up);
            assert_eq!(record.bytes_down, down);
        }
    }

    #[test]
    fn select_final_features_dedupes_and_truncates() {
        let cfg = RunConfig {
            beta_max: Some(2),
            igr_threshold: 0.1,
            ..small_cfg()
        };
        let shape = cfg.shape_for(3).unwrap();
        // Two positions decoding to the same tree, one distinct, one empty mask.
        let mut base = vec![0.9, 0.1, 0.9]; // mask: features 0 and 2
        base.extend(vec![0.2; shape.internal_slots()]); // all "add"
        base.extend(vec![0.0; shape.link_slots()]); // all links -> terminal 0
        let dup = {
            let mut genes = base.clone();
            genes[0] = 0.7; // same mask after threshold
            genes
        };
        let distinct = {
            let mut genes = base.clone();
            let op_start = 3;
            genes[op_start] = 2.5; // root becomes "mul"
            genes
        };
        let empty = vec![0.0; shape.dimension()];
        let mk = |genes: Vec<f64>, fitness: f64, idx: usize| Champion {
            position: Position::from_genes(genes),
            velocity: vec![0.0; shape.dimension()],
            fitness,
            local_index: idx,
        };
        let reports = vec![ChampionReport {
            client_id: 0,
            champions: vec![
                mk(base, 0.5, 0),
                mk(dup, 0.8, 1),
                mk(distinct, 0.6, 2),
                mk(empty, 0.9, 3),
            ],
        }];
        let selected = select_final_features(&reports, &cfg, &shape, 9).unwrap();
        assert_eq!(selected.len(), 2);
        // Duplicate collapsed, keeping the higher fitness.
        assert!((selected[0].fitness - 0.8).abs() < 1e-12);
        assert_eq!(selected[0].round, 9);
        assert_ne!(selected[0].expr, selected[1].expr);

        // All champions below threshold: keep exactly the single best.
        let strict = RunConfig {
            igr_threshold: 0.99,
            ..cfg
        };
        let selected = select_final_features(&reports, &strict, &shape, 9).unwrap();
        assert_eq!(selected.len(), 1);
        assert!((selected[0].fitness - 0.8).abs() < 1e-12);
    }

    #[test]
    fn privacy_messages_hold_only_program_data() {
        struct Scan {
            reports: usize,
            updates: usize,
        }
        impl MessageObserver for Scan {
            fn on_report(&mut self, report: &ChampionReport) {
                self.reports += 1;
                let json = serde_json::to_value(report).unwrap();
                assert_keys_allowed(&json);
            }
            fn on_update(&mut self, update: &GlobalUpdate) {
                self.updates += 1;
                let json = serde_json::to_value(update).unwrap();
                assert_keys_allowed(&json);
            }
        }
        fn assert_keys_allowed(value: &serde_json::Value) {
            const ALLOWED: [&str; 7] = [
                "client_id",
                "champions",
                "position",
                "velocity",
                "fitness",
                "local_index",
                "clients",
            ];
            match value {
                serde_json::Value::Object(map) => {
                    for (key, nested) in map {
                        assert!(
                            ALLOWED.contains(&key.as_str()) || key == "programs",
                            "unexpected field '{key}' in federation message"
                        );
                        assert_keys_allowed(nested);
                    }
                }
                serde_json::Value::Array(items) => items.iter().for_each(assert_keys_allowed),
                serde_json::Value::String(s) => panic!("string payload '{s}' in message"),
                _ => {}
            }
        }

        let cfg = small_cfg();
        let data = vec![toy_data(12, 1), toy_data(12, 2)];
        let mut scan = Scan {
            reports: 0,
            updates: 0,
        };
        run_ffc_observed(&cfg, &data, &mut scan).unwrap();
        assert_eq!(scan.reports, cfg.clients * cfg.global_rounds);
        assert_eq!(scan.updates, cfg.global_rounds);
    }
}
