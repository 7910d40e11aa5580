//! Q-learning placement of one element per subarea.
//!
//! The state is factored as (subarea, current local position) and elements
//! are moved round-robin, one per step; the reward is always the SNR of the
//! whole placement.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{domain, Error, Result};
use crate::geometry::{distance, CandidateGrid, Configuration, SPACING_SLACK};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Stop after this many episodes with neither a better reward nor a
    /// change in the greedy placement.
    pub convergence_window: usize,
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha <= 1.0
            && (0.0..=1.0).contains(&self.delta)
            && (0.0..=1.0).contains(&self.epsilon)
            && self.episodes > 0
            && self.steps_per_episode > 0
            && self.convergence_window > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid learning parameters {self:?}")))
        }
    }
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            delta: 0.9,
            epsilon: 0.1,
            episodes: 400,
            steps_per_episode: 128,
            convergence_window: 50,
        }
    }
}

/// Action values over `M * K` states and `K` actions, `K = N / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    subareas: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(subareas: usize, actions: usize) -> Self {
        Self {
            subareas,
            actions,
            values: vec![0.0; subareas * actions * actions],
        }
    }

    pub fn subareas(&self) -> usize {
        self.subareas
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn n_states(&self) -> usize {
        self.subareas * self.actions
    }

    /// State index of subarea `m` with its element at local position `local`.
    pub fn state(&self, m: usize, local: usize) -> usize {
        m * self.actions + local
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states() || a >= self.actions {
            return Err(domain(format!(
                "state {s} / action {a} outside a {}x{} table",
                self.n_states(),
                self.actions
            )));
        }
        Ok(())
    }
}

/// `Q(s,a) += alpha (r + delta max_a' Q(s',a') - Q(s,a))`.
pub fn q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    params: &LearnParams,
) -> Result<()> {
    q.check(s, a)?;
    q.check(s_next, 0)?;
    let old = q.get(s, a);
    let target = r + params.delta * q.max_value(s_next);
    q.set(s, a, old + params.alpha * (target - old));
    Ok(())
}

/// Random feasible action with probability `epsilon`, else the best feasible
/// one (lowest index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(
    q: &QTable,
    s: usize,
    epsilon: f64,
    feasible: &[bool],
    rng: &mut R,
) -> Result<usize> {
    q.check(s, 0)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if feasible.len() != q.actions() {
        return Err(domain("feasibility mask does not match the action count"));
    }
    let count = feasible.iter().filter(|f| **f).count();
    if count == 0 {
        return Err(Error::Feasibility(format!("no feasible action in state {s}")));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        let pick = rng.random_range(0..count);
        return Ok(feasible
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .nth(pick)
            .unwrap()
            .0);
    }
    Ok(argmax_masked(q.row(s), feasible).unwrap())
}

fn argmax_masked(values: &[f64], feasible: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, v) in values.iter().enumerate() {
        if feasible[a] && best.is_none_or(|b| *v > values[b]) {
            best = Some(a);
        }
    }
    best
}

/// Minimum-spacing rule between elements of different subareas.
#[derive(Debug, Clone)]
pub struct SpacingRule {
    pub min_spacing: f64,
    /// Subareas close enough to a given one for the rule to bind.
    neighbors: Vec<Vec<usize>>,
}

impl SpacingRule {
    pub fn new(grid: &CandidateGrid, min_spacing: f64) -> Result<Self> {
        if !(min_spacing >= 0.0) || !min_spacing.is_finite() {
            return Err(Error::Config(format!("minimum spacing must be >= 0, got {min_spacing}")));
        }
        let m = grid.members.len();
        let neighbors = (0..m)
            .map(|a| {
                (0..m)
                    .filter(|&b| b != a && grid.subarea_gap(a, b) < min_spacing - SPACING_SLACK)
                    .collect()
            })
            .collect();
        Ok(Self {
            min_spacing,
            neighbors,
        })
    }

    /// Whether `candidate` in `subarea` keeps its distance to the placed
    /// elements (`None` marks an empty subarea).
    pub fn allows(
        &self,
        grid: &CandidateGrid,
        placed: &[Option<usize>],
        subarea: usize,
        candidate: usize,
    ) -> bool {
        let p = grid.candidates[candidate].point;
        self.neighbors[subarea].iter().all(|&b| match placed[b] {
            Some(c) => distance(p, grid.candidates[c].point) >= self.min_spacing - SPACING_SLACK,
            None => true,
        })
    }

    fn mask(&self, grid: &CandidateGrid, placed: &[Option<usize>], subarea: usize, out: &mut [bool]) {
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = self.allows(grid, placed, subarea, grid.members[subarea][a]);
        }
    }
}

/// Reward of a placement given as one candidate index per subarea.
pub trait RewardOracle {
    fn evaluate(&self, positions: &[usize]) -> f64;

    /// Begins incremental evaluation at `positions`.
    fn reset(&mut self, positions: &[usize]) -> f64 {
        self.evaluate(positions)
    }

    /// Reward after `subarea` moved from candidate `from` to `to`;
    /// `positions` already holds the move.
    fn relocate(&mut self, positions: &[usize], _subarea: usize, _from: usize, _to: usize) -> f64 {
        self.evaluate(positions)
    }
}

/// Wraps a closure as a reward.
pub struct FnReward<F>(pub F);

impl<F: Fn(&[usize]) -> f64> RewardOracle for FnReward<F> {
    fn evaluate(&self, positions: &[usize]) -> f64 {
        (self.0)(positions)
    }
}

/// Mean of `(sum_m |h_m| |g_m w|)^2` over a batch of candidate-level draws:
/// the SNR at B when phases are aligned for a fixed beamformer `w`.
#[derive(Debug, Clone)]
pub struct AlignedGainReward {
    n: usize,
    amp: Vec<f64>,
    sums: Vec<f64>,
}

impl AlignedGainReward {
    pub fn new(batch: &[ChannelSet], w: &[Complex64]) -> Result<Self> {
        let n = batch_elements(batch)?;
        let mut amp = Vec::with_capacity(batch.len() * n);
        for ch in batch {
            for c in 0..n {
                amp.push(ch.h2b[c].norm() * ch.row_dot(c, w).norm());
            }
        }
        Ok(Self {
            n,
            amp,
            sums: vec![0.0; batch.len()],
        })
    }
}

impl RewardOracle for AlignedGainReward {
    fn evaluate(&self, positions: &[usize]) -> f64 {
        let b = self.sums.len();
        (0..b)
            .map(|i| {
                let s: f64 = positions.iter().map(|&c| self.amp[i * self.n + c]).sum();
                s * s
            })
            .sum::<f64>()
            / b as f64
    }

    fn reset(&mut self, positions: &[usize]) -> f64 {
        for (i, s) in self.sums.iter_mut().enumerate() {
            *s = positions.iter().map(|&c| self.amp[i * self.n + c]).sum();
        }
        self.mean_square()
    }

    fn relocate(&mut self, _: &[usize], _: usize, from: usize, to: usize) -> f64 {
        for (i, s) in self.sums.iter_mut().enumerate() {
            *s += self.amp[i * self.n + to] - self.amp[i * self.n + from];
        }
        self.mean_square()
    }
}

impl AlignedGainReward {
    fn mean_square(&self) -> f64 {
        self.sums.iter().map(|s| s * s).sum::<f64>() / self.sums.len() as f64
    }
}

/// Transmit strategy paired with fixed (non-optimized) phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPhaseBeam {
    /// MRT toward the effective channel of the selected elements.
    Mrt,
    /// `1_L / sqrt(L)`.
    Uniform,
}

/// Mean SNR at B over a batch when every candidate carries a fixed phase.
#[derive(Debug, Clone)]
pub struct FixedPhaseReward {
    n: usize,
    dims: usize,
    /// Per (draw, candidate): `conj(h_c) psi_c G[c, :]` (or its uniform-beam
    /// projection).
    contrib: Vec<Complex64>,
    sums: Vec<Complex64>,
}

impl FixedPhaseReward {
    /// `phases[i]` holds the candidate phases used with draw `batch[i]`.
    pub fn new(batch: &[ChannelSet], phases: &[Vec<Complex64>], beam: FixedPhaseBeam) -> Result<Self> {
        let n = batch_elements(batch)?;
        if phases.len() != batch.len() || phases.iter().any(|p| p.len() != n) {
            return Err(domain("one phase vector per draw and candidate is required"));
        }
        let l = batch[0].antennas();
        let dims = match beam {
            FixedPhaseBeam::Mrt => l,
            FixedPhaseBeam::Uniform => 1,
        };
        let scale = 1.0 / (l as f64).sqrt();
        let mut contrib = Vec::with_capacity(batch.len() * n * dims);
        for (ch, psi) in batch.iter().zip(phases) {
            for c in 0..n {
                let lead = ch.h2b[c].conj() * psi[c];
                match beam {
                    FixedPhaseBeam::Mrt => contrib.extend((0..l).map(|j| lead * ch.g[(c, j)])),
                    FixedPhaseBeam::Uniform => {
                        let row: Complex64 = (0..l).map(|j| ch.g[(c, j)]).sum();
                        contrib.push(lead * row * scale);
                    }
                }
            }
        }
        Ok(Self {
            n,
            dims,
            contrib,
            sums: vec![Complex64::new(0.0, 0.0); batch.len() * dims],
        })
    }

    fn at(&self, draw: usize, c: usize) -> &[Complex64] {
        let start = (draw * self.n + c) * self.dims;
        &self.contrib[start..start + self.dims]
    }

    fn mean_norm(&self) -> f64 {
        self.sums.iter().map(|v| v.norm_sqr()).sum::<f64>() / (self.sums.len() / self.dims) as f64
    }
}

impl RewardOracle for FixedPhaseReward {
    fn evaluate(&self, positions: &[usize]) -> f64 {
        let draws = self.sums.len() / self.dims;
        let mut total = 0.0;
        for i in 0..draws {
            for d in 0..self.dims {
                let s: Complex64 = positions.iter().map(|&c| self.at(i, c)[d]).sum();
                total += s.norm_sqr();
            }
        }
        total / draws as f64
    }

    fn reset(&mut self, positions: &[usize]) -> f64 {
        let draws = self.sums.len() / self.dims;
        for i in 0..draws {
            for d in 0..self.dims {
                self.sums[i * self.dims + d] = positions.iter().map(|&c| self.at(i, c)[d]).sum();
            }
        }
        self.mean_norm()
    }

    fn relocate(&mut self, _: &[usize], _: usize, from: usize, to: usize) -> f64 {
        let draws = self.sums.len() / self.dims;
        for i in 0..draws {
            for d in 0..self.dims {
                let delta = self.at(i, to)[d] - self.at(i, from)[d];
                self.sums[i * self.dims + d] += delta;
            }
        }
        self.mean_norm()
    }
}

fn batch_elements(batch: &[ChannelSet]) -> Result<usize> {
    let first = batch
        .first()
        .ok_or_else(|| domain("reward batch is empty"))?;
    let n = first.elements();
    if batch.iter().any(|c| c.elements() != n || c.antennas() != first.antennas()) {
        return Err(domain("reward batch mixes channel dimensions"));
    }
    Ok(n)
}

const BASELINE_DRAWS: usize = 32;

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct Training {
    pub q: QTable,
    /// `(episode, best reward so far)` after each episode.
    pub trace: Vec<(usize, f64)>,
    pub best_positions: Vec<usize>,
    pub best_reward: f64,
}

impl Training {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("episode,best_reward\n");
        for (e, r) in &self.trace {
            out.push_str(&format!("{e},{r}\n"));
        }
        out
    }
}

/// Runs episodes of round-robin relocations. The first episode starts from
/// `start`, later ones from random feasible placements.
pub fn train<R: Rng + ?Sized, O: RewardOracle + ?Sized>(
    grid: &CandidateGrid,
    reward: &mut O,
    params: &LearnParams,
    rule: &SpacingRule,
    start: &Configuration,
    rng: &mut R,
) -> Result<Training> {
    params.validate()?;
    start.validate(grid, rule.min_spacing)?;
    let m = grid.members.len();
    let k = grid.geometry.candidates_per_subarea();
    let mut q = QTable::new(m, k);
    let mut trace = Vec::new();
    let mut best_positions = start.positions.clone();
    let mut best_reward = reward.reset(&best_positions);
    let mut since_improvement = 0;
    let mut policy: Option<Vec<usize>> = None;
    let mut mask = vec![false; k];
    let mut placed: Vec<Option<usize>> = vec![None; m];
    // Rewards enter the update relative to the mean over random placements.
    let mut baseline = 0.0;
    let mut drawn = 0;
    for _ in 0..BASELINE_DRAWS {
        if let Some(p) = random_placement(grid, rule, &mut placed, &mut mask, rng) {
            baseline += reward.evaluate(&p);
            drawn += 1;
        }
    }
    let baseline = if drawn > 0 { baseline / drawn as f64 } else { best_reward };

    for episode in 0..params.episodes {
        let mut positions = match episode {
            0 => start.positions.clone(),
            _ => random_placement(grid, rule, &mut placed, &mut mask, rng)
                .unwrap_or_else(|| start.positions.clone()),
        };
        for (slot, p) in placed.iter_mut().zip(&positions) {
            *slot = Some(*p);
        }
        reward.reset(&positions);
        let improved_before = best_reward;
        for t in 0..params.steps_per_episode {
            let sub = t % m;
            let from = positions[sub];
            let s = q.state(sub, grid.candidates[from].local);
            placed[sub] = None;
            rule.mask(grid, &placed, sub, &mut mask);
            let here = grid.candidates[from].local;
            if mask.iter().enumerate().any(|(a, f)| *f && a != here) {
                mask[here] = false;
            }
            let a = epsilon_greedy(&q, s, params.epsilon, &mask, rng)?;
            let to = grid.members[sub][a];
            positions[sub] = to;
            placed[sub] = Some(to);
            let r = reward.relocate(&positions, sub, from, to);
            if r > best_reward {
                best_reward = r;
                best_positions.clone_from(&positions);
            }
            let next = (t + 1) % m;
            let s_next = q.state(next, grid.candidates[positions[next]].local);
            q_update(&mut q, s, a, r - baseline, s_next, params)?;
        }
        trace.push((episode, best_reward));
        let greedy = extract_greedy(&q, grid, rule).ok().map(|c| c.positions);
        let settled = greedy.is_some() && greedy == policy;
        policy = greedy;
        if best_reward > improved_before || !settled {
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= params.convergence_window {
                break;
            }
        }
    }
    Ok(Training {
        q,
        trace,
        best_positions,
        best_reward,
    })
}

fn random_placement<R: Rng + ?Sized>(
    grid: &CandidateGrid,
    rule: &SpacingRule,
    placed: &mut [Option<usize>],
    mask: &mut [bool],
    rng: &mut R,
) -> Option<Vec<usize>> {
    placed.fill(None);
    for sub in 0..placed.len() {
        rule.mask(grid, placed, sub, mask);
        let count = mask.iter().filter(|f| **f).count();
        if count == 0 {
            return None;
        }
        let pick = rng.random_range(0..count);
        let a = mask.iter().enumerate().filter(|(_, f)| **f).nth(pick)?.0;
        placed[sub] = Some(grid.members[sub][a]);
    }
    placed.iter().copied().collect()
}

/// Places subareas in order, each at the feasible action with the largest
/// value over all current positions (lowest index on ties).
pub fn extract_greedy(q: &QTable, grid: &CandidateGrid, rule: &SpacingRule) -> Result<Configuration> {
    let m = grid.members.len();
    let k = q.actions();
    if q.subareas() != m || grid.geometry.candidates_per_subarea() != k {
        return Err(domain("Q-table does not match the candidate grid"));
    }
    let mut placed: Vec<Option<usize>> = vec![None; m];
    let mut mask = vec![false; k];
    let mut values = vec![f64::NEG_INFINITY; k];
    for sub in 0..m {
        for (a, v) in values.iter_mut().enumerate() {
            *v = (0..k)
                .map(|cur| q.get(q.state(sub, cur), a))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        rule.mask(grid, &placed, sub, &mut mask);
        let a = argmax_masked(&values, &mask).ok_or_else(|| {
            Error::Feasibility(format!("no feasible position left for subarea {sub}"))
        })?;
        placed[sub] = Some(grid.members[sub][a]);
    }
    Configuration::from_positions(grid, placed.into_iter().map(Option::unwrap).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, SurfaceGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> LearnParams {
        LearnParams::default()
    }

    #[test]
    fn update_examples() {
        let p = params();
        let mut q = QTable::new(1, 2);
        q_update(&mut q, 0, 1, 1.0, 1, &p).unwrap();
        assert!((q.get(0, 1) - 0.1).abs() < 1e-15);

        let mut q = QTable::new(1, 2);
        q.set(0, 0, 2.0);
        let unit = LearnParams { delta: 1.0, ..p };
        q_update(&mut q, 0, 0, 0.0, 0, &unit).unwrap();
        assert_eq!(q.get(0, 0), 2.0);

        let mut q = QTable::new(1, 2);
        q.set(1, 0, 3.0);
        let full = LearnParams { alpha: 1.0, ..p };
        q_update(&mut q, 0, 1, 0.5, 1, &full).unwrap();
        assert!((q.get(0, 1) - (0.5 + 0.9 * 3.0)).abs() < 1e-15);

        assert!(q_update(&mut q, 5, 0, 0.0, 0, &p).is_err());
        assert!(q_update(&mut q, 0, 2, 0.0, 0, &p).is_err());
    }

    #[test]
    fn greedy_choice_and_masking() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = QTable::new(1, 4);
        q.set(0, 2, 1.0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&q, 0, 0.0, &[true; 4], &mut rng).unwrap(), 2);
        }
        let only = [false, false, false, true];
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&q, 0, 0.5, &only, &mut rng).unwrap(), 3);
        }
        assert!(matches!(
            epsilon_greedy(&q, 0, 0.1, &[false; 4], &mut rng),
            Err(Error::Feasibility(_))
        ));
        assert!(epsilon_greedy(&q, 0, 1.5, &[true; 4], &mut rng).is_err());
    }

    fn tiny_grid(n: usize, m: usize) -> CandidateGrid {
        build_grid(&SurfaceGeometry {
            width_m: 1.0,
            height_m: 1.0,
            n_h: n,
            n_v: 1,
            d_h: 0.1,
            d_v: 0.1,
            wavelength_m: 0.125,
            m_subareas_h: m,
            m_subareas_v: 1,
        })
        .unwrap()
    }

    #[test]
    fn single_subarea_finds_best_candidate() {
        let grid = tiny_grid(4, 1);
        let rule = SpacingRule::new(&grid, 0.0).unwrap();
        let mut reward = FnReward(|p: &[usize]| if p[0] == 3 { 1.0 } else { 0.1 });
        let start = Configuration::from_positions(&grid, vec![0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lp = LearnParams {
            episodes: 200,
            steps_per_episode: 8,
            ..params()
        };
        let out = train(&grid, &mut reward, &lp, &rule, &start, &mut rng).unwrap();
        let cfg = extract_greedy(&out.q, &grid, &rule).unwrap();
        assert_eq!(cfg.positions, vec![3]);
        assert_eq!(out.best_positions, vec![3]);
    }

    #[test]
    fn constant_reward_terminates() {
        let grid = tiny_grid(8, 2);
        let rule = SpacingRule::new(&grid, 1.0 / 7.0).unwrap();
        let mut reward = FnReward(|_: &[usize]| 1.0);
        let start = Configuration::from_positions(&grid, vec![0, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = train(&grid, &mut reward, &params(), &rule, &start, &mut rng).unwrap();
        assert!(out.trace.len() <= params().convergence_window + 1);
        let cfg = extract_greedy(&out.q, &grid, &rule).unwrap();
        cfg.validate(&grid, rule.min_spacing).unwrap();
    }

    #[test]
    fn extraction_respects_spacing() {
        // subarea 0 holds candidates 0..4, subarea 1 holds 4..8 on a line of pitch 1/7
        let grid = tiny_grid(8, 2);
        let rule = SpacingRule::new(&grid, 1.5 / 7.0).unwrap();
        let mut q = QTable::new(2, 4);
        q.set(q.state(0, 0), 3, 5.0);
        q.set(q.state(1, 0), 0, 5.0);
        q.set(q.state(1, 0), 1, 4.0);
        let cfg = extract_greedy(&q, &grid, &rule).unwrap();
        assert_eq!(cfg.positions, vec![3, 5]);
    }

    #[test]
    fn trace_is_nondecreasing() {
        let grid = tiny_grid(8, 2);
        let rule = SpacingRule::new(&grid, 0.0).unwrap();
        let mut reward = FnReward(|p: &[usize]| ((p[0] * 7 + p[1] * 3) % 11) as f64);
        let start = Configuration::from_positions(&grid, vec![0, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = train(&grid, &mut reward, &params(), &rule, &start, &mut rng).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(out.trace_csv().starts_with("episode,best_reward\n"));
    }
}
