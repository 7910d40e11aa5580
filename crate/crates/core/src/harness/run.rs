//! Scenario execution: placement, per-realization BF/PS design, fitting and
//! outage evaluation over the mean-SNR sweep.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use super::config::{Architecture, Placement, Scenario, ScenarioConfig};
use crate::beamphase::{mrt_from_effective, optimize};
use crate::channel::{
    db_to_linear, random_phases, uniform_beamformer, ChannelSampler, ChannelSet, Link, RngStream,
};
use crate::error::{Error, Result};
use crate::geometry::{baseline_compact, baseline_conventional, Configuration};
use crate::qlearn::{
    extract_greedy, train, AlignedGainReward, FixedPhaseBeam, FixedPhaseReward, RewardOracle,
    SpacingRule,
};
use crate::secrecy::{
    fit_mle, fit_mom, sop_closed_form, sop_monte_carlo, sop_monte_carlo_lower_bound, sop_numeric,
    NakagamiFit, SecrecyParams,
};

pub const CSV_HEADER: &str =
    "gamma_bar_b_db,architecture,sop_closed,sop_numeric,sop_mc,sop_mc_stderr,fit_m_b,fit_m_e,fit_omega_b,fit_omega_e";

/// Stream purposes inside one realization.
const PURPOSE_TRAINING: u64 = 0x7472_6169;

/// One `(sweep point, architecture)` result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma_bar_b_db: f64,
    pub architecture: Architecture,
    pub sop_closed: f64,
    pub sop_numeric: f64,
    pub sop_mc: f64,
    pub sop_mc_stderr: f64,
    pub fit_m_b: f64,
    pub fit_m_e: f64,
    pub fit_omega_b: f64,
    pub fit_omega_e: f64,
    /// `|sop_closed - sop_numeric|`.
    pub discrepancy: f64,
    /// Closed-form value exceeded one before clamping.
    pub closed_out_of_range: bool,
    /// Integral with moment-matched instead of ML-fitted laws.
    pub sop_numeric_mom: f64,
    /// Monte Carlo estimate of the lower-bound event `g_B < 2^R g_E`.
    pub sop_mc_lower_bound: f64,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.gamma_bar_b_db,
            self.architecture,
            self.sop_closed,
            self.sop_numeric,
            self.sop_mc,
            self.sop_mc_stderr,
            self.fit_m_b,
            self.fit_m_e,
            self.fit_omega_b,
            self.fit_omega_e
        )
    }
}

/// Fitted laws of one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureFit {
    pub architecture: Architecture,
    pub bob: NakagamiFit,
    pub eve: NakagamiFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub name: String,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<ArchitectureFit>,
    pub trials: usize,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }

    /// Rows of one architecture in sweep order.
    pub fn series(&self, arch: Architecture) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.architecture == arch).collect()
    }

    pub fn sweep_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.rows.iter().map(|r| r.gamma_bar_b_db).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// CSV for several runs distinguished by a leading `sweep_value` column.
pub fn sweep_csv(runs: &[(String, SweepResult)]) -> String {
    let mut out = format!("sweep_value,{CSV_HEADER}\n");
    for (value, res) in runs {
        for r in &res.rows {
            let _ = writeln!(out, "{value},{}", r.to_csv());
        }
    }
    out
}

/// Normalized end-to-end gains `|h^H Psi G w|^2 / reference` of every
/// realization, toward B and E.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSamples {
    pub bob: Vec<f64>,
    pub eve: Vec<f64>,
}

/// Runs every architecture of `config` and tabulates the sweep.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SweepResult> {
    let scenario = config.resolve()?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &arch in &config.architectures {
        let samples = simulate(&scenario, arch)?;
        let (fit, arch_rows) = evaluate(&scenario, arch, &samples)?;
        fits.push(fit);
        rows.extend(arch_rows);
    }
    rows.sort_by(|a, b| {
        a.gamma_bar_b_db
            .total_cmp(&b.gamma_bar_b_db)
            .then(a.architecture.cmp(&b.architecture))
    });
    Ok(SweepResult {
        name: config.name.clone(),
        rows,
        fits,
        trials: config.mc.trials,
    })
}

fn base_stream(s: &Scenario) -> RngStream {
    RngStream::new(s.config.mc.seed, s.config.mc.stream_id)
}

/// Number of realizations drawn per architecture.
pub fn realizations(s: &Scenario) -> usize {
    s.config.mc.trials.max(s.config.fitting.t_sp)
}

/// Draws all realizations of one architecture.
pub fn simulate(s: &Scenario, arch: Architecture) -> Result<GainSamples> {
    let n = realizations(s);
    let base = base_stream(s);
    let mut out = GainSamples {
        bob: Vec::with_capacity(n),
        eve: Vec::with_capacity(n),
    };
    let fixed = match arch {
        Architecture::RisConventionalRandomPs | Architecture::RisConventionalBfPs => {
            Some(baseline_conventional(&s.grid).coordinates)
        }
        Architecture::RisCompactBfPs => Some(baseline_compact(&s.geometry, s.compact_spacing)?),
        Architecture::FrisSpo | Architecture::FrisSpoBfPs => match s.config.learning.placement {
            Placement::FrozenBatch => Some(frozen_placement(s, arch)?.coordinates),
            Placement::PerRealization => None,
        },
    };
    let l = s.config.antennas;
    match fixed {
        Some(points) => {
            let sampler = ChannelSampler::new(&points, &s.kernel, &s.budget, l)?;
            for i in 0..n {
                let mut rng = base.child(i as u64).rng();
                let ch = sampler.sample(&mut rng);
                let (b, e) = realize(s, arch, &ch, None, &mut rng)?;
                out.bob.push(b / s.reference);
                out.eve.push(e / s.reference);
            }
        }
        None => {
            let sampler = ChannelSampler::new(&s.grid.points(), &s.kernel, &s.budget, l)?;
            let rule = SpacingRule::new(&s.grid, s.min_spacing)?;
            let start = baseline_conventional(&s.grid);
            for i in 0..n {
                let mut rng = base.child(i as u64).rng();
                let ch = sampler.sample(&mut rng);
                let psi_all = if arch.optimizes_phases() {
                    None
                } else {
                    Some(random_phases(ch.elements(), &mut rng))
                };
                let placed = {
                    let batch = std::slice::from_ref(&ch);
                    let mut reward = reward_for(s, arch, batch, psi_all.as_ref().map(std::slice::from_ref))?;
                    learn_positions(s, &mut *reward, &rule, &start, &mut rng)?
                };
                let sub = ch.select(&placed.positions);
                let psi = psi_all.map(|p| placed.positions.iter().map(|&c| p[c]).collect());
                let (b, e) = realize(s, arch, &sub, psi, &mut rng)?;
                out.bob.push(b / s.reference);
                out.eve.push(e / s.reference);
            }
        }
    }
    Ok(out)
}

fn reward_for(
    s: &Scenario,
    arch: Architecture,
    batch: &[ChannelSet],
    phases: Option<&[Vec<Complex64>]>,
) -> Result<Box<dyn RewardOracle>> {
    Ok(match phases {
        Some(p) if !arch.optimizes_phases() => Box::new(FixedPhaseReward::new(
            batch,
            p,
            FixedPhaseBeam::from(s.config.random_ps.beamformer),
        )?),
        _ => Box::new(AlignedGainReward::new(batch, &uniform_beamformer(s.config.antennas))?),
    })
}

/// Trains on `reward` and keeps the better of the greedy extraction and the
/// best placement visited.
fn learn_positions<R: Rng + ?Sized>(
    s: &Scenario,
    reward: &mut dyn RewardOracle,
    rule: &SpacingRule,
    start: &Configuration,
    rng: &mut R,
) -> Result<Configuration> {
    let run = train(&s.grid, reward, &s.learn, rule, start, rng)?;
    let greedy = extract_greedy(&run.q, &s.grid, rule)?;
    if reward.evaluate(&greedy.positions) >= run.best_reward {
        Ok(greedy)
    } else {
        Configuration::from_positions(&s.grid, run.best_positions)
    }
}

/// Positions learned once against a fixed batch of candidate-level draws.
pub fn frozen_placement(s: &Scenario, arch: Architecture) -> Result<Configuration> {
    let stream = base_stream(s).child(PURPOSE_TRAINING);
    let mut rng = stream.rng();
    let sampler = ChannelSampler::new(&s.grid.points(), &s.kernel, &s.budget, s.config.antennas)?;
    let batch: Vec<ChannelSet> = (0..s.config.learning.batch)
        .map(|_| sampler.sample(&mut rng))
        .collect();
    let phases: Option<Vec<Vec<Complex64>>> = if arch.optimizes_phases() {
        None
    } else {
        Some(
            batch
                .iter()
                .map(|c| random_phases(c.elements(), &mut rng))
                .collect(),
        )
    };
    let mut reward = reward_for(s, arch, &batch, phases.as_deref())?;
    let rule = SpacingRule::new(&s.grid, s.min_spacing)?;
    let start = baseline_conventional(&s.grid);
    learn_positions(s, &mut *reward, &rule, &start, &mut rng)
}

/// Gains toward B and E for one realization at fixed positions. `psi` holds
/// preset random phases for architectures without phase design.
fn realize<R: Rng + ?Sized>(
    s: &Scenario,
    arch: Architecture,
    ch: &ChannelSet,
    psi: Option<Vec<Complex64>>,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let (psi, w) = if arch.optimizes_phases() {
        let st = optimize(ch, s.config.beamphase.tol, s.config.beamphase.max_iter)?;
        (st.psi, st.w)
    } else {
        let psi = psi.unwrap_or_else(|| random_phases(ch.elements(), rng));
        let w = match FixedPhaseBeam::from(s.config.random_ps.beamformer) {
            FixedPhaseBeam::Mrt => {
                let e = crate::beamphase::effective_channel(ch, &psi)?;
                mrt_from_effective(&e)?
            }
            FixedPhaseBeam::Uniform => uniform_beamformer(ch.antennas()),
        };
        (psi, w)
    };
    let b = ch.end_to_end(Link::Bob, &psi, &w)?.norm_sqr();
    let e = ch.end_to_end(Link::Eve, &psi, &w)?.norm_sqr();
    Ok((b, e))
}

/// Fits both links and evaluates every sweep point.
pub fn evaluate(
    s: &Scenario,
    arch: Architecture,
    samples: &GainSamples,
) -> Result<(ArchitectureFit, Vec<SweepRow>)> {
    let t_sp = s.config.fitting.t_sp;
    let trials = s.config.mc.trials;
    if samples.bob.len() < t_sp.max(trials) || samples.eve.len() != samples.bob.len() {
        return Err(Error::Domain("not enough realizations for fitting and Monte Carlo".into()));
    }
    let mags = |v: &[f64]| v.iter().map(|g| g.sqrt()).collect::<Vec<f64>>();
    let fit_b = fit_mle(&mags(&samples.bob[..t_sp]))?;
    let fit_e = fit_mle(&mags(&samples.eve[..t_sp]))?;
    let mom_b = fit_mom(&samples.bob[..t_sp])?.params;
    let mom_e = fit_mom(&samples.eve[..t_sp])?.params;
    let rate = s.config.secrecy.rate_rs;
    let ge = db_to_linear(s.config.budget.gamma_bar_e_db);
    let mut rows = Vec::new();
    for &db in &s.config.budget.gamma_bar_b_db {
        let gb = db_to_linear(db);
        let pb = fit_b.gamma_params(gb);
        let pe = fit_e.gamma_params(ge);
        let closed = sop_closed_form(pb.k, &SecrecyParams::from_fits(&pb, &pe, rate)?)?;
        let numeric = sop_numeric(&pb, &pe, rate)?;
        let mom = sop_numeric(
            &crate::secrecy::GammaParams { gamma_bar: gb, ..mom_b },
            &crate::secrecy::GammaParams { gamma_bar: ge, ..mom_e },
            rate,
        )?;
        let snr_b: Vec<f64> = samples.bob[..trials].iter().map(|g| gb * g).collect();
        let snr_e: Vec<f64> = samples.eve[..trials].iter().map(|g| ge * g).collect();
        let mc = sop_monte_carlo(&snr_b, &snr_e, rate)?;
        let lb = sop_monte_carlo_lower_bound(&snr_b, &snr_e, rate)?;
        rows.push(SweepRow {
            gamma_bar_b_db: db,
            architecture: arch,
            sop_closed: closed.value,
            sop_numeric: numeric,
            sop_mc: mc.estimate,
            sop_mc_stderr: mc.stderr,
            fit_m_b: fit_b.m,
            fit_m_e: fit_e.m,
            fit_omega_b: fit_b.omega,
            fit_omega_e: fit_e.omega,
            discrepancy: (closed.value - numeric).abs(),
            closed_out_of_range: closed.out_of_range,
            sop_numeric_mom: mom,
            sop_mc_lower_bound: lb.estimate,
        });
    }
    Ok((
        ArchitectureFit {
            architecture: arch,
            bob: fit_b,
            eve: fit_e,
        },
        rows,
    ))
}
