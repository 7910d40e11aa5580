//! Ranking of architectures by Monte Carlo outage and checks of the expected
//! dominance relations.

use super::config::Architecture;
use super::run::SweepResult;
use crate::error::{domain, Result};

/// Two estimates count as different only beyond this many combined
/// standard errors.
pub const SIGNIFICANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    /// Position of the source result in the input list.
    pub source: usize,
    pub architecture: Architecture,
    pub sop_mc: f64,
    pub stderr: f64,
    /// 1 + number of entries significantly better than this one.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `first` should have the lower outage.
    Dominates,
    /// The gap is expected to be small.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// `first` is significantly better.
    FirstBetter,
    /// Within the significance band.
    Tie,
    /// `second` is significantly better.
    SecondBetter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationCheck {
    pub first: Architecture,
    pub second: Architecture,
    pub relation: Relation,
    pub status: Status,
}

impl RelationCheck {
    pub fn violated(&self) -> bool {
        match self.relation {
            Relation::Dominates => self.status == Status::SecondBetter,
            Relation::Marginal => false,
        }
    }

    /// Label used in reports: "holds", "tie", "violated" or "marginal".
    pub fn label(&self) -> &'static str {
        match (self.relation, self.status) {
            (Relation::Marginal, Status::Tie) => "marginal",
            (Relation::Marginal, Status::FirstBetter) => "first_better",
            (Relation::Marginal, Status::SecondBetter) => "second_better",
            (Relation::Dominates, Status::FirstBetter) => "holds",
            (Relation::Dominates, Status::Tie) => "tie",
            (Relation::Dominates, Status::SecondBetter) => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub gamma_bar_b_db: f64,
    /// Sorted by outage, best first.
    pub ranking: Vec<RankEntry>,
    pub relations: Vec<RelationCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    pub points: Vec<PointReport>,
}

impl OrderingReport {
    pub fn violations(&self) -> Vec<(f64, &RelationCheck)> {
        self.points
            .iter()
            .flat_map(|p| {
                p.relations
                    .iter()
                    .filter(|r| r.violated())
                    .map(move |r| (p.gamma_bar_b_db, r))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!("gamma_bar_b_db = {}\n", p.gamma_bar_b_db));
            for e in &p.ranking {
                out.push_str(&format!(
                    "  {} [{}] {} sop_mc={} se={}\n",
                    e.rank, e.source, e.architecture, e.sop_mc, e.stderr
                ));
            }
            for r in &p.relations {
                out.push_str(&format!("  {} vs {}: {}\n", r.first, r.second, r.label()));
            }
        }
        out
    }
}

const EXPECTED: [(Architecture, Architecture, Relation); 3] = [
    (
        Architecture::FrisSpo,
        Architecture::RisConventionalRandomPs,
        Relation::Dominates,
    ),
    (
        Architecture::FrisSpoBfPs,
        Architecture::RisCompactBfPs,
        Relation::Dominates,
    ),
    (
        Architecture::FrisSpoBfPs,
        Architecture::RisConventionalBfPs,
        Relation::Marginal,
    ),
];

/// Orders two estimates with the significance band of [`SIGNIFICANCE`].
pub fn compare_estimates(a: (f64, f64), b: (f64, f64)) -> Status {
    let band = SIGNIFICANCE * (a.1 * a.1 + b.1 * b.1).sqrt();
    if a.0 < b.0 - band {
        Status::FirstBetter
    } else if b.0 < a.0 - band {
        Status::SecondBetter
    } else {
        Status::Tie
    }
}

/// Ranks every `(result, architecture)` series at each sweep point.
pub fn compare_architectures(results: &[SweepResult]) -> Result<OrderingReport> {
    let first = results.first().ok_or_else(|| domain("nothing to compare"))?;
    let grid = first.sweep_points();
    for r in results {
        if r.sweep_points() != grid {
            return Err(domain(format!(
                "results '{}' and '{}' use different sweep grids",
                first.name, r.name
            )));
        }
        for arch in r.fits.iter().map(|f| f.architecture) {
            if r.series(arch).len() != grid.len() {
                return Err(domain(format!("'{}' lacks points for {arch}", r.name)));
            }
        }
    }
    let mut points = Vec::with_capacity(grid.len());
    for &db in &grid {
        let mut entries: Vec<RankEntry> = results
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.rows
                    .iter()
                    .filter(move |row| row.gamma_bar_b_db == db)
                    .map(move |row| RankEntry {
                        source: i,
                        architecture: row.architecture,
                        sop_mc: row.sop_mc,
                        stderr: row.sop_mc_stderr,
                        rank: 0,
                    })
            })
            .collect();
        let snapshot = entries.clone();
        for e in entries.iter_mut() {
            e.rank = 1 + snapshot
                .iter()
                .filter(|o| {
                    compare_estimates((o.sop_mc, o.stderr), (e.sop_mc, e.stderr)) == Status::FirstBetter
                })
                .count();
        }
        entries.sort_by(|a, b| {
            a.rank
                .cmp(&b.rank)
                .then(a.sop_mc.total_cmp(&b.sop_mc))
                .then(a.source.cmp(&b.source))
                .then(a.architecture.cmp(&b.architecture))
        });
        let mut relations = Vec::new();
        for (fa, sa, relation) in EXPECTED {
            let find = |arch: Architecture| entries.iter().filter(move |e| e.architecture == arch);
            for x in find(fa) {
                for y in find(sa) {
                    relations.push(RelationCheck {
                        first: fa,
                        second: sa,
                        relation,
                        status: compare_estimates((x.sop_mc, x.stderr), (y.sop_mc, y.stderr)),
                    });
                }
            }
        }
        points.push(PointReport {
            gamma_bar_b_db: db,
            ranking: entries,
            relations,
        });
    }
    Ok(OrderingReport { points })
}
