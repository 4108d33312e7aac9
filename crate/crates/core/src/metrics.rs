//! The six performance metrics, computed purely from an event log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::eventlog::{EventLog, Record};
use crate::packet::PacketKind;
use crate::{FlowId, NodeId};

/// Measurement interval of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureWindow {
    pub warm_up: f64,
    pub duration: f64,
}

impl MeasureWindow {
    pub fn span(&self) -> f64 {
        self.duration - self.warm_up
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// Unique payload bits delivered inside the window per second.
    pub throughput: f64,
    /// `None` when nothing was originated.
    pub pdr: Option<f64>,
    /// `None` when nothing was delivered.
    pub mean_delay: Option<f64>,
    pub mean_residual_energy: f64,
    /// Joules spent by sources and forwarders per unique delivered packet;
    /// `None` when nothing was delivered.
    pub energy_efficiency: Option<f64>,
    /// Population standard deviation of final residual energies.
    pub std_energy_deviation: f64,
    pub originated: u64,
    pub delivered: u64,
}

/// Selects one metric of a [`RunMetrics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Throughput,
    Pdr,
    MeanDelay,
    MeanResidualEnergy,
    EnergyEfficiency,
    StdEnergyDeviation,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Throughput,
        Metric::Pdr,
        Metric::MeanDelay,
        Metric::MeanResidualEnergy,
        Metric::EnergyEfficiency,
        Metric::StdEnergyDeviation,
    ];

    /// Column name in the CSV outputs.
    pub fn column(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput_bps",
            Metric::Pdr => "pdr",
            Metric::MeanDelay => "mean_delay_s",
            Metric::MeanResidualEnergy => "mean_residual_energy_j",
            Metric::EnergyEfficiency => "energy_efficiency_j_per_pkt",
            Metric::StdEnergyDeviation => "std_energy_deviation_j",
        }
    }

    /// Name of the plot-data file for this metric.
    pub fn figure_file(self) -> &'static str {
        match self {
            Metric::Throughput => "fig2_throughput.csv",
            Metric::Pdr => "fig3_pdr.csv",
            Metric::MeanDelay => "fig4_delay.csv",
            Metric::MeanResidualEnergy => "fig5_residual_energy.csv",
            Metric::EnergyEfficiency => "fig6_energy_efficiency.csv",
            Metric::StdEnergyDeviation => "fig7_energy_std.csv",
        }
    }
}

impl RunMetrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Throughput => Some(self.throughput),
            Metric::Pdr => self.pdr,
            Metric::MeanDelay => self.mean_delay,
            Metric::MeanResidualEnergy => Some(self.mean_residual_energy),
            Metric::EnergyEfficiency => self.energy_efficiency,
            Metric::StdEnergyDeviation => Some(self.std_energy_deviation),
        }
    }
}

/// A metric value or the undefined marker `NA`.
pub struct Cell(pub Option<f64>);

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("NA"),
        }
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn compute_metrics(log: &EventLog, window: MeasureWindow) -> RunMetrics {
    let mut originated = 0u64;
    let mut first_delivery: BTreeMap<(FlowId, u64), (f64, f64, u32)> = BTreeMap::new();
    let mut residual: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut spent: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut carriers: BTreeSet<NodeId> = BTreeSet::new();

    for e in log.iter() {
        match &e.record {
            Record::Originate { .. } => originated += 1,
            Record::Deliver { flow, seq, origin, bits, .. } => {
                first_delivery.entry((*flow, *seq)).or_insert((e.time, *origin, *bits));
            }
            Record::Tx { kind, joules, .. } => {
                *spent.entry(e.node).or_default() += joules;
                if *kind == PacketKind::Data {
                    carriers.insert(e.node);
                }
            }
            Record::Rx { joules, .. } => *spent.entry(e.node).or_default() += joules,
            Record::Final { residual: r } => {
                residual.insert(e.node, *r);
            }
            _ => {}
        }
    }

    let delivered = first_delivery.len() as u64;
    let in_window: f64 = first_delivery
        .values()
        .filter(|(t, _, _)| *t >= window.warm_up && *t <= window.duration)
        .fold(0.0, |acc, (_, _, bits)| acc + *bits as f64);
    let throughput = if window.span() > 0.0 { in_window / window.span() } else { 0.0 };
    let delays: Vec<f64> = first_delivery.values().map(|(t, o, _)| t - o).collect();
    let residuals: Vec<f64> = residual.values().copied().collect();
    let mean_residual = mean(&residuals).unwrap_or(0.0);
    let std = if residuals.is_empty() {
        0.0
    } else {
        (residuals.iter().map(|r| (r - mean_residual).powi(2)).sum::<f64>() / residuals.len() as f64).sqrt()
    };
    let carrier_energy = carriers.iter().fold(0.0, |acc, n| acc + spent.get(n).copied().unwrap_or(0.0));

    RunMetrics {
        throughput,
        pdr: (originated > 0).then(|| delivered as f64 / originated as f64),
        mean_delay: mean(&delays),
        mean_residual_energy: mean_residual,
        energy_efficiency: (delivered > 0).then(|| carrier_energy / delivered as f64),
        std_energy_deviation: std,
        originated,
        delivered,
    }
}

/// Mean and standard error of one metric across repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    /// Repetitions with a defined value.
    pub count: usize,
    /// Repetitions where the metric was undefined.
    pub undefined: usize,
}

pub fn summarize(values: impl IntoIterator<Item = Option<f64>>) -> Summary {
    let mut defined = Vec::new();
    let mut undefined = 0;
    for v in values {
        match v {
            Some(x) => defined.push(x),
            None => undefined += 1,
        }
    }
    let n = defined.len();
    let m = mean(&defined);
    let stderr = m.map(|m| {
        if n < 2 {
            0.0
        } else {
            let var = defined.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        }
    });
    Summary { mean: m, stderr, count: n, undefined }
}

/// Per-metric summaries over a set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub metrics: BTreeMap<Metric, Summary>,
}

impl Aggregate {
    pub fn mean(&self, m: Metric) -> Option<f64> {
        self.metrics[&m].mean
    }
}

pub fn aggregate(runs: &[RunMetrics]) -> Aggregate {
    let metrics = Metric::ALL.iter().map(|&m| (m, summarize(runs.iter().map(|r| r.get(m))))).collect();
    Aggregate { runs: runs.len(), metrics }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: MeasureWindow = MeasureWindow { warm_up: 0.0, duration: 10.0 };

    fn log_of(lines: &str) -> EventLog {
        EventLog::parse(lines).unwrap()
    }

    #[test]
    fn nothing_originated() {
        let m = compute_metrics(&log_of("10,0,final,40\n10,1,final,40\n"), W);
        assert_eq!(m.pdr, None);
        assert_eq!(m.throughput, 0.0);
        assert_eq!(m.energy_efficiency, None);
        assert_eq!(m.std_energy_deviation, 0.0);
        assert_eq!(Cell(m.pdr).to_string(), "NA");
    }

    #[test]
    fn aggregate_of_one_and_two() {
        let base = compute_metrics(&log_of("10,0,final,40\n"), W);
        let one = aggregate(&[base]);
        assert_eq!(one.mean(Metric::MeanResidualEnergy), Some(40.0));
        assert_eq!(one.metrics[&Metric::Pdr].undefined, 1);
        let a = RunMetrics { throughput: 400e3, ..base };
        let b = RunMetrics { throughput: 600e3, ..base };
        let two = aggregate(&[a, b]);
        assert_eq!(two.mean(Metric::Throughput), Some(500e3));
        assert_eq!(two.metrics[&Metric::Throughput].stderr, Some(100e3));
    }
}
