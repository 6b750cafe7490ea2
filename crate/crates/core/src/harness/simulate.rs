use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{remote_physical, LinkConfig};
use super::schedule::ScheduledBlock;
use crate::detection::{dark_count_times, PairDetector};
use crate::environment::{drift_trajectory, DelayDrift};
use crate::error::{Error, Result};
use crate::fibre_channel::Fibre;
use crate::pair_source::{poisson_events, poisson_times};
use crate::quantum_state::PolarizationBasisSetting as B;
use crate::rng::{Module, StreamKey};
use crate::timetag::TimeTagStream;
use crate::units::PS_PER_S;

/// Per-block totals recorded while simulating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub index: usize,
    pub basis_a: B,
    pub basis_b: B,
    pub start_s: f64,
    pub duration_s: f64,
    /// Local singles rate; estimated from the gated exposure when gating is on.
    pub local_singles_rate: f64,
    pub remote_singles: u64,
    pub remote_dark: u64,
    /// Pairs for which both photons produced a click.
    pub pair_coincidences: u64,
}

/// Both tag streams of a run plus its block bookkeeping.
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub local: TimeTagStream,
    pub remote: TimeTagStream,
    pub blocks: Vec<BlockSummary>,
}

impl SimulatedRun {
    pub fn schedule(&self) -> Vec<ScheduledBlock> {
        self.blocks
            .iter()
            .map(|b| ScheduledBlock {
                basis_a: b.basis_a,
                basis_b: b.basis_b,
                start_s: b.start_s,
                duration_s: b.duration_s,
                local_singles_rate: Some(b.local_singles_rate),
            })
            .collect()
    }
}

/// Written next to the tag files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub local_tags: PathBuf,
    pub remote_tags: PathBuf,
    pub schedule: PathBuf,
    pub config: LinkConfig,
    pub blocks: Vec<BlockSummary>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))
    }
}

/// Merges `[lo, hi)` intervals sorted by start.
fn merge_intervals(sorted: impl IntoIterator<Item = (u64, u64)>) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (lo, hi) in sorted {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn overlap(a: (u64, u64), lo: u64, hi: u64) -> u64 {
    a.1.min(hi).saturating_sub(a.0.max(lo))
}

/// Simulates the whole schedule in memory.
pub fn simulate(cfg: &LinkConfig, seed: u64) -> Result<SimulatedRun> {
    cfg.validate()?;
    let blocks = cfg.blocks();
    let cfg = cfg.effective();
    let key = StreamKey::new(seed);
    let state = cfg.source.state()?;
    let drift = match &cfg.temperature {
        Some(profile) => drift_trajectory(profile, &cfg.thermal),
        None => DelayDrift::none(),
    };
    let fibre = Fibre::new(&cfg.channel, drift, seed)?;
    let survival = cfg.channel.transmission() * cfg.source.remote_coupling;
    let surviving_rate = cfg.source.pair_rate * survival;
    let local_pass = (state.local_marginal() * B::H.projector_with_contrast(cfg.detector_local.analyzer_contrast))
        .trace()
        .re;
    // local clicks from pairs whose partner was lost, plus local dark counts
    let background_rate = cfg.source.pair_rate * (1.0 - survival) * cfg.source.local_coupling * cfg.detector_local.efficiency * local_pass
        + cfg.detector_local.dark_rate;

    let mut local_bins = Vec::new();
    let mut remote_bins = Vec::new();
    let mut spans = Vec::with_capacity(blocks.len());
    let mut summaries = Vec::with_capacity(blocks.len());
    let mut start = 0u64;
    for (index, block) in blocks.iter().enumerate() {
        let end = start + (block.duration_s * PS_PER_S).round() as u64;
        let events = poisson_events(
            surviving_rate,
            cfg.source.signal_channel.fwhm_nm,
            start,
            end,
            key,
            Module::PairSource,
        );
        let photons = fibre.propagate_survivors(&events);
        let detector = PairDetector {
            state: &state,
            local_basis: block.basis_a,
            remote_basis: remote_physical(block.basis_b),
            local: &cfg.detector_local,
            remote: &cfg.detector_remote,
            tagger: &cfg.tagger,
            local_coupling: cfg.source.local_coupling,
        };
        let clicks = detector.detect(&photons, key);
        let dark = dark_count_times(cfg.detector_remote.dark_rate, start, end, key, Module::DarkRemote);
        summaries.push(BlockSummary {
            index,
            basis_a: block.basis_a,
            basis_b: block.basis_b,
            start_s: start as f64 / PS_PER_S,
            duration_s: block.duration_s,
            local_singles_rate: 0.0,
            remote_singles: (clicks.remote_bins.len() + dark.len()) as u64,
            remote_dark: dark.len() as u64,
            pair_coincidences: clicks.coincident,
        });
        spans.push((start, end, clicks.local_bins.len() as u64));
        local_bins.extend(clicks.local_bins);
        remote_bins.extend(clicks.remote_bins);
        remote_bins.extend(dark.into_iter().map(|t| cfg.tagger.quantize(t, 0.0)));
        start = end;
    }
    let run_end = start;
    remote_bins.par_sort_unstable();

    match cfg.local_gate_ps.filter(|&g| g > 0.0) {
        None => {
            for ((s, e, paired), summary) in spans.iter().zip(&mut summaries) {
                let bg = dark_count_times(background_rate, *s, *e, key, Module::Background);
                summary.local_singles_rate = (paired + bg.len() as u64) as f64 / summary.duration_s;
                local_bins.extend(bg.into_iter().map(|t| cfg.tagger.quantize(t, 0.0)));
            }
        }
        Some(gate_ps) => {
            let bin_fs = cfg.tagger.bin_width_fs() as f64;
            let base = cfg.channel.base_delay_ps;
            let intervals = merge_intervals(remote_bins.iter().map(|&b| {
                let centre = b as f64 * bin_fs / 1000.0 - base;
                let lo = (centre - gate_ps).max(0.0) as u64;
                let hi = ((centre + gate_ps).max(0.0) as u64).min(run_end);
                (lo, hi.max(lo))
            }));
            let background: Vec<Vec<u64>> = intervals
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut rng = key.stream(Module::Background, lo);
                    let mut v = Vec::new();
                    poisson_times(&mut rng, background_rate, lo, hi, &mut v);
                    v
                })
                .collect();
            for ((s, e, paired), summary) in spans.iter().zip(&mut summaries) {
                let i0 = intervals.partition_point(|iv| iv.1 <= *s);
                let i1 = intervals.partition_point(|iv| iv.0 < *e);
                let (exposure, n): (u64, u64) = intervals[i0..i1]
                    .iter()
                    .zip(&background[i0..i1])
                    .fold((0, 0), |(x, n), (iv, times)| {
                        let inside = times.iter().filter(|&&t| t >= *s && t < *e).count() as u64;
                        (x + overlap(*iv, *s, *e), n + inside)
                    });
                let bg_rate = if exposure > 0 {
                    n as f64 / (exposure as f64 / PS_PER_S)
                } else {
                    background_rate
                };
                summary.local_singles_rate = bg_rate + *paired as f64 / summary.duration_s;
            }
            local_bins.extend(background.into_iter().flatten().map(|t| cfg.tagger.quantize(t, 0.0)));
        }
    }
    local_bins.par_sort_unstable();
    let bin_fs = cfg.tagger.bin_width_fs();
    Ok(SimulatedRun {
        local: TimeTagStream::from_bins(bin_fs, local_bins, cfg.detector_local.channel)?,
        remote: TimeTagStream::from_bins(bin_fs, remote_bins, cfg.detector_remote.channel)?,
        blocks: summaries,
    })
}

/// Simulates and writes `a.qtt`, `b.qtt`, `schedule.csv` and `manifest.toml` to `out_dir`.
pub fn run_simulation(cfg: &LinkConfig, seed: u64, out_dir: &Path) -> Result<RunManifest> {
    let run = simulate(cfg, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (a, b, sched) = (PathBuf::from("a.qtt"), PathBuf::from("b.qtt"), PathBuf::from("schedule.csv"));
    run.local.save(&out_dir.join(&a))?;
    run.remote.save(&out_dir.join(&b))?;
    super::schedule::write_schedule(&out_dir.join(&sched), &run.schedule())?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        local_tags: a,
        remote_tags: b,
        schedule: sched,
        config: cfg.clone(),
        blocks: run.blocks,
    };
    let path = out_dir.join("manifest.toml");
    let text = toml::to_string(&manifest).map_err(|e| Error::format("manifest", e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
