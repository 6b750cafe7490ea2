use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{validate_schedule, ScheduledBlock};
use crate::analysis::{count_coincidences, find_peak, fit_gaussian_peak, CoincidenceMode, CorrelationHistogram, PeakFit, PeakSearch};
use crate::error::{Error, Result};
use crate::metrics::{
    basis_visibilities, fidelity_ceiling, fidelity_lower_bound, qber_from_visibility, write_key_values, write_series_csv,
    KeyRateEstimate, MeasurementRecord, SeriesPoint, VisibilityResult, EC_EFFICIENCY,
};
use crate::timetag::TimeTagStream;
use crate::units::PS_PER_S;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    pub window_ps: f64,
    pub mode: CoincidenceMode,
    /// Blocks forming one full set of setting combinations.
    pub blocks_per_cycle: usize,
    pub search: PeakSearch,
    /// Half-width of the per-cycle peak search around the whole-run peak.
    pub cycle_search_half_range_ps: f64,
    pub ec_efficiency: f64,
    /// State fidelity assumed at the source for the fidelity ceiling.
    pub local_fidelity: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            window_ps: 823.0,
            mode: CoincidenceMode::default(),
            blocks_per_cycle: 8,
            search: PeakSearch::default(),
            cycle_search_half_range_ps: 50_000.0,
            ec_efficiency: EC_EFFICIENCY,
            local_fidelity: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub index: usize,
    pub record: MeasurementRecord,
    pub start_s: f64,
    pub rate: f64,
    pub singles_a_rate: f64,
    pub singles_b_rate: f64,
    pub window_center_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    pub index: usize,
    pub start_s: f64,
    pub duration_s: f64,
    pub peak: Option<PeakFit>,
    pub hv: Option<VisibilityResult>,
    pub da: Option<VisibilityResult>,
    pub fidelity_bound: Option<f64>,
    pub key: Option<KeyRateEstimate>,
    pub qber_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub hv: VisibilityResult,
    pub da: VisibilityResult,
    /// Bound from the visibilities pooled over the whole run.
    pub fidelity_bound: f64,
    /// Mean and maximum of the per-cycle bounds; equal to the pooled bound
    /// when no cycle is complete.
    pub mean_fidelity_bound: f64,
    pub max_fidelity_bound: f64,
    pub key: Option<KeyRateEstimate>,
    /// Mean coincidence rates of correlated and uncorrelated setting pairs.
    pub correlated_rate: f64,
    pub uncorrelated_rate: f64,
    /// Accidentals per block from the histogram baseline.
    pub accidental_rate_baseline: f64,
    /// Accidentals per block from the singles product.
    pub accidental_rate_singles: f64,
    pub mean_singles_a: f64,
    pub mean_singles_b: f64,
    /// Ceiling with the measured uncorrelated rate as mixed contribution.
    pub fidelity_ceiling_measured: f64,
    /// Ceiling with the baseline accidentals as mixed contribution.
    pub fidelity_ceiling_baseline: f64,
    pub violates_chsh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub settings: AnalysisSettings,
    pub peak: PeakFit,
    pub histogram: CorrelationHistogram,
    pub blocks: Vec<BlockResult>,
    pub cycles: Vec<CycleResult>,
    pub summary: Summary,
    pub series: Vec<SeriesPoint>,
}

fn ps(s: f64) -> f64 {
    s * PS_PER_S
}

fn check_inputs(a: &TimeTagStream, b: &TimeTagStream, schedule: &[ScheduledBlock]) -> Result<()> {
    validate_schedule(schedule)?;
    if a.bin_width_fs() != b.bin_width_fs() {
        return Err(Error::ScheduleMismatch(format!(
            "tag streams use different bin widths ({} fs vs {} fs)",
            a.bin_width_fs(),
            b.bin_width_fs()
        )));
    }
    let end_ps = ps(schedule.last().map_or(0.0, |s| s.end_s()));
    if let Some(&last) = a.bins().last() {
        let t = last as f64 * a.bin_width_ps();
        if t > end_ps + 1e9 {
            return Err(Error::ScheduleMismatch(format!(
                "local tags run to {:.3} s, past the schedule end {:.3} s",
                t / PS_PER_S,
                end_ps / PS_PER_S
            )));
        }
    }
    Ok(())
}

fn cycle_peak(a: &TimeTagStream, b: &TimeTagStream, start_s: f64, end_s: f64, global: f64, settings: &AnalysisSettings) -> Option<PeakFit> {
    let r = settings.cycle_search_half_range_ps;
    let a = a.slice_ps(ps(start_s), ps(end_s));
    let b = b.slice_ps(ps(start_s) + global - 2.0 * r, ps(end_s) + global + 2.0 * r);
    let search = PeakSearch {
        min_ps: global - r,
        max_ps: global + r,
        ..settings.search.clone()
    };
    let h = find_peak(&a, &b, &search).ok()?;
    fit_gaussian_peak(&h).ok()
}

/// Coincidence analysis of a scheduled run.
///
/// The whole-run histogram fixes the delay; each cycle of
/// `blocks_per_cycle` blocks refits the peak to track drift and centres the
/// window of its blocks there.
pub fn analyze(a: &TimeTagStream, b: &TimeTagStream, schedule: &[ScheduledBlock], settings: &AnalysisSettings) -> Result<Report> {
    check_inputs(a, b, schedule)?;
    if !(settings.window_ps > 0.0) || settings.blocks_per_cycle == 0 {
        return Err(Error::param("analysis", "window must be > 0 and blocks_per_cycle >= 1"));
    }
    let histogram = find_peak(a, b, &settings.search)?;
    let peak = fit_gaussian_peak(&histogram)?;

    let cycles_in: Vec<&[ScheduledBlock]> = schedule.chunks(settings.blocks_per_cycle).collect();
    let evaluated: Vec<(CycleResult, Vec<BlockResult>)> = cycles_in
        .par_iter()
        .enumerate()
        .map(|(ci, blocks)| {
            let start_s = blocks[0].start_s;
            let end_s = blocks[blocks.len() - 1].end_s();
            let cpeak = cycle_peak(a, b, start_s, end_s, peak.center, settings);
            let center = cpeak.map_or(peak.center, |p| p.center);
            let results: Vec<BlockResult> = blocks
                .iter()
                .enumerate()
                .map(|(bi, blk)| {
                    let index = ci * settings.blocks_per_cycle + bi;
                    let (s, e) = (ps(blk.start_s), ps(blk.end_s()));
                    let aa = a.slice_ps(s, e);
                    let bb = b.slice_ps(s + center - settings.window_ps, e + center + settings.window_ps);
                    let coincidences =
                        count_coincidences(&aa, &bb, center, settings.window_ps, settings.mode).expect("window checked");
                    let singles_b = b.slice_ps(s, e).len() as u64;
                    let singles_a_rate = blk.local_singles_rate.unwrap_or(aa.len() as f64 / blk.duration_s);
                    BlockResult {
                        index,
                        record: MeasurementRecord {
                            basis_a: blk.basis_a,
                            basis_b: blk.basis_b,
                            duration_s: blk.duration_s,
                            coincidences,
                            singles_a: (singles_a_rate * blk.duration_s).round() as u64,
                            singles_b,
                        },
                        start_s: blk.start_s,
                        rate: coincidences as f64 / blk.duration_s,
                        singles_a_rate,
                        singles_b_rate: singles_b as f64 / blk.duration_s,
                        window_center_ps: center,
                    }
                })
                .collect();
            let records: Vec<MeasurementRecord> = results.iter().map(|r| r.record).collect();
            let vis = basis_visibilities(&records).ok();
            let fidelity_bound = vis.map(|(h, d)| fidelity_lower_bound(h.visibility, d.visibility));
            let key = KeyRateEstimate::from_records(&records, settings.ec_efficiency).ok();
            let qber_err = vis.map(|(h, d)| 0.25 * h.stderr.hypot(d.stderr));
            let cycle = CycleResult {
                index: ci,
                start_s,
                duration_s: end_s - start_s,
                peak: cpeak,
                hv: vis.map(|v| v.0),
                da: vis.map(|v| v.1),
                fidelity_bound,
                key,
                qber_err,
            };
            (cycle, results)
        })
        .collect();

    let mut cycles = Vec::with_capacity(evaluated.len());
    let mut blocks = Vec::with_capacity(schedule.len());
    for (c, r) in evaluated {
        cycles.push(c);
        blocks.extend(r);
    }
    let summary = summarize(&blocks, &cycles, &peak, &histogram, settings)?;
    let series = cycles
        .iter()
        .filter_map(|c| {
            let key = c.key?;
            let p = c.peak.unwrap_or(peak);
            Some(SeriesPoint {
                time_h: (c.start_s + c.duration_s / 2.0) / 3600.0,
                qber: key.qber,
                qber_err: c.qber_err.unwrap_or(f64::NAN),
                secure_rate: key.secure_rate,
                peak_pos_ps: p.center,
                peak_err_ps: p.center_stderr,
            })
        })
        .collect();
    Ok(Report {
        settings: settings.clone(),
        peak,
        histogram,
        blocks,
        cycles,
        summary,
        series,
    })
}

fn summarize(
    blocks: &[BlockResult],
    cycles: &[CycleResult],
    peak: &PeakFit,
    histogram: &CorrelationHistogram,
    settings: &AnalysisSettings,
) -> Result<Summary> {
    let records: Vec<MeasurementRecord> = blocks.iter().map(|b| b.record).collect();
    let (hv, da) = basis_visibilities(&records)?;
    let fidelity_bound = fidelity_lower_bound(hv.visibility, da.visibility);
    let bounds: Vec<f64> = cycles.iter().filter_map(|c| c.fidelity_bound).collect();
    let (mean_fidelity_bound, max_fidelity_bound) = if bounds.is_empty() {
        (fidelity_bound, fidelity_bound)
    } else {
        (
            bounds.iter().sum::<f64>() / bounds.len() as f64,
            bounds.iter().cloned().fold(f64::MIN, f64::max),
        )
    };

    // pool each setting combination over the run
    let mut pooled: BTreeMap<(String, String), (u64, f64, bool)> = BTreeMap::new();
    for r in &records {
        let e = pooled
            .entry((r.basis_a.to_string(), r.basis_b.to_string()))
            .or_insert((0, 0.0, r.is_correlated()));
        e.0 += r.coincidences;
        e.1 += r.duration_s;
    }
    let rates = |corr: bool| -> (f64, usize) {
        let v: Vec<f64> = pooled.values().filter(|p| p.2 == corr).map(|p| p.0 as f64 / p.1).collect();
        (v.iter().sum(), v.len())
    };
    let (corr_sum, n_corr) = rates(true);
    let (uncorr_sum, n_uncorr) = rates(false);
    let key = if pooled.len() >= 8 {
        let sifted = (corr_sum + uncorr_sum) / 4.0;
        Some(KeyRateEstimate::new(sifted, qber_from_visibility(fidelity_bound), settings.ec_efficiency))
    } else {
        None
    };

    let total_s: f64 = blocks.iter().map(|b| b.record.duration_s).sum();
    let baseline_counts = peak.baseline.max(0.0) * settings.window_ps / histogram.bin_width_ps();
    let accidental_rate_baseline = baseline_counts / total_s;
    let mean = |f: &dyn Fn(&BlockResult) -> f64| blocks.iter().map(|b| f(b) * b.record.duration_s).sum::<f64>() / total_s;
    let mean_singles_a = mean(&|b| b.singles_a_rate);
    let mean_singles_b = mean(&|b| b.singles_b_rate);
    let accidental_rate_singles = mean(&|b| b.singles_a_rate * b.singles_b_rate) * settings.window_ps / PS_PER_S;
    let correlated_rate = corr_sum / n_corr.max(1) as f64;
    let uncorrelated_rate = uncorr_sum / n_uncorr.max(1) as f64;
    Ok(Summary {
        hv,
        da,
        fidelity_bound,
        mean_fidelity_bound,
        max_fidelity_bound,
        key,
        correlated_rate,
        uncorrelated_rate,
        accidental_rate_baseline,
        accidental_rate_singles,
        mean_singles_a,
        mean_singles_b,
        fidelity_ceiling_measured: fidelity_ceiling(settings.local_fidelity, correlated_rate, uncorrelated_rate),
        fidelity_ceiling_baseline: fidelity_ceiling(
            settings.local_fidelity,
            (correlated_rate - accidental_rate_baseline).max(0.0),
            accidental_rate_baseline,
        ),
        violates_chsh: fidelity_bound > std::f64::consts::FRAC_1_SQRT_2,
    })
}

impl Report {
    pub fn key_values(&self) -> Vec<(String, String)> {
        let s = &self.summary;
        let mut kv: Vec<(String, String)> = vec![
            ("window_ps".into(), self.settings.window_ps.to_string()),
            ("peak_center_ps".into(), self.peak.center.to_string()),
            ("peak_center_stderr_ps".into(), self.peak.center_stderr.to_string()),
            ("peak_fwhm_ps".into(), self.peak.fwhm.to_string()),
            ("peak_fwhm_stderr_ps".into(), self.peak.fwhm_stderr.to_string()),
            ("visibility_hv".into(), s.hv.visibility.to_string()),
            ("visibility_hv_stderr".into(), s.hv.stderr.to_string()),
            ("visibility_da".into(), s.da.visibility.to_string()),
            ("visibility_da_stderr".into(), s.da.stderr.to_string()),
            ("fidelity_bound".into(), s.fidelity_bound.to_string()),
            ("mean_fidelity_bound".into(), s.mean_fidelity_bound.to_string()),
            ("max_fidelity_bound".into(), s.max_fidelity_bound.to_string()),
            ("violates_chsh".into(), s.violates_chsh.to_string()),
            ("correlated_rate".into(), s.correlated_rate.to_string()),
            ("uncorrelated_rate".into(), s.uncorrelated_rate.to_string()),
            ("accidental_rate_baseline".into(), s.accidental_rate_baseline.to_string()),
            ("accidental_rate_singles".into(), s.accidental_rate_singles.to_string()),
            ("singles_a".into(), s.mean_singles_a.to_string()),
            ("singles_b".into(), s.mean_singles_b.to_string()),
            ("fidelity_ceiling_measured".into(), s.fidelity_ceiling_measured.to_string()),
            ("fidelity_ceiling_baseline".into(), s.fidelity_ceiling_baseline.to_string()),
            ("blocks".into(), self.blocks.len().to_string()),
            ("cycles".into(), self.cycles.len().to_string()),
        ];
        if let Some(k) = s.key {
            kv.push(("qber".into(), k.qber.to_string()));
            kv.push(("sifted_rate".into(), k.sifted_rate.to_string()));
            kv.push(("secure_rate".into(), k.secure_rate.to_string()));
            kv.push(("ec_efficiency".into(), k.ec_efficiency.to_string()));
        }
        kv
    }

    pub fn blocks_csv(&self) -> String {
        let mut s = String::from("block,basis_a,basis_b,start_s,duration_s,coincidences,rate,singles_a_rate,singles_b_rate,window_center_ps\n");
        for b in &self.blocks {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                b.index,
                b.record.basis_a,
                b.record.basis_b,
                b.start_s,
                b.record.duration_s,
                b.record.coincidences,
                b.rate,
                b.singles_a_rate,
                b.singles_b_rate,
                b.window_center_ps
            ));
        }
        s
    }

    /// Writes `report.txt`, `report.json`, `series.csv`, `blocks.csv`,
    /// `histogram.csv` and `peak.json`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let io = |name: &str, r: std::io::Result<()>| r.map_err(|e| Error::io(dir.join(name), e));
        let mut txt = Vec::new();
        io("report.txt", write_key_values(&mut txt, self.key_values()))?;
        io("report.txt", std::fs::write(dir.join("report.txt"), txt))?;
        let mut series = Vec::new();
        io("series.csv", write_series_csv(&mut series, &self.series))?;
        io("series.csv", std::fs::write(dir.join("series.csv"), series))?;
        io("blocks.csv", std::fs::write(dir.join("blocks.csv"), self.blocks_csv()))?;
        let mut hist = Vec::new();
        io("histogram.csv", self.histogram.write_csv(&mut hist))?;
        io("histogram.csv", std::fs::write(dir.join("histogram.csv"), hist))?;
        io("peak.json", std::fs::write(dir.join("peak.json"), to_json(&self.peak)))?;
        io("report.json", std::fs::write(dir.join("report.json"), to_json(self)))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format("report", e.to_string()))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}
