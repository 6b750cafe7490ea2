use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum_state::PolarizationBasisSetting as B;

pub const SCHEDULE_HEADER: &str = "block,basis_a,basis_b,start_s,duration_s,local_singles_rate";

/// A measurement block located in time. `local_singles_rate` overrides the
/// rate counted from the tag file (needed when the local stream is gated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledBlock {
    pub basis_a: B,
    pub basis_b: B,
    pub start_s: f64,
    pub duration_s: f64,
    pub local_singles_rate: Option<f64>,
}

impl ScheduledBlock {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

/// Lays blocks back to back from time zero.
pub fn contiguous(blocks: &[super::Block]) -> Vec<ScheduledBlock> {
    let mut t = 0.0;
    blocks
        .iter()
        .map(|b| {
            let s = ScheduledBlock {
                basis_a: b.basis_a,
                basis_b: b.basis_b,
                start_s: t,
                duration_s: b.duration_s,
                local_singles_rate: None,
            };
            t += b.duration_s;
            s
        })
        .collect()
}

pub fn schedule_to_csv(blocks: &[ScheduledBlock]) -> String {
    let mut s = format!("{SCHEDULE_HEADER}\n");
    for (i, b) in blocks.iter().enumerate() {
        let rate = b.local_singles_rate.map(|r| r.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{i},{},{},{},{},{rate}\n",
            b.basis_a, b.basis_b, b.start_s, b.duration_s
        ));
    }
    s
}

pub fn schedule_from_csv(text: &str) -> Result<Vec<ScheduledBlock>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::format("schedule", "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (ia, ib, is, id) = match (find("basis_a"), find("basis_b"), find("start_s"), find("duration_s")) {
        (Some(a), Some(b), Some(s), Some(d)) => (a, b, s, d),
        _ => {
            return Err(Error::format(
                "schedule",
                "header needs basis_a, basis_b, start_s and duration_s",
            ))
        }
    };
    let ir = find("local_singles_rate");
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| f.get(i).copied().unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            get(i)
                .parse::<f64>()
                .map_err(|_| Error::format("schedule", format!("row {}: bad number `{}`", n + 1, get(i))))
        };
        let rate = match ir.map(get) {
            Some("") | None => None,
            Some(_) => Some(num(ir.unwrap())?),
        };
        out.push(ScheduledBlock {
            basis_a: get(ia).parse()?,
            basis_b: get(ib).parse()?,
            start_s: num(is)?,
            duration_s: num(id)?,
            local_singles_rate: rate,
        });
    }
    validate_schedule(&out)?;
    Ok(out)
}

pub fn validate_schedule(blocks: &[ScheduledBlock]) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::ScheduleMismatch("schedule has no blocks".into()));
    }
    for (i, b) in blocks.iter().enumerate() {
        if !(b.duration_s > 0.0 && b.start_s >= 0.0) {
            return Err(Error::ScheduleMismatch(format!("block {i}: needs start >= 0 and duration > 0")));
        }
        if i > 0 && b.start_s < blocks[i - 1].end_s() - 1e-9 {
            return Err(Error::ScheduleMismatch(format!("block {i} overlaps its predecessor")));
        }
    }
    Ok(())
}

pub fn read_schedule(path: &Path) -> Result<Vec<ScheduledBlock>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    schedule_from_csv(&text)
}

pub fn write_schedule(path: &Path, blocks: &[ScheduledBlock]) -> Result<()> {
    std::fs::write(path, schedule_to_csv(blocks)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut blocks = contiguous(&super::super::default_cycle(100.0));
        blocks[3].local_singles_rate = Some(2.1e6);
        let back = schedule_from_csv(&schedule_to_csv(&blocks)).unwrap();
        assert_eq!(back, blocks);
    }

    #[test]
    fn rejects_overlap_and_garbage() {
        let text = "basis_a,basis_b,start_s,duration_s\nH,V,0,100\nV,H,50,100\n";
        assert!(matches!(schedule_from_csv(text), Err(Error::ScheduleMismatch(_))));
        assert!(schedule_from_csv("basis_a,basis_b\nH,V\n").is_err());
        assert!(schedule_from_csv("basis_a,basis_b,start_s,duration_s\nH,Q,0,1\n").is_err());
    }
}
