//! Time-tag streams and their on-disk formats.
//!
//! Timestamps are stored as integer bin indices of the tagger together with a
//! stream-level bin width in femtoseconds, so non-integer-picosecond bins
//! (82.3 ps) never accumulate rounding error.
//!
//! Binary layout (little-endian): a 24-byte header made of the magic `QTT1`,
//! the bin width in femtoseconds as `u64`, the channel count as `u32` and
//! 8 reserved zero bytes, followed by 9-byte records of `u64` bin index and
//! `u8` channel. The CSV alternative has the header `bin_index,channel`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QTT1";
pub const HEADER_LEN: usize = 24;
pub const RECORD_LEN: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    bin_width_fs: u64,
    bins: Vec<u64>,
    channels: Vec<u8>,
}

impl TimeTagStream {
    pub fn new(bin_width_fs: u64) -> Self {
        assert!(bin_width_fs > 0, "bin width must be positive");
        Self {
            bin_width_fs,
            bins: Vec::new(),
            channels: Vec::new(),
        }
    }

    /// Builds a single-channel stream; `bins` must be non-decreasing.
    pub fn from_bins(bin_width_fs: u64, bins: Vec<u64>, channel: u8) -> Result<Self> {
        let channels = vec![channel; bins.len()];
        Self::from_parts(bin_width_fs, bins, channels)
    }

    pub fn from_parts(bin_width_fs: u64, bins: Vec<u64>, channels: Vec<u8>) -> Result<Self> {
        if bin_width_fs == 0 {
            return Err(Error::param("bin_width", "must be > 0"));
        }
        if bins.len() != channels.len() {
            return Err(Error::param("channels", "length differs from bins"));
        }
        if bins.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("bins", "timestamps must be non-decreasing"));
        }
        Ok(Self {
            bin_width_fs,
            bins,
            channels,
        })
    }

    pub fn bin_width_fs(&self) -> u64 {
        self.bin_width_fs
    }

    pub fn bin_width_ps(&self) -> f64 {
        self.bin_width_fs as f64 / 1000.0
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn channels(&self) -> &[u8] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Number of distinct channel labels.
    pub fn channel_count(&self) -> u32 {
        let mut seen = [false; 256];
        for &c in &self.channels {
            seen[c as usize] = true;
        }
        seen.iter().filter(|&&s| s).count() as u32
    }

    pub fn time_fs(&self, i: usize) -> i128 {
        self.bins[i] as i128 * self.bin_width_fs as i128
    }

    /// Bin index containing time `t_ps` (floor).
    pub fn bin_of_ps(&self, t_ps: f64) -> u64 {
        ((t_ps * 1000.0) / self.bin_width_fs as f64).floor().max(0.0) as u64
    }

    /// Tags with timestamps in `[start_ps, end_ps)`.
    pub fn slice_ps(&self, start_ps: f64, end_ps: f64) -> TimeTagStream {
        let lo = self.bins.partition_point(|&b| (b as f64) * (self.bin_width_fs as f64) < start_ps * 1000.0);
        let hi = self.bins.partition_point(|&b| (b as f64) * (self.bin_width_fs as f64) < end_ps * 1000.0);
        TimeTagStream {
            bin_width_fs: self.bin_width_fs,
            bins: self.bins[lo..hi].to_vec(),
            channels: self.channels[lo..hi].to_vec(),
        }
    }

    /// Merges another stream with the same bin width, keeping order.
    pub fn merge(&self, other: &TimeTagStream) -> Result<TimeTagStream> {
        if self.bin_width_fs != other.bin_width_fs {
            return Err(Error::param("bin_width", "streams differ in bin width"));
        }
        let (mut i, mut j) = (0, 0);
        let n = self.len() + other.len();
        let mut bins = Vec::with_capacity(n);
        let mut channels = Vec::with_capacity(n);
        while i < self.len() || j < other.len() {
            let take_self = j >= other.len() || (i < self.len() && self.bins[i] <= other.bins[j]);
            if take_self {
                bins.push(self.bins[i]);
                channels.push(self.channels[i]);
                i += 1;
            } else {
                bins.push(other.bins[j]);
                channels.push(other.channels[j]);
                j += 1;
            }
        }
        Ok(TimeTagStream {
            bin_width_fs: self.bin_width_fs,
            bins,
            channels,
        })
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = [0u8; HEADER_LEN];
        header[..4].copy_from_slice(MAGIC);
        header[4..12].copy_from_slice(&self.bin_width_fs.to_le_bytes());
        header[12..16].copy_from_slice(&self.channel_count().to_le_bytes());
        w.write_all(&header)?;
        let mut rec = [0u8; RECORD_LEN];
        for (b, c) in self.bins.iter().zip(&self.channels) {
            rec[..8].copy_from_slice(&b.to_le_bytes());
            rec[8] = *c;
            w.write_all(&rec)?;
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|e| Error::format("time-tag file", format!("short header: {e}")))?;
        if &header[..4] != MAGIC {
            return Err(Error::format("time-tag file", "bad magic"));
        }
        let bin_width_fs = u64::from_le_bytes(header[4..12].try_into().expect("8 bytes"));
        if bin_width_fs == 0 {
            return Err(Error::format("time-tag file", "zero bin width"));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)
            .map_err(|e| Error::format("time-tag file", e.to_string()))?;
        if body.len() % RECORD_LEN != 0 {
            return Err(Error::format("time-tag file", "truncated record"));
        }
        let n = body.len() / RECORD_LEN;
        let mut bins = Vec::with_capacity(n);
        let mut channels = Vec::with_capacity(n);
        for rec in body.chunks_exact(RECORD_LEN) {
            bins.push(u64::from_le_bytes(rec[..8].try_into().expect("8 bytes")));
            channels.push(rec[8]);
        }
        Self::from_parts(bin_width_fs, bins, channels)
            .map_err(|e| Error::format("time-tag file", e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_index,channel")?;
        for (b, c) in self.bins.iter().zip(&self.channels) {
            writeln!(w, "{b},{c}")?;
        }
        w.flush()
    }

    /// CSV carries no bin width, so it is supplied by the caller.
    pub fn read_csv<R: Read>(r: R, bin_width_fs: u64) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::format("time-tag csv", e.to_string()))?;
        if header.as_deref().map(str::trim) != Some("bin_index,channel") {
            return Err(Error::format("time-tag csv", "expected header `bin_index,channel`"));
        }
        let mut bins = Vec::new();
        let mut channels = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::format("time-tag csv", e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (b, c) = line
                .split_once(',')
                .ok_or_else(|| Error::format("time-tag csv", format!("bad row `{line}`")))?;
            bins.push(
                b.trim()
                    .parse()
                    .map_err(|_| Error::format("time-tag csv", format!("bad bin `{b}`")))?,
            );
            channels.push(
                c.trim()
                    .parse()
                    .map_err(|_| Error::format("time-tag csv", format!("bad channel `{c}`")))?,
            );
        }
        Self::from_parts(bin_width_fs, bins, channels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let w = BufWriter::new(f);
        let res = if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(w)
        } else {
            self.write_binary(w)
        };
        res.map_err(|e| Error::io(path, e))
    }

    /// Loads the binary format. CSV files need [`TimeTagStream::read_csv`].
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(BufReader::new(f))
    }
}
