//! Multivariate marked point data on an observation window.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Sorted event times per mark, observed on `window = (start, end)`.
///
/// Marks are 0-based in memory and 1-based in serialized form.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointSet {
    times: Vec<Vec<f64>>,
    window: (f64, f64),
}

impl MarkedPointSet {
    pub fn new(times: Vec<Vec<f64>>, window: (f64, f64)) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPoints("need at least one mark".into()));
        }
        let (start, end) = window;
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::InvalidPoints(format!("bad window ({start}, {end})")));
        }
        for (m, ts) in times.iter().enumerate() {
            if ts.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidPoints(format!(
                    "times of mark {} are not strictly increasing",
                    m + 1
                )));
            }
            if ts.iter().any(|&t| !(t >= start && t <= end)) {
                return Err(Error::InvalidPoints(format!(
                    "mark {} has a time outside [{start}, {end}]",
                    m + 1
                )));
            }
        }
        Ok(Self { times, window })
    }

    pub fn empty(marks: usize, window: (f64, f64)) -> Result<Self> {
        Self::new(vec![Vec::new(); marks], window)
    }

    pub fn marks(&self) -> usize {
        self.times.len()
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn times(&self, mark: usize) -> &[f64] {
        &self.times[mark]
    }

    pub fn all_times(&self) -> &[Vec<f64>] {
        &self.times
    }

    pub fn total_points(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// Points of `mark` in the half-open interval `[lo, hi)`.
    pub fn times_in(&self, mark: usize, lo: f64, hi: f64) -> &[f64] {
        let ts = &self.times[mark];
        let a = ts.partition_point(|&t| t < lo);
        let b = ts.partition_point(|&t| t < hi);
        &ts[a..b.max(a)]
    }

    /// `N^{(mark)}` over the closed interval `[lo, hi]`.
    pub fn count_closed(&self, mark: usize, lo: f64, hi: f64) -> usize {
        let ts = &self.times[mark];
        let a = ts.partition_point(|&t| t < lo);
        let b = ts.partition_point(|&t| t <= hi);
        b.saturating_sub(a)
    }

    /// Restricts the window (and the points) to `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let times = (0..self.marks())
            .map(|m| self.times[m].iter().copied().filter(|&t| t >= lo && t <= hi).collect())
            .collect();
        Self::new(times, (lo, hi))
    }

    /// CSV: a `# window,<start>,<end>` comment, a `mark,time` header, then one
    /// row per event in time order with 1-based marks.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# window,{:.17e},{:.17e}", self.window.0, self.window.1)?;
        writeln!(out, "mark,time")?;
        let mut rows: Vec<(f64, usize)> = self
            .times
            .iter()
            .enumerate()
            .flat_map(|(m, ts)| ts.iter().map(move |&t| (t, m)))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (t, m) in rows {
            writeln!(out, "{},{:.17e}", m + 1, t)?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv). `marks`
    /// forces the mark count (marks without events are otherwise invisible).
    pub fn read_csv<R: BufRead>(input: R, marks: Option<usize>) -> Result<Self> {
        let mut window = None;
        let mut rows: Vec<(usize, f64)> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            if let Some(rest) = line.strip_prefix('#') {
                let fields: Vec<&str> = rest.trim().split(',').map(str::trim).collect();
                if fields.len() == 3 && fields[0] == "window" {
                    let lo: f64 = fields[1].parse().map_err(|_| parse_err("bad window start"))?;
                    let hi: f64 = fields[2].parse().map_err(|_| parse_err("bad window end"))?;
                    window = Some((lo, hi));
                }
                continue;
            }
            if line.starts_with("mark") {
                continue;
            }
            let (m, t) = line.split_once(',').ok_or_else(|| parse_err("expected mark,time"))?;
            let m: usize = m.trim().parse().map_err(|_| parse_err("bad mark"))?;
            if m == 0 {
                return Err(parse_err("marks are 1-based"));
            }
            let t: f64 = t.trim().parse().map_err(|_| parse_err("bad time"))?;
            rows.push((m - 1, t));
        }
        let window = window.ok_or_else(|| Error::Parse("missing '# window,start,end' line".into()))?;
        let found = rows.iter().map(|r| r.0 + 1).max().unwrap_or(1);
        let n_marks = match marks {
            Some(n) if n < found => {
                return Err(Error::Parse(format!(
                    "file has mark {found} but {n} marks were requested"
                )))
            }
            Some(n) => n,
            None => found,
        };
        let mut times = vec![Vec::new(); n_marks];
        for (m, t) in rows {
            times[m].push(t);
        }
        for ts in &mut times {
            ts.sort_by(f64::total_cmp);
        }
        Self::new(times, window)
    }
}
