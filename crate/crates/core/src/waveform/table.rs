use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{WaveDb, WaveError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveRow {
    pub time: u64,
    pub values: Vec<String>,
}

/// Signal values sampled at every change inside a time window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveTable {
    /// Names as requested by the caller.
    pub columns: Vec<String>,
    pub rows: Vec<WaveRow>,
    pub window: (u64, u64),
}

impl WaveTable {
    /// Fixed-width grid: a header row starting with `time`, then one line per
    /// row. Every cell is right-aligned to its column width and cells are
    /// separated by two spaces. No trailing whitespace.
    pub fn render(&self) -> String {
        self.render_with_headers(&self.columns)
    }

    /// Same grid with caller-chosen header labels.
    pub fn render_with_headers(&self, headers: &[String]) -> String {
        let mut widths: Vec<usize> = std::iter::once("time".len())
            .chain(headers.iter().map(String::len))
            .collect();
        for row in &self.rows {
            widths[0] = widths[0].max(row.time.to_string().len());
            for (i, v) in row.values.iter().enumerate() {
                widths[i + 1] = widths[i + 1].max(v.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: Vec<&str>| {
            let joined: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(&joined.join("  "));
            out.push('\n');
        };
        line(
            std::iter::once("time")
                .chain(headers.iter().map(String::as_str))
                .collect(),
        );
        for row in &self.rows {
            let t = row.time.to_string();
            line(
                std::iter::once(t.as_str())
                    .chain(row.values.iter().map(String::as_str))
                    .collect(),
            );
        }
        out
    }
}

/// Resolve every name, collecting all failures into one error.
pub(crate) fn resolve_all(db: &WaveDb, names: &[String]) -> Result<Vec<String>, WaveError> {
    let mut resolved = Vec::new();
    let mut missing = Vec::new();
    let mut near = Vec::new();
    for n in names {
        match db.resolve(n) {
            Ok(r) => resolved.push(r),
            Err(WaveError::UnknownSignal { names, near: more }) => {
                missing.extend(names);
                near.extend(more);
            }
            Err(e) => return Err(e),
        }
    }
    if missing.is_empty() {
        Ok(resolved)
    } else {
        near.sort();
        near.dedup();
        Err(WaveError::UnknownSignal { names: missing, near })
    }
}

pub fn tabulate(db: &WaveDb, signals: &[String], window: (u64, u64)) -> Result<WaveTable, WaveError> {
    let (t_start, t_end) = window;
    if t_start > t_end {
        return Err(WaveError::InvalidWindow {
            start: t_start,
            end: t_end,
        });
    }
    let resolved = resolve_all(db, signals)?;
    let mut times = BTreeSet::from([t_start]);
    for name in &resolved {
        times.extend(
            db.changes[name]
                .iter()
                .map(|c| c.time)
                .filter(|t| *t > t_start && *t <= t_end),
        );
    }
    let rows = times
        .into_iter()
        .map(|time| WaveRow {
            time,
            values: resolved
                .iter()
                .map(|n| db.value_at(n, time).expect("resolved"))
                .collect(),
        })
        .collect();
    Ok(WaveTable {
        columns: signals.to_vec(),
        rows,
        window,
    })
}

/// Times at which `clock` rises. The value a signal starts with is not an edge.
pub fn rising_edges(db: &WaveDb, clock: &str) -> Result<Vec<u64>, WaveError> {
    let name = db.resolve(clock)?;
    let changes = &db.changes[&name];
    Ok(changes
        .windows(2)
        .filter(|w| w[1].value.ends_with('1') && !w[0].value.ends_with('1'))
        .map(|w| w[1].time)
        .collect())
}

/// Window from `cycles_before` rising edges before `center` to
/// `cycles_after` edges after it, clamped to the dump.
///
/// The reference edge is the last one at or before `center`. A window that
/// would collapse to a point is stretched to the following edge.
pub fn window_around(
    db: &WaveDb,
    center: u64,
    cycles_before: usize,
    cycles_after: usize,
    clock: &str,
) -> Result<(u64, u64), WaveError> {
    let edges = rising_edges(db, clock)?;
    if edges.is_empty() {
        return Err(WaveError::NoEdges {
            clock: clock.to_string(),
        });
    }
    let (lo, hi) = (db.start_time(), db.end_time.max(*edges.last().expect("nonempty")));
    let n = edges.len() as isize;
    let i = edges.partition_point(|e| *e <= center) as isize - 1;
    let b = i - cycles_before as isize;
    let a = i + cycles_after as isize;
    let start = if b >= 0 { edges[b as usize] } else { lo };
    let mut end = if a >= n {
        hi
    } else if a >= 0 {
        edges[a as usize]
    } else {
        start
    };
    if end <= start {
        end = edges.iter().copied().find(|e| *e > start).unwrap_or(hi);
    }
    Ok((start.max(lo), end.min(hi).max(start)))
}
