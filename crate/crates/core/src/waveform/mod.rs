//! Value-change-dump decoding and tabular waveform views.

mod table;
mod vcd;

pub use table::{rising_edges, tabulate, window_around, WaveRow, WaveTable};
pub use vcd::{parse_vcd, to_vcd, Change, SignalInfo, Timescale, WaveDb};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WaveError {
    #[error("malformed VCD at byte {offset}: {reason}")]
    VcdFormat { offset: usize, reason: String },
    #[error("id-code '{code}' {reason}")]
    DuplicateIdCode { code: String, reason: String },
    #[error("unknown signal(s) {}{}", names.join(", "), near_note(near))]
    UnknownSignal { names: Vec<String>, near: Vec<String> },
    #[error("signal '{name}' is ambiguous: {}", candidates.join(", "))]
    AmbiguousSignal { name: String, candidates: Vec<String> },
    #[error("clock '{clock}' never rises")]
    NoEdges { clock: String },
    #[error("window start {start} is after end {end}")]
    InvalidWindow { start: u64, end: u64 },
}

fn near_note(near: &[String]) -> String {
    if near.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {})", near.join(", "))
    }
}

/// Default cycles shown before and after a mismatch.
pub const DEFAULT_CYCLES_BEFORE: usize = 3;
pub const DEFAULT_CYCLES_AFTER: usize = 2;

#[cfg(test)]
mod props {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;

    prop_compose! {
        fn random_db()(
            sigs in proptest::collection::vec((1usize..6, 0usize..3), 1..6),
            steps in proptest::collection::vec((0u64..4, proptest::collection::vec(any::<u32>(), 6)), 0..20),
            tail in 0u64..5,
        ) -> WaveDb {
            let mut db = WaveDb::default();
            for (i, (width, scope)) in sigs.iter().enumerate() {
                let name = match scope {
                    0 => format!("s{i}"),
                    1 => format!("tb.s{i}"),
                    _ => format!("tb.dut.s{i}"),
                };
                db.signals.insert(name.clone(), SignalInfo { width: *width, id_code: format!("c{i}") });
                db.changes.insert(name, Vec::new());
            }
            let names: Vec<String> = db.signals.keys().cloned().collect();
            let mut now = 0;
            for (dt, picks) in steps {
                now += dt;
                for (name, pick) in names.iter().zip(&picks) {
                    if pick % 3 != 0 {
                        continue;
                    }
                    let width = db.signals[name].width;
                    let value: String = (0..width)
                        .map(|b| match (pick >> (2 * b + 2)) & 7 {
                            0 => 'x',
                            1 => 'z',
                            k if k % 2 == 0 => '0',
                            _ => '1',
                        })
                        .collect();
                    let list = db.changes.get_mut(name).unwrap();
                    match list.last_mut() {
                        Some(last) if last.time == now => last.value = value,
                        _ => list.push(Change { time: now, value }),
                    }
                }
            }
            db.end_time = now + tail;
            db
        }
    }

    fn linear_scan(db: &WaveDb, name: &str, t: u64) -> String {
        let mut v = "x".repeat(db.signals[name].width);
        for c in &db.changes[name] {
            if c.time <= t {
                v = c.value.clone();
            }
        }
        v
    }

    proptest! {
        #[test]
        fn vcd_round_trip(db in random_db()) {
            let text = to_vcd(&db);
            let again = parse_vcd(text.as_bytes()).unwrap();
            prop_assert_eq!(&db, &again);
            for (name, list) in &again.changes {
                prop_assert!(list.windows(2).all(|w| w[0].time < w[1].time));
                prop_assert!(list.iter().all(|c| c.value.len() == again.signals[name].width));
            }
        }

        #[test]
        fn table_matches_linear_scan(db in random_db(), a in 0u64..60, span in 0u64..60) {
            let names: Vec<String> = db.signals.keys().cloned().collect();
            let table = tabulate(&db, &names, (a, a + span)).unwrap();
            prop_assert!(table.rows.windows(2).all(|w| w[0].time < w[1].time));
            prop_assert_eq!(table.rows[0].time, a);
            let mut expected_times: Vec<u64> = vec![a];
            let mut extra: BTreeMap<u64, ()> = BTreeMap::new();
            for n in &names {
                for c in &db.changes[n] {
                    if c.time > a && c.time <= a + span {
                        extra.insert(c.time, ());
                    }
                }
            }
            expected_times.extend(extra.keys());
            let times: Vec<u64> = table.rows.iter().map(|r| r.time).collect();
            prop_assert_eq!(times, expected_times);
            for row in &table.rows {
                prop_assert!(row.time >= a && row.time <= a + span);
                for (n, v) in names.iter().zip(&row.values) {
                    prop_assert_eq!(v, &linear_scan(&db, n, row.time));
                }
            }
        }
    }
}
