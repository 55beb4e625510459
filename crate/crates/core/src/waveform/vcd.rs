use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::WaveError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timescale {
    pub magnitude: u32,
    /// `s`, `ms`, `us`, `ns`, `ps` or `fs`.
    pub unit: String,
}

impl Default for Timescale {
    fn default() -> Self {
        Timescale {
            magnitude: 1,
            unit: "ps".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalInfo {
    pub width: usize,
    pub id_code: String,
}

/// One recorded value: bits MSB first over `0`, `1`, `x`, `z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    pub time: u64,
    pub value: String,
}

/// Decoded value-change dump.
///
/// Signals are keyed by their dotted hierarchical name (`tb.dut.q`). Several
/// names may share one id-code when the dumper aliases nets.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WaveDb {
    pub timescale: Timescale,
    pub signals: BTreeMap<String, SignalInfo>,
    pub changes: BTreeMap<String, Vec<Change>>,
    /// Last timestamp seen in the dump.
    pub end_time: u64,
}

// Equality ignores id-codes so that a re-encoded dump compares equal.
impl PartialEq for WaveDb {
    fn eq(&self, other: &Self) -> bool {
        self.timescale == other.timescale
            && self.end_time == other.end_time
            && self.changes == other.changes
            && self.signals.len() == other.signals.len()
            && self
                .signals
                .iter()
                .zip(&other.signals)
                .all(|((a, ai), (b, bi))| a == b && ai.width == bi.width)
    }
}

impl Eq for WaveDb {}

impl WaveDb {
    pub fn start_time(&self) -> u64 {
        self.changes
            .values()
            .filter_map(|c| c.first().map(|c| c.time))
            .min()
            .unwrap_or(0)
            .min(self.end_time)
    }

    /// Value of a resolved signal at time `t`; all-x before its first change.
    pub fn value_at(&self, name: &str, t: u64) -> Option<String> {
        let width = self.signals.get(name)?.width;
        let changes = &self.changes[name];
        let idx = changes.partition_point(|c| c.time <= t);
        Some(if idx == 0 {
            "x".repeat(width)
        } else {
            changes[idx - 1].value.clone()
        })
    }

    /// Map a possibly partial hierarchical name to a full one.
    ///
    /// Exact names win. Otherwise every name ending in `.name` is a
    /// candidate; candidates that are aliases of one net collapse to the
    /// shortest name, and distinct nets make the lookup ambiguous.
    pub fn resolve(&self, name: &str) -> Result<String, WaveError> {
        if self.signals.contains_key(name) {
            return Ok(name.to_string());
        }
        let suffix = format!(".{name}");
        let candidates: Vec<&String> = self.signals.keys().filter(|k| k.ends_with(&suffix)).collect();
        if candidates.is_empty() {
            return Err(WaveError::UnknownSignal {
                names: vec![name.to_string()],
                near: self.near_matches(name),
            });
        }
        let depth = |c: &&String| c.matches('.').count();
        let shallowest = candidates.iter().map(depth).min().expect("nonempty");
        let top: Vec<&String> = candidates.iter().copied().filter(|c| depth(c) == shallowest).collect();
        let code = &self.signals[top[0]].id_code;
        if top.iter().all(|c| &self.signals[*c].id_code == code) {
            return Ok(top[0].clone());
        }
        Err(WaveError::AmbiguousSignal {
            name: name.to_string(),
            candidates: candidates.into_iter().cloned().collect(),
        })
    }

    fn near_matches(&self, name: &str) -> Vec<String> {
        let needle = name.rsplit('.').next().unwrap_or(name).to_ascii_lowercase();
        let mut near: Vec<String> = self
            .signals
            .keys()
            .filter(|k| {
                let leaf = k.rsplit('.').next().unwrap_or(k).to_ascii_lowercase();
                leaf.contains(&needle) || needle.contains(&leaf) || edit_distance(&leaf, &needle) <= 2
            })
            .cloned()
            .collect();
        near.truncate(8);
        near
    }

    /// Earliest time at which two signals hold different values.
    pub fn first_divergence(&self, a: &str, b: &str) -> Option<u64> {
        let (ca, cb) = (self.changes.get(a)?, self.changes.get(b)?);
        let mut times: Vec<u64> = ca.iter().chain(cb).map(|c| c.time).collect();
        times.sort_unstable();
        times.dedup();
        times.into_iter().find(|&t| self.value_at(a, t) != self.value_at(b, t))
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

struct Tokens<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let rest = &self.src[self.pos..];
        let skip = rest.len() - rest.trim_start().len();
        self.pos += skip;
        if self.pos >= self.src.len() {
            return None;
        }
        let start = self.pos;
        let len = self.src[start..]
            .find(char::is_whitespace)
            .unwrap_or(self.src.len() - start);
        self.pos += len;
        Some((start, &self.src[start..start + len]))
    }

    /// Tokens up to the closing `$end`.
    fn until_end(&mut self, opened_at: usize, keyword: &str) -> Result<Vec<&'a str>, WaveError> {
        let mut out = Vec::new();
        loop {
            match self.next() {
                Some((_, "$end")) => return Ok(out),
                Some((_, tok)) => out.push(tok),
                None => {
                    return Err(format_error(
                        opened_at,
                        format!("{keyword} section is not closed by $end"),
                    ))
                }
            }
        }
    }
}

fn format_error(offset: usize, reason: impl Into<String>) -> WaveError {
    WaveError::VcdFormat {
        offset,
        reason: reason.into(),
    }
}

fn parse_timescale(words: &[&str], offset: usize) -> Result<Timescale, WaveError> {
    let joined: String = words.concat();
    let digits: String = joined.chars().take_while(|c| c.is_ascii_digit()).collect();
    let unit = &joined[digits.len()..];
    let magnitude: u32 = digits
        .parse()
        .map_err(|_| format_error(offset, format!("bad timescale '{joined}'")))?;
    if ![1, 10, 100].contains(&magnitude) || !["s", "ms", "us", "ns", "ps", "fs"].contains(&unit) {
        return Err(format_error(offset, format!("bad timescale '{joined}'")));
    }
    Ok(Timescale {
        magnitude,
        unit: unit.to_string(),
    })
}

fn normalize(raw: &str, width: usize, offset: usize) -> Result<String, WaveError> {
    let bits: String = raw.chars().map(|c| c.to_ascii_lowercase()).collect();
    if bits.is_empty() || !bits.chars().all(|c| matches!(c, '0' | '1' | 'x' | 'z')) {
        return Err(format_error(offset, format!("bad value '{raw}'")));
    }
    if bits.len() > width {
        let (extra, rest) = bits.split_at(bits.len() - width);
        if extra.chars().all(|c| c == '0') {
            return Ok(rest.to_string());
        }
        return Err(format_error(
            offset,
            format!("value '{raw}' is wider than {width} bits"),
        ));
    }
    let fill = match bits.as_bytes()[0] {
        b'x' => 'x',
        b'z' => 'z',
        _ => '0',
    };
    let mut out: String = std::iter::repeat_n(fill, width - bits.len()).collect();
    out.push_str(&bits);
    Ok(out)
}

/// Decode a VCD stream.
pub fn parse_vcd(data: &[u8]) -> Result<WaveDb, WaveError> {
    let src = std::str::from_utf8(data).map_err(|e| format_error(e.valid_up_to(), "stream is not valid UTF-8"))?;
    let mut toks = Tokens { src, pos: 0 };
    let mut db = WaveDb::default();
    let mut scopes: Vec<String> = Vec::new();
    let mut by_code: HashMap<String, (usize, Vec<String>)> = HashMap::new();
    let mut code_order: Vec<String> = Vec::new();

    // header
    loop {
        let Some((off, tok)) = toks.next() else {
            return Err(format_error(src.len(), "missing $enddefinitions"));
        };
        match tok {
            "$date" | "$version" | "$comment" => {
                toks.until_end(off, tok)?;
            }
            "$timescale" => {
                let words = toks.until_end(off, tok)?;
                db.timescale = parse_timescale(&words, off)?;
            }
            "$scope" => {
                let words = toks.until_end(off, tok)?;
                let name = words.get(1).ok_or_else(|| format_error(off, "$scope without a name"))?;
                scopes.push(name.to_string());
            }
            "$upscope" => {
                toks.until_end(off, tok)?;
                if scopes.pop().is_none() {
                    return Err(format_error(off, "$upscope without an open scope"));
                }
            }
            "$var" => {
                let words = toks.until_end(off, tok)?;
                if words.len() < 4 {
                    return Err(format_error(off, "$var needs type, width, id-code and name"));
                }
                if words[0] == "real" || words[0] == "realtime" {
                    return Err(format_error(
                        off,
                        format!("real variable '{}' is not supported", words[3]),
                    ));
                }
                let width: usize = words[1]
                    .parse()
                    .ok()
                    .filter(|w| *w > 0)
                    .ok_or_else(|| format_error(off, format!("bad width '{}'", words[1])))?;
                let code = words[2].to_string();
                let mut leaf = words[3].to_string();
                // `q [3]` style bit references keep the index in the name
                if let Some(idx) = words.get(4).filter(|w| w.starts_with('[') && !w.contains(':')) {
                    leaf.push_str(idx);
                }
                let mut full = scopes.clone();
                full.push(leaf);
                let name = full.join(".");
                match by_code.get_mut(&code) {
                    Some((w, _)) if *w != width => {
                        return Err(WaveError::DuplicateIdCode {
                            code,
                            reason: format!("redeclared with width {width} (was {w})"),
                        })
                    }
                    Some((_, names)) => names.push(name.clone()),
                    None => {
                        by_code.insert(code.clone(), (width, vec![name.clone()]));
                        code_order.push(code.clone());
                    }
                }
                if db.signals.contains_key(&name) {
                    return Err(format_error(off, format!("signal '{name}' declared twice")));
                }
                db.signals.insert(name.clone(), SignalInfo { width, id_code: code });
                db.changes.insert(name, Vec::new());
            }
            "$enddefinitions" => {
                toks.until_end(off, tok)?;
                break;
            }
            other if other.starts_with('#') || other.starts_with("$dump") => {
                return Err(format_error(off, "value changes before $enddefinitions"));
            }
            other => return Err(format_error(off, format!("unexpected '{other}' in header"))),
        }
    }
    if !scopes.is_empty() {
        return Err(format_error(src.len(), "unclosed $scope"));
    }

    // value changes, collected per id-code
    let mut per_code: HashMap<&str, Vec<Change>> = HashMap::new();
    let mut now: u64 = 0;
    let mut record = |code: &str, value: String, now: u64, off: usize| -> Result<(), WaveError> {
        let Some((key, _)) = by_code.get_key_value(code) else {
            return Err(format_error(off, format!("unknown id-code '{code}'")));
        };
        let list = per_code.entry(key.as_str()).or_default();
        match list.last_mut() {
            Some(last) if last.time == now => last.value = value,
            _ => list.push(Change { time: now, value }),
        }
        Ok(())
    };
    while let Some((off, tok)) = toks.next() {
        let first = tok.as_bytes()[0];
        match first {
            b'#' => {
                let t: u64 = tok[1..]
                    .parse()
                    .map_err(|_| format_error(off, format!("bad timestamp '{tok}'")))?;
                if t < now {
                    return Err(format_error(off, format!("time goes backwards at '{tok}'")));
                }
                now = t;
                db.end_time = db.end_time.max(t);
            }
            b'$' => match tok {
                "$dumpvars" | "$dumpall" | "$dumpon" | "$dumpoff" | "$end" => {}
                "$comment" => {
                    toks.until_end(off, tok)?;
                }
                other => return Err(format_error(off, format!("unexpected '{other}'"))),
            },
            b'b' | b'B' => {
                let (coff, code) = toks
                    .next()
                    .ok_or_else(|| format_error(off, "vector value without id-code"))?;
                let width = by_code
                    .get(code)
                    .map(|(w, _)| *w)
                    .ok_or_else(|| format_error(coff, format!("unknown id-code '{code}'")))?;
                let value = normalize(&tok[1..], width, off)?;
                record(code, value, now, coff)?;
            }
            b'r' | b'R' => return Err(format_error(off, "real-valued changes are not supported")),
            b'0' | b'1' | b'x' | b'X' | b'z' | b'Z' => {
                let code = &tok[1..];
                if code.is_empty() {
                    return Err(format_error(off, "scalar value without id-code"));
                }
                let width = by_code
                    .get(code)
                    .map(|(w, _)| *w)
                    .ok_or_else(|| format_error(off, format!("unknown id-code '{code}'")))?;
                let value = normalize(&tok[..1], width, off)?;
                record(code, value, now, off)?;
            }
            _ => return Err(format_error(off, format!("unexpected '{tok}'"))),
        }
    }
    for code in &code_order {
        let (_, names) = &by_code[code];
        if let Some(list) = per_code.get(code.as_str()) {
            for n in names {
                db.changes.insert(n.clone(), list.clone());
            }
        }
    }
    Ok(db)
}

fn id_code(mut n: usize) -> String {
    // printable ASCII 33..=126, as dumpers do
    let mut s = String::new();
    loop {
        s.push((33 + (n % 94)) as u8 as char);
        n /= 94;
        if n == 0 {
            return s;
        }
        n -= 1;
    }
}

#[derive(Default)]
struct ScopeTree {
    vars: Vec<(String, String)>,
    children: BTreeMap<String, ScopeTree>,
}

/// Encode a database as VCD text. Aliased signals keep sharing an id-code.
pub fn to_vcd(db: &WaveDb) -> String {
    let mut codes: BTreeMap<&str, String> = BTreeMap::new();
    let mut fresh: BTreeMap<String, String> = BTreeMap::new();
    let mut widths: BTreeMap<String, usize> = BTreeMap::new();
    let mut tree = ScopeTree::default();
    for (name, info) in &db.signals {
        let n = fresh.len();
        let code = fresh.entry(info.id_code.clone()).or_insert_with(|| id_code(n)).clone();
        codes.insert(name, code.clone());
        widths.insert(code.clone(), info.width);
        let parts = split_hier(name);
        let mut node = &mut tree;
        for p in &parts[..parts.len() - 1] {
            node = node.children.entry(p.to_string()).or_default();
        }
        node.vars.push((parts[parts.len() - 1].to_string(), code));
    }

    let mut out = String::new();
    let _ = writeln!(out, "$timescale {}{} $end", db.timescale.magnitude, db.timescale.unit);
    fn emit(out: &mut String, tree: &ScopeTree, db: &WaveDb, path: &mut Vec<String>) {
        for (leaf, code) in &tree.vars {
            let mut full = path.clone();
            full.push(leaf.clone());
            let width = db.signals[&full.join(".")].width;
            let (base, index) = match leaf.find('[') {
                Some(i) => (&leaf[..i], format!(" {}", &leaf[i..])),
                None => (leaf.as_str(), String::new()),
            };
            let _ = writeln!(out, "$var wire {width} {code} {base}{index} $end");
        }
        for (name, child) in &tree.children {
            let _ = writeln!(out, "$scope module {name} $end");
            path.push(name.clone());
            emit(out, child, db, path);
            path.pop();
            let _ = writeln!(out, "$upscope $end");
        }
    }
    emit(&mut out, &tree, db, &mut Vec::new());
    out.push_str("$enddefinitions $end\n");

    let mut timeline: BTreeMap<u64, BTreeMap<&str, &str>> = BTreeMap::new();
    for (name, list) in &db.changes {
        for c in list {
            timeline
                .entry(c.time)
                .or_default()
                .insert(codes[name.as_str()].as_str(), c.value.as_str());
        }
    }
    let mut last = None;
    for (t, values) in &timeline {
        let _ = writeln!(out, "#{t}");
        for (code, value) in values {
            if widths[*code] == 1 {
                let _ = writeln!(out, "{value}{code}");
            } else {
                let _ = writeln!(out, "b{value} {code}");
            }
        }
        last = Some(*t);
    }
    if last.map_or(db.end_time > 0, |t| db.end_time > t) {
        let _ = writeln!(out, "#{}", db.end_time);
    }
    out
}

/// Split on dots that are not inside a bit index.
fn split_hier(name: &str) -> Vec<&str> {
    let cut = name.find('[').unwrap_or(name.len());
    let mut parts: Vec<&str> = name[..cut].split('.').collect();
    if cut < name.len() {
        let last = parts.len() - 1;
        let start = name[..cut].rfind('.').map_or(0, |i| i + 1);
        parts[last] = &name[start..];
    }
    parts
}


#[cfg(test)]
mod tests {
    use super::tests_support::TOGGLE;
    use super::*;

    #[test]
    fn toggling_wire() {
        let db = parse_vcd(TOGGLE.as_bytes()).unwrap();
        assert_eq!(
            db.changes["tb.q"],
            vec![
                Change {
                    time: 0,
                    value: "0".into()
                },
                Change {
                    time: 5,
                    value: "1".into()
                }
            ]
        );
        assert_eq!(db.end_time, 5);
    }

    #[test]
    fn missing_enddefinitions() {
        let err = parse_vcd(b"$timescale 1ps $end\n$var wire 1 ! q $end\n#0\n0!\n").unwrap_err();
        assert!(matches!(err, WaveError::VcdFormat { .. }), "{err}");
        let err = parse_vcd(b"$var wire 1 ! q $end\n").unwrap_err();
        assert!(matches!(err, WaveError::VcdFormat { .. }));
    }

    #[test]
    fn x_initial_value_is_a_single_change() {
        let db = parse_vcd(b"$var wire 1 ! q $end $enddefinitions $end #0 $dumpvars x! $end #10").unwrap();
        assert_eq!(
            db.changes["q"],
            vec![Change {
                time: 0,
                value: "x".into()
            }]
        );
    }

    #[test]
    fn vectors_are_left_extended() {
        let db = parse_vcd(
            b"$var reg 4 # c [3:0] $end $var reg 4 % d $end $enddefinitions $end #0 b1 # bz % #1 b101 # bx1 %",
        )
        .unwrap();
        let c: Vec<_> = db.changes["c"].iter().map(|c| c.value.as_str()).collect();
        assert_eq!(c, vec!["0001", "0101"]);
        let d: Vec<_> = db.changes["d"].iter().map(|c| c.value.as_str()).collect();
        assert_eq!(d, vec!["zzzz", "xxx1"]);
    }

    #[test]
    fn aliases_share_changes_and_conflicts_are_rejected() {
        let src = "$scope module tb $end $var wire 1 ! a $end $scope module dut $end $var wire 1 ! a $end $upscope $end $upscope $end $enddefinitions $end #0 1!";
        let db = parse_vcd(src.as_bytes()).unwrap();
        assert_eq!(db.changes["tb.a"], db.changes["tb.dut.a"]);
        assert_eq!(db.resolve("a").unwrap(), "tb.a");
        let bad = "$var wire 1 ! a $end $var wire 2 ! b $end $enddefinitions $end";
        assert!(matches!(
            parse_vcd(bad.as_bytes()).unwrap_err(),
            WaveError::DuplicateIdCode { .. }
        ));
    }

    #[test]
    fn real_variables_are_rejected() {
        let err = parse_vcd(b"$var real 64 ! r $end $enddefinitions $end").unwrap_err();
        assert!(err.to_string().contains("real"));
    }

    #[test]
    fn error_offsets_point_into_the_stream() {
        let src = "$var wire 1 ! q $end $enddefinitions $end #0 0! #x";
        match parse_vcd(src.as_bytes()).unwrap_err() {
            WaveError::VcdFormat { offset, .. } => assert_eq!(&src[offset..], "#x"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn resolution_rules() {
        let src = "$scope module tb $end $var wire 1 ! q $end $var wire 1 \" q_ref $end
            $scope module dut $end $var wire 1 # q $end $upscope $end
            $scope module ref $end $var wire 1 $ q $end $upscope $end $upscope $end $enddefinitions $end";
        let db = parse_vcd(src.as_bytes()).unwrap();
        assert_eq!(db.resolve("dut.q").unwrap(), "tb.dut.q");
        assert_eq!(db.resolve("q").unwrap(), "tb.q");
        let only_nested = "$scope module tb $end $scope module a $end $var wire 1 ! s $end $upscope $end $scope module b $end $var wire 1 \" s $end $upscope $end $upscope $end $enddefinitions $end";
        let db2 = parse_vcd(only_nested.as_bytes()).unwrap();
        assert!(matches!(db2.resolve("s"), Err(WaveError::AmbiguousSignal { .. })));
        match db.resolve("qref") {
            Err(WaveError::UnknownSignal { near, .. }) => assert!(near.contains(&"tb.q_ref".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_keeps_bit_index_names() {
        let src = "$timescale 10ns $end $scope module tb $end $var wire 1 ! v [2] $end $var wire 3 \" w [2:0] $end $upscope $end $enddefinitions $end #0 1! b010 \" #7 0! #9";
        let db = parse_vcd(src.as_bytes()).unwrap();
        assert!(db.signals.contains_key("tb.v[2]"));
        let again = parse_vcd(to_vcd(&db).as_bytes()).unwrap();
        assert_eq!(db, again);
        assert_eq!(again.end_time, 9);
    }

    #[test]
    fn first_divergence_between_two_nets() {
        let src = "$var wire 1 ! a $end $var wire 1 \" b $end $enddefinitions $end #0 0! 0\" #4 1! #6 1\" #8 0! 0\"";
        let db = parse_vcd(src.as_bytes()).unwrap();
        assert_eq!(db.first_divergence("a", "b"), Some(4));
        assert_eq!(db.first_divergence("a", "a"), None);
    }
}
