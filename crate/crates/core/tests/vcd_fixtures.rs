//! The hand-written dumps under `fixtures/vcd` parse and round-trip.

use std::path::Path;

use rtlsmith_core::parse_vcd;
use rtlsmith_core::waveform::to_vcd;

#[test]
fn hand_written_dumps_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/vcd");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("vcd") {
            continue;
        }
        let db = parse_vcd(&std::fs::read(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = parse_vcd(to_vcd(&db).as_bytes()).unwrap();
        assert_eq!(again, db, "{}", path.display());
        n += 1;
    }
    assert!(n >= 4);
}

#[test]
fn shared_identifier_codes_alias_one_waveform() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/vcd");
    let db = parse_vcd(&std::fs::read(dir.join("fsm.vcd")).unwrap()).unwrap();
    assert_eq!(db.value_at("tb.z_ref", 25).as_deref(), Some("1"));
    assert_eq!(db.value_at("tb.good1.z", 25).as_deref(), Some("1"));
    assert_eq!(db.value_at("tb.dut.z", 35).as_deref(), Some("0"));
    assert_eq!(db.first_divergence("tb.dut.z", "tb.good1.z"), Some(35));
}
