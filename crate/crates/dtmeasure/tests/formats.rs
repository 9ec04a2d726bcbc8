use std::path::{Path, PathBuf};

use dtmeasure::formats::{self, LabeledExample};
use dtmeasure::Error;
use dtmeasure_core::annotation::Label;
use dtmeasure_core::indicators::{FirmYearIndicators, IndicatorMode};
use dtmeasure_core::lexicon::{Category, LexiconEntry, MatchMode};
use dtmeasure_core::Technology;
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Asserts an input error (exit code 2) whose message contains `needle`.
fn input_error<T: std::fmt::Debug>(r: dtmeasure::Result<T>, needle: &str) {
    let e = r.unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
    assert!(e.to_string().contains(needle), "`{e}` lacks `{needle}`");
}

const MANIFEST_HEAD: &str = "firm_id,year,exchange,naics,employees,text_path\n";

#[test]
fn manifest_reads_missing_employees() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir, "a.txt", "text");
    let m = write(&dir, "m.csv", &format!("{MANIFEST_HEAD}F1,2018,NYSE,5112,NA,a.txt\nF1,2019,NYSE,5112,120,a.txt\n"));
    let r = formats::read_manifest(&m).unwrap();
    assert_eq!(r[0].employees, None);
    assert_eq!(r[1].employees, Some(120));
}

#[test]
fn manifest_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir, "a.txt", "text");
    let case = |body: &str| write(&dir, "m.csv", &format!("{MANIFEST_HEAD}{body}"));
    input_error(formats::read_manifest(&case("F1,2018,NYSE,5112,,a.txt\nF1,20x9,NYSE,5112,,a.txt\n")), "row 2: malformed year `20x9`");
    input_error(formats::read_manifest(&case("F1,2018,NYSE,5112,many,a.txt\n")), "row 1: malformed employees");
    input_error(formats::read_manifest(&case("F1,1890,NYSE,5112,,a.txt\n")), "row 1: year 1890");
    input_error(formats::read_manifest(&case("F1,2018,NYSE,5112,,missing.txt\n")), "filing text not found");
    input_error(formats::read_manifest(&case("F1,2018,NYSE,5112,,a.txt\nF1,2018,NYSE,5112,,a.txt\n")), "F1");
    input_error(formats::read_manifest(&case("F1,2018,NYSE\n")), "row 1");
    let bad_header = write(&dir, "h.csv", "firm,year\nF1,2018\n");
    input_error(formats::read_manifest(&bad_header), "expected header");
}

#[test]
fn missing_file_is_an_io_error() {
    let e = formats::read_manifest(Path::new("/nonexistent/manifest.csv")).unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn lexicon_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let entries = vec![
        LexiconEntry {
            term: "machine learning".into(),
            category: Category::Tech(Technology::Ai),
            match_mode: MatchMode::WordBoundary,
            case_sensitive: false,
        },
        LexiconEntry {
            term: "IoT".into(),
            category: Category::Tech(Technology::Iot),
            match_mode: MatchMode::Substring,
            case_sensitive: true,
        },
    ];
    let p = dir.path().join("lex.csv");
    formats::write_lexicon(&p, &entries).unwrap();
    assert_eq!(formats::read_lexicon(&p).unwrap().entries(), entries.as_slice());

    let head = "term,category,match_mode,case_sensitive\n";
    input_error(formats::read_lexicon(&write(&dir, "e.csv", head)), "no entries");
    input_error(formats::read_lexicon(&write(&dir, "b.csv", &format!("{head}cloud,XX,,false\n"))), "row 1");
    input_error(formats::read_lexicon(&write(&dir, "c.csv", &format!("{head}cloud,CC,FUZZY,false\n"))), "row 1");
    input_error(formats::read_lexicon(&write(&dir, "d.csv", &format!("{head}cloud,CC,,maybe\n"))), "malformed boolean");
    // An empty match mode defaults to word boundaries.
    let lex = formats::read_lexicon(&write(&dir, "f.csv", &format!("{head}cloud,CC,,\n"))).unwrap();
    assert_eq!(lex.entries()[0].match_mode, MatchMode::WordBoundary);
}

#[test]
fn indicators_round_trip_and_disjunction_check() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        FirmYearIndicators {
            firm_id: "F1".into(),
            year: 2018,
            flags: [false, true, false, false, false, false],
            dt: true,
            mode: IndicatorMode::Cumulative,
        },
        FirmYearIndicators {
            firm_id: "F2".into(),
            year: 2018,
            flags: [false; 6],
            dt: false,
            mode: IndicatorMode::Cumulative,
        },
    ];
    let p = dir.path().join("ind.csv");
    formats::write_indicators(&p, &rows).unwrap();
    assert_eq!(formats::read_indicators(&p).unwrap(), rows);

    let head = "firm_id,year,ai,bd,cc,iot,bc,mi,dt,mode\n";
    let bad = write(&dir, "b.csv", &format!("{head}F1,2018,0,0,0,0,0,0,1,CUMULATIVE\n"));
    input_error(formats::read_indicators(&bad), "disjunction");
    let bad = write(&dir, "c.csv", &format!("{head}F1,2018,0,2,0,0,0,0,1,CUMULATIVE\n"));
    input_error(formats::read_indicators(&bad), "expected 0 or 1");
    let bad = write(&dir, "d.csv", &format!("{head}F1,2018,0,0,0,0,0,0,0,SOMETIMES\n"));
    input_error(formats::read_indicators(&bad), "unknown mode");
}

#[test]
fn locations_and_roster_validation() {
    let dir = tempfile::tempdir().unwrap();
    let head = "firm_id,lat,lon,city_id\n";
    input_error(formats::read_locations(&write(&dir, "a.csv", &format!("{head}F1,40,-70,NYC\nF1,41,-71,BOS\n"))), "duplicate firm");
    input_error(formats::read_locations(&write(&dir, "b.csv", &format!("{head}F1,95,-70,NYC\n"))), "row 1");
    input_error(formats::read_locations(&write(&dir, "c.csv", &format!("{head}F1,40,-70,\n"))), "empty city_id");
    input_error(formats::read_locations(&write(&dir, "d.csv", &format!("{head}F1,north,-70,NYC\n"))), "malformed lat");
    let roster = formats::read_roster(&write(&dir, "r.csv", "name,lat,lon\nU1,42.36,-71.09\n")).unwrap();
    assert_eq!(roster[0].name, "U1");
    input_error(formats::read_roster(&write(&dir, "s.csv", "name,lat,lon\nU1,inf,-71\n")), "malformed lat");
}

#[test]
fn panel_missing_values_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.csv", "firm_id,year,naics,roa\nF1,2018,51-12,0.1\nF1,2019,51-12,NA\nF2,2018,,\n");
    let d = formats::read_panel(&p, &["naics".into()]).unwrap();
    assert_eq!(d.column("roa").unwrap(), &[Some(0.1), None, None]);
    input_error(formats::read_panel(&p, &[]), "row 1: malformed naics");
    input_error(formats::read_panel(&write(&dir, "q.csv", "year,firm_id\n2018,F1\n"), &[]), "firm_id,year");
}

#[test]
fn labeled_examples_reject_excluded_and_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let ex = vec![LabeledExample {
        sentence_id: "s1".into(),
        text: "We deployed, \"quoted\" text.".into(),
        label: Label::Blockchain,
    }];
    let p = dir.path().join("l.csv");
    formats::write_labeled(&p, &ex).unwrap();
    assert_eq!(formats::read_labeled(&p).unwrap(), ex);
    let head = "sentence_id,text,label\n";
    input_error(formats::read_labeled(&write(&dir, "a.csv", &format!("{head}s1,x,EXCLUDED\n"))), "EXCLUDED");
    input_error(formats::read_labeled(&write(&dir, "b.csv", &format!("{head}s1,x,AI\ns1,y,AI\n"))), "row 2: duplicate");
    input_error(formats::read_labeled(&write(&dir, "c.csv", &format!("{head}s1,x,ROBOTICS\n"))), "unknown label");
}

#[test]
fn jsonl_errors_name_the_line_and_pools_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pool.jsonl");
    let ids = vec!["a".to_string(), "b".to_string()];
    formats::write_pool(&p, &ids).unwrap();
    assert_eq!(formats::read_pool(&p).unwrap(), ids);
    let bad = write(&dir, "bad.jsonl", "{\"sentence_id\":\"a\"}\n\n{\"sentence\":1}\n");
    input_error(formats::read_pool(&bad), "line 3");
}

#[test]
fn invalid_utf8_text_is_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.txt");
    std::fs::write(&p, b"caf\xe9 cloud").unwrap();
    assert_eq!(formats::read_text_lossy(&p).unwrap(), "caf\u{fffd} cloud");
}

#[test]
fn byte_order_mark_and_header_case_are_tolerated() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "r.csv", "\u{feff}Name,LAT,lon\nU1,1,2\n");
    assert_eq!(formats::read_roster(&p).unwrap().len(), 1);
}
