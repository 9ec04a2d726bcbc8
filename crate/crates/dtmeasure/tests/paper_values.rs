mod common;

use common::{f_beta_oracle, table1_from_paper, TABLE1};
use dtmeasure_core::classify::f_beta;

/// The bundled Table 1 constants match the published table. The source
/// text is not shipped with the repository, so this only runs locally.
#[test]
fn table1_constants_match_the_published_table() {
    let Some(rows) = table1_from_paper() else {
        eprintln!("paper.md not present; skipping");
        return;
    };
    assert_eq!(rows.len(), TABLE1.len());
    for (name, p, r, f1, f07) in &rows {
        let t = TABLE1.iter().find(|t| t.0 == name).unwrap();
        assert_eq!((t.1, t.2, t.3, t.4), (*p, *r, *f1, *f07), "{name}");
    }
}

/// Oracle and library agree away from the published rows too.
#[test]
fn f_beta_matches_oracle_on_a_grid() {
    for i in 1..20 {
        for j in 1..20 {
            let (p, r) = (i as f64 / 20.0, j as f64 / 20.0);
            for beta in [0.5, 0.7, 0.8, 1.0, 2.0] {
                let got = f_beta(p, r, beta);
                assert!((got - f_beta_oracle(p, r, beta)).abs() < 1e-14, "{p} {r} {beta}");
                assert!(got >= p.min(r) - 1e-14 && got <= p.max(r) + 1e-14);
            }
        }
    }
    assert_eq!(f_beta(0.0, 0.0, 1.0), 0.0);
}
