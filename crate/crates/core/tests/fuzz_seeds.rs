//! Runs the checked-in fuzz corpus through the same decoders and round-trip checks as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use quadba::forms::mat_vec;
use quadba::game::{parse_script, BallSpec, Transcript};
use quadba::lattice::LatticePoint;
use quadba::rational::{fmt_rational, int, parse_rational, parse_rational_vector};
use quadba::QuadraticForm;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn parse_form_seeds() {
    let mut ok = 0;
    for (name, s) in seeds("parse_form") {
        if let Ok(q) = QuadraticForm::parse(&s) {
            let back = QuadraticForm::parse(&q.to_string()).unwrap();
            assert_eq!(back.signed_coeffs(), q.signed_coeffs(), "{name}");
            ok += 1;
        }
    }
    assert_eq!(ok, 4);
}

#[test]
fn parse_rational_vector_seeds() {
    let mut ok = 0;
    for (_, s) in seeds("parse_rational_vector") {
        if let Ok(v) = parse_rational_vector(&s) {
            for r in &v {
                assert_eq!(&parse_rational(&fmt_rational(r)).unwrap(), r);
            }
            ok += 1;
        }
    }
    assert_eq!(ok, 2);
}

#[test]
fn form_matrix_seeds() {
    let mut ok = 0;
    for (name, s) in seeds("form_matrix") {
        let Ok(q) = QuadraticForm::parse(&format!("[{s}]")) else { continue };
        if let Some(m) = q.transform() {
            let v: Vec<_> = (0..q.dim()).map(|i| int(i as i64 + 1)).collect();
            assert_eq!(q.evaluate_general(&mat_vec(m, &v)).unwrap(), q.evaluate(&v).unwrap(), "{name}");
        }
        ok += 1;
    }
    assert_eq!(ok, 3);
}

#[test]
fn transcript_seeds() {
    let mut ok = 0;
    for (_, s) in seeds("transcript") {
        if let Ok(t) = Transcript::from_json(&s) {
            assert_eq!(Transcript::from_json(&t.to_json()).unwrap().to_json(), t.to_json());
            ok += 1;
        }
    }
    assert_eq!(ok, 2);
}

#[test]
fn move_script_seeds() {
    for (name, s) in seeds("move_script") {
        let single = serde_json::from_str::<BallSpec>(&s).is_ok();
        let moves = parse_script(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!moves.is_empty());
        assert_eq!(parse_script(&serde_json::to_string(&moves).unwrap()).unwrap(), moves);
        if single {
            assert_eq!(moves.len(), 1);
        }
    }
}

#[test]
fn point_line_seeds() {
    let q = QuadraticForm::parse("1,1,-1").unwrap();
    let mut ok = 0;
    for (_, s) in seeds("point_line") {
        if let Ok(p) = LatticePoint::from_json_line(&q, s.trim()) {
            assert_eq!(LatticePoint::from_json_line(&q, &p.to_json_line()).unwrap(), p);
            ok += 1;
        }
    }
    assert_eq!(ok, 1);
}
